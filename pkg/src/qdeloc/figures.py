"""Desk-scale reproduction of the reference result set as static SVG plots.

Each figure id emits three files into the output directory: the underlying
data as CSV, a static SVG, and a JSON sidecar recording the parameter
substitutions used at the given scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import exactsim, harness, oracles, replicatn  # noqa: E402
from .errors import ConfigurationError  # noqa: E402

FIGURE_IDS = ("fig1_left", "fig1_right", "fig2a", "fig2b", "fig2cd", "fig3")

#: parameter substitutions per scale; "desk" fits a laptop-class budget
SCALES = {
    "desk": {
        "fig1_left": {"d": 2, "N": 12, "depth": 14, "realizations": 1000, "q": 2},
        "fig1_right": {"d": 2, "n_values": [8, 16, 64], "depth": 30},
        "fig2a": {"d": 2, "N": 12, "depth": 14, "realizations": 1000, "q": 3},
        "fig2b": {"d": 2, "n_values": [32, 64, 128], "depth": 26},
        "fig2cd": {"d": 2, "n_values": [8, 10, 12], "depth": 12,
                   "realizations": 500, "q_values": [1, 4]},
        "fig3": {"n_values": [16], "d_values": [2, 3], "cut": 8, "depth": 20},
    },
    "smoke": {
        "fig1_left": {"d": 2, "N": 6, "depth": 8, "realizations": 60, "q": 2},
        "fig1_right": {"d": 2, "n_values": [8, 16], "depth": 12},
        "fig2a": {"d": 2, "N": 6, "depth": 8, "realizations": 60, "q": 3},
        "fig2b": {"d": 2, "n_values": [8, 16], "depth": 10},
        "fig2cd": {"d": 2, "n_values": [6, 8], "depth": 8,
                   "realizations": 50, "q_values": [1, 4]},
        "fig3": {"n_values": [8], "d_values": [2], "cut": 4, "depth": 12},
    },
}


@dataclass
class FigureArtifacts:
    figure_id: str
    csv: Path
    svg: Path
    sidecar: Path


def reproduce_figure(figure_id: str, scale: str = "desk",
                     out_dir: str | Path = "runs/figures",
                     seed: int = 42) -> FigureArtifacts:
    """Compute and render one figure at the requested scale."""
    if figure_id not in FIGURE_IDS:
        raise ConfigurationError(f"unknown figure id {figure_id!r}; pick from {FIGURE_IDS}")
    if scale not in SCALES:
        raise ConfigurationError(f"unknown scale {scale!r}; pick from {tuple(SCALES)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = dict(SCALES[scale][figure_id])
    builder = {
        "fig1_left": _fig_self_averaging,
        "fig1_right": _fig_tn_decay_q2,
        "fig2a": _fig_self_averaging,
        "fig2b": _fig_tn_decay_q3,
        "fig2cd": _fig_exact_decay_q14,
        "fig3": _fig_purity_walk,
    }[figure_id]
    rows, render, extras = builder(figure_id, params, seed)

    csv_path = out_dir / f"{figure_id}.csv"
    _write_rows(csv_path, rows)
    svg_path = out_dir / f"{figure_id}.svg"
    render(svg_path)
    sidecar = out_dir / f"{figure_id}.json"
    sidecar.write_text(json.dumps(
        {"figure_id": figure_id, "scale": scale, "parameters": params,
         "seed": seed, **extras}, indent=2, sort_keys=True))
    return FigureArtifacts(figure_id, csv_path, svg_path, sidecar)


def _write_rows(path: Path, rows: list[dict]) -> None:
    import csv as _csv
    with open(path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _fig_self_averaging(figure_id: str, p: dict, seed: int):
    """Quenched vs annealed participation entropy for one (d, N, q)."""
    d, N, q = p["d"], p["N"], p["q"]
    stats = exactsim.ensemble_run(d, N, p["depth"], (q,), p["realizations"], seed)
    s_stat = oracles.haar_entropy(d, N, q)
    rows = [{
        "t": int(t),
        "s_annealed": float(stats.s_annealed[ti, 0]),
        "s_annealed_err": float(stats.s_annealed_err[ti, 0]),
        "s_quenched": float(stats.s_quenched[ti, 0]),
        "s_quenched_err": float(stats.s_quenched_err[ti, 0]),
        "s_stationary": s_stat,
    } for ti, t in enumerate(stats.depths)]

    def render(svg_path: Path) -> None:
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        t = stats.depths
        ax.errorbar(t, stats.s_annealed[:, 0] / N, stats.s_annealed_err[:, 0] / N,
                    fmt="o-", ms=3, label="annealed")
        ax.errorbar(t, stats.s_quenched[:, 0] / N, stats.s_quenched_err[:, 0] / N,
                    fmt="s-", ms=3, label="quenched")
        ax.axhline(s_stat / N, color="k", ls=":", lw=1, label="stationary")
        ax.set_xlabel("depth t")
        ax.set_ylabel(f"S_{q} / N")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(svg_path)
        plt.close(fig)

    return rows, render, {"stationary_entropy": s_stat}


def _fig_tn_decay_q2(figure_id: str, p: dict, seed: int):
    return _fig_tn_decay(p, q=2, alpha_ref=None)


def _fig_tn_decay_q3(figure_id: str, p: dict, seed: int):
    return _fig_tn_decay(p, q=3, alpha_ref=oracles.REFERENCE_PREFACTOR_D2_Q3)


def _fig_tn_decay(p: dict, q: int, alpha_ref: float | None):
    """Stationary-entropy deficit decay from the averaged tensor network."""
    d = p["d"]
    n_values = p["n_values"]
    depth = p["depth"]
    rows = []
    data = {}
    for N in n_values:
        logs = replicatn.ipr_log_series(d, q, N, depth)
        stat = oracles.haar_ipr_log(d, N, q)
        deficit = (logs - stat) / (q - 1.0)
        data[N] = deficit
        for ti, dv in enumerate(deficit):
            rows.append({"N": N, "t": ti + 1, "deficit": float(dv)})
    points = {N: (np.arange(1, depth + 1, dtype=float), data[N],
                  np.zeros(depth)) for N in n_values}
    fit = harness.fit_decay(points)
    base = oracles.decay_base(d)

    def render(svg_path: Path) -> None:
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        t = np.arange(1, depth + 1)
        for N in n_values:
            ax.semilogy(t, data[N], "o", ms=3, label=f"N={N}")
            alpha = alpha_ref if alpha_ref is not None else fit.alpha
            ax.semilogy(t, alpha * N * base ** (t - 1.0), "--", lw=1)
        ax.set_xlabel("depth t")
        ax.set_ylabel(f"stationary deficit of S_{q}")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(svg_path)
        plt.close(fig)

    extras = {"fitted_base": fit.base, "expected_base": base,
              "fitted_alpha": fit.alpha}
    return rows, render, extras


def _fig_exact_decay_q14(figure_id: str, p: dict, seed: int):
    """Monte Carlo deficit decay for orders q = 1 and q = 4."""
    d = p["d"]
    rows = []
    curves = {}
    for q in p["q_values"]:
        for N in p["n_values"]:
            stats = exactsim.ensemble_run(d, N, p["depth"], (q,),
                                          p["realizations"], seed)
            s_stat = oracles.haar_entropy(d, N, q)
            deficit = s_stat - stats.s_annealed[:, 0]
            curves[(q, N)] = deficit
            for ti, dv in enumerate(deficit):
                rows.append({"q": q, "N": N, "t": ti + 1, "deficit": float(dv)})

    def render(svg_path: Path) -> None:
        fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.4))
        t = np.arange(1, p["depth"] + 1)
        base = oracles.decay_base(d)
        for ax, q in zip(axes, p["q_values"]):
            for N in p["n_values"]:
                dv = np.maximum(curves[(q, N)], 1e-16)
                ax.semilogy(t, dv, "o-", ms=3, label=f"N={N}")
            ax.semilogy(t, base ** t, "k:", lw=1, label="base^t")
            ax.set_xlabel("depth t")
            ax.set_ylabel(f"stationary deficit of S_{q}")
            ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(svg_path)
        plt.close(fig)

    return rows, render, {}


def _fig_purity_walk(figure_id: str, p: dict, seed: int):
    """Averaged two-replica purity vs the absorbing-walk closed form."""
    rows = []
    curves = {}
    worst = 0.0
    for d in p["d_values"]:
        for N in p["n_values"]:
            cut = p["cut"]
            logs = replicatn.purity_log_series(d, 2, N, cut, p["depth"])
            tn = np.exp(logs)
            walk = np.array([oracles.walk_purity(d, N, cut, t)
                             for t in range(1, p["depth"] + 1)])
            worst = max(worst, float(np.abs(tn - walk).max()))
            curves[(d, N)] = (tn, walk)
            for ti in range(p["depth"]):
                rows.append({"d": d, "N": N, "cut": cut, "t": ti + 1,
                             "purity_tn": float(tn[ti]),
                             "purity_walk": float(walk[ti])})

    def render(svg_path: Path) -> None:
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        t = np.arange(1, p["depth"] + 1)
        for (d, N), (tn, walk) in curves.items():
            ax.semilogy(t, tn, "o", ms=3, label=f"d={d}, N={N}")
            ax.semilogy(t, walk, "-", lw=1)
        ax.set_xlabel("depth t")
        ax.set_ylabel("averaged purity")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(svg_path)
        plt.close(fig)

    return rows, render, {"max_abs_deviation_from_walk": worst}
