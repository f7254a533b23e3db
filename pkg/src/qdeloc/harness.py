"""Experiment orchestration: engine dispatch, decay-law fitting, cross-engine
consistency checks, and all file I/O (CSV series, JSON manifests)."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import exactsim, oracles, replicatn
from .errors import ConfigurationError, FitWindowError
from .permutations import build_group, weingarten

ENGINES = ("exact", "tn", "oracle")

#: capability matrix: per-engine parameter limits enforced before dispatch
ENGINE_LIMITS = {
    "exact": {"max_amplitudes": exactsim.MAX_AMPLITUDES, "max_q": None},
    "tn": {"max_q_default": replicatn.DEFAULT_TN_ORDER_CAP,
           "max_q": replicatn.MAX_TN_ORDER},
    "oracle": {},
}


@dataclass
class ExperimentConfig:
    """One experiment grid: an engine plus its parameter lists."""

    engine: str
    d: int = 2
    n_values: tuple[int, ...] = (8,)
    q_values: tuple[float, ...] = (2,)
    depth: int = 10
    realizations: int = 1000
    seed: int = 42
    eps: float = 1e-15
    chi_max: int = 512
    purity_cuts: tuple[int, ...] = ()
    sum_bipartitions: bool = False
    allow_large_q: bool = False
    workers: int | None = None
    out: str | None = None

    def validate(self) -> None:
        if self.engine not in ENGINES:
            raise ConfigurationError(f"unknown engine {self.engine!r}; pick from {ENGINES}")
        if self.d < 2:
            raise ConfigurationError(f"local dimension must be >= 2, got {self.d}")
        if any(n % 2 or n < 2 for n in self.n_values):
            raise ConfigurationError(f"site counts must be even and >= 2: {self.n_values}")
        if self.depth < 1:
            raise ConfigurationError(f"depth must be >= 1, got {self.depth}")
        if self.engine == "exact":
            for n in self.n_values:
                if self.d ** n > ENGINE_LIMITS["exact"]["max_amplitudes"]:
                    raise ConfigurationError(
                        f"exact engine: d^N = {self.d**n} exceeds "
                        f"{ENGINE_LIMITS['exact']['max_amplitudes']}")
        if self.engine == "tn":
            cap = (ENGINE_LIMITS["tn"]["max_q"] if self.allow_large_q
                   else ENGINE_LIMITS["tn"]["max_q_default"])
            for q in self.q_values:
                if q != int(q) or q < 1:
                    raise ConfigurationError(f"tn engine needs integer q >= 1, got {q}")
                if q > cap:
                    raise ConfigurationError(
                        f"tn engine: q={q} beyond cap {cap} "
                        "(set allow_large_q for q=4)")
        for cut in self.purity_cuts:
            if any(not 0 <= cut <= n for n in self.n_values):
                raise ConfigurationError(f"purity cut {cut} outside 0..N")


@dataclass
class SeriesRecord:
    """One (engine, d, N, q, t) measurement."""

    provenance: str          # mc | tn | oracle
    d: int
    N: int
    q: float
    t: int
    value_kind: str = "ipr"  # ipr | purity
    i_mean: float = math.nan
    i_stderr: float = 0.0
    s_annealed: float = math.nan
    s_annealed_err: float = 0.0
    s_quenched: float = math.nan
    s_quenched_err: float = 0.0
    n_realizations: int = 0
    seed: int = 0
    eps: float = math.nan
    chi_max_used: int = 0
    log_value: float = math.nan


class ObservableSeries:
    """A flat collection of SeriesRecords with deficit helpers."""

    def __init__(self, records: Iterable[SeriesRecord] = ()):
        self.records: list[SeriesRecord] = list(records)

    def append(self, rec: SeriesRecord) -> None:
        self.records.append(rec)

    def extend(self, recs: Iterable[SeriesRecord]) -> None:
        self.records.extend(recs)

    def select(self, **criteria) -> "ObservableSeries":
        out = [r for r in self.records
               if all(getattr(r, k) == v for k, v in criteria.items())]
        return ObservableSeries(out)

    def deficit_points(self, d: int, N: int, q: float,
                       value_kind: str = "ipr") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(t, stationary-entropy deficit, error) for one (d, N, q) slice.

        The deficit is the stationary annealed entropy minus the annealed
        entropy at depth t, with the same stationary convention for every
        engine.  Records carrying exact log-values (tn engine) compute it
        as (q-1)^-1 (ln I(t) - ln I_stationary), which survives deficits
        far below float resolution of the entropies themselves.
        """
        recs = sorted((r for r in self.records
                       if r.d == d and r.N == N and r.q == q
                       and r.value_kind == value_kind),
                      key=lambda r: r.t)
        t = np.array([r.t for r in recs], dtype=float)
        deficit = np.empty(len(recs))
        err = np.empty(len(recs))
        log_stat = oracles.haar_ipr_log(d, N, int(q)) if q == int(q) else None
        s_stat = oracles.haar_entropy(d, N, q)
        for k, r in enumerate(recs):
            if not math.isnan(r.log_value) and q != 1 and log_stat is not None:
                deficit[k] = (r.log_value - log_stat) / (q - 1.0)
                err[k] = 0.0
            else:
                deficit[k] = s_stat - r.s_annealed
                err[k] = r.s_annealed_err
        return t, deficit, err

    # -- CSV ----------------------------------------------------------------

    EXACT_COLUMNS = ("t", "q", "I_mean", "I_stderr", "S_annealed", "S_annealed_err",
                     "S_quenched", "S_quenched_err", "n_realizations", "d", "N", "seed")
    TN_COLUMNS = ("t", "value_kind", "value", "log_deficit", "d", "N", "q",
                  "eps", "chi_max_used")

    def write_exact_csv(self, path: str | Path) -> None:
        with _crash_safe_writer(path, self.EXACT_COLUMNS) as w:
            for r in sorted(self.records, key=lambda r: (r.N, r.q, r.t)):
                w.writerow([r.t, _fmt(r.q), _fmt(r.i_mean), _fmt(r.i_stderr),
                            _fmt(r.s_annealed), _fmt(r.s_annealed_err),
                            _fmt(r.s_quenched), _fmt(r.s_quenched_err),
                            r.n_realizations, r.d, r.N, r.seed])

    def write_tn_csv(self, path: str | Path) -> None:
        with _crash_safe_writer(path, self.TN_COLUMNS) as w:
            for r in sorted(self.records, key=lambda r: (r.N, r.q, r.value_kind, r.t)):
                if r.value_kind == "ipr" and r.q != 1:
                    log_def = _fmt(r.log_value - oracles.haar_ipr_log(r.d, r.N, int(r.q)))
                else:
                    log_def = ""
                w.writerow([r.t, r.value_kind, _fmt(math.exp(r.log_value)),
                            log_def, r.d, r.N, _fmt(r.q), _fmt(r.eps), r.chi_max_used])


def _fmt(x) -> str:
    """Shortest round-trip float formatting; deterministic across runs."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


class _crash_safe_writer:
    """CSV writer that appends the header once and flushes per row."""

    def __init__(self, path: str | Path, columns: Sequence[str]):
        self.path = Path(path)
        self.columns = columns

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        new = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = open(self.path, "a", newline="")
        self._writer = csv.writer(self._fh)
        if new:
            self._writer.writerow(self.columns)
            self._fh.flush()
        return self

    def writerow(self, row) -> None:
        self._writer.writerow(row)
        self._fh.flush()

    def __exit__(self, *exc):
        self._fh.close()
        return False


def write_manifest(out_dir: str | Path, config: dict, extra: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config,
        "versions": {
            "qdeloc": _package_version(),
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": None,
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _package_version() -> str:
    from . import __version__
    return __version__


# ---------------------------------------------------------------------------
# engine dispatch
# ---------------------------------------------------------------------------


def run(config: ExperimentConfig) -> ObservableSeries:
    """Dispatch one experiment grid and (optionally) write its CSV."""
    config.validate()
    t0 = time.time()
    series = ObservableSeries()
    if config.engine == "exact":
        _run_exact(config, series)
    elif config.engine == "tn":
        _run_tn(config, series)
    else:
        _run_oracle(config, series)
    if config.out:
        out = Path(config.out)
        if config.engine == "exact":
            series.write_exact_csv(out)
        elif config.engine == "tn":
            series.write_tn_csv(out)
        else:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps([asdict(r) for r in series.records], indent=2))
        write_manifest(out.parent, _config_dict(config),
                       {"wall_time_s": round(time.time() - t0, 3)})
    return series


def _config_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["n_values"] = list(config.n_values)
    d["q_values"] = list(config.q_values)
    d["purity_cuts"] = list(config.purity_cuts)
    return d


def _run_exact(config: ExperimentConfig, series: ObservableSeries) -> None:
    for N in config.n_values:
        stats = exactsim.ensemble_run(
            config.d, N, config.depth, config.q_values,
            config.realizations, config.seed,
            purity_cuts=config.purity_cuts, workers=config.workers)
        for k, q in enumerate(config.q_values):
            for ti, t in enumerate(stats.depths):
                series.append(SeriesRecord(
                    provenance="mc", d=config.d, N=N, q=q, t=int(t),
                    i_mean=float(stats.i_mean[ti, k]),
                    i_stderr=float(stats.i_stderr[ti, k]),
                    s_annealed=float(stats.s_annealed[ti, k]),
                    s_annealed_err=float(stats.s_annealed_err[ti, k]),
                    s_quenched=float(stats.s_quenched[ti, k]),
                    s_quenched_err=float(stats.s_quenched_err[ti, k]),
                    n_realizations=stats.n_realizations, seed=config.seed))


def _run_tn(config: ExperimentConfig, series: ObservableSeries) -> None:
    for N in config.n_values:
        for q in config.q_values:
            q = int(q)
            logs = replicatn.ipr_log_series(config.d, q, N, config.depth,
                                            eps=config.eps, chi_max=config.chi_max,
                                            allow_large_q=config.allow_large_q)
            for ti, logv in enumerate(logs):
                s_ann = (logv / (1.0 - q)) if q != 1 else 0.0
                series.append(SeriesRecord(
                    provenance="tn", d=config.d, N=N, q=q, t=ti + 1,
                    i_mean=math.exp(logv), log_value=float(logv),
                    s_annealed=s_ann, eps=config.eps,
                    chi_max_used=config.chi_max, seed=config.seed))
            for cut in config.purity_cuts:
                plogs = replicatn.purity_log_series(
                    config.d, q, N, cut, config.depth,
                    eps=config.eps, chi_max=config.chi_max,
                    allow_large_q=config.allow_large_q)
                for ti, logv in enumerate(plogs):
                    series.append(SeriesRecord(
                        provenance="tn", d=config.d, N=N, q=q, t=ti + 1,
                        value_kind="purity", i_mean=math.exp(logv),
                        log_value=float(logv), eps=config.eps,
                        chi_max_used=config.chi_max, seed=config.seed))
        if config.sum_bipartitions and 2 in [int(v) for v in config.q_values]:
            for t in range(1, config.depth):
                val = replicatn.sum_over_bipartitions(config.d, N, t,
                                                      eps=config.eps,
                                                      chi_max=config.chi_max)
                series.append(SeriesRecord(
                    provenance="tn", d=config.d, N=N, q=2, t=t + 1,
                    value_kind="bipartition_sum", i_mean=val,
                    log_value=math.log(val), eps=config.eps,
                    chi_max_used=config.chi_max, seed=config.seed))


def _run_oracle(config: ExperimentConfig, series: ObservableSeries) -> None:
    for N in config.n_values:
        for q in config.q_values:
            s_stat = oracles.haar_entropy(config.d, N, q)
            for t in range(1, config.depth + 1):
                series.append(SeriesRecord(
                    provenance="oracle", d=config.d, N=N, q=q, t=t,
                    i_mean=oracles.haar_ipr(config.d, N, int(q)) if q == int(q) else math.nan,
                    s_annealed=s_stat, seed=config.seed))


# ---------------------------------------------------------------------------
# decay-law fitting
# ---------------------------------------------------------------------------


@dataclass
class DecayFit:
    """Fitted exponential saturation law deficit ~= prefactor_N * base^(t-1)."""

    base: float
    base_stderr: float
    prefactors: dict[int, float]
    alpha: float                  # slope of prefactor vs N
    alpha_stderr: float
    alpha_intercept: float
    r_squared: float
    windows: dict[int, tuple[int, int]]
    n_points: int
    per_n_bases: dict[int, float] = field(default_factory=dict)

    def delocalization_time(self, N: int, eps: float) -> float:
        """Depth at which the fitted deficit for chain size N crosses eps."""
        pref = self.prefactors.get(N, self.alpha * N + self.alpha_intercept)
        return 1.0 + math.log(pref / eps) / (-math.log(self.base))


def default_fit_window(t: np.ndarray, deficit: np.ndarray,
                       err: np.ndarray | None = None) -> np.ndarray:
    """Boolean mask of fit-worthy depths: positive deficits clear of the
    noise floor, restricted to the last 60% of the usable range."""
    err = np.zeros_like(deficit) if err is None else err
    usable = (deficit > np.maximum(1e-10, 10.0 * err))
    idx = np.nonzero(usable)[0]
    if len(idx) == 0:
        return usable & False
    keep = max(4, int(math.ceil(0.6 * len(idx))))
    mask = np.zeros_like(usable)
    mask[idx[-keep:]] = True
    return mask & usable


def _wls_line(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, float, float]:
    """Weighted least squares y = a + b x; returns (a, b, var_a, var_b)."""
    W = w.sum()
    xm = (w * x).sum() / W
    ym = (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise FitWindowError("degenerate fit window: no spread in depth")
    b = (w * (x - xm) * (y - ym)).sum() / sxx
    a = ym - b * xm
    resid = y - (a + b * x)
    dof = max(len(x) - 2, 1)
    s2 = (w * resid ** 2).sum() / W * len(x) / dof
    return a, b, s2 / sxx, s2 * (1.0 / W + xm ** 2 / sxx)


def fit_decay(points: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]],
              window: tuple[int, int] | None = None) -> DecayFit:
    """Fit ln(deficit) = ln(prefactor_N) + (t-1) ln(base) across chain sizes.

    Parameters
    ----------
    points : mapping N -> (t, deficit, err) arrays.
    window : optional inclusive (t_min, t_max) override; otherwise each N
        uses the default window (last 60% of depths clear of noise).
    """
    xs, ys, ws, tags = [], [], [], []
    windows: dict[int, tuple[int, int]] = {}
    per_n_bases: dict[int, float] = {}
    prefactors: dict[int, float] = {}
    for N, (t, deficit, err) in sorted(points.items()):
        t = np.asarray(t, dtype=float)
        deficit = np.asarray(deficit, dtype=float)
        err = np.zeros_like(deficit) if err is None else np.asarray(err, dtype=float)
        if window is not None:
            mask = (t >= window[0]) & (t <= window[1]) & (deficit > 0)
        else:
            mask = default_fit_window(t, deficit, err)
        if mask.sum() < 4:
            raise FitWindowError(
                f"N={N}: only {int(mask.sum())} usable depths in the fit window")
        tw, dw, ew = t[mask], deficit[mask], err[mask]
        if np.any(dw <= 0):
            raise FitWindowError(f"N={N}: non-positive deficit inside the window")
        y = np.log(dw)
        rel = np.where(dw > 0, ew / dw, 0.0)
        w = np.where(rel > 0, 1.0 / rel ** 2, 1.0)
        w = w / w.max()
        a, b, _va, _vb = _wls_line(tw - 1.0, y, w)
        per_n_bases[N] = math.exp(b)
        prefactors[N] = math.exp(a)
        windows[N] = (int(tw.min()), int(tw.max()))
        xs.append(tw - 1.0)
        ys.append(y)
        ws.append(w)
        tags.append(np.full(len(tw), N))

    x = np.concatenate(xs)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    tag = np.concatenate(tags)
    n_list = sorted(points)

    # joint fit: shared slope, one intercept per N
    cols = [x] + [(tag == N).astype(float) for N in n_list]
    A = np.stack(cols, axis=1)
    Aw = A * np.sqrt(w)[:, None]
    yw = y * np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    slope = coef[0]
    resid = y - A @ coef
    dof = max(len(y) - len(coef), 1)
    cov = np.linalg.inv(Aw.T @ Aw) * float((np.sqrt(w) * resid @ (np.sqrt(w) * resid))) / dof
    base = math.exp(slope)
    base_err = base * math.sqrt(max(cov[0, 0], 0.0))
    ss_res = float((w * resid ** 2).sum())
    ym = float((w * y).sum() / w.sum())
    ss_tot = float((w * (y - ym) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    joint_prefactors = {N: math.exp(coef[1 + i]) for i, N in enumerate(n_list)}

    # prefactor growth with N
    if len(n_list) >= 2:
        narr = np.array(n_list, dtype=float)
        parr = np.array([joint_prefactors[N] for N in n_list])
        a0, alpha, _va, valpha = _wls_line(narr, parr, np.ones_like(narr))
        alpha_err = math.sqrt(max(valpha, 0.0))
    else:
        alpha = joint_prefactors[n_list[0]] / n_list[0]
        a0, alpha_err = 0.0, math.inf

    return DecayFit(base=base, base_stderr=base_err, prefactors=joint_prefactors,
                    alpha=alpha, alpha_stderr=alpha_err, alpha_intercept=a0,
                    r_squared=r2, windows=windows, n_points=len(y),
                    per_n_bases=per_n_bases)


def fit_from_series(series: ObservableSeries, d: int, q: float,
                    n_values: Sequence[int],
                    window: tuple[int, int] | None = None) -> DecayFit:
    points = {N: series.deficit_points(d, N, q) for N in n_values}
    return fit_decay(points, window=window)


# ---------------------------------------------------------------------------
# cross-engine consistency report
# ---------------------------------------------------------------------------


def crosscheck(d: int = 2, N: int = 8, q: int = 2, depth: int = 4,
               realizations: int = 20000, seed: int = 7,
               corrupt_hop_weight: bool = False,
               workers: int | None = None) -> dict:
    """Machine-readable consistency report binding the three engines.

    With ``corrupt_hop_weight`` the walk oracle uses a wrong hop weight
    d/(d^2+2); the purity comparison is then expected to fail (negative
    control).
    """
    checks = []

    def add(name: str, passed: bool, detail: str, **values) -> None:
        checks.append({"name": name, "status": "pass" if passed else "fail",
                       "detail": detail, **values})

    # moment coefficients solve their Gram system
    worst = 0.0
    for qq in range(1, 4):
        table = build_group(qq)
        wg = weingarten(table, d * d)
        worst = max(worst, wg.residual())
    add("weingarten_residual", worst < 1e-12,
        f"max Gram residual over q<=3 at D={d*d}", residual=worst)

    # tensor network vs Monte Carlo ensemble mean
    logs = replicatn.ipr_log_series(d, q, N, depth)
    stats = exactsim.ensemble_run(d, N, depth, (q,), realizations, seed,
                                  workers=workers)
    worst_z = 0.0
    for ti in range(depth):
        tn_val = math.exp(logs[ti])
        mc, err = float(stats.i_mean[ti, 0]), float(stats.i_stderr[ti, 0])
        if err > 0:
            worst_z = max(worst_z, abs(tn_val - mc) / err)
    add("tn_vs_mc", worst_z < 3.0,
        f"averaged IPR, {realizations} realizations, depths 1..{depth}",
        worst_sigma=worst_z)

    # tensor network purity vs the absorbing-walk closed form
    n_a = N // 2
    plogs = replicatn.purity_log_series(d, 2, N, n_a, depth)
    worst_dev = 0.0
    for t in range(1, depth + 1):
        wp = oracles.walk_purity(d, N, n_a, t)
        if corrupt_hop_weight:
            wp = _corrupted_walk_purity(d, N, n_a, t)
        worst_dev = max(worst_dev, abs(math.exp(plogs[t - 1]) - wp))
    add("tn_vs_walk", worst_dev < 1e-8,
        f"two-replica purity at N_A={n_a}, depths 1..{depth}",
        worst_abs_deviation=worst_dev)

    # spectral walk solution satisfies its recursion
    worst_rec = 0.0
    for z in range(1, N):
        for t in range(0, 30):
            lhs = oracles.walk_absorption(N, z, t + 1)
            left = 1.0 if (z - 1 == 0 and t == 0) else (
                0.0 if z - 1 == 0 else oracles.walk_absorption(N, z - 1, t))
            right = 1.0 if (z + 1 == N and t == 0) else (
                0.0 if z + 1 == N else oracles.walk_absorption(N, z + 1, t))
            worst_rec = max(worst_rec, abs(lhs - 0.5 * left - 0.5 * right))
    add("walk_recursion", worst_rec < 1e-12,
        "spectral first-absorption vs half-half recursion", worst=worst_rec)

    # exhaustive bipartition sum equals the free-boundary contraction
    worst_bip = 0.0
    for t in range(1, min(depth, 3) + 1):
        lhs = replicatn.sum_over_bipartitions(d, N, t)
        rhs = replicatn.averaged_ipr(d, 2, N, t + 1)
        worst_bip = max(worst_bip, abs(lhs - rhs))
    add("bipartition_sum", worst_bip < 1e-8,
        "pairwise domain-wall sum vs free boundary", worst_abs_deviation=worst_bip)

    report = {
        "parameters": {"d": d, "N": N, "q": q, "depth": depth,
                       "realizations": realizations, "seed": seed,
                       "corrupt_hop_weight": corrupt_hop_weight},
        "checks": checks,
        "all_pass": all(c["status"] == "pass" for c in checks),
    }
    return report


def _corrupted_walk_purity(d: int, N: int, n_a: int, t: int) -> float:
    """walk_purity with a deliberately wrong hop weight d/(d^2+2)."""
    good = oracles.decay_base(d)
    bad = 2.0 * d / (d * d + 2.0)
    if t == 0 or n_a in (0, N):
        return 1.0
    T = max(t - (t + n_a) % 2, 0)
    if T == 0:
        return 1.0
    th = np.pi * (2 * np.arange(N // 2) + 1) / N
    c = np.cos(th)
    amp = (2.0 / N) * np.sin(th) * np.sin(th * n_a)
    s = np.arange(1, T + 1)
    geom = (bad ** s)[:, None] * c[None, :] ** (s - 1)[:, None]
    absorbed = float((amp * geom.sum(axis=0)).sum())
    survivors = bad ** T * oracles.walk_survival(N, n_a, T)
    return absorbed + survivors
