"""Exact statevector simulation of brick-wall Haar circuits on qudit chains.

One realization evolves a d^N-amplitude vector through alternating layers of
independent Haar-random two-site gates and measures participation ratios,
participation entropies and bipartite purities after every layer.  Ensembles
average many realizations; every realization derives its own counter-based
random stream from (master seed, realization index), so results are
reproducible and trivially parallel.

Site 0 carries the most significant digit of the mixed-radix basis index.
Even-offset layers couple sites (0,1),(2,3),...; odd-offset layers couple
(1,2),...,(N-3,N-2); boundaries are open and N must be even.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, DomainError, LayoutError, UnsupportedRegionError

#: Hard cap on the amplitude count of a single statevector.
MAX_AMPLITUDES = 2 ** 24


# ---------------------------------------------------------------------------
# state and layout
# ---------------------------------------------------------------------------


@dataclass
class QuditState:
    """Normalized pure state of N qudits with local dimension d."""

    d: int
    N: int
    amplitudes: np.ndarray

    @classmethod
    def basis_state(cls, d: int, N: int, index: int = 0) -> "QuditState":
        dim = d ** N
        if dim > MAX_AMPLITUDES:
            raise ConfigurationError(
                f"d^N = {dim} exceeds the statevector cap {MAX_AMPLITUDES}")
        amps = np.zeros(dim, dtype=np.complex128)
        amps[index] = 1.0
        return cls(d, N, amps)

    @classmethod
    def from_amplitudes(cls, d: int, N: int, amplitudes: Iterable[complex]) -> "QuditState":
        amps = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray)
                          else amplitudes, dtype=np.complex128).copy()
        if amps.shape != (d ** N,):
            raise ConfigurationError(f"expected {d**N} amplitudes, got {amps.shape}")
        n = np.linalg.norm(amps)
        if not np.isclose(n, 1.0, atol=1e-8):
            raise ConfigurationError(f"state not normalized: |psi|={n}")
        return cls(d, N, amps)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        p = np.empty(self.amplitudes.shape[0])
        kernels.abs2(self.amplitudes, p)
        return p

    def copy(self) -> "QuditState":
        return QuditState(self.d, self.N, self.amplitudes.copy())


class BrickwallLayout:
    """Gate placements of the open-boundary brick-wall circuit."""

    def __init__(self, N: int, depth: int):
        if N < 2 or N % 2:
            raise LayoutError(f"site count must be even and >= 2, got {N}")
        if depth < 0:
            raise LayoutError(f"negative depth {depth}")
        self.N = N
        self.depth = depth

    def pairs(self, layer: int) -> list[tuple[int, int]]:
        """Coupled (i, i+1) pairs of layer ``layer`` (0-based from the bottom)."""
        start = layer % 2
        return [(i, i + 1) for i in range(start, self.N - 1, 2)]

    def all_layers(self) -> Iterator[list[tuple[int, int]]]:
        for tau in range(self.depth):
            yield self.pairs(tau)


# ---------------------------------------------------------------------------
# Haar gates
# ---------------------------------------------------------------------------


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """One Haar-distributed unitary: QR of a complex Ginibre matrix with the
    R-diagonal phase fix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z *= 1.0 / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r).copy()
    while np.any(diag == 0):  # measure-zero; resample defensively
        z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
        z *= 1.0 / math.sqrt(2.0)
        q, r = np.linalg.qr(z)
        diag = np.diagonal(r).copy()
    return q * (diag / np.abs(diag))


def haar_unitaries(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stacked Haar unitaries of shape (count, dim, dim) via batched QR."""
    z = (rng.standard_normal((count, dim, dim))
         + 1j * rng.standard_normal((count, dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.einsum("nii->ni", r).copy()
    bad = np.any(diag == 0, axis=1)
    for idx in np.nonzero(bad)[0]:
        u = haar_unitary(dim, rng)
        q[idx] = u
        diag[idx] = 1.0
    return q * (diag / np.abs(diag))[:, None, :]


class GateSampler:
    """Deterministic Haar gate stream for one circuit realization.

    The stream is keyed by (seed, stream): a counter-based generator, so
    realizations of an ensemble are independent and reproducible no matter
    how they are scheduled across workers.
    """

    def __init__(self, d: int, seed: int, stream: int = 0):
        self.d = d
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed % 2 ** 64, self.stream % 2 ** 64], dtype=np.uint64)
        self.rng = np.random.Generator(np.random.Philox(key=key))
        self.position = 0

    def gate(self) -> np.ndarray:
        """One Haar unitary on the two-site space, shape (d^2, d^2)."""
        self.position += 1
        return haar_unitary(self.d * self.d, self.rng)

    def gates(self, count: int) -> np.ndarray:
        self.position += count
        return haar_unitaries(self.d * self.d, count, self.rng)

    def single_site_gates(self, count: int) -> np.ndarray:
        self.position += count
        return haar_unitaries(self.d, count, self.rng)


def haar_gate(sampler: GateSampler) -> np.ndarray:
    """Draw the next two-site Haar gate from the sampler."""
    return sampler.gate()


# ---------------------------------------------------------------------------
# gate application and evolution
# ---------------------------------------------------------------------------


def apply_gate(state: QuditState, pair: tuple[int, int], gate: np.ndarray) -> QuditState:
    """Return the state with ``gate`` applied to the adjacent pair (i, i+1)."""
    i, j = pair
    if j != i + 1 or i < 0 or j >= state.N:
        raise LayoutError(f"pair {pair} is not an adjacent in-range pair for N={state.N}")
    dd = state.d * state.d
    if gate.shape != (dd, dd):
        raise LayoutError(f"gate shape {gate.shape} does not match d^2={dd}")
    out = np.empty_like(state.amplitudes)
    left = state.d ** i
    right = state.d ** (state.N - i - 2)
    kernels.apply_two_site(state.amplitudes,
                           out,
                           np.ascontiguousarray(gate, dtype=np.complex128),
                           left, dd, right)
    return QuditState(state.d, state.N, out)


def evolve(state: QuditState, layout: BrickwallLayout,
           sampler: GateSampler) -> Iterator[QuditState]:
    """Yield the state after each full layer.

    The yielded object reuses the internal buffer; copy it if you need to
    keep a snapshot past the next iteration step.
    """
    if layout.N != state.N:
        raise LayoutError(f"layout N={layout.N} does not match state N={state.N}")
    d = state.d
    dd = d * d
    psi = state.amplitudes.copy()
    buf = np.empty_like(psi)
    live = QuditState(d, state.N, psi)
    for pairs in layout.all_layers():
        if pairs:
            gates = sampler.gates(len(pairs))
            for (i, _j), gate in zip(pairs, gates):
                left = d ** i
                right = d ** (state.N - i - 2)
                kernels.apply_two_site(psi, buf, np.ascontiguousarray(gate), left, dd, right)
                psi, buf = buf, psi
        live.amplitudes = psi
        yield live


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def participation(state: QuditState, q: float) -> tuple[float, float]:
    """(I_q, S_q) of the basis distribution p_n = |psi_n|^2.

    q may be any positive real.  q = 1 returns I_1 = 1 exactly and the
    Shannon entropy -sum p ln p (zero-probability terms contribute 0).
    """
    if q <= 0:
        raise DomainError(f"participation order must be positive, got {q}")
    p = state.probabilities()
    if q == 1:
        mask = p > 0
        return 1.0, float(-(p[mask] * np.log(p[mask])).sum())
    ipr = float((p ** q).sum())
    return ipr, math.log(ipr) / (1.0 - q)


def _participation_many(p: np.ndarray, q_values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    iprs = np.empty(len(q_values))
    ents = np.empty(len(q_values))
    logp = None
    for k, q in enumerate(q_values):
        if q == 1:
            if logp is None:
                mask = p > 0
                logp = np.log(p[mask])
                shannon = float(-(p[mask] * logp).sum())
            iprs[k] = 1.0
            ents[k] = shannon
        elif q == 2:
            iprs[k] = float((p * p).sum())
            ents[k] = -math.log(iprs[k])
        else:
            iprs[k] = float((p ** q).sum())
            ents[k] = math.log(iprs[k]) / (1.0 - q)
    return iprs, ents


def purity(state: QuditState, region: int | Sequence[int]) -> float:
    """tr(rho_A^2) for a left-contiguous block A.

    ``region`` is either the block size N_A or an explicit site list which
    must be 0..N_A-1; other subsets are unsupported.
    """
    if isinstance(region, (int, np.integer)):
        n_a = int(region)
    else:
        sites = sorted(int(s) for s in region)
        if sites != list(range(len(sites))):
            raise UnsupportedRegionError(
                f"region {sites} is not a contiguous block starting at site 0")
        n_a = len(sites)
    if not 0 <= n_a <= state.N:
        raise UnsupportedRegionError(f"block size {n_a} outside 0..{state.N}")
    left = state.d ** n_a
    right = state.d ** (state.N - n_a)
    m = state.amplitudes.reshape(left, right)
    if left > right:  # use the smaller reduced density matrix
        m = m.T
        left, right = right, left
    g = m @ m.conj().T
    return float(np.vdot(g, g).real)


# ---------------------------------------------------------------------------
# realizations and ensembles
# ---------------------------------------------------------------------------


@dataclass
class RealizationRecord:
    """Per-depth observables of one circuit realization."""

    d: int
    N: int
    seed: int
    stream: int
    q_values: tuple[float, ...]
    purity_cuts: tuple[int, ...]
    depths: np.ndarray          # (T,)
    ipr: np.ndarray             # (T, nq)
    entropy: np.ndarray         # (T, nq)
    purities: np.ndarray        # (T, ncuts)
    final_norm_error: float


def run_realization(d: int, N: int, depth: int, q_values: Sequence[float],
                    sampler: GateSampler,
                    purity_cuts: Sequence[int] = ()) -> RealizationRecord:
    """Evolve one realization and measure after every layer."""
    state = QuditState.basis_state(d, N)
    layout = BrickwallLayout(N, depth)
    nq, nc = len(q_values), len(purity_cuts)
    ipr = np.empty((depth, nq))
    ent = np.empty((depth, nq))
    purs = np.empty((depth, nc))
    t = 0
    for snapshot in evolve(state, layout, sampler):
        p = snapshot.probabilities()
        ipr[t], ent[t] = _participation_many(p, q_values)
        for c, cut in enumerate(purity_cuts):
            purs[t, c] = purity(snapshot, cut)
        t += 1
    norm_err = abs(float(p.sum()) - 1.0) if depth else 0.0
    return RealizationRecord(d, N, sampler.seed, sampler.stream, tuple(q_values),
                             tuple(purity_cuts), np.arange(1, depth + 1),
                             ipr, ent, purs, norm_err)


@dataclass
class EnsembleStatistics:
    """Aggregated ensemble observables, with bootstrap errors.

    ``s_annealed[t, k]`` is (1-q)^-1 ln(mean I_q) for q != 1; for q = 1 it
    equals the quenched mean (the continuous q -> 1 limit).
    """

    d: int
    N: int
    depth: int
    q_values: tuple[float, ...]
    purity_cuts: tuple[int, ...]
    n_realizations: int
    master_seed: int
    depths: np.ndarray
    i_mean: np.ndarray
    i_stderr: np.ndarray
    s_annealed: np.ndarray
    s_annealed_err: np.ndarray
    s_quenched: np.ndarray
    s_quenched_err: np.ndarray
    purity_mean: np.ndarray
    purity_stderr: np.ndarray
    ipr_samples: np.ndarray | None = None
    entropy_samples: np.ndarray | None = None
    max_norm_error: float = 0.0


def _realization_chunk(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    d, N, depth, q_values, purity_cuts, master_seed, r0, r1 = args
    nq, nc = len(q_values), len(purity_cuts)
    iprs = np.empty((r1 - r0, depth, nq))
    ents = np.empty((r1 - r0, depth, nq))
    purs = np.empty((r1 - r0, depth, nc))
    worst = 0.0
    for r in range(r0, r1):
        rec = run_realization(d, N, depth, q_values,
                              GateSampler(d, master_seed, stream=r), purity_cuts)
        iprs[r - r0] = rec.ipr
        ents[r - r0] = rec.entropy
        purs[r - r0] = rec.purities
        worst = max(worst, rec.final_norm_error)
    return iprs, ents, purs, worst


def default_workers() -> int:
    env = os.environ.get("QDELOC_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def ensemble_run(d: int, N: int, depth: int, q_values: Sequence[float],
                 n_realizations: int, master_seed: int,
                 purity_cuts: Sequence[int] = (),
                 n_bootstrap: int = 200,
                 workers: int | None = None,
                 keep_samples: bool = False) -> EnsembleStatistics:
    """Average ``n_realizations`` independent circuits.

    Realization r draws its gates from the counter-based stream keyed by
    (master_seed, r); the aggregate is therefore identical for any worker
    count.  Bootstrap errors use ``n_bootstrap`` multinomial resamples.
    """
    q_values = tuple(q_values)
    purity_cuts = tuple(purity_cuts)
    workers = workers if workers is not None else default_workers()
    R = int(n_realizations)
    if R < 1:
        raise ConfigurationError("need at least one realization")

    if workers <= 1 or R < 8:
        iprs, ents, purs, worst = _realization_chunk(
            (d, N, depth, q_values, purity_cuts, master_seed, 0, R))
    else:
        n_chunks = min(R, workers * 4)
        bounds = np.linspace(0, R, n_chunks + 1, dtype=int)
        jobs = [(d, N, depth, q_values, purity_cuts, master_seed, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        parts = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_realization_chunk, jobs))
        iprs = np.concatenate([p[0] for p in parts])
        ents = np.concatenate([p[1] for p in parts])
        purs = np.concatenate([p[2] for p in parts])
        worst = max(p[3] for p in parts)

    i_mean = iprs.mean(axis=0)
    i_stderr = iprs.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(i_mean)
    s_quenched = ents.mean(axis=0)
    s_ann = _annealed_entropy(i_mean, s_quenched, q_values)
    pur_mean = purs.mean(axis=0)
    pur_stderr = (purs.std(axis=0, ddof=1) / math.sqrt(R) if R > 1
                  else np.zeros_like(pur_mean))

    # bootstrap over realizations (multinomial weights)
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, 0xB007]))
    if R > 1 and n_bootstrap > 0:
        flat_i = iprs.reshape(R, -1)
        flat_s = ents.reshape(R, -1)
        ann_stats = np.empty((n_bootstrap,) + i_mean.shape)
        que_stats = np.empty((n_bootstrap,) + s_quenched.shape)
        for b in range(n_bootstrap):
            w = rng.multinomial(R, np.full(R, 1.0 / R)).astype(float) / R
            im = (w @ flat_i).reshape(i_mean.shape)
            sm = (w @ flat_s).reshape(s_quenched.shape)
            ann_stats[b] = _annealed_entropy(im, sm, q_values)
            que_stats[b] = sm
        s_ann_err = ann_stats.std(axis=0, ddof=1)
        s_que_err = que_stats.std(axis=0, ddof=1)
    else:
        s_ann_err = np.zeros_like(s_ann)
        s_que_err = np.zeros_like(s_quenched)

    return EnsembleStatistics(
        d=d, N=N, depth=depth, q_values=q_values, purity_cuts=purity_cuts,
        n_realizations=R, master_seed=master_seed,
        depths=np.arange(1, depth + 1),
        i_mean=i_mean, i_stderr=i_stderr,
        s_annealed=s_ann, s_annealed_err=s_ann_err,
        s_quenched=s_quenched, s_quenched_err=s_que_err,
        purity_mean=pur_mean, purity_stderr=pur_stderr,
        ipr_samples=iprs if keep_samples else None,
        entropy_samples=ents if keep_samples else None,
        max_norm_error=worst,
    )


def _annealed_entropy(i_mean: np.ndarray, s_quenched: np.ndarray,
                      q_values: Sequence[float]) -> np.ndarray:
    out = np.empty_like(i_mean)
    for k, q in enumerate(q_values):
        if q == 1:
            out[..., k] = s_quenched[..., k]
        else:
            out[..., k] = np.log(i_mean[..., k]) / (1.0 - q)
    return out
