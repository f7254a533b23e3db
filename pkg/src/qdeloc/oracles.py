"""Closed-form ground truth: stationary ensemble values, IPR fluctuations,
the absorbing-walk purity solution, and asymptotic decay constants.

Everything here is a pure function of (d, N, q, t) evaluated in the log
domain where magnitudes can be astronomical (d^N easily exceeds float
range).  These values anchor the Monte Carlo and tensor-network engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# ---------------------------------------------------------------------------
# stationary (deep-circuit) ensemble values
# ---------------------------------------------------------------------------


def _log_dim(d: int, N: int) -> float:
    return N * math.log(d)


def _log_dim_plus(d: int, N: int, k: int) -> float:
    """ln(d^N + k), safe for arbitrarily large d^N."""
    ld = _log_dim(d, N)
    if k == 0:
        return ld
    if ld < 36.0:
        return math.log(d ** N + k)
    x = math.log(k) - ld
    if x < -745.0:  # correction underflows double precision
        return ld
    return ld + math.log1p(math.exp(x))


def haar_ipr_log(d: int, N: int, q: int) -> float:
    """ln of the stationary ensemble-averaged IPR: ln[q! / prod_{k=1}^{q-1}(d^N + k)]."""
    if q < 1 or q != int(q):
        raise DomainError(f"stationary IPR defined for integer q >= 1, got {q}")
    q = int(q)
    return math.lgamma(q + 1) - sum(_log_dim_plus(d, N, k) for k in range(1, q))


def haar_ipr(d: int, N: int, q: int) -> float:
    """Stationary ensemble-averaged IPR; 1 for q = 1."""
    return math.exp(haar_ipr_log(d, N, q))


def haar_entropy(d: int, N: int, q: float) -> float:
    """Stationary annealed participation entropy (1-q)^-1 ln(mean IPR).

    Integer q >= 2 uses the closed form.  q = 1 is returned as the numerical
    q -> 1 limit of the analytic expression (two-sided difference at
    q = 1 +- 1e-4); non-integer q > 0 evaluates the gamma-function
    continuation directly.
    """
    if q <= 0:
        raise DomainError(f"entropy order must be positive, got {q}")
    if q == 1:
        eps = 1e-4
        return 0.5 * (_haar_entropy_real(d, N, 1 + eps) + _haar_entropy_real(d, N, 1 - eps))
    if float(q).is_integer():
        return -haar_ipr_log(d, N, int(q)) / (q - 1)
    return _haar_entropy_real(d, N, q)


def _haar_entropy_real(d: int, N: int, q: float) -> float:
    """Gamma-continued entropy: [ln G(x+q) - ln G(x+1) - ln G(q+1)] / (q-1), x = d^N."""
    ld = _log_dim(d, N)
    if ld < 34:  # x exactly representable, lgamma accurate
        x = float(d ** N)
        num = math.lgamma(x + q) - math.lgamma(x + 1) - math.lgamma(q + 1)
    else:
        # ln G(x+q) - ln G(x+1) = (q-1) ln x + (q-1)q/(2x) + O(x^-2)
        corr = (q - 1) * q / 2 * math.exp(-ld) if ld < 700 else 0.0
        num = (q - 1) * ld + corr - math.lgamma(q + 1)
    return -num / (1 - q)


def haar_ipr_second_moment_log(d: int, N: int, q: int) -> float:
    """ln E[I_q^2] = ln[((q!)^2 (d^N - 1) + (2q)!) / prod_{k=1}^{2q-1}(d^N + k)]."""
    if q < 1:
        raise DomainError(f"moment order must be >= 1, got {q}")
    ld = _log_dim(d, N)
    # ln(d^N - 1)
    if ld > 36:
        log_xm1 = ld + math.log1p(-math.exp(-ld)) if ld < 700 else ld
    else:
        log_xm1 = math.log(d ** N - 1) if d ** N > 1 else -math.inf
    a = 2 * math.lgamma(q + 1) + log_xm1
    b = math.lgamma(2 * q + 1)
    num = np.logaddexp(a, b)
    den = sum(_log_dim_plus(d, N, k) for k in range(1, 2 * q))
    return float(num - den)


def haar_ipr_second_moment(d: int, N: int, q: int) -> float:
    return math.exp(haar_ipr_second_moment_log(d, N, q))


def haar_ipr_std(d: int, N: int, q: int) -> float:
    """Ensemble standard deviation of I_q, sqrt(E[I^2] - E[I]^2), log-domain safe."""
    lm2 = haar_ipr_second_moment_log(d, N, q)
    lm = haar_ipr_log(d, N, q)
    r = math.exp(2 * lm - lm2)  # mean^2 / second moment, in (0, 1)
    if r >= 1.0:
        return 0.0
    return math.exp(0.5 * (lm2 + math.log1p(-r)))


@dataclass(frozen=True)
class HaarStationary:
    """Stationary ensemble values for one (d, N, q)."""

    d: int
    N: int
    q: int
    ipr: float = field(init=False)
    ipr_log: float = field(init=False)
    entropy: float = field(init=False)
    ipr_second_moment: float = field(init=False)
    ipr_std: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ipr_log", haar_ipr_log(self.d, self.N, self.q))
        object.__setattr__(self, "ipr", math.exp(self.ipr_log))
        object.__setattr__(self, "entropy", haar_entropy(self.d, self.N, self.q))
        object.__setattr__(self, "ipr_second_moment",
                           haar_ipr_second_moment(self.d, self.N, self.q))
        object.__setattr__(self, "ipr_std", haar_ipr_std(self.d, self.N, self.q))


# ---------------------------------------------------------------------------
# asymptotic constants
# ---------------------------------------------------------------------------


def hopping_weight(d: int) -> float:
    """Domain-wall hop weight per move for two replicas: K = d / (d^2 + 1)."""
    return d / (d * d + 1.0)


def decay_base(d: int) -> float:
    """Exponential base of the entropy-deficit decay: 2K = 2d / (d^2 + 1)."""
    return 2.0 * hopping_weight(d)


def entanglement_velocity(d: int) -> float:
    """Linear growth rate of the annealed second-order entanglement entropy."""
    return -math.log(decay_base(d))


#: Large-d limit of the deficit prefactor per site.
LARGE_D_PREFACTOR = 0.5
#: Measured prefactor for qubits, two replicas (reference value, +-0.005).
REFERENCE_PREFACTOR_D2_Q2 = 0.291
#: Measured prefactor for qubits, three replicas (reference value).
REFERENCE_PREFACTOR_D2_Q3 = 0.76


@dataclass(frozen=True)
class AsymptoticConstants:
    """Decay constants for one local dimension d."""

    d: int

    @property
    def hopping_weight(self) -> float:
        return hopping_weight(self.d)

    @property
    def decay_base(self) -> float:
        return decay_base(self.d)

    @property
    def velocity(self) -> float:
        return entanglement_velocity(self.d)

    large_d_prefactor: float = LARGE_D_PREFACTOR
    reference_prefactor_q2: float = REFERENCE_PREFACTOR_D2_Q2
    reference_prefactor_q3: float = REFERENCE_PREFACTOR_D2_Q3


def predicted_deficit(d: int, N: int, t: float, alpha: float) -> float:
    """Asymptotic entropy deficit alpha * N * (2K)^(t-1)."""
    return alpha * N * decay_base(d) ** (t - 1.0)


def delocalization_time(d: int, N: int, alpha: float, eps: float) -> float:
    """Depth at which the predicted deficit crosses eps: 1 + ln(alpha N / eps) / (-ln 2K)."""
    return 1.0 + math.log(alpha * N / eps) / entanglement_velocity(d)


# ---------------------------------------------------------------------------
# absorbing random walk and exact two-replica purity dynamics
# ---------------------------------------------------------------------------


def walk_absorption(N: int, z: int, t: int) -> float:
    """First-absorption probability u_{z,t} of the +-1 walk with absorbing ends.

    The walk starts at z on {0,...,N}; u_{z,t} is the probability that it is
    absorbed (at either end) exactly at step t.  Boundary convention: a walk
    already at z in {0, N} counts as absorbed at t = 0, and the endpoints
    return 1.0 at every t (absorbed-state indicator).  Interior values use
    the spectral solution, which satisfies the half-half recursion.
    """
    if not 0 <= z <= N:
        raise DomainError(f"walk position z={z} outside 0..{N}")
    if z == 0 or z == N:
        return 1.0
    if t <= 0:
        return 0.0
    th = np.pi * (2 * np.arange(N // 2) + 1) / N
    vals = (2.0 / N) * np.sin(th) * np.cos(th) ** (t - 1) * np.sin(th * z)
    return float(vals.sum())


def walk_survival(N: int, z: int, t: int) -> float:
    """Probability the walk from interior z is not yet absorbed after step t.

    Equals sum_{s > t} u_{z,s}; evaluated by geometric resummation of the
    spectral series.
    """
    if z == 0 or z == N:
        return 0.0
    th = np.pi * (2 * np.arange(N // 2) + 1) / N
    c = np.cos(th)
    vals = (2.0 / N) * np.sin(th) * np.sin(th * z) * c ** t / (1.0 - c)
    return float(vals.sum())


def _walk_moves(N_A: int, t: int) -> int:
    """Completed wall hops after t circuit layers for a cut at site N_A.

    A brick straddles the cut only on alternating layers (which layers,
    depends on the cut parity under the even-offset-first convention), so
    the hop clock advances on t - ((t + N_A) mod 2) of the first t layers.
    """
    return max(t - (t + N_A) % 2, 0)


def walk_purity(d: int, N: int, N_A: int, t: int) -> float:
    """Exact circuit-averaged two-replica purity for a left block of N_A sites.

    Expresses the average of tr(rho_A^2) as a sum over first-absorption
    times of the domain wall started at z = N_A, with weight (2K)^s for a
    wall absorbed at hop s and (2K)^T for the survivors after T completed
    hops.  T is the hop count reached after t layers (see _walk_moves).
    Returns 1.0 at t = 0 and for empty/full blocks.
    """
    if not 0 <= N_A <= N:
        raise DomainError(f"block size N_A={N_A} outside 0..{N}")
    if t < 0:
        raise DomainError(f"negative depth t={t}")
    if t == 0 or N_A in (0, N):
        return 1.0
    T = _walk_moves(N_A, t)
    if T == 0:
        return 1.0
    base = decay_base(d)
    th = np.pi * (2 * np.arange(N // 2) + 1) / N
    c = np.cos(th)
    amp = (2.0 / N) * np.sin(th) * np.sin(th * N_A)
    # absorbed at s = 1..T: sum_s (2K)^s u_{z,s} = sum_nu amp_nu sum_s (2K base)^s c^(s-1)
    s = np.arange(1, T + 1)
    geom = (base ** s)[:, None] * c[None, :] ** (s - 1)[:, None]
    absorbed = float((amp * geom.sum(axis=0)).sum())
    survivors = base ** T * walk_survival(N, N_A, T)
    return absorbed + survivors


def walk_purity_stationary(d: int, N: int, N_A: int) -> float:
    """Long-time limit of the averaged purity: (d^z + d^(N-z)) / (d^N + 1)."""
    ld = math.log(d)
    num = np.logaddexp(N_A * ld, (N - N_A) * ld)
    den = np.logaddexp(N * ld, 0.0)
    return float(np.exp(num - den))


@dataclass
class RandomWalkSolution:
    """Absorbing-walk view of the two-replica purity for one (d, N, N_A)."""

    d: int
    N: int
    N_A: int

    @property
    def velocity(self) -> float:
        return entanglement_velocity(self.d)

    def absorption(self, t: int) -> float:
        return walk_absorption(self.N, self.N_A, t)

    def purity(self, t: int) -> float:
        return walk_purity(self.d, self.N, self.N_A, t)

    def purity_series(self, t_max: int) -> np.ndarray:
        return np.array([self.purity(t) for t in range(t_max + 1)])

    def deviation(self, t: int) -> float:
        """Transient part: purity(t) minus its stationary value."""
        return self.purity(t) - walk_purity_stationary(self.d, self.N, self.N_A)
