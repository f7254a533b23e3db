"""Exact circuit-averaged participation ratios and purities via the replica
statistical-mechanics tensor network.

Averaging one two-site Haar gate over q replicas projects the pair onto the
span of permutation-label states.  The whole averaged circuit therefore
contracts in a coefficient space with one q!-dimensional "spin" per site:
an MPS evolved by brick layers of a single (q!^2 x q!^2) transfer matrix,
compressed by two-site SVD sweeps at tolerance eps.

Conventions (all verified against dense contraction and Monte Carlo):

* The transfer matrix in coefficient space is
      W[(w,w), (t1,t2)] = sum_s Wg(d^2; s w^-1) d^{#(s t1^-1)} d^{#(s t2^-1)},
  supported on equal-label output pairs, and is an exact projector.
* The product |0...0> bottom state is absorbed by the first brick layer:
  each brick leaves the pairwise-equal boundary state times
  c_W = sum_s Wg(d^2; s) = 1/(d^2 (d^2+1) ... (d^2+q-1)).
* The averaged IPR after t layers is
      d^N * c_W^(N/2) * (sum of all coefficients after layers 2..t),
  because the book boundary pairs to d with every permutation label.
* The averaged purity contracts instead with per-site Gram rows
  d^{#(label tau^-1)} for a domain-wall label assignment on top.

All contractions are tracked in the log domain; magnitudes span hundreds of
orders of magnitude at large N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapacityError, ConfigurationError, UnsupportedRegionError
from .permutations import (PermutationTable, WeingartenTable, build_group,
                           weingarten)

#: Transfer matrices beyond four replicas are out of scope (q! pair space).
MAX_TN_ORDER = 4
#: Orders above this require an explicit opt-in (pair dimension (q!)^2 = 576).
DEFAULT_TN_ORDER_CAP = 3
#: Largest chain for the exhaustive bipartition sum (2^(N/2) terms).
MAX_BIPARTITION_SUM_SITES = 28


@dataclass(frozen=True)
class ReplicaSite:
    """Local space of the averaged circuit: one axis per permutation label."""

    q: int
    table: PermutationTable

    @property
    def dim(self) -> int:
        return self.table.size


class TwoSiteTransfer:
    """Averaged two-site gate in the permutation-label coefficient basis.

    Entries are computed in exact rational arithmetic and rounded once; the
    float matrix is what the MPS engine applies.
    """

    def __init__(self, d: int, q: int, table: PermutationTable, wg: WeingartenTable):
        if wg.dimension != d * d or wg.order != q or wg.table is not table:
            raise ConfigurationError(
                f"moment table built for (D={wg.dimension}, q={wg.order}); "
                f"transfer needs (D={d * d}, q={q})")
        self.d = d
        self.q = q
        self.table = table
        f = table.size
        self.site_dim = f

        # exact integer accumulation over a common denominator
        den = 1
        for c in wg.class_fractions:
            den = den * c.denominator // math.gcd(den, c.denominator)
        num = [int(wg.class_fractions[table.class_of[i]] * den) for i in range(f)]
        pows = [[d ** int(table.rel_cycles[s, t]) for t in range(f)] for s in range(f)]
        inv = table.inverse
        comp = table.compose

        self.fractions = np.empty((f, f, f), dtype=object)  # [w, t1, t2]
        mat = np.zeros((f * f, f * f))
        for w in range(f):
            wg_slice = [num[comp[s, inv[w]]] for s in range(f)]
            for t1 in range(f):
                for t2 in range(f):
                    acc = 0
                    for s in range(f):
                        acc += wg_slice[s] * pows[s][t1] * pows[s][t2]
                    frac = Fraction(acc, den)
                    self.fractions[w, t1, t2] = frac
                    mat[w * f + w, t1 * f + t2] = float(frac)
        self.matrix = mat


def build_transfer(d: int, q: int, wg: WeingartenTable | None = None) -> TwoSiteTransfer:
    """Construct the averaged two-site transfer for local dimension d, order q."""
    if wg is not None:
        table = wg.table
    else:
        table = build_group(q)
        wg = weingarten(table, d * d)
    return TwoSiteTransfer(d, q, table, wg)


class BoundaryVectors:
    """Boundary data of the averaged-circuit contraction."""

    def __init__(self, d: int, q: int, table: PermutationTable | None = None):
        self.d = d
        self.q = q
        self.table = table if table is not None else build_group(q)
        self.f = self.table.size

    def pairwise_vector(self) -> np.ndarray:
        """Coefficient vector of sum_s |s,s> on one pair of sites."""
        v = np.zeros(self.f * self.f)
        for s in range(self.f):
            v[s * self.f + s] = 1.0
        return v

    def dual_scale(self) -> Fraction:
        """c_W = sum over the group of Wg(d^2; .)."""
        total = Fraction(1)
        for k in range(self.q):
            total /= self.d * self.d + k
        return total

    def book_row(self) -> np.ndarray:
        """Top pairing of the basis-projector boundary: d for every label."""
        return np.full(self.f, float(self.d))

    def gram_row(self, label: int) -> np.ndarray:
        """Top pairing of a permutation label: d^{#(label tau^-1)} over tau."""
        return np.float_power(float(self.d), self.table.rel_cycles[label])

    def product_state_row(self) -> np.ndarray:
        """Pairing of any label with the |0...0> product state: all ones."""
        return np.ones(self.f)

    def domain_wall_labels(self, N: int, n_a: int) -> list[int]:
        """Cyclic label on the left n_a sites, identity elsewhere."""
        cyc = self.table.full_cycle_index
        ident = self.table.identity_index
        return [cyc] * n_a + [ident] * (N - n_a)


# ---------------------------------------------------------------------------
# matrix-product state over replica sites
# ---------------------------------------------------------------------------


class ReplicaMPS:
    """Real-coefficient MPS over N sites of local dimension f.

    Tensors have shape (chi_left, f, chi_right).  A scalar prefactor is
    tracked as ``log_scale`` (states this engine meets decay through
    hundreds of orders of magnitude).  Compression discards singular values
    whose relative squared weight is below ``eps``; needing more than
    ``chi_max`` states to stay within eps is a hard error.
    """

    def __init__(self, tensors: list[np.ndarray], eps: float = 1e-15,
                 chi_max: int = 512):
        self.tensors = tensors
        self.N = len(tensors)
        self.eps = eps
        self.chi_max = chi_max
        self.log_scale = 0.0
        self.center: int | None = None
        self.max_bond_used = max(t.shape[2] for t in tensors[:-1]) if self.N > 1 else 1
        self.max_discarded = 0.0

    # -- constructors -------------------------------------------------------

    @classmethod
    def pairwise_product(cls, N: int, f: int, eps: float = 1e-15,
                         chi_max: int = 512) -> "ReplicaMPS":
        """The product over pairs (0,1),(2,3),... of sum_s |s,s>."""
        if N % 2 or N < 2:
            raise ConfigurationError(f"need an even number of sites, got {N}")
        tensors = []
        left = np.zeros((1, f, f))
        for s in range(f):
            left[0, s, s] = 1.0
        right = np.zeros((f, f, 1))
        for s in range(f):
            right[s, s, 0] = 1.0
        for _ in range(N // 2):
            tensors.append(left.copy())
            tensors.append(right.copy())
        return cls(tensors, eps, chi_max)

    @classmethod
    def product(cls, vectors: Sequence[np.ndarray], eps: float = 1e-15,
                chi_max: int = 512) -> "ReplicaMPS":
        tensors = [np.asarray(v, dtype=float).reshape(1, -1, 1).copy() for v in vectors]
        return cls(tensors, eps, chi_max)

    # -- gauge management ---------------------------------------------------

    def _canonicalize_right(self) -> None:
        """Right-canonicalize all tensors; orthogonality center lands at 0."""
        for i in range(self.N - 1, 0, -1):
            a = self.tensors[i]
            chi_l, f, chi_r = a.shape
            m = a.reshape(chi_l, f * chi_r)
            q, r = np.linalg.qr(m.T)
            k = q.shape[1]
            self.tensors[i] = q.T.reshape(k, f, chi_r)
            self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.T, axes=([2], [0]))
        self.center = 0

    def _shift_center_right(self) -> None:
        c = self.center
        a = self.tensors[c]
        chi_l, f, chi_r = a.shape
        q, r = np.linalg.qr(a.reshape(chi_l * f, chi_r))
        k = q.shape[1]
        self.tensors[c] = q.reshape(chi_l, f, k)
        self.tensors[c + 1] = np.tensordot(r, self.tensors[c + 1], axes=([1], [0]))
        self.center = c + 1

    def _shift_center_left(self) -> None:
        c = self.center
        a = self.tensors[c]
        chi_l, f, chi_r = a.shape
        q, r = np.linalg.qr(a.reshape(chi_l, f * chi_r).T)
        k = q.shape[1]
        self.tensors[c] = q.T.reshape(k, f, chi_r)
        self.tensors[c - 1] = np.tensordot(self.tensors[c - 1], r.T, axes=([2], [0]))
        self.center = c - 1

    def move_center(self, i: int) -> None:
        if self.center is None:
            self._canonicalize_right()
        while self.center < i:
            self._shift_center_right()
        while self.center > i:
            self._shift_center_left()

    def norm(self) -> float:
        if self.center is None:
            self._canonicalize_right()
        return float(np.linalg.norm(self.tensors[self.center]))

    def rescale(self) -> None:
        """Fold the current norm into log_scale, keeping tensors O(1)."""
        n = self.norm()
        if n == 0.0:
            raise ConfigurationError("state contracted to exact zero")
        self.tensors[self.center] /= n
        self.log_scale += math.log(n)

    # -- gates ----------------------------------------------------------------

    def apply_two_site(self, i: int, gate: np.ndarray) -> None:
        """Apply a (f^2, f^2) gate to sites (i, i+1), then truncate the bond."""
        self.move_center(i)
        a, b = self.tensors[i], self.tensors[i + 1]
        chi_l, f, _ = a.shape
        _, _, chi_r = b.shape
        theta = np.tensordot(a, b, axes=([2], [0]))            # (chi_l, f, f, chi_r)
        theta = theta.reshape(chi_l, f * f, chi_r)
        theta = np.matmul(gate, theta)                         # broadcast over chi_l
        m = theta.reshape(chi_l, f, f, chi_r).reshape(chi_l * f, f * chi_r)
        try:
            u, s, vh = np.linalg.svd(m, full_matrices=False)
        except np.linalg.LinAlgError:  # rare gesdd failure; gesvd is sturdier
            import scipy.linalg
            u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
        total = float((s * s).sum())
        if total == 0.0:
            raise ConfigurationError("two-site block vanished during evolution")
        sq = s * s
        tail = np.cumsum(sq[::-1])[::-1]  # tail[k] = sum_{i >= k} s_i^2
        keep = len(s)
        while keep > 1 and tail[keep - 1] <= self.eps * total:
            keep -= 1
        if keep > self.chi_max:
            raise CapacityError(
                f"bond {i}-{i + 1} needs {keep} states to stay within "
                f"eps={self.eps}; cap is chi_max={self.chi_max}")
        discarded = float(tail[keep]) / total if keep < len(s) else 0.0
        self.max_discarded = max(self.max_discarded, discarded)
        self.tensors[i] = u[:, :keep].reshape(chi_l, f, keep)
        self.tensors[i + 1] = (s[:keep, None] * vh[:keep]).reshape(keep, f, chi_r)
        self.center = i + 1
        self.max_bond_used = max(self.max_bond_used, keep)

    # -- contractions --------------------------------------------------------

    def contract_rows(self, rows: Sequence[np.ndarray]) -> tuple[float, float]:
        """Contract with one covector per site; returns (sign, log|value|).

        The result includes log_scale.  A zero value returns (0.0, -inf).
        """
        v = np.ones(1)
        log_acc = self.log_scale
        for row, a in zip(rows, self.tensors):
            v = np.tensordot(v, a, axes=([0], [0]))  # (f, chi_r)
            v = row @ v
            n = float(np.linalg.norm(v))
            if n == 0.0:
                return 0.0, -math.inf
            v = v / n
            log_acc += math.log(n)
        val = float(v[0])
        if val == 0.0:
            return 0.0, -math.inf
        return math.copysign(1.0, val), log_acc + math.log(abs(val))

    def coefficient(self, labels: Sequence[int]) -> float:
        rows = []
        f = self.tensors[0].shape[1]
        for lab in labels:
            e = np.zeros(f)
            e[lab] = 1.0
            rows.append(e)
        sign, logv = self.contract_rows(rows)
        return float(sign * np.exp(logv)) if sign else 0.0

    def overlap(self, other: "ReplicaMPS") -> tuple[float, float]:
        """Inner product of two real MPS; returns (sign, log|value|)."""
        v = np.ones((1, 1))
        log_acc = self.log_scale + other.log_scale
        for a, b in zip(self.tensors, other.tensors):
            v = np.einsum("ab,asx,bsy->xy", v, a, b, optimize=True)
            n = float(np.linalg.norm(v))
            if n == 0.0:
                return 0.0, -math.inf
            v = v / n
            log_acc += math.log(n)
        val = float(v[0, 0])
        if val == 0.0:
            return 0.0, -math.inf
        return math.copysign(1.0, val), log_acc + math.log(abs(val))


def apply_layer(mps: ReplicaMPS, transfer: TwoSiteTransfer, parity: int) -> None:
    """Apply one brick layer (offset ``parity``) of the averaged gate, then
    renormalize into log_scale."""
    for i in range(parity, mps.N - 1, 2):
        mps.apply_two_site(i, transfer.matrix)
    mps.rescale()


# ---------------------------------------------------------------------------
# contraction engines
# ---------------------------------------------------------------------------


def _check_order(q: int, allow_large_q: bool) -> None:
    if q < 1:
        raise ConfigurationError(f"replica order must be >= 1, got {q}")
    if q > MAX_TN_ORDER:
        raise CapacityError(f"replica order q={q} beyond the tensor-network cap {MAX_TN_ORDER}")
    if q > DEFAULT_TN_ORDER_CAP and not allow_large_q:
        raise CapacityError(
            f"q={q} tensor network disabled by default (pair dimension {math.factorial(q)**2}); "
            "pass allow_large_q=True to enable")


class AveragedCircuit:
    """Evolves the averaged-circuit MPS layer by layer and measures boundaries.

    ``first_parity`` selects the brick offset of the (absorbed) first layer;
    layer L has offset (first_parity + L - 1) mod 2.  With first_parity=1
    the chain's edge sites stay in the raw product state until the first
    offset-0 layer copies their neighbors' labels onto them.
    """

    def __init__(self, d: int, q: int, N: int, eps: float = 1e-15,
                 chi_max: int = 512, first_parity: int = 0,
                 allow_large_q: bool = False):
        _check_order(q, allow_large_q)
        if N % 2 or N < 2:
            raise ConfigurationError(f"need an even chain, got N={N}")
        self.d, self.q, self.N = d, q, N
        self.transfer = build_transfer(d, q)
        self.table = self.transfer.table
        self.boundary = BoundaryVectors(d, q, self.table)
        self.f = self.table.size
        self.first_parity = first_parity
        c_w = self.boundary.dual_scale()
        self._log_cw = math.log(c_w.numerator) - math.log(c_w.denominator)

        if first_parity == 0:
            self.mps = ReplicaMPS.pairwise_product(N, self.f, eps, chi_max)
            self.mps.log_scale += (N // 2) * self._log_cw
            self.edges_virtual = False
        else:
            e0 = np.zeros(self.f)
            e0[0] = 1.0
            if N == 2:
                self.mps = ReplicaMPS.product([e0, e0], eps, chi_max)
            else:
                inner = ReplicaMPS.pairwise_product(N - 2, self.f, eps, chi_max)
                tensors = ([e0.reshape(1, -1, 1)] + inner.tensors
                           + [e0.reshape(1, -1, 1)])
                self.mps = ReplicaMPS(tensors, eps, chi_max)
                self.mps.log_scale += (N - 2) // 2 * self._log_cw
            self.edges_virtual = True
        self.layers_applied = 1

    # one brick that copies a real neighbor's label onto a virtual edge site
    def _edge_gate(self, virtual_left: bool) -> np.ndarray:
        f = self.f
        g = np.zeros((f * f, f * f))
        for t in range(f):
            if virtual_left:
                g[t * f + t, 0 * f + t] = 1.0
            else:
                g[t * f + t, t * f + 0] = 1.0
        return g

    def advance(self) -> None:
        """Apply the next layer."""
        layer = self.layers_applied + 1
        parity = (self.first_parity + layer - 1) % 2
        if self.edges_virtual and parity == 0:
            if self.N == 2:
                # single brick, both inputs in the raw product state
                g = np.zeros((self.f * self.f, self.f * self.f))
                for t in range(self.f):
                    g[t * self.f + t, 0] = 1.0
                self.mps.apply_two_site(0, g)
                self.mps.log_scale += self._log_cw
            else:
                self.mps.apply_two_site(0, self._edge_gate(virtual_left=True))
                for i in range(2, self.N - 3, 2):
                    self.mps.apply_two_site(i, self.transfer.matrix)
                self.mps.apply_two_site(self.N - 2, self._edge_gate(virtual_left=False))
            self.mps.rescale()
            self.edges_virtual = False
        else:
            apply_layer(self.mps, self.transfer, parity)
        self.layers_applied += 1

    def advance_to(self, t: int) -> None:
        while self.layers_applied < t:
            self.advance()

    # -- measurements -------------------------------------------------------

    def ipr_log(self) -> float:
        """ln of the averaged IPR at the current depth."""
        rows = [np.ones(self.f)] * self.N
        sign, logv = self.mps.contract_rows(rows)
        if sign <= 0.0:
            raise ArithmeticError(
                f"averaged IPR came out non-positive at depth {self.layers_applied}")
        return self.N * math.log(self.d) + logv

    def purity_log(self, labels: Sequence[int]) -> tuple[float, float]:
        """(sign, ln|value|) of the domain-wall contraction at current depth."""
        rows = []
        for j, lab in enumerate(labels):
            if self.edges_virtual and j in (0, self.N - 1):
                e0 = np.zeros(self.f)
                e0[0] = 1.0  # pairing of any label with the raw product state is 1
                rows.append(e0)
            else:
                rows.append(self.boundary.gram_row(lab))
        return self.mps.contract_rows(rows)


def ipr_log_series(d: int, q: int, N: int, t_max: int, eps: float = 1e-15,
                   chi_max: int = 512, allow_large_q: bool = False) -> np.ndarray:
    """ln of the exact gate-averaged IPR after t = 1..t_max layers."""
    if t_max < 1:
        raise ConfigurationError(f"need at least one layer, got t_max={t_max}")
    eng = AveragedCircuit(d, q, N, eps, chi_max, first_parity=0,
                          allow_large_q=allow_large_q)
    out = np.empty(t_max)
    out[0] = eng.ipr_log()
    for t in range(2, t_max + 1):
        eng.advance()
        out[t - 1] = eng.ipr_log()
    return out


def averaged_ipr_log(d: int, q: int, N: int, t: int, eps: float = 1e-15,
                     chi_max: int = 512, allow_large_q: bool = False) -> float:
    return float(ipr_log_series(d, q, N, t, eps, chi_max, allow_large_q)[t - 1])


def averaged_ipr(d: int, q: int, N: int, t: int, eps: float = 1e-15,
                 chi_max: int = 512, allow_large_q: bool = False) -> float:
    """Exact ensemble average of I_q after t brick layers."""
    return math.exp(averaged_ipr_log(d, q, N, t, eps, chi_max, allow_large_q))


def _region_labels(boundary: BoundaryVectors, N: int,
                   region: int | Sequence[int]) -> list[int]:
    if isinstance(region, (int, np.integer)):
        n_a = int(region)
        if not 0 <= n_a <= N:
            raise UnsupportedRegionError(f"block size {n_a} outside 0..{N}")
    else:
        sites = sorted(int(s) for s in region)
        if sites != list(range(len(sites))):
            raise UnsupportedRegionError(
                f"region {sites} is not a contiguous block starting at site 0")
        n_a = len(sites)
    return boundary.domain_wall_labels(N, n_a)


def purity_log_series(d: int, q: int, N: int, region: int | Sequence[int],
                      t_max: int, eps: float = 1e-15, chi_max: int = 512,
                      first_parity: int = 0,
                      allow_large_q: bool = False) -> np.ndarray:
    """ln of the averaged q-replica purity after t = 1..t_max layers."""
    eng = AveragedCircuit(d, q, N, eps, chi_max, first_parity=first_parity,
                          allow_large_q=allow_large_q)
    labels = _region_labels(eng.boundary, N, region)
    out = np.empty(t_max)
    sign, logv = eng.purity_log(labels)
    _require_positive(sign, 1)
    out[0] = logv
    for t in range(2, t_max + 1):
        eng.advance()
        sign, logv = eng.purity_log(labels)
        _require_positive(sign, t)
        out[t - 1] = logv
    return out


def _require_positive(sign: float, t: int) -> None:
    if sign <= 0.0:
        raise ArithmeticError(f"averaged purity came out non-positive at depth {t}")


def averaged_purity(d: int, q: int, N: int, t: int, region: int | Sequence[int],
                    eps: float = 1e-15, chi_max: int = 512,
                    allow_large_q: bool = False) -> float:
    """Exact circuit-averaged tr(rho_A^q) for a left block, after t layers."""
    if t == 0:
        return 1.0
    return math.exp(float(purity_log_series(d, q, N, region, t, eps, chi_max,
                                            first_parity=0,
                                            allow_large_q=allow_large_q)[t - 1]))


def sum_over_bipartitions(d: int, N: int, t: int, eps: float = 1e-15,
                          chi_max: int = 512) -> float:
    """Exhaustive two-replica identity: (d^2+1)^(-N/2) sum over all pairwise
    domain-wall tops of the t-layer purity; equals the averaged IPR at t+1.

    The summed purity stacks are anchored so that the layer peeled off the
    top of the (t+1)-layer free-boundary contraction tiles whole pairs:
    their first-layer offset is 0 for even t and 1 for odd t.
    """
    if N % 2 or N < 2:
        raise ConfigurationError(f"need an even chain, got N={N}")
    if N > MAX_BIPARTITION_SUM_SITES:
        raise CapacityError(
            f"exhaustive bipartition sum capped at N={MAX_BIPARTITION_SUM_SITES}, got {N}")
    if t < 1:
        raise ConfigurationError(f"need t >= 1, got {t}")
    first_parity = 0 if t % 2 == 0 else 1
    table = build_group(2)
    cyc = table.full_cycle_index
    ident = table.identity_index
    n_pairs = N // 2
    logs = []
    for mask in range(2 ** n_pairs):
        labels = []
        for p in range(n_pairs):
            lab = cyc if (mask >> p) & 1 else ident
            labels += [lab, lab]
        eng = AveragedCircuit(d, 2, N, eps, chi_max, first_parity=first_parity)
        eng.advance_to(t)
        sign, logv = eng.purity_log(labels)
        _require_positive(sign, t)
        logs.append(logv)
    logs = np.array(logs)
    m = logs.max()
    total = m + math.log(np.exp(logs - m).sum())
    return math.exp(total - n_pairs * math.log(d * d + 1.0))
