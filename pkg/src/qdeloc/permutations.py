"""Symmetric-group algebra and unitary-group moment coefficients.

Permutations of {0,...,q-1} are stored in word form: ``images[k]`` is the
image of ``k``.  A :class:`PermutationTable` enumerates S_q once, in
lexicographic order of the image words (so the identity sits at index 0),
and caches the composition table, inverses, cycle counts and conjugacy
classes.  Stable element indices matter downstream: they define the local
basis of the averaged-circuit tensor network.

The moment coefficients ``Wg(D; sigma)`` for averages over the unitary
group U(D) are obtained by solving the Gram linear system

    sum_tau  D^{#(sigma tau^-1)} Wg(D; tau) = delta_{sigma, identity},

where ``#`` counts cycles.  Because the solution is a class function, the
system is collapsed onto conjugacy classes and solved in exact rational
arithmetic; float values are derived from the exact ones.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapacityError, DegeneracyError

#: Largest supported moment order.  q! grows fast and every table is dense
#: in q!; orders beyond 6 are out of scope.
MAX_ORDER = 6


@dataclass(frozen=True)
class Permutation:
    """A permutation of {0,...,q-1} in word form.

    >>> s = Permutation((1, 0, 2))
    >>> s(0), s(1)
    (1, 0)
    >>> (s * s).images
    (0, 1, 2)
    """

    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.images))):
            raise ValueError(f"not a permutation word: {self.images!r}")

    @property
    def order(self) -> int:
        return len(self.images)

    def __call__(self, k: int) -> int:
        return self.images[k]

    def __mul__(self, other: "Permutation") -> "Permutation":
        """Composition self∘other: apply ``other`` first."""
        return Permutation(tuple(self.images[other.images[k]] for k in range(self.order)))

    def inverse(self) -> "Permutation":
        inv = [0] * self.order
        for k, v in enumerate(self.images):
            inv[v] = k
        return Permutation(tuple(inv))

    def cycles(self) -> list[tuple[int, ...]]:
        """Cycle decomposition, fixed points included."""
        seen = [False] * self.order
        out = []
        for k in range(self.order):
            if seen[k]:
                continue
            cyc = []
            j = k
            while not seen[j]:
                seen[j] = True
                cyc.append(j)
                j = self.images[j]
            out.append(tuple(cyc))
        return out

    def cycle_count(self) -> int:
        return len(self.cycles())

    def cycle_type(self) -> tuple[int, ...]:
        """Cycle lengths, sorted descending; labels the conjugacy class."""
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))

    @staticmethod
    def identity(q: int) -> "Permutation":
        return Permutation(tuple(range(q)))

    @staticmethod
    def full_cycle(q: int) -> "Permutation":
        """The cyclic shift k -> k+1 (mod q)."""
        return Permutation(tuple((k + 1) % q for k in range(q)))


class PermutationTable:
    """All of S_q with cached composition data.

    Attributes
    ----------
    q : moment order
    elements : tuple of all q! permutations, lexicographic, identity first
    compose : (q!, q!) array, ``compose[i, j]`` = index of elements[i]*elements[j]
    inverse : (q!,) array of inverse indices
    cycle_counts : (q!,) array of #cycles per element
    rel_cycles : (q!, q!) array, ``rel_cycles[i, j]`` = #(elements[i] * elements[j]^-1)
    class_of : (q!,) array mapping element index -> conjugacy class index
    cycle_types : class index -> cycle type tuple
    """

    def __init__(self, q: int):
        if not 1 <= q <= MAX_ORDER:
            raise CapacityError(f"moment order q={q} outside supported range 1..{MAX_ORDER}")
        self.q = q
        self.elements = tuple(Permutation(w) for w in itertools.permutations(range(q)))
        self.size = len(self.elements)
        self._index = {p.images: i for i, p in enumerate(self.elements)}

        n = self.size
        self.compose = np.empty((n, n), dtype=np.int32)
        self.inverse = np.empty(n, dtype=np.int32)
        self.cycle_counts = np.empty(n, dtype=np.int64)
        for i, p in enumerate(self.elements):
            self.inverse[i] = self._index[p.inverse().images]
            self.cycle_counts[i] = p.cycle_count()
        for i, p in enumerate(self.elements):
            for j, r in enumerate(self.elements):
                self.compose[i, j] = self._index[(p * r).images]
        # rel_cycles[i, j] = #(p_i p_j^-1)
        self.rel_cycles = self.cycle_counts[self.compose[:, self.inverse]]

        types: dict[tuple[int, ...], int] = {}
        self.class_of = np.empty(n, dtype=np.int32)
        for i, p in enumerate(self.elements):
            ct = p.cycle_type()
            if ct not in types:
                types[ct] = len(types)
            self.class_of[i] = types[ct]
        self.cycle_types = tuple(sorted(types, key=types.get))
        self.n_classes = len(self.cycle_types)
        self.class_sizes = np.bincount(self.class_of, minlength=self.n_classes)
        # one representative element index per class
        self.class_reps = np.array(
            [int(np.nonzero(self.class_of == c)[0][0]) for c in range(self.n_classes)],
            dtype=np.int32,
        )

    @property
    def identity_index(self) -> int:
        return 0

    @property
    def full_cycle_index(self) -> int:
        return self.index(Permutation.full_cycle(self.q))

    def index(self, p: Permutation | Sequence[int]) -> int:
        images = p.images if isinstance(p, Permutation) else tuple(p)
        try:
            return self._index[images]
        except KeyError:
            raise KeyError(f"{images!r} is not an element of S_{self.q}") from None


def build_group(q: int) -> PermutationTable:
    """Enumerate S_q with composition tables.  Raises CapacityError for q > 6."""
    return PermutationTable(q)


def _solve_rational(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    """Gaussian elimination over Q; returns None if the matrix is singular."""
    n = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


class WeingartenTable:
    """Moment coefficients sigma -> Wg(D; sigma) for fixed dimension D and order q.

    Values depend only on the cycle type of sigma; they are stored exactly
    (per class, as Fractions) alongside a float view per element index.
    """

    def __init__(self, table: PermutationTable, dimension: int,
                 class_fractions: list[Fraction]):
        self.table = table
        self.dimension = dimension
        self.order = table.q
        self.class_fractions = class_fractions
        self.values = np.array(
            [float(class_fractions[table.class_of[i]]) for i in range(table.size)]
        )

    def value(self, sigma: Permutation | int) -> float:
        idx = sigma if isinstance(sigma, (int, np.integer)) else self.table.index(sigma)
        return float(self.values[idx])

    def fraction(self, sigma: Permutation | int) -> Fraction:
        idx = sigma if isinstance(sigma, (int, np.integer)) else self.table.index(sigma)
        return self.class_fractions[self.table.class_of[idx]]

    def sum_rule(self) -> Fraction:
        """Exact sum over the group: equals (D-1)!/(D+q-1)! = 1/(D (D+1) ... (D+q-1))."""
        total = Fraction(0)
        for c in range(self.table.n_classes):
            total += self.class_fractions[c] * int(self.table.class_sizes[c])
        return total

    def gram_matrix(self) -> np.ndarray:
        """G[i, j] = D^{#(p_i p_j^-1)} as float."""
        return np.float_power(float(self.dimension), self.table.rel_cycles)

    def residual(self) -> float:
        """max |G . W - I| with W[i, j] = Wg(p_i p_j^-1)."""
        G = self.gram_matrix()
        W = self.values[self.table.compose[:, self.table.inverse]]
        R = G @ W - np.eye(self.table.size)
        return float(np.abs(R).max())

    def to_json(self) -> str:
        entries = [
            {
                "cycle_type": list(self.table.cycle_types[c]),
                "value_num": self.class_fractions[c].numerator,
                "value_den": self.class_fractions[c].denominator,
                "value": float(self.class_fractions[c]),
            }
            for c in range(self.table.n_classes)
        ]
        return json.dumps({"D": self.dimension, "q": self.order, "entries": entries},
                          indent=2)


def weingarten(table: PermutationTable, dimension: int) -> WeingartenTable:
    """Solve the Gram system for Wg(D; .) exactly.

    Raises
    ------
    DegeneracyError
        If the Gram matrix is singular, which happens exactly when D < q.
    """
    if dimension < 2:
        raise DegeneracyError(f"dimension D={dimension} below the supported minimum 2")
    q = table.q
    # Collapse onto conjugacy classes: the unknown is one value per class and
    # the equation for any representative of a class is class-independent.
    n_cl = table.n_classes
    A = [[Fraction(0)] * n_cl for _ in range(n_cl)]
    D = Fraction(dimension)
    for k in range(n_cl):
        rep = int(table.class_reps[k])
        row = table.rel_cycles[rep]  # #(rep * tau^-1) over all tau
        for j in range(table.size):
            A[k][table.class_of[j]] += D ** int(row[j])
    rhs = [Fraction(0)] * n_cl
    rhs[table.class_of[table.identity_index]] = Fraction(1)
    sol = _solve_rational(A, rhs)
    if sol is None:
        raise DegeneracyError(
            f"Gram matrix singular for (D={dimension}, q={q}); requires D >= q"
        )
    wg = WeingartenTable(table, dimension, sol)
    res = wg.residual()
    if res > 1e-10:
        raise DegeneracyError(
            f"Gram inversion residual {res:.2e} too large for (D={dimension}, q={q})"
        )
    return wg


def dual_weight(table: PermutationTable, wg: WeingartenTable,
                sigma: Permutation, tau: Permutation) -> float:
    """Coefficient of tau in the dual of sigma: Wg(D; sigma tau^-1)."""
    if wg.table is not table:
        raise KeyError("Weingarten table was built for a different group table")
    i = table.index(sigma)
    j = table.index(tau)
    return float(wg.values[table.compose[i, table.inverse[j]]])


def moment_sum_closed_form(dimension: int, q: int) -> Fraction:
    """(D-1)!/(D+q-1)!, the exact value of sum_sigma Wg(D; sigma)."""
    total = Fraction(1)
    for k in range(q):
        total /= dimension + k
    return total


def log_moment_sum(dimension: int, q: int) -> float:
    """ln of (D-1)!/(D+q-1)! without forming the (possibly huge) product."""
    return -sum(math.log(dimension + k) for k in range(q))
