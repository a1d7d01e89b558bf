"""Gaussian pairing calculus and discrete multiple Wiener integrals.

On a grid the white noise is the vector of cell increments ``dW_j`` with
covariance ``h^d * identity``.  The discrete Stratonovich integral is the
plain multilinear sum (diagonals kept); the discrete Ito integral replaces
each repeated increment by its Wick power ``h^(rd/2) He_r(dW_j / h^(d/2))``.
With these definitions the Hu-Meyer expansion is an exact algebraic
identity on the grid, not an asymptotic statement.

Index positions are 0-based throughout: a pairing of ``2n`` items matches
positions ``0..2n-1``.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .grid import GridSpec
from .random_field import WhiteNoiseField

__all__ = [
    "Pairing",
    "PairingClassification",
    "GridChaosFunction",
    "double_factorial_odd",
    "enumerate_pairings",
    "gaussian_moment",
    "classify_pairing",
    "symmetrize",
    "strat_norm",
    "discrete_strat_integral",
    "discrete_ito_integral",
    "trace",
    "hu_meyer_weight",
    "hu_meyer_strat_to_ito",
    "ito_to_strat_coefficients",
    "random_symmetric_function",
    "hu_meyer_residual",
]

MAX_PAIRING_SIZE = 12
MAX_ARITY = 4


@dataclass(frozen=True)
class Pairing:
    """Perfect matching of ``2 * size`` positions.

    ``pair_map`` sends each left end ``k`` to its partner ``l(k) > k``; the
    left ends form ``A0`` and the partners form the complement ``B0``.
    """

    size: int
    pair_map: tuple[tuple[int, int], ...]

    def __post_init__(self):
        ends = [i for pair in self.pair_map for i in pair]
        if sorted(ends) != list(range(2 * self.size)) or any(l <= k for k, l in self.pair_map):
            raise ValueError(f"invalid pairing {self.pair_map}")

    @property
    def left(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.pair_map)

    @property
    def right(self) -> tuple[int, ...]:
        return tuple(l for _, l in self.pair_map)

    def partner(self, k: int) -> int:
        return dict(self.pair_map)[k]


@dataclass(frozen=True)
class PairingClassification:
    crossings: int
    n0: int
    m0: int
    singular_index: tuple[tuple[int, int], ...] = field(default=(), repr=False)


def double_factorial_odd(n: int) -> int:
    """``(2n - 1)!!``"""
    return math.prod(range(1, 2 * n, 2))


def _matchings(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _matchings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + tail


def enumerate_pairings(two_n: int) -> list[Pairing]:
    """All perfect matchings of ``two_n`` positions; there are ``(2n-1)!!``."""
    if two_n % 2 or two_n < 0:
        raise ValueError(f"need an even number of positions, got {two_n}")
    if two_n > MAX_PAIRING_SIZE:
        raise ValueError(f"enumeration capped at {MAX_PAIRING_SIZE} positions, got {two_n}")
    return [Pairing(two_n // 2, tuple(p)) for p in _matchings(list(range(two_n)))]


def gaussian_moment(cov) -> float:
    """``E[X_1 ... X_2n]`` for a centred Gaussian vector (Isserlis).

    Odd sizes give 0.  Raises ``ValueError`` for a non-symmetric or
    indefinite covariance.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14):
        raise ValueError("covariance must be symmetric")
    size = cov.shape[0]
    if size and np.linalg.eigvalsh(cov).min() < -1e-10 * max(1.0, np.abs(cov).max()):
        raise ValueError("covariance must be positive semidefinite")
    if size % 2:
        return 0.0
    return float(sum(math.prod(cov[k, l] for k, l in p.pair_map) for p in enumerate_pairings(size)))


def classify_pairing(p: Pairing, n: int, m: int) -> PairingClassification:
    """Count crossings between positions ``0..n-1`` and ``n..n+m-1``.

    Each pair of the matching is charged to one of its ends (the singular
    factor).  Internal pairs are charged to their left end.  Crossings are
    charged alternately to the left and right end in increasing order of the
    left end, starting with the left end, so an odd count leaves the last
    crossing on the left.  ``n0`` counts charges landing in the first block
    and ``m0`` those landing in the second.
    """
    if n + m != 2 * p.size:
        raise ValueError(f"n + m = {n + m} does not match pairing of {2 * p.size} positions")
    charged = []
    crossing = 0
    for k, l in sorted(p.pair_map):
        if k < n <= l:
            charged.append((k, k if crossing % 2 == 0 else l))
            crossing += 1
        else:
            charged.append((k, k))
    n0 = sum(1 for _, c in charged if c < n)
    m0 = len(charged) - n0
    assert (n - crossing) % 2 == 0 and (m - crossing) % 2 == 0
    return PairingClassification(crossing, n0, m0, tuple(charged))


@dataclass(frozen=True, eq=False)
class GridChaosFunction:
    """Sparse function of ``arity`` grid cells, keyed by tuples of flat cell indices."""

    arity: int
    values: dict = field(repr=False)
    grid: GridSpec
    symmetrized: bool = False

    def __post_init__(self):
        for key in self.values:
            if len(key) != self.arity:
                raise ValueError(f"key {key} does not have arity {self.arity}")

    @classmethod
    def constant(cls, c: float, grid: GridSpec) -> "GridChaosFunction":
        return cls(0, {(): float(c)}, grid, True)

    @classmethod
    def tensor(cls, factors: list[dict], grid: GridSpec) -> "GridChaosFunction":
        """``f(j_1, ..., j_n) = prod_i phi_i(j_i)`` from sparse 1-arity factors."""
        vals = {}
        for combo in itertools.product(*(f.items() for f in factors)):
            key = tuple(j for j, _ in combo)
            vals[key] = vals.get(key, 0.0) + math.prod(v for _, v in combo)
        return cls(len(factors), vals, grid)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        for key, v in self.values.items():
            for perm in set(itertools.permutations(key)):
                if abs(self.values.get(perm, 0.0) - v) > tol * max(1.0, abs(v)):
                    return False
        return True

    def scaled(self, c: float) -> "GridChaosFunction":
        return GridChaosFunction(self.arity, {k: c * v for k, v in self.values.items()},
                                 self.grid, self.symmetrized)

    def to_dense(self) -> np.ndarray:
        n_cells = int(np.prod(self.grid.shape))
        out = np.zeros((n_cells,) * self.arity)
        for key, v in self.values.items():
            out[key] += v
        return out


def _check_arity(f: GridChaosFunction, cap: int = MAX_ARITY):
    if f.arity > cap:
        raise ValueError(f"arity {f.arity} exceeds the cap {cap}")


def symmetrize(f: GridChaosFunction) -> GridChaosFunction:
    """Average of ``f`` over the ``n!`` orderings of its arguments."""
    _check_arity(f)
    n = f.arity
    perms = list(itertools.permutations(range(n)))
    out: dict = {}
    for key, v in f.values.items():
        for perm in perms:
            pk = tuple(key[i] for i in perm)
            out[pk] = out.get(pk, 0.0) + v
    scale = 1.0 / math.factorial(n)
    return GridChaosFunction(n, {k: v * scale for k, v in out.items()}, f.grid, True)


def strat_norm(f: GridChaosFunction) -> float:
    """Pairing norm: root of the delta-contracted sums of ``|f (x) f|``.

    Each satisfied pairing constraint on the ``2n`` cell indices leaves ``n``
    free cells, each weighted by the cell volume.
    """
    _check_arity(f, 3)
    n = f.arity
    if n == 0:
        return abs(f.values.get((), 0.0))
    pairings = enumerate_pairings(2 * n)
    items = [(k, abs(v)) for k, v in f.values.items() if v != 0]
    hv = f.grid.cell_volume**n
    total = 0.0
    for a, va in items:
        for b, vb in items:
            c = a + b
            hits = sum(1 for p in pairings if all(c[k] == c[l] for k, l in p.pair_map))
            total += hits * va * vb
    return math.sqrt(total * hv)


def _flat_increments(W: WhiteNoiseField, grid: GridSpec) -> np.ndarray:
    if W.grid != grid:
        raise ValueError("white noise and chaos function live on different grids")
    return np.asarray(W.increments).reshape(-1)


def discrete_strat_integral(f: GridChaosFunction, W: WhiteNoiseField) -> float:
    """``sum_j f(j_1..j_n) prod_i dW_{j_i}``, diagonals included."""
    _check_arity(f)
    dw = _flat_increments(W, f.grid)
    return float(sum(v * math.prod(dw[j] for j in key) for key, v in f.values.items()))


def _wick_monomial(key: tuple, dw: np.ndarray, sd: float) -> float:
    out = 1.0
    for j, r in Counter(key).items():
        out *= sd**r * special.eval_hermitenorm(r, dw[j] / sd)
    return out


def discrete_ito_integral(g: GridChaosFunction, W: WhiteNoiseField) -> float:
    """Wick-renormalized multilinear sum; requires a symmetric ``g``."""
    _check_arity(g)
    if not g.symmetrized and not g.is_symmetric(tol=1e-12):
        raise ValueError("discrete Ito integral needs a symmetric integrand")
    dw = _flat_increments(W, g.grid)
    sd = math.sqrt(g.grid.cell_volume)
    return float(sum(v * _wick_monomial(key, dw, sd) for key, v in g.values.items()))


def trace(f: GridChaosFunction, k: int) -> GridChaosFunction:
    """Contract the last ``2k`` arguments pairwise on the diagonal.

    ``(tr^k f)(x) = h^(kd) sum_y f(x, y1, y1, ..., yk, yk)``.  For symmetric
    ``f`` the choice of contracted positions is immaterial.
    """
    n = f.arity
    if 2 * k > n:
        raise ValueError(f"cannot take {k} traces of an arity-{n} function")
    keep = n - 2 * k
    out: dict = {}
    for key, v in f.values.items():
        tail = key[keep:]
        if all(tail[2 * i] == tail[2 * i + 1] for i in range(k)):
            out[key[:keep]] = out.get(key[:keep], 0.0) + v
    hk = f.grid.cell_volume**k
    return GridChaosFunction(keep, {kk: v * hk for kk, v in out.items()}, f.grid, f.symmetrized)


def hu_meyer_weight(n: int, k: int) -> int:
    """``n! / ((n - 2k)! k! 2^k)``: ways to choose ``k`` disjoint pairs among ``n``."""
    return math.factorial(n) // (math.factorial(n - 2 * k) * math.factorial(k) * 2**k)


def hu_meyer_strat_to_ito(f: GridChaosFunction) -> list[GridChaosFunction]:
    """Weighted traces ``c_k tr^k f`` so that ``I_strat(f) = sum_k I_ito(c_k tr^k f)``.

    Entry ``k`` has arity ``n - 2k``.
    """
    _check_arity(f)
    if not f.symmetrized and not f.is_symmetric(tol=1e-12):
        raise ValueError("Hu-Meyer expansion needs a symmetric integrand")
    n = f.arity
    return [trace(f, k).scaled(hu_meyer_weight(n, k)) for k in range(n // 2 + 1)]


def ito_to_strat_coefficients(f_seq: list) -> list[GridChaosFunction]:
    """Chaos coefficients ``g_m`` of ``sum_n I_strat(f_n)``.

    ``f_seq[n]`` is the arity-``n`` coefficient (or ``None``).  Returns
    ``g_0 .. g_N`` with ``g_m = sum_k (m+2k)!/(m! k! 2^k) tr^k f_{m+2k}``.
    """
    top = len(f_seq) - 1
    grid = next(f.grid for f in f_seq if f is not None)
    sym = all(f.symmetrized for f in f_seq if f is not None)
    out = []
    for m in range(top + 1):
        acc: dict = {}
        for k in range((top - m) // 2 + 1):
            f = f_seq[m + 2 * k]
            if f is None:
                continue
            _check_arity(f)
            if f.arity != m + 2 * k:
                raise ValueError(f"f_seq[{m + 2 * k}] has arity {f.arity}")
            w = math.factorial(m + 2 * k) // (math.factorial(m) * math.factorial(k) * 2**k)
            for key, v in trace(f, k).values.items():
                acc[key] = acc.get(key, 0.0) + w * v
        out.append(GridChaosFunction(m, acc, grid, sym))
    return out


def random_symmetric_function(
    arity: int, grid: GridSpec, rng: np.random.Generator, n_keys: int = 6, support: int = 4
) -> GridChaosFunction:
    """Symmetrized sparse function on ``support`` random cells.

    A small support makes repeated indices, and so nonzero traces, common.
    """
    n_cells = int(np.prod(grid.shape))
    cells = rng.choice(n_cells, size=min(support, n_cells), replace=False)
    vals: dict = {}
    for _ in range(n_keys):
        key = tuple(int(c) for c in rng.choice(cells, size=arity))
        vals[key] = vals.get(key, 0.0) + float(rng.standard_normal())
    return symmetrize(GridChaosFunction(arity, vals, grid))


def hu_meyer_residual(f: GridChaosFunction, W: WhiteNoiseField) -> tuple[float, float]:
    """``(I_strat(f), sum_k I_ito(c_k tr^k f))`` for one noise realization."""
    lhs = discrete_strat_integral(f, W)
    rhs = sum(discrete_ito_integral(g, W) for g in hu_meyer_strat_to_ito(f))
    return lhs, float(rhs)
