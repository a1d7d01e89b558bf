"""Nested time-simplex integrals with power-law singularities.

For exponents ``a_0..a_n`` (each ``< 1``) the integral

    I_n(t) = int_{0 < t_n < ... < t_1 < t} prod_{k=0}^{n} (t_k - t_{k+1})^(-a_k) dt_1..dt_n,

with ``t_0 = t`` and ``t_{n+1} = 0``, is a product of Beta functions that
telescopes to a single Gamma ratio.  Everything is evaluated in log-Gamma
arithmetic so large ``n`` does not overflow.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "ExponentProfile",
    "DivergentIntegralError",
    "QuadratureBudgetError",
    "simplex_closed_form",
    "simplex_beta_product",
    "simplex_quadrature",
    "all_profiles",
    "jnm_bound",
    "jnm_partial_sums",
    "jnm_shells",
    "gamma_ratio",
    "gamma_ratio_bound_check",
    "calibrate_bound_constant",
    "stirling_bound_constant",
    "bound_scan",
    "write_scan_csv",
]


class DivergentIntegralError(ValueError):
    pass


class QuadratureBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExponentProfile:
    """Exponents ``a_0..a_n``, each either 0 or the common value ``alpha``."""

    alphas: tuple[float, ...]
    alpha: float

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if len(self.alphas) < 1:
            raise ValueError("profile needs at least a_0")
        for a in self.alphas:
            if a not in (0, self.alpha) or a >= 1:
                raise ValueError(f"exponent {a} is neither 0 nor alpha={self.alpha}")

    @classmethod
    def from_mask(cls, mask: Sequence[bool], alpha: float) -> "ExponentProfile":
        return cls(tuple(alpha if b else 0.0 for b in mask), alpha)

    @property
    def n(self) -> int:
        return len(self.alphas) - 1

    @property
    def betas(self) -> tuple[float, ...]:
        """Suffix sums ``b_k = a_k + ... + a_n``."""
        return tuple(itertools.accumulate(reversed(self.alphas)))[::-1]


def all_profiles(n: int, alpha: float):
    """Every ``{0, alpha}`` profile of length ``n + 1``."""
    for mask in itertools.product((False, True), repeat=n + 1):
        yield ExponentProfile.from_mask(mask, alpha)


def _check_integrable(profile: ExponentProfile):
    n, b = profile.n, profile.betas
    if b[0] >= n + 1:
        raise DivergentIntegralError(f"beta_0 = {b[0]} >= n + 1 = {n + 1}: integral diverges")
    for k in range(n):
        if n - k - b[k + 1] <= 0:
            raise DivergentIntegralError(f"stage {k}: n - k - beta_(k+1) = {n - k - b[k + 1]} <= 0")


def simplex_closed_form(t: float, profile: ExponentProfile, log: bool = False) -> float:
    """``t^(n - b_0) Gamma(1 - b_n) / Gamma(n + 1 - b_0) prod_{k<n} Gamma(1 - a_k)``."""
    _check_integrable(profile)
    n, a, b = profile.n, profile.alphas, profile.betas
    val = (
        (n - b[0]) * math.log(t)
        + special.gammaln(1 - b[n])
        - special.gammaln(n + 1 - b[0])
        + sum(special.gammaln(1 - a[k]) for k in range(n))
    )
    return float(val) if log else math.exp(val)


def simplex_beta_product(t: float, profile: ExponentProfile, log: bool = False) -> float:
    """Unsimplified form ``t^(n - b_0) prod_k B(n - k - b_(k+1), 1 - a_k)``."""
    _check_integrable(profile)
    n, a, b = profile.n, profile.alphas, profile.betas
    val = (n - b[0]) * math.log(t) + sum(
        special.betaln(n - k - b[k + 1], 1 - a[k]) for k in range(n)
    )
    return float(val) if log else math.exp(val)


def simplex_quadrature(
    t: float, profile: ExponentProfile, tol: float = 1e-6, limit: int = 200
) -> float:
    """Nested adaptive quadrature of the simplex integral.

    Each level ``F_k(s) = int_0^s (s - r)^(-a_k) F_(k+1)(r) dr`` is split at
    ``s/2``.  The upper half uses ``u = (s - r)^(1 - a_k)``, which removes the
    kernel singularity; the lower half uses ``r = (s/2) v^q`` with
    ``q = 1/(1 - max a)``, which makes any integrable power of ``r`` bounded.
    Raises :class:`QuadratureBudgetError` if an inner integral cannot reach
    ``tol``.
    """
    if profile.n > 4:
        raise ValueError("quadrature oracle limited to n <= 4")
    _check_integrable(profile)
    n, a = profile.n, profile.alphas
    q = 1.0 / (1.0 - max(a))
    opts = dict(epsabs=tol, epsrel=tol, limit=limit, full_output=1)

    def quad(fn, lo, hi):
        res = integrate.quad(fn, lo, hi, **opts)
        if len(res) > 3 and "roundoff" not in res[3] and res[1] > 10 * max(tol, tol * abs(res[0])):
            raise QuadratureBudgetError(f"quadrature error {res[1]:.2e} exceeds tol {tol:.1e}")
        return res[0]

    def level(k: int, s: float) -> float:
        if k == n:
            return s ** (-a[n]) if a[n] else 1.0
        if s <= 0:
            return 0.0
        ak = a[k]
        half = s / 2
        p = 1.0 / (1.0 - ak)

        def upper(u):
            return p * level(k + 1, s - u**p)

        def lower(v):
            r = half * v**q
            return (s - r) ** (-ak) * level(k + 1, r) * half * q * v ** (q - 1)

        return quad(upper, 0.0, half ** (1 - ak)) + quad(lower, 0.0, 1.0)

    return level(0, t)


def _xlogx_pow(n: int, expo: float) -> float:
    # log(n^(n * expo)) with 0^0 = 1
    return 0.0 if n == 0 else n * expo * math.log(n)


def jnm_bound(n: int, m: int, t: float, alpha: float, C: float, log: bool = False) -> float:
    """``t^((n+m)(1-alpha/2)-alpha) C^(n+m) / (n^(n(1-alpha)/2) m^(m(1-alpha)/2))``."""
    if not 0 < alpha < 1 or not C > 0:
        raise ValueError("need alpha in (0, 1) and C > 0")
    e = (1 - alpha) / 2
    val = (
        ((n + m) * (1 - alpha / 2) - alpha) * math.log(t)
        + (n + m) * math.log(C)
        - _xlogx_pow(n, e)
        - _xlogx_pow(m, e)
    )
    return val if log else math.exp(val)


def jnm_shells(N: int, t: float, alpha: float, C: float) -> np.ndarray:
    """``S_K - S_(K-1)``: the sum of ``J_{n,m}`` over ``max(n, m) = K``."""
    J = np.array([[jnm_bound(n, m, t, alpha, C) for m in range(N + 1)] for n in range(N + 1)])
    return np.array([J[K, : K + 1].sum() + J[:K, K].sum() for K in range(N + 1)])


def jnm_partial_sums(N: int, t: float, alpha: float, C: float) -> np.ndarray:
    """``S_K = sum_{n, m <= K} J_{n,m}`` for ``K = 0..N``."""
    return np.cumsum(jnm_shells(N, t, alpha, C))


def gamma_ratio(n: int, m: int, n0: int, m0: int, alpha: float, log: bool = False) -> float:
    """``Gamma(1-alpha)^((n+m)/2) / (Gamma(n+1-(n0+1)alpha) Gamma(m+1-m0 alpha))``."""
    if (n + m) % 2:
        raise ValueError("n + m must be even")
    a1 = n + 1 - (n0 + 1) * alpha
    a2 = m + 1 - m0 * alpha
    if a1 <= 0 or a2 <= 0:
        raise ValueError(f"Gamma pole: arguments {a1}, {a2}")
    val = (n + m) / 2 * special.gammaln(1 - alpha) - special.gammaln(a1) - special.gammaln(a2)
    return float(val) if log else math.exp(val)


def _majorant_log(n: int, m: int, alpha: float, C: float) -> float:
    e = 1 - alpha / 2
    return (n + m) * math.log(C) - _xlogx_pow(n, e) - _xlogx_pow(m, e)


def gamma_ratio_bound_check(
    n: int, m: int, n0: int, m0: int, alpha: float, C: float = 1.0
) -> float:
    """Gamma ratio divided by ``C^(n+m) / (n^(n(1-alpha/2)) m^(m(1-alpha/2)))``."""
    if n0 > (n + 1) / 2 or m0 > m / 2:
        raise ValueError(f"need n0 <= (n+1)/2 and m0 <= m/2, got n0={n0}, m0={m0}")
    return math.exp(gamma_ratio(n, m, n0, m0, alpha, log=True) - _majorant_log(n, m, alpha, C))


def _admissible(nmax: int):
    for n in range(nmax + 1):
        for m in range(nmax + 1):
            if (n + m) % 2:
                continue
            for n0 in range(int((n + 1) // 2) + 1):
                for m0 in range(m // 2 + 1):
                    yield n, m, n0, m0


def stirling_bound_constant(alpha: float) -> float:
    """Large-index limit ``Gamma(1-alpha)^(1/2) (e / (1 - alpha/2))^(1 - alpha/2)``.

    Calibrated constants increase towards this value as the scan range grows.
    """
    return math.sqrt(special.gamma(1 - alpha)) * (math.e / (1 - alpha / 2)) ** (1 - alpha / 2)


def calibrate_bound_constant(alpha: float, nmax: int) -> float:
    """Smallest ``C`` with ratio <= 1 over all admissible ``(n, m, n0, m0)``, ``n + m > 0``.

    ``n + m = 0`` has a majorant free of ``C``; it is checked separately by
    callers.
    """
    best = 0.0
    for n, m, n0, m0 in _admissible(nmax):
        if n + m == 0:
            continue
        lr = gamma_ratio(n, m, n0, m0, alpha, log=True) - _majorant_log(n, m, alpha, 1.0)
        best = max(best, lr / (n + m))
    return math.exp(best)


def bound_scan(alpha: float, nmax: int, C: float | None = None) -> list[dict]:
    """Ratio table over admissible indices; ``C`` defaults to the calibrated one."""
    if C is None:
        C = calibrate_bound_constant(alpha, nmax)
    rows = []
    for n, m, n0, m0 in _admissible(nmax):
        rows.append({
            "n": n, "m": m, "n0": n0, "m0": m0, "alpha": alpha, "C": C,
            "value": gamma_ratio(n, m, n0, m0, alpha),
            "ratio": gamma_ratio_bound_check(n, m, n0, m0, alpha, C),
        })
    return rows


def write_scan_csv(path, rows: list[dict]):
    fields = ["n", "m", "alpha", "value", "ratio"]
    extra = [k for k in rows[0] if k not in fields] if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields + extra)
        w.writeheader()
        w.writerows(rows)
