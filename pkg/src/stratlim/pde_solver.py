"""Solvers for ``u_t + (-Laplacian)^(m/2) u = V u`` on a periodic grid.

Two independent routes are provided:

* :func:`solve_with_potential` -- Strang splitting, potential half steps in
  real space around an exact spectral free step;
* :func:`duhamel_iterate` -- the Duhamel series ``u = sum_n u_n`` with
  ``u_(n+1)(t) = int_0^t exp(-(t-s)P) [V u_n(s)] ds``.

A grid white-noise potential makes the first route a discretization of the
Stratonovich SPDE: the noise is time independent, so it acts as an ordinary
potential and no Ito correction appears.

The Duhamel time integrals use exponential trapezoid weights: ``V u_n`` is
interpolated linearly in time on each cell and the free propagator is
integrated exactly, mode by mode.  This treats the integrable short-time
singularity of the kernel exactly instead of by a midpoint rule.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .grid import GridSpec
from .random_field import CorrelationModel, PotentialField

__all__ = [
    "InitialCondition",
    "SimConfig",
    "Trajectory",
    "DuhamelResult",
    "StabilityError",
    "NumericalFailure",
    "SeriesDivergenceWarning",
    "initial_field",
    "free_evolution",
    "solve_with_potential",
    "duhamel_iterate",
    "duhamel_integral",
    "mild_residual",
    "write_trajectory_csv",
]

SPLITTING_GUARD = 0.5
MIN_RESIDUAL_SAVES = 32


class StabilityError(ValueError):
    pass


class NumericalFailure(FloatingPointError):
    def __init__(self, message, last_valid_time):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class SeriesDivergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class InitialCondition:
    """Unit-mass initial data: ``gaussian`` (std ``width``), ``indicator``
    (box of half-width ``width``) or ``point`` (one cell)."""

    kind: Literal["gaussian", "indicator", "point"] = "gaussian"
    width: float | None = None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "width": self.width}


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    m: int = 2
    T: float = 0.5
    dt: float = 1e-3
    u0: InitialCondition = field(default_factory=InitialCondition)
    model: CorrelationModel = field(default_factory=CorrelationModel)
    scheme: Literal["splitting", "duhamel"] = "splitting"
    n_saves: int = 1
    n_terms: int = 10

    def __post_init__(self):
        if self.m % 2 or self.m <= self.grid.dim:
            raise ValueError(f"need even m > d, got m={self.m}, d={self.grid.dim}")
        if not 0 < self.dt <= self.T:
            raise ValueError(f"need 0 < dt <= T, got dt={self.dt}, T={self.T}")
        if self.scheme not in ("splitting", "duhamel"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_saves < 1:
            raise ValueError("n_saves must be at least 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.T / self.dt - 1e-9)))

    @property
    def step(self) -> float:
        """Actual step, ``T / n_steps``."""
        return self.T / self.n_steps

    def save_indices(self) -> np.ndarray:
        k = self.n_steps
        n = min(self.n_saves, k)
        return np.unique(np.round(np.linspace(0, k, n + 1)).astype(int))

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {
            "grid": self.grid.as_dict(),
            "m": self.m,
            "T": self.T,
            "dt": self.dt,
            "u0": self.u0.as_dict(),
            "model": self.model.as_dict(),
            "scheme": self.scheme,
            "n_saves": self.n_saves,
            "n_terms": self.n_terms,
        }


def initial_field(config: SimConfig) -> np.ndarray:
    grid, ic = config.grid, config.u0
    width = ic.width if ic.width is not None else grid.side / 40
    if ic.kind == "gaussian":
        r2 = grid.radius() ** 2
        return (2 * np.pi * width**2) ** (-grid.dim / 2) * np.exp(-r2 / (2 * width**2))
    if ic.kind == "indicator":
        inside = np.ones(grid.shape, dtype=bool)
        for c in grid.coords():
            inside &= np.abs(c) < width
        u = inside.astype(float)
        return u / grid.integrate(u)
    if ic.kind == "point":
        u = np.zeros(grid.shape)
        u[(grid.n_points // 2,) * grid.dim] = 1 / grid.cell_volume
        return u
    raise ValueError(f"unknown initial condition {ic.kind!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    potential_ref: dict | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True, eq=False)
class DuhamelResult:
    trajectory: Trajectory
    term_norms: np.ndarray
    tail_norm: float

    @property
    def final(self) -> np.ndarray:
        return self.trajectory.final


def _potential_values(V, grid: GridSpec):
    if isinstance(V, PotentialField):
        if V.grid != grid:
            raise ValueError("potential grid does not match the configuration grid")
        return np.asarray(V.values), V.provenance()
    V = np.asarray(V, dtype=float)
    grid.check_field(V, "potential")
    return V, None


def _symbol(config: SimConfig, t) -> np.ndarray:
    return np.exp(-t * config.grid.rwavenumber_norm() ** config.m)


def free_evolution(config: SimConfig, u: np.ndarray, t: float) -> np.ndarray:
    g = config.grid
    return g.irfft(_symbol(config, t) * g.rfft(u))


def solve_with_potential(config: SimConfig, V) -> Trajectory:
    """Strang splitting ``exp(dt V/2) exp(-dt P) exp(dt V/2)`` per step.

    ``V`` may carry leading batch axes (independent potentials); the initial
    condition is broadcast against them.  States are saved at
    ``config.n_saves`` evenly spaced steps plus ``t = 0``.
    """
    grid = config.grid
    v, prov = _potential_values(V, grid)
    dt = config.step
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    if dt * vmax > SPLITTING_GUARD:
        raise StabilityError(
            f"dt * max|V| = {dt * vmax:.3g} > {SPLITTING_GUARD}; use dt <= {SPLITTING_GUARD / vmax:.3g}"
        )
    half = np.exp(0.5 * dt * v)
    prop = _symbol(config, dt)
    u = np.broadcast_to(initial_field(config), np.broadcast_shapes(v.shape, grid.shape)).copy()
    saves = set(config.save_indices().tolist())
    times, states = [0.0], [u.copy()]
    for i in range(1, config.n_steps + 1):
        # overflow surfaces as non-finite values at the next save
        with np.errstate(over="ignore", invalid="ignore"):
            u = grid.irfft(prop * grid.rfft(half * u)) * half
        if i in saves:
            if not np.all(np.isfinite(u)):
                raise NumericalFailure(f"non-finite state at t={i * dt:.4g}", times[-1])
            times.append(i * dt)
            states.append(u.copy())
    return Trajectory(np.array(times), np.stack(states), prov)


def _phi_weights(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi1 = (1 - e^-a)/a`` and ``phi2 = (1 - (1+a)e^-a)/a^2``, stable at 0."""
    small = a < 1e-3
    safe = np.where(small, 1.0, a)
    em = -np.expm1(-safe)
    phi1 = np.where(small, 1 - a / 2 + a**2 / 6 - a**3 / 24, em / safe)
    phi2 = np.where(
        small,
        0.5 - a / 3 + a**2 / 8 - a**3 / 30,
        (em - safe * np.exp(-safe)) / safe**2,
    )
    return phi1, phi2


def _duhamel_hat(config: SimConfig, times: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    """``int_0^{t_i} exp(-(t_i-s)P) f(s) ds`` for all ``i``, in Fourier space.

    ``f_hat[i]`` holds the transform of ``f(t_i)``; ``f`` is taken piecewise
    linear between the nodes.
    """
    lam = config.grid.rwavenumber_norm() ** config.m
    out = np.zeros_like(f_hat)
    cache = {}
    for i in range(1, len(times)):
        dt = float(times[i] - times[i - 1])
        key = round(dt, 15)
        if key not in cache:
            phi1, phi2 = _phi_weights(lam * dt)
            cache[key] = (np.exp(-lam * dt), dt * phi2, dt * (phi1 - phi2))
        prop, w_old, w_new = cache[key]
        out[i] = prop * out[i - 1] + w_old * f_hat[i - 1] + w_new * f_hat[i]
    return out


def duhamel_integral(config: SimConfig, times, states, V) -> np.ndarray:
    """``H_V u(t_i) = int_0^{t_i} exp(-(t_i - s)P) [V u(s)] ds`` at the nodes."""
    grid = config.grid
    v, _ = _potential_values(V, grid)
    f_hat = grid.rfft(np.asarray(states) * v)
    return grid.irfft(_duhamel_hat(config, np.asarray(times, dtype=float), f_hat))


def duhamel_iterate(
    config: SimConfig, V, n_terms: int | None = None, n_nodes: int | None = None
) -> DuhamelResult:
    """Partial sums ``u_0 + ... + u_n`` of the Duhamel series.

    The time mesh has ``n_nodes`` uniform cells (default: one per solver
    step, at least 16 per unit time).  ``term_norms[n]`` is the grid L2 norm
    of ``u_n(T)``; ``tail_norm`` is that of the first omitted term.
    """
    n_terms = config.n_terms if n_terms is None else n_terms
    if not 0 <= n_terms <= 12:
        raise ValueError("n_terms must lie in 0..12")
    grid = config.grid
    v, prov = _potential_values(V, grid)
    K = n_nodes if n_nodes is not None else config.n_steps
    K = max(K, int(math.ceil(16 * config.T)))
    times = np.linspace(0.0, config.T, K + 1)

    lam = grid.rwavenumber_norm() ** config.m
    u0_hat = grid.rfft(np.broadcast_to(initial_field(config), np.broadcast_shapes(v.shape, grid.shape)))
    term_hat = np.exp(-lam * times.reshape((-1,) + (1,) * u0_hat.ndim)) * u0_hat
    total_hat = term_hat.copy()
    norms = []
    tail = float("nan")
    for n in range(n_terms + 2):
        term = grid.irfft(term_hat)
        norms.append(float(np.sqrt(np.mean(grid.l2_norm(term[-1]) ** 2))))
        if n == n_terms + 1:
            tail = norms.pop()
            break
        if n > 0:
            total_hat += term_hat
        term_hat = _duhamel_hat(config, times, grid.rfft(term * v))
    norms = np.array(norms)
    for n in range(1, len(norms) - 2):
        if norms[n] <= norms[n + 1] <= norms[n + 2]:
            warnings.warn(
                f"Duhamel term norms non-decreasing from n={n}: series outside its regime",
                SeriesDivergenceWarning,
                stacklevel=2,
            )
            break
    idx = np.linspace(0, K, min(config.n_saves, K) + 1).round().astype(int)
    idx = np.unique(np.concatenate([idx, [K]]))
    states = grid.irfft(total_hat[idx])
    return DuhamelResult(Trajectory(times[idx], states, prov), norms, tail)


def mild_residual(traj: Trajectory, V, config: SimConfig) -> float:
    """``||u(T) - exp(-TP)u0 - H_V u(T)|| / ||u(T)||`` from the saved states.

    The time integral uses the saved states as quadrature nodes, so the
    trajectory must be saved densely (at least 32 saves).
    """
    if len(traj.times) < MIN_RESIDUAL_SAVES + 1:
        raise ValueError(
            f"trajectory has {len(traj.times) - 1} saves; need >= {MIN_RESIDUAL_SAVES} for the residual"
        )
    T = float(traj.times[-1])
    hu = duhamel_integral(config, traj.times, traj.states, V)[-1]
    free = free_evolution(config, initial_field(config), T)
    grid = config.grid
    res = grid.l2_norm(traj.final - free - hu)
    return float(np.max(res / grid.l2_norm(traj.final)))


def write_trajectory_csv(path, traj: Trajectory, grid: GridSpec):
    """Long-format ``time, cell, value`` rows (un-batched trajectories only)."""
    if traj.states.ndim != grid.dim + 1:
        raise ValueError("CSV export supports a single realization")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "cell", "value"])
        for t, state in zip(traj.times, traj.states):
            for idx, v in np.ndenumerate(state):
                w.writerow([repr(float(t)), ":".join(map(str, idx)), repr(float(v))])
