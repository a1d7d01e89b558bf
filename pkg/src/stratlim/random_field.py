"""Stationary Gaussian potentials and their white-noise coupling.

Fourier convention: ``S(xi) = int R(x) exp(-i xi.x) dx`` so ``S(0)`` is the
integral of the correlation, i.e. ``sigma**2``.  The square-root kernel
``rho`` has transform ``sqrt(S)``, hence ``rho * rho = R`` and
``int rho = sigma``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import special

from .grid import GridSpec

__all__ = [
    "CorrelationModel",
    "WhiteNoiseField",
    "PotentialField",
    "sigma",
    "rho_kernel",
    "sample_white_noise",
    "refine_white_noise",
    "mollified_potential",
    "white_noise_potential",
    "block_average",
    "write_potential_csv",
]


def _sech(x):
    e = np.exp(-np.abs(x))
    return 2 * e / (1 + e * e)


@dataclass(frozen=True)
class CorrelationModel:
    """Correlation with closed-form nonnegative spectrum.

    ``gaussian``: ``R(x) = A exp(-|x|^2 / (2 l^2))``.
    ``sech``: ``R(x) = A prod_i sech(x_i / l)``.
    """

    kind: Literal["gaussian", "sech"] = "gaussian"
    length_scale: float = 1.0
    amplitude: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if self.kind not in ("gaussian", "sech"):
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        if not self.length_scale > 0 or not self.amplitude > 0:
            raise ValueError("length_scale and amplitude must be positive")

    @classmethod
    def with_sigma(cls, sigma: float, kind="gaussian", length_scale=1.0, dim=1):
        """Model whose integrated correlation equals ``sigma**2``."""
        unit = cls(kind, length_scale, 1.0, dim)
        return cls(kind, length_scale, sigma**2 / unit.spectrum_at_zero(), dim)

    def correlation(self, r_or_x) -> np.ndarray:
        """``R``; gaussian takes ``|x|``, sech takes a list of coordinates."""
        l, A = self.length_scale, self.amplitude
        if self.kind == "gaussian":
            return A * np.exp(-np.asarray(r_or_x) ** 2 / (2 * l**2))
        return A * np.prod([_sech(np.asarray(c) / l) for c in r_or_x], axis=0)

    def spectrum(self, ks: list[np.ndarray]) -> np.ndarray:
        l, A, d = self.length_scale, self.amplitude, self.dim
        if self.kind == "gaussian":
            k2 = sum(k**2 for k in ks)
            return A * (2 * np.pi * l**2) ** (d / 2) * np.exp(-(l**2) * k2 / 2)
        return A * np.prod([np.pi * l * _sech(np.pi * l * k / 2) for k in ks], axis=0)

    def spectrum_at_zero(self) -> float:
        return float(self.spectrum([np.zeros(1)] * self.dim)[0])

    def sqrt_spectrum(self, ks: list[np.ndarray]) -> np.ndarray:
        return np.sqrt(self.spectrum(ks))

    def rho(self, coords: list[np.ndarray]) -> np.ndarray:
        """Closed-form square-root kernel at the given coordinates."""
        l, A, d = self.length_scale, self.amplitude, self.dim
        if self.kind == "gaussian":
            r2 = sum(np.asarray(c) ** 2 for c in coords)
            return np.sqrt(A) * (2 / (np.pi * l**2)) ** (d / 4) * np.exp(-r2 / l**2)
        # 1D factor: (1/2pi) int sqrt(pi l) sech^(1/2)(pi l k / 2) e^{ikx} dk
        out = np.sqrt(A)
        for c in coords:
            w = np.asarray(c) / (np.pi * l)
            gam = np.abs(special.gamma(0.25 + 0.5j * (2 * w))) ** 2
            out = out * np.sqrt(np.pi * l) / (np.pi**2 * l) / np.sqrt(2 * np.pi) * gam
        return out

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "length_scale": self.length_scale,
            "amplitude": self.amplitude,
            "dim": self.dim,
        }


def sigma(model: CorrelationModel) -> float:
    """``sqrt(int R dx)``, analytic per kind."""
    return float(np.sqrt(model.spectrum_at_zero()))


def _check_dims(model: CorrelationModel, grid: GridSpec):
    if model.dim != grid.dim:
        raise ValueError(f"model dimension {model.dim} != grid dimension {grid.dim}")


def rho_kernel(model: CorrelationModel, grid: GridSpec) -> np.ndarray:
    """``rho`` on the grid by inverse DFT of ``sqrt(S)``."""
    _check_dims(model, grid)
    if model.length_scale < 4 * grid.h:
        raise ValueError(
            f"length_scale / h = {model.length_scale / grid.h:.3g} < 4: rho is under-resolved"
        )
    r = grid.ifft(model.sqrt_spectrum(grid.wavenumbers())).real / grid.cell_volume
    return grid.from_fft_order(r)


@dataclass(frozen=True, eq=False)
class WhiteNoiseField:
    grid: GridSpec
    increments: np.ndarray = field(repr=False)
    master_seed: int
    realization_index: int
    stream: int = 0
    refinements: int = 0

    @property
    def derivative(self) -> np.ndarray:
        """Grid white noise ``dW / h^d``."""
        return self.increments / self.grid.cell_volume


def _rng(master_seed: int, realization_index: int, stream: int, level: int = 0):
    ss = np.random.SeedSequence(master_seed, spawn_key=(realization_index, stream, level))
    return np.random.default_rng(ss)


def sample_white_noise(
    grid: GridSpec, master_seed: int, realization_index: int, stream: int = 0
) -> WhiteNoiseField:
    """i.i.d. ``N(0, h^d)`` cell increments, reproducible from the seeds.

    ``stream`` separates independent families drawn for the same
    realization index (e.g. the uncoupled control in a convergence run).
    """
    rng = _rng(master_seed, realization_index, stream)
    inc = rng.normal(0.0, np.sqrt(grid.cell_volume), size=grid.shape)
    inc.setflags(write=False)
    return WhiteNoiseField(grid, inc, int(master_seed), int(realization_index), int(stream))


def refine_white_noise(W: WhiteNoiseField) -> WhiteNoiseField:
    """Split every cell into ``2^d`` subcells, preserving the cell sums.

    Conditional on the coarse increment, the subcell increments are drawn
    from the Gaussian bridge, so the refined field is an exact sample of the
    white noise on the finer grid coupled to ``W``.
    """
    fine = W.grid.refined()
    d = W.grid.dim
    k = 2**d
    rng = _rng(W.master_seed, W.realization_index, W.stream, W.refinements + 1)
    z = rng.standard_normal(W.grid.shape + (k,))
    z -= z.mean(axis=-1, keepdims=True)
    sub = W.increments[..., None] / k + np.sqrt(fine.cell_volume) * z
    # interleave subcells (..., 2, 2, ...) -> fine grid layout
    sub = sub.reshape(W.grid.shape + (2,) * d)
    order = [a for i in range(d) for a in (i, d + i)]
    inc = sub.transpose(order).reshape(fine.shape)
    inc.setflags(write=False)
    return WhiteNoiseField(fine, inc, W.master_seed, W.realization_index, W.stream, W.refinements + 1)


@dataclass(frozen=True, eq=False)
class PotentialField:
    values: np.ndarray = field(repr=False)
    eps: float
    noise: WhiteNoiseField
    model: CorrelationModel

    @property
    def grid(self) -> GridSpec:
        return self.noise.grid

    def provenance(self) -> dict:
        return {
            "eps": self.eps,
            "master_seed": self.noise.master_seed,
            "realization_index": self.noise.realization_index,
            "stream": self.noise.stream,
            "refinements": self.noise.refinements,
            "model": self.model.as_dict(),
        }


def mollified_potential(W: WhiteNoiseField, model: CorrelationModel, eps: float) -> PotentialField:
    """``q_eps = rho_eps * dW`` with ``rho_eps(x) = eps^-d rho(x / eps)``.

    This has the law of ``eps^(-d/2) q(x/eps)`` and is driven by the same
    increments as :func:`white_noise_potential`.
    """
    grid = W.grid
    _check_dims(model, grid)
    if eps < 4 * grid.h:
        raise ValueError(f"eps / h = {eps / grid.h:.3g} < 4: oscillation scale not resolved")
    if eps > grid.side / 8:
        raise ValueError(f"eps / L = {eps / grid.side:.3g} > 1/8: oscillation scale too large")
    ks = [eps * k for k in grid.wavenumbers()]
    q = grid.ifft(model.sqrt_spectrum(ks) * grid.fft(W.increments)).real / grid.cell_volume
    return PotentialField(q, float(eps), W, model)


def white_noise_potential(W: WhiteNoiseField, model: CorrelationModel) -> PotentialField:
    """``sigma dW / h^d`` per cell: the ``eps -> 0`` limit potential."""
    return PotentialField(sigma(model) * W.derivative, 0.0, W, model)


def block_average(grid: GridSpec, values: np.ndarray, block: int) -> np.ndarray:
    """Average over non-overlapping blocks of ``block`` cells per axis."""
    if grid.n_points % block:
        raise ValueError("block must divide n_points")
    nb = grid.n_points // block
    shape = np.shape(values)[:-grid.dim]
    for _ in range(grid.dim):
        shape = shape + (nb, block)
    v = np.reshape(values, shape)
    lead = np.ndim(values) - grid.dim
    return v.mean(axis=tuple(lead + 2 * i + 1 for i in range(grid.dim)))


def write_potential_csv(path, potential: PotentialField):
    """Dump ``(cell index, value)`` rows; seeds go in a leading comment."""
    prov = potential.provenance()
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# eps={prov['eps']} master_seed={prov['master_seed']} "
            f"realization_index={prov['realization_index']} stream={prov['stream']}\n"
        )
        w = csv.writer(fh)
        w.writerow(["cell", "value"])
        for idx, v in np.ndenumerate(potential.values):
            w.writerow([":".join(map(str, idx)), repr(float(v))])
