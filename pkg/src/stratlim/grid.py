"""Periodic box discretization of R^d.

Fields live in "natural" order: index ``j`` along each axis sits at
``x_j = (j - N/2) h`` so the origin is cell ``N/2``.  Spectral operations
are translation invariant and do not care about this choice; real-space
kernels are returned in the same order for direct comparison with
closed forms.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid of ``n_points**dim`` cells on ``[-L/2, L/2)^d``."""

    dim: int
    side: float
    n_points: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.side > 0:
            raise ValueError(f"side must be positive, got {self.side}")
        n = int(self.n_points)
        if n != self.n_points or n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two, got {self.n_points}")

    @property
    def h(self) -> float:
        return self.side / self.n_points

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing array axes that carry the spatial dimensions."""
        return tuple(range(-self.dim, 0))

    @cached_property
    def coords_1d(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.h

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        x = self.coords_1d
        out = []
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.n_points
            out.append(x.reshape(shape))
        return out

    def radius(self) -> np.ndarray:
        r2 = sum(c**2 for c in self.coords())
        return np.sqrt(np.broadcast_to(r2, self.shape))

    def wavenumbers(self) -> list[np.ndarray]:
        """Lattice frequencies ``2 pi k / L`` in FFT order, broadcastable."""
        k = 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.h)
        out = []
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.n_points
            out.append(k.reshape(shape))
        return out

    def wavenumber_norm(self) -> np.ndarray:
        k2 = sum(k**2 for k in self.wavenumbers())
        return np.sqrt(np.broadcast_to(k2, self.shape))

    def rwavenumber_norm(self) -> np.ndarray:
        """``|xi|`` on the half lattice used by :meth:`rfft`."""
        ks = self.wavenumbers()
        ks[-1] = 2 * np.pi * np.fft.rfftfreq(self.n_points, d=self.h).reshape(
            (1,) * (self.dim - 1) + (-1,)
        )
        k2 = sum(k**2 for k in ks)
        return np.sqrt(np.broadcast_to(k2, self.shape[:-1] + (self.n_points // 2 + 1,)))

    def rfft(self, a):
        return np.fft.rfftn(a, axes=self.axes)

    def irfft(self, a):
        return np.fft.irfftn(a, s=self.shape, axes=self.axes)

    # Real-space arrays are in natural order; FFTs want the origin first.
    def to_fft_order(self, a: np.ndarray) -> np.ndarray:
        return np.fft.ifftshift(a, axes=self.axes)

    def from_fft_order(self, a: np.ndarray) -> np.ndarray:
        return np.fft.fftshift(a, axes=self.axes)

    def fft(self, a):
        return np.fft.fftn(a, axes=self.axes)

    def ifft(self, a):
        return np.fft.ifftn(a, axes=self.axes)

    def integrate(self, a: np.ndarray) -> np.ndarray:
        """Riemann sum over the trailing spatial axes."""
        return np.sum(a, axis=self.axes) * self.cell_volume

    def l2_norm(self, a: np.ndarray) -> np.ndarray:
        return np.sqrt(self.integrate(np.abs(a) ** 2))

    def check_field(self, a: np.ndarray, name: str = "field"):
        if tuple(np.shape(a)[-self.dim:]) != self.shape:
            raise ValueError(
                f"{name} has spatial shape {np.shape(a)[-self.dim:]}, grid expects {self.shape}"
            )

    def as_dict(self) -> dict:
        return {"dim": self.dim, "side": float(self.side), "n_points": self.n_points}

    def refined(self) -> "GridSpec":
        return GridSpec(self.dim, self.side, 2 * self.n_points)
