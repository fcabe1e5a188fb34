"""Periodic lattices, complex fields with a far-field constant, and
spectral differential operators.

A truncated box of side lengths ``L_i`` with ``N_i`` points per axis stands
in for R^d.  Fields are stored as ``psi = c + v`` where ``c`` is the unit
far-field constant; every spectral operator acts on ``v`` so that the
constant is carried exactly.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "Field",
    "SpectralWorkspace",
    "make_grid",
    "laplacian",
    "gradient",
    "grad_norm_sq_integral",
    "integrate",
    "init_constant",
    "init_plane_wave_perturbed",
    "init_black_soliton_1d",
    "init_random_bounded",
    "refine",
    "fft_workers",
]


def fft_workers() -> int:
    """Worker count for the FFT backend, capped by ``NLSFARF_THREADS`` (0 = auto)."""
    raw = os.environ.get("NLSFARF_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        return os.cpu_count() or 1
    return n


@dataclass(frozen=True)
class Grid:
    dim: int
    extents: tuple[float, ...]
    points: tuple[int, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.extents, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    def axis_coords(self, axis: int) -> np.ndarray:
        """Sample positions ``j*h`` for ``j = 0..N-1`` along one axis."""
        return np.arange(self.points[axis]) * self.spacing[axis]

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij")

    def axis_wavenumbers(self, axis: int) -> np.ndarray:
        # FFT ordering of {2 pi k / L : k = -N/2 .. N/2-1}
        N, L = self.points[axis], self.extents[axis]
        return 2.0 * np.pi * np.fft.fftfreq(N, d=1.0 / N) / L

    def is_lattice_vector(self, k, tol: float = 1e-9) -> bool:
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if k.shape != (self.dim,):
            return False
        m = k * np.asarray(self.extents) / (2.0 * np.pi)
        if np.any(np.abs(m - np.round(m)) > tol):
            return False
        return bool(np.all(np.abs(np.round(m)) <= np.asarray(self.points) // 2 - 1))

    def mode_index(self, k) -> tuple[int, ...]:
        """FFT array index of the lattice wavevector ``k``."""
        if not self.is_lattice_vector(k):
            raise ValueError(f"wavevector {k!r} is not on the lattice")
        k = np.atleast_1d(np.asarray(k, dtype=float))
        m = np.round(k * np.asarray(self.extents) / (2.0 * np.pi)).astype(int)
        return tuple(int(mi) % N for mi, N in zip(m, self.points))


def make_grid(dim: int, extents, points) -> Grid:
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    extents = tuple(float(L) for L in np.atleast_1d(extents))
    points = tuple(int(N) for N in np.atleast_1d(points))
    if len(extents) == 1 and dim > 1:
        extents = extents * dim
    if len(points) == 1 and dim > 1:
        points = points * dim
    if len(extents) != dim or len(points) != dim:
        raise ValueError("extents and points need one entry per axis")
    for L in extents:
        if not np.isfinite(L) or L <= 0:
            raise ValueError(f"extent must be positive, got {L}")
    for N in points:
        if N < 4 or N % 2:
            raise ValueError(f"points per axis must be even and >= 4, got {N}")
    return Grid(dim, extents, points)


@dataclass
class Field:
    """Wave function sampled on ``grid`` with far-field constant ``farfield``."""

    grid: Grid
    values: np.ndarray
    farfield: complex = 1.0 + 0.0j

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            if self.values.size != self.grid.size:
                raise ValueError(
                    f"field has {self.values.size} entries, grid needs {self.grid.size}"
                )
            self.values = self.values.reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        self.farfield = complex(self.farfield)
        if abs(abs(self.farfield) - 1.0) > 1e-12:
            raise ValueError(f"|farfield| must be 1, got {abs(self.farfield)!r}")

    @property
    def affine(self) -> np.ndarray:
        """The part ``v = psi - c``."""
        return self.values - self.farfield

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.farfield)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values, self.farfield)


@dataclass(frozen=True)
class SpectralWorkspace:
    """Wavenumber tables for one grid.  Immutable; scipy's FFT keeps no shared
    mutable plan, so one workspace may serve several threads."""

    grid: Grid
    workers: int = dc_field(default_factory=fft_workers)

    @cached_property
    def k_axes(self) -> list[np.ndarray]:
        axes = []
        for a in range(self.grid.dim):
            shape = [1] * self.grid.dim
            shape[a] = self.grid.points[a]
            axes.append(self.grid.axis_wavenumbers(a).reshape(shape))
        return axes

    @cached_property
    def k2(self) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        for k in self.k_axes:
            out = out + k**2
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        # 2/3 rule: keep |m| <= N/3 on every axis
        mask = np.ones(self.grid.shape, dtype=bool)
        for a, k in enumerate(self.k_axes):
            N, L = self.grid.points[a], self.grid.extents[a]
            m = np.abs(k * L / (2.0 * np.pi))
            mask = mask & (m <= N // 3)
        return mask

    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.fftn(a, workers=self.workers)

    def ifft(self, a: np.ndarray) -> np.ndarray:
        return sfft.ifftn(a, workers=self.workers)

    def propagator(self, dt: float) -> np.ndarray:
        """Fourier symbol of the free flow exp((i/2) dt Laplacian)."""
        return np.exp(-0.5j * dt * self.k2)


def _check_grid(field: Field, ws: SpectralWorkspace):
    if field.grid != ws.grid:
        raise ValueError("field and workspace live on different grids")


def integrate(grid: Grid, density: np.ndarray) -> float:
    """Trapezoid rule on the periodic lattice."""
    return float(np.sum(density) * grid.cell_volume)


def laplacian(field: Field, ws: SpectralWorkspace) -> np.ndarray:
    _check_grid(field, ws)
    return ws.ifft(-ws.k2 * ws.fft(field.affine))


def gradient(field: Field, ws: SpectralWorkspace) -> list[np.ndarray]:
    _check_grid(field, ws)
    vh = ws.fft(field.affine)
    return [ws.ifft(1j * k * vh) for k in ws.k_axes]


def _grad_sq_from_hat(vh: np.ndarray, ws: SpectralWorkspace) -> float:
    grid = ws.grid
    return float(np.sum(ws.k2 * np.abs(vh) ** 2) * grid.volume / grid.size**2)


def grad_norm_sq_integral(field: Field, ws: SpectralWorkspace) -> float:
    """Integral of |grad psi|^2 via Parseval."""
    _check_grid(field, ws)
    return _grad_sq_from_hat(ws.fft(field.affine), ws)


def init_constant(grid: Grid, c: complex = 1.0) -> Field:
    return Field(grid, np.full(grid.shape, complex(c)), c)


def init_plane_wave_perturbed(grid: Grid, c: complex, eps: float, mode_k) -> Field:
    """``c (1 + eps cos(k.x))`` for a lattice wavevector ``k``."""
    if not 0.0 <= eps <= 0.1:
        raise ValueError(f"eps must lie in [0, 0.1], got {eps}")
    if not grid.is_lattice_vector(mode_k):
        raise ValueError(f"wavevector {mode_k!r} is not on the lattice")
    k = np.atleast_1d(np.asarray(mode_k, dtype=float))
    phase = sum(ki * xi for ki, xi in zip(k, grid.coords()))
    return Field(grid, complex(c) * (1.0 + eps * np.cos(phase)), c)


def init_black_soliton_1d(grid: Grid) -> Field:
    """Stationary dark soliton ``tanh(x - L/2)`` made periodic by odd reflection.

    The returned field lives on a doubled box (extent ``2L``, ``2N`` points):
    the first copy holds ``tanh(x - L/2)`` and the second its mirror
    ``-tanh(x - 3L/2)``.  Far-field constant is ``+1``.
    """
    if grid.dim != 1:
        raise ValueError("black soliton requires a 1D grid")
    L = grid.extents[0]
    if L < 30.0:
        raise ValueError(f"extent must be >= 30 for the soliton, got {L}")
    doubled = Grid(1, (2.0 * L,), (2 * grid.points[0],))
    x = doubled.axis_coords(0)
    psi = np.where(x < L, np.tanh(x - 0.5 * L), -np.tanh(x - 1.5 * L))
    return Field(doubled, psi.astype(np.complex128), 1.0)


def init_random_bounded(
    grid: Grid,
    c: complex,
    energy_budget: float,
    seed: int,
    k_scale: float = 1.5,
) -> Field:
    """Band-limited random perturbation of ``c`` with ``E(psi) <= energy_budget``.

    Fourier coefficients are complex Gaussians with a Gaussian envelope of
    width ``k_scale`` inside the 2/3 band.  The rescaling uses
    ``E(c + s v) <= s^2 (||grad v||^2 + ||v||^2)``, which holds pointwise.
    """
    if energy_budget <= 0:
        raise ValueError("energy_budget must be positive")
    ws = SpectralWorkspace(grid, workers=1)
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coef *= np.exp(-ws.k2 / (2.0 * k_scale**2)) * ws.dealias_mask
    coef.flat[0] = 0.0
    v = ws.ifft(coef)
    h1 = _grad_sq_from_hat(coef, ws) + integrate(grid, np.abs(v) ** 2)
    s = np.sqrt(energy_budget / h1) * (1.0 - 1e-12)
    return Field(grid, complex(c) + s * v, c)


def refine(field: Field, factor: int = 2) -> Field:
    """Spectral (zero-padding) interpolation onto a grid ``factor`` times finer."""
    grid = field.grid
    fine = Grid(grid.dim, grid.extents, tuple(N * factor for N in grid.points))
    vh = np.fft.fftn(field.affine)
    out = np.zeros(fine.shape, dtype=np.complex128)
    src = []
    dst = []
    for N, M in zip(grid.points, fine.points):
        m = np.fft.fftfreq(N, d=1.0 / N).astype(int)
        src.append(np.arange(N))
        dst.append(m % M)
    out[np.ix_(*dst)] = vh[np.ix_(*src)]
    out *= fine.size / grid.size
    return Field(fine, field.farfield + np.fft.ifftn(out), field.farfield)
