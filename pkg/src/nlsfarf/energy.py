"""Energy-space functionals, cutoff decompositions and metrics.

All spatial integrals are trapezoid sums on the periodic lattice; gradient
terms go through Parseval on the affine part ``psi - c``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, astuple, fields
from typing import NamedTuple

import numpy as np

from .grid import Field, SpectralWorkspace, integrate, _grad_sq_from_hat
from .nonlinearity import NonlinearitySpec, PotentialStructure, eval_F

__all__ = [
    "EnergyReport",
    "ChiDecomposition",
    "MetricInputs3D",
    "Distance",
    "CSV_COLUMNS",
    "chi",
    "phi_bridge",
    "energy_E",
    "energy_GL",
    "energy_mGL",
    "hamiltonian",
    "functional_M",
    "functional_Z",
    "choose_C0",
    "coercivity_constant",
    "decompose_chi",
    "eta_support_measure",
    "x1_plus_h1_canonical",
    "h1_norm",
    "metric_dE",
    "metric_dGL",
    "metric_inputs",
    "metric_delta3d",
    "full_report",
]

CSV_COLUMNS = ("t", "E", "grad_part", "density_part", "E_GL", "E_mGL", "H", "M", "Z", "status")


def chi(z) -> np.ndarray:
    """Radial cutoff: 1 on |z| <= 2, 0 on |z| >= 3, exp(1 - 1/(1-t^2)) between."""
    r = np.abs(np.asarray(z))
    t = np.clip(r - 2.0, 0.0, 1.0)
    out = np.zeros_like(r, dtype=float)
    inner = r <= 2.0
    mid = (r > 2.0) & (r < 3.0)
    out[inner] = 1.0
    tm = t[mid]
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - tm**2))
    return out


def _bridge_coefficients() -> np.ndarray:
    # quintic on s = r - 2 in [0, 2]: value/slope/curvature (2, 1, 0) at s=0, (3, 0, 0) at s=2
    s = 2.0
    A = np.array(
        [
            [1, 0, 0, 0, 0, 0],
            [0, 1, 0, 0, 0, 0],
            [0, 0, 2, 0, 0, 0],
            [1, s, s**2, s**3, s**4, s**5],
            [0, 1, 2 * s, 3 * s**2, 4 * s**3, 5 * s**4],
            [0, 0, 2, 6 * s, 12 * s**2, 20 * s**3],
        ],
        dtype=float,
    )
    coef = np.linalg.solve(A, np.array([2.0, 1.0, 0.0, 3.0, 0.0, 0.0]))
    ss = np.linspace(0.0, 2.0, 2001)
    slope = np.polynomial.polynomial.polyval(ss, np.polynomial.polynomial.polyder(coef))
    if slope.min() < -1e-12 or slope.max() > 1.0 + 1e-12:
        raise RuntimeError("phi bridge violates 0 <= phi' <= 1")
    return coef


_BRIDGE = _bridge_coefficients()


def phi_bridge(r) -> np.ndarray:
    """``phi(r) = r`` on [0, 2], C^2 quintic on [2, 4], 3 beyond."""
    r = np.asarray(r, dtype=float)
    mid = np.polynomial.polynomial.polyval(np.clip(r - 2.0, 0.0, 2.0), _BRIDGE)
    return np.where(r <= 2.0, r, np.where(r >= 4.0, 3.0, mid))


@dataclass
class EnergyReport:
    E: float
    E_GL: float
    E_mGL: float
    H: float
    M: float
    Z: float
    grad_part: float
    density_part: float

    def csv_row(self, t: float, status: str) -> list[str]:
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals["t"] = t
        return [status if c == "status" else repr(float(vals[c])) for c in CSV_COLUMNS]

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ChiDecomposition:
    psi_inf: Field
    psi_q: np.ndarray
    support_measure_q: float


class MetricInputs3D(NamedTuple):
    c1: complex
    c2: complex
    v1: np.ndarray
    v2: np.ndarray


class Distance(NamedTuple):
    """Computed distance plus a rigorous lower bound of the same metric."""

    value: float
    lower_bound: float


def _grad_sq(field: Field, ws: SpectralWorkspace) -> float:
    return _grad_sq_from_hat(ws.fft(field.affine), ws)


def _density_E(field: Field) -> float:
    return integrate(field.grid, (np.abs(field.values) - 1.0) ** 2)


def _density_GL(field: Field) -> float:
    return integrate(field.grid, (np.abs(field.values) ** 2 - 1.0) ** 2)


def energy_E(field: Field, ws: SpectralWorkspace) -> float:
    return _grad_sq(field, ws) + _density_E(field)


def energy_GL(field: Field, ws: SpectralWorkspace) -> float:
    return 0.5 * _grad_sq(field, ws) + 0.5 * _density_GL(field)


def energy_mGL(field: Field, ws: SpectralWorkspace) -> float:
    phi = phi_bridge(np.abs(field.values))
    return _grad_sq(field, ws) + 0.5 * integrate(field.grid, (phi**2 - 1.0) ** 2)


def hamiltonian(field: Field, spec: NonlinearitySpec, ws: SpectralWorkspace) -> float:
    pot = integrate(field.grid, eval_F(spec, np.abs(field.values) ** 2))
    return 0.5 * _grad_sq(field, ws) + pot


def _re_v_sq(field: Field) -> float:
    # rotate to far-field 1 first
    rot = np.conj(field.farfield) * field.values
    return integrate(field.grid, (rot.real - 1.0) ** 2)


def functional_M(field: Field, C0: float, spec: NonlinearitySpec, ws: SpectralWorkspace) -> float:
    """``H(1+v) + C0 int |Re v|^2`` for a field with far-field exactly 1."""
    if abs(field.farfield - 1.0) > 1e-12:
        raise ValueError("functional_M expects far-field c = 1; multiply the field by conj(c)")
    return hamiltonian(field, spec, ws) + C0 * _re_v_sq(field)


def functional_Z(field: Field, ws: SpectralWorkspace) -> float:
    """Instantaneous ``||grad psi||_2 + || |psi| - 1 ||_2``."""
    return math.sqrt(_grad_sq(field, ws)) + math.sqrt(_density_E(field))


def choose_C0(structure: PotentialStructure, n_samples: int = 20_000) -> float:
    """``(1 + C)/eta^2`` with ``eta = 1 - sqrt(1 - delta)``.

    ``C = max(C_l, C_h)`` bounds ``(sqrt(rho) - 1)^2 <= C F(rho)`` on the
    convexity window and on ``[1 + delta, rho_max]``.
    """
    if not structure.defocusing:
        raise ValueError("choose_C0 needs a defocusing nonlinearity (f'(1) > 0)")
    delta = structure.convexity_window_delta
    if delta is None:
        raise ValueError("no convexity window around rho = 1 could be established")
    spec = structure.spec
    eta = 1.0 - math.sqrt(1.0 - delta)
    win = np.linspace(1.0 - delta, 1.0 + delta, n_samples)
    win = win[np.abs(win - 1.0) > 1e-6]
    C_l = float(np.max((np.sqrt(win) - 1.0) ** 2 / eval_F(spec, win)))
    high = np.linspace(1.0 + delta, structure.rho_max, n_samples)
    Fh = eval_F(spec, high)
    if np.any(Fh <= 0):
        raise ValueError("F is not positive above the window; coercivity constant undefined")
    C_h = float(np.max((np.sqrt(high) - 1.0) ** 2 / Fh))
    C = max(C_l, C_h)
    return (1.0 + C) / eta**2


def coercivity_constant(spec: NonlinearitySpec, C0: float, rho_max: float = 16.0,
                        n_samples: int = 200_001) -> float:
    """Constant ``K`` with ``E(1+v) <= K M(1+v)`` for fields with ``|psi|^2 <= rho_max``.

    Pointwise, ``|Re v| >= max(0, 1 - |psi|)``, so the density of M is at least
    ``g(rho) = F(rho) + C0 max(0, 1 - sqrt(rho))^2``.  With
    ``(sqrt(rho) - 1)^2 <= k g(rho)`` on the sampled range the bound holds
    with ``K = max(2, k)``.  Raises if ``g`` fails to be positive away from 1.
    """
    rho = np.linspace(0.0, rho_max, n_samples)
    rho = rho[np.abs(rho - 1.0) > 1e-4]
    g = eval_F(spec, rho) + C0 * np.maximum(0.0, 1.0 - np.sqrt(rho)) ** 2
    if np.any(g <= 0):
        raise ValueError("M density is not positive away from rho = 1; no coercivity constant")
    k = float(np.max((np.sqrt(rho) - 1.0) ** 2 / g))
    return max(2.0, k)


def decompose_chi(field: Field) -> ChiDecomposition:
    weight = chi(field.values)
    psi_inf = weight * field.values
    psi_q = field.values - psi_inf
    measure = float(np.count_nonzero(weight < 1.0) * field.grid.cell_volume)
    return ChiDecomposition(Field(field.grid, psi_inf, field.farfield), psi_q, measure)


def eta_support_measure(field: Field, delta: float) -> float:
    """Lattice measure of ``{ ||psi| - 1| > delta }``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = np.count_nonzero(np.abs(np.abs(field.values) - 1.0) > delta)
    return float(n * field.grid.cell_volume)


def _grad_norm(a: np.ndarray, ws: SpectralWorkspace) -> float:
    return math.sqrt(_grad_sq_from_hat(ws.fft(a), ws))


def h1_norm(a: np.ndarray, ws: SpectralWorkspace) -> float:
    ah = ws.fft(a)
    l2 = integrate(ws.grid, np.abs(a) ** 2)
    return math.sqrt(l2 + _grad_sq_from_hat(ah, ws))


def x1_plus_h1_canonical(w: np.ndarray, ws: SpectralWorkspace) -> float:
    """Upper bound on the X^1 + H^1 norm from the split ``w = chi(w) w + (1 - chi(w)) w``."""
    w_inf = chi(w) * w
    w_q = w - w_inf
    x1 = float(np.max(np.abs(w_inf))) + _grad_norm(w_inf, ws)
    return x1 + h1_norm(w_q, ws)


def _same_grid(f1: Field, f2: Field):
    if f1.grid != f2.grid:
        raise ValueError("fields live on different grids")


def _metric(f1: Field, f2: Field, ws: SpectralWorkspace, modulus_term: float) -> Distance:
    w = f1.values - f2.values
    lower = _grad_norm(w, ws)
    return Distance(x1_plus_h1_canonical(w, ws) + modulus_term, lower + modulus_term)


def metric_dE(f1: Field, f2: Field, ws: SpectralWorkspace) -> Distance:
    _same_grid(f1, f2)
    m = math.sqrt(integrate(f1.grid, (np.abs(f1.values) - np.abs(f2.values)) ** 2))
    return _metric(f1, f2, ws, m)


def metric_dGL(f1: Field, f2: Field, ws: SpectralWorkspace) -> Distance:
    _same_grid(f1, f2)
    m = math.sqrt(integrate(f1.grid, (np.abs(f1.values) ** 2 - np.abs(f2.values) ** 2) ** 2))
    return _metric(f1, f2, ws, m)


def metric_inputs(f1: Field, f2: Field) -> MetricInputs3D:
    return MetricInputs3D(f1.farfield, f2.farfield, f1.affine, f2.affine)


def metric_delta3d(inputs: MetricInputs3D, ws: SpectralWorkspace) -> float:
    """``|c1-c2| + ||grad(v1-v2)||_2 + || |v1|^2 + 2Re(v1/c1) - |v2|^2 - 2Re(v2/c2) ||_2``."""
    c1, c2, v1, v2 = inputs
    for c in (c1, c2):
        if abs(abs(c) - 1.0) > 1e-12:
            raise ValueError("far-field constants must have modulus 1")
    if ws.grid.dim != 3:
        warnings.warn("the affine metric is formulated for d = 3", stacklevel=2)
    g1 = np.abs(v1) ** 2 + 2.0 * (v1 / c1).real
    g2 = np.abs(v2) ** 2 + 2.0 * (v2 / c2).real
    return (
        abs(c1 - c2)
        + _grad_norm(np.asarray(v1) - np.asarray(v2), ws)
        + math.sqrt(integrate(ws.grid, (g1 - g2) ** 2))
    )


def full_report(
    field: Field,
    spec: NonlinearitySpec,
    C0: float | None,
    ws: SpectralWorkspace,
) -> EnergyReport:
    """Every functional at once, sharing one transform.  ``M`` is evaluated on
    the field rotated to far-field 1; with ``C0=None`` it reduces to ``H``."""
    grid = field.grid
    grad = _grad_sq(field, ws)
    amp = np.abs(field.values)
    rho = amp**2
    dens_E = integrate(grid, (amp - 1.0) ** 2)
    dens_GL = integrate(grid, (rho - 1.0) ** 2)
    dens_mGL = integrate(grid, (phi_bridge(amp) ** 2 - 1.0) ** 2)
    H = 0.5 * grad + integrate(grid, eval_F(spec, rho))
    M = H if not C0 else H + C0 * _re_v_sq(field)
    return EnergyReport(
        E=grad + dens_E,
        E_GL=0.5 * grad + 0.5 * dens_GL,
        E_mGL=grad + 0.5 * dens_mGL,
        H=H,
        M=M,
        Z=math.sqrt(grad) + math.sqrt(dens_E),
        grad_part=grad,
        density_part=dens_E,
    )
