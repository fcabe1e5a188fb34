"""Time integrators for ``i psi_t = -1/2 Laplacian psi + f(|psi|^2) psi``.

Two schemes are provided: a Strang split-step (exact nonlinear phase,
exact free flow in Fourier space) and a Picard iteration of the Duhamel
formula discretized by Gauss-Legendre collocation.  ``run`` drives either
scheme, records energy reports and monitors for blow-up.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .energy import EnergyReport, energy_E, full_report
from .grid import Field, SpectralWorkspace
from .nonlinearity import NonlinearitySpec, eval_f, eval_f_prime, nonlinear_phase

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "Trajectory",
    "PicardResult",
    "BogoliubovReport",
    "GrowthFit",
    "step_linear",
    "step_nonlinear",
    "step_strang",
    "run",
    "picard_solve",
    "effective_steps",
    "bogoliubov_rate",
    "bogoliubov_analyze",
    "mode_amplitude",
    "measure_mode_growth",
]

STATUSES = ("completed", "blowup_flagged", "nan_detected")


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: str = "strang"
    picard_iters: int = 50
    picard_quad_nodes: int = 4
    picard_panels: int = 8
    picard_tol: float = 1e-10
    blowup_E_threshold: float = 1e6
    report_every: int = 10
    dealias: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.dt > self.t_end * (1 + 1e-12):
            raise ValueError("dt must not exceed t_end")
        if self.scheme not in ("strang", "picard"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.picard_iters < 1:
            raise ValueError("picard_iters must be >= 1")
        if self.picard_quad_nodes < 2:
            raise ValueError("picard_quad_nodes must be >= 2")
        if self.picard_panels < 1:
            raise ValueError("picard_panels must be >= 1")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if not self.blowup_E_threshold > 0:
            raise ValueError("blowup_E_threshold must be positive")
        if self.report_every < 1:
            raise ValueError("report_every must be >= 1")


@dataclass
class Trajectory:
    times: list[float] = dc_field(default_factory=list)
    reports: list[EnergyReport] = dc_field(default_factory=list)
    snapshots: list[tuple[float, Field]] = dc_field(default_factory=list)
    status: str = "completed"
    final: Field | None = None
    final_step: int = 0

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports])

    def rows(self) -> list[list[str]]:
        out = []
        n = len(self.reports)
        for i, (t, r) in enumerate(zip(self.times, self.reports)):
            status = self.status if i == n - 1 else "running"
            out.append(r.csv_row(t, status))
        return out


# ---------------------------------------------------------------- sub-flows


def step_linear(field: Field, dt: float, ws: SpectralWorkspace, dealias: bool = False) -> Field:
    """Exact free flow on ``v = psi - c``; the constant is untouched."""
    vh = ws.fft(field.affine) * ws.propagator(dt)
    if dealias:
        vh *= ws.dealias_mask
    return Field(field.grid, field.farfield + ws.ifft(vh), field.farfield)


_UNIT_SNAP = 4 * np.finfo(float).eps


def _nonlinear_values(values: np.ndarray, spec: NonlinearitySpec, dt: float) -> np.ndarray:
    rho = np.abs(values) ** 2
    # a rounded unit constant has |c|^2 = 1 +- ulp; treat it as the far field exactly
    rho[np.abs(rho - 1.0) <= _UNIT_SNAP] = 1.0
    return nonlinear_phase(spec, rho, dt) * values


def step_nonlinear(field: Field, spec: NonlinearitySpec, dt: float) -> Field:
    """Exact flow of ``i psi_t = f(|psi|^2) psi``: a pointwise phase rotation."""
    return Field(field.grid, _nonlinear_values(field.values, spec, dt), field.farfield)


def _strang_values(
    values: np.ndarray,
    c: complex,
    spec: NonlinearitySpec,
    dt: float,
    ws: SpectralWorkspace,
    prop: np.ndarray,
    dealias: bool,
) -> np.ndarray:
    psi = _nonlinear_values(values, spec, 0.5 * dt)
    vh = ws.fft(psi - c) * prop
    if dealias:
        vh *= ws.dealias_mask
    psi = c + ws.ifft(vh)
    return _nonlinear_values(psi, spec, 0.5 * dt)


def step_strang(
    field: Field, spec: NonlinearitySpec, dt: float, ws: SpectralWorkspace, dealias: bool = False
) -> Field:
    """Half nonlinear, full linear, half nonlinear.  Raises ``FloatingPointError``
    when the result is not finite."""
    out = _strang_values(field.values, field.farfield, spec, dt, ws, ws.propagator(dt), dealias)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite values after Strang step")
    return Field(field.grid, out, field.farfield)


# ---------------------------------------------------------------- Picard


@dataclass
class PicardResult:
    field: Field
    contraction_ratio: float
    iterations: int
    converged: bool
    increments: list[float]


def _collocation(T: float, q: int, panels: int):
    """Nodes, final-time weights and the node-to-node integration matrix.

    Within each panel the integrand is replaced by its Lagrange interpolant
    through the ``q`` Gauss-Legendre nodes; ``A[j, m]`` integrates basis
    function ``m`` from 0 to node ``j``.
    """
    x, w = np.polynomial.legendre.leggauss(q)
    h = T / panels
    n = q * panels
    nodes = np.empty(n)
    weights = np.empty(n)
    A = np.zeros((n, n))
    # Lagrange basis on [-1, 1] in monomial form
    basis = []
    for m in range(q):
        others = np.delete(x, m)
        coef = np.polynomial.polynomial.polyfromroots(others) / np.prod(x[m] - others)
        basis.append(np.polynomial.polynomial.polyint(coef, lbnd=-1.0))
    partial = np.array([[np.polynomial.polynomial.polyval(xj, basis[m]) for m in range(q)] for xj in x])
    for p in range(panels):
        sl = slice(p * q, (p + 1) * q)
        nodes[sl] = p * h + 0.5 * h * (x + 1.0)
        weights[sl] = 0.5 * h * w
        A[sl, : p * q] = np.tile(0.5 * h * np.tile(w, p), (q, 1)) if p else 0.0
        A[sl, sl] = 0.5 * h * partial
    return nodes, weights, A


def picard_solve(
    field0: Field,
    spec: NonlinearitySpec,
    T: float,
    config: SolverConfig,
    ws: SpectralWorkspace,
) -> PicardResult:
    """Fixed-point iteration of the Duhamel formula on ``[0, T]``.

    Works in the interaction picture ``psi(s) = c + e^{(i/2)s Lap}(v0 + w(s))``
    with ``w(s) = -i int_0^s e^{-(i/2)r Lap} N(psi(r)) dr``, iterating from
    ``w = 0``.  The contraction ratio is the largest ratio of successive
    increments ``||w_{n+1} - w_n|| / ||w_n - w_{n-1}||`` observed.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    c = field0.farfield
    grid = field0.grid
    nodes, weights, A = _collocation(T, config.picard_quad_nodes, config.picard_panels)
    n = nodes.size
    v0h = ws.fft(field0.affine)
    props = [ws.propagator(s) for s in nodes]
    mask = ws.dealias_mask if config.dealias else None
    norm_scale = grid.volume / grid.size**2

    def integrand(wh: np.ndarray) -> np.ndarray:
        G = np.empty((n,) + grid.shape, dtype=np.complex128)
        for j in range(n):
            psi = c + ws.ifft(props[j] * (v0h + wh[j]))
            N = eval_f(spec, np.abs(psi) ** 2) * psi
            G[j] = ws.fft(N) / props[j]
            if mask is not None:
                G[j] *= mask
        return G

    wh = np.zeros((n,) + grid.shape, dtype=np.complex128)
    increments: list[float] = []
    ratio = 0.0
    converged = False
    it = 0
    for it in range(1, config.picard_iters + 1):
        G = integrand(wh)
        if not np.all(np.isfinite(G)):
            break
        new = -1j * np.tensordot(A, G, axes=(1, 0))
        diff = math.sqrt(float(np.max(np.sum(np.abs(new - wh) ** 2, axis=tuple(range(1, wh.ndim))))) * norm_scale)
        wh = new
        if increments and increments[-1] > 0:
            # ratios from roundoff-level increments carry no information
            if diff > 1e3 * np.finfo(float).eps * max(1.0, math.sqrt(float(np.sum(np.abs(v0h) ** 2)) * norm_scale)):
                ratio = max(ratio, diff / increments[-1])
        increments.append(diff)
        if diff < config.picard_tol:
            converged = True
            break
        if len(increments) >= 3 and diff > 1e6 * increments[0]:
            break
    G = integrand(wh)
    wT = -1j * np.tensordot(weights, G, axes=(0, 0))
    psiT = c + ws.ifft(ws.propagator(T) * (v0h + wT))
    if not np.all(np.isfinite(psiT)):
        raise FloatingPointError("Picard iteration produced non-finite values")
    if not converged:
        log.warning("Picard iteration did not converge in %d iterations (ratio %.3g)", it, ratio)
    return PicardResult(Field(grid, psiT, c), ratio, it, converged, increments)


# ---------------------------------------------------------------- driver


def effective_steps(config: SolverConfig) -> tuple[int, float]:
    """Number of steps and the step size that lands exactly on ``t_end``."""
    n = max(1, int(round(config.t_end / config.dt)))
    return n, config.t_end / n


def run(
    field0: Field,
    spec: NonlinearitySpec,
    config: SolverConfig,
    ws: SpectralWorkspace,
    C0: float | None = None,
    start_step: int = 0,
    snapshot_every: int = 0,
    on_snapshot: Callable[[int, float, Field], None] | None = None,
) -> Trajectory:
    """Advance ``field0`` from step ``start_step`` to ``t_end``.

    Times are ``n * dt_eff`` with global step index ``n``, so a run resumed
    from a snapshot at step ``n`` reproduces the uninterrupted run exactly.
    Reports are taken at step 0 (or ``start_step``), every
    ``report_every`` steps, and at the final step.  Blow-up is flagged when
    E reaches ``blowup_E_threshold``; non-finite values stop the run with
    ``nan_detected``.
    """
    n_steps, dt = effective_steps(config)
    if not 0 <= start_step <= n_steps:
        raise ValueError(f"start_step {start_step} outside [0, {n_steps}]")
    traj = Trajectory()
    c = field0.farfield
    rot = np.conj(c)

    def report(values: np.ndarray, step: int) -> EnergyReport:
        f = Field(field0.grid, values, c)
        C = C0 if C0 else None
        if C is not None:
            f = Field(field0.grid, rot * values, 1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            r = full_report(f, spec, C, ws)
        traj.times.append(step * dt)
        traj.reports.append(r)
        return r

    def snapshot(values: np.ndarray, step: int):
        f = Field(field0.grid, values.copy(), c)
        traj.snapshots.append((step * dt, f))
        if on_snapshot is not None:
            on_snapshot(step, step * dt, f)

    values = field0.values.copy()
    r = report(values, start_step)
    if snapshot_every:
        snapshot(values, start_step)
    if r.E >= config.blowup_E_threshold:
        traj.status = "blowup_flagged"
        traj.final, traj.final_step = Field(field0.grid, values, c), start_step
        return traj

    prop = ws.propagator(dt)
    step = start_step
    for step in range(start_step + 1, n_steps + 1):
        try:
            with np.errstate(over="raise", invalid="raise"):
                if config.scheme == "strang":
                    values = _strang_values(values, c, spec, dt, ws, prop, config.dealias)
                else:
                    values = picard_solve(Field(field0.grid, values, c), spec, dt, config, ws).field.values
        except (FloatingPointError, ValueError):
            traj.status = "nan_detected"
            break
        if not np.all(np.isfinite(values)):
            traj.status = "nan_detected"
            break
        cur = Field(field0.grid, values, c)
        due = step % config.report_every == 0 or step == n_steps
        if due:
            E = report(values, step).E
        elif math.isfinite(config.blowup_E_threshold):
            E = energy_E(cur, ws)
        else:
            E = 0.0
        if snapshot_every and (step % snapshot_every == 0 or step == n_steps):
            snapshot(values, step)
        if E >= config.blowup_E_threshold:
            if not due:
                report(values, step)
            traj.status = "blowup_flagged"
            break
    traj.final = Field(field0.grid, values, c) if np.all(np.isfinite(values)) else None
    traj.final_step = step if traj.status != "nan_detected" else step - 1
    return traj


# ---------------------------------------------------------------- linear stability


@dataclass
class BogoliubovReport:
    k_values: np.ndarray
    predicted_rate: np.ndarray
    measured_rate: np.ndarray
    unstable_band: tuple[float, float] | None
    f_prime_one: float


def bogoliubov_rate(f_prime_one: float, k) -> np.ndarray:
    """Growth rate ``sqrt(max(0, -(k^2/2)(k^2/2 + 2 f'(1))))`` of a plane-wave perturbation."""
    k2 = np.asarray(k, dtype=float) ** 2
    return np.sqrt(np.maximum(0.0, -(0.5 * k2) * (0.5 * k2 + 2.0 * f_prime_one)))


def bogoliubov_analyze(spec: NonlinearitySpec, k_grid: Sequence[float]) -> BogoliubovReport:
    k = np.abs(np.asarray(k_grid, dtype=float))
    fp = float(eval_f_prime(spec, 1.0))
    band = (0.0, math.sqrt(-4.0 * fp)) if fp < 0 else None
    return BogoliubovReport(k, bogoliubov_rate(fp, k), np.full(k.shape, np.nan), band, fp)


@dataclass
class GrowthFit:
    rate: float
    r_squared: float
    t_start: float
    t_stop: float
    n_points: int
    saturated: bool


def mode_amplitude(field: Field, mode_k) -> float:
    """Normalized modulus ``|psi_hat(k)| / N`` of one lattice Fourier mode."""
    idx = field.grid.mode_index(mode_k)
    return float(np.abs(np.fft.fftn(field.values)[idx]) / field.grid.size)


def measure_mode_growth(
    snapshots: Sequence[tuple[float, Field]],
    mode_k,
    t_min: float = 0.0,
    saturation: float = 1e-2,
) -> GrowthFit:
    """Least-squares fit of ``log|psi_hat(k)|`` against t.

    The window opens at ``t_min`` and closes before the amplitude first
    exceeds ``saturation`` (relative to the background).
    """
    if len(snapshots) < 5:
        raise ValueError("need at least 5 snapshots")
    t = np.array([s[0] for s in snapshots])
    a = np.array([mode_amplitude(f, mode_k) for _, f in snapshots])
    over = np.nonzero(a > saturation)[0]
    stop = over[0] if over.size else len(t)
    keep = np.arange(len(t))
    keep = keep[(t >= t_min) & (keep < stop)]
    if keep.size < 5:
        raise ValueError("growth window too short: saturation reached before enough samples")
    if np.any(a[keep] <= 0):
        raise ValueError("mode amplitude vanished inside the fit window")
    tt, y = t[keep], np.log(a[keep])
    slope, icpt = np.polyfit(tt, y, 1)
    resid = y - (slope * tt + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return GrowthFit(float(slope), r2, float(tt[0]), float(tt[-1]), int(keep.size), bool(over.size))
