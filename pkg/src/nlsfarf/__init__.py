"""Simulation and diagnostics for nonlinear Schroedinger equations with a
non-vanishing far field ``|psi| -> 1``."""
from .grid import (
    Field,
    Grid,
    SpectralWorkspace,
    grad_norm_sq_integral,
    init_black_soliton_1d,
    init_constant,
    init_plane_wave_perturbed,
    init_random_bounded,
    laplacian,
    make_grid,
)
from .nonlinearity import (
    NonlinearitySpec,
    analyze_potential,
    check_kato,
    eval_F,
    eval_f,
    eval_f_prime,
)
from .energy import EnergyReport, full_report
from .solver import SolverConfig, Trajectory, picard_solve, run, step_strang

__version__ = "0.1.0"
