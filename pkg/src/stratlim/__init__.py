"""Spectral tools for parabolic equations with oscillatory random potentials.

Green's kernels of ``d/dt + (-Laplacian)^(m/2)``, mollified Gaussian
potentials coupled to grid white noise, discrete Wiener chaos and Wick
pairings, time-simplex integrals, a split-step/Duhamel solver and a
coupled Monte-Carlo convergence harness.
"""
__version__ = "0.1.0"

from .grid import GridSpec
from .spectral_green import (
    GreenKernel,
    KernelBoundsReport,
    MeshWarning,
    build_kernel,
    kernel_bounds,
    log_time_mesh,
    m_epsilon,
    m_epsilon_curve,
    m_epsilon_rate,
    modulus_of_continuity,
    semigroup_apply,
)
from .random_field import (
    CorrelationModel,
    PotentialField,
    WhiteNoiseField,
    mollified_potential,
    refine_white_noise,
    rho_kernel,
    sample_white_noise,
    sigma,
    white_noise_potential,
)
from .pde_solver import (
    InitialCondition,
    NumericalFailure,
    SeriesDivergenceWarning,
    SimConfig,
    StabilityError,
    Trajectory,
    duhamel_iterate,
    mild_residual,
    solve_with_potential,
)
from .convergence import ConvergenceReport, fit_rate, l2_omega_estimate, run_convergence
