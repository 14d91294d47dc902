"""Falkner-Skan boundary layers and the m = -1 pseudo-similarity problem."""

from __future__ import annotations

from .errors import (
    BracketError,
    DegenerateFitError,
    DomainError,
    ExtrapolationError,
    NoConvergentProbeError,
    NonFiniteError,
    UndefinedParameterError,
)
from .field import Profile, StreamSample, VelocityFit, fit_external_velocity, pde_residual, pseudo_stream
from .integrate import IntegratorConfig, StopKind, StopReason, Trajectory, integrate, integrate_pseudo_batch, rk4_step
from .model import (
    FalknerSkanParams,
    FlowConstants,
    PseudoParams,
    exact_tanh,
    gamma_of_m,
    m_of_gamma,
    similarity_exponents,
)
from .phase import EquilibriumClass, TrajectoryClass, basin_map, classify_equilibrium, classify_trajectory, energy, in_basin
from .shoot import admissible_interval, shoot_pseudo, solve_falkner_skan

__version__ = "0.1.0"
