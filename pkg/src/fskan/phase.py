"""Phase-plane analytics for theta'' + tau theta' + theta^2 - 1 = 0.

E(theta, phi) = phi^2/2 + theta^3/3 - theta is conserved for tau = 0 and
decays like dE/dt = -tau phi^2 otherwise.  Its level 2/3 through (2, 0) is the
homoclinic loop of the saddle (-1, 0); the open region it encloses,

    P = {(zeta, d): zeta > -1, d^2/2 + zeta (zeta^2/3 - 1) < 2/3},

is a basin of attraction of (1, 0) for every tau > 0.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError
from .integrate import IntegratorConfig, StopKind, Trajectory

__all__ = [
    "SEPARATRIX_LEVEL",
    "EquilibriumClass",
    "EquilibriumReport",
    "TrajectoryClass",
    "BasinVerdict",
    "BasinMap",
    "energy",
    "energy_along",
    "phi_squared_integral",
    "in_basin",
    "jacobian",
    "classify_equilibrium",
    "separatrix_phi2",
    "classify_trajectory",
    "basin_map",
    "write_basin_csv",
    "write_basin_pgm",
]

SEPARATRIX_LEVEL = 2.0 / 3.0
# basin cells this close to the boundary of P count as outside (P is open)
BOUNDARY_EPS = 1e-12
SPIRAL_NODE_SPLIT = math.sqrt(8.0)


class EquilibriumClass(enum.Enum):
    STABLE_NODE = "stable_node"
    STABLE_SPIRAL = "stable_spiral"
    CENTER = "center"
    UNSTABLE = "unstable"


class TrajectoryClass(enum.Enum):
    MONOTONE = "monotone"
    OSCILLATORY = "oscillatory"
    DIVERGENT = "divergent"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class EquilibriumReport:
    tau: float
    lambda1: complex
    lambda2: complex
    kind: EquilibriumClass


@dataclass(frozen=True)
class BasinVerdict:
    zeta: float
    d: float
    analytic_member: bool
    empirical_converged: bool


def energy(theta, phi):
    """Lyapunov energy phi^2/2 + theta^3/3 - theta (scalars or arrays)."""
    return 0.5 * phi * phi + theta * theta * theta / 3.0 - theta


def energy_along(traj: Trajectory) -> np.ndarray:
    return energy(traj.theta, traj.phi)


def phi_squared_integral(traj: Trajectory) -> np.ndarray:
    """Running trapezoidal integral of phi^2 over the samples (starts at 0)."""
    phi2 = traj.phi ** 2
    out = np.zeros_like(phi2)
    out[1:] = np.cumsum(0.5 * (phi2[1:] + phi2[:-1]) * np.diff(traj.t))
    return out


def in_basin(zeta: float, d: float) -> bool:
    """Strict membership of (zeta, d) in the basin P, boundary excluded."""
    if not zeta > -1.0 + BOUNDARY_EPS:
        return False
    return 0.5 * d * d + zeta * (zeta * zeta / 3.0 - 1.0) < SEPARATRIX_LEVEL - BOUNDARY_EPS


def jacobian(tau: float) -> np.ndarray:
    """Linearisation of the planar system at (1, 0)."""
    return np.array([[0.0, 1.0], [-2.0, -tau]])


def classify_equilibrium(tau: float) -> EquilibriumReport:
    """Eigenvalues of the Jacobian at (1, 0) and the resulting stability class.

    Real pairs use lambda2 = 2/lambda1 (product of the roots) so the smaller
    root carries no cancellation error.
    """
    tau = float(tau)
    if not math.isfinite(tau):
        raise ValueError(f"tau must be finite, got {tau}")
    disc = tau * tau - 8.0
    if disc >= 0.0:
        root = math.sqrt(disc)
        if tau >= 0.0:
            big = (-tau - root) / 2.0
        else:
            big = (-tau + root) / 2.0
        l1, l2 = complex(big), complex(2.0 / big)
        if tau < 0.0:
            l1, l2 = l2, l1
    else:
        root = math.sqrt(-disc)
        re = -tau / 2.0 + 0.0  # no signed zero at tau = 0
        l1, l2 = complex(re, -root / 2.0), complex(re, root / 2.0)

    if tau == 0.0:
        kind = EquilibriumClass.CENTER
    elif tau < 0.0:
        kind = EquilibriumClass.UNSTABLE
    elif disc >= 0.0:
        kind = EquilibriumClass.STABLE_NODE
    else:
        kind = EquilibriumClass.STABLE_SPIRAL
    return EquilibriumReport(tau, l1, l2, kind)


def separatrix_phi2(theta: float) -> float:
    """phi^2 on the homoclinic orbit: 2 theta - (2/3) theta^3 + 4/3, theta in [-1, 2]."""
    if not -1.0 <= theta <= 2.0:
        raise DomainError(f"homoclinic orbit spans theta in [-1, 2], got {theta}")
    # (theta + 1)^2 (2 - theta) * 2/3, the factored form is exact at both ends
    return 2.0 * (theta + 1.0) ** 2 * (2.0 - theta) / 3.0


def classify_trajectory(traj: Trajectory) -> TrajectoryClass:
    """Divergent / oscillatory (>= 2 crossings of theta = 1) / monotone, by stop reason."""
    kind = traj.stop.kind
    if kind is StopKind.DIVERGED:
        return TrajectoryClass.DIVERGENT
    if kind is not StopKind.CONVERGED:
        return TrajectoryClass.INDETERMINATE
    return TrajectoryClass.OSCILLATORY if len(traj.crossings) >= 2 else TrajectoryClass.MONOTONE


@dataclass
class BasinMap:
    """Raster over (zeta, d); arrays are indexed [i_zeta, i_d]."""

    tau: float
    zetas: np.ndarray
    ds: np.ndarray
    member: np.ndarray
    converged: np.ndarray

    @property
    def violations(self) -> np.ndarray:
        """Cells inside P whose shot did not converge."""
        return self.member & ~self.converged

    def verdicts(self) -> list[BasinVerdict]:
        return [
            BasinVerdict(float(z), float(d), bool(self.member[i, j]), bool(self.converged[i, j]))
            for i, z in enumerate(self.zetas)
            for j, d in enumerate(self.ds)
        ]


def _axis(bounds: Sequence[float], n: int) -> np.ndarray:
    lo, hi = bounds
    if n < 1:
        raise ValueError(f"grid size must be positive, got {n}")
    if n == 1:
        return np.array([float(lo)])
    return np.linspace(lo, hi, n)


def basin_map(
    zeta_range: Sequence[float],
    d_range: Sequence[float],
    grid: tuple[int, int],
    tau: float,
    config: IntegratorConfig = IntegratorConfig(),
    jobs: int = 1,
) -> BasinMap:
    """Analytic membership in P against empirical convergence on a grid.

    A one-point axis uses the lower end of its range, so ``grid=(1, 1)``
    probes the single cell (zeta_range[0], d_range[0]).
    """
    from .shoot import run_batch

    if not tau > 0.0:
        raise ValueError(f"basin analysis needs tau > 0, got {tau}")
    zetas = _axis(zeta_range, grid[0])
    ds = _axis(d_range, grid[1])
    Z, D = np.meshgrid(zetas, ds, indexing="ij")
    member = np.array([in_basin(z, d) for z, d in zip(Z.ravel(), D.ravel())]).reshape(Z.shape)
    batch = run_batch(tau, Z.ravel(), D.ravel(), config, jobs)
    converged = batch.converged.reshape(Z.shape)
    return BasinMap(float(tau), zetas, ds, member, converged)


def write_basin_csv(bmap: BasinMap, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("zeta,d,member,converged\n")
        for v in bmap.verdicts():
            fh.write(f"{v.zeta:.17g},{v.d:.17g},{int(v.analytic_member)},{int(v.empirical_converged)}\n")
    return path


# gray levels: converged member, converged outside P, outside P not converged, violation
PGM_LEVELS = {(True, True): 255, (False, True): 170, (False, False): 85, (True, False): 0}


def write_basin_pgm(bmap: BasinMap, path) -> Path:
    """Binary PGM (P5): columns follow zeta, rows follow d with the largest d on top."""
    path = Path(path)
    nz, nd = bmap.member.shape
    pixels = bytearray()
    for j in reversed(range(nd)):
        for i in range(nz):
            pixels.append(PGM_LEVELS[(bool(bmap.member[i, j]), bool(bmap.converged[i, j]))])
    path.write_bytes(f"P5\n{nz} {nd}\n255\n".encode("ascii") + bytes(pixels))
    return path
