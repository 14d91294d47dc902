"""Shooting solvers for the Falkner-Skan and pseudo-similarity BVPs.

Falkner-Skan: f(0) = f'(0) = 0, f'(inf) = 1 with unknown wall shear f''(0),
found by an expanding bracket plus bisection.

Pseudo-similarity: theta(0) = zeta, theta(inf) = 1.  Every slope d = theta'(0)
inside the basin of (1, 0) gives a solution, so the solver reports sets of
admissible slopes rather than a single root.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, DomainError, NoConvergentProbeError
from .integrate import (
    BatchResult,
    IntegratorConfig,
    StopKind,
    Trajectory,
    integrate,
    integrate_pseudo_batch,
)
from .model import FalknerSkanParams, PseudoParams, fs_field, pseudo_field, pseudo_field3

__all__ = [
    "FS_CONFIG",
    "ShootResult",
    "AdmissibleInterval",
    "shoot_pseudo",
    "shoot_pseudo_many",
    "pseudo_profile",
    "fs_shot",
    "fs_miss",
    "run_batch",
    "falkner_skan_profile",
    "solve_falkner_skan",
    "analytic_skin_friction_bound",
    "guaranteed_slope_bound",
    "admissible_interval",
    "interval_from_probes",
]

# the far field of Falkner-Skan profiles is reached well before t = 15
FS_CONFIG = IntegratorConfig(h=1e-3, t_max=15.0)

BISECTION_TOL = 1e-10
BRACKET_LIMIT = 10.0


@dataclass(frozen=True)
class ShootResult:
    d: float
    classification: StopKind
    miss: float
    crossings: int
    t_end: float = math.nan

    @property
    def converged(self) -> bool:
        return self.classification is StopKind.CONVERGED


@dataclass(frozen=True)
class AdmissibleInterval:
    lo: float
    hi: float
    analytic_lo: float
    analytic_hi: float
    probes: tuple = field(default=(), repr=False)


def _pseudo_config_check(config: IntegratorConfig) -> IntegratorConfig:
    if not isinstance(config, IntegratorConfig):
        raise TypeError("config must be an IntegratorConfig")
    return config


def shoot_pseudo(params: PseudoParams, d: float, config: IntegratorConfig = IntegratorConfig()) -> ShootResult:
    """Integrate the planar system from (zeta, d) and classify the shot."""
    _pseudo_config_check(config)
    traj = integrate(pseudo_field(params.tau), (params.zeta, d), config)
    return ShootResult(
        d=float(d),
        classification=traj.stop.kind,
        miss=float(traj.final[0] - 1.0),
        crossings=len(traj.crossings),
        t_end=traj.t_end,
    )


def _batch_chunk(args):
    tau, theta0, phi0, config = args
    return integrate_pseudo_batch(tau, theta0, phi0, config)


def run_batch(tau: float, theta0, phi0, config: IntegratorConfig, jobs: int = 1) -> BatchResult:
    """:func:`integrate_pseudo_batch`, optionally split across processes.

    Chunks are contiguous and concatenated in input order, so the result does
    not depend on ``jobs``.
    """
    theta0 = np.asarray(theta0, dtype=float).ravel()
    phi0 = np.asarray(phi0, dtype=float).ravel()
    if jobs <= 1 or theta0.size < 2 * jobs:
        return integrate_pseudo_batch(tau, theta0, phi0, config)
    bounds = np.linspace(0, theta0.size, jobs + 1).astype(int)
    tasks = [(tau, theta0[a:b], phi0[a:b], config) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_batch_chunk, tasks))
    return BatchResult(
        *(np.concatenate([getattr(p, name) for p in parts]) for name in ("kind", "t_at", "t_end", "crossings", "theta", "phi"))
    )


def shoot_pseudo_many(params: PseudoParams, ds, config: IntegratorConfig = IntegratorConfig(), jobs: int = 1) -> list[ShootResult]:
    """Vectorised :func:`shoot_pseudo` over slopes ``ds`` (same results, same order)."""
    _pseudo_config_check(config)
    ds = np.asarray(ds, dtype=float).ravel()
    batch = run_batch(params.tau, np.full(ds.size, params.zeta), ds, config, jobs)
    return [
        ShootResult(
            d=float(d),
            classification=batch.stop_kind(i),
            miss=float(batch.theta[i] - 1.0),
            crossings=int(batch.crossings[i]),
            t_end=float(batch.t_end[i]),
        )
        for i, d in enumerate(ds)
    ]


def pseudo_profile(params: PseudoParams, d: float, config: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Third-order trajectory (f, f', f'') from f(0) = 0, f'(0) = zeta, f''(0) = d."""
    return integrate(pseudo_field3(params.tau), (0.0, params.zeta, d), config)


# -- Falkner-Skan -----------------------------------------------------------


def _fs_event(t, y):
    # profiles for m in [0, 1] rise monotonically to 1
    if y[1] > 1.0:
        return "overshoot"
    if y[2] < 0.0 and y[1] < 1.0:
        return "undershoot"
    return None


def fs_shot(params: FalknerSkanParams, d: float, config: IntegratorConfig = FS_CONFIG) -> Trajectory:
    """Integrate from (0, 0, d), stopping early on over/undershoot of f' = 1."""
    return integrate(fs_field(params), (0.0, 0.0, d), config, event=_fs_event, detect_convergence=False)


def _fs_side(params, d, config) -> int:
    """+1 if the shot with f''(0) = d overshoots f' = 1, else -1."""
    traj = fs_shot(params, d, config)
    if traj.stop.kind is StopKind.EVENT:
        return 1 if traj.stop.tag == "overshoot" else -1
    return 1 if traj.final[1] - 1.0 > 0.0 else -1


def _expand_bracket(params, config, bracket):
    lo, hi = bracket
    s_lo = _fs_side(params, lo, config)
    s_hi = _fs_side(params, hi, config)
    while s_lo == s_hi:
        if s_lo < 0:
            if hi >= BRACKET_LIMIT:
                break
            width = hi - lo
            lo, s_lo = hi, s_hi
            hi = min(2.0 * hi if hi > 0.0 else hi + width, BRACKET_LIMIT)
            s_hi = _fs_side(params, hi, config)
        else:
            if lo <= -BRACKET_LIMIT:
                break
            width = hi - lo
            hi, s_hi = lo, s_lo
            lo = max(2.0 * lo if lo < 0.0 else lo - width, -BRACKET_LIMIT)
            s_lo = _fs_side(params, lo, config)
    if s_lo == s_hi:
        raise BracketError(f"no sign change of f'(t_max) - 1 for |f''(0)| <= {BRACKET_LIMIT} at m={params.m}")
    return lo, hi, s_lo


def solve_falkner_skan(
    params: FalknerSkanParams,
    config: IntegratorConfig = FS_CONFIG,
    initial_bracket: tuple[float, float] = (0.0, 0.5),
) -> float:
    """Wall shear f''(0) of the Falkner-Skan BVP by bracketing and bisection.

    The bracket starts at ``initial_bracket`` and doubles (in the direction the miss
    points) up to |f''(0)| = 10; bisection runs until the bracket is narrower
    than 1e-10.

    Raises
    ------
    BracketError
        No over/undershoot sign change was found.
    """
    if not initial_bracket[0] < initial_bracket[1]:
        raise ValueError(f"initial bracket must be increasing, got {initial_bracket}")
    lo, hi, s_lo = _expand_bracket(params, config, initial_bracket)
    while hi - lo >= BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s_mid = _fs_side(params, mid, config)
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid
    d = 0.5 * (lo + hi)
    miss = fs_miss(params, d, config)
    if not abs(miss) < config.conv_tol:
        raise BracketError(f"bisection ended at f''(0)={d!r} with |f'(t_max)-1|={abs(miss):.3g} >= {config.conv_tol}")
    return d


def fs_miss(params: FalknerSkanParams, d: float, config: IntegratorConfig = FS_CONFIG) -> float:
    """f'(t_max) - 1 for the full-horizon shot without early stopping."""
    traj = integrate(fs_field(params), (0.0, 0.0, d), config, detect_convergence=False)
    return float(traj.final[1] - 1.0)


def falkner_skan_profile(params: FalknerSkanParams, fpp0: float, config: IntegratorConfig = FS_CONFIG) -> Trajectory:
    """Full-horizon third-order trajectory for a known wall shear."""
    return integrate(fs_field(params), (0.0, 0.0, fpp0), config, detect_convergence=False)


# -- admissible slopes --------------------------------------------------------


def analytic_skin_friction_bound(zeta: float) -> float:
    """sqrt(4/3 + 2 zeta (1 - zeta^2/3)): half-width of the sufficient interval for f''(0)."""
    if not -1.0 < zeta <= math.sqrt(3.0):
        raise DomainError(f"zeta must lie in (-1, sqrt(3)], got {zeta}")
    return math.sqrt(4.0 / 3.0 + 2.0 * zeta * (1.0 - zeta * zeta / 3.0))


def guaranteed_slope_bound(zeta: float) -> float:
    """Largest |d| with d^2 <= 2 zeta (1 - zeta^2/3); guarantees convergence for tau > 0."""
    if not 0.0 <= zeta <= math.sqrt(3.0):
        raise DomainError(f"zeta must lie in [0, sqrt(3)], got {zeta}")
    return math.sqrt(max(2.0 * zeta * (1.0 - zeta * zeta / 3.0), 0.0))


def interval_from_probes(results: list[ShootResult], zeta: float) -> AdmissibleInterval:
    """Contiguous convergent run of probes around d = 0.

    The run is grown from the probe closest to d = 0; if that probe failed,
    the longest convergent run is used instead (ties go to the run nearest 0).
    """
    if not any(r.converged for r in results):
        raise NoConvergentProbeError(f"none of {len(results)} probes converged")
    results = sorted(results, key=lambda r: r.d)
    runs = []
    start = None
    for i, r in enumerate(results):
        if r.converged and start is None:
            start = i
        if not r.converged and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(results) - 1))
    centre = min(range(len(results)), key=lambda i: (abs(results[i].d), i))
    chosen = next((run for run in runs if run[0] <= centre <= run[1]), None)
    if chosen is None:
        chosen = max(runs, key=lambda run: (run[1] - run[0], -min(abs(results[run[0]].d), abs(results[run[1]].d))))
    bound = analytic_skin_friction_bound(zeta)
    return AdmissibleInterval(results[chosen[0]].d, results[chosen[1]].d, -bound, bound, tuple(results))


def admissible_interval(
    params: PseudoParams,
    config: IntegratorConfig = IntegratorConfig(),
    n_probe: int = 41,
    jobs: int = 1,
) -> AdmissibleInterval:
    """Empirical and analytic ranges of slopes d = theta'(0) that reach theta = 1.

    Probes are ``n_probe`` equally spaced slopes over
    [analytic_lo - 1, analytic_hi + 1].  Probes outside the analytic interval
    may also converge; they are reported, not treated as errors.
    """
    if n_probe < 9:
        raise ValueError(f"n_probe must be at least 9, got {n_probe}")
    bound = analytic_skin_friction_bound(params.zeta)
    ds = np.linspace(-bound - 1.0, bound + 1.0, n_probe)
    return interval_from_probes(shoot_pseudo_many(params, ds, config, jobs), params.zeta)
