"""Physical-plane reconstruction and checks.

For the m = -1 flow the stream function is

    psi(x, y) = a f(t) + a tau log x,   t = b y / x,
    a = sqrt(nu U_inf),  b = sqrt(U_inf / nu),

with the normalisation f(0) = 0, so the log term carries all of the wall
transpiration: v(x, 0) = -a tau / x = -V_w / x.  Every derivative of psi is
obtained by the chain rule from (f, f', f'', f''') of a profile; a central
finite-difference path exists only as an independent cross-check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import DegenerateFitError, ExtrapolationError
from .integrate import Trajectory
from .model import FlowConstants, similarity_exponents

__all__ = [
    "Profile",
    "StreamSample",
    "VelocityFit",
    "pseudo_stream",
    "stream_grid",
    "pde_residual",
    "fs_stream",
    "fit_external_velocity",
    "read_velocity_csv",
    "write_field_csv",
]


class Profile:
    """Piecewise-cubic Hermite representation of a third-order solution.

    ``f`` is interpolated from nodal (f, f') and ``f'`` from nodal (f', f'').
    f'' and f''' come from a C2 cubic spline through the nodal f'' values;
    taking f''' as the second derivative of the f' spline instead amplifies
    rounding like 1/h^2 and stalls convergence near h = 1e-4.
    """

    def __init__(self, t, f, fp, fpp):
        t = np.asarray(t, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0.0):
            raise ValueError("profile nodes must be strictly increasing with at least two points")
        self.t = t
        self.f_nodes = np.asarray(f, dtype=float)
        self.fp_nodes = np.asarray(fp, dtype=float)
        self.fpp_nodes = np.asarray(fpp, dtype=float)
        self._f = CubicHermiteSpline(t, self.f_nodes, self.fp_nodes, extrapolate=False)
        self._fp = CubicHermiteSpline(t, self.fp_nodes, self.fpp_nodes, extrapolate=False)
        self._fpp = CubicSpline(t, self.fpp_nodes, extrapolate=False)
        self._fppp = self._fpp.derivative(1)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "Profile":
        if traj.y.shape[1] != 3:
            raise ValueError("a profile needs third-order samples (f, f', f'')")
        return cls(traj.t, traj.y[:, 0], traj.y[:, 1], traj.y[:, 2])

    @classmethod
    def trivial(cls, t_max: float = 50.0, n: int = 51) -> "Profile":
        """f = t, the theta = 1 solution."""
        t = np.linspace(0.0, t_max, n)
        return cls(t, t, np.ones_like(t), np.zeros_like(t))

    def perturbed(self, offset: float) -> "Profile":
        """Shift f' by ``offset`` (and f by ``offset * t`` to stay consistent)."""
        return Profile(self.t, self.f_nodes + offset * self.t, self.fp_nodes + offset, self.fpp_nodes)

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min) or np.any(t > self.t_max):
            raise ExtrapolationError(
                f"similarity variable outside profile range [{self.t_min}, {self.t_max}]: "
                f"[{float(np.min(t))}, {float(np.max(t))}]"
            )
        return t

    def __call__(self, t):
        """(f, f', f'', f''') at ``t`` (scalar or array)."""
        t = self._check(t)
        return self._f(t), self._fp(t), self._fpp(t), self._fppp(t)


@dataclass(frozen=True)
class StreamSample:
    x: float
    y: float
    psi: float
    u: float
    v: float


def _check_x(x):
    if np.any(np.asarray(x) <= 0.0):
        raise ValueError("x must be positive")


def pseudo_stream(x: float, y: float, profile: Profile, constants: FlowConstants) -> StreamSample:
    """psi, u = d_y psi and v = -d_x psi at one point of the m = -1 flow."""
    _check_x(x)
    a, b, tau = constants.a, constants.b, constants.tau
    t = b * y / x
    f, fp, _, _ = profile(t)
    f, fp = float(f), float(fp)
    psi = a * f + a * tau * math.log(x)
    u = constants.U_inf * fp / x
    v = (a / x) * (t * fp - tau)
    return StreamSample(float(x), float(y), psi, u, v)


def stream_grid(profile: Profile, constants: FlowConstants, xs, ys) -> list[StreamSample]:
    return [pseudo_stream(float(x), float(y), profile, constants) for x in xs for y in ys]


def _psi_derivatives(profile, constants, X, Y):
    """Analytic psi_y, psi_x, psi_xy, psi_yy, psi_yyy via the chain rule."""
    a, b, tau = constants.a, constants.b, constants.tau
    T = b * Y / X
    f, fp, fpp, fppp = profile(T)
    psi_y = a * b * fp / X
    psi_x = -a * T * fp / X + a * tau / X
    psi_xy = -a * b * (T * fpp + fp) / X ** 2
    psi_yy = a * b * b * fpp / X ** 2
    psi_yyy = a * b ** 3 * fppp / X ** 3
    return psi_y, psi_x, psi_xy, psi_yy, psi_yyy


def _psi_values(profile, constants, X, Y):
    a, b, tau = constants.a, constants.b, constants.tau
    f = profile(b * Y / X)[0]
    return a * f + a * tau * np.log(X)


def _psi_derivatives_fd(profile, constants, X, Y, step):
    """Second-order central differences of psi on a uniform stencil."""
    P = lambda dx, dy: _psi_values(profile, constants, X + dx, Y + dy)  # noqa: E731
    s = step
    psi_y = (P(0, s) - P(0, -s)) / (2 * s)
    psi_x = (P(s, 0) - P(-s, 0)) / (2 * s)
    psi_xy = (P(s, s) - P(s, -s) - P(-s, s) + P(-s, -s)) / (4 * s * s)
    psi_yy = (P(0, s) - 2 * P(0, 0) + P(0, -s)) / (s * s)
    psi_yyy = (P(0, 2 * s) - 2 * P(0, s) + 2 * P(0, -s) - P(0, -2 * s)) / (2 * s ** 3)
    return psi_y, psi_x, psi_xy, psi_yy, psi_yyy


def pde_residual(
    profile: Profile,
    constants: FlowConstants,
    x_range: Sequence[float] = (1.0, 2.0),
    y_range: Sequence[float] = (0.0, 2.0),
    n: tuple[int, int] = (21, 41),
    method: str = "analytic",
    fd_step: float = 1e-2,
) -> float:
    """Max relative residual of the stream-function equation on a grid.

    Checks psi_y psi_xy - psi_x psi_yy = nu psi_yyy - U_inf^2 / x^3 and
    returns max|LHS - RHS| / max|RHS| over an (nx, ny) grid spanning
    ``x_range`` x ``y_range``.

    ``method="fd"`` replaces the chain-rule derivatives by central differences
    with spacing ``fd_step``; grid rows closer than ``2 fd_step`` to y = 0 are
    moved up to keep the stencil inside the profile.
    """
    nx, ny = n
    xs = np.linspace(x_range[0], x_range[1], nx)
    ys = np.linspace(y_range[0], y_range[1], ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    _check_x(X)
    if method == "analytic":
        psi_y, psi_x, psi_xy, psi_yy, psi_yyy = _psi_derivatives(profile, constants, X, Y)
    elif method == "fd":
        _check_x(X - fd_step)
        Y = np.maximum(Y, 2.0 * fd_step)
        psi_y, psi_x, psi_xy, psi_yy, psi_yyy = _psi_derivatives_fd(profile, constants, X, Y, fd_step)
    else:
        raise ValueError(f"unknown method {method!r}")
    lhs = psi_y * psi_xy - psi_x * psi_yy
    rhs = constants.nu * psi_yyy - constants.U_inf ** 2 / X ** 3
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))


def fs_stream(x, y, profile: Profile, m: float):
    """Unscaled Falkner-Skan stream function x**alpha f(y x**-beta)."""
    _check_x(x)
    alpha, beta = similarity_exponents(m)
    return np.power(x, alpha) * profile(np.asarray(y) * np.power(x, -beta))[0]


# -- external velocity law ----------------------------------------------------


@dataclass(frozen=True)
class VelocityFit:
    """U_e^2 = c1 x^(2m) + c2; ``rms_residual`` is the rms misfit in U_e^2."""

    c1: float
    c2: float
    m: float
    rms_residual: float


def _nonneg_lsq(g: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """Minimise |w - c1 g - c2|^2 over c1, c2 >= 0; returns (c1, c2, sse)."""
    A = np.column_stack((g, np.ones_like(g)))
    candidates = []
    sol, *_ = np.linalg.lstsq(A, w, rcond=None)
    if sol[0] >= 0.0 and sol[1] >= 0.0:
        candidates.append((sol[0], sol[1]))
    gg = float(g @ g)
    candidates.append((max(float(g @ w) / gg, 0.0) if gg > 0.0 else 0.0, 0.0))
    candidates.append((0.0, max(float(np.mean(w)), 0.0)))
    best = None
    for c1, c2 in candidates:
        r = w - c1 * g - c2
        sse = float(r @ r)
        if best is None or sse < best[2]:
            best = (float(c1), float(c2), sse)
    return best


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(fun, lo, hi, tol):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def fit_external_velocity(
    samples: Iterable[tuple[float, float]],
    m_range: tuple[float, float] = (-3.0, 3.0),
    n_scan: int = 121,
    tol: float = 1e-13,
) -> VelocityFit:
    """Least-squares fit of U_e^2 = c1 x^(2m) + c2 with c1, c2 >= 0.

    For fixed m the problem is a nonnegative linear least-squares problem in
    (c1, c2).  The outer minimisation over m scans ``n_scan`` points of
    ``m_range`` to locate the best cell (the profile can be flat where c1 is
    clamped to zero), then refines it by golden-section search to width
    ``tol``.
    """
    data = np.array(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("samples must be (x, U_e) pairs")
    if len(data) < 4:
        raise ValueError(f"need at least 4 samples, got {len(data)}")
    x, ue = data[:, 0], data[:, 1]
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(ue))):
        raise ValueError("samples must be finite")
    if np.any(x <= 0.0):
        raise ValueError("x must be positive")
    if np.any(ue < 0.0):
        raise ValueError("U_e must be nonnegative")
    if np.all(x == x[0]):
        raise DegenerateFitError("all x are equal")
    if np.all(ue == 0.0):
        raise DegenerateFitError("all U_e are zero")

    w = ue * ue
    logx = np.log(x)

    def sse(m):
        return _nonneg_lsq(np.exp(2.0 * m * logx), w)[2]

    grid = np.linspace(m_range[0], m_range[1], n_scan)
    values = [sse(m) for m in grid]
    k = int(np.argmin(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, n_scan - 1)]
    m = _golden_section(sse, lo, hi, tol)
    c1, c2, err = _nonneg_lsq(np.exp(2.0 * m * logx), w)
    return VelocityFit(c1, c2, float(m), math.sqrt(err / len(w)))


def read_velocity_csv(path) -> list[tuple[float, float]]:
    """Read the two-column ``x,Ue`` file (header required)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty input")
    header = [h.strip() for h in rows[0]]
    if header != ["x", "Ue"]:
        raise ValueError(f"expected header 'x,Ue', got {','.join(rows[0])!r}")
    return [(float(r[0]), float(r[1])) for r in rows[1:] if r]


def write_field_csv(samples: Iterable[StreamSample], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("x,y,psi,u,v\n")
        for s in samples:
            fh.write(f"{s.x:.17g},{s.y:.17g},{s.psi:.17g},{s.u:.17g},{s.v:.17g}\n")
    return path
