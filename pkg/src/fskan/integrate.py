"""Fixed-step classical RK4 with convergence, divergence and crossing detection.

Two engines share one stepping recipe:

``integrate``
    General scalar driver for any autonomous field on a value tuple.  Records
    every sample and returns a :class:`Trajectory`.

``integrate_pseudo_batch``
    Vectorised driver for the planar pseudo-similarity system only.  Used by
    sweeps and basin rasters, where thousands of short-lived shots would be
    too slow one at a time.  Its arithmetic mirrors the scalar path operation
    for operation, so stop reasons, stop times and crossing counts agree bit
    for bit with ``integrate(pseudo_field(tau), ...)``.

Time of sample ``k`` is always ``k * h`` (never accumulated); when ``t_max``
is not a multiple of ``h`` the last step is shortened to land on ``t_max``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFiniteError
from .model import PhaseState, ThirdOrderState

__all__ = [
    "StopKind",
    "StopReason",
    "IntegratorConfig",
    "Crossing",
    "Trajectory",
    "BatchResult",
    "rk4_step",
    "integrate",
    "integrate_pseudo_batch",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

Field = Callable[[Sequence[float]], Sequence[float]]
Event = Callable[[float, Sequence[float]], Optional[str]]


class StopKind(enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    HORIZON = "horizon"
    EVENT = "event"


# integer codes used by the batch engine
_CODE = {StopKind.CONVERGED: 0, StopKind.DIVERGED: 1, StopKind.HORIZON: 2, StopKind.EVENT: 3}
_KIND = {v: k for k, v in _CODE.items()}
_RUNNING = -1


@dataclass(frozen=True)
class StopReason:
    """Why an integration ended.

    ``t`` is the start of the sustained convergence window for CONVERGED, the
    offending sample time for DIVERGED and None otherwise; ``tag`` names the
    event for EVENT.
    """

    kind: StopKind
    t: Optional[float] = None
    tag: Optional[str] = None

    def __str__(self) -> str:
        if self.kind is StopKind.EVENT:
            return f"event({self.tag})"
        if self.t is None:
            return self.kind.value
        return f"{self.kind.value}({self.t:.6g})"


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-3
    t_max: float = 50.0
    conv_tol: float = 1e-6
    conv_hold: float = 1.0
    div_bound: float = 1e2

    def __post_init__(self):
        for name in ("h", "t_max", "conv_tol", "conv_hold", "div_bound"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if self.h > self.t_max:
            raise ValueError(f"step h={self.h} exceeds horizon t_max={self.t_max}")

    def step_times(self) -> tuple[int, bool]:
        """(number of full steps, whether a final partial step follows)."""
        ratio = self.t_max / self.h
        n = round(ratio)
        if abs(ratio - n) <= 1e-9 * max(1.0, ratio):
            return n, False
        return math.floor(ratio), True


@dataclass(frozen=True)
class Crossing:
    """A sign change of theta - 1; ``direction`` is +1 upward, -1 downward."""

    t: float
    direction: int


@dataclass
class Trajectory:
    """Samples of one integration.

    ``y`` has one row per sample; the theta/phi pair tracked for convergence
    and crossings sits at columns ``watch`` (``(0, 1)`` for the planar
    system, ``(1, 2)`` for third-order states where theta = f').
    """

    t: np.ndarray
    y: np.ndarray
    stop: StopReason
    crossings: list[Crossing] = field(default_factory=list)
    watch: tuple[int, int] = (0, 1)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def theta(self) -> np.ndarray:
        return self.y[:, self.watch[0]]

    @property
    def phi(self) -> np.ndarray:
        return self.y[:, self.watch[1]]

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def states(self):
        if self.y.shape[1] == 3:
            return [ThirdOrderState(float(t), *map(float, row)) for t, row in zip(self.t, self.y)]
        return [PhaseState(float(t), *map(float, row)) for t, row in zip(self.t, self.y)]


def rk4_step(rhs: Field, state: Sequence[float], h: float) -> tuple:
    """One classical fourth-order Runge-Kutta step of size ``h``.

    Raises NonFiniteError if any stage or the result is not finite.
    """
    hh = 0.5 * h
    k1 = rhs(state)
    k2 = rhs(tuple(a + hh * b for a, b in zip(state, k1)))
    k3 = rhs(tuple(a + hh * b for a, b in zip(state, k2)))
    k4 = rhs(tuple(a + h * b for a, b in zip(state, k3)))
    h6 = h / 6.0
    out = tuple(a + h6 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(state, k1, k2, k3, k4))
    for v in (*k2, *k3, *k4, *out):
        if not math.isfinite(v):
            raise NonFiniteError(f"non-finite value during RK4 step from {tuple(state)}")
    return out


def _crossing_time(t0: float, s0: float, t1: float, s1: float) -> float:
    # linear interpolation of theta - 1 between two samples of opposite sign
    return t0 + (t1 - t0) * (s0 / (s0 - s1))


def integrate(
    rhs: Field,
    state0: Sequence[float],
    config: IntegratorConfig = IntegratorConfig(),
    *,
    watch: Optional[tuple[int, int]] = None,
    event: Optional[Event] = None,
    detect_convergence: bool = True,
) -> Trajectory:
    """Integrate ``rhs`` from ``state0`` with fixed-step RK4.

    Parameters
    ----------
    rhs : callable
        Autonomous field mapping a value tuple to its derivative tuple.
    state0 : sequence of float
        Initial values at t = 0.
    config : IntegratorConfig
        Step, horizon and stopping thresholds.
    watch : (int, int), optional
        Columns holding (theta, phi).  Defaults to the last two components.
    event : callable, optional
        ``event(t, y)`` is called after every step; a non-None return stops
        the run with ``StopKind.EVENT`` and that tag.
    detect_convergence : bool
        When False the run only stops on divergence, events or the horizon.

    Returns
    -------
    Trajectory
        Stop precedence at a sample is divergence, then event, then
        convergence.  Convergence needs ``|theta-1| < conv_tol`` and
        ``|phi| < conv_tol`` on every sample of a window of length
        ``conv_hold``.
    """
    y = tuple(float(v) for v in state0)
    if not all(math.isfinite(v) for v in y):
        raise ValueError(f"initial state must be finite, got {y}")
    if watch is None:
        watch = (len(y) - 2, len(y) - 1)
    it, ip = watch
    h = config.h
    tol = config.conv_tol
    hold = config.conv_hold - 1e-12
    bound = config.div_bound
    n_full, partial = config.step_times()

    ts = [0.0]
    ys = [y]
    crossings: list[Crossing] = []
    s_prev = y[it] - 1.0
    t_prev = 0.0
    last_sign = (s_prev > 0.0) - (s_prev < 0.0)
    window = None
    stop = None

    def check(t, y):
        nonlocal window
        if any(abs(v) > bound for v in y):
            return StopReason(StopKind.DIVERGED, t)
        if event is not None and t > 0.0:
            tag = event(t, y)
            if tag is not None:
                return StopReason(StopKind.EVENT, tag=tag)
        if detect_convergence:
            if abs(y[it] - 1.0) < tol and abs(y[ip]) < tol:
                if window is None:
                    window = t
                if t - window >= hold:
                    return StopReason(StopKind.CONVERGED, window)
            else:
                window = None
        return None

    stop = check(0.0, y)
    k = 0
    n_steps = n_full + (1 if partial else 0)
    while stop is None and k < n_steps:
        k += 1
        if k <= n_full:
            t = k * h
            step = h
        else:
            t = config.t_max
            step = t - n_full * h
        try:
            y = rk4_step(rhs, y, step)
        except NonFiniteError:
            stop = StopReason(StopKind.DIVERGED, t)
            break
        ts.append(t)
        ys.append(y)
        s = y[it] - 1.0
        sign = (s > 0.0) - (s < 0.0)
        if sign != 0:
            if last_sign != 0 and sign != last_sign:
                tc = t_prev if s_prev == 0.0 else _crossing_time(t_prev, s_prev, t, s)
                crossings.append(Crossing(tc, sign))
            last_sign = sign
        s_prev, t_prev = s, t
        stop = check(t, y)
    if stop is None:
        stop = StopReason(StopKind.HORIZON)
    return Trajectory(np.array(ts), np.array(ys, dtype=float), stop, crossings, watch)


@dataclass
class BatchResult:
    """Per-member outcome of :func:`integrate_pseudo_batch` (arrays of equal length)."""

    kind: np.ndarray  # int codes, see stop_kind()
    t_at: np.ndarray  # window start / divergence time, nan otherwise
    t_end: np.ndarray
    crossings: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    max_energy_rise: Optional[np.ndarray] = None
    max_energy_drift: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.kind)

    def stop_kind(self, i: int) -> StopKind:
        return _KIND[int(self.kind[i])]

    def stop_reason(self, i: int) -> StopReason:
        kind = self.stop_kind(i)
        t = None if math.isnan(self.t_at[i]) else float(self.t_at[i])
        return StopReason(kind, t)

    @property
    def converged(self) -> np.ndarray:
        return self.kind == _CODE[StopKind.CONVERGED]


def _energy(theta, phi):
    return 0.5 * phi * phi + theta * theta * theta / 3.0 - theta


def integrate_pseudo_batch(
    tau: float,
    theta0,
    phi0,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    monitor_energy: bool = False,
) -> BatchResult:
    """Integrate theta' = phi, phi' = -tau phi + 1 - theta^2 for many starts at once.

    Semantics match :func:`integrate` with ``pseudo_field(tau)``.  With
    ``monitor_energy`` the largest sample-to-sample increase of
    E = phi^2/2 + theta^3/3 - theta and the largest |E(t) - E(0)| are
    tracked per member (over the samples before stopping).
    """
    th0 = np.array(theta0, dtype=float).ravel()
    ph0 = np.array(phi0, dtype=float).ravel()
    if th0.shape != ph0.shape:
        raise ValueError("theta0 and phi0 must have the same length")
    if not (np.all(np.isfinite(th0)) and np.all(np.isfinite(ph0))):
        raise ValueError("initial states must be finite")
    n = th0.size
    tau = float(tau)
    h = config.h
    tol = config.conv_tol
    hold = config.conv_hold - 1e-12
    bound = config.div_bound
    n_full, partial = config.step_times()

    kind = np.full(n, _RUNNING, dtype=int)
    t_at = np.full(n, np.nan)
    t_end = np.zeros(n)
    n_cross = np.zeros(n, dtype=int)
    th_out = th0.copy()
    ph_out = ph0.copy()
    rise = np.zeros(n) if monitor_energy else None
    drift = np.zeros(n) if monitor_energy else None

    idx = np.arange(n)
    th = th0.copy()
    ph = ph0.copy()
    s = th - 1.0
    last = np.sign(s)
    window = np.full(n, np.nan)
    if monitor_energy:
        e0 = _energy(th, ph)
        e_prev = e0.copy()

    def settle(t, th, ph):
        """Return (codes, t_at) for members stopping at sample time t."""
        nonlocal window
        code = np.full(th.size, _RUNNING, dtype=int)
        when = np.full(th.size, np.nan)
        div = (np.abs(th) > bound) | (np.abs(ph) > bound)
        code[div] = _CODE[StopKind.DIVERGED]
        when[div] = t
        near = (np.abs(th - 1.0) < tol) & (np.abs(ph) < tol)
        window = np.where(near, np.where(np.isnan(window), t, window), np.nan)
        conv = near & ~div & (t - window >= hold)
        code[conv] = _CODE[StopKind.CONVERGED]
        when[conv] = window[conv]
        return code, when

    def retire(done, code, when, t):
        nonlocal idx, th, ph, last, window, e_prev, e0
        sel = idx[done]
        kind[sel] = code[done]
        t_at[sel] = when[done]
        t_end[sel] = t
        th_out[sel] = th[done]
        ph_out[sel] = ph[done]
        keep = ~done
        idx, th, ph, last, window = idx[keep], th[keep], ph[keep], last[keep], window[keep]
        if monitor_energy:
            e_prev, e0 = e_prev[keep], e0[keep]

    with np.errstate(all="ignore"):
        code, when = settle(0.0, th, ph)
        done = code != _RUNNING
        if done.any():
            retire(done, code, when, 0.0)
        n_steps = n_full + (1 if partial else 0)
        k = 0
        while idx.size and k < n_steps:
            k += 1
            if k <= n_full:
                t = k * h
                step = h
            else:
                t = config.t_max
                step = t - n_full * h
            hh = 0.5 * step
            h6 = step / 6.0
            a1 = ph
            b1 = -tau * ph + 1.0 - th * th
            t2 = th + hh * a1
            p2 = ph + hh * b1
            a2 = p2
            b2 = -tau * p2 + 1.0 - t2 * t2
            t3 = th + hh * a2
            p3 = ph + hh * b2
            a3 = p3
            b3 = -tau * p3 + 1.0 - t3 * t3
            t4 = th + step * a3
            p4 = ph + step * b3
            a4 = p4
            b4 = -tau * p4 + 1.0 - t4 * t4
            th_new = th + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            ph_new = ph + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)

            bad = ~(
                np.isfinite(b2) & np.isfinite(b3) & np.isfinite(b4)
                & np.isfinite(a2) & np.isfinite(a3) & np.isfinite(a4)
                & np.isfinite(th_new) & np.isfinite(ph_new)
            )
            if bad.any():
                # the scalar path stops before recording a non-finite sample
                sel = idx[bad]
                kind[sel] = _CODE[StopKind.DIVERGED]
                t_at[sel] = t
                t_end[sel] = t - step
                th_out[sel] = th[bad]
                ph_out[sel] = ph[bad]
                keep = ~bad
                idx, th_new, ph_new, last, window = idx[keep], th_new[keep], ph_new[keep], last[keep], window[keep]
                if monitor_energy:
                    e_prev, e0 = e_prev[keep], e0[keep]
            th, ph = th_new, ph_new

            sign = np.sign(th - 1.0)
            flip = (sign != 0) & (last != 0) & (sign != last)
            n_cross[idx[flip]] += 1
            last = np.where(sign != 0, sign, last)

            if monitor_energy:
                e = _energy(th, ph)
                rise[idx] = np.maximum(rise[idx], e - e_prev)
                drift[idx] = np.maximum(drift[idx], np.abs(e - e0))
                e_prev = e

            code, when = settle(t, th, ph)
            done = code != _RUNNING
            if done.any():
                retire(done, code, when, t)

        if idx.size:
            kind[idx] = _CODE[StopKind.HORIZON]
            t_end[idx] = config.t_max if n_steps else 0.0
            th_out[idx] = th
            ph_out[idx] = ph

    return BatchResult(kind, t_at, t_end, n_cross, th_out, ph_out, rise, drift)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    """Write ``t,theta,phi`` (planar) or ``t,theta,phi,f`` (third-order) rows."""
    path = Path(path)
    third = traj.y.shape[1] == 3
    header = ["t", "theta", "phi"] + (["f"] if third else [])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        if third:
            for t, (f, fp, fpp) in zip(traj.t, traj.y):
                w.writerow([_fmt(t), _fmt(fp), _fmt(fpp), _fmt(f)])
        else:
            for t, (th, ph) in zip(traj.t, traj.y):
                w.writerow([_fmt(t), _fmt(th), _fmt(ph)])
    return path


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read a trajectory CSV back as (t, columns-after-t, header)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    return data[:, 0], data[:, 1:], header
