"""Right-hand sides, parameter conversions and closed forms.

Three autonomous fields are provided:

* the Falkner-Skan equation ``f''' + (m+1)/2 f f'' + m (1 - f'^2) = 0``,
* the m = -1 pseudo-similarity equation ``f''' + tau f'' + f'^2 - 1 = 0``,
* its velocity form ``theta'' + tau theta' + theta^2 - 1 = 0`` written as a
  first-order system in ``(theta, phi = theta')``.

States are plain sequences.  The rhs functions read the *trailing*
components, so a ``ThirdOrderState``/``PhaseState`` (which carry ``t`` in
front) and a bare value tuple are both accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

from .errors import DomainError, UndefinedParameterError

__all__ = [
    "FalknerSkanParams",
    "PseudoParams",
    "FlowConstants",
    "PhaseState",
    "ThirdOrderState",
    "fs_rhs",
    "pseudo_rhs",
    "pseudo_rhs3",
    "fs_field",
    "pseudo_field",
    "pseudo_field3",
    "gamma_of_m",
    "m_of_gamma",
    "similarity_exponents",
    "exact_tanh",
    "exact_tanh_derivatives",
    "exact_tanh_slope",
]

SQRT2 = math.sqrt(2.0)


class PhaseState(NamedTuple):
    t: float
    theta: float
    phi: float


class ThirdOrderState(NamedTuple):
    t: float
    f: float
    fp: float
    fpp: float


def similarity_exponents(m: float) -> tuple[float, float]:
    """Exponents (alpha, beta) of psi = x**alpha f(y x**-beta) for U_e = U x**m."""
    return (m + 1.0) / 2.0, (1.0 - m) / 2.0


def gamma_of_m(m: float) -> float:
    """Coefficient of the gamma-form equation f''' + f f'' + gamma (1 - f'^2) = 0."""
    if m == -1.0:
        raise UndefinedParameterError("gamma = 2m/(m+1) is undefined at m = -1")
    return 2.0 * m / (m + 1.0)


def m_of_gamma(gamma: float) -> float:
    if gamma == 2.0:
        raise UndefinedParameterError("m = gamma/(2-gamma) is undefined at gamma = 2")
    return gamma / (2.0 - gamma)


@dataclass(frozen=True)
class FalknerSkanParams:
    m: float

    @property
    def alpha(self) -> float:
        return similarity_exponents(self.m)[0]

    @property
    def beta(self) -> float:
        return similarity_exponents(self.m)[1]

    @property
    def gamma(self) -> Optional[float]:
        """gamma = 2m/(m+1), or None when m = -1 (served by the pseudo path)."""
        if self.m == -1.0:
            return None
        return gamma_of_m(self.m)


@dataclass(frozen=True)
class PseudoParams:
    tau: float
    zeta: float


@dataclass(frozen=True)
class FlowConstants:
    """Dimensional constants of the m = -1 flow.

    ``nu`` kinematic viscosity, ``U_inf`` external velocity scale
    (U_e = U_inf / x), ``U_w`` wall stretching scale, ``V_w`` transpiration
    scale.
    """

    nu: float
    U_inf: float
    U_w: float = 0.0
    V_w: float = 0.0

    def __post_init__(self):
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.U_inf > 0.0:
            raise ValueError(f"U_inf must be positive, got {self.U_inf}")
        if self.U_w < 0.0:
            raise ValueError(f"U_w must be nonnegative, got {self.U_w}")

    @classmethod
    def from_similarity(cls, tau: float, zeta: float, nu: float = 1.0, U_inf: float = 1.0) -> "FlowConstants":
        return cls(nu=nu, U_inf=U_inf, U_w=zeta * U_inf, V_w=tau * math.sqrt(nu * U_inf))

    @property
    def tau(self) -> float:
        return self.V_w / math.sqrt(self.nu * self.U_inf)

    @property
    def zeta(self) -> float:
        return self.U_w / self.U_inf

    @property
    def a(self) -> float:
        """Stream-function scale sqrt(nu U_inf)."""
        return math.sqrt(self.nu * self.U_inf)

    @property
    def b(self) -> float:
        """Similarity-variable scale sqrt(U_inf / nu), so t = b y / x."""
        return math.sqrt(self.U_inf / self.nu)


def fs_rhs(state: Sequence[float], params: FalknerSkanParams) -> tuple[float, float, float]:
    """(f', f'', f''') for the Falkner-Skan equation."""
    f, fp, fpp = state[-3], state[-2], state[-1]
    m = params.m
    return fp, fpp, -((m + 1.0) / 2.0) * f * fpp - m * (1.0 - fp * fp)


def pseudo_rhs(state: Sequence[float], tau: float) -> tuple[float, float]:
    """(theta', phi') with theta' = phi, phi' = -tau phi + 1 - theta^2."""
    theta, phi = state[-2], state[-1]
    return phi, -tau * phi + 1.0 - theta * theta


def pseudo_rhs3(state: Sequence[float], tau: float) -> tuple[float, float, float]:
    """(f', f'', f''') for f''' = -tau f'' - f'^2 + 1.

    The last two components are evaluated with exactly the same operation
    order as :func:`pseudo_rhs`, so (f', f'') integrates bit-identically to
    (theta, phi).
    """
    f, fp, fpp = state[-3], state[-2], state[-1]
    return fp, fpp, -tau * fpp + 1.0 - fp * fp


def fs_field(params: FalknerSkanParams) -> Callable[[Sequence[float]], tuple]:
    """Closure over :func:`fs_rhs` for the integrator (value tuples only)."""
    half = (params.m + 1.0) / 2.0
    m = params.m

    def rhs(y):
        f, fp, fpp = y
        return fp, fpp, -half * f * fpp - m * (1.0 - fp * fp)

    return rhs


def pseudo_field(tau: float) -> Callable[[Sequence[float]], tuple]:
    def rhs(y):
        theta, phi = y
        return phi, -tau * phi + 1.0 - theta * theta

    return rhs


def pseudo_field3(tau: float) -> Callable[[Sequence[float]], tuple]:
    def rhs(y):
        f, fp, fpp = y
        return fp, fpp, -tau * fpp + 1.0 - fp * fp

    return rhs


def _tanh_offset(zeta: float) -> float:
    if zeta > 2.0 or zeta <= -1.0:
        raise DomainError(f"closed-form branch needs -1 < zeta <= 2, got {zeta}")
    return math.atanh(math.sqrt((2.0 - zeta) / 3.0))


def _check_sign(sign: int) -> float:
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    return float(sign)


def exact_tanh(t: float, zeta: float, sign: int = 1) -> float:
    """theta(t) = 2 - 3 tanh^2(sign t/sqrt(2) + arctanh(sqrt((2-zeta)/3))).

    Solves theta'' + theta^2 - 1 = 0 with theta(0) = zeta on the energy level
    E = 2/3, i.e. along the homoclinic orbit of the saddle (-1, 0).
    """
    s = _check_sign(sign)
    T = math.tanh(s * t / SQRT2 + _tanh_offset(zeta))
    return 2.0 - 3.0 * T * T


def exact_tanh_derivatives(t: float, zeta: float, sign: int = 1) -> tuple[float, float, float]:
    """(theta, theta', theta'') of :func:`exact_tanh`, all analytic."""
    s = _check_sign(sign)
    T = math.tanh(s * t / SQRT2 + _tanh_offset(zeta))
    sech2 = 1.0 - T * T
    theta = 2.0 - 3.0 * T * T
    dtheta = -6.0 * T * sech2 * s / SQRT2
    d2theta = -3.0 * sech2 * (1.0 - 3.0 * T * T)
    return theta, dtheta, d2theta


def exact_tanh_slope(zeta: float, sign: int = 1) -> float:
    """theta'(0) from the energy identity phi^2/2 + theta^3/3 - theta = 2/3.

    The sign is minus the branch sign: on the +1 branch theta heads down
    toward the saddle at -1.
    """
    s = _check_sign(sign)
    _tanh_offset(zeta)
    level = 2.0 * (2.0 / 3.0 - zeta ** 3 / 3.0 + zeta)
    return -s * math.sqrt(max(level, 0.0))
