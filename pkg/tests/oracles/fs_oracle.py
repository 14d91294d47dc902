"""Independent skin-friction oracle for the Falkner-Skan family.

Collocation (scipy.integrate.solve_bvp) on a truncated domain, with no
shooting and no RK4: the values it prints are frozen into tests/test_shoot.py.

    python3 tests/oracles/fs_oracle.py
"""

import numpy as np
from scipy.integrate import solve_bvp


def wall_shear(m, eta_max=15.0, n=3001, tol=1e-10):
    beta = (m + 1.0) / 2.0

    def rhs(t, y):
        f, fp, fpp = y
        return np.vstack((fp, fpp, -beta * f * fpp - m * (1.0 - fp * fp)))

    def bc(y0, yinf):
        return np.array([y0[0], y0[1], yinf[1] - 1.0])

    t = np.linspace(0.0, eta_max, n)
    guess = np.vstack((t - 1.0 + np.exp(-t), 1.0 - np.exp(-t), np.exp(-t)))
    sol = solve_bvp(rhs, bc, t, guess, tol=tol, max_nodes=200000)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.sol(0.0)[2]


if __name__ == "__main__":
    for m in (0.0, 1.0 / 3.0, 1.0):
        print(f"m={m!r}: f''(0) = {wall_shear(m):.10f}  (eta_max=15)  {wall_shear(m, 20.0, 4001):.10f}  (eta_max=20)")
