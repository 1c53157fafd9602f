"""Independent reference implementations used to check the package."""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import mathieu_a, mathieu_b
from scipy.constants import h, k


def mathieu_levels(e_j, e_c, n_g, n_levels):
    """Transmon levels at n_g = 0 or 1/2 from Mathieu characteristic values."""
    q = e_j / (2 * e_c)
    if n_g == 0.0:
        vals = [mathieu_a(2 * r, q) for r in range(n_levels)] + [mathieu_b(2 * r, q) for r in range(1, n_levels)]
    elif n_g == 0.5:
        vals = [mathieu_a(2 * r + 1, q) for r in range(n_levels)] + [mathieu_b(2 * r + 1, q) for r in range(n_levels)]
    else:
        raise ValueError("closed form only at n_g in {0, 1/2}")
    e = e_c * np.sort(vals)[:n_levels]
    return e - e[0]


def bose_direct(f, T):
    return 1.0 / (math.exp(h * f / (k * T)) - 1.0)


def ode_propagator(H0, V, amplitude, omega_d):
    """One-period propagator by adaptive ODE integration of each basis column."""
    n = H0.shape[0]

    def rhs(t, y):
        psi = y.reshape(n, n)
        Ht = H0 + amplitude * math.cos(2 * math.pi * omega_d * t) * V
        return (-2j * math.pi * Ht @ psi).ravel()

    sol = solve_ivp(rhs, (0.0, 1.0 / omega_d), np.eye(n, dtype=complex).ravel(), rtol=1e-11, atol=1e-12, method="DOP853")
    return sol.y[:, -1].reshape(n, n)
