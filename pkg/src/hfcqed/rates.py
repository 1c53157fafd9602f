"""Closed-form decoherence and photon-number relations downstream of (chi, kappa).

Every rate here takes and returns ordinary-frequency (/2pi) units: pass
chi/2pi, kappa/2pi in Hz and get a rate in Hz.  Use
:func:`hfcqed.units.rate_to_lifetime` to turn a rate into a lifetime in
seconds (this is where the 2pi enters).
"""

from __future__ import annotations

import math

import numpy as np

from .units import H, KB

_MAX_EXPONENT = 700.0
T2_TOLERANCE = 0.10


def bose_einstein(f, T):
    """Thermal occupation ``1 / (exp(h f / k_B T) - 1)``.

    Works on scalars or arrays.  Exponents above 700 return exactly 0.0
    instead of overflowing.
    """
    f = np.asarray(f, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(f <= 0) or np.any(T <= 0):
        raise ValueError("frequency and temperature must be positive")
    x = H * f / (KB * T)
    with np.errstate(over="ignore"):
        out = np.where(x > _MAX_EXPONENT, 0.0, 1.0 / np.expm1(np.minimum(x, _MAX_EXPONENT)))
    return float(out) if out.ndim == 0 else out


def stark_shift(chi: float, nbar: float) -> float:
    return 2.0 * chi * nbar


def meas_dephasing_rate(chi: float, kappa: float, nbar: float) -> float:
    """Measurement-induced dephasing ``2 n kappa chi^2 / (chi^2 + (kappa/2)^2)``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return 2.0 * nbar * kappa * chi**2 / (chi**2 + (kappa / 2) ** 2)


def thermal_dephasing_rate(chi: float, kappa: float, nbar: float) -> float:
    """Photon shot-noise dephasing ``4 n kappa chi^2 / (4 chi^2 + kappa^2)``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return 4.0 * nbar * kappa * chi**2 / (4 * chi**2 + kappa**2)


def nbar_from_thermal_dephasing(rate: float, chi: float, kappa: float) -> float:
    """Residual photon number that would produce a given dephasing rate (Hz)."""
    return rate / thermal_dephasing_rate(chi, kappa, 1.0)


def thermal_dephasing_vs_frequency(omega_r, temperature: float, chi: float, kappa: float):
    """Dephasing rate with the cavity occupation set by its own temperature."""
    return thermal_dephasing_rate(chi, kappa, bose_einstein(omega_r, temperature))


def spin_locking_psd(chi: float, kappa: float, nbar: float, omega: float) -> float:
    """Photon-number noise PSD seen by the qubit at Rabi frequency ``omega``.

    ``8 n chi^2 kappa^2 / (kappa^2 + 4 chi^2) * kappa / (omega^2 + kappa^2)``,
    a Lorentzian of half width kappa.  In /2pi units the result is in Hz;
    multiply by 2pi to compare against a decay rate in 1/s.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return 8 * nbar * chi**2 * kappa**2 / (kappa**2 + 4 * chi**2) * kappa / (omega**2 + kappa**2)


def spin_locking_noise(t_rho: float, t1: float) -> float:
    """Measured noise density ``2 (1/T_rho - 1/(2 T1))`` in 1/s."""
    if t_rho <= 0 or t1 <= 0:
        raise ValueError("t_rho and t1 must be positive")
    s = 2.0 * (1.0 / t_rho - 1.0 / (2.0 * t1))
    # Allow rounding noise at the T_rho = 2 T1 boundary.
    if s < -1e-12 * (1.0 / t_rho):
        raise ValueError("1/T_rho < 1/(2 T1): negative noise estimate")
    return max(s, 0.0)


def nbar_from_spin_locking(t_rho: float, t1: float, chi: float, kappa: float, omega: float) -> float:
    """Residual photon number from a spin-locking decay time.

    ``t_rho`` and ``t1`` are in seconds; ``chi``, ``kappa`` and ``omega`` in
    Hz (/2pi).  The PSD model is evaluated in Hz and scaled by 2pi to match
    the measured noise density, which is in 1/s.
    """
    s = spin_locking_noise(t_rho, t1)
    per_photon = 2.0 * math.pi * spin_locking_psd(chi, kappa, 1.0, omega)
    return s / per_photon


def t_rho_from_nbar(nbar: float, t1: float, chi: float, kappa: float, omega: float) -> float:
    """Forward model: the spin-locking decay time produced by ``nbar``."""
    s = 2.0 * math.pi * spin_locking_psd(chi, kappa, nbar, omega)
    return 1.0 / (s / 2.0 + 1.0 / (2.0 * t1))


def purcell_rate(kappa: float, g: float, omega_r: float, omega: float) -> float:
    """Purcell scaling estimate ``kappa (g/omega_r)^2 (omega/omega_r)^5`` in Hz.

    The proportionality constant is taken as one, so use this for ratios
    and order-of-magnitude bounds only.
    """
    if min(kappa, g, omega_r, omega) <= 0:
        raise ValueError("all arguments must be positive")
    return kappa * (g / omega_r) ** 2 * (omega / omega_r) ** 5


def pure_dephasing_time(t1: float, t2e: float, tolerance: float = T2_TOLERANCE) -> float:
    """``T_phi`` from ``1/T_phi = 1/T2E - 1/(2 T1)``.

    Returns ``math.inf`` when T2E reaches 2 T1 (lifetime limited), allowing
    ``tolerance`` relative excess for fit noise; larger excess raises.
    """
    if t1 <= 0 or t2e <= 0:
        raise ValueError("t1 and t2e must be positive")
    if t2e > 2 * t1 * (1 + tolerance):
        raise ValueError(f"T2E={t2e:.3g} s exceeds 2 T1={2 * t1:.3g} s beyond tolerance")
    inv = 1.0 / t2e - 1.0 / (2.0 * t1)
    if inv <= 0:
        return math.inf
    return 1.0 / inv
