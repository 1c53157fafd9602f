"""Rectangular-cavity mode, coupling scaling and the perturbative dispersive shift."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import PoleProximityError
from .transmon import Spectrum
from .units import C_LIGHT

DEFAULT_GUARD = 50e6
DEFAULT_SUM_LEVELS = 12


@dataclass(frozen=True)
class RectangularCavity:
    a: float
    b: float
    z: float

    def __post_init__(self):
        if min(self.a, self.b, self.z) <= 0:
            raise ValueError("cavity dimensions must be positive")
        if self.z > min(self.a, self.b):
            raise ValueError("z must be the smallest dimension for the TE110 formula to apply")


@dataclass(frozen=True)
class CouplingModel:
    """Reference coupling ``g0`` (Hz) at reference cavity frequency ``omega0`` (Hz)."""

    g0: float
    omega0: float

    def __post_init__(self):
        if self.g0 <= 0 or self.omega0 <= 0:
            raise ValueError("g0 and omega0 must be positive")


@dataclass(frozen=True)
class DispersiveSystem:
    chi: float
    kappa: float
    omega_r: float
    g: float
    omega_01: float

    def __post_init__(self):
        if self.kappa <= 0 or self.omega_r <= 0:
            raise ValueError("kappa and omega_r must be positive")
        if abs(self.chi) >= 1e3 * self.kappa:
            raise ValueError("|chi| exceeds 1000 kappa; check units")


@dataclass(frozen=True)
class ChiPoint:
    omega_r: float
    chi: float
    pole: bool
    transition: tuple[int, int] | None = None


def te110_frequency(cavity: RectangularCavity) -> float:
    """Fundamental TE110 frequency (Hz) of the empty box."""
    return 0.5 * C_LIGHT * math.hypot(1.0 / cavity.a, 1.0 / cavity.b)


def scaled_coupling(model: CouplingModel, omega_r: float) -> float:
    """Coupling at cavity frequency ``omega_r`` under ``g^2 ~ omega_r^3``."""
    if omega_r <= 0:
        raise ValueError("omega_r must be positive")
    return model.g0 * (omega_r / model.omega0) ** 1.5


def _nearest_pole(spectrum: Spectrum, omega_r: float, n_levels: int):
    best = None
    for j in (0, 1):
        for i in range(n_levels):
            if i == j:
                continue
            det = abs(abs(spectrum.transition(j, i)) - omega_r)
            if best is None or det < best[0]:
                best = (det, (min(i, j), max(i, j)))
    return best


def _chi_sum(spectrum: Spectrum, omega_r: float, n_levels: int) -> float:
    # chi per unit g^2: (chi_1 - chi_0) / 2 with chi_j = 2 sum_i w |n_ij|^2 / (w^2 - omega_r^2),
    # w = E_j - E_i, so the ground state pulls a cavity above the qubit upward.
    e = spectrum.energies[:n_levels]
    n2 = spectrum.charge_elements[:n_levels, :n_levels] ** 2
    out = []
    for j in (0, 1):
        w = e[j] - e
        mask = np.arange(n_levels) != j
        out.append(2.0 * np.sum(w[mask] * n2[mask, j] / (w[mask] ** 2 - omega_r**2)))
    return 0.5 * (out[1] - out[0])


def chi_perturbative(
    spectrum: Spectrum,
    g: float,
    omega_r: float,
    n_levels: int = DEFAULT_SUM_LEVELS,
    guard: float = DEFAULT_GUARD,
) -> float:
    """Second-order dispersive shift chi/2pi (Hz), signed.

    ``2 chi = chi_1 - chi_0`` summed over the lowest ``n_levels`` states.
    All inputs are ordinary frequencies; the expression is homogeneous of
    degree one so no 2pi factors appear.  With the cavity above the qubit
    the result is negative.  Raises :class:`PoleProximityError` if
    ``omega_r`` is within ``guard`` of a transition out of |0> or |1>.
    A truncation check against ``n_levels + 3`` warns on >1% disagreement.
    """
    if n_levels > len(spectrum):
        raise ValueError(f"spectrum has only {len(spectrum)} levels")
    det, pair = _nearest_pole(spectrum, omega_r, n_levels)
    if det < guard:
        raise PoleProximityError(
            f"omega_r={omega_r:.6g} Hz is {det:.3g} Hz from transition {pair[0]}->{pair[1]}",
            transition=pair,
            detuning=det,
        )
    chi = g**2 * _chi_sum(spectrum, omega_r, n_levels)
    extra = n_levels + 3
    if extra <= len(spectrum) and _nearest_pole(spectrum, omega_r, extra)[0] >= guard:
        ref = g**2 * _chi_sum(spectrum, omega_r, extra)
        if abs(ref - chi) > 0.01 * abs(ref):
            warnings.warn(
                f"chi not converged in level count: {n_levels} levels give {chi:.4g}, {extra} give {ref:.4g}",
                RuntimeWarning,
                stacklevel=2,
            )
    return float(chi)


def solve_g_from_chi(
    spectrum: Spectrum,
    chi_target: float,
    omega_r: float,
    n_levels: int = DEFAULT_SUM_LEVELS,
    guard: float = DEFAULT_GUARD,
) -> float:
    """Invert :func:`chi_perturbative` for the positive coupling g (Hz)."""
    unit = chi_perturbative(spectrum, 1.0, omega_r, n_levels, guard)
    if chi_target == 0:
        return 0.0
    if unit == 0 or math.copysign(1.0, unit) != math.copysign(1.0, chi_target):
        raise ValueError(
            f"chi_target={chi_target:.4g} Hz has the opposite sign to the model ({unit:.4g} Hz per Hz^2)"
        )
    return math.sqrt(chi_target / unit)


def chi_scan(
    spectrum: Spectrum,
    model: CouplingModel,
    omega_range: Sequence[float],
    n_levels: int = DEFAULT_SUM_LEVELS,
    guard: float = DEFAULT_GUARD,
) -> list[ChiPoint]:
    """Dispersive shift versus cavity frequency with ``g^2 ~ omega_r^3``.

    Points inside a pole guard band are returned with ``chi = nan`` and
    ``pole=True`` instead of raising.
    """
    grid = np.asarray(omega_range, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("omega_range must be strictly increasing")
    out = []
    for w in grid:
        det, pair = _nearest_pole(spectrum, w, n_levels)
        if det < guard:
            out.append(ChiPoint(float(w), math.nan, True, pair))
            continue
        g = scaled_coupling(model, w)
        out.append(ChiPoint(float(w), float(g**2 * _chi_sum(spectrum, w, n_levels)), False))
    return out
