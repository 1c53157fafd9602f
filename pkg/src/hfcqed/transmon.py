"""Charge-basis transmon spectrum and the (E_J, E_C) inverse problem.

Energies are ordinary frequencies in Hz (E/h).  The Hamiltonian is
``4 E_C (n - n_g)^2 - E_J cos(phi)`` on charge states ``-n_cut..n_cut``,
where ``cos(phi)`` couples neighbouring charge states with weight 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, FitError
from .fitting.lsq import least_squares

DEFAULT_N_CUT = 20
DEFAULT_LEVELS = 15
_MAX_N_CUT = 320
_CONVERGENCE_RTOL = 1e-9


@dataclass(frozen=True)
class TransmonParams:
    e_j: float
    e_c: float
    n_g: float = 0.25
    n_cut: int = DEFAULT_N_CUT

    def __post_init__(self):
        if not (self.e_j > 0 and self.e_c > 0):
            raise ValueError("e_j and e_c must be positive")
        if not math.isfinite(self.n_g):
            raise ValueError("n_g must be finite")
        if int(self.n_cut) != self.n_cut or self.n_cut < 5:
            raise ValueError("n_cut must be an integer >= 5")

    @property
    def ratio(self) -> float:
        return self.e_j / self.e_c


@dataclass(frozen=True)
class Spectrum:
    """Lowest transmon levels.

    ``energies`` are referenced to the ground state; ``charge_elements[i, j]``
    is ``|<i|n|j>|``; ``vectors`` holds the eigenvectors in the charge basis
    (columns) at the cutoff ``n_cut`` actually used.
    """

    energies: np.ndarray
    charge_elements: np.ndarray
    params: TransmonParams
    vectors: np.ndarray
    n_cut: int

    def __len__(self):
        return self.energies.size

    def transition(self, i: int, j: int) -> float:
        return float(self.energies[j] - self.energies[i])


@dataclass(frozen=True)
class TransitionSet:
    f01: float
    f12: float
    f23: float

    def __post_init__(self):
        if min(self.f01, self.f12, self.f23) <= 0:
            raise ValueError("transition frequencies must be positive")

    @property
    def is_transmon_ordered(self) -> bool:
        return self.f23 < self.f12 < self.f01

    def as_array(self) -> np.ndarray:
        return np.array([self.f01, self.f12, self.f23])


def charge_operators(e_j: float, e_c: float, n_g: float, n_cut: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the static Hamiltonian (Hz) and the charge operator ``n``."""
    n = np.arange(-n_cut, n_cut + 1, dtype=float)
    hop = np.full(n.size - 1, -0.5 * e_j)
    H = np.diag(4.0 * e_c * (n - n_g) ** 2) + np.diag(hop, 1) + np.diag(hop, -1)
    return H, np.diag(n)


def _solve(params: TransmonParams, n_cut: int, n_levels: int):
    H, n_op = charge_operators(params.e_j, params.e_c, params.n_g, n_cut)
    w, v = np.linalg.eigh(H)
    w = w[:n_levels]
    v = v[:, :n_levels]
    return w - w[0], v, n_op


def diagonalize(params: TransmonParams, n_levels: int = DEFAULT_LEVELS) -> Spectrum:
    """Exact eigensystem of the transmon.

    The cutoff starts at ``params.n_cut`` and doubles until the lowest
    ``n_levels`` energies agree between successive cutoffs to 1e-9 of f01.
    """
    if params.ratio < 1:
        warnings.warn(
            f"E_J/E_C = {params.ratio:.3g} < 1 lies outside the transmon regime", RuntimeWarning, stacklevel=2
        )
    size = 2 * params.n_cut + 1
    if n_levels > size:
        raise ValueError(f"n_levels={n_levels} exceeds basis size {size}")
    n_cut = int(params.n_cut)
    e_lo, _, _ = _solve(params, n_cut, n_levels)
    while True:
        if 2 * n_cut > _MAX_N_CUT:
            raise ConvergenceError(f"spectrum not converged at n_cut={n_cut}; parameters look pathological")
        e_hi, v_hi, n_op = _solve(params, 2 * n_cut, n_levels)
        f01 = e_hi[1] if n_levels > 1 else 1.0
        if np.max(np.abs(e_hi - e_lo)) <= _CONVERGENCE_RTOL * abs(f01):
            break
        n_cut *= 2
        e_lo = e_hi
    elements = np.abs(v_hi.T @ n_op @ v_hi)
    return Spectrum(e_hi, elements, params, v_hi, 2 * n_cut)


def transitions(spectrum: Spectrum) -> TransitionSet:
    if len(spectrum) < 4:
        raise ValueError("need at least 4 levels")
    e = spectrum.energies
    return TransitionSet(float(e[1] - e[0]), float(e[2] - e[1]), float(e[3] - e[2]))


def fit_ej_ec(
    measured: TransitionSet,
    n_g: float = 0.25,
    n_cut: int = DEFAULT_N_CUT,
    max_residual: float = 1e-2,
) -> TransmonParams:
    """Find (E_J, E_C) reproducing f01, f12 and f23.

    Starts from the asymptotic transmon relations ``f12 - f01 = -E_C`` and
    ``f01 = sqrt(8 E_J E_C) - E_C``.  Raises :class:`FitError` when the
    optimizer fails or the residual norm exceeds ``max_residual * f01``.
    """
    if not measured.is_transmon_ordered:
        raise ValueError("transitions must satisfy f23 < f12 < f01")
    target = measured.as_array()
    ec0 = measured.f01 - measured.f12
    ej0 = (measured.f01 + ec0) ** 2 / (8 * ec0)

    def residuals(p):
        e_j, e_c = p
        # Convergence of the model spectrum is checked once, at the end.
        e, _, _ = _solve(TransmonParams(e_j, e_c, n_g, n_cut), n_cut, 4)
        return (np.diff(e) - target) / measured.f01

    res = least_squares(
        residuals,
        {"e_j": ej0, "e_c": ec0},
        bounds={"e_j": (ej0 * 1e-3, ej0 * 1e3), "e_c": (ec0 * 1e-3, ec0 * 1e3)},
        xtol=1e-12,
    )
    if not res.converged:
        raise FitError("E_J/E_C fit did not converge")
    if res.residual_norm > max_residual:
        raise FitError(
            f"residual {res.residual_norm:.3g} x f01 exceeds threshold; input may not be a transmon spectrum"
        )
    fitted = TransmonParams(res["e_j"], res["e_c"], n_g, n_cut)
    diagonalize(fitted, 4)
    return fitted
