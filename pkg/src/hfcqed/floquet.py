"""Floquet quasienergies of a charge-driven transmon.

The drive couples through the charge operator::

    H(t) = H0 + A cos(2 pi f_d t) (n - n_g)

with ``A`` and all energies in Hz.  The static part is shifted so its
ground energy is zero, which only changes a global phase.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import schur
from scipy.optimize import brentq, linear_sum_assignment

from .errors import BracketError, ConvergenceError
from .transmon import TransmonParams, charge_operators

DEFAULT_STEPS = 512
MIN_STEPS = 64
MAX_STEPS = 1 << 14
PHASE_TOL = 1e-8  # eigenphase change under step doubling, in units of f_d
UNITARY_TOL = 1e-9
DEGENERACY_TOL = 1e-12
CONFIDENCE_FLOOR = 0.5
N_BRANCHES = 12
MIN_HYBRIDIZATION = 0.25

_GL = math.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class DriveConfig:
    """Drive amplitude ``A`` (the ``2 g sqrt(n)`` coefficient) and frequency, both in Hz."""

    amplitude: float
    omega_d: float

    def __post_init__(self):
        if not self.omega_d > 0:
            raise ValueError("omega_d must be positive")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be non-negative")

    @classmethod
    def from_photons(cls, g: float, nbar: float, omega_d: float) -> "DriveConfig":
        return cls(2.0 * g * math.sqrt(nbar), omega_d)


def _operators(params: TransmonParams):
    H0, n_op = charge_operators(params.e_j, params.e_c, params.n_g, params.n_cut)
    H0 = H0 - np.linalg.eigvalsh(H0)[0] * np.eye(H0.shape[0])
    return H0, n_op - params.n_g * np.eye(H0.shape[0])


def _step(H1: np.ndarray, H2: np.ndarray, h: float) -> np.ndarray:
    # Fourth-order Magnus step; K is Hermitian and exp(-i 2 pi K) is built from its eigensystem.
    K = 0.5 * h * (H1 + H2) + 1j * (math.sqrt(3.0) / 12.0) * 2.0 * math.pi * h * h * (H1 @ H2 - H2 @ H1)
    w, v = np.linalg.eigh(K)
    return (v * np.exp(-2j * math.pi * w)) @ v.conj().T


def _half_period(H0, V, drive: DriveConfig, n_steps: int, scheme: str) -> np.ndarray:
    T = 1.0 / drive.omega_d
    half = n_steps // 2
    h = 0.5 * T / half
    U = np.eye(H0.shape[0], dtype=complex)
    w = 2.0 * math.pi * drive.omega_d
    for k in range(half):
        t0 = k * h
        if scheme == "magnus4":
            H1 = H0 + drive.amplitude * math.cos(w * (t0 + (0.5 - _GL) * h)) * V
            H2 = H0 + drive.amplitude * math.cos(w * (t0 + (0.5 + _GL) * h)) * V
            U = _step(H1, H2, h) @ U
        else:
            Hm = H0 + drive.amplitude * math.cos(w * (t0 + 0.5 * h)) * V
            U = _step(Hm, Hm, h) @ U
    return U


def _propagator(H0, V, drive, n_steps, scheme):
    Uh = _half_period(H0, V, drive, n_steps, scheme)
    # H(T - t) = H(t) and H is real, so the second half is the transpose of the first.
    return Uh.T @ Uh


def _phase_shift(U1: np.ndarray, U2: np.ndarray) -> float:
    """Largest eigenphase displacement between two unitaries, in cycles."""
    l1 = np.linalg.eigvals(U1)
    l2 = np.linalg.eigvals(U2)
    d = np.abs(np.angle(l2[:, None] * np.conj(l1)[None, :]))
    return float(np.max(np.min(d, axis=1)) / (2.0 * math.pi))


def unitarity_defect(U: np.ndarray) -> float:
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), ord=2))


def period_propagator(
    params: TransmonParams,
    drive: DriveConfig,
    n_steps: int = DEFAULT_STEPS,
    scheme: str = "magnus4",
    check_convergence: bool = True,
    return_steps: bool = False,
):
    """One-period propagator ``U(T, 0)`` in the charge basis.

    With ``check_convergence`` the step count doubles until no eigenphase
    moves by more than ``PHASE_TOL`` of a drive quantum, and the finer
    propagator is returned.  ``scheme`` is ``"magnus4"`` (two-point
    Gauss-Legendre Magnus) or ``"midpoint"`` (piecewise-constant).
    """
    if n_steps < MIN_STEPS or n_steps % 2:
        raise ValueError(f"n_steps must be an even integer >= {MIN_STEPS}")
    if scheme not in ("magnus4", "midpoint"):
        raise ValueError("scheme must be 'magnus4' or 'midpoint'")
    H0, V = _operators(params)
    U = _propagator(H0, V, drive, n_steps, scheme)
    if check_convergence and drive.amplitude > 0:
        while True:
            if 2 * n_steps > MAX_STEPS:
                raise ConvergenceError(f"propagator not converged at {n_steps} steps")
            U2 = _propagator(H0, V, drive, 2 * n_steps, scheme)
            shift = _phase_shift(U, U2)
            U, n_steps = U2, 2 * n_steps
            if shift < PHASE_TOL:
                break
    defect = unitarity_defect(U)
    if defect > UNITARY_TOL:
        raise ConvergenceError(f"unitarity defect {defect:.2e}")
    return (U, n_steps) if return_steps else U


def fold(e, omega_d: float):
    """Map energies into ``[-omega_d/2, omega_d/2)``."""
    return (np.asarray(e, dtype=float) + 0.5 * omega_d) % omega_d - 0.5 * omega_d


def floquet_modes(U: np.ndarray, omega_d: float) -> tuple[np.ndarray, np.ndarray]:
    """Quasienergies (Hz, canonical window) and Floquet modes at t = 0 as columns."""
    defect = unitarity_defect(U)
    if defect > UNITARY_TOL:
        raise ValueError(f"propagator is not unitary (defect {defect:.2e})")
    T, Z = schur(U, output="complex")
    lam = np.diag(T)
    eps = fold(-np.angle(lam) * omega_d / (2.0 * math.pi), omega_d)
    order = np.argsort(eps)
    eps, Z = eps[order], Z[:, order]
    gaps = np.diff(np.concatenate([eps, [eps[0] + omega_d]]))
    if eps.size > 1 and np.min(gaps) < DEGENERACY_TOL * omega_d:
        warnings.warn("degenerate quasienergies: modes may be mixed", RuntimeWarning, stacklevel=2)
    return eps, Z


def quasienergies(U: np.ndarray, omega_d: float) -> np.ndarray:
    return floquet_modes(U, omega_d)[0]


def _static_states(params: TransmonParams, n: int):
    H0, _ = _operators(params)
    w, v = np.linalg.eigh(H0)
    return w[:n], v[:, :n]


def _match_static(Z: np.ndarray, static: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Assign one Floquet mode to each static state by maximal total overlap."""
    ov = np.abs(static.conj().T @ Z) ** 2
    rows, cols = linear_sum_assignment(-ov)
    return cols[np.argsort(rows)], ov[rows, cols][np.argsort(rows)]


def stark_shift(params: TransmonParams, drive: DriveConfig, n_steps: int = DEFAULT_STEPS) -> float:
    """Drive-induced change of the 0-1 quasienergy splitting, in Hz."""
    U = period_propagator(params, drive, n_steps)
    eps, Z = floquet_modes(U, drive.omega_d)
    w, static = _static_states(params, 2)
    idx, _ = _match_static(Z, static)
    d = eps[idx[1]] - eps[idx[0]] - (w[1] - w[0])
    return float(fold(d, drive.omega_d))


def calibrate_drive_amplitude(
    params: TransmonParams,
    omega_d: float,
    target_stark: float,
    n_steps: int = DEFAULT_STEPS,
    rtol: float = 1e-3,
    a_start: float | None = None,
    max_amplitude: float | None = None,
) -> float:
    """Drive amplitude whose 0-1 Stark shift has magnitude ``target_stark`` (Hz).

    The amplitude grows geometrically from ``a_start`` until the shift
    magnitude passes the target, then Brent's method refines it.
    """
    if target_stark < 0:
        raise ValueError("target_stark must be non-negative")
    if target_stark == 0:
        return 0.0
    a_lo = 0.0
    a = a_start if a_start is not None else 0.05 * omega_d
    a_max = max_amplitude if max_amplitude is not None else 5.0 * omega_d

    def excess(amp):
        return abs(stark_shift(params, DriveConfig(amp, omega_d), n_steps)) - target_stark

    while excess(a) < 0:
        a_lo = a
        a *= 2.0
        if a > a_max:
            raise BracketError(f"no amplitude below {a_max:.3g} Hz reaches a {target_stark:.3g} Hz Stark shift")
    return float(brentq(excess, a_lo, a, rtol=rtol, xtol=1e-6 * a))


@dataclass
class QuasienergySweep:
    """Tracked quasienergy branches over offset charge.

    ``branches[k]`` follows the Floquet mode that starts on static level
    ``k`` at the first grid point.  ``overlaps[k, m]`` is the squared
    overlap between that branch's modes at points ``m - 1`` and ``m``
    (1 at ``m = 0``); ``flags`` marks points below ``CONFIDENCE_FLOOR``.
    ``all_eps`` and ``modes`` keep every quasienergy and mode per point.
    """

    ng_grid: np.ndarray
    branches: np.ndarray
    overlaps: np.ndarray
    vectors: np.ndarray
    all_eps: np.ndarray
    modes: np.ndarray
    params: TransmonParams
    drive: DriveConfig
    n_steps: int
    flags: np.ndarray = field(init=False)

    def __post_init__(self):
        self.flags = self.overlaps < CONFIDENCE_FLOOR

    @property
    def n_branches(self) -> int:
        return self.branches.shape[0]

    def rows(self):
        for k in range(self.n_branches):
            for m, ng in enumerate(self.ng_grid):
                yield {
                    "ng": float(ng),
                    "branch_index": k,
                    "quasienergy_hz": float(self.branches[k, m]),
                    "overlap_confidence": float(self.overlaps[k, m]),
                }


def _modes_at(params, drive, ng, n_steps):
    p = dataclasses.replace(params, n_g=float(ng))
    U = period_propagator(p, drive, n_steps, check_convergence=False)
    return floquet_modes(U, drive.omega_d)


def _track(results, start_vectors, start_eps=None):
    """Serial overlap tracking of ``len(start_vectors.T)`` branches."""
    n_b = start_vectors.shape[1]
    m = len(results)
    eps_out = np.empty((n_b, m))
    ovl = np.ones((n_b, m))
    vecs = np.empty((m, start_vectors.shape[0], n_b), dtype=complex)
    prev = start_vectors
    for i, (eps, Z) in enumerate(results):
        ov = np.abs(prev.conj().T @ Z) ** 2
        rows, cols = linear_sum_assignment(-ov)
        cols = cols[np.argsort(rows)]
        eps_out[:, i] = eps[cols]
        ovl[:, i] = ov[np.arange(n_b), cols]
        prev = Z[:, cols]
        vecs[i] = prev
    return eps_out, ovl, vecs


def sweep_ng(
    params: TransmonParams,
    drive: DriveConfig,
    ng_grid: Sequence[float],
    n_branches: int = N_BRANCHES,
    n_steps: int | None = None,
    workers: int | None = None,
) -> QuasienergySweep:
    """Quasienergies on an offset-charge grid with adiabatic branch tracking.

    Propagators are independent and may run in parallel; tracking is a
    serial pass afterwards, so the result does not depend on ``workers``.
    The step count is converged once at the first grid point.
    """
    grid = np.asarray(ng_grid, dtype=float)
    if grid.size < 2:
        raise ValueError("grid needs at least two points")
    p0 = dataclasses.replace(params, n_g=float(grid[0]))
    if n_steps is None:
        _, n_steps = period_propagator(p0, drive, DEFAULT_STEPS, return_steps=True)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(lambda ng: _modes_at(params, drive, ng, n_steps), grid))
    else:
        results = [_modes_at(params, drive, ng, n_steps) for ng in grid]
    _, static = _static_states(p0, n_branches)
    idx, _ = _match_static(results[0][1], static)
    start = results[0][1][:, idx]
    eps, ovl, vecs = _track(results, start)
    ovl[:, 0] = np.abs(np.einsum("ij,ij->j", static.conj(), start)) ** 2
    all_eps = np.array([r[0] for r in results])
    modes = np.array([r[1] for r in results])
    sweep = QuasienergySweep(grid, eps, ovl, vecs, all_eps, modes, params, drive, n_steps)
    if np.any(sweep.flags[:, 1:]):
        warnings.warn("ambiguous branch assignment at some grid points (see flags)", RuntimeWarning, stacklevel=2)
    return sweep


def _mod_distance(a, b, omega_d):
    return np.abs(fold(np.asarray(a) - np.asarray(b), omega_d))


@dataclass(frozen=True)
class Anticrossing:
    """Splitting between the Floquet modes carrying static levels ``i`` and ``j``.

    ``hybridization`` is the smaller share of the partner level in either
    mode at the minimum: near 0 for detuned levels, near 0.5 at a resonance.
    """

    i: int
    j: int
    gap: float
    ng_at_min: float
    hybridization: float
    refined: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _pair_splitting(params, ng, eps, Z, i, j, omega_d):
    _, static = _static_states(dataclasses.replace(params, n_g=float(ng)), max(i, j) + 1)
    w = np.abs(static[:, [i, j]].conj().T @ Z) ** 2
    rows, cols = linear_sum_assignment(-w)
    a, b = cols[np.argsort(rows)]
    share_a = w[1, a] / (w[0, a] + w[1, a])
    share_b = w[0, b] / (w[0, b] + w[1, b])
    return float(_mod_distance(eps[a], eps[b], omega_d)), float(min(share_a, share_b))


def anticrossing_gap(
    sweep: QuasienergySweep, i: int, j: int, refine: int = 10, min_hybridization: float = MIN_HYBRIDIZATION
) -> Anticrossing:
    """Minimal splitting between the modes carrying static levels ``i`` and ``j``.

    At each offset charge the two Floquet modes with the largest weight on
    ``|i>`` and ``|j>`` (one each) are selected, so the result does not
    depend on branch tracking.  On a grid spanning exactly one period the
    ends wrap; otherwise the coarse minimum must be interior.  A window of
    one grid step on either side is then resampled ``refine`` times finer.
    If the two modes at the minimum mix by less than ``min_hybridization``
    the levels never reach resonance and ``ValueError`` is raised; pass 0
    to get the plain minimal splitting.
    """
    n = sweep.modes.shape[1]
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ValueError(f"levels must be distinct indices below {n}")
    grid = sweep.ng_grid
    wd = sweep.drive.omega_d
    coarse = [
        _pair_splitting(sweep.params, ng, sweep.all_eps[m], sweep.modes[m], i, j, wd) for m, ng in enumerate(grid)
    ]
    d = np.array([c[0] for c in coarse])
    m = int(np.argmin(d))
    periodic = abs(grid[-1] - grid[0] - 1.0) < 1e-9
    if not periodic and (m == 0 or m == d.size - 1):
        raise ValueError(f"no interior minimum of the ({i},{j}) splitting on this grid")
    best = (d[m], float(grid[m]), coarse[m][1])
    if refine > 1:
        step = grid[1] - grid[0] if m == 0 else grid[m] - grid[m - 1]
        for ng in grid[m] + np.linspace(-step, step, 2 * refine + 1):
            eps, Z = _modes_at(sweep.params, sweep.drive, ng, sweep.n_steps)
            gap, hyb = _pair_splitting(sweep.params, ng, eps, Z, i, j, wd)
            if gap < best[0]:
                best = (gap, float(ng), hyb)
    if best[2] < min_hybridization:
        raise ValueError(
            f"levels {i} and {j} are not resonant: closest approach {best[0]:.4g} Hz "
            f"with mixing {best[2]:.3g} < {min_hybridization}"
        )
    ng_min = best[1] if not periodic else float((best[1] - grid[0]) % 1.0 + grid[0])
    return Anticrossing(i, j, float(best[0]), ng_min, best[2], refine > 1)


def min_gap_to_others(sweep: QuasienergySweep, i: int) -> float:
    """Smallest distance from branch ``i`` to any other tracked branch over the grid."""
    others = [k for k in range(sweep.n_branches) if k != i]
    return float(
        min(np.min(_mod_distance(sweep.branches[i], sweep.branches[k], sweep.drive.omega_d)) for k in others)
    )


def write_sweep_csv(path: str | Path, sweep: QuasienergySweep) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, ["ng", "branch_index", "quasienergy_hz", "overlap_confidence"])
        w.writeheader()
        for row in sweep.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_anticrossings_json(path: str | Path, crossings: Sequence[Anticrossing], drive: DriveConfig) -> None:
    doc = {"drive": dataclasses.asdict(drive), "anticrossings": [c.to_dict() for c in crossings]}
    Path(path).write_text(json.dumps(doc, indent=2))
