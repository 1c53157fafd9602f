"""Readout figures of merit and a seeded single-shot generator.

Angles in the IQ plane are measured about an origin, counter-clockwise,
starting from the negative real axis, and wrapped to ``[-pi, pi)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .shots import BlobModel, ShotSet
from .units import HBAR, KB

CHUNK = 1 << 16
MIN_BINS = 16


def snr_empirical(blob: BlobModel) -> float:
    """``|mu_e - mu_g|^2 / (2 sigma^2)``."""
    return blob.separation**2 / (2.0 * blob.sigma**2)


def snr_theory(eta: float, kappa: float, nbar: float, tau: float, theta_eg: float) -> float:
    """``8 eta (2 pi kappa) nbar tau sin^2(theta_eg / 2)``; ``kappa`` in Hz."""
    if not 0.0 <= eta <= 0.5:
        raise ValueError(f"eta={eta} outside [0, 0.5]")
    if kappa < 0 or nbar < 0 or tau < 0:
        raise ValueError("kappa, nbar and tau must be non-negative")
    return 8.0 * eta * (2.0 * math.pi * kappa) * nbar * tau * math.sin(theta_eg / 2.0) ** 2


# Pointer-state angle from the dispersive model, 2 arctan(2 chi / kappa). Kept
# out of the efficiency path: theta_eg always comes from fitted blob geometry.
# def theta_from_chi(chi, kappa): return 2.0 * math.atan(2.0 * abs(chi) / kappa)


@dataclass(frozen=True)
class Efficiency:
    eta: float
    t_sys: float
    snr: float
    theta_eg: float
    unphysical: bool


def efficiency(blob: BlobModel, kappa: float, nbar: float, tau: float, omega_r: float) -> Efficiency:
    """Quantum efficiency and system noise temperature from fitted blobs.

    ``unphysical`` is set when eta exceeds the quantum limit of 0.5, which
    points at a miscalibrated photon number or gain.
    """
    if min(kappa, nbar, tau, omega_r) <= 0:
        raise ValueError("kappa, nbar, tau and omega_r must be positive")
    theta = blob.theta_eg
    geom = math.sin(theta / 2.0) ** 2
    if geom == 0:
        raise ValueError("theta_eg is zero: pointer states are collinear with the origin")
    snr = snr_empirical(blob)
    eta = snr / (8.0 * (2.0 * math.pi * kappa) * nbar * tau * geom)
    t_sys = HBAR * 2.0 * math.pi * omega_r / (KB * eta) if eta > 0 else math.inf
    return Efficiency(eta, t_sys, snr, theta, eta > 0.5)


def iq_angle(z, origin: complex = 0j, reference: float = math.pi):
    """Angle of ``z - origin`` measured from the direction ``reference``, in [-pi, pi)."""
    a = np.angle(np.asarray(z) - origin) - reference
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class AngularHistogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _resolve_origin(shots: ShotSet, origin) -> complex:
    if isinstance(origin, BlobModel):
        return origin.midpoint()
    if origin is None or origin == "zero":
        return 0j
    if origin == "mean":
        return complex(shots.iq.mean())
    return complex(origin)


def angular_histogram(
    shots: ShotSet, origin: complex | str | BlobModel | None = None, bins: int = 360, reference: float = math.pi
) -> AngularHistogram:
    """Histogram of shot angles on ``bins`` equal bins over ``[-pi, pi)``.

    ``origin`` is a point, ``"zero"``, ``"mean"`` or a BlobModel (its
    midpoint).  The default reference direction is the negative real axis.
    """
    if bins < MIN_BINS:
        raise ValueError(f"bins must be >= {MIN_BINS}")
    o = _resolve_origin(shots, origin)
    a = iq_angle(shots.iq, o, reference)
    edges = np.linspace(-math.pi, math.pi, bins + 1)
    idx = np.clip(np.floor((a + math.pi) / (2 * math.pi) * bins).astype(int), 0, bins - 1)
    return AngularHistogram(edges, np.bincount(idx, minlength=bins))


@dataclass(frozen=True)
class AssignmentErrors:
    p_notg_given_g: float
    p_g_given_notg: float
    epsilon_assignment: float
    threshold: float


def _g_mask(hist: AngularHistogram, threshold: float, g_side: str) -> np.ndarray:
    if g_side not in ("left", "right"):
        raise ValueError("g_side must be 'left' or 'right'")
    if not hist.edges[0] <= threshold <= hist.edges[-1]:
        raise ValueError(f"threshold {threshold} outside histogram domain")
    left = hist.centers < threshold
    return left if g_side == "left" else ~left


def assignment_errors(
    hist_g: AngularHistogram, hist_notg: AngularHistogram, threshold: float, g_side: str = "left"
) -> AssignmentErrors:
    """Misassignment probabilities for a single angular threshold.

    Bins whose center lies on the ``g_side`` of ``threshold`` are read as g.
    """
    if not np.array_equal(hist_g.edges, hist_notg.edges):
        raise ValueError("histograms must share binning")
    if hist_g.total == 0 or hist_notg.total == 0:
        raise ValueError("empty histogram")
    mask = _g_mask(hist_g, threshold, g_side)
    p1 = hist_g.counts[~mask].sum() / hist_g.total
    p2 = hist_notg.counts[mask].sum() / hist_notg.total
    return AssignmentErrors(float(p1), float(p2), float(0.5 * (p1 + p2)), float(threshold))


def optimal_threshold(hist_g: AngularHistogram, hist_notg: AngularHistogram, g_side: str = "left") -> AssignmentErrors:
    """Bin edge minimizing the assignment error on calibration histograms."""
    best = None
    for t in hist_g.edges:
        r = assignment_errors(hist_g, hist_notg, float(t), g_side)
        if best is None or r.epsilon_assignment < best.epsilon_assignment:
            best = r
    return best


@dataclass(frozen=True)
class ReadoutScenario:
    """Inputs of the single-shot generator.

    ``populations`` maps state labels to initial probabilities; any missing
    mass goes to ``g``.  ``decay`` maps a state to ``(target, lifetime)``;
    by default ``e`` relaxes to ``g`` with ``t1``.  ``centers`` adds cluster
    centers for states beyond g and e.  Leaked shots land at
    ``leakage_center`` rotated about the IQ origin by a normal angle of
    width ``leakage_spread`` (radians), then receive the usual noise.
    """

    blob: BlobModel
    t1: float
    tau: float
    leakage_fraction: float = 0.0
    leakage_center: complex = 0j
    populations: Mapping[str, float] = field(default_factory=lambda: {"g": 1.0})
    seed: int = 0
    leakage_spread: float = 0.0
    centers: Mapping[str, complex] = field(default_factory=dict)
    decay: Mapping[str, tuple[str, float]] | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.t1 > 0:
            raise ValueError("t1 must be positive")
        if not 0.0 <= self.leakage_fraction <= 1.0:
            raise ValueError("leakage_fraction must lie in [0, 1]")
        p = np.array(list(self.populations.values()), dtype=float)
        if np.any(p < 0) or np.any(p > 1) or p.sum() > 1 + 1e-12:
            raise ValueError("populations must lie in [0, 1] and sum to at most 1")
        for s in self.populations:
            if s not in self.state_centers:
                raise ValueError(f"no center for state {s!r}")
        for s, (target, life) in self.decay_map.items():
            if target not in self.state_centers or s not in self.state_centers:
                raise ValueError(f"decay {s}->{target} references an unknown state")
            if not life > 0:
                raise ValueError("decay lifetimes must be positive")

    @property
    def state_centers(self) -> dict[str, complex]:
        return {"g": complex(self.blob.mu_g), "e": complex(self.blob.mu_e), **{k: complex(v) for k, v in self.centers.items()}}

    @property
    def decay_map(self) -> dict[str, tuple[str, float]]:
        return dict(self.decay) if self.decay is not None else {"e": ("g", self.t1)}

    def with_populations(self, populations: Mapping[str, float]) -> "ReadoutScenario":
        from dataclasses import replace

        return replace(self, populations=dict(populations))


def _state_table(scenario: ReadoutScenario):
    names = list(scenario.state_centers)
    probs = np.array([scenario.populations.get(s, 0.0) for s in names], dtype=float)
    probs[names.index("g")] += max(0.0, 1.0 - probs.sum())
    return names, probs / probs.sum()


def _simulate_chunk(scenario: ReadoutScenario, n: int, stream: int, chunk: int, states=None):
    rng = np.random.default_rng(np.random.SeedSequence(scenario.seed, spawn_key=(stream, chunk)))
    names, probs = _state_table(scenario)
    centers = np.array([scenario.state_centers[s] for s in names])
    # Draw every variate even when unused so the stream layout is fixed.
    u_state = rng.random(n)
    u_decay = rng.random(n)
    u_time = rng.random(n)
    u_leak = rng.random(n)
    leak_angle = rng.standard_normal(n)
    noise = rng.standard_normal((n, 2))

    if states is None:
        idx = np.minimum(np.searchsorted(np.cumsum(probs), u_state, side="right"), len(names) - 1)
    else:
        idx = np.asarray(states, dtype=int)
    z = centers[idx].copy()
    final = idx.copy()
    for s, (target, life) in scenario.decay_map.items():
        k, t = names.index(s), names.index(target)
        hit = (idx == k) & (u_decay < -math.expm1(-scenario.tau / life))
        # Decay at uniform time: the pointer averages the two centers by dwell time.
        frac = u_time[hit]
        z[hit] = frac * centers[k] + (1.0 - frac) * centers[t]
        final[hit] = t
    leak = u_leak < scenario.leakage_fraction
    z[leak] = scenario.leakage_center * np.exp(1j * scenario.leakage_spread * leak_angle[leak])
    z = z + scenario.blob.sigma * (noise[:, 0] + 1j * noise[:, 1])
    return z, final, leak


def _run_chunks(scenario, n, stream, workers, states=None):
    bounds = [(c, c * CHUNK, min(n, (c + 1) * CHUNK)) for c in range(-(-n // CHUNK))]

    def job(b):
        c, lo, hi = b
        return _simulate_chunk(scenario, hi - lo, stream, c, None if states is None else states[lo:hi])

    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    return tuple(np.concatenate(p) for p in zip(*parts))


def simulate_shots(
    scenario: ReadoutScenario, n: int, label: str = "equilibrium", stream: int = 0, workers: int | None = None
) -> ShotSet:
    """Draw ``n`` shots.

    Shots are generated in fixed-size chunks, each from its own
    ``SeedSequence(seed, spawn_key=(stream, chunk))``, so the result depends
    only on ``(seed, stream, n)`` and not on ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    z, _, _ = _run_chunks(scenario, n, stream, workers)
    return ShotSet(z, label)


@dataclass(frozen=True)
class RepeatedMeasurement:
    second: ShotSet
    n_first: int
    acceptance: float


def repeated_measurement(
    scenario: ReadoutScenario,
    n_conditioned: int,
    prepare: str = "g",
    gate_sigmas: float = 1.0,
    stream: int = 1,
    workers: int | None = None,
    max_first: int = 10**8,
) -> RepeatedMeasurement:
    """Emulate post-selected back-to-back readouts.

    The first readout uses ``scenario.populations``.  Shots landing within
    ``gate_sigmas`` of ``mu_g`` are kept.  Kept shots whose first outcome
    left the qubit in g are moved to ``prepare`` by an ideal pulse; others
    stay where they ended.  Leaked first shots are always rejected.  The second readout then starts from that state.
    """
    names = list(scenario.state_centers)
    if prepare not in names:
        raise ValueError(f"unknown state {prepare!r}")
    g, target = names.index("g"), names.index(prepare)
    mu_g, sigma = complex(scenario.blob.mu_g), scenario.blob.sigma
    kept: list[np.ndarray] = []
    n_kept = n_first = 0
    batch = max(CHUNK, 4 * n_conditioned)
    round_ = 0
    while n_kept < n_conditioned:
        if n_first >= max_first:
            raise RuntimeError("post-selection acceptance too low")
        z, final, leak = _run_chunks(scenario, batch, stream + 2 * round_, workers)
        # A leaked first shot is never a valid ground-state herald.
        ok = (np.abs(z - mu_g) < gate_sigmas * sigma) & ~leak
        after = final[ok]
        kept.append(after)
        n_kept += after.size
        n_first += batch
        round_ += 1
    states = np.concatenate(kept)[:n_conditioned]
    states = np.where(states == g, target, states)
    z2, _, _ = _run_chunks(scenario, n_conditioned, stream + 2 * round_ + 1, workers, states)
    return RepeatedMeasurement(ShotSet(z2, prepare), n_first, n_kept / n_first)


def scenario_from_theory(
    eta: float,
    kappa: float,
    nbar: float,
    tau: float,
    theta_eg: float,
    sigma: float = 1.0,
    t1: float = math.inf,
    phase: float | None = None,
    seed: int = 0,
    **extra,
) -> ReadoutScenario:
    """Scenario whose blobs realize the theoretical SNR at the given geometry.

    Both centers sit on a circle about the IQ origin, separated by
    ``theta_eg``, with the chord length fixed by the SNR.  By default the
    pair straddles the negative real axis with g at the smaller angle.
    """
    if phase is None:
        phase = math.pi - 0.5 * theta_eg
    snr = snr_theory(eta, kappa, nbar, tau, theta_eg)
    sep = sigma * math.sqrt(2.0 * snr)
    radius = sep / (2.0 * math.sin(theta_eg / 2.0))
    blob = BlobModel(radius * np.exp(1j * phase), radius * np.exp(1j * (phase + theta_eg)), sigma)
    return ReadoutScenario(blob, t1 if math.isfinite(t1) else 1e300, tau, seed=seed, **extra)
