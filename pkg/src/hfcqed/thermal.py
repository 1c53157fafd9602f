"""Thermal photon occupation through a cascade of cold attenuators."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .rates import bose_einstein

# Nominal plate temperatures of a dilution refrigerator input line (K), warm to cold.
STANDARD_TEMPERATURES = (4.0, 0.8, 0.1, 0.01)


@dataclass(frozen=True)
class AttenuationProfile:
    """Tabulated attenuation (dB) versus frequency (Hz); linear interpolation, no extrapolation."""

    frequency: np.ndarray
    attenuation_db: np.ndarray
    source: str | None = None

    def __post_init__(self):
        f = np.asarray(self.frequency, dtype=float)
        a = np.asarray(self.attenuation_db, dtype=float)
        if f.ndim != 1 or f.shape != a.shape or f.size < 2:
            raise ValueError("profile needs at least two (frequency, dB) points")
        if np.any(np.diff(f) <= 0):
            raise ValueError("profile frequencies must be strictly increasing")
        if np.any(a < 0):
            raise ValueError("attenuation must be non-negative")
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "attenuation_db", a)

    def __call__(self, f: float) -> float:
        if f < self.frequency[0] or f > self.frequency[-1]:
            raise ValueError(
                f"{f:.6g} Hz outside profile range [{self.frequency[0]:.6g}, {self.frequency[-1]:.6g}] Hz"
            )
        return float(np.interp(f, self.frequency, self.attenuation_db))

    @classmethod
    def from_csv(cls, path: str | Path) -> "AttenuationProfile":
        """Read a ``frequency_hz,attenuation_db`` table (header required)."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"frequency_hz", "attenuation_db"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: header must contain frequency_hz,attenuation_db")
            rows = [(float(r["frequency_hz"]), float(r["attenuation_db"])) for r in reader]
        f, a = np.array(rows).T
        return cls(f, a, str(path))


Attenuation = Union[float, AttenuationProfile]


@dataclass(frozen=True)
class Stage:
    temperature: float
    attenuation: Attenuation = 0.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("stage temperature must be positive")
        if not isinstance(self.attenuation, AttenuationProfile) and self.attenuation < 0:
            raise ValueError("attenuation must be non-negative")

    def attenuation_db(self, f: float) -> float:
        if isinstance(self.attenuation, AttenuationProfile):
            return self.attenuation(f)
        return float(self.attenuation)


@dataclass(frozen=True)
class AttenuationChain:
    source_temperature: float
    stages: tuple[Stage, ...]

    def __post_init__(self):
        if self.source_temperature <= 0:
            raise ValueError("source temperature must be positive")
        if not self.stages:
            raise ValueError("chain needs at least one stage")
        object.__setattr__(self, "stages", tuple(self.stages))

    def with_stage(self, index: int, **changes) -> "AttenuationChain":
        """Copy of the chain with one stage's fields replaced."""
        stages = list(self.stages)
        stages[index] = dataclasses.replace(stages[index], **changes)
        return dataclasses.replace(self, stages=tuple(stages))


def standard_chain(attenuations_db: Sequence[Attenuation], source_temperature: float = 300.0) -> AttenuationChain:
    """Four-plate template (4 K, 800 mK, 100 mK, 10 mK) with caller-chosen attenuation."""
    if len(attenuations_db) != len(STANDARD_TEMPERATURES):
        raise ValueError("give one attenuation per plate: 4 K, 800 mK, 100 mK, 10 mK")
    return AttenuationChain(
        source_temperature, tuple(Stage(t, a) for t, a in zip(STANDARD_TEMPERATURES, attenuations_db))
    )


def stage_step(n_in: float, stage: Stage, f: float) -> float:
    """Occupation leaving a matched attenuator: ``L n_in + (1 - L) n_th``."""
    if n_in < 0:
        raise ValueError("n_in must be non-negative")
    A = stage.attenuation_db(f)
    if np.isinf(A):
        return bose_einstein(f, stage.temperature)
    L = 10.0 ** (-A / 10.0)
    return L * n_in + (1.0 - L) * bose_einstein(f, stage.temperature)


def cascade(chain: AttenuationChain, f: float) -> float:
    n = bose_einstein(f, chain.source_temperature)
    for stage in chain.stages:
        n = stage_step(n, stage, f)
    return float(n)


@dataclass
class SweepTable:
    frequency: np.ndarray
    columns: dict[str, np.ndarray]

    def relative_change(self, variant: str, baseline: str = "baseline") -> np.ndarray:
        base = self.columns[baseline]
        return (self.columns[variant] - base) / base

    def rows(self):
        names = list(self.columns)
        for k, f in enumerate(self.frequency):
            yield {"frequency_hz": float(f), **{n: float(self.columns[n][k]) for n in names}}


ChainEdit = Union[AttenuationChain, Callable[[AttenuationChain], AttenuationChain]]


def chain_sweep(
    chain: AttenuationChain,
    f_grid: Sequence[float],
    variants: Mapping[str, ChainEdit] | None = None,
) -> SweepTable:
    """Sample-stage occupation over frequency for the chain and edited variants.

    A variant is either a complete replacement chain or a function mapping
    the baseline chain to an edited copy (e.g.
    ``lambda c: c.with_stage(-1, temperature=0.1)``).
    """
    grid = np.asarray(f_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("frequency grid is empty")
    chains = {"baseline": chain}
    for name, edit in (variants or {}).items():
        if name == "baseline":
            raise ValueError("'baseline' is reserved")
        chains[name] = edit(chain) if callable(edit) else edit
    columns = {name: np.array([cascade(c, f) for f in grid]) for name, c in chains.items()}
    return SweepTable(grid, columns)
