"""Single-shot IQ records and the two-Gaussian blob description."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

LABELS = ("g", "e", "f", "h", "equilibrium")


class IqShot(NamedTuple):
    i: float
    q: float


@dataclass(frozen=True)
class ShotSet:
    """Demodulated shots stored as a complex array ``i + 1j*q``."""

    iq: np.ndarray
    label: str = "equilibrium"

    def __post_init__(self):
        iq = np.asarray(self.iq, dtype=complex).ravel()
        if iq.size == 0:
            raise ValueError("ShotSet is empty")
        if not np.all(np.isfinite(iq)):
            raise ValueError("shots must be finite")
        object.__setattr__(self, "iq", iq)

    def __len__(self):
        return self.iq.size

    def __iter__(self):
        for z in self.iq:
            yield IqShot(z.real, z.imag)

    @classmethod
    def from_shots(cls, shots: Iterable[IqShot], label: str = "equilibrium") -> "ShotSet":
        return cls(np.array([complex(s.i, s.q) for s in shots]), label)

    def rotated(self, angle: float, origin: complex = 0j) -> "ShotSet":
        return ShotSet(origin + (self.iq - origin) * np.exp(1j * angle), self.label)


@dataclass(frozen=True)
class BlobModel:
    """Centers of the |g> and |e> clusters and their common width."""

    mu_g: complex
    mu_e: complex
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def theta_eg(self) -> float:
        """Angle between the vectors mu_e and mu_g, in [0, pi]."""
        a, b = complex(self.mu_g), complex(self.mu_e)
        if a == 0 or b == 0:
            return 0.0
        return abs(float(np.angle(b * np.conj(a))))

    @property
    def separation(self) -> float:
        return abs(complex(self.mu_e) - complex(self.mu_g))

    def midpoint(self) -> complex:
        return 0.5 * (complex(self.mu_g) + complex(self.mu_e))


def write_shots_csv(path: str | Path, sets: Iterable[ShotSet]) -> None:
    """Write shots as ``i,q,label`` rows; floats use repr so reading back is exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "q", "label"])
        for s in sets:
            for z in s.iq:
                w.writerow([repr(float(z.real)), repr(float(z.imag)), s.label])


def read_shots_csv(path: str | Path) -> dict[str, ShotSet]:
    """Read an ``i,q[,label]`` CSV into one ShotSet per label."""
    groups: dict[str, list[complex]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"i", "q"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain i,q")
        for row in reader:
            label = row.get("label") or "equilibrium"
            groups.setdefault(label, []).append(complex(float(row["i"]), float(row["q"])))
    return {k: ShotSet(np.array(v), k) for k, v in groups.items()}


def chord_angle(separation: float, radius: float) -> float:
    """Opening angle of a chord of given length on a circle of given radius."""
    return 2.0 * math.asin(min(1.0, separation / (2.0 * radius)))
