"""Physical constants and unit handling.

Frequencies are ordinary frequencies in Hz throughout the package (``chi``
means chi/2pi, and so on).  Conversion to angular units happens only where a
formula mixes rates with times; see ``rate_to_lifetime``.
"""

from __future__ import annotations

import math
import re

from scipy import constants as _c

from .errors import ConfigError

H = _c.h
HBAR = _c.hbar
KB = _c.k
C_LIGHT = _c.c

_SCALES = {
    "frequency": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "temperature": {"k": 1.0, "mk": 1e-3},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6},
    "attenuation": {"db": 1.0},
}
_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?[0-9]+)?)\s*([A-Za-zµ]+)\s*$")


def rate_to_lifetime(rate_hz: float) -> float:
    """Convert a rate quoted in /2pi units (Hz) to a lifetime in seconds."""
    if rate_hz == 0:
        return math.inf
    return 1.0 / (2.0 * math.pi * rate_hz)


def lifetime_to_rate(lifetime_s: float) -> float:
    """Inverse of :func:`rate_to_lifetime`."""
    if math.isinf(lifetime_s):
        return 0.0
    return 1.0 / (2.0 * math.pi * lifetime_s)


def parse_quantity(value, kind: str, path: str = "<value>") -> float:
    """Parse a unit-tagged quantity into SI.

    Accepts ``"15.4 GHz"`` or ``{"value": 15.4, "unit": "GHz"}``.  Bare
    numbers are rejected: unit tags are mandatory for dimensional fields.
    """
    scales = _SCALES[kind]
    if isinstance(value, dict):
        if "value" not in value or "unit" not in value:
            raise ConfigError(path, "expected keys 'value' and 'unit'")
        number, unit = value["value"], str(value["unit"])
    elif isinstance(value, str):
        m = _QUANTITY_RE.match(value)
        if m is None:
            raise ConfigError(path, f"cannot parse {value!r} as a {kind} with unit")
        number, unit = m.group(1), m.group(2)
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        raise ConfigError(path, f"missing unit tag for {kind} (got bare number {value})")
    else:
        raise ConfigError(path, f"unsupported {kind} value {value!r}")
    try:
        scale = scales[unit.lower()]
    except KeyError:
        raise ConfigError(path, f"unknown {kind} unit {unit!r}; expected one of {sorted(scales)}") from None
    try:
        return float(number) * scale
    except (TypeError, ValueError):
        raise ConfigError(path, f"non-numeric value {number!r}") from None
