"""Project configuration: YAML with mandatory unit tags, resolved to SI.

Dimensional fields take ``"15.4 GHz"`` or ``{value: 15.4, unit: GHz}``;
dimensionless fields (``n_g``, ``eta``, ``nbar``, counts) are bare numbers.
Relative data paths resolve against the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .units import parse_quantity

# Per-section field kinds; "number", "int", "path" and "str" are unitless.
DEVICE_FIELDS = {
    "name": "str",
    "f_cav": "frequency",
    "f01": "frequency",
    "f12": "frequency",
    "f23": "frequency",
    "e_j": "frequency",
    "e_c": "frequency",
    "n_g": "number",
    "n_cut": "int",
    "chi": "frequency",
    "kappa": "frequency",
    "g": "frequency",
    "eta": "number",
    "t1": "time",
    "t2e": "time",
    "t2star": "time",
}

SECTION_FIELDS: dict[str, dict[str, str]] = {
    "chi_scan": {
        "start": "frequency",
        "stop": "frequency",
        "points": "int",
        "g0": "frequency",
        "omega0": "frequency",
        "n_levels": "int",
        "guard": "frequency",
    },
    "ckp": {"trace_g": "path", "trace_e": "path"},
    "rates": {
        "nbar": "number",
        "temperature": "temperature",
        "rabi": "frequency",
        "t_rho": "time",
    },
    "thermal_chain": {
        "source_temperature": "temperature",
        "start": "frequency",
        "stop": "frequency",
        "points": "int",
    },
    "floquet": {
        "omega_d": "frequency",
        "ng_points": "int",
        "n_branches": "int",
        "n_steps": "int",
        "workers": "int",
        "pair": "list",
        "stark": "list",
        "amplitude": "frequency",
    },
    "readout": {
        "nbar": "number",
        "tau": "time",
        "sigma": "number",
        "theta_eg": "number",
        "n_shots": "int",
        "leakage_fraction": "number",
        "leakage_spread": "number",
        "n_conditioned": "int",
        "bins": "int",
    },
    "coherence": {
        "t1": "path",
        "echo": "path",
        "ramsey": "path",
        "spin_lock": "path",
        "n_beats": "int",
    },
}

STAGE_FIELDS = {"temperature": "temperature", "attenuation": "attenuation", "profile": "path"}


@dataclass
class ProjectConfig:
    path: Path
    device: dict[str, Any]
    sections: dict[str, dict[str, Any]]
    stages: list[dict[str, Any]] = field(default_factory=list)
    variants: dict[str, dict[str, Any]] = field(default_factory=dict)
    output_dir: str | None = None

    def section(self, name: str) -> dict[str, Any]:
        return self.sections.get(name, {})

    def require(self, where: str, key: str):
        block = self.device if where == "device" else self.section(where)
        if key not in block:
            raise ConfigError(f"{where}.{key}", "required field missing")
        return block[key]

    def to_dict(self) -> dict[str, Any]:
        def plain(v):
            return str(v) if isinstance(v, Path) else v

        return {
            "path": str(self.path),
            "device": {k: plain(v) for k, v in self.device.items()},
            "sections": {s: {k: plain(v) for k, v in d.items()} for s, d in self.sections.items()},
            "stages": [{k: plain(v) for k, v in st.items()} for st in self.stages],
            "variants": self.variants,
            "output_dir": self.output_dir,
        }


def _resolve(value, kind: str, path: str, base: Path):
    if kind == "str":
        return str(value)
    if kind == "list":
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a dimensionless number, got {value!r}")
        return float(value)
    if kind == "path":
        p = Path(value)
        p = p if p.is_absolute() else base / p
        if not p.is_file():
            raise ConfigError(path, f"file not found: {p}")
        return p
    if kind == "attenuation" and value in ("inf", float("inf")):
        return float("inf")
    return parse_quantity(value, kind, path)


def _block(raw, fields: dict[str, str], prefix: str, base: Path) -> dict[str, Any]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(prefix, "expected a mapping")
    out = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"{prefix}.{key}", "unknown field")
        out[key] = _resolve(value, fields[key], f"{prefix}.{key}", base)
    return out


def parse_config(raw: dict, base: Path, path: Path | None = None) -> ProjectConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping at top level")
    known = {"device", "stages", "variants", "output_dir", *SECTION_FIELDS}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown section")
    device = _block(raw.get("device"), DEVICE_FIELDS, "device", base)
    sections = {name: _block(raw.get(name), fields, name, base) for name, fields in SECTION_FIELDS.items() if name in raw}
    stages = []
    for k, st in enumerate(raw.get("stages") or []):
        s = _block(st, STAGE_FIELDS, f"stages[{k}]", base)
        if "temperature" not in s:
            raise ConfigError(f"stages[{k}].temperature", "required field missing")
        if ("attenuation" in s) == ("profile" in s):
            raise ConfigError(f"stages[{k}]", "give exactly one of attenuation or profile")
        stages.append(s)
    variants = {}
    for name, v in (raw.get("variants") or {}).items():
        if not isinstance(v, dict) or "stage" not in v:
            raise ConfigError(f"variants.{name}", "expected a mapping with 'stage' and a field to change")
        if not isinstance(v["stage"], int):
            raise ConfigError(f"variants.{name}.stage", "expected an integer index")
        changes = _block({k: x for k, x in v.items() if k != "stage"}, STAGE_FIELDS, f"variants.{name}", base)
        variants[name] = {"stage": v["stage"], **changes}
    return ProjectConfig(path or base, device, sections, stages, variants, raw.get("output_dir"))


def load_config(path: str | Path) -> ProjectConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "config file not found")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from None
    return parse_config(raw or {}, path.parent, path)
