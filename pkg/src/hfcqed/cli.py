"""``hfcqed`` command-line front end.

Each subcommand reads a YAML config, writes ``<command>.json`` (report with
the resolved config embedded) and one or more CSV files of plot data into
the output directory, and exits 0.  Failures print a JSON error object to
stderr and exit 2 (configuration) or 1 (anything else).
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import math
import os
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .cavity import CouplingModel, chi_scan
from .config import ProjectConfig, load_config
from .errors import ConfigError
from .fitting import blob_fit, ckp_curve, ckp_joint_fit, decay_fit, exp_decay, ramsey_curve, ramsey_fit
from .fitting.models import CkpModel
from .io import read_trace_csv, write_columns, write_json, write_rows
from .rates import (
    bose_einstein,
    meas_dephasing_rate,
    nbar_from_spin_locking,
    purcell_rate,
    pure_dephasing_time,
    spin_locking_noise,
    stark_shift,
    thermal_dephasing_rate,
    thermal_dephasing_vs_frequency,
)
from .readout import (
    angular_histogram,
    efficiency,
    optimal_threshold,
    scenario_from_theory,
    simulate_shots,
    snr_empirical,
)
from .shots import BlobModel, write_shots_csv
from .thermal import AttenuationChain, AttenuationProfile, Stage, cascade, chain_sweep, standard_chain
from .transmon import TransitionSet, TransmonParams, diagonalize, fit_ej_ec, transitions
from .units import parse_quantity, rate_to_lifetime

LOCK_NAME = ".hfcqed.lock"


@contextlib.contextmanager
def output_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"output directory {out} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _transmon(cfg: ProjectConfig) -> TransmonParams:
    d = cfg.device
    return TransmonParams(
        cfg.require("device", "e_j"), cfg.require("device", "e_c"), d.get("n_g", 0.25), d.get("n_cut", 20)
    )


def _grid(section: dict, default_start: float, default_stop: float, default_points: int) -> np.ndarray:
    n = section.get("points", default_points)
    if n < 2:
        raise ConfigError("points", "need at least 2 grid points")
    return np.linspace(section.get("start", default_start), section.get("stop", default_stop), n)


def cmd_spectrum(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    sp = diagonalize(_transmon(cfg))
    ts = transitions(sp)
    write_rows(
        out / "spectrum.csv",
        ({"level": k, "energy_hz": float(e)} for k, e in enumerate(sp.energies)),
        ["level", "energy_hz"],
    )
    result = {
        "f01_hz": ts.f01,
        "f12_hz": ts.f12,
        "f23_hz": ts.f23,
        "anharmonicity_hz": ts.f12 - ts.f01,
        "energies_hz": sp.energies,
        "n_cut": sp.n_cut,
    }
    d = cfg.device
    if all(k in d for k in ("f01", "f12", "f23")):
        params = fit_ej_ec(TransitionSet(d["f01"], d["f12"], d["f23"]), n_g=d.get("n_g", 0.25))
        result["fit"] = {"e_j_hz": params.e_j, "e_c_hz": params.e_c}
    return result


def cmd_chi_scan(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    s = cfg.section("chi_scan")
    sp = diagonalize(_transmon(cfg))
    g0 = s.get("g0", cfg.device.get("g"))
    omega0 = s.get("omega0", cfg.device.get("f_cav"))
    if g0 is None or omega0 is None:
        raise ConfigError("chi_scan.g0", "give g0 and omega0 (or device.g and device.f_cav)")
    grid = _grid(s, 10e9, 25e9, 301)
    kw = {k: s[k] for k in ("n_levels", "guard") if k in s}
    pts = chi_scan(sp, CouplingModel(g0, omega0), grid, **kw)
    write_rows(
        out / "chi_scan.csv",
        (
            {"omega_r_hz": p.omega_r, "chi_hz": p.chi, "two_chi_hz": 2 * p.chi, "pole": int(p.pole)}
            for p in pts
        ),
        ["omega_r_hz", "chi_hz", "two_chi_hz", "pole"],
    )
    finite = [abs(2 * p.chi) for p in pts if not p.pole]
    return {
        "points": len(pts),
        "pole_points": sum(p.pole for p in pts),
        "pole_frequencies_hz": [p.omega_r for p in pts if p.pole],
        "abs_two_chi_min_hz": min(finite) if finite else math.nan,
        "abs_two_chi_max_hz": max(finite) if finite else math.nan,
    }


def cmd_ckp_fit(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    tg = read_trace_csv(cfg.require("ckp", "trace_g"))
    te = read_trace_csv(cfg.require("ckp", "trace_e"))
    d = cfg.device
    kappa = d.get("kappa", 10e6)
    chi0 = d.get("chi", -1e6)
    omega01 = d.get("f01", float(np.median(np.concatenate([tg.y, te.y]))))
    omega_r = d.get("f_cav", 0.5 * (tg.x[np.argmax(np.abs(tg.y - omega01))] + te.x[np.argmax(np.abs(te.y - omega01))]))
    peak = float(np.max(np.abs(np.concatenate([tg.y, te.y]) - omega01)))
    amp2 = peak * kappa / (8.0 * abs(chi0))
    if chi0 * float(np.mean(tg.y - omega01)) < 0:
        amp2 = -amp2
    res = ckp_joint_fit(tg, te, CkpModel(omega01, chi0, kappa, omega_r, amp2))
    rows = []
    for state, tr in (("g", tg), ("e", te)):
        model = ckp_curve(tr.x, state=state, **res.params)
        rows += [{"state": state, "x": x, "y": y, "model": m} for x, y, m in zip(tr.x, tr.y, model)]
    write_rows(out / "ckp_fit.csv", rows, ["state", "x", "y", "model"])
    return {"fit": res.to_dict()}


def cmd_rates(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    d, s = cfg.device, cfg.section("rates")
    chi = abs(cfg.require("device", "chi"))
    kappa = cfg.require("device", "kappa")
    nbar = s.get("nbar", 1.0)
    T = s.get("temperature", 0.05)
    result = {
        "stark_shift_hz": stark_shift(chi, nbar),
        "meas_dephasing_hz": meas_dephasing_rate(chi, kappa, nbar),
        "thermal_dephasing_per_photon_hz": thermal_dephasing_rate(chi, kappa, 1.0),
    }
    if "f_cav" in d:
        n_th = bose_einstein(d["f_cav"], T)
        rate = thermal_dephasing_rate(chi, kappa, n_th)
        result.update(n_th=n_th, thermal_dephasing_hz=rate, thermal_dephasing_limit_s=rate_to_lifetime(rate))
    if all(k in d for k in ("g", "f_cav", "f01")):
        p = purcell_rate(kappa, d["g"], d["f_cav"], d["f01"])
        result.update(purcell_rate_hz=p, purcell_t1_s=rate_to_lifetime(p))
    if "t1" in d and "t2e" in d:
        result["t_phi_s"] = pure_dephasing_time(d["t1"], d["t2e"])
    if "t_rho" in s and "t1" in d and "rabi" in s:
        result["spin_lock_noise_per_s"] = spin_locking_noise(s["t_rho"], d["t1"])
        result["nbar_spin_lock"] = nbar_from_spin_locking(s["t_rho"], d["t1"], chi, kappa, s["rabi"])
    grid = np.linspace(5e9, 30e9, 251)
    write_columns(
        out / "rates.csv",
        {"omega_r_hz": grid, "thermal_dephasing_hz": thermal_dephasing_vs_frequency(grid, T, chi, kappa)},
    )
    return result


def _chain(cfg: ProjectConfig) -> AttenuationChain:
    src = cfg.section("thermal_chain").get("source_temperature", 300.0)
    if not cfg.stages:
        return standard_chain([20.0, 10.0, 10.0, 20.0], src)

    def stage(st):
        att = AttenuationProfile.from_csv(st["profile"]) if "profile" in st else st["attenuation"]
        return Stage(st["temperature"], att)

    return AttenuationChain(src, tuple(stage(st) for st in cfg.stages))


def cmd_thermal_chain(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    chain = _chain(cfg)
    grid = _grid(cfg.section("thermal_chain"), 4e9, 30e9, 105)
    variants = {}
    for name, v in cfg.variants.items():
        changes = {k: x for k, x in v.items() if k != "stage"}
        if "profile" in changes:
            changes["attenuation"] = AttenuationProfile.from_csv(changes.pop("profile"))
        variants[name] = chain.with_stage(v["stage"], **changes)
    table = chain_sweep(chain, grid, variants)
    write_rows(out / "thermal_chain.csv", table.rows(), ["frequency_hz", *table.columns])
    result = {"columns": list(table.columns)}
    if "f_cav" in cfg.device:
        f = cfg.device["f_cav"]
        result["n_out_at_f_cav"] = cascade(chain, f)
        result["variants_at_f_cav"] = {n: cascade(c, f) for n, c in variants.items()}
    result["relative_change"] = {n: table.relative_change(n) for n in variants}
    return result


def cmd_floquet_map(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    from .floquet import DriveConfig, anticrossing_gap, calibrate_drive_amplitude, min_gap_to_others, sweep_ng

    s = cfg.section("floquet")
    p = _transmon(cfg)
    wd = s.get("omega_d", cfg.device.get("f_cav"))
    if wd is None:
        raise ConfigError("floquet.omega_d", "required (or device.f_cav)")
    grid = np.linspace(0.0, 1.0, s.get("ng_points", 101))
    pair = tuple(s.get("pair", [1, 6]))
    drives: list[tuple[str, float]] = []
    if "amplitude" in s:
        drives.append(("amplitude", s["amplitude"]))
    for k, tag in enumerate(s.get("stark", [])):
        target = parse_quantity(tag, "frequency", f"floquet.stark[{k}]")
        drives.append((f"stark_{tag}".replace(" ", ""), calibrate_drive_amplitude(p, wd, target)))
    if not drives:
        raise ConfigError("floquet", "give amplitude or a stark list")
    rows, summary = [], []
    for label, amp in drives:
        sw = sweep_ng(p, DriveConfig(amp, wd), grid, s.get("n_branches", 12), s.get("n_steps"), s.get("workers"))
        rows += [{"drive": label, **r} for r in sw.rows()]
        try:
            crossing = anticrossing_gap(sw, *pair).to_dict()
        except ValueError as exc:
            # A detuned pair is a result, not a failure of the run.
            crossing = {"i": pair[0], "j": pair[1], "error": str(exc)}
        summary.append(
            {
                "drive": label,
                "amplitude_hz": amp,
                "n_steps": sw.n_steps,
                "anticrossing": crossing,
                "branch0_min_gap_hz": min_gap_to_others(sw, 0),
                "flagged_points": int(sw.flags[:, 1:].sum()),
            }
        )
    write_rows(out / "floquet_map.csv", rows, ["drive", "ng", "branch_index", "quasienergy_hz", "overlap_confidence"])
    return {"omega_d_hz": wd, "drives": summary}


def cmd_readout_sim(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    s, d = cfg.section("readout"), cfg.device
    kappa = cfg.require("device", "kappa")
    eta = cfg.require("device", "eta")
    nbar = cfg.require("readout", "nbar")
    tau = cfg.require("readout", "tau")
    theta = cfg.require("readout", "theta_eg")
    n = s.get("n_shots", 100_000)
    sc = scenario_from_theory(
        eta,
        kappa,
        nbar,
        tau,
        theta,
        sigma=s.get("sigma", 1.0),
        t1=d.get("t1", math.inf),
        seed=seed,
        leakage_fraction=s.get("leakage_fraction", 0.0),
        leakage_spread=s.get("leakage_spread", 0.0),
    )
    sets = []
    for k, label in enumerate(("g", "e")):
        sets.append(simulate_shots(dataclasses.replace(sc, populations={label: 1.0}), n, label, stream=k))
    write_shots_csv(out / "shots.csv", sets)
    fg, fe = blob_fit(sets[0], 1), blob_fit(sets[1], 1)
    blob = BlobModel(complex(fg.means[0]), complex(fe.means[0]), math.sqrt(0.5 * (fg.sigma**2 + fe.sigma**2)))
    omega_r = d.get("f_cav")
    eff = efficiency(blob, kappa, nbar, tau, omega_r) if omega_r else None
    bins = s.get("bins", 720)
    hg, he = angular_histogram(sets[0], bins=bins), angular_histogram(sets[1], bins=bins)
    err = optimal_threshold(hg, he)
    write_columns(out / "histogram.csv", {"angle_rad": hg.centers, "count_g": hg.counts, "count_e": he.counts})
    return {
        "snr_constructed": snr_empirical(sc.blob),
        "snr_fitted": snr_empirical(blob),
        "blob": {"mu_g": blob.mu_g, "mu_e": blob.mu_e, "sigma": blob.sigma, "theta_eg": blob.theta_eg},
        "circularity": {"g": fg.circularity[0], "e": fe.circularity[0]},
        "efficiency": dataclasses.asdict(eff) if eff else None,
        "assignment": dataclasses.asdict(err),
    }


def cmd_coherence_fit(cfg: ProjectConfig, out: Path, seed: int) -> dict:
    s = cfg.section("coherence")
    if not s:
        raise ConfigError("coherence", "section missing")
    result, rows = {}, []
    for kind in ("t1", "echo", "spin_lock"):
        if kind in s:
            tr = read_trace_csv(s[kind])
            res = decay_fit(tr, kind)
            result[kind] = res.to_dict()
            model = exp_decay(tr.x, res["time_constant"], res["amplitude"], res["offset"])
            rows += [{"kind": kind, "x": x, "y": y, "model": m} for x, y, m in zip(tr.x, tr.y, model)]
    if "ramsey" in s:
        tr = read_trace_csv(s["ramsey"])
        nb = s.get("n_beats", 1)
        res = ramsey_fit(tr, nb, seed=seed)
        result["ramsey"] = res.to_dict()
        freqs = [res[f"frequency_{k}"] for k in range(nb)]
        quads = [
            (res[f"amplitude_{k}"] * math.cos(res[f"phase_{k}"]), -res[f"amplitude_{k}"] * math.sin(res[f"phase_{k}"]))
            for k in range(nb)
        ]
        model = ramsey_curve(tr.x, res["t2_star"], res["offset"], freqs, quads)
        rows += [{"kind": "ramsey", "x": x, "y": y, "model": m} for x, y, m in zip(tr.x, tr.y, model)]
    if "t1" in result and "echo" in result:
        result["t_phi_s"] = pure_dephasing_time(
            result["t1"]["params"]["time_constant"], result["echo"]["params"]["time_constant"]
        )
    d, r = cfg.device, cfg.section("rates")
    if "spin_lock" in result and "t1" in result and {"chi", "kappa"} <= set(d) and "rabi" in r:
        result["nbar_spin_lock"] = nbar_from_spin_locking(
            result["spin_lock"]["params"]["time_constant"],
            result["t1"]["params"]["time_constant"],
            abs(d["chi"]),
            d["kappa"],
            r["rabi"],
        )
    write_rows(out / "coherence_fit.csv", rows, ["kind", "x", "y", "model"])
    return result


COMMANDS = {
    "spectrum": cmd_spectrum,
    "chi-scan": cmd_chi_scan,
    "ckp-fit": cmd_ckp_fit,
    "rates": cmd_rates,
    "thermal-chain": cmd_thermal_chain,
    "floquet-map": cmd_floquet_map,
    "readout-sim": cmd_readout_sim,
    "coherence-fit": cmd_coherence_fit,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hfcqed", description="High-frequency circuit-QED modeling tools.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML project config")
        sp.add_argument("--out", help="output directory (default: config output_dir or ./out)")
        sp.add_argument("--seed", type=int, default=0, help="RNG seed (u64)")
    return ap


def _error(exc: BaseException) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        err.update(path=exc.path, reason=exc.reason)
    return {"error": err}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2**64:
        print(json.dumps(_error(ValueError("seed must be an unsigned 64-bit integer"))), file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.output_dir or "out")
        with output_lock(out):
            result = COMMANDS[args.command](cfg, out, args.seed)
            stem = args.command.replace("-", "_")
            write_json(
                out / f"{stem}.json",
                {
                    "command": args.command,
                    "version": __version__,
                    "seed": args.seed,
                    "config": cfg.to_dict(),
                    "result": result,
                    "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                },
            )
    except ConfigError as exc:
        print(json.dumps(_error(exc)), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable error
        payload = _error(exc)
        if os.environ.get("HFCQED_TRACEBACK"):
            payload["error"]["traceback"] = traceback.format_exc()
        print(json.dumps(payload), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
