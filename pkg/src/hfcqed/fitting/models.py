"""Model-specific fits: spectroscopy lines, CKP, dephasing slope, decays and Ramsey fringes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import FitError
from .lsq import FitResult, Trace, curve_fit, joint_residuals, least_squares

DEFAULT_STARTS = 8


def lorentzian(x, center, width, amplitude, offset):
    """Lorentzian line with full width at half maximum ``width``."""
    return offset + amplitude / (1.0 + ((x - center) / (0.5 * width)) ** 2)


def lorentzian_peak(trace: Trace) -> FitResult:
    """Fit a single Lorentzian (peak or dip) to a trace."""
    if len(trace) < 5:
        raise ValueError("need at least 5 points")
    x, y = trace.x, trace.y
    offset0 = float(np.median(y))
    k = int(np.argmax(np.abs(y - offset0)))
    amp0 = float(y[k] - offset0)
    span = float(x[-1] - x[0])
    if amp0 == 0:
        raise FitError("flat trace: no line to fit")
    above = np.abs(y - offset0) >= 0.5 * abs(amp0)
    width0 = max(float(np.sum(above)) * span / (len(x) - 1), span / (len(x) - 1))
    res = curve_fit(
        lorentzian,
        trace,
        {"center": float(x[k]), "width": width0, "amplitude": amp0, "offset": offset0},
        bounds={"center": (x[0], x[-1]), "width": (1e-9 * span, 10 * span)},
        x_scale={"center": span, "width": width0, "amplitude": abs(amp0), "offset": max(abs(amp0), abs(offset0))},
    )
    if not res.converged:
        raise FitError("Lorentzian fit did not converge")
    return res


@dataclass(frozen=True)
class CkpModel:
    """Parameters of the joint Stark-shift model; frequencies in Hz."""

    omega01: float
    chi: float
    kappa: float
    omega_r: float
    amp2: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    def as_dict(self) -> dict[str, float]:
        return {
            "omega01": self.omega01,
            "chi": self.chi,
            "kappa": self.kappa,
            "omega_r": self.omega_r,
            "amp2": self.amp2,
        }


def ckp_curve(x, omega01, chi, kappa, omega_r, amp2, state: str):
    """Driven qubit frequency versus cavity-drive frequency ``x``.

    The photon number is ``kappa * amp2 / ((kappa/2)^2 + (x - omega_r -+ chi)^2)``,
    with the cavity at ``omega_r - chi`` for |g> and ``omega_r + chi`` for |e>.
    """
    pull = -chi if state == "g" else chi
    nbar = kappa * amp2 / ((kappa / 2) ** 2 + (x - (omega_r + pull)) ** 2)
    return omega01 + 2.0 * chi * nbar


def ckp_joint_fit(trace_g: Trace, trace_e: Trace, init: CkpModel) -> FitResult:
    """Fit both Stark-shift traces with one parameter set.

    ``amp2`` is left unconstrained: only ``chi * amp2`` is fixed by the
    sign of the measured Stark shift, so exchanging the traces flips the
    sign of both ``chi`` and ``amp2``.
    """

    def model_g(x, **p):
        return ckp_curve(x, state="g", **p)

    def model_e(x, **p):
        return ckp_curve(x, state="e", **p)

    p0 = init.as_dict()
    names = list(p0)
    span = max(trace_g.x[-1] - trace_g.x[0], trace_e.x[-1] - trace_e.x[0])
    scale = {
        "omega01": max(abs(init.omega01), 1.0),
        "chi": init.kappa,
        "kappa": init.kappa,
        "omega_r": span,
        "amp2": max(abs(init.amp2), 1e-300),
    }
    res = least_squares(
        joint_residuals([(model_g, trace_g), (model_e, trace_e)], names),
        p0,
        bounds={"kappa": (1e-6 * init.kappa, 1e3 * init.kappa)},
        x_scale=scale,
        absolute_sigma=trace_g.sigma is not None and trace_e.sigma is not None,
    )
    if not res.converged:
        raise FitError("CKP joint fit did not converge")
    err = res.errors["chi"]
    if not math.isfinite(err) or abs(res["chi"]) < 2 * err:
        res.warnings.append("chi consistent with zero")
    return res


def gamma_m_fit(
    points: Sequence[tuple[float, float]],
    kappa: float | None = None,
    mode: str = "fixed_kappa",
    init_chi: float | None = None,
) -> FitResult:
    """Fit measurement-induced dephasing versus photon number.

    The data fix only the slope ``2 kappa chi^2 / (chi^2 + (kappa/2)^2)``.
    ``mode="fixed_kappa"`` (default) takes kappa from elsewhere (CKP) and
    solves for |chi|.  ``mode="joint"`` fits both by least squares; the
    problem is degenerate along a curve, so its covariance is not meaningful.
    Returned params: ``slope``, ``chi``, ``kappa``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (nbar, gamma_m) pairs")
    n, gm = pts[:, 0], pts[:, 1]
    if pts.shape[0] < 3 or np.count_nonzero(n) == 0:
        raise FitError("underdetermined: need at least 3 points with nonzero photon number")
    slope = float(n @ gm / (n @ n))
    resid = gm - slope * n
    dof = max(len(n) - 1, 1)
    slope_var = float(resid @ resid / dof / (n @ n))
    if slope <= 0:
        raise FitError(f"negative dephasing slope {slope:.3g}")

    if mode == "fixed_kappa":
        if kappa is None:
            raise ValueError("fixed_kappa mode needs kappa")
        if slope >= 2 * kappa:
            raise FitError("slope exceeds the maximum 2*kappa allowed by the model")
        chi = kappa * math.sqrt(slope / (4 * (2 * kappa - slope)))
        dchi = kappa**3 / (4 * chi * (2 * kappa - slope) ** 2)
        var_chi = dchi**2 * slope_var
        cov = np.diag([slope_var, var_chi, 0.0])
        return FitResult({"slope": slope, "chi": chi, "kappa": float(kappa)}, cov, float(np.linalg.norm(resid)), True, 1)
    if mode == "joint":
        k0 = kappa if kappa is not None else slope
        c0 = init_chi if init_chi is not None else 0.5 * k0

        def residuals(p):
            c, k = p
            return n * (2 * k * c**2 / (c**2 + (k / 2) ** 2)) - gm

        res = least_squares(residuals, {"chi": c0, "kappa": k0}, bounds={"kappa": (0.0, np.inf)})
        c, k = abs(res["chi"]), res["kappa"]
        res.params = {"slope": 2 * k * c**2 / (c**2 + (k / 2) ** 2), "chi": c, "kappa": k}
        cov = np.full((3, 3), np.nan)
        cov[1:, 1:] = res.covariance
        cov[0, 0] = slope_var
        res.covariance = cov
        res.warnings.append("joint chi/kappa fit is degenerate; only the slope is identified")
        return res
    raise ValueError(f"unknown mode {mode!r}")


def exp_decay(t, time_constant, amplitude, offset):
    return amplitude * np.exp(-t / time_constant) + offset


def decay_fit(trace: Trace, kind: str = "t1") -> FitResult:
    """Single-exponential fit ``a exp(-t/tau) + c``; ``kind`` labels T1, echo or spin-lock data."""
    if kind not in ("t1", "echo", "spin_lock"):
        raise ValueError(f"unknown decay kind {kind!r}")
    t, y = trace.x, trace.y
    span = float(t[-1] - t[0])
    c0 = float(np.mean(y[-max(3, len(y) // 10) :]))
    a0 = float(y[0] - c0)
    if a0 == 0 or np.ptp(y) == 0:
        raise FitError("constant trace: decay time unidentifiable")
    # Area under the decaying part gives a first estimate of tau.
    area = float(np.trapezoid(y - c0, t))
    tau0 = min(max(area / a0, span / 50), 10 * span)
    res = curve_fit(
        lambda x, time_constant, amplitude, offset: exp_decay(x - t[0], time_constant, amplitude, offset),
        trace,
        {"time_constant": tau0, "amplitude": a0, "offset": c0},
        bounds={"time_constant": (span * 1e-6, span * 1e6)},
        x_scale={"time_constant": tau0, "amplitude": abs(a0), "offset": max(abs(c0), abs(a0))},
    )
    if not res.converged:
        raise FitError("decay fit did not converge")
    # Report the amplitude at t = 0 rather than at the first sample.
    res.params["amplitude"] *= math.exp(t[0] / res["time_constant"])
    errs = res.errors
    if not math.isfinite(errs["amplitude"]) or abs(res["amplitude"]) < 3 * errs["amplitude"]:
        raise FitError("amplitude consistent with zero: decay time unidentifiable")
    if res["time_constant"] > span:
        res.warnings.append("time constant exceeds the sampled range (extrapolated)")
    return res


def ramsey_curve(t, t2_star, offset, freqs, quads):
    """``exp(-t/T2*) * sum_k (A_k cos 2pi f_k t + B_k sin 2pi f_k t) + offset``."""
    out = np.zeros_like(t, dtype=float)
    for f, (a, b) in zip(freqs, quads):
        ph = 2 * np.pi * f * t
        out += a * np.cos(ph) + b * np.sin(ph)
    return np.exp(-t / t2_star) * out + offset


def _fft_peaks(t, y, n_peaks):
    dt = np.median(np.diff(t))
    n = len(t)
    pad = 8 * int(2 ** math.ceil(math.log2(n)))
    spec = np.abs(np.fft.rfft((y - y.mean()) * np.hanning(n), pad))
    freqs = np.fft.rfftfreq(pad, dt)
    spec[0] = 0.0
    # Local maxima, strongest first; suppress neighbours within one natural bin.
    is_peak = np.r_[False, (spec[1:-1] > spec[:-2]) & (spec[1:-1] >= spec[2:]), False]
    order = np.argsort(spec * is_peak)[::-1]
    resolution = 1.0 / (t[-1] - t[0])
    picked: list[float] = []
    for k in order:
        if not is_peak[k]:
            break
        if all(abs(freqs[k] - p) > resolution for p in picked):
            picked.append(float(freqs[k]))
        if len(picked) == n_peaks:
            break
    while len(picked) < n_peaks:
        picked.append(picked[-1] + 2 * resolution if picked else resolution)
    return picked, resolution


def ramsey_fit(trace: Trace, n_beats: int = 1, n_starts: int = DEFAULT_STARTS, seed: int = 0) -> FitResult:
    """Fit a decaying Ramsey fringe with one or two beat frequencies.

    Each beat is fit as a cosine/sine quadrature pair, which keeps the
    amplitudes linear; the reported ``amplitude_k`` and ``phase_k`` follow
    ``a_k cos(2 pi f_k t + phi_k)``.  For two beats the fit is restarted
    from ``n_starts`` jittered frequency guesses and the lowest residual
    wins (ties go to the earliest start).
    """
    if n_beats not in (1, 2):
        raise ValueError("n_beats must be 1 or 2")
    t = trace.x - trace.x[0]
    y = trace.y
    dt = float(np.median(np.diff(t)))
    nyquist = 0.5 / dt
    guesses, resolution = _fft_peaks(t, y, n_beats)
    if max(guesses) >= nyquist:
        raise ValueError("trace is sampled below Nyquist for the requested beats")
    span = float(t[-1])
    c0 = float(np.mean(y))
    amp_scale = float(np.ptp(y)) / 2 or 1.0

    names = ["t2_star", "offset"]
    for k in range(n_beats):
        names += [f"frequency_{k}", f"a_{k}", f"b_{k}"]

    def unpack(p):
        kw = dict(zip(names, p))
        freqs = [kw[f"frequency_{k}"] for k in range(n_beats)]
        quads = [(kw[f"a_{k}"], kw[f"b_{k}"]) for k in range(n_beats)]
        return kw["t2_star"], kw["offset"], freqs, quads

    w = 1.0 / trace.sigma if trace.sigma is not None else 1.0

    def residuals(p):
        t2, off, freqs, quads = unpack(p)
        return (ramsey_curve(t, t2, off, freqs, quads) - y) * w

    rng = np.random.default_rng(seed)
    starts = [guesses]
    for _ in range(1, n_starts if n_beats == 2 else 1):
        starts.append([g + rng.uniform(-0.5, 0.5) * resolution for g in guesses])

    best = None
    for k, freqs0 in enumerate(starts):
        init = {"t2_star": span / 3, "offset": c0}
        scale = {"t2_star": span / 3, "offset": amp_scale}
        bounds = {"t2_star": (span * 1e-4, span * 1e4)}
        for j, f0 in enumerate(freqs0):
            # Linear least squares for the quadratures at the guessed frequencies.
            init.update({f"frequency_{j}": f0, f"a_{j}": 0.0, f"b_{j}": 0.0})
            scale.update({f"frequency_{j}": resolution, f"a_{j}": amp_scale, f"b_{j}": amp_scale})
            bounds[f"frequency_{j}"] = (0.0, nyquist)
        env = np.exp(-t / init["t2_star"])
        cols = []
        for f0 in freqs0:
            cols += [env * np.cos(2 * np.pi * f0 * t), env * np.sin(2 * np.pi * f0 * t)]
        X = np.column_stack(cols + [np.ones_like(t)])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        for j in range(n_beats):
            init[f"a_{j}"], init[f"b_{j}"] = float(coef[2 * j]), float(coef[2 * j + 1])
        init["offset"] = float(coef[-1])
        res = least_squares(
            residuals, init, bounds, x_scale=scale, absolute_sigma=trace.sigma is not None, max_iter=1000
        )
        if best is None or res.residual_norm < best.residual_norm:
            best = res
    res = best
    if not res.converged:
        raise FitError("Ramsey fit did not converge")

    t2, off, freqs, quads = unpack([res.params[n] for n in names])
    out = {"t2_star": t2, "offset": off}
    for k, (f, (a, b)) in enumerate(zip(freqs, quads)):
        out[f"frequency_{k}"] = f
        out[f"amplitude_{k}"] = math.hypot(a, b)
        out[f"phase_{k}"] = math.atan2(-b, a)
    # Propagate the quadrature covariance to amplitude/phase via the Jacobian of the map.
    n_p = len(names)
    G = np.zeros((len(out), n_p))
    keys = list(out)
    G[keys.index("t2_star"), names.index("t2_star")] = 1
    G[keys.index("offset"), names.index("offset")] = 1
    for k, (a, b) in enumerate(quads):
        r2 = a * a + b * b or 1e-300
        r = math.sqrt(r2)
        G[keys.index(f"frequency_{k}"), names.index(f"frequency_{k}")] = 1
        ia, ib = names.index(f"a_{k}"), names.index(f"b_{k}")
        G[keys.index(f"amplitude_{k}"), ia] = a / r
        G[keys.index(f"amplitude_{k}"), ib] = b / r
        G[keys.index(f"phase_{k}"), ia] = b / r2
        G[keys.index(f"phase_{k}"), ib] = -a / r2
    cov = G @ res.covariance @ G.T
    res.params, res.covariance = out, cov

    if n_beats == 2:
        a0, a1 = out["amplitude_0"], out["amplitude_1"]
        errs = res.errors
        both_significant = a0 > 3 * errs["amplitude_0"] and a1 > 3 * errs["amplitude_1"]
        if both_significant and abs(out["frequency_0"] - out["frequency_1"]) < 0.5 * resolution:
            raise FitError("beat frequencies collide below the spectral resolution; use n_beats=1")
        if out["frequency_1"] < out["frequency_0"] and both_significant:
            _swap_beats(res)
    return res


def _swap_beats(res: FitResult) -> None:
    keys = list(res.params)
    perm = list(range(len(keys)))
    for name in ("frequency", "amplitude", "phase"):
        i, j = keys.index(f"{name}_0"), keys.index(f"{name}_1")
        perm[i], perm[j] = j, i
    vals = [res.params[keys[p]] for p in perm]
    res.params = dict(zip(keys, vals))
    res.covariance = res.covariance[np.ix_(perm, perm)]
