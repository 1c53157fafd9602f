"""Damped Gauss-Newton (Levenberg-Marquardt) least squares with box bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import FitError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Trace:
    """A sampled curve ``y(x)`` with optional per-point uncertainties."""

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != x.shape or np.any(s <= 0):
                raise ValueError("sigma must be positive and match x")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.x.size


@dataclass
class FitResult:
    params: dict[str, float]
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    warnings: list[str] = field(default_factory=list)

    @property
    def errors(self) -> dict[str, float]:
        """One-sigma uncertainties from the covariance diagonal."""
        diag = np.diag(self.covariance)
        return {k: float(math.sqrt(v)) if v >= 0 else math.nan for k, v in zip(self.params, diag)}

    def __getitem__(self, name):
        return self.params[name]

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "errors": self.errors,
            "covariance": np.asarray(self.covariance).tolist(),
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "warnings": list(self.warnings),
        }


def _jacobian(fun, u, r0, lo, hi):
    # Central differences in the scaled coordinates; one-sided at active bounds.
    n = u.size
    J = np.empty((r0.size, n))
    base = _EPS ** (1 / 3)
    for k in range(n):
        h = base * max(1.0, abs(u[k]))
        up, dn = u.copy(), u.copy()
        up[k] = min(u[k] + h, hi[k])
        dn[k] = max(u[k] - h, lo[k])
        if up[k] == dn[k]:
            J[:, k] = 0.0
            continue
        if dn[k] == u[k]:
            J[:, k] = (fun(up) - r0) / (up[k] - u[k])
        elif up[k] == u[k]:
            J[:, k] = (r0 - fun(dn)) / (u[k] - dn[k])
        else:
            J[:, k] = (fun(up) - fun(dn)) / (up[k] - dn[k])
    return J


def least_squares(
    residuals: Callable[[np.ndarray], np.ndarray],
    init: Mapping[str, float],
    bounds: Mapping[str, tuple[float, float]] | None = None,
    *,
    x_scale: Mapping[str, float] | None = None,
    xtol: float = 1e-8,
    gtol: float = 1e-8,
    ftol: float = 1e-12,
    max_iter: int = 500,
    absolute_sigma: bool = False,
) -> FitResult:
    """Minimize ``sum(residuals(p)**2)`` over named parameters.

    ``residuals`` receives the parameter vector in the order of ``init``.
    Parameters are internally divided by ``x_scale`` (default: the magnitude
    of the initial value, or 1 for zero) so that finite-difference steps and
    tolerances are relative.  Bounds are enforced by projecting trial steps.

    Convergence requires a relative step below ``xtol`` together with either
    a scaled gradient below ``gtol`` (the cosine between the residual and
    every Jacobian column) or a relative cost change below ``ftol``.
    Exhausting ``max_iter`` returns with ``converged=False``.

    The covariance is ``(J^T J)^-1``, multiplied by the reduced chi-square
    unless ``absolute_sigma`` is set (residuals already weighted by known
    uncertainties).
    """
    names = list(init)
    p0 = np.array([float(init[k]) for k in names])
    if x_scale is None:
        scale = np.where(p0 != 0, np.abs(p0), 1.0)
    else:
        scale = np.array([float(x_scale.get(k, abs(init[k]) or 1.0)) for k in names])
    lo = np.full(p0.size, -np.inf)
    hi = np.full(p0.size, np.inf)
    for k, (a, b) in (bounds or {}).items():
        i = names.index(k)
        lo[i], hi[i] = a / scale[i], b / scale[i]
    u = p0 / scale
    if np.any(u < lo) or np.any(u > hi):
        raise ValueError("initial parameters outside bounds")

    def fun(v):
        r = np.asarray(residuals(v * scale), dtype=float).ravel()
        return r

    r = fun(u)
    if not np.all(np.isfinite(r)):
        raise FitError("model is not finite at the initial parameters")
    cost = float(r @ r)
    J = _jacobian(fun, u, r, lo, hi)
    lam = 1e-3
    nu = 2.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        A = J.T @ J
        d = np.sqrt(np.maximum(np.diag(A), _EPS))
        rn = math.sqrt(cost)
        if rn == 0.0:
            converged = True
            break
        cos = np.abs(g) / (np.linalg.norm(J, axis=0) * rn + 1e-300)
        grad_small = bool(np.max(cos, initial=0.0) <= gtol)

        while True:
            M = A + lam * np.diag(d**2)
            try:
                step = -np.linalg.solve(M, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                if lam > 1e16:
                    raise FitError("normal equations singular even with heavy damping") from None
                continue
            u_new = np.clip(u + step, lo, hi)
            step = u_new - u
            r_new = fun(u_new)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
            predicted = -(2 * g @ step + step @ A @ step)
            rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
            if rho > 0 and cost_new <= cost:
                break
            lam *= nu
            nu *= 2.0
            if lam > 1e16:
                step = np.zeros_like(u)
                u_new, r_new, cost_new = u, r, cost
                break

        step_small = np.linalg.norm(step) <= xtol * (np.linalg.norm(u) + xtol)
        f_small = abs(cost - cost_new) <= ftol * max(cost, _EPS)
        if cost_new < cost:
            u, r, cost = u_new, r_new, cost_new
            lam *= max(1 / 3, 1 - (2 * rho - 1) ** 3)
            nu = 2.0
            J = _jacobian(fun, u, r, lo, hi)
        if step_small and (grad_small or f_small):
            converged = True
            break
        if cost == 0.0:
            converged = True
            break

    m, n = r.size, u.size
    A = J.T @ J
    cov_u = np.linalg.pinv(A)
    if not absolute_sigma:
        dof = m - n
        cov_u = cov_u * (cost / dof if dof > 0 else math.inf)
    cov = cov_u * np.outer(scale, scale)
    params = {k: float(v) for k, v in zip(names, u * scale)}
    return FitResult(params, cov, math.sqrt(cost), converged, it)


def curve_fit(
    model: Callable[..., np.ndarray],
    trace: Trace,
    init: Mapping[str, float],
    bounds: Mapping[str, tuple[float, float]] | None = None,
    **kwargs,
) -> FitResult:
    """Fit ``model(x, **params)`` to a single trace."""
    names = list(init)
    w = 1.0 / trace.sigma if trace.sigma is not None else 1.0

    def residuals(p):
        return (model(trace.x, **dict(zip(names, p))) - trace.y) * w

    kwargs.setdefault("absolute_sigma", trace.sigma is not None)
    return least_squares(residuals, init, bounds, **kwargs)


def joint_residuals(pairs: Sequence[tuple[Callable[..., np.ndarray], Trace]], names: Sequence[str]):
    """Stack weighted residuals of several (model, trace) pairs sharing parameters."""

    def residuals(p):
        kw = dict(zip(names, p))
        out = []
        for model, tr in pairs:
            w = 1.0 / tr.sigma if tr.sigma is not None else 1.0
            out.append((model(tr.x, **kw) - tr.y) * w)
        return np.concatenate(out)

    return residuals
