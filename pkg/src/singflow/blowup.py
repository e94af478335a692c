"""Blowup chart at a hyperbolic singularity.

Points near ``sigma`` are written ``x = sigma + s*u`` with ``u`` a unit vector.
On the fiber ``s = 0`` the vector field, the speed ratio and the rescaled
Poincare flows have closed forms in terms of ``A = DX(sigma)`` and
``exp(tA)``; this module evaluates them and checks that regular-point
computations converge to them as ``s -> 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DegenerateExtension, NumericalError, OutOfChart, TauNotFound
from .field import SingularityInfo, VectorField, sign_normalize
from .flow import flow
from .poincare import DEFAULT_POINCARE, PoincareConfig, _as_coords, frame_from_direction, linear_poincare

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# map [-1, 1] to [0, 1]
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

TAU_WINDOW = 0.5
BETA_PRIME = 0.01


def expm(a: np.ndarray, t: float, info: Optional[SingularityInfo] = None) -> np.ndarray:
    """``exp(t a)``; eigen-decomposition when ``info`` says the spectrum is simple real."""
    if info is not None and info.simple_real:
        v = np.column_stack(info.eigenvectors)
        lam = info.eigenvalues.real
        return (v * np.exp(t * lam)) @ np.linalg.inv(v)
    return scipy.linalg.expm(t * a)


@dataclass(eq=False)
class BlowupChart:
    f: VectorField
    sigma: SingularityInfo
    eps: float
    jac: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.sigma.hyperbolic:
            raise DegenerateExtension("blowup chart needs a hyperbolic singularity")
        self.jac = self.f.jacobian(self.sigma.location)
        if abs(np.linalg.det(self.jac)) < 1e-12:
            raise DegenerateExtension("DX(sigma) is not invertible")

    @property
    def center(self) -> np.ndarray:
        return self.sigma.location

    def flow_matrix(self, t: float) -> np.ndarray:
        return expm(self.jac, t, self.sigma)


def make_chart(f: VectorField, sigma: SingularityInfo, eps: Optional[float] = None) -> BlowupChart:
    return BlowupChart(f, sigma, 0.05 * f.box.diagonal if eps is None else eps)


def blowup_coords(chart: BlowupChart, x):
    d = np.asarray(x, dtype=float) - chart.center
    r = float(np.linalg.norm(d))
    if not 0.0 < r < chart.eps:
        raise OutOfChart(f"|x - sigma| = {r:.3g} not in (0, {chart.eps:.3g})")
    u = d / r
    un = sign_normalize(u)
    return (r if un is u else -r), un


def from_blowup(chart: BlowupChart, s: float, u) -> np.ndarray:
    return chart.center + s * np.asarray(u, dtype=float)


def extended_field(chart: BlowupChart, s: float, u) -> np.ndarray:
    """16-node Gauss-Legendre value of ``int_0^1 DX(sigma + r s u) dr . u``."""
    u = np.asarray(u, dtype=float)
    if abs(s) >= chart.eps:
        raise OutOfChart("|s| >= eps")
    if s == 0.0:
        return chart.jac @ u
    acc = np.zeros((3, 3))
    for r, w in zip(_GL_NODES, _GL_WEIGHTS):
        acc += w * chart.f.jacobian(chart.center + (r * s) * u)
    return acc @ u


def extended_unit_field(chart: BlowupChart, s: float, u) -> np.ndarray:
    v = extended_field(chart, s, u)
    n = float(np.linalg.norm(v))
    if n <= 1e-10:
        raise DegenerateExtension(f"|extended field| = {n:.3g} at s={s}")
    return v / n


def projectivized_flow(chart: BlowupChart, u, t: float) -> np.ndarray:
    """Action of the extended flow on the fiber: ``exp(tA)u`` normalised."""
    w = chart.flow_matrix(t) @ np.asarray(u, dtype=float)
    return w / np.linalg.norm(w)


def speed_ratio_extension(chart: BlowupChart, u, t: float) -> float:
    """``|A u| / |A exp(tA) u|``, the fiber value of ``|X(x)| / |X(phi_t x)|``."""
    u = np.asarray(u, dtype=float)
    return float(np.linalg.norm(chart.jac @ u) / np.linalg.norm(chart.jac @ chart.flow_matrix(t) @ u))


def fiber_frames(chart: BlowupChart, u, t: float):
    u = np.asarray(u, dtype=float)
    ut = projectivized_flow(chart, u, t)
    src = frame_from_direction(chart.center, chart.jac @ u)
    dst = frame_from_direction(chart.center, chart.jac @ ut)
    return src, dst


def fiber_rescaled_linear_poincare(chart: BlowupChart, u, t: float) -> np.ndarray:
    src, dst = fiber_frames(chart, u, t)
    ratio = speed_ratio_extension(chart, u, t)
    # dst basis is orthogonal to A exp(tA) u, which absorbs the normal projection
    return ratio * (dst.basis.T @ chart.flow_matrix(t) @ src.basis)


@dataclass
class FiberImage:
    coords: np.ndarray
    tau: float
    vector: np.ndarray


def fiber_rescaled_sectional_full(chart: BlowupChart, u, y, t: float,
                                  beta: float = BETA_PRIME) -> FiberImage:
    u = np.asarray(u, dtype=float)
    src, dst = fiber_frames(chart, u, t)
    c = _as_coords(src, y)
    if np.linalg.norm(c) >= beta:
        raise ValueError("|y| >= beta'")
    y3 = src.embed(c)
    a = chart.jac
    phi_t = chart.flow_matrix(t)
    phi_t_u = phi_t @ u
    target = a @ phi_t_u
    denom = float(np.linalg.norm(target))
    target = target / denom
    ratio = float(np.linalg.norm(a @ u)) / denom

    def image(tau):
        m = chart.flow_matrix(t + tau)
        return ratio * (m @ y3) + (m @ u - phi_t_u) / denom

    def theta(tau):
        return float(image(tau) @ target)

    def dtheta(tau):
        m = a @ chart.flow_matrix(t + tau)
        return float((ratio * (m @ y3) + (m @ u) / denom) @ target)

    tau = 0.0
    g = theta(tau)
    lo, hi = -TAU_WINDOW, TAU_WINDOW
    g_lo, g_hi = theta(lo), theta(hi)
    for _ in range(100):
        if abs(g) <= 1e-15 * max(1.0, float(np.linalg.norm(y3))):
            break
        # keep a sign bracket whenever the window supplies one
        if g_lo * g < 0:
            hi, g_hi = tau, g
        elif g_hi * g < 0:
            lo, g_lo = tau, g
        d = dtheta(tau)
        step = -g / d if d != 0 else math.inf
        new = tau + step
        if not lo < new < hi or not math.isfinite(new):
            if g_lo * g_hi >= 0:
                raise TauNotFound("no root of the orthogonality condition in the tau window")
            new = 0.5 * (lo + hi)
        tau, g = new, theta(new)
        if abs(step) <= 1e-16 * max(1.0, abs(tau)):
            break
    else:
        raise TauNotFound("Newton did not converge")
    if abs(tau) >= TAU_WINDOW:
        raise TauNotFound("tau outside the search window")
    v = image(tau)
    return FiberImage(dst.coords(v), tau, v)


def fiber_rescaled_sectional(chart: BlowupChart, u, y, t: float, beta: float = BETA_PRIME) -> np.ndarray:
    """Closed-form rescaled sectional Poincare map on the fiber over ``u``."""
    return fiber_rescaled_sectional_full(chart, u, y, t, beta).coords


# --- convergence of regular computations to the fiber formulas ---------------

@dataclass
class ConvergenceReport:
    t: float
    u: list
    radii: list
    errors: list  # |psi*(sigma + s u) - fiber matrix| per radius, None on failure
    slope: Optional[float]
    extrapolated_error: Optional[float]
    monotone: bool
    speed_ratio_errors: list
    speed_ratio_slope: Optional[float]
    fiber_matrix: list
    failures: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "u": self.u,
            "radii": self.radii,
            "errors": self.errors,
            "slope": self.slope,
            "extrapolated_error": self.extrapolated_error,
            "monotone": self.monotone,
            "speed_ratio_errors": self.speed_ratio_errors,
            "speed_ratio_slope": self.speed_ratio_slope,
            "fiber_matrix": self.fiber_matrix,
            "failures": self.failures,
        }


def _loglog_slope(radii, errors) -> Optional[float]:
    pts = [(math.log(r), math.log(e)) for r, e in zip(radii, errors) if e is not None and e > 0]
    if len(pts) < 2:
        return None
    xs, ys = np.array(pts).T
    return float(np.polyfit(xs, ys, 1)[0])


def aligned_regular_matrix(chart: BlowupChart, u, s: float, t: float,
                           cfg: PoincareConfig = DEFAULT_POINCARE):
    """Rescaled linear Poincare matrix at ``sigma + s u`` expressed in the fiber frames.

    Also returns the regular speed ratio. The integrator's absolute tolerance is
    scaled with ``s`` so that the tiny initial state keeps its relative accuracy.
    """
    x = from_blowup(chart, s, u)
    icfg = cfg.integrator
    icfg = replace(icfg, abs_tol=min(icfg.abs_tol, icfg.rel_tol * abs(s) * 1e-2))
    pcfg = replace(cfg, integrator=icfg, frame_eps=0.0)
    end = flow(chart.f, x, t, icfg)
    if np.linalg.norm(end - chart.center) >= chart.eps:
        raise OutOfChart(f"orbit of sigma + {s:g} u leaves the chart by time {t}")
    coc = linear_poincare(chart.f, x, t, pcfg).rescale()
    fsrc, fdst = fiber_frames(chart, u, t)
    m = (fdst.basis.T @ coc.target.basis) @ coc.mat @ (coc.source.basis.T @ fsrc.basis)
    return m, coc.source.speed / coc.target.speed


def verify_extension_limit(chart: BlowupChart, u, t: float, radii: Sequence[float],
                           cfg: PoincareConfig = DEFAULT_POINCARE) -> ConvergenceReport:
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if radii and radii[0] >= chart.eps:
        raise ValueError("radii must be smaller than the chart radius")
    target = fiber_rescaled_linear_poincare(chart, u, t)
    ratio = speed_ratio_extension(chart, u, t)
    errors, ratio_errors, mats, failures = [], [], {}, {}
    for s in radii:
        try:
            m, r = aligned_regular_matrix(chart, u, s, t, cfg)
        except NumericalError as exc:
            failures[repr(s)] = type(exc).__name__
            errors.append(None)
            ratio_errors.append(None)
            continue
        mats[s] = m
        errors.append(float(np.linalg.norm(m - target)))
        ratio_errors.append(abs(r - ratio))
    good = [e for e in errors if e is not None]
    monotone = len(good) == len(errors) and all(b < a for a, b in zip(good, good[1:]))
    extrap = None
    ok = [s for s in radii if s in mats]
    if len(ok) >= 2:
        s1, s0 = ok[-2], ok[-1]
        m_ext = (s1 * mats[s0] - s0 * mats[s1]) / (s1 - s0)
        extrap = float(np.linalg.norm(m_ext - target))
    return ConvergenceReport(
        t=float(t), u=u.tolist(), radii=radii, errors=errors,
        slope=_loglog_slope(radii, errors), extrapolated_error=extrap, monotone=monotone,
        speed_ratio_errors=ratio_errors, speed_ratio_slope=_loglog_slope(radii, ratio_errors),
        fiber_matrix=target.tolist(), failures=failures,
    )
