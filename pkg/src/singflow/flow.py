"""Base flow and tangent flow by an adaptive Dormand-Prince 5(4) pair."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional

import numpy as np

from .errors import BlowUp, StepLimitExceeded
from .field import VectorField

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    max_steps: int = 2_000_000
    escape_radius: Optional[float] = None  # None: 1e3 * box diagonal

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "max_steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def refined(self, factor: float = 0.5) -> "IntegratorConfig":
        return replace(self, rel_tol=self.rel_tol * factor, abs_tol=self.abs_tol * factor)

    def escape_for(self, f: VectorField) -> float:
        if self.escape_radius is not None:
            return self.escape_radius
        return 1e3 * f.box.diagonal


DEFAULT_CONFIG = IntegratorConfig()


@dataclass
class OrbitSample:
    t: float
    x: np.ndarray
    field: np.ndarray
    jac: np.ndarray

    @classmethod
    def at(cls, f: VectorField, x, t: float = 0.0) -> "OrbitSample":
        x = np.asarray(x, dtype=float)
        return cls(t=float(t), x=x, field=f.eval(x), jac=f.jacobian(x))

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.field))


def _error_norm(err, y, y_new, rel_tol, abs_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def _initial_step(rhs, y0, f0, cfg, abs_tol, direction_span):
    scale = abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    d2 = np.max(np.abs(rhs(y1) - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, cfg.max_step, direction_span)


def dopri_steps(rhs: Callable, y0: np.ndarray, t_end: float, cfg: IntegratorConfig,
                escape: Optional[Callable[[np.ndarray], bool]] = None,
                abs_tol=None, step_hint: Optional[list] = None) -> Iterator[tuple]:
    """Yield ``(t, y)`` after every accepted step of ``y' = rhs(y)`` on ``[0, t_end]``.

    ``t_end`` must be non-negative; the last step lands on ``t_end`` exactly.
    ``abs_tol`` may be a per-component array overriding ``cfg.abs_tol``.
    ``step_hint`` is a one-element list carrying the step size between calls
    that continue the same orbit: read as the first step, overwritten on exit.
    """
    y = np.array(y0, dtype=float)
    if t_end <= 0:
        return
    atol = cfg.abs_tol if abs_tol is None else abs_tol
    t = 0.0
    k1 = rhs(y)
    if step_hint:
        h = min(step_hint[0], cfg.max_step)
    else:
        h = _initial_step(rhs, y, k1, cfg, atol, t_end)
    h_free = h
    err_prev = 1.0
    n = 0
    K = np.empty((7, y.size))
    while t < t_end:
        n += 1
        if n > cfg.max_steps:
            raise StepLimitExceeded(f"more than {cfg.max_steps} steps")
        last = t + h >= t_end * (1 - 1e-15)
        h_free = h
        if last:
            h = t_end - t
        K[0] = k1
        for i in range(1, 6):
            K[i] = rhs(y + h * (_A[i, :i] @ K[:i]))
        y_new = y + h * (_A[6, :6] @ K[:6])
        K[6] = rhs(y_new)
        err = _error_norm(h * (_E @ K), y, y_new, cfg.rel_tol, atol)
        if err <= 1.0:
            t = t_end if last else t + h
            y = y_new
            k1 = K[6].copy()
            if escape is not None and escape(y):
                raise BlowUp(f"trajectory escaped at t={t:.6g}")
            if not np.all(np.isfinite(y)):
                raise BlowUp(f"non-finite state at t={t:.6g}")
            if last and step_hint is not None:
                # an unclipped step that was not rejected; the clipped remainder says little
                step_hint[:] = [max(h_free, h)]
            yield t, y
            err = max(err, 1e-10)
            factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
            err_prev = err
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            factor = max(_MIN_FACTOR, _SAFETY * err ** -_ALPHA)
        h = min(h * factor, cfg.max_step)
        if h < 1e-14 * max(abs(t), t_end):
            raise StepLimitExceeded(f"step size underflow at t={t:.6g}")


def _state_rhs(f: VectorField, sign: float):
    def rhs(y):
        return sign * f.eval(y)
    return rhs


def _tangent_rhs(f: VectorField, sign: float):
    def rhs(y):
        x = y[:3]
        jac = f.jacobian(x)
        out = np.empty(13)
        out[:3] = sign * f.eval(x)
        out[3:12] = (sign * (jac @ y[3:12].reshape(3, 3))).ravel()
        out[12] = sign * (jac[0, 0] + jac[1, 1] + jac[2, 2])
        return out
    return rhs


def _escape(f: VectorField, cfg: IntegratorConfig):
    r = cfg.escape_for(f)
    return lambda y: float(y[0] ** 2 + y[1] ** 2 + y[2] ** 2) > r * r


def _run(rhs, y0, t_abs, cfg, escape, step_hint=None):
    y = np.array(y0, dtype=float)
    for _, y in dopri_steps(rhs, y, t_abs, cfg, escape, step_hint=step_hint):
        pass
    return y


def flow(f: VectorField, x, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``phi_t(x)``; negative ``t`` integrates ``-X``."""
    x = np.asarray(x, dtype=float)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if t == 0:
        return x.copy()
    sign = 1.0 if t > 0 else -1.0
    return _run(_state_rhs(f, sign), x, abs(t), cfg, _escape(f, cfg))


def tangent_flow_with_divergence(f: VectorField, x, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG,
                                 step_hint: Optional[list] = None):
    """Return ``(phi_t(x), Dphi_t(x), int_0^t div X(phi_s x) ds)`` from one joint integration."""
    x = np.asarray(x, dtype=float)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if t == 0:
        return x.copy(), np.eye(3), 0.0
    sign = 1.0 if t > 0 else -1.0
    y0 = np.concatenate([x, np.eye(3).ravel(), [0.0]])
    y = _run(_tangent_rhs(f, sign), y0, abs(t), cfg, _escape(f, cfg), step_hint)
    return y[:3].copy(), y[3:12].reshape(3, 3).copy(), float(y[12])


def tangent_flow(f: VectorField, x, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Return ``(phi_t(x), Dphi_t(x))`` solving the variational equation jointly."""
    p, m, _ = tangent_flow_with_divergence(f, x, t, cfg)
    return p, m


def flow_ensemble(f: VectorField, points, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Flow several points as one joint system, so they share every step size."""
    pts = np.asarray(points, dtype=float)
    if t == 0:
        return pts.copy()
    sign = 1.0 if t > 0 else -1.0
    k = len(pts)
    r = cfg.escape_for(f)

    def rhs(y):
        return np.concatenate([sign * f.eval(y[3 * i:3 * i + 3]) for i in range(k)])

    def escape(y):
        return bool(np.any(np.sum(y.reshape(k, 3) ** 2, axis=1) > r * r))

    return _run(rhs, pts.ravel(), abs(t), cfg, escape).reshape(k, 3)


def flow_jacobian_fd(f: VectorField, x, t: float, h: float = 1e-5,
                     cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Central-difference approximation of ``Dphi_t(x)``, column by column.

    The six displaced points are integrated jointly; with a shared step
    sequence the integration error is smooth in the initial point and largely
    cancels in the differences.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    offsets = h * np.vstack([np.eye(3), -np.eye(3)])
    out = flow_ensemble(f, x + offsets, t, cfg)
    return (out[:3] - out[3:]).T / (2 * h)


@dataclass
class Trajectory:
    """Points at a uniform time spacing, with the tangent map over each interval."""

    times: np.ndarray  # (N,)
    points: np.ndarray  # (N, 3)
    steps: Optional[np.ndarray] = None  # (N-1, 3, 3): Dphi_dt from point k to k+1
    divergence: Optional[np.ndarray] = None  # (N-1,): integral of div X over each interval

    def __len__(self) -> int:
        return len(self.times)


def trajectory(f: VectorField, x, duration: float, dt: float,
               cfg: IntegratorConfig = DEFAULT_CONFIG, with_jacobian: bool = False) -> Trajectory:
    """Integrate forward and record the state every ``dt`` up to ``duration``.

    With ``with_jacobian`` each interval's tangent map is integrated afresh from
    the identity, so products of ``steps`` never accumulate overflow.
    """
    if dt <= 0 or duration < 0:
        raise ValueError("need dt > 0 and duration >= 0")
    n = int(round(duration / dt))
    pts = np.empty((n + 1, 3))
    pts[0] = x
    steps = np.empty((n, 3, 3)) if with_jacobian else None
    div = np.empty(n) if with_jacobian else None
    for k in range(n):
        if with_jacobian:
            pts[k + 1], steps[k], div[k] = tangent_flow_with_divergence(f, pts[k], dt, cfg)
        else:
            pts[k + 1] = flow(f, pts[k], dt, cfg)
    return Trajectory(np.arange(n + 1) * dt, pts, steps, div)


def write_trajectory_csv(path, traj: Trajectory, cumulative_jacobian: bool = False) -> None:
    """CSV with header ``t,x,y,z`` and optionally the 9 entries of ``Dphi_t`` (row-major)."""
    header = ["t", "x", "y", "z"]
    with_jac = cumulative_jacobian and traj.steps is not None
    if with_jac:
        header += [f"j{i}{j}" for i in range(3) for j in range(3)]
    acc = np.eye(3)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(traj)):
            row = [traj.times[k], *traj.points[k]]
            if with_jac:
                if k > 0:
                    acc = traj.steps[k - 1] @ acc
                row += list(acc.ravel())
            w.writerow(["%.17g" % v for v in row])
