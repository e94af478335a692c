"""Normal frames, the linear and sectional Poincare flows, their rescalings, and
the identification projections between nearby normal sections.

Vectors in a normal plane are passed around as 2-vectors of coordinates in the
deterministic frame ``(n1, n2)`` of that plane. Functions taking a normal
vector also accept a 3-vector lying in the plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AmbiguousCrossing, NearSingularity, NoCrossing, OutOfDomain
from .field import VectorField
from .flow import DEFAULT_CONFIG, IntegratorConfig, _escape, dopri_steps, flow, tangent_flow

_E1 = np.array([1.0, 0.0, 0.0])
_E3 = np.array([0.0, 0.0, 1.0])
_REFERENCES = (_E3, _E1)


@dataclass(frozen=True)
class PoincareConfig:
    integrator: IntegratorConfig = DEFAULT_CONFIG
    frame_eps: float = 1e-8
    beta_sec: float = 0.05
    tau_max: float = 0.25
    s_max: float = 0.25
    beta0: float = 0.05
    r0_factor: float = 0.1
    tube_factor: float = 20.0
    crossing_tol: float = 1e-12


DEFAULT_POINCARE = PoincareConfig()


@dataclass(frozen=True, eq=False)
class NormalFrame:
    base: np.ndarray
    unit_field: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    speed: float

    @property
    def basis(self) -> np.ndarray:
        """3x2 matrix with columns ``n1, n2``."""
        return np.column_stack([self.n1, self.n2])

    def coords(self, v) -> np.ndarray:
        return self.basis.T @ np.asarray(v, dtype=float)

    def embed(self, c) -> np.ndarray:
        return self.basis @ np.asarray(c, dtype=float)


def frame_from_direction(base, direction, speed: Optional[float] = None) -> NormalFrame:
    """Frame of the plane orthogonal to ``direction`` (need not be unit)."""
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    u = d / norm
    for r in _REFERENCES:
        if abs(r @ u) < 0.9:
            break
    n1 = r - (r @ u) * u
    n1 /= np.linalg.norm(n1)
    n2 = np.cross(u, n1)
    return NormalFrame(np.asarray(base, dtype=float), u, n1, n2, norm if speed is None else speed)


def normal_frame(f: VectorField, x, cfg: PoincareConfig = DEFAULT_POINCARE) -> NormalFrame:
    x = np.asarray(x, dtype=float)
    v = f.eval(x)
    speed = float(np.linalg.norm(v))
    if speed <= cfg.frame_eps:
        raise NearSingularity(f"|X(x)| = {speed:.3g} <= frame_eps at {x}")
    return frame_from_direction(x, v, speed)


def section_radius(frame: NormalFrame, cfg: PoincareConfig = DEFAULT_POINCARE) -> float:
    return cfg.beta_sec * frame.speed


@dataclass(frozen=True, eq=False)
class PoincareCocycle:
    source: NormalFrame
    target: NormalFrame
    t: float
    mat: np.ndarray
    rescaled: bool = False

    def __matmul__(self, earlier: "PoincareCocycle") -> "PoincareCocycle":
        """``later @ earlier``: the cocycle over the concatenated interval."""
        if self.rescaled != earlier.rescaled:
            raise ValueError("cannot compose rescaled with unrescaled cocycles")
        return PoincareCocycle(earlier.source, self.target, earlier.t + self.t,
                               self.mat @ earlier.mat, self.rescaled)

    def apply(self, c) -> np.ndarray:
        return self.mat @ _as_coords(self.source, c)

    def rescale(self) -> "PoincareCocycle":
        if self.rescaled:
            return self
        ratio = self.source.speed / self.target.speed
        return PoincareCocycle(self.source, self.target, self.t, ratio * self.mat, True)


def _as_coords(frame: NormalFrame, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape == (2,):
        return v
    if v.shape != (3,):
        raise ValueError("normal vectors are 2 frame coordinates or a 3-vector")
    along = float(v @ frame.unit_field)
    if abs(along) > 1e-9 * max(1.0, float(np.linalg.norm(v))):
        raise ValueError("3-vector is not in the normal plane")
    return frame.coords(v)


def cocycle_from_tangent(f: VectorField, x, y, jac: np.ndarray, t: float,
                         cfg: PoincareConfig = DEFAULT_POINCARE) -> PoincareCocycle:
    """Linear Poincare cocycle from a known tangent map ``jac = Dphi_t(x)`` with ``y = phi_t(x)``."""
    src = normal_frame(f, x, cfg)
    dst = normal_frame(f, y, cfg)
    # target basis is orthogonal to X(y), so projecting first is implicit
    return PoincareCocycle(src, dst, t, dst.basis.T @ jac @ src.basis)


def project_normal(v: np.ndarray, field_at_target: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the plane orthogonal to ``field_at_target``."""
    return v - (v @ field_at_target) / (field_at_target @ field_at_target) * field_at_target


def linear_poincare(f: VectorField, x, t: float, cfg: PoincareConfig = DEFAULT_POINCARE) -> PoincareCocycle:
    normal_frame(f, x, cfg)
    y, jac = tangent_flow(f, x, t, cfg.integrator)
    return cocycle_from_tangent(f, x, y, jac, t, cfg)


def rescaled_linear_poincare(f: VectorField, x, t: float,
                             cfg: PoincareConfig = DEFAULT_POINCARE) -> PoincareCocycle:
    return linear_poincare(f, x, t, cfg).rescale()


# --- sectional Poincare flow -------------------------------------------------

@dataclass
class Crossing:
    coords: np.ndarray  # in-plane displacement in the target frame
    tau: float  # crossing-time offset
    displacement: np.ndarray  # 3-vector from the plane's base point


def _displacement_rhs(f: VectorField, base: np.ndarray, sign: float):
    return lambda w: sign * f.eval(base + w)


def _refine(f, base, normal, sign, tau_a, w_a, g_a, tau_b, g_b, cfg, atol, scale):
    """Illinois-modified secant on ``g(tau) = <w(tau), normal>`` inside ``[tau_a, tau_b]``."""
    del sign  # tau is signed time; each re-integration picks its own direction
    lo_tau, lo_w, lo_g = tau_a, w_a, g_a
    hi_tau, hi_g = tau_b, g_b
    side = 0
    best = (lo_tau, lo_w, lo_g)
    for _ in range(100):
        tau = lo_tau - lo_g * (hi_tau - lo_tau) / (hi_g - lo_g)
        step = tau - lo_tau
        w = lo_w.copy()
        # re-integrate from the left bracket end; signs of step match the search direction
        for _, w in dopri_steps(_displacement_rhs(f, base, float(np.sign(step))), lo_w, abs(step),
                                cfg.integrator, abs_tol=atol):
            pass
        g = float(w @ normal)
        best = (tau, w, g)
        if abs(g) <= cfg.crossing_tol * scale or abs(hi_tau - lo_tau) <= 1e-15 * max(1.0, abs(tau)):
            return best
        if np.sign(g) == np.sign(lo_g):
            lo_tau, lo_w, lo_g = tau, w, g
            if side == -1:
                hi_g *= 0.5
            side = -1
        else:
            hi_tau, hi_g = tau, g
            if side == 1:
                lo_g *= 0.5
            side = 1
    return best


def _cross_plane(f: VectorField, base: np.ndarray, normal: np.ndarray, w0: np.ndarray,
                 window: float, tube: float, cfg: PoincareConfig, atol) -> list:
    """All sign changes of ``<w, normal>`` along the orbit of ``base + w0`` within ``|tau| < window``.

    Returns a list of ``(tau, w)`` sorted by ``|tau|``. ``normal`` must be a unit vector.
    """
    g0 = float(w0 @ normal)
    scale = max(float(np.linalg.norm(w0)), 1e-300)
    if abs(g0) <= cfg.crossing_tol * scale:
        return [(0.0, w0.copy())]
    found = []
    left_tube = False
    for sign in (1.0, -1.0):
        tau_prev, w_prev, g_prev = 0.0, w0, g0
        rhs = _displacement_rhs(f, base, sign)
        for s, w in dopri_steps(rhs, w0, window, cfg.integrator, abs_tol=atol):
            if np.linalg.norm(w) > tube:
                left_tube = True
                break
            g = float(w @ normal)
            tau = sign * s
            if np.sign(g) != np.sign(g_prev) or g == 0.0:
                if g == 0.0:
                    found.append((tau, w.copy()))
                else:
                    t_hit, w_hit, _ = _refine(f, base, normal, sign, tau_prev, w_prev, g_prev, tau, g,
                                              cfg, atol, scale)
                    found.append((t_hit, w_hit))
            tau_prev, w_prev, g_prev = tau, w.copy(), g
    if not found and left_tube:
        raise OutOfDomain(f"left tube radius {tube:.3g} before crossing")
    found.sort(key=lambda p: abs(p[0]))
    return found


def sectional_poincare_full(f: VectorField, x, v, t: float,
                            cfg: PoincareConfig = DEFAULT_POINCARE) -> Crossing:
    x = np.asarray(x, dtype=float)
    src = normal_frame(f, x, cfg)
    c = _as_coords(src, v)
    v3 = src.embed(c)
    vnorm = float(np.linalg.norm(v3))
    if vnorm > section_radius(src, cfg) * (1 + 1e-12):
        raise OutOfDomain("|v| exceeds the section radius")
    # joint integration of the base orbit p and the displacement d = z - p
    sign = 1.0 if t >= 0 else -1.0
    p, d = x.copy(), v3.copy()
    if t != 0:
        def rhs(y):
            pp = y[:3]
            xp = f.eval(pp)
            return sign * np.concatenate([xp, f.eval(pp + y[3:]) - xp])

        atol = np.concatenate([np.full(3, cfg.integrator.abs_tol),
                               np.full(3, cfg.integrator.rel_tol * max(vnorm, 1e-300))])
        esc = _escape(f, cfg.integrator)
        y = np.concatenate([p, d])
        for _, y in dopri_steps(rhs, y, abs(t), cfg.integrator, escape=esc, abs_tol=atol):
            pass
        p, d = y[:3].copy(), y[3:].copy()
    dst = normal_frame(f, p, cfg)
    if vnorm == 0.0:
        return Crossing(np.zeros(2), 0.0, np.zeros(3))
    tube = cfg.tube_factor * max(section_radius(src, cfg), section_radius(dst, cfg), float(np.linalg.norm(d)))
    atol_w = np.full(3, cfg.integrator.rel_tol * max(float(np.linalg.norm(d)), 1e-300))
    hits = _cross_plane(f, p, dst.unit_field, d, cfg.tau_max, tube, cfg, atol_w)
    if not hits:
        raise NoCrossing(f"no section crossing within |tau| < {cfg.tau_max}")
    tau, w = hits[0]
    w = w - (w @ dst.unit_field) * dst.unit_field
    return Crossing(dst.coords(w), tau, w)


def sectional_poincare(f: VectorField, x, v, t: float, cfg: PoincareConfig = DEFAULT_POINCARE) -> np.ndarray:
    """Holonomy ``P_t`` between the normal sections at ``x`` and ``phi_t(x)``, in frame coordinates."""
    return sectional_poincare_full(f, x, v, t, cfg).coords


def rescaled_sectional_poincare(f: VectorField, x, u, t: float,
                                cfg: PoincareConfig = DEFAULT_POINCARE) -> np.ndarray:
    """``P*_t(u) = |X(phi_t x)|^-1 P_t(|X(x)| u)``."""
    x = np.asarray(x, dtype=float)
    src = normal_frame(f, x, cfg)
    c = _as_coords(src, u)
    y = flow(f, x, t, cfg.integrator)
    dst = normal_frame(f, y, cfg)
    return sectional_poincare(f, x, src.speed * c, t, cfg) / dst.speed


# --- identifications between nearby sections -------------------------------

def identification_project(f: VectorField, y, x, u, cfg: PoincareConfig = DEFAULT_POINCARE):
    """Rescaled projection from the normal section at ``y`` to the one at ``x``.

    Returns ``(coords, s)``: the crossing point's displacement from ``x`` in
    units of ``|X(x)|``, in the frame at ``x``, and the flight time ``s``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = normal_frame(f, x, cfg)
    fy = normal_frame(f, y, cfg)
    if np.linalg.norm(x - y) >= cfg.r0_factor * fx.speed * (1 + 1e-12):
        raise OutOfDomain("points farther apart than r0")
    c = _as_coords(fy, u)
    if np.linalg.norm(c) >= cfg.beta0:
        raise OutOfDomain("|u| >= beta0")
    w0 = (y - x) + fy.speed * fy.embed(c)
    tube = cfg.tube_factor * max(section_radius(fx, cfg), float(np.linalg.norm(w0)))
    atol = np.full(3, cfg.integrator.abs_tol)
    hits = _cross_plane(f, x, fx.unit_field, w0, cfg.s_max, tube, cfg, atol)
    if not hits:
        raise NoCrossing(f"no crossing of the section at x within |s| < {cfg.s_max}")
    if len(hits) > 1:
        raise AmbiguousCrossing(f"{len(hits)} crossings within |s| < {cfg.s_max}")
    s, w = hits[0]
    w = w - (w @ fx.unit_field) * fx.unit_field
    return fx.coords(w) / fx.speed, s
