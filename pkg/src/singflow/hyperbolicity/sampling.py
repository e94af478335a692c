"""Orbit samples and the tangent/normal cocycle windows around them.

A window gives, for integer offsets ``j`` around a sample, the orbit point
``phi_{j dt}(x)`` and the tangent map over ``[j dt, (j+1) dt]``. Windows over a
long precomputed attractor orbit are views into shared arrays; windows around
free-standing samples integrate lazily in both time directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import NearSingularity, NumericalError
from ..field import VectorField
from ..flow import DEFAULT_CONFIG, IntegratorConfig, OrbitSample, flow, tangent_flow_with_divergence
from ..poincare import frame_from_direction


class WindowExhausted(NumericalError):
    """The requested offset lies outside the available orbit."""


def frame_basis(f: VectorField, x, frame_eps: float):
    """Return ``(unit_field, 3x2 normal basis, speed)`` or raise ``NearSingularity``."""
    v = f.eval(x)
    speed = float(np.linalg.norm(v))
    if speed <= frame_eps:
        raise NearSingularity(f"|X| = {speed:.3g} at {x}")
    fr = frame_from_direction(x, v, speed)
    return fr.unit_field, fr.basis, speed


class Window:
    """Interface: ``point(j)``, ``step(j)``, ``div(j)``, ``frame(j)``, ``normal_step(j)``."""

    dt: float

    def normal_step(self, j: int) -> np.ndarray:
        """2x2 linear Poincare map from offset ``j`` to ``j+1`` in the deterministic frames."""
        _, b0, _ = self.frame(j)
        _, b1, _ = self.frame(j + 1)
        return b1.T @ self.step(j) @ b0

    def speed(self, j: int) -> float:
        return self.frame(j)[2]


class LazyWindow(Window):
    def __init__(self, f: VectorField, x, dt: float, cfg: IntegratorConfig, frame_eps: float):
        self.f, self.dt, self.cfg, self.frame_eps = f, dt, cfg, frame_eps
        self._pts = {0: np.asarray(x, dtype=float)}
        self._steps, self._div, self._frames = {}, {}, {}
        self._lo = self._hi = 0
        self._hint_fwd, self._hint_back = [], []  # step sizes carried across extensions

    def _extend_to(self, j: int):
        while j > self._hi:
            p, m, d = tangent_flow_with_divergence(self.f, self._pts[self._hi], self.dt, self.cfg,
                                                   self._hint_fwd)
            self._steps[self._hi], self._div[self._hi] = m, d
            self._hi += 1
            self._pts[self._hi] = p
        while j < self._lo:
            p, m, d = tangent_flow_with_divergence(self.f, self._pts[self._lo], -self.dt, self.cfg,
                                                   self._hint_back)
            self._lo -= 1
            self._pts[self._lo] = p
            self._steps[self._lo], self._div[self._lo] = np.linalg.inv(m), -d

    def point(self, j: int) -> np.ndarray:
        self._extend_to(j)
        return self._pts[j]

    def step(self, j: int) -> np.ndarray:
        self._extend_to(j)
        self._extend_to(j + 1)
        return self._steps[j]

    def div(self, j: int) -> float:
        self.step(j)
        return self._div[j]

    def frame(self, j: int):
        if j not in self._frames:
            self._frames[j] = frame_basis(self.f, self.point(j), self.frame_eps)
        return self._frames[j]


class OrbitWindow(Window):
    def __init__(self, orbit: "AttractorSample", center: int):
        self.orbit, self.center, self.dt = orbit, center, orbit.spacing

    def _abs(self, j: int) -> int:
        k = self.center + j
        if not 0 <= k < len(self.orbit.points):
            raise WindowExhausted(f"offset {j} outside the stored orbit")
        return k

    def point(self, j: int) -> np.ndarray:
        return self.orbit.points[self._abs(j)]

    def step(self, j: int) -> np.ndarray:
        k = self._abs(j)
        self._abs(j + 1)
        return self.orbit.steps[k]

    def div(self, j: int) -> float:
        k = self._abs(j)
        self._abs(j + 1)
        return float(self.orbit.divergence[k])

    def frame(self, j: int):
        return self.orbit.frame(self._abs(j))

    def normal_step(self, j: int) -> np.ndarray:
        k = self._abs(j)
        self._abs(j + 1)
        return self.orbit.normal_step(k)


@dataclass(eq=False)
class AttractorSample:
    """A long orbit at uniform spacing with samples ``first .. first+n-1`` reported.

    Behaves as a sequence of the reported ``OrbitSample`` objects.
    """

    f: VectorField
    spacing: float
    points: np.ndarray  # (N, 3)
    steps: np.ndarray  # (N-1, 3, 3)
    divergence: np.ndarray  # (N-1,)
    first: int
    n: int
    frame_eps: float
    samples: list = field(default_factory=list)
    near_singular: np.ndarray = None
    _frames: dict = field(default_factory=dict, repr=False)
    _normal: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.samples = [OrbitSample.at(self.f, self.points[self.first + i], (self.first + i) * self.spacing)
                        for i in range(self.n)]
        self.near_singular = np.array([s.speed <= self.frame_eps for s in self.samples], dtype=bool)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i):
        return self.samples[i]

    def __iter__(self):
        return iter(self.samples)

    def frame(self, k: int):
        if k not in self._frames:
            self._frames[k] = frame_basis(self.f, self.points[k], self.frame_eps)
        return self._frames[k]

    def normal_step(self, k: int) -> np.ndarray:
        if k not in self._normal:
            _, b0, _ = self.frame(k)
            _, b1, _ = self.frame(k + 1)
            self._normal[k] = b1.T @ self.steps[k] @ b0
        return self._normal[k]

    def window(self, i: int) -> OrbitWindow:
        return OrbitWindow(self, self.first + i)

    @property
    def history(self) -> float:
        return self.first * self.spacing

    @property
    def future(self) -> float:
        return (len(self.points) - 1 - (self.first + self.n - 1)) * self.spacing


def sample_attractor(f: VectorField, seed, transient: float, n: int, spacing: float,
                     cfg: IntegratorConfig = DEFAULT_CONFIG, history: float = 0.0,
                     future: float = 0.0, frame_eps: float = 1e-8) -> AttractorSample:
    """Integrate past ``transient`` and keep ``n`` samples every ``spacing``.

    ``history`` (taken from the end of the transient) and ``future`` extend the
    stored tangent data before the first and after the last sample, which is
    what the splitting and the backward-time criteria consume.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spacing <= 0 or transient < 0:
        raise ValueError("need spacing > 0 and transient >= 0")
    hist_steps = min(int(round(history / spacing)), int(transient / spacing + 1e-9))
    fut_steps = int(np.ceil(future / spacing - 1e-9))
    plain = transient - hist_steps * spacing
    start = flow(f, seed, plain, cfg) if plain > 0 else np.asarray(seed, dtype=float)
    total = hist_steps + (n - 1) + fut_steps
    pts = np.empty((total + 1, 3))
    steps = np.empty((total, 3, 3))
    div = np.empty(total)
    pts[0] = start
    for k in range(total):
        pts[k + 1], steps[k], div[k] = tangent_flow_with_divergence(f, pts[k], spacing, cfg)
    return AttractorSample(f, spacing, pts, steps, div, hist_steps, n, frame_eps)


def windows_for(f: VectorField, samples, dt: float, cfg: IntegratorConfig, frame_eps: float) -> list:
    """One window per sample; shared-orbit views when ``samples`` is an ``AttractorSample``."""
    if isinstance(samples, AttractorSample):
        if abs(samples.spacing - dt) > 1e-12 * dt:
            raise ValueError("window step must equal the attractor sample spacing")
        return [samples.window(i) for i in range(len(samples))]
    out = []
    for s in samples:
        x = s.x if isinstance(s, OrbitSample) else s
        out.append(LazyWindow(f, x, dt, cfg, frame_eps))
    return out


def as_samples(f: VectorField, samples) -> list:
    if isinstance(samples, AttractorSample):
        return list(samples.samples)
    return [s if isinstance(s, OrbitSample) else OrbitSample.at(f, s) for s in samples]


def steps_for(T: float, dt: float) -> int:
    m = T / dt
    k = int(round(m))
    if k < 0 or abs(m - k) > 1e-9 * max(1.0, m):
        raise ValueError(f"time {T} is not a multiple of the window step {dt}")
    return k


def in_chart_mask(samples: Sequence[OrbitSample], centers: Sequence[np.ndarray], eps: float) -> np.ndarray:
    mask = np.zeros(len(samples), dtype=bool)
    for c in centers:
        for i, s in enumerate(samples):
            if np.linalg.norm(s.x - c) < eps:
                mask[i] = True
    return mask
