"""Estimate the invariant splitting ``N = E + F`` of the linear Poincare cocycle."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import NumericalError
from ..field import VectorField, sign_normalize
from .config import AnalysisConfig
from .sampling import as_samples, in_chart_mask, steps_for, windows_for


def line_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle in ``[0, pi/2]`` between the lines spanned by ``a`` and ``b``."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    cross = np.linalg.norm(np.cross(a, b)) if a.size == 3 else abs(a[0] * b[1] - a[1] * b[0])
    return math.atan2(cross, abs(float(a @ b)))


def map_samples(fn: Callable[[int], object], n: int, jobs: int = 1) -> list:
    """``[fn(i) for i in range(n)]``, optionally on a thread pool; order is preserved."""
    if jobs <= 1 or n < 2:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(n)))


def block(window, start: int, length: int) -> np.ndarray:
    """Product of the 2x2 normal steps ``start .. start+length-1``."""
    m = np.eye(2)
    for j in range(start, start + length):
        m = window.normal_step(j) @ m
    return m


def stable_line(window, seed: np.ndarray, horizon: int):
    """``E`` directions at offsets ``0..horizon`` by a backward sweep from ``horizon``.

    Under the inverse cocycle ``E`` is the attracting line, so a seed carried
    back from the far offset converges to it (offsets near ``horizon`` have
    not settled yet) and stays there; pushing ``e``
    forward instead amplifies its error by the domination rate. Returns unit
    directions ``(horizon+1, 2)`` and ``logs[j] = log |psi_j e_j|``.
    The result is memoised on the window, since every criterion asks for it.
    """
    key = (horizon, tuple(np.asarray(seed, dtype=float)))
    memo = window.__dict__.setdefault("_stable_lines", {})
    if key not in memo:
        memo[key] = _sweep_back(window, seed, horizon)
    return memo[key]


def _sweep_back(window, seed, horizon: int):
    dirs = np.empty((horizon + 1, 2))
    logs = np.empty(horizon)
    v = np.asarray(seed, dtype=float)
    v = v / np.linalg.norm(v)
    dirs[horizon] = v
    for j in range(horizon - 1, -1, -1):
        w = np.linalg.solve(window.normal_step(j), v)
        nw = float(np.linalg.norm(w))
        v = w / nw
        dirs[j] = v
        logs[j] = -math.log(nw)
    return dirs, logs


def unstable_line(window, seed: np.ndarray, depth: int):
    """``F`` directions at offsets ``-depth..0`` by a forward sweep from ``-depth``.

    Returns unit directions ``(depth+1, 2)`` indexed by ``j + depth`` and
    ``logs[j + depth] = log |psi_j f_j|`` for ``j = -depth..-1``.
    """
    dirs = np.empty((depth + 1, 2))
    logs = np.empty(depth)
    v = np.asarray(seed, dtype=float)
    v = v / np.linalg.norm(v)
    dirs[0] = v
    for k, j in enumerate(range(-depth, 0)):
        w = window.normal_step(j) @ v
        nw = float(np.linalg.norm(w))
        v = w / nw
        dirs[k + 1] = v
        logs[k] = math.log(nw)
    return dirs, logs


@dataclass
class SplittingEstimate:
    samples: list
    windows: list
    e_dir: np.ndarray  # (n, 2) frame coordinates, NaN where unavailable
    f_dir: np.ndarray
    e_vec: np.ndarray  # (n, 3) embedded in R^3
    f_vec: np.ndarray
    status: list  # "ok", "excluded", "not_converged" or an error name
    iterations: np.ndarray
    T: float
    dt: float
    angle_min: float

    @property
    def converged(self) -> np.ndarray:
        return np.array([s == "ok" for s in self.status], dtype=bool)

    @property
    def excluded(self) -> np.ndarray:
        return np.array([s == "excluded" for s in self.status], dtype=bool)

    @property
    def not_converged_fraction(self) -> float:
        considered = [s for s in self.status if s != "excluded"]
        if not considered:
            return 1.0
        return sum(s != "ok" for s in considered) / len(considered)

    def counts(self) -> dict:
        out = {}
        for s in self.status:
            out[s] = out.get(s, 0) + 1
        return dict(sorted(out.items()))


def _top_left(m: np.ndarray):
    u, s, vt = np.linalg.svd(m)
    return u[:, 0], vt[0], (s[1] / s[0] if s[0] > 0 else 1.0)


def _power_directions(window, b: int, cfg: AnalysisConfig):
    """Return ``(e, f, iterations, ok)`` in frame coordinates at offset 0."""
    p = np.eye(2)
    q = np.eye(2)
    f_prev = e_prev = None
    f_done = e_done = False
    f_sep = e_sep = False
    f = e = None
    k = 0
    for k in range(1, cfg.k_pow + 1):
        if not f_done:
            p = p @ block(window, -k * b, b)
            p /= np.linalg.norm(p)
            f, _, gap = _top_left(p)
            f_sep = gap < 1.0 - cfg.gap_tol
            if f_prev is not None and f_sep and line_angle(f, f_prev) < cfg.dir_tol:
                f_done = True
            f_prev = f
        if not e_done:
            q = block(window, (k - 1) * b, b) @ q
            q /= np.linalg.norm(q)
            _, v1, gap = _top_left(q)
            e = np.array([-v1[1], v1[0]])
            e_sep = gap < 1.0 - cfg.gap_tol
            if e_prev is not None and e_sep and line_angle(e, e_prev) < cfg.dir_tol:
                e_done = True
            e_prev = e
        if f_done and e_done:
            break
    ok = f_done and e_done and line_angle(e, f) > cfg.angle_floor
    return sign_normalize(e), sign_normalize(f), k, ok


def estimate_splitting(f: VectorField, samples, T: Optional[float] = None,
                       cfg: AnalysisConfig = AnalysisConfig(),
                       exclude_centers: Sequence[np.ndarray] = (), eps: Optional[float] = None,
                       windows: Optional[list] = None) -> SplittingEstimate:
    """Power iteration over blocks of length ``T`` (default ``cfg.split_T``).

    ``f_dir`` is the leading output direction of the cocycle product over
    ``k`` blocks ending at the sample, ``e_dir`` the least-expanded input
    direction of the product over ``k`` blocks starting there; ``k`` grows until
    successive iterates agree to ``dir_tol``. Samples with ``|X| <= frame_eps``
    or within the exclusion radius of ``exclude_centers`` are skipped.
    """
    T = cfg.split_T if T is None else T
    samples_list = as_samples(f, samples)
    dt = samples.spacing if hasattr(samples, "spacing") else cfg.spacing
    b = steps_for(T, dt)
    if b < 1:
        raise ValueError("block length must be at least one step")
    wins = windows if windows is not None else windows_for(f, samples, dt, cfg.integrator, cfg.frame_eps)
    n = len(samples_list)
    skip = np.array([s.speed <= cfg.frame_eps for s in samples_list], dtype=bool)
    if len(exclude_centers):
        radius = cfg.exclusion_factor * (eps if eps is not None else cfg.eps_for(f.box.diagonal))
        skip |= in_chart_mask(samples_list, exclude_centers, radius)

    def one(i):
        if skip[i]:
            return None, None, 0, "excluded"
        try:
            e, fd, k, ok = _power_directions(wins[i], b, cfg)
        except NumericalError as exc:
            return None, None, 0, type(exc).__name__
        return e, fd, k, "ok" if ok else "not_converged"

    results = map_samples(one, n, cfg.jobs)
    e_dir = np.full((n, 2), np.nan)
    f_dir = np.full((n, 2), np.nan)
    e_vec = np.full((n, 3), np.nan)
    f_vec = np.full((n, 3), np.nan)
    status, iters = [], np.zeros(n, dtype=int)
    angle_min = math.pi / 2
    for i, (e, fd, k, st) in enumerate(results):
        status.append(st)
        iters[i] = k
        if e is None:
            continue
        e_dir[i], f_dir[i] = e, fd
        basis = wins[i].frame(0)[1]
        e_vec[i], f_vec[i] = basis @ e, basis @ fd
        if st == "ok":
            angle_min = min(angle_min, line_angle(e, fd))
    return SplittingEstimate(samples_list, wins, e_dir, f_dir, e_vec, f_vec, status, iters, T, dt, angle_min)
