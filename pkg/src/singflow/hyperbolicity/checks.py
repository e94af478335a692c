"""Quantitative hyperbolicity criteria evaluated on a splitting estimate."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from ..errors import NumericalError
from ..field import VectorField
from .config import AnalysisConfig
from .report import HyperbolicityReport, grid_report
from .sampling import as_samples, steps_for, windows_for
from .splitting import SplittingEstimate, map_samples, stable_line

LOG_HALF = math.log(0.5)


def _grid_steps(grid: Sequence[float], dt: float) -> list:
    return [steps_for(T, dt) for T in grid]


def forward_log_norms(window, c: np.ndarray, grid_steps: Sequence[int], rescaled: bool = False) -> np.ndarray:
    """``log |psi_T c|`` (or ``psi*_T``) for unit ``c`` at each grid step count."""
    v = np.asarray(c, dtype=float)
    v = v / np.linalg.norm(v)
    acc = 0.0
    out = np.empty(len(grid_steps))
    want = {m: g for g, m in enumerate(grid_steps)}
    for j in range(max(grid_steps)):
        m = window.normal_step(j)
        if rescaled:
            m = m * (window.speed(j) / window.speed(j + 1))
        v = m @ v
        nv = float(np.linalg.norm(v))
        acc += math.log(nv)
        v = v / nv
        if j + 1 in want:
            out[want[j + 1]] = acc
    return out


def e_log_norms(window, e2: np.ndarray, grid_steps: Sequence[int], tail: int,
                rescaled: bool = False) -> np.ndarray:
    """``log |psi_T e|`` (or ``psi*_T``) along the swept ``E`` line, ``tail`` steps of settling."""
    _, logs = stable_line(window, e2, max(grid_steps) + tail)
    cum = np.concatenate([[0.0], np.cumsum(logs)])
    out = np.array([cum[m] for m in grid_steps])
    if rescaled:
        s0 = math.log(window.speed(0))
        out += np.array([s0 - math.log(window.speed(m)) for m in grid_steps])
    return out


def _tail(split: SplittingEstimate) -> int:
    return 2 * steps_for(split.T, split.dt)


def _counts(split: SplittingEstimate, used: Sequence[int], errors: dict) -> dict:
    c = {"samples": len(split.status), "used": len(used), **{f"status_{k}": v for k, v in split.counts().items()}}
    if errors:
        c["check_errors"] = len(errors)
    return c


def _run_per_sample(split: SplittingEstimate, fn, cfg: AnalysisConfig):
    """Evaluate ``fn(i)`` on converged samples; numerical failures are collected, not raised."""
    idx = [i for i, s in enumerate(split.status) if s == "ok"]

    def guarded(k):
        try:
            return fn(idx[k])
        except NumericalError as exc:
            return exc

    res = map_samples(guarded, len(idx), cfg.jobs)
    used, rows, errors = [], [], {}
    for i, r in zip(idx, res):
        if isinstance(r, Exception):
            errors[i] = type(r).__name__
        else:
            used.append(i)
            rows.append(r)
    return used, rows, errors


def _precondition_notes(split: SplittingEstimate) -> list:
    considered = [s for s in split.status if s != "excluded"]
    if considered and split.not_converged_fraction > 0.1:
        return [f"splitting converged on only {1 - split.not_converged_fraction:.3f} of samples"]
    return []


def check_domination(split: SplittingEstimate, f: VectorField, T_grid: Optional[Sequence[float]] = None,
                     rescaled: bool = False, cfg: AnalysisConfig = AnalysisConfig()) -> HyperbolicityReport:
    """Ratio ``|psi_T e| / |psi_T f| <= 1/2``; the margin is twice the ratio.

    The ratio does not depend on frames or on the rescaling scalar, which
    cancels; ``rescaled`` only selects which cocycle is propagated.
    """
    grid = tuple(sorted(T_grid or cfg.grid))
    gs = _grid_steps(grid, split.dt)
    tail = _tail(split)

    def one(i):
        w = split.windows[i]
        le = e_log_norms(w, split.e_dir[i], gs, tail, rescaled)
        lf = forward_log_norms(w, split.f_dir[i], gs, rescaled)
        return np.exp(le - lf - LOG_HALF)

    used, rows, errors = _run_per_sample(split, one, cfg)
    rep = grid_report("domination", grid, np.array(rows), used, cfg.pass_threshold, "T",
                      _counts(split, used, errors), _precondition_notes(split))
    rep.constants["rescaled"] = rescaled
    return rep


def check_2domination(split: SplittingEstimate, f: VectorField, T_grid: Optional[Sequence[float]] = None,
                      cfg: AnalysisConfig = AnalysisConfig()) -> HyperbolicityReport:
    """``max(|psi*_T e|, |psi*_T e|^2) <= 1/2 |psi*_T f|``."""
    grid = tuple(sorted(T_grid or cfg.grid))
    gs = _grid_steps(grid, split.dt)
    tail = _tail(split)

    def one(i):
        w = split.windows[i]
        le = e_log_norms(w, split.e_dir[i], gs, tail, True)
        lf = forward_log_norms(w, split.f_dir[i], gs, True)
        return np.exp(np.maximum(le, 2 * le) - lf - LOG_HALF)

    used, rows, errors = _run_per_sample(split, one, cfg)
    rep = grid_report("two_domination", grid, np.array(rows), used, cfg.pass_threshold, "tau0",
                      _counts(split, used, errors), _precondition_notes(split))
    return rep


def check_e_contraction(split: SplittingEstimate, f: VectorField, t0_grid: Optional[Sequence[float]] = None,
                        rescaled: bool = True, cfg: AnalysisConfig = AnalysisConfig()) -> HyperbolicityReport:
    """``|psi_t0 e| <= 1/2`` (rescaled cocycle by default)."""
    grid = tuple(sorted(t0_grid or cfg.grid))
    gs = _grid_steps(grid, split.dt)
    tail = _tail(split)

    def one(i):
        return np.exp(e_log_norms(split.windows[i], split.e_dir[i], gs, tail, rescaled) - LOG_HALF)

    used, rows, errors = _run_per_sample(split, one, cfg)
    rep = grid_report("e_contraction", grid, np.array(rows), used, cfg.pass_threshold, "t0",
                      _counts(split, used, errors), _precondition_notes(split))
    rep.constants["rescaled"] = rescaled
    return rep


def tangent_stable_logs(window, e2: np.ndarray, grid_steps: Sequence[int], tail: int):
    """``log |Dphi_T|E^s|`` where ``E^s`` is the tangent lift of the normal direction ``e2``.

    In the bases ``(X/|X|, e_j)`` the tangent cocycle restricted to
    ``span(X, e)`` is upper triangular with diagonal ``(rho_j, mu_j)``. The lift
    ``w_j = c_j X/|X| + e_j`` is invariant when
    ``c_j = (mu_j c_{j+1} - a_j) / rho_j``, solved backward from the horizon.
    Returns the log norms and the lift vector at the sample.
    """
    horizon = max(grid_steps) + tail
    # normal directions come from the backward sweep; only the lift is solved here
    dirs, _ = stable_line(window, e2, horizon)
    ux, basis, s = window.frame(0)
    rho = np.empty(horizon)
    mu = np.empty(horizon)
    a = np.empty(horizon)
    for j in range(horizon):
        ux1, basis1, s1 = window.frame(j + 1)
        img = window.step(j) @ (window.frame(j)[1] @ dirs[j])
        a[j] = img @ ux1
        mu[j] = np.linalg.norm(img - a[j] * ux1)
        rho[j] = s1 / s
        s = s1
    c = np.zeros(horizon + 1)
    for j in range(horizon - 1, -1, -1):
        c[j] = (mu[j] * c[j + 1] - a[j]) / rho[j]
    log_mu = np.concatenate([[0.0], np.cumsum(np.log(mu))])
    out = np.array([log_mu[m] + 0.5 * (math.log1p(c[m] ** 2) - math.log1p(c[0] ** 2)) for m in grid_steps])
    lift = c[0] * ux + basis @ dirs[0]
    return out, lift / np.linalg.norm(lift)


def check_tangent_e_contraction(split: SplittingEstimate, f: VectorField,
                                t0_grid: Optional[Sequence[float]] = None,
                                cfg: AnalysisConfig = AnalysisConfig()) -> HyperbolicityReport:
    """``|Dphi_t0 | E^s| <= 1/2`` on the tangent lift of ``e_dir``."""
    grid = tuple(sorted(t0_grid or cfg.grid))
    gs = _grid_steps(grid, split.dt)
    tail = 2 * steps_for(split.T, split.dt)

    def one(i):
        logs, _ = tangent_stable_logs(split.windows[i], split.e_dir[i], gs, tail)
        return np.exp(logs - LOG_HALF)

    used, rows, errors = _run_per_sample(split, one, cfg)
    return grid_report("tangent_e_contraction", grid, np.array(rows), used, cfg.pass_threshold, "T",
                       _counts(split, used, errors), _precondition_notes(split))


def cu_planes_from_splitting(split: SplittingEstimate) -> list:
    """Orthonormal 3x2 bases ``[X/|X|, f_dir]`` (None where the splitting failed)."""
    planes = []
    for i, st in enumerate(split.status):
        if st != "ok":
            planes.append(None)
            continue
        ux = split.windows[i].frame(0)[0]
        planes.append(np.column_stack([ux, split.f_vec[i]]))
    return planes


def backward_area_logs(window, plane: np.ndarray, grid_steps: Sequence[int]) -> np.ndarray:
    """``log |Dphi_{-T} v1 ^ Dphi_{-T} v2|`` for an orthonormal plane basis ``(v1, v2)``.

    With ``M = Dphi_T(phi_{-T} x)`` the area factor is ``|M^T n| / |det M|``,
    ``n`` the unit normal of the plane; ``M^T n`` is accumulated one step at a
    time going backward.
    """
    n = np.cross(plane[:, 0], plane[:, 1])
    n = n / np.linalg.norm(n)
    acc = 0.0
    logdet = 0.0
    out = np.empty(len(grid_steps))
    want = {m: g for g, m in enumerate(grid_steps)}
    for k in range(1, max(grid_steps) + 1):
        s = window.step(-k)
        n = s.T @ n
        nn = float(np.linalg.norm(n))
        acc += math.log(nn)
        n = n / nn
        logdet += math.log(abs(np.linalg.det(s)))
        if k in want:
            out[want[k]] = acc - logdet
    return out


def cu_area_logs(window, grid_steps: Sequence[int], warmup: int) -> np.ndarray:
    """``log |Jac(Dphi_{-T}|E^cu(x))|`` from a forward-attracted centre-unstable plane.

    A plane ``span(X, v)`` started ``warmup`` steps before ``phi_{-T} x`` is
    carried forward; it converges to ``E^cu`` because ``F`` dominates. Its area
    growth from ``phi_{-T} x`` to ``x`` factors as
    ``(|X(x)| / |X(phi_{-T} x)|) * |psi_T v|``. Propagating the plane's normal
    backward instead would amplify errors by the domination rate.
    """
    start = -(max(grid_steps) + warmup)
    v = np.array([1.0, 1.0]) / math.sqrt(2.0)
    cum = {}
    acc = 0.0
    for j in range(start, 0):
        v = window.normal_step(j) @ v
        nv = float(np.linalg.norm(v))
        acc += math.log(nv)
        v = v / nv
        cum[j + 1] = acc
    ls0 = math.log(window.speed(0))
    out = [-(ls0 - math.log(window.speed(-m)) + acc - cum[-m]) for m in grid_steps]
    return np.array(out)


def check_sectional_expansion(f: VectorField, samples, cu_planes: Optional[Sequence] = None,
                              T_grid: Optional[Sequence[float]] = None,
                              cfg: AnalysisConfig = AnalysisConfig()) -> HyperbolicityReport:
    """Backward area contraction ``|Jac(Dphi_{-T}|_P)| <= 1/2`` on the centre-unstable planes.

    ``samples`` may be a ``SplittingEstimate``, in which case ``cu_planes``
    defaults to ``span(X, f_dir)`` and its windows are reused; that plane is
    then obtained by forward attraction (see ``cu_area_logs``). Explicit planes
    are transported exactly through their normal covector.
    """
    grid = tuple(sorted(T_grid or cfg.grid))
    attracted = isinstance(samples, SplittingEstimate) and cu_planes is None
    warmup = 0
    if isinstance(samples, SplittingEstimate):
        split = samples
        warmup = steps_for(cfg.k_pow * split.T, split.dt)
        wins, dt = split.windows, split.dt
        planes = cu_planes if cu_planes is not None else cu_planes_from_splitting(split)
        n = len(split.status)
        status = split.counts()
    else:
        dt = samples.spacing if hasattr(samples, "spacing") else cfg.spacing
        wins = windows_for(f, samples, dt, cfg.integrator, cfg.frame_eps)
        planes = cu_planes
        n = len(wins)
        status = {}
        if planes is None:
            raise ValueError("cu_planes required when no splitting is given")
    gs = _grid_steps(grid, dt)
    idx = [i for i in range(n) if planes[i] is not None]

    def guarded(k):
        i = idx[k]
        try:
            if attracted:
                return np.exp(cu_area_logs(wins[i], gs, warmup) - LOG_HALF)
            return np.exp(backward_area_logs(wins[i], np.asarray(planes[i], dtype=float), gs) - LOG_HALF)
        except NumericalError as exc:
            return exc

    res = map_samples(guarded, len(idx), cfg.jobs)
    used, rows, errors = [], [], {}
    for i, r in zip(idx, res):
        if isinstance(r, Exception):
            errors[i] = type(r).__name__
        else:
            used.append(i)
            rows.append(r)
    counts = {"samples": n, "used": len(used), **{f"status_{k}": v for k, v in status.items()}}
    if errors:
        counts["check_errors"] = len(errors)
    return grid_report("sectional_expansion", grid, np.array(rows), used, cfg.pass_threshold, "T", counts)


def mixed_domination_equivalence(f: VectorField, split: SplittingEstimate,
                                 T_grid: Optional[Sequence[float]] = None,
                                 cfg: AnalysisConfig = AnalysisConfig()) -> HyperbolicityReport:
    """Compare (I) a tangent 1-2 dominated splitting with the flow direction in ``F``
    against (II) uniform contraction of ``E`` by the rescaled cocycle, per sample.

    (I) uses only singular values of ``Dphi_T``: ``s3 <= 1/2 min(s2, |Dphi_T X|/|X|)``.
    (II) uses ``|psi*_T e| <= 1/2``, or the least singular value of ``psi*_T``
    where the normal splitting did not converge. A sample satisfies a property
    when some grid time does.
    """
    grid = tuple(sorted(T_grid or cfg.grid))
    gs = _grid_steps(grid, split.dt)
    want = {m: g for g, m in enumerate(gs)}
    tail = _tail(split)
    idx = [i for i, s in enumerate(split.status) if s != "excluded"]

    def one(k):
        i = idx[k]
        w = split.windows[i]
        try:
            m3 = np.eye(3)
            p2 = np.eye(2)
            ok1 = np.zeros(len(grid), dtype=bool)
            ok2 = np.zeros(len(grid), dtype=bool)
            s0 = w.speed(0)
            use_e = split.status[i] == "ok"
            le = e_log_norms(w, split.e_dir[i], gs, tail, True) if use_e else None
            for j in range(max(gs)):
                m3 = w.step(j) @ m3
                p2 = w.normal_step(j) @ p2
                if j + 1 in want:
                    g = want[j + 1]
                    sv = np.linalg.svd(m3, compute_uv=False)
                    flow_growth = w.speed(j + 1) / s0
                    ok1[g] = sv[2] <= 0.5 * min(sv[1], flow_growth)
                    ps = p2 * (s0 / w.speed(j + 1))
                    if use_e:
                        ok2[g] = le[g] <= LOG_HALF
                    else:
                        ok2[g] = np.linalg.svd(ps, compute_uv=False)[1] <= 0.5
            return ok1, ok2
        except NumericalError as exc:
            return exc

    res = map_samples(one, len(idx), cfg.jobs)
    details, errors = [], {}
    agree = []
    first1, first2 = [], []
    for i, r in zip(idx, res):
        if isinstance(r, Exception):
            errors[i] = type(r).__name__
            continue
        ok1, ok2 = r
        p1, p2 = bool(ok1.any()), bool(ok2.any())
        agree.append(p1 == p2)
        first1.append(ok1)
        first2.append(ok2)
        if p1 != p2:
            details.append({"sample": i, "tangent_dominated": p1, "rescaled_e_contracted": p2})
    n_used = len(agree)
    frac = float(np.mean(agree)) if n_used else 0.0

    def smallest_all(rows):
        if not rows:
            return None
        allrows = np.all(np.array(rows), axis=0)
        hits = np.nonzero(allrows)[0]
        return float(grid[hits[0]]) if len(hits) else None

    return HyperbolicityReport(
        criterion="mixed_domination",
        constants={
            "agreement": frac,
            "disagreement": 1.0 - frac if n_used else None,
            "tangent_T_all": smallest_all(first1),
            "rescaled_T_all": smallest_all(first2),
            "tangent_fraction": float(np.mean([r.any() for r in first1])) if n_used else None,
            "rescaled_fraction": float(np.mean([r.any() for r in first2])) if n_used else None,
        },
        pass_fraction=frac,
        worst_margin=None,
        passed=n_used > 0 and frac >= cfg.pass_threshold,
        counts={"samples": len(split.status), "used": n_used, "check_errors": len(errors)},
        details=details,
    )
