"""Numerical proxy for ``W^ss(sigma) meets the sampled set only at sigma``.

Finite sampling cannot decide the intersection property; the report measures
how close the samples come to the local strong-stable manifold.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..errors import NumericalError
from ..field import SingularityInfo, VectorField
from ..flow import flow
from .config import AnalysisConfig
from .report import MEASURED_NOTE, HyperbolicityReport
from .sampling import as_samples


def local_strong_stable(f: VectorField, sigma: SingularityInfo, radius: float,
                        cfg: AnalysisConfig = AnalysisConfig(), seed_fraction: float = 1e-6) -> list:
    """Two polylines from ``sigma`` out to ``radius`` along the strong-stable branches.

    Each branch starts at ``sigma +- delta e_ss`` and is continued by the
    backward flow, which follows the curved manifold instead of the tangent line.
    """
    lam = float(sigma.eigenvalues[0].real)
    if not sigma.lorenz_like_forward:
        raise ValueError("strong-stable separation needs a Lorenz-like singularity")
    e_ss = sigma.eigenvector(0)
    c = sigma.location
    dt = 0.1 / abs(lam)
    delta = seed_fraction * radius
    branches = []
    for sign in (1.0, -1.0):
        pts = [c.copy(), c + sign * delta * e_ss]
        p = pts[-1]
        for _ in range(10_000):
            q = flow(f, p, -dt, cfg.integrator)
            r = float(np.linalg.norm(q - c))
            if r >= radius:
                # cut the last segment at the radius
                r0 = float(np.linalg.norm(p - c))
                w = (radius - r0) / (r - r0)
                pts.append(p + w * (q - p))
                break
            pts.append(q)
            p = q
        branches.append(np.array(pts))
    return branches


def polyline_distance(points: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to a polyline (vectorised over segments)."""
    a = line[:-1][None, :, :]
    d = (line[1:] - line[:-1])[None, :, :]
    p = np.asarray(points, dtype=float)[:, None, :]
    dd = np.sum(d * d, axis=2)
    t = np.clip(np.sum((p - a) * d, axis=2) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    diff = p - (a + t[..., None] * d)
    return np.min(np.linalg.norm(diff, axis=2), axis=1)


def strong_stable_separation(f: VectorField, sigma: SingularityInfo, samples,
                             cfg: AnalysisConfig = AnalysisConfig(),
                             eps: Optional[float] = None) -> HyperbolicityReport:
    """Smallest distance from samples outside the exclusion shell to local ``W^ss(sigma)``."""
    eps = cfg.eps_for(f.box.diagonal) if eps is None else eps
    excl = cfg.exclusion_factor * eps
    pts = np.array([s.x for s in as_samples(f, samples)])
    constants = {"eps": eps, "exclusion_radius": excl, "sep_threshold": cfg.sep_threshold,
                 "sigma": sigma.location.tolist()}
    notes = [MEASURED_NOTE, "proxy: finite samples cannot decide W^ss(sigma) intersection with the set"]
    try:
        branches = local_strong_stable(f, sigma, eps, cfg)
    except NumericalError as exc:
        return HyperbolicityReport("strong_stable_separation", constants, 0.0, None, False,
                                   {"samples": len(pts)}, notes=notes + [f"W^ss unavailable: {type(exc).__name__}"])
    r = np.linalg.norm(pts - sigma.location, axis=1)
    keep = np.nonzero(r >= excl)[0]
    dist = np.full(len(pts), math.inf)
    if len(keep):
        dist[keep] = np.minimum(*[polyline_distance(pts[keep], b) for b in branches])
    dmin = float(np.min(dist[keep])) if len(keep) else math.inf
    arg = int(keep[np.argmin(dist[keep])]) if len(keep) else None
    constants.update({"min_distance": dmin if len(keep) else None, "closest_sample": arg})
    passed = bool(len(keep)) and dmin > cfg.sep_threshold
    frac = float(np.mean(dist[keep] > cfg.sep_threshold)) if len(keep) else 0.0
    return HyperbolicityReport(
        criterion="strong_stable_separation",
        constants=constants,
        pass_fraction=frac,
        worst_margin=cfg.sep_threshold / dmin if len(keep) and dmin > 0 else None,
        passed=passed,
        counts={"samples": len(pts), "used": int(len(keep)), "excluded": int(len(pts) - len(keep))},
        details=[{"sample": int(i), "distance": float(dist[i])} for i in keep],
        notes=notes,
    )
