"""End-to-end singular-hyperbolicity verdict.

Why contraction of ``E`` plus domination is enough near a singularity: by
the criterion for rescaled cocycles, uniform contraction of ``E`` under
``psi*`` together with domination and Lorenz-like singularities gives the
tangent splitting ``E^s + E^cu``; sectional expansion is then checked
directly on ``E^cu = span(X, F)``.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np

from ..blowup import aligned_regular_matrix, blowup_coords, fiber_rescaled_linear_poincare, make_chart, \
    verify_extension_limit
from ..errors import NumericalError
from ..field import Box, VectorField, classify_singularity, find_singularities
from .checks import check_domination, check_e_contraction, check_sectional_expansion, \
    check_tangent_e_contraction, mixed_domination_equivalence
from .config import AnalysisConfig
from .report import MEASURED_NOTE, HyperbolicityReport
from .sampling import AttractorSample, as_samples, sample_attractor
from .separation import strong_stable_separation
from .splitting import estimate_splitting

log = logging.getLogger(__name__)

GATING = ("domination", "e_contraction", "tangent_e_contraction", "sectional_expansion")


def reversed_orbit(orbit: AttractorSample) -> AttractorSample:
    """The same stored orbit read as an orbit of ``-X`` (sample order reversed)."""
    n_pts = len(orbit.points)
    steps = np.linalg.inv(orbit.steps[::-1])
    first = n_pts - 1 - (orbit.first + orbit.n - 1)
    return AttractorSample(orbit.f.negated(), orbit.spacing, orbit.points[::-1].copy(), steps,
                           -orbit.divergence[::-1].copy(), first, orbit.n, orbit.frame_eps)


def _fiber_cross_check(f: VectorField, chart, samples, t: float, cfg: AnalysisConfig) -> dict:
    """Compare the nearest in-chart sample with the fiber formula in its direction."""
    pts = np.array([s.x for s in samples])
    r = np.linalg.norm(pts - chart.center, axis=1)
    i = int(np.argmin(r))
    out = {"sample": i, "distance": float(r[i])}
    try:
        s, u = blowup_coords(chart, pts[i])
        m, _ = aligned_regular_matrix(chart, u, s, t, cfg.poincare)
        target = fiber_rescaled_linear_poincare(chart, u, t)
        out["error_at_sample"] = float(np.linalg.norm(m - target))
        rep = verify_extension_limit(chart, u, t, [abs(s) * 10.0 ** -k for k in (1, 2, 3)], cfg.poincare)
        out["limit_slope"] = rep.slope
        out["limit_extrapolated_error"] = rep.extrapolated_error
        out["limit_failures"] = rep.failures
    except NumericalError as exc:
        out["error"] = type(exc).__name__
    return out


def _one_orientation(f: VectorField, samples, infos: list, cfg: AnalysisConfig, eps: float,
                     label: str) -> HyperbolicityReport:
    pts = np.array([s.x for s in as_samples(f, samples)])
    reasons, sub, extra = [], {}, {}
    in_set = [k for k, inf in enumerate(infos) if np.min(np.linalg.norm(pts - inf.location, axis=1)) < eps]
    for k in in_set:
        if not infos[k].lorenz_like_forward:
            reasons.append(f"singularity {k} meets the sample set and is not Lorenz-like for {label}")
    centers = [infos[k].location for k in in_set]
    split = estimate_splitting(f, samples, cfg=cfg, exclude_centers=centers, eps=eps)
    counts = {"samples": len(split.status), **{f"status_{k}": v for k, v in split.counts().items()}}
    constants = {"orientation": label, "eps": eps, "splitting_angle_min": split.angle_min,
                 "singularities_in_set": in_set}
    if split.not_converged_fraction > cfg.notconv_limit:
        if np.all(split.excluded):
            why = "every sample lies inside a singular chart"
        else:
            why = f"splitting not converged on {split.not_converged_fraction:.3f} of samples"
        constants.update({"verdict": "inconclusive", "T": None, "reasons": reasons + [why]})
        return HyperbolicityReport("singular_hyperbolic", constants, 0.0, None, False, counts,
                                   notes=[MEASURED_NOTE])

    sub["domination"] = check_domination(split, f, cfg=cfg)
    sub["e_contraction"] = check_e_contraction(split, f, rescaled=True, cfg=cfg)
    sub["tangent_e_contraction"] = check_tangent_e_contraction(split, f, cfg=cfg)
    sub["sectional_expansion"] = check_sectional_expansion(f, split, cfg=cfg)
    sub["mixed_domination"] = mixed_domination_equivalence(f, split, cfg=cfg)

    common = None
    for T in cfg.grid:
        if all((sub[c].pass_fraction_at(T) or 0.0) >= cfg.pass_threshold for c in GATING):
            common = T
            break
    if common is None:
        for c in GATING:
            if not sub[c].passed:
                reasons.append(f"{c} fails on the grid (best pass fraction {sub[c].pass_fraction:.3f})")
        if all(sub[c].passed for c in GATING):
            reasons.append("no common grid time satisfies every criterion")
    tangent_frac = sub["mixed_domination"].constants["tangent_fraction"]
    if tangent_frac is not None and tangent_frac < cfg.pass_threshold:
        reasons.append(f"direction test: tangent 1-2 domination with X in F holds on only {tangent_frac:.3f} of samples")

    for k, inf in enumerate(infos):
        if not inf.lorenz_like_forward:
            continue
        rep = strong_stable_separation(f, inf, samples, cfg, eps)
        sub[f"strong_stable_separation_{k}"] = rep
        if not rep.passed:
            reasons.append(f"samples approach W^ss of singularity {k}")
        if k in in_set:
            try:
                chart = make_chart(f, inf, eps)
                extra[f"fiber_check_{k}"] = _fiber_cross_check(f, chart, as_samples(f, samples), cfg.grid[0], cfg)
            except NumericalError as exc:
                extra[f"fiber_check_{k}"] = {"error": type(exc).__name__}

    passed = common is not None and not reasons
    frac = min(sub[c].pass_fraction_at(common) for c in GATING) if common is not None else 0.0
    constants.update({
        "verdict": "pass" if passed else "fail",
        "T": common,
        "reasons": reasons,
        "mixed_domination_agreement": sub["mixed_domination"].constants["agreement"],
    })
    constants.update(extra)
    return HyperbolicityReport("singular_hyperbolic", constants, frac, None, passed, counts,
                               notes=[MEASURED_NOTE], sub=sub)


def singular_hyperbolicity_report(f: VectorField, box: Optional[Box] = None,
                                  cfg: AnalysisConfig = AnalysisConfig(),
                                  samples: Optional[Sequence] = None,
                                  try_reverse: bool = True) -> HyperbolicityReport:
    """Singularities, splitting and criteria for ``X``; on failure, for ``-X``.

    Without explicit ``samples`` an attractor orbit is sampled from
    ``cfg.seed``. The verdict constant ``T`` is the smallest grid time at which
    domination, rescaled and tangent ``E`` contraction, and sectional expansion
    all reach the pass threshold.
    """
    box = f.box if box is None else box
    eps = cfg.eps_for(box.diagonal)
    roots = find_singularities(f, box)
    infos = [classify_singularity(f, r) for r in roots]
    sing = [inf.to_dict() for inf in infos]
    bad = [k for k, inf in enumerate(infos) if not inf.hyperbolic]
    if bad:
        return HyperbolicityReport(
            "singular_hyperbolic",
            {"verdict": "fail", "T": None, "reasons": [f"singularity {k} is not hyperbolic" for k in bad],
             "singularities": sing}, 0.0, None, False, {"singularities": len(infos)}, notes=[MEASURED_NOTE])
    if samples is None:
        log.info("sampling attractor: n=%d spacing=%g", cfg.n_samples, cfg.spacing)
        samples = sample_attractor(f, cfg.seed, cfg.transient, cfg.n_samples, cfg.spacing, cfg.integrator,
                                   history=cfg.history, future=cfg.future, frame_eps=cfg.frame_eps)
    rep = _one_orientation(f, samples, infos, cfg, eps, "X")
    rep.constants["singularities"] = sing
    if rep.passed or not try_reverse:
        return rep
    g = f.negated()
    rev_samples = reversed_orbit(samples) if isinstance(samples, AttractorSample) else samples
    rev_infos = [classify_singularity(g, inf.location) for inf in infos]
    try:
        rev = _one_orientation(g, rev_samples, rev_infos, cfg, eps, "-X")
    except NumericalError as exc:
        rep.notes.append(f"-X pipeline failed: {type(exc).__name__}")
        return rep
    if rev.passed:
        rev.constants["singularities"] = sing
        rev.sub["orientation_X"] = rep
        return rev
    rep.sub["orientation_minus_X"] = rev
    if rep.constants["verdict"] == "inconclusive" and rev.constants["verdict"] == "fail":
        rep.constants["verdict"] = "fail"
        rep.constants["reasons"] = rep.constants["reasons"] + ["-X fails"]
    return rep
