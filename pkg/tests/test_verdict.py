import math

import numpy as np
import pytest

from oracles import LN2, SINK, saddle
from singflow.field import Box, LinearField, PolynomialField
from singflow.flow import tangent_flow
from singflow.hyperbolicity import sample_attractor, singular_hyperbolicity_report
from singflow.hyperbolicity.verdict import GATING, reversed_orbit
from test_hyperbolicity import AXIS, saddle_cfg

BOX = Box.cube(10.0)


def test_linear_saddle_passes():
    rep = singular_hyperbolicity_report(saddle(), BOX, saddle_cfg(), samples=AXIS)
    c = rep.constants
    assert rep.passed and c["verdict"] == "pass" and c["reasons"] == []
    # the largest per-criterion constant: sectional at ln 2 on a 0.05 grid
    assert c["T"] == pytest.approx(0.7)
    assert c["T"] - 0.05 < LN2 <= c["T"]
    assert c["orientation"] == "X"
    assert c["mixed_domination_agreement"] == 1.0
    for name in GATING:
        assert rep.sub[name].pass_fraction_at(c["T"]) == 1.0
    assert rep.sub["strong_stable_separation_0"].passed


def test_sink_fails_direction_test():
    # samples on the strong-stable axis keep the cocycle diagonal: X (rate -3) lies in F
    # but contracts faster than E = e2 (rate -2)
    rep = singular_hyperbolicity_report(LinearField(SINK), BOX, saddle_cfg(), samples=AXIS)
    c = rep.constants
    assert c["verdict"] == "fail" and not rep.passed and c["T"] is None
    assert any(r.startswith("direction test") for r in c["reasons"])
    assert any(r.startswith("e_contraction") for r in c["reasons"])
    assert rep.sub["mixed_domination"].constants["tangent_fraction"] == 0.0
    # -X (a source) is tried as well and fails on tangent contraction of E
    rev = rep.sub["orientation_minus_X"]
    assert rev.constants["orientation"] == "-X" and rev.constants["verdict"] == "fail"
    assert any(r.startswith("tangent_e_contraction") for r in rev.constants["reasons"])


def test_sink_generic_samples_inconclusive():
    # off the axes the backward history of a sink escapes (or the power budget runs out first)
    pts = [np.array([1.0, 1.0, 1.0]), np.array([2.0, -1.0, 0.5])]
    for cfg in (saddle_cfg(), saddle_cfg(k_pow=20)):
        rep = singular_hyperbolicity_report(LinearField(SINK), BOX, cfg, samples=pts)
        assert rep.constants["verdict"] == "inconclusive" and not rep.passed


def test_reversed_saddle_recovers_orientation():
    # for -X the saddle is diag(3, 1, -2): samples on its stable axis fail for X; the pass comes from -X
    rep = singular_hyperbolicity_report(saddle().negated(), BOX, saddle_cfg(), samples=AXIS)
    assert rep.constants["verdict"] == "pass"
    assert rep.constants["orientation"] == "-X"
    assert rep.sub["orientation_X"].constants["verdict"] == "fail"


def test_non_hyperbolic_singularity():
    rot = LinearField(np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]))
    rep = singular_hyperbolicity_report(rot, BOX, saddle_cfg(), samples=[np.ones(3)])
    assert rep.constants["verdict"] == "fail"
    assert rep.constants["reasons"] == ["singularity 0 is not hyperbolic"]


def test_all_excluded_is_inconclusive():
    near = [np.array([0.0, 0.0, 0.2])]  # exclusion radius 0.5
    rep = singular_hyperbolicity_report(saddle(), BOX, saddle_cfg(), samples=near, try_reverse=False)
    assert rep.constants["verdict"] == "inconclusive"
    assert rep.constants["reasons"] == ["every sample lies inside a singular chart"]


def test_not_converged_is_inconclusive():
    f = PolynomialField(([(1.0, (0, 0, 0))], [], []))
    rep = singular_hyperbolicity_report(f, BOX, saddle_cfg(), samples=[np.zeros(3)])
    assert rep.constants["verdict"] == "inconclusive" and not rep.passed
    assert rep.constants["reasons"][0].startswith("splitting not converged")


@pytest.fixture(scope="module")
def saddle_orbit():
    # the transient covers the stored history; samples start at z ~ 3, outside the exclusion radius
    cfg = saddle_cfg()
    return sample_attractor(saddle(), [1e-3, 2e-3, 1e-3], 4.0, 6, 0.05, history=cfg.history, future=cfg.future)


def test_reversed_orbit_structure(saddle_orbit):
    orb = saddle_orbit
    rev = reversed_orbit(orb)
    assert len(rev) == len(orb)
    np.testing.assert_array_equal(rev.points, orb.points[::-1])
    np.testing.assert_array_equal(rev[0].x, orb[len(orb) - 1].x)
    np.testing.assert_array_equal(rev.f.eval([0, 0, 1]), -orb.f.eval([0, 0, 1]))
    np.testing.assert_array_equal(rev.divergence, -orb.divergence[::-1])
    back = reversed_orbit(rev)
    assert back.first == orb.first
    np.testing.assert_allclose(back.steps, orb.steps, rtol=1e-12, atol=1e-15)


def test_reversed_orbit_steps_are_minus_x_tangent_maps(saddle_orbit):
    rev = reversed_orbit(saddle_orbit)
    g = rev.f
    for j in range(len(rev.steps)):
        p, m = tangent_flow(g, rev.points[j], rev.spacing)
        np.testing.assert_allclose(p, rev.points[j + 1], rtol=1e-9)
        np.testing.assert_allclose(rev.steps[j], m, rtol=1e-9, atol=1e-14)
        assert rev.divergence[j] == pytest.approx(g.divergence(rev.points[j]) * rev.spacing, rel=1e-9)


def test_verdict_from_sampled_orbit(saddle_orbit):
    # a stored orbit near the unstable separatrix passes like the explicit axis samples
    rep = singular_hyperbolicity_report(saddle(), BOX, saddle_cfg(), samples=saddle_orbit)
    assert rep.constants["verdict"] == "pass"
    assert rep.constants["T"] <= 0.7 + 1e-12
    assert math.isfinite(rep.pass_fraction)
