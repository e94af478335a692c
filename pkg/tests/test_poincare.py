import math

import numpy as np
import pytest

from oracles import LN2, frame_by_hand, projected_fd_cocycle, saddle, saddle_psi, saddle_psi_star
from singflow.errors import NearSingularity, OutOfDomain
from singflow.field import LinearField, LorenzField
from singflow.flow import OrbitSample, flow
from singflow.poincare import PoincareConfig, identification_project, linear_poincare, normal_frame, \
    rescaled_linear_poincare, rescaled_sectional_poincare, sectional_poincare, sectional_poincare_full


def test_frame_axis_cases():
    fr = normal_frame(saddle(), [0, 0, 1])
    np.testing.assert_array_equal(fr.unit_field, [0, 0, 1])
    np.testing.assert_array_equal(fr.n1, [1, 0, 0])
    np.testing.assert_array_equal(fr.n2, [0, 1, 0])
    assert fr.speed == 2.0
    fr = normal_frame(saddle(), [-1, 0, 0])  # X = (3, 0, 0)
    np.testing.assert_array_equal(fr.n1, [0, 0, 1])
    np.testing.assert_array_equal(fr.n2, [0, -1, 0])


def test_frame_orthonormal_right_handed(lorenz, lorenz_points):
    for x in lorenz_points:
        fr = normal_frame(lorenz, x)
        m = np.column_stack([fr.unit_field, fr.n1, fr.n2])
        np.testing.assert_allclose(m.T @ m, np.eye(3), atol=1e-14)
        assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(fr.basis, frame_by_hand(lorenz.eval(x)), atol=1e-15)


def test_frame_near_singularity():
    with pytest.raises(NearSingularity):
        normal_frame(saddle(), [0, 0, 0])


def test_linear_poincare_closed_form():
    coc = linear_poincare(saddle(), [0, 0, 1], LN2)
    np.testing.assert_allclose(coc.mat, saddle_psi(LN2), atol=1e-8)
    np.testing.assert_allclose(coc.mat, np.diag([1 / 8, 1 / 2]), atol=1e-8)
    star = rescaled_linear_poincare(saddle(), [0, 0, 1], LN2)
    np.testing.assert_allclose(star.mat, np.diag([1 / 32, 1 / 8]), atol=1e-8)
    assert star.rescaled
    for t in (0.1, 0.5, 1.3):
        np.testing.assert_allclose(rescaled_linear_poincare(saddle(), [0, 0, 1], t).mat, saddle_psi_star(t),
                                   rtol=1e-9, atol=1e-14)


def test_zero_time_identity(lorenz, lorenz_points):
    x = lorenz_points[0]
    np.testing.assert_allclose(linear_poincare(lorenz, x, 0.0).mat, np.eye(2), rtol=0, atol=1e-15)
    np.testing.assert_allclose(rescaled_linear_poincare(lorenz, x, 0.0).mat, np.eye(2), rtol=0, atol=1e-15)


def test_linear_poincare_vs_fd_oracle(lorenz, lorenz_points):
    for x in lorenz_points[:5]:
        mat = linear_poincare(lorenz, x, 1.0).mat
        ref = projected_fd_cocycle(lorenz, x, 1.0)
        assert np.linalg.norm(mat - ref) / np.linalg.norm(ref) < 1e-4


def test_rescaling_scalar_matches_speeds(lorenz):
    # the orbit dips to |x| < 0.4 near the origin and leaves along the unstable branch
    x = np.array([1e-3, 1e-3, 1.0])
    coc = linear_poincare(lorenz, x, 0.8)
    ratio = OrbitSample.at(lorenz, x).speed / OrbitSample.at(lorenz, coc.target.base).speed
    assert ratio < 0.05
    np.testing.assert_allclose(coc.rescale().mat, ratio * coc.mat, rtol=1e-12, atol=0)


def test_cocycle_law(lorenz, lorenz_points):
    rng = np.random.default_rng(2)
    for x in lorenz_points[:8]:
        t, s = rng.uniform(0.2, 1.0, size=2)
        a = linear_poincare(lorenz, x, t)
        b = linear_poincare(lorenz, a.target.base, s)
        whole = linear_poincare(lorenz, x, t + s)
        assert np.linalg.norm(whole.mat - (b @ a).mat) <= 1e-8 * max(1.0, np.linalg.norm(whole.mat))
        ws = whole.rescale()
        assert np.linalg.norm(ws.mat - (b.rescale() @ a.rescale()).mat) <= 1e-8 * max(1.0, np.linalg.norm(ws.mat))
    with pytest.raises(ValueError):
        b @ a.rescale()


def test_sectional_zero_and_linear():
    f = saddle()
    assert np.array_equal(sectional_poincare(f, [0, 0, 1], np.zeros(2), 0.7), np.zeros(2))
    a, b = 0.03, -0.05
    cr = sectional_poincare_full(f, [0, 0, 1], [a, b], 0.7)
    np.testing.assert_allclose(cr.coords, [a * math.exp(-2.1), b * math.exp(-0.7)], rtol=1e-9)
    assert cr.tau == 0.0
    # 3-vector input in the plane is accepted; out-of-plane is not
    np.testing.assert_allclose(sectional_poincare(f, [0, 0, 1], [a, b, 0.0], 0.7), cr.coords)
    with pytest.raises(ValueError):
        sectional_poincare(f, [0, 0, 1], [a, b, 0.01], 0.7)
    with pytest.raises(OutOfDomain):
        sectional_poincare(f, [0, 0, 1], [1.0, 0.0], 0.7)


def test_sectional_derivative_at_zero(lorenz, lorenz_points):
    for x in lorenz_points[:3]:
        mat = linear_poincare(lorenz, x, 1.0).mat
        rng = np.random.default_rng(0)
        v = rng.normal(size=2)
        v *= 1e-6 / np.linalg.norm(v)
        p = sectional_poincare(lorenz, x, v, 1.0)
        assert np.linalg.norm(p - mat @ v) / np.linalg.norm(v) < 1e-4


def test_sectional_derivative_refinement(lorenz, lorenz_points):
    # the FD error shrinks at order >= 1 as h is halved
    x = lorenz_points[4]
    mat = linear_poincare(lorenz, x, 1.0).mat
    errs = []
    for h in (4e-3, 2e-3):
        cols = [(sectional_poincare(lorenz, x, h * e, 1.0) - sectional_poincare(lorenz, x, -h * e, 1.0)) / (2 * h)
                for e in np.eye(2)]
        errs.append(np.linalg.norm(np.column_stack(cols) - mat) / np.linalg.norm(mat))
    assert errs[1] < 1e-4
    assert math.log2(errs[0] / errs[1]) >= 1.0


def test_rescaled_sectional():
    f = saddle()
    assert np.array_equal(rescaled_sectional_poincare(f, [0, 0, 1], np.zeros(2), 0.5), np.zeros(2))
    u = np.array([0.004, 0.007])
    np.testing.assert_allclose(rescaled_sectional_poincare(f, [0, 0, 1], u, 0.5), saddle_psi_star(0.5) @ u,
                               rtol=1e-9)


def test_rescaled_sectional_derivative(lorenz, lorenz_points):
    x = lorenz_points[7]
    star = rescaled_linear_poincare(lorenz, x, 0.6).mat
    u = np.array([0.6, -0.8]) * 1e-6
    p = rescaled_sectional_poincare(lorenz, x, u, 0.6)
    assert np.linalg.norm(p - star @ u) / np.linalg.norm(u) < 1e-4


def test_rescaled_local_flow_law(lorenz, lorenz_points):
    rng = np.random.default_rng(4)
    for x in lorenz_points[10:15]:
        u = rng.normal(size=2)
        u *= 1e-4 / np.linalg.norm(u)
        t, s = rng.uniform(0.2, 1.0, size=2)
        whole = rescaled_sectional_poincare(lorenz, x, u, t + s)
        mid = rescaled_sectional_poincare(lorenz, x, u, t)
        assert np.linalg.norm(mid) < 0.05
        two = rescaled_sectional_poincare(lorenz, flow(lorenz, x, t), mid, s)
        assert np.linalg.norm(whole - two) <= 1e-8 * np.linalg.norm(u)


def test_identification_examples(lorenz, lorenz_points):
    x = lorenz_points[3]
    u = np.array([0.01, -0.02])
    w, s = identification_project(lorenz, x, x, u)
    np.testing.assert_allclose(w, u, atol=1e-15)
    assert s == 0.0
    y = flow(lorenz, x, 0.01)
    w, s = identification_project(lorenz, y, x, np.zeros(2))
    np.testing.assert_allclose(w, 0.0, atol=1e-10)
    assert s == pytest.approx(-0.01, abs=1e-10)
    with pytest.raises(OutOfDomain):
        identification_project(lorenz, x, x, np.array([0.1, 0.0]))


# Lorenz orbits turn fast enough to recross a nearby plane within 0.25 time units
LORENZ_ID = PoincareConfig(s_max=0.05, tau_max=0.05)


def _close_points(f, x, rng, k, scale=0.02):
    sp = np.linalg.norm(f.eval(x))
    return [x + rng.normal(size=3) * scale * sp / math.sqrt(3) for _ in range(k)]


@pytest.mark.parametrize("field", ["linear", "lorenz"])
def test_identification_cocycle(field, lorenz_points):
    rng = np.random.default_rng(8)
    if field == "linear":
        f = LinearField(np.diag([-3.0, -1.0, 2.0]))
        bases = [np.array([0.3, 0.2, 1.0]), np.array([-0.5, 0.4, 0.8])]
    else:
        f = LorenzField()
        bases = list(lorenz_points[20:23])
    tol = 1e-10 if field == "linear" else 1e-8
    cfg = PoincareConfig() if field == "linear" else LORENZ_ID
    for x in bases:
        y, z = _close_points(f, x, rng, 2)
        u = rng.normal(size=2) * 0.005
        w1, s1 = identification_project(f, y, z, u, cfg)
        w2, s2 = identification_project(f, z, x, w1, cfg)
        w3, s3 = identification_project(f, y, x, u, cfg)
        assert np.linalg.norm(w2 - w3) <= tol
        assert abs(s1 + s2 - s3) <= tol


@pytest.mark.parametrize("field", ["linear", "lorenz"])
def test_identification_local_invariance(field, lorenz_points):
    rng = np.random.default_rng(9)
    if field == "linear":
        f = LinearField(np.diag([-3.0, -1.0, 2.0]))
        bases = [np.array([0.3, 0.2, 1.0])]
    else:
        f = LorenzField()
        bases = list(lorenz_points[30:33])
    cfg = PoincareConfig() if field == "linear" else LORENZ_ID
    for x in bases:
        (y,) = _close_points(f, x, rng, 1, scale=0.01)
        t = rng.uniform(-0.02, 0.02)
        u = rng.normal(size=2) * 0.003
        moved = rescaled_sectional_poincare(f, y, u, t, cfg)
        a, _ = identification_project(f, flow(f, y, t), x, moved, cfg)
        b, _ = identification_project(f, y, x, u, cfg)
        assert np.linalg.norm(a - b) <= 1e-8
