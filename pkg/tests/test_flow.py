import csv
import math

import numpy as np
import pytest

from oracles import LN2, saddle
from singflow.errors import BlowUp, StepLimitExceeded
from singflow.field import LorenzField
from singflow.flow import DEFAULT_CONFIG, IntegratorConfig, OrbitSample, flow, flow_jacobian_fd, \
    tangent_flow, tangent_flow_with_divergence, trajectory, write_trajectory_csv

RTOL = DEFAULT_CONFIG.rel_tol


def test_linear_closed_form():
    got = flow(saddle(), [1, 1, 1], 1.0)
    want = np.array([math.exp(-3), math.exp(-1), math.exp(2)])
    assert np.all(np.abs(got - want) <= 10 * RTOL * np.abs(want))


def test_zero_time_is_exact():
    x = np.array([0.1234567, -2.5, 7.0])
    lz = LorenzField()
    assert np.array_equal(flow(lz, x, 0.0), x)
    p, m = tangent_flow(lz, x, 0.0)
    assert np.array_equal(p, x) and np.array_equal(m, np.eye(3))
    assert np.allclose(flow_jacobian_fd(lz, x, 0.0), np.eye(3), atol=1e-10)


def test_lorenz_half_tolerance():
    lz = LorenzField()
    a = flow(lz, [1, 1, 1], 1.0)
    b = flow(lz, [1, 1, 1], 1.0, DEFAULT_CONFIG.refined(0.5))
    assert np.linalg.norm(a - b) <= 100 * RTOL * np.linalg.norm(a)


def test_backward_inverts_forward():
    lz = LorenzField()
    x = np.array([1.0, 1.0, 1.0])
    y = flow(lz, x, 0.5)
    np.testing.assert_allclose(flow(lz, y, -0.5), x, atol=1e-7)


def test_tangent_linear():
    p, m = tangent_flow(saddle(), [0, 0, 1], LN2)
    np.testing.assert_allclose(m, np.diag([1 / 8, 1 / 2, 4]), rtol=10 * RTOL, atol=1e-14)
    np.testing.assert_allclose(p, [0, 0, 4], rtol=10 * RTOL)
    # returned point is the base flow
    lz = LorenzField()
    p2, _ = tangent_flow(lz, [1, 1, 1], 0.7)
    np.testing.assert_allclose(p2, flow(lz, [1, 1, 1], 0.7), rtol=1e-8)


def test_fd_linear():
    j = flow_jacobian_fd(saddle(), [1, 1, 1], 1.0, h=1e-4)
    np.testing.assert_allclose(j, np.diag([math.exp(-3), math.exp(-1), math.exp(2)]), atol=1e-6)


def test_tangent_vs_fd_lorenz():
    lz = LorenzField()
    _, m = tangent_flow(lz, [1, 1, 1], 0.5)
    fd = flow_jacobian_fd(lz, [1, 1, 1], 0.5, h=1e-5)
    assert np.linalg.norm(fd - m) / np.linalg.norm(m) < 1e-4


def test_fd_order_lorenz():
    lz = LorenzField()
    _, m = tangent_flow(lz, [1, 1, 1], 0.5)
    e1 = np.linalg.norm(flow_jacobian_fd(lz, [1, 1, 1], 0.5, h=1e-3) - m)
    e2 = np.linalg.norm(flow_jacobian_fd(lz, [1, 1, 1], 0.5, h=1e-4) - m)
    # h^2 scaling: two decades of error per decade of h
    assert math.log10(e1 / e2) >= 1.9


def test_flow_cocycle():
    lz = LorenzField()
    rng = np.random.default_rng(5)
    x = flow(lz, [1, 1, 1], 50.0)
    for _ in range(100):
        x = flow(lz, x, rng.uniform(0.2, 1.0))
        t, s = rng.uniform(0, 2, size=2)
        a = flow(lz, x, t + s)
        b = flow(lz, flow(lz, x, s), t)
        assert np.linalg.norm(a - b) <= 50 * RTOL * np.linalg.norm(a)


def test_chain_rule(lorenz_points):
    lz = LorenzField()
    rng = np.random.default_rng(11)
    for x in lorenz_points[:20]:
        t, s = rng.uniform(0, 2, size=2)
        ys, ms = tangent_flow(lz, x, s)
        _, mts = tangent_flow(lz, x, t + s)
        _, mt = tangent_flow(lz, ys, t)
        assert np.linalg.norm(mts - mt @ ms) <= 1e-6 * np.linalg.norm(mts)


@pytest.mark.parametrize("t", [0.5, 1.0])
def test_liouville(lorenz_points, t):
    # beyond t ~ 1 the determinant of the stored Lorenz matrix is lost to cancellation
    # (sigma_3 / sigma_1 nears machine precision); longer horizons are covered by the
    # exponent-sum identity in the Lyapunov tests
    lz = LorenzField()
    for x in lorenz_points[:10]:
        _, m, div = tangent_flow_with_divergence(lz, x, t)
        assert abs(np.linalg.det(m) / math.exp(div) - 1) < 1e-6
        assert div == pytest.approx(-(10 + 1 + 8 / 3) * t, rel=1e-10)


def test_liouville_polynomial():
    from singflow.field import PolynomialField

    # non-constant divergence: div = 2x - 1 - 1
    f = PolynomialField(([(1.0, (2, 0, 0)), (-1.0, (0, 1, 0))], [(1.0, (1, 0, 0)), (-1.0, (0, 1, 0))],
                         [(-1.0, (0, 0, 1)), (0.5, (1, 1, 0))]))
    _, m, div = tangent_flow_with_divergence(f, [0.2, 0.1, 0.3], 1.5)
    assert abs(np.linalg.det(m) / math.exp(div) - 1) < 1e-6


def test_escape_and_step_limit():
    with pytest.raises(BlowUp):
        flow(saddle(), [0, 0, 1], 20.0, IntegratorConfig(escape_radius=100.0))
    with pytest.raises(StepLimitExceeded):
        flow(LorenzField(), [1, 1, 1], 10.0, IntegratorConfig(max_steps=10))


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        flow(saddle(), [1, 1, 1], math.inf)
    with pytest.raises(ValueError):
        flow_jacobian_fd(saddle(), [1, 1, 1], 1.0, h=0.0)


def test_orbit_sample_caches():
    lz = LorenzField()
    s = OrbitSample.at(lz, [1, 2, 3], 0.5)
    assert np.array_equal(s.field, lz.eval([1, 2, 3]))
    assert np.array_equal(s.jac, lz.jacobian([1, 2, 3]))
    assert s.speed == pytest.approx(np.linalg.norm(lz.eval([1, 2, 3])))


def test_trajectory_csv(tmp_path):
    traj = trajectory(saddle(), [1, 1, 1], 0.3, 0.1, with_jacobian=True)
    assert len(traj) == 4
    path = tmp_path / "orbit.csv"
    write_trajectory_csv(path, traj, cumulative_jacobian=True)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x", "y", "z"] + [f"j{i}{j}" for i in range(3) for j in range(3)]
    assert len(rows) == 5
    last = np.array([float(v) for v in rows[-1]])
    np.testing.assert_allclose(last[4:].reshape(3, 3), np.diag(np.exp(np.array([-3, -1, 2]) * 0.3)),
                               rtol=1e-9)
    # "%.17g" round-trips exactly
    assert float(rows[2][1]) == traj.points[1][0]
    write_trajectory_csv(tmp_path / "plain.csv", traj)
    assert open(tmp_path / "plain.csv").readline().strip() == "t,x,y,z"
