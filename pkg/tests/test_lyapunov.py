import math

import numpy as np
import pytest

from oracles import LORENZ_LAMBDA1, saddle
from singflow.field import LinearField, LorenzField
from singflow.flow import flow
from singflow.hyperbolicity import lyapunov_exponents


def test_linear_spectrum():
    r = lyapunov_exponents(saddle(), [0.3, -0.2, 1e-3], 2.0, 0.25)
    np.testing.assert_allclose(r.tangent, [2.0, -1.0, -3.0], atol=1e-8)
    assert r.mean_divergence == pytest.approx(-2.0, abs=1e-12)


def test_linear_rotated_spectrum():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    f = LinearField(q @ np.diag([-3.0, -1.0, 2.0]) @ q.T)
    r = lyapunov_exponents(f, q @ np.array([1e-18, 1e-18, 1e-18]), 20.0, 0.5)
    # finite-time QR: the transient of the initial frame decays like 1/T
    np.testing.assert_allclose(r.tangent, [2.0, -1.0, -3.0], atol=0.2)
    assert abs(r.tangent.sum() - r.mean_divergence) < 1e-6


def test_rejects_bad_intervals():
    with pytest.raises(ValueError):
        lyapunov_exponents(saddle(), [0, 0, 1], 1.0, 0.0)
    with pytest.raises(ValueError):
        lyapunov_exponents(saddle(), [0, 0, 1], 0.1, 0.5)


def test_start_at_singularity_skips_normal():
    r = lyapunov_exponents(saddle(), [0.0, 0.0, 0.0], 1.0, 0.5)
    assert r.skipped_normal == 2
    assert np.all(np.isnan(r.normal))
    np.testing.assert_allclose(r.tangent, [2.0, -1.0, -3.0], atol=1e-12)


@pytest.fixture(scope="module")
def lorenz_start():
    return flow(LorenzField(), [1, 1, 1], 50.0)


@pytest.fixture(scope="module")
def lorenz_run(lorenz_start):
    return lyapunov_exponents(LorenzField(), lorenz_start, 300.0, 0.5)


def test_lorenz_exponents(lorenz_run):
    r = lorenz_run
    assert abs(r.tangent[0] - LORENZ_LAMBDA1) <= 0.02
    assert np.min(np.abs(r.tangent)) <= 0.02
    assert r.tangent[2] < -14.0


def test_lorenz_sum_is_mean_divergence(lorenz_run):
    # Liouville at long horizon: the exponent sum is the average divergence
    assert abs(lorenz_run.tangent.sum() - lorenz_run.mean_divergence) < 1e-6
    assert lorenz_run.mean_divergence == pytest.approx(-(10 + 1 + 8 / 3), rel=1e-12)


def test_lorenz_normal_spectrum(lorenz_run):
    # the rescaled normal cocycle drops the zero exponent and keeps the other two
    r = lorenz_run
    assert r.skipped_normal == 0
    assert abs(r.normal[0] - r.tangent[0]) < 0.05
    assert abs(r.normal[1] - r.tangent[2]) < 0.05


@pytest.mark.slow
def test_lorenz_self_consistency(lorenz_start, lorenz_run):
    # doubled horizon, halved renormalisation interval
    r = lyapunov_exponents(LorenzField(), lorenz_start, 600.0, 0.25)
    assert abs(r.tangent[0] - lorenz_run.tangent[0]) <= 0.02
    assert abs(r.tangent[0] - LORENZ_LAMBDA1) <= 0.02
    assert math.isclose(r.tangent.sum(), r.mean_divergence, abs_tol=1e-6)
