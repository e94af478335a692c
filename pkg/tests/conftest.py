import numpy as np
import pytest

from singflow.field import LorenzField
from singflow.flow import flow
from singflow.hyperbolicity import AnalysisConfig, sample_attractor


@pytest.fixture(scope="session")
def lorenz():
    return LorenzField()


@pytest.fixture(scope="session")
def lorenz_points(lorenz):
    """Points on the Lorenz attractor, 0.37 time units apart."""
    x = flow(lorenz, [1.0, 1.0, 1.0], 50.0)
    pts = []
    for _ in range(60):
        x = flow(lorenz, x, 0.37)
        pts.append(x)
    return np.array(pts)


@pytest.fixture(scope="session")
def lorenz_cfg():
    # reduced grid keeps the stored orbit short
    return AnalysisConfig(n_samples=120, T_grid=tuple(0.25 * k for k in range(1, 25)), chart_eps=3.0)


@pytest.fixture(scope="session")
def lorenz_orbit(lorenz, lorenz_cfg):
    c = lorenz_cfg
    return sample_attractor(lorenz, c.seed, c.transient, c.n_samples, 0.05, c.integrator,
                            history=c.history, future=c.future, frame_eps=c.frame_eps)


@pytest.fixture(scope="session")
def lorenz_split(lorenz, lorenz_orbit, lorenz_cfg):
    from singflow.hyperbolicity import estimate_splitting

    return estimate_splitting(lorenz, lorenz_orbit, cfg=lorenz_cfg)
