"""Linear, sectional and rescaled Poincare flows, blowup at singularities, and
hyperbolicity diagnostics for vector fields on R^3."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .field import (Box, LinearField, LorenzField, NegatedField, PolynomialField, SingularityInfo,  # noqa: F401
                    VectorField, classify_singularity, eval_field, eval_jacobian, find_singularities)
from .flow import (IntegratorConfig, OrbitSample, Trajectory, flow, flow_jacobian_fd, tangent_flow,  # noqa: F401
                   trajectory, write_trajectory_csv)
from .poincare import (NormalFrame, PoincareCocycle, PoincareConfig, identification_project,  # noqa: F401
                       linear_poincare, normal_frame, rescaled_linear_poincare, rescaled_sectional_poincare,
                       sectional_poincare)
from .blowup import (BlowupChart, blowup_coords, extended_field, fiber_rescaled_linear_poincare,  # noqa: F401
                     fiber_rescaled_sectional, from_blowup, make_chart, projectivized_flow,
                     speed_ratio_extension, verify_extension_limit)
