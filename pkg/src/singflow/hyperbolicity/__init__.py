from .checks import (check_2domination, check_domination, check_e_contraction,  # noqa: F401
                     check_sectional_expansion, check_tangent_e_contraction, mixed_domination_equivalence)
from .config import AnalysisConfig, default_grid  # noqa: F401
from .lyapunov import LyapunovResult, lyapunov_exponents  # noqa: F401
from .pliss import pliss_report, pliss_strings  # noqa: F401
from .report import HyperbolicityReport  # noqa: F401
from .sampling import AttractorSample, sample_attractor  # noqa: F401
from .separation import strong_stable_separation  # noqa: F401
from .splitting import SplittingEstimate, estimate_splitting  # noqa: F401
from .verdict import singular_hyperbolicity_report  # noqa: F401
