"""Maximum score estimation of dynamic binary choice panels with fixed effects,
identified through a special regressor with unbounded support."""
from .dgp import DesignSpec, design1, design2, simulate, trend_regressor
from .errors import *  # noqa: F401,F403
from .estimator import Estimate, fit
from .objective import Objective, TrimSpec, qn, qn1, qn2, sigma_schedule
from .optimizer import DeConfig, grid_oracle, maximize, normalize_to_sphere
from .panel import (
    Coefficients,
    EstimationWindow,
    IndividualRecord,
    PanelDataset,
    WindowSet,
    extract_windows,
    read_csv,
    validate,
    write_csv,
)

__version__ = "0.1.0"
