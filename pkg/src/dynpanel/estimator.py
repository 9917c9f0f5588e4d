"""End-to-end point estimation: windows, trimming threshold, optimisation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objective import Objective, TrimSpec, trim_spec_for
from .optimizer import DeConfig, MaximizeResult, maximize
from .panel import Coefficients, PanelDataset, WindowSet, extract_windows

__all__ = ["Estimate", "fit"]


@dataclass
class Estimate:
    theta: Coefficients
    value: float
    trim: TrimSpec
    n_individuals: int
    n_windows: int
    n_switchers: int
    n_active: int
    optimizer: MaximizeResult = field(repr=False)

    def diagnostics(self) -> dict:
        return {
            "sigma_n": self.trim.sigma_n,
            "side": self.trim.side,
            "c": self.trim.c,
            "n_individuals": self.n_individuals,
            "n_windows": self.n_windows,
            "n_switcher_windows": self.n_switchers,
            "n_untrimmed_switchers": self.n_active,
            "generations": self.optimizer.generations,
            "n_evaluations": self.optimizer.n_evaluations,
        }


def fit(
    data: PanelDataset | WindowSet,
    c: float = 1.0,
    side: str = "both",
    cfg: DeConfig = DeConfig(),
    sigma: float | None = None,
) -> Estimate:
    """Estimate the preference parameter on the unit sphere.

    The threshold is ``c * std(z_t) * sqrt(log log n)`` over the middle-period
    z of all windows unless ``sigma`` overrides it.
    """
    windows = data if isinstance(data, WindowSet) else extract_windows(data)
    trim = TrimSpec(sigma, side, c) if sigma is not None else trim_spec_for(windows, c, side)
    obj = Objective(windows, trim)
    res = maximize(obj, cfg=cfg)
    theta = Coefficients.from_vector(res.theta.vector, windows.names)
    res.theta = theta
    return Estimate(
        theta=theta,
        value=res.value,
        trim=trim,
        n_individuals=windows.n_individuals,
        n_windows=len(windows),
        n_switchers=int(np.count_nonzero(windows.d_switch)),
        n_active=obj.n_active,
        optimizer=res,
    )
