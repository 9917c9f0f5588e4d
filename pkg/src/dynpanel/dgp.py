"""Simulation designs for the dynamic binary choice panel.

Both designs generate, for ``t = 0, 1, 2, 3``::

    y_0 = 1{alpha + delta*(0-2) + x_0'beta + varpi*z_0 >= eps_0}
    y_t = 1{alpha + delta*(t-2) + gamma*y_{t-1} + x_t'beta + varpi*z_t >= eps_t}

with ``eps`` logistic rescaled to unit variance and the fixed effect
``alpha_i = sum_{t=0}^{3} sum_k x_{it,k} / 4``.  The time trend is emitted as
the last covariate column, so the estimator treats ``delta`` as one more slope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .panel import PanelDataset

__all__ = [
    "DesignSpec",
    "design1",
    "design2",
    "simulate",
    "trend_regressor",
    "draw_primitives",
    "logistic_scale",
    "error_cdf",
]

LAPLACE_SCALE = math.sqrt(2.0) / 2.0
# eps = Logistic(0, 1) / LOGISTIC_SD has unit variance
LOGISTIC_SD = math.pi / math.sqrt(3.0)
PERIODS = np.arange(4)
BLOCK = 1024


def logistic_scale() -> float:
    return LOGISTIC_SD


def error_cdf(u):
    """CDF of the unit-variance logistic error."""
    return 0.5 * (1.0 + np.tanh(0.5 * LOGISTIC_SD * np.asarray(u, dtype=float)))


def trend_regressor(t: int) -> float:
    """Value of the time-trend regressor in period ``t``."""
    if t not in (0, 1, 2, 3):
        raise DomainError(f"trend is defined for t in 0..3, got {t}")
    return float(t - 2)


@dataclass(frozen=True)
class DesignSpec:
    """Parameters of a simulation design.

    ``beta`` holds the slopes on the random covariates only; the trend slope is
    ``delta``.  ``x_sd`` is the standard deviation of each random covariate.
    """

    name: str
    gamma: float
    beta: tuple
    delta: float
    varpi: float
    z_dist: str = "norm"
    x_sd: float = 1.0
    n: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.z_dist not in ("norm", "lap"):
            raise DomainError(f"z_dist must be 'norm' or 'lap', got {self.z_dist!r}")
        norm = float(np.linalg.norm(self.theta_true))
        if norm != 0.0 and abs(norm - 1.0) > 1e-12:
            raise DomainError(f"true coefficients must have unit norm, got {norm}")

    @property
    def p_random(self) -> int:
        return len(self.beta)

    @property
    def p(self) -> int:
        """Covariate count seen by the estimator (random covariates + trend)."""
        return self.p_random + 1

    @property
    def x_names(self) -> tuple:
        return tuple(f"x{k + 1}" for k in range(self.p))

    @property
    def theta_true(self) -> np.ndarray:
        """True parameter in estimator order ``(gamma, beta..., delta, varpi)``."""
        return np.array([self.gamma, *self.beta, self.delta, self.varpi], dtype=float)

    @property
    def coef_labels(self) -> tuple:
        return ("gamma",) + tuple(f"beta{k + 1}" for k in range(self.p_random)) + ("delta", "varpi")

    def replace(self, **kw) -> "DesignSpec":
        from dataclasses import replace

        return replace(self, **kw)


def design1(z_dist: str = "norm", n: int = 5000, seed: int = 0) -> DesignSpec:
    s = math.sqrt(13.0)
    return DesignSpec("d1", 2 / s, (2 / s,), 1 / s, 2 / s, z_dist=z_dist, x_sd=1.0, n=n, seed=seed)


def design2(z_dist: str = "norm", n: int = 5000, seed: int = 0) -> DesignSpec:
    s = math.sqrt(17.0)
    return DesignSpec(
        "d2", 2 / s, (2 / s, 2 / s), 1 / s, 2 / s, z_dist=z_dist, x_sd=math.sqrt(2.0) / 2.0, n=n, seed=seed
    )


DESIGNS = {"d1": design1, "d2": design2}


def _block_draws(spec: DesignSpec, block: int):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(block,)))
    x = rng.standard_normal((BLOCK, 4, spec.p_random)) * spec.x_sd
    if spec.z_dist == "norm":
        z = rng.standard_normal((BLOCK, 4))
    else:
        z = rng.laplace(0.0, LAPLACE_SCALE, (BLOCK, 4))
    eps = rng.logistic(0.0, 1.0, (BLOCK, 4)) / LOGISTIC_SD
    return x, z, eps


def draw_primitives(spec: DesignSpec, n: int | None = None):
    """Covariates, fixed effects and errors for ``n`` individuals.

    Draws come in fixed-size blocks with counter-derived seeds, so the first
    ``k`` individuals are identical for every ``n >= k``.

    Returns
    -------
    alpha : (n,)
    x : (n, 4, p_random) random covariates for t = 0..3
    z : (n, 4)
    eps : (n, 4)
    """
    n = spec.n if n is None else int(n)
    n_blocks = -(-n // BLOCK)
    parts = [_block_draws(spec, b) for b in range(n_blocks)]
    if parts:
        x = np.concatenate([q[0] for q in parts])[:n]
        z = np.concatenate([q[1] for q in parts])[:n]
        eps = np.concatenate([q[2] for q in parts])[:n]
    else:
        x = np.zeros((0, 4, spec.p_random))
        z = eps = np.zeros((0, 4))
    alpha = x.sum(axis=(1, 2)) / 4.0
    return alpha, x, z, eps


def index_without_lag(spec: DesignSpec, alpha, x, z):
    """alpha + delta*(t-2) + x_t'beta + varpi*z_t, shape (n, 4)."""
    beta = np.asarray(spec.beta, dtype=float)
    return alpha[:, None] + spec.delta * (PERIODS - 2.0) + x @ beta + spec.varpi * z


def simulate(spec: DesignSpec, n: int | None = None) -> PanelDataset:
    """Simulate a balanced panel with T = 3 periods plus the initial status."""
    alpha, x, z, eps = draw_primitives(spec, n)
    n = len(alpha)
    base = index_without_lag(spec, alpha, x, z)
    y = np.zeros((n, 4), dtype=np.int64)
    y[:, 0] = base[:, 0] >= eps[:, 0]
    for t in (1, 2, 3):
        y[:, t] = base[:, t] + spec.gamma * y[:, t - 1] >= eps[:, t]

    trend = np.broadcast_to(PERIODS - 2.0, (n, 4))[..., None]
    xfull = np.concatenate([x, trend], axis=2)
    ids = np.empty(n, dtype=object)
    ids[:] = list(range(1, n + 1))
    return PanelDataset(
        ids=ids,
        y0=y[:, 0].copy(),
        t0=np.zeros(n, dtype=np.int64),
        offsets=np.arange(0, 3 * n + 1, 3, dtype=np.int64),
        t=np.tile(np.arange(1, 4, dtype=np.int64), n),
        y=y[:, 1:].reshape(-1),
        x=xfull[:, 1:, :].reshape(-1, spec.p),
        z=z[:, 1:].reshape(-1),
        x_names=spec.x_names,
        init_x=xfull[:, 0, :].copy(),
        init_z=z[:, 0].copy(),
    )
