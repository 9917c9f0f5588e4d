"""m-out-of-n bootstrap inference with an estimated convergence rate.

The estimator converges at an unknown rate ``n^lambda``.  ``lambda`` is
estimated from the spread of bootstrap estimates at two resample sizes
``m1 < m2``: if the spread scales like ``m^-lambda`` then

    lambda = log(s1 / s2) / log(m2 / m1).

Intervals use the centred (basic) construction: with ``q`` the empirical
quantiles of ``m^lambda (theta*_b - theta_hat)``,

    CI_{1-a} = [theta_hat - n^-lambda q_{1-a/2},  theta_hat - n^-lambda q_{a/2}].

Resampling is always by individual, never by window.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpread, DomainError, DynPanelError, FailureRateError
from .objective import TrimSpec, trim_spec_for
from .optimizer import DeConfig, maximize
from .panel import Coefficients, PanelDataset, WindowSet, extract_windows

log = logging.getLogger(__name__)

__all__ = [
    "BootstrapConfig",
    "BootstrapResult",
    "RateEstimate",
    "resample_individuals",
    "bootstrap_draws",
    "spread",
    "rate_from_spreads",
    "estimate_rate",
    "ci_from_draws",
    "bootstrap_ci",
]

SCHEMA_VERSION = 1
_STAGE_CI, _STAGE_RATE = 0, 1


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 500
    m_exponent: float = 7 / 8
    rate_exponents: tuple = (6 / 7, 7 / 8)
    levels: tuple = (0.90, 0.95)
    seed: int = 0
    lambda_bounds: tuple = (0.1, 0.5)
    max_failure_rate: float = 0.10

    def __post_init__(self):
        r1, r2 = self.rate_exponents
        if not 0 < r1 < r2 < 1:
            raise DomainError(f"rate exponents must satisfy 0 < r1 < r2 < 1, got {self.rate_exponents}")
        if self.B < 50:
            raise DomainError(f"B must be >= 50, got {self.B}")
        if not 0 < self.m_exponent <= 1:
            raise DomainError("m_exponent must lie in (0, 1]")
        if any(not 0 < lv < 1 for lv in self.levels):
            raise DomainError("confidence levels must lie in (0, 1)")

    def m_for(self, n: int, exponent: float | None = None) -> int:
        e = self.m_exponent if exponent is None else exponent
        return min(n, int(math.ceil(n**e)))


def _windows(data) -> WindowSet:
    return data if isinstance(data, WindowSet) else extract_windows(data)


def _stream(seed: int, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


def resample_individuals(dataset: PanelDataset, m: int, seed: int = 0) -> PanelDataset:
    """Draw ``m`` individuals i.i.d. with replacement."""
    n = dataset.n
    if not 1 <= m <= n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    idx = np.random.default_rng(seed).integers(0, n, m)
    return dataset.take(idx)


def _replicate(windows: WindowSet, m: int, trim: TrimSpec, de_cfg: DeConfig, seq: np.random.SeedSequence):
    data_seed, de_seed = seq.generate_state(2)
    idx = np.random.default_rng(int(data_seed)).integers(0, windows.n_individuals, m)
    sub = windows.take_individuals(idx)
    try:
        # threshold recomputed from the resample: its own std and its own m
        sub_trim = trim_spec_for(sub, trim.c, trim.side)
        return maximize(sub, sub_trim, de_cfg.with_seed(int(de_seed))).theta.vector
    except DynPanelError as exc:
        log.debug("bootstrap replicate failed: %s", exc)
        return None


def bootstrap_draws(
    data,
    m: int,
    trim: TrimSpec,
    B: int,
    seed: int = 0,
    de_cfg: DeConfig = DeConfig(),
    stage: int = _STAGE_CI,
    n_jobs: int = 1,
):
    """Re-estimate on ``B`` resamples of ``m`` individuals.

    Returns the ``(B_ok, dim)`` array of estimates and the number of failed
    replicates.  Replicate ``b`` always uses the same derived stream, so the
    result does not depend on ``n_jobs``.
    """
    windows = _windows(data)
    seqs = [_stream(seed, stage, m, b) for b in range(B)]
    if n_jobs == 1:
        out = [_replicate(windows, m, trim, de_cfg, s) for s in seqs]
    else:
        from joblib import Parallel, delayed

        out = Parallel(n_jobs=n_jobs)(delayed(_replicate)(windows, m, trim, de_cfg, s) for s in seqs)
    good = [v for v in out if v is not None]
    draws = np.array(good).reshape(len(good), windows.dim)
    return draws, B - len(good)


def spread(draws, theta_hat) -> float:
    """Median over coefficients of the interquartile range of the deviations."""
    dev = np.asarray(draws, dtype=float) - np.asarray(theta_hat, dtype=float)
    q75, q25 = np.percentile(dev, [75, 25], axis=0)
    return float(np.median(q75 - q25))


def rate_from_spreads(s1: float, s2: float, m1: int, m2: int, bounds=(0.1, 0.5)):
    """Rate exponent implied by spreads ``s1`` at ``m1`` and ``s2`` at ``m2``.

    Returns ``(clipped, raw)``.
    """
    if s1 <= 0 or s2 <= 0:
        raise DegenerateSpread(f"zero bootstrap spread (s1={s1}, s2={s2})")
    raw = math.log(s1 / s2) / math.log(m2 / m1)
    return float(np.clip(raw, *bounds)), raw


@dataclass
class RateEstimate:
    lambda_hat: float
    lambda_raw: float
    m1: int
    m2: int
    s1: float
    s2: float
    failed: tuple = (0, 0)
    draws: tuple = field(default=(), repr=False)


def estimate_rate(
    data,
    trim: TrimSpec,
    boot_cfg: BootstrapConfig = BootstrapConfig(),
    de_cfg: DeConfig = DeConfig(),
    theta_hat=None,
    n_jobs: int = 1,
) -> RateEstimate:
    """Double m-out-of-n bootstrap estimate of the convergence-rate exponent."""
    windows = _windows(data)
    n = windows.n_individuals
    m1, m2 = (boot_cfg.m_for(n, e) for e in boot_cfg.rate_exponents)
    if m1 < 30:
        raise DomainError(f"n={n} too small: m1={m1} < 30")
    if m1 >= m2:
        raise DomainError(f"n={n} too small to separate the two resample sizes ({m1}, {m2})")
    if theta_hat is None:
        theta_hat = maximize(windows, trim, de_cfg).theta.vector
    theta_hat = np.asarray(theta_hat, dtype=float)
    spreads, fails, all_draws = [], [], []
    for m in (m1, m2):
        draws, failed = bootstrap_draws(windows, m, trim, boot_cfg.B, boot_cfg.seed, de_cfg, _STAGE_RATE, n_jobs)
        _check_failures(failed, boot_cfg)
        spreads.append(spread(draws, theta_hat))
        fails.append(failed)
        all_draws.append(draws)
    lam, raw = rate_from_spreads(spreads[0], spreads[1], m1, m2, boot_cfg.lambda_bounds)
    return RateEstimate(lam, raw, m1, m2, spreads[0], spreads[1], tuple(fails), tuple(all_draws))


def _check_failures(failed: int, cfg: BootstrapConfig):
    if failed > cfg.max_failure_rate * cfg.B:
        raise FailureRateError(f"{failed} of {cfg.B} bootstrap replicates failed")


def ci_from_draws(theta_hat, draws, m: int, n: int, lambda_hat: float, levels=(0.90, 0.95)) -> dict:
    """Centred m-out-of-n intervals, ``{level: (lower, upper)}`` per coefficient."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    scaled = m**lambda_hat * (np.asarray(draws, dtype=float) - theta_hat)
    out = {}
    for level in levels:
        a = 1.0 - level
        q_lo, q_hi = np.quantile(scaled, [a / 2, 1 - a / 2], axis=0)
        out[float(level)] = (theta_hat - n**-lambda_hat * q_hi, theta_hat - n**-lambda_hat * q_lo)
    return out


@dataclass
class BootstrapResult:
    theta_hat: np.ndarray
    lambda_hat: float
    m: int
    n: int
    intervals: dict
    draws: np.ndarray = field(repr=False)
    n_failed: int = 0
    names: tuple = ()
    rate: RateEstimate | None = field(default=None, repr=False)

    @property
    def levels(self) -> tuple:
        return tuple(sorted(self.intervals))

    def excludes_zero(self, level: float) -> np.ndarray:
        lo, hi = self.intervals[level]
        return (lo > 0) | (hi < 0)

    def stars(self) -> list:
        """One star per confidence level whose interval excludes zero."""
        counts = sum(self.excludes_zero(lv).astype(int) for lv in self.levels)
        return ["*" * int(k) for k in np.atleast_1d(counts)]

    def to_csv(self) -> str:
        """Table layout: coefficient, estimate, stars, then bounds per level."""
        names = self.names or tuple(f"theta{k}" for k in range(len(self.theta_hat)))
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        header = ["schema_version", "coefficient", "estimate", "signif"]
        for lv in self.levels:
            pct = f"{round(lv * 100):d}"
            header += [f"lower_{pct}", f"upper_{pct}"]
        header += ["lambda_hat", "m", "n"]
        out.writerow(header)
        stars = self.stars()
        for k, name in enumerate(names):
            row = [SCHEMA_VERSION, name, repr(float(self.theta_hat[k])), stars[k]]
            for lv in self.levels:
                lo, hi = self.intervals[lv]
                row += [repr(float(lo[k])), repr(float(hi[k]))]
            row += [repr(float(self.lambda_hat)), self.m, self.n]
            out.writerow(row)
        return buf.getvalue()


def bootstrap_ci(
    data,
    theta_hat,
    trim: TrimSpec,
    boot_cfg: BootstrapConfig = BootstrapConfig(),
    lambda_hat: float | None = None,
    de_cfg: DeConfig = DeConfig(),
    n_jobs: int = 1,
) -> BootstrapResult:
    """m-out-of-n bootstrap confidence intervals around ``theta_hat``.

    If ``lambda_hat`` is None it is estimated first with :func:`estimate_rate`.
    """
    windows = _windows(data)
    n = windows.n_individuals
    theta_vec = theta_hat.vector if isinstance(theta_hat, Coefficients) else np.asarray(theta_hat, dtype=float)
    rate = None
    if lambda_hat is None:
        rate = estimate_rate(windows, trim, boot_cfg, de_cfg, theta_vec, n_jobs)
        lambda_hat = rate.lambda_hat
    lo_b, hi_b = boot_cfg.lambda_bounds
    if not lo_b <= lambda_hat <= hi_b:
        raise DomainError(f"lambda_hat={lambda_hat} outside [{lo_b}, {hi_b}]")
    m = boot_cfg.m_for(n)
    draws, failed = bootstrap_draws(windows, m, trim, boot_cfg.B, boot_cfg.seed, de_cfg, _STAGE_CI, n_jobs)
    _check_failures(failed, boot_cfg)
    intervals = ci_from_draws(theta_vec, draws, m, n, lambda_hat, boot_cfg.levels)
    return BootstrapResult(theta_vec, float(lambda_hat), m, n, intervals, draws, failed, windows.names, rate)

