"""Global maximisation of the maximum score objective on the unit sphere.

The objective is piecewise constant, so the search is derivative free:
classic ``rand/1/bin`` differential evolution runs in ambient coordinates and
every candidate is mapped onto the feasible half-cap

    {v : ||v|| = 1, w >= iota}

before evaluation.  A deterministic sphere grid serves as a brute-force
oracle for small dimensions.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateVector, DimensionTooLarge, NoFeasiblePointError, NoSwitchersError
from .objective import Objective, TrimSpec
from .panel import Coefficients, WindowSet

__all__ = [
    "DeConfig",
    "MaximizeResult",
    "normalize_to_sphere",
    "maximize",
    "grid_oracle",
    "sphere_grid",
]


@dataclass(frozen=True)
class DeConfig:
    """Differential evolution settings.

    ``population_size=None`` means ``10 * dim``.  ``iota`` is the floor on the
    special-regressor coefficient that fixes the sign normalisation.  When
    the best value has not improved for ``stagnation_patience`` generations
    the population is redrawn around the incumbent, at most
    ``stagnation_restarts`` times, before the search stops; all of this is
    capped by ``max_generations``.  ``max_restarts`` only concerns reseeding
    when no initial member is feasible.
    """

    population_size: int | None = None
    F: float = 0.8
    CR: float = 0.9
    max_generations: int = 400
    stagnation_patience: int = 60
    iota: float = 0.01
    seed: int = 0
    max_restarts: int = 3
    stagnation_restarts: int = 2

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0 < self.F <= 2:
            raise ValueError("F must lie in (0, 2]")
        if not 0 <= self.CR <= 1:
            raise ValueError("CR must lie in [0, 1]")
        if self.iota <= 0 or self.iota >= 1:
            raise ValueError("iota must lie in (0, 1)")

    def pop_size(self, dim: int) -> int:
        return self.population_size or 10 * dim

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_seed(self, seed: int) -> "DeConfig":
        from dataclasses import replace

        return replace(self, seed=int(seed))


@dataclass
class MaximizeResult:
    theta: Coefficients
    value: float
    trace: np.ndarray = field(repr=False)
    generations: int = 0
    n_evaluations: int = 0
    restarts: int = 0

    def trace_csv(self) -> str:
        lines = ["generation,best_value"]
        lines += [f"{g},{v!r}" for g, v in enumerate(map(float, self.trace))]
        return "\n".join(lines) + "\n"


def _to_sphere(pop: np.ndarray, iota: float):
    """Map ambient points to the sphere, orienting so that ``w >= 0``.

    Returns the unit vectors and a feasibility mask (``w >= iota``).
    """
    norms = np.linalg.norm(pop, axis=1)
    ok = norms >= 1e-300
    safe = np.where(ok, norms, 1.0)
    theta = pop / safe[:, None]
    flip = theta[:, -1] < 0
    theta[flip] *= -1.0
    feasible = ok & (theta[:, -1] >= iota)
    return theta, feasible


def normalize_to_sphere(v, iota: float = 0.01, names=()):
    """Project ``v`` onto the unit sphere with the sign fixed by ``w >= 0``.

    Returns ``(coefficients, feasible)``; a point whose normalised ``w`` is
    below ``iota`` is infeasible.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)) or np.linalg.norm(v) < 1e-300:
        raise DegenerateVector(f"cannot normalise {v}")
    theta, feasible = _to_sphere(v[None, :], iota)
    return Coefficients.from_vector(theta[0], names), bool(feasible[0])


def _distinct_triples(rng: np.random.Generator, size: int) -> np.ndarray:
    """Three distinct indices per row, all different from the row index."""
    keys = rng.random((size, size))
    np.fill_diagonal(keys, np.inf)
    return np.argsort(keys, axis=1)[:, :3]


def maximize(windows, trim: TrimSpec | None = None, cfg: DeConfig = DeConfig()) -> MaximizeResult:
    """Maximise the trimmed objective by differential evolution.

    ``windows`` may be a :class:`WindowSet` (with ``trim``) or a prebuilt
    :class:`Objective`.  Infeasible candidates score ``-inf``.  Ties are
    accepted in the selection step so the population can drift across
    plateaus, while the reported best point only changes on strict
    improvement.
    """
    obj = windows if isinstance(windows, Objective) else Objective(windows, trim)
    names = windows.names if isinstance(windows, WindowSet) else ()
    if obj.n_active == 0:
        raise NoSwitchersError("no untrimmed switcher window: the objective is identically zero")
    dim = obj.dim
    size = cfg.pop_size(dim)

    for attempt in range(cfg.max_restarts + 1):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(attempt,)))
        pop = rng.uniform(-1.0, 1.0, (size, dim))
        theta, feasible = _to_sphere(pop, cfg.iota)
        if feasible.any():
            break
    else:
        raise NoFeasiblePointError(
            f"no candidate with w >= {cfg.iota} after {cfg.max_restarts} restarts"
        )

    def score(theta, feasible):
        out = np.full(len(theta), -np.inf)
        if feasible.any():
            out[feasible] = obj.counts(theta[feasible])
        return out

    fit = score(theta, feasible)
    n_evals = int(feasible.sum())
    k = int(np.argmax(fit))
    best_val, best_theta = fit[k], theta[k].copy()
    trace = [best_val]
    stall = 0
    n_stag = 0
    gen = 0
    rows = np.arange(size)
    for gen in range(1, cfg.max_generations + 1):
        r = _distinct_triples(rng, size)
        mutant = pop[r[:, 0]] + cfg.F * (pop[r[:, 1]] - pop[r[:, 2]])
        cross = rng.random((size, dim)) < cfg.CR
        cross[rows, rng.integers(0, dim, size)] = True
        trial = np.where(cross, mutant, pop)
        out = np.abs(trial) > 1.0
        if out.any():
            trial[out] = rng.uniform(-1.0, 1.0, int(out.sum()))
        t_theta, t_feas = _to_sphere(trial, cfg.iota)
        t_fit = score(t_theta, t_feas)
        n_evals += int(t_feas.sum())

        accept = t_fit >= fit
        pop[accept] = trial[accept]
        fit[accept] = t_fit[accept]

        k = int(np.argmax(t_fit))
        if t_fit[k] > best_val:
            best_val, best_theta = t_fit[k], t_theta[k].copy()
            stall = 0
        else:
            stall += 1
        trace.append(best_val)
        if stall >= cfg.stagnation_patience:
            if n_stag >= cfg.stagnation_restarts:
                break
            # elitist restart: keep the incumbent, redraw everyone else
            n_stag += 1
            keep = int(np.argmax(fit))
            pop = np.vstack([pop[keep], rng.uniform(-1.0, 1.0, (size - 1, dim))])
            theta, feasible = _to_sphere(pop, cfg.iota)
            fit = score(theta, feasible)
            n_evals += int(feasible.sum()) - 1
            stall = 0

    return MaximizeResult(
        theta=Coefficients.from_vector(best_theta, names),
        value=float(best_val) / obj.n,
        trace=np.asarray(trace, dtype=float) / obj.n,
        generations=gen,
        n_evaluations=n_evals,
        restarts=attempt,
    )


def sphere_grid(dim: int, resolution: int) -> np.ndarray:
    """Deterministic near-uniform points on the unit sphere in ``R^dim``.

    dim 2: equally spaced angles; dim 3: Fibonacci lattice; dim 4: Halton
    points pushed through the normal quantile function and normalised.
    """
    if dim > 4:
        raise DimensionTooLarge(f"sphere grid supports dim <= 4, got {dim}")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    i = np.arange(resolution) + 0.5
    if dim == 2:
        ang = 2 * np.pi * i / resolution
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        h = 1.0 - 2.0 * i / resolution
        rad = np.sqrt(1.0 - h**2)
        phi = np.pi * (3.0 - math.sqrt(5.0)) * np.arange(resolution)
        return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), h])
    from scipy.stats import norm, qmc

    u = qmc.Halton(d=dim, scramble=False).random(resolution + 1)[1:]
    g = norm.ppf(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def grid_oracle(windows, trim: TrimSpec | None = None, resolution: int = 10_000, iota: float = 0.01):
    """Exhaustive evaluation over a sphere grid intersected with ``w >= iota``.

    Returns ``(theta, value)`` for the first grid point attaining the maximum.
    """
    obj = windows if isinstance(windows, Objective) else Objective(windows, trim)
    if obj.dim > 4:
        raise DimensionTooLarge(f"grid oracle needs p + 2 <= 4, got {obj.dim}")
    grid = sphere_grid(obj.dim, resolution)
    grid = grid[grid[:, -1] >= iota]
    vals = np.concatenate([obj.counts(chunk) for chunk in np.array_split(grid, max(1, len(grid) // 2000))])
    k = int(np.argmax(vals))
    names = windows.names if isinstance(windows, WindowSet) else ()
    return Coefficients.from_vector(grid[k], names), float(vals[k]) / obj.n
