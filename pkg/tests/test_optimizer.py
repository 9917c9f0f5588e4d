from __future__ import annotations

import numpy as np
import pytest

from dynpanel import (
    DegenerateVector,
    DimensionTooLarge,
    NoFeasiblePointError,
    NoSwitchersError,
    extract_windows,
)
from dynpanel.dgp import design1, simulate
from dynpanel.objective import Objective, TrimSpec, trim_spec_for
from dynpanel.optimizer import DeConfig, grid_oracle, maximize, normalize_to_sphere, sphere_grid
from dynpanel.panel import EstimationWindow, WindowSet

from oracles import enumerate_max, random_small_instance


def _single_window():
    return WindowSet.from_windows([EstimationWindow(0, 2, 2.0, 1, 1, np.array([1.0, 2.0, -0.4]))])


def test_normalize_examples():
    c, ok = normalize_to_sphere([0, 0, 2])
    np.testing.assert_allclose(c.vector, [0, 0, 1])
    assert ok
    _, ok = normalize_to_sphere([3, 4, 0])
    assert not ok
    c, ok = normalize_to_sphere([1, 1, 1])
    np.testing.assert_allclose(c.vector, np.full(3, 0.5774), atol=5e-5)
    assert ok


def test_normalize_flips_sign_of_negative_w():
    c, ok = normalize_to_sphere([1.0, -2.0, -2.0])
    np.testing.assert_allclose(c.vector, [-1 / 3, 2 / 3, 2 / 3])
    assert ok


def test_normalize_degenerate():
    with pytest.raises(DegenerateVector):
        normalize_to_sphere([0.0, 0.0, 0.0])
    with pytest.raises(DegenerateVector):
        normalize_to_sphere([1e-320, 0.0, 0.0])


def test_de_config_validation_and_hash():
    with pytest.raises(ValueError):
        DeConfig(population_size=3)
    with pytest.raises(ValueError):
        DeConfig(F=0.0)
    with pytest.raises(ValueError):
        DeConfig(CR=1.5)
    assert DeConfig().config_hash() == DeConfig().config_hash()
    assert DeConfig().config_hash() != DeConfig(F=0.5).config_hash()
    assert DeConfig().pop_size(4) == 40


def test_single_window_reaches_one():
    w = _single_window()
    res = maximize(w, TrimSpec(1.0), DeConfig(seed=0))
    assert res.value == 1.0
    th, val = grid_oracle(w, TrimSpec(1.0))
    assert val == 1.0


def test_no_switchers():
    w = _single_window()
    with pytest.raises(NoSwitchersError):
        maximize(w, TrimSpec(5.0))


def test_grid_oracle_on_flat_objective():
    w = WindowSet.from_windows([EstimationWindow(0, 2, 2.0, 1, 0, np.array([1.0, 2.0, -0.4]))])
    assert grid_oracle(w, TrimSpec(1.0), resolution=10_000)[1] == 0.0


def test_no_feasible_point():
    w = _single_window()
    with pytest.raises(NoFeasiblePointError):
        maximize(w, TrimSpec(1.0), DeConfig(iota=0.999, population_size=4))


def test_grid_dimension_limit():
    with pytest.raises(DimensionTooLarge):
        sphere_grid(5, 100)
    ws = extract_windows(simulate(design1(n=200, seed=0)))
    wide = WindowSet(ws.owner, ws.t, ws.z_mid, ws.y_mid, ws.d_switch,
                     np.hstack([ws.chi_bar, ws.chi_bar[:, :1]]), ws.n_individuals)
    with pytest.raises(DimensionTooLarge):
        grid_oracle(wide, TrimSpec(0.5))


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_sphere_grid_is_unit(dim):
    g = sphere_grid(dim, 2000)
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), 1.0, atol=1e-12)
    assert len(g) == 2000
    assert (g[:, -1] > 0).mean() == pytest.approx(0.5, abs=0.05)


@pytest.fixture(scope="module")
def design_fit():
    ws = extract_windows(simulate(design1(n=3000, seed=21)))
    tr = trim_spec_for(ws)
    return ws, tr, maximize(ws, tr, DeConfig(seed=5))


def test_returned_point_is_feasible(design_fit):
    _, _, res = design_fit
    assert abs(res.theta.norm - 1) < 1e-10
    assert res.theta.w >= 0.01


def test_trace_is_monotone(design_fit):
    _, _, res = design_fit
    assert np.all(np.diff(res.trace) >= 0)
    assert res.trace[-1] == res.value
    lines = res.trace_csv().splitlines()
    assert lines[0] == "generation,best_value"
    assert len(lines) == len(res.trace) + 1


def test_seed_determinism(design_fit):
    ws, tr, res = design_fit
    again = maximize(ws, tr, DeConfig(seed=5))
    np.testing.assert_array_equal(again.theta.vector, res.theta.vector)
    assert again.value == res.value


def test_value_consistent_with_objective(design_fit):
    ws, tr, res = design_fit
    assert Objective(ws, tr)(res.theta) == res.value


def test_duplicating_windows_keeps_argmax(design_fit):
    ws, tr, res = design_fit
    twice = ws.take_individuals(np.repeat(np.arange(ws.n_individuals), 2))
    obj1, obj2 = Objective(ws, tr), Objective(twice, tr)
    pts = np.random.default_rng(0).normal(size=(500, 4))
    pts[:, -1] = np.abs(pts[:, -1])
    np.testing.assert_array_equal(obj2.counts(pts), 2 * obj1.counts(pts))
    np.testing.assert_allclose(obj2.values(pts), obj1.values(pts))
    dup = maximize(twice, tr, DeConfig(seed=5))
    assert dup.value == res.value


def test_de_matches_oracles_on_small_problems():
    rng = np.random.default_rng(123)
    tr = TrimSpec(1.0)
    for seed in range(20):
        ws = random_small_instance(rng)
        de = maximize(ws, tr, DeConfig(seed=seed)).value
        grid = grid_oracle(ws, tr)[1]
        exact = enumerate_max(ws, 1.0)
        assert grid <= exact + 1e-12
        assert de <= exact + 1e-12
        assert de >= grid - 1e-12


def test_stagnation_restarts_extend_search():
    w = _single_window()
    plain = maximize(w, TrimSpec(1.0), DeConfig(seed=0, stagnation_restarts=0))
    again = maximize(w, TrimSpec(1.0), DeConfig(seed=0, stagnation_restarts=2))
    assert plain.generations < again.generations <= 400
    assert again.generations >= 3 * 60
    assert again.value == plain.value == 1.0
