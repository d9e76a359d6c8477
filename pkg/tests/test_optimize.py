import math

import numpy as np
import pytest

from src.bounds.qsl import BoundEvaluator, energy_basis
from src.dynamics.propagate import propagate
from src.dynamics.types import GeneratorSpec
from src.operators.linalg import is_unitary
from src.operators.types import WeightVector
from src.optimize.search import basis_candidates, optimize_basis, optimize_full, optimize_p, optimize_w
from src.optimize.types import OptimizeConfig, parse_p_grid

SMALL = dict(basis_samples=8, hillclimb_iters=40)


def test_parse_p_grid_accepts_inf():
    assert parse_p_grid("1, 2, inf") == [1.0, 2.0, math.inf]


@pytest.mark.parametrize(
    "grid",
    ["2,3", "1,3", "1,2,2", "3,2,1", "0.5,1,2", ""],
)
def test_config_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        OptimizeConfig(p_grid=grid)


def test_config_defaults_follow_settings():
    cfg = OptimizeConfig()
    assert cfg.p_grid[0] == 1.0 and math.isinf(cfg.p_grid[-1])
    assert cfg.basis_samples == 100
    assert cfg.hillclimb_iters == 400
    assert cfg.stall_limit == 10


def test_optimize_w_matches_exhaustive_scan(scenario_trajectory):
    traj = scenario_trajectory("qudit4", grid_points=257, tau=2.0)
    evaluator = BoundEvaluator(traj)
    j, value = optimize_w(traj, 2.0, evaluator=evaluator)
    scan = [evaluator.evaluate_indicator(2.0, k).value for k in range(1, 17)]
    assert value == pytest.approx(max(scan))
    assert j == 1 + int(np.argmax(scan))


def test_optimize_p_never_loses_to_the_grid(scenario_trajectory):
    traj = scenario_trajectory("spont_emission", grid_points=257, gamma=1.0, tau=1.0)
    evaluator = BoundEvaluator(traj)
    w = WeightVector.indicator(4, 4)
    grid = OptimizeConfig().p_grid
    p, value = optimize_p(traj, w, form="supremum", p_grid=grid, evaluator=evaluator)
    grid_best = max(evaluator.evaluate(q, w, "supremum", diagnostics=False).value for q in grid)
    assert value >= grid_best - 1e-12
    assert 1.0 <= p


@pytest.mark.parametrize("form", ["integral", "supremum"])
def test_first_entry_weight_keeps_first_grid_p(scenario_trajectory, form):
    grid = OptimizeConfig().p_grid
    w = WeightVector.indicator(1, 4)
    for gamma in (0.2, 0.5, 0.8, 1.3):
        for tau in (0.5, 1.0, 2.0, 3.0):
            traj = scenario_trajectory("spont_emission", grid_points=257, gamma=gamma, tau=tau)
            evaluator = BoundEvaluator(traj)
            p, value = optimize_p(traj, w, form=form, p_grid=grid, evaluator=evaluator)
            assert p == grid[0], (gamma, tau)
            assert value == pytest.approx(evaluator.evaluate(grid[0], w, form, diagnostics=False).value, rel=1e-9)


def test_emission_energy_basis_orders_p(scenario_trajectory):
    traj = scenario_trajectory("spont_emission", gamma=1.0, tau=1.0)
    evaluator = BoundEvaluator(traj, energy_basis(traj), basis_tag="energy")
    w = WeightVector.indicator(4, 4)
    v1, v2, v4 = (evaluator.evaluate(p, w, diagnostics=False).value for p in (1.0, 2.0, 4.0))
    assert v1 == pytest.approx(1.0, rel=1e-6)
    assert v2 == pytest.approx(0.99796, abs=5e-4)
    assert v4 == pytest.approx(0.9964, abs=5e-4)
    assert v1 > v2 > v4

    p, value = optimize_p(traj, w, p_grid=[1.0, 2.0, 4.0], evaluator=evaluator)
    assert p == 1.0
    assert value == pytest.approx(v1, rel=1e-12)


def test_constant_trajectory_gives_zero_for_every_p():
    gen = GeneratorSpec.constant(np.diag([0.0, 1.0]))
    traj = propagate(gen, np.diag([1.0, 0.0]).astype(complex), 1.0)
    grid = OptimizeConfig().p_grid
    evaluator = BoundEvaluator(traj)
    w = WeightVector.indicator(1, 4)
    assert all(evaluator.evaluate(q, w).value == 0.0 for q in grid)
    assert optimize_p(traj, w, p_grid=grid, evaluator=evaluator) == (grid[0], 0.0)


def test_basis_candidates_are_seeded(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", grid_points=129, tau=1.0)
    cfg = OptimizeConfig(basis_samples=5, seed=3)
    first = basis_candidates(traj, cfg)
    second = basis_candidates(traj, cfg)
    assert [tag for tag, _ in first] == [tag for tag, _ in second]
    assert first[0][0] == "canonical"
    assert any(tag == "delta_diag" for tag, _ in first)
    assert sum(tag.startswith("haar:") for tag, _ in first) == 5
    for (_, a), (_, b) in zip(first, second):
        assert np.array_equal(a, b)


def test_optimize_basis_history_is_monotone(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", grid_points=257, tau=2.5)
    basis, value, history = optimize_basis(traj, 1.0, WeightVector.indicator(1, 4), "integral", OptimizeConfig(**SMALL))
    assert is_unitary(basis)
    values = [v for _, v in history]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert value == pytest.approx(values[-1])
    assert value <= traj.tau * (1 + 1e-6)


def test_optimize_full_is_deterministic(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", grid_points=257, tau=2.0)
    cfg = OptimizeConfig(seed=11, **SMALL)
    first = optimize_full(traj, cfg)
    second = optimize_full(traj, cfg)
    assert first.best_value == second.best_value
    assert first.best_p == second.best_p
    assert np.array_equal(first.best_basis, second.best_basis)
    assert first.evaluations > 0


def test_optimize_full_reevaluates_its_optimum(scenario_trajectory):
    traj = scenario_trajectory("spont_emission", grid_points=257, gamma=0.5, tau=1.0)
    report = optimize_full(traj, OptimizeConfig(**SMALL))
    again = BoundEvaluator(traj, report.best_basis).evaluate(
        report.best_p, WeightVector.indicator(report.best_w_index, 4), report.form, strict=False
    )
    assert report.best_value == pytest.approx(again.value, rel=1e-12)
    assert report.best_value <= traj.tau * (1 + 1e-6)
    assert report.degenerate_optima_count >= 1


def test_optimize_full_beats_every_fixed_choice(scenario_trajectory):
    traj = scenario_trajectory("qudit4", grid_points=257, tau=2.0)
    report = optimize_full(traj, OptimizeConfig(**SMALL))
    _, canonical_best = optimize_w(traj, 1.0)
    assert report.best_value >= canonical_best - 1e-12


def test_supremum_target(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", grid_points=257, tau=1.0)
    report = optimize_full(traj, OptimizeConfig(target_form="supremum", **SMALL))
    assert report.form == "supremum"
    assert report.best_value <= report.best_result.integral_value + 1e-12


@pytest.mark.slow
def test_qubit_optimum_beyond_pi(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", tau=4.0 * math.pi / 3.0)
    report = optimize_full(traj)
    assert report.best_value == pytest.approx(3.20, abs=0.05)


@pytest.mark.slow
def test_qudit_energy_basis_best_value(scenario_trajectory):
    traj = scenario_trajectory("qudit4", tau=3.43)
    evaluator = BoundEvaluator(traj, energy_basis(traj), basis_tag="energy")
    results = [(optimize_w(traj, p, evaluator=evaluator), p) for p in OptimizeConfig().p_grid]
    (j, value), _ = max(results, key=lambda item: item[0][1])
    assert value == pytest.approx(1.98, abs=0.01)
    assert j in (1, 2)
