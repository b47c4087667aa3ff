# -*- coding: utf-8 -*-
from __future__ import annotations

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import PreconditionError, SpecValidationError
from general_solver import (
    ADVERSARY, DEFENDER, GeneralGameSpec, PolicyTable, build_cost_to_go, check_policy_row, map_to_grid,
    snap_to_grid, solve_general, value_at,
)
from graph_core import build_graph


def two_node_spec(horizon: int = 1, grid=(1.0,)) -> GeneralGameSpec:
    """two nodes that can take each other over, unit costs, identity dynamics"""
    graph = build_graph(2, [(0, 1), (1, 0)])
    G = len(grid)
    return GeneralGameSpec(
        graph=graph,
        horizon=horizon,
        state_grid=np.array(grid),
        dynamics=np.tile(np.arange(G), (horizon, 2, 1)),
        stage_costs=np.tile(np.array([1.0, 3.0])[None, :, None], (horizon + 1, 1, G)),
        defender_costs=np.ones((horizon, 2, G)),
        adversary_costs=np.ones((horizon, 2, G)),
    )


def test_cost_to_go_charges_target_costs():
    spec = two_node_spec()
    M = build_cost_to_go(spec, 1, 0, 0, spec.stage_costs[1])
    # rows: defender idle / defender to 1; cols: adversary idle / adversary to 1
    assert_allclose(M, [[1.0, 2.0], [4.0, 3.0]])


def test_single_step_value():
    spec = two_node_spec()
    table = solve_general(spec)
    # [[1, 2], [4, 3]] has a pure saddle at (0, 1)
    assert table.values[0, 0, 0] == pytest.approx(1.0 + 2.0)
    assert_allclose(table.values[1], spec.stage_costs[1])
    assert table.policies.state_dependent
    assert_allclose(table.policies.row(DEFENDER, 1, 0, 0), [1.0, 0.0])


def test_idle_only_game_is_a_plain_sum():
    graph = build_graph(1, [])
    L, G = 4, 2
    spec = GeneralGameSpec(
        graph, L, np.array([0.0, 1.0]),
        dynamics=np.tile([1, 1], (L, 1, 1)),
        stage_costs=np.tile([[0.5, 2.0]], (L + 1, 1, 1)),
        defender_costs=np.zeros((L, 1, G)),
        adversary_costs=np.zeros((L, 1, G)),
    )
    table = solve_general(spec)
    # from x=0: 0.5 once, then 2.0 for the remaining steps and the terminal cost
    assert value_at(table, 1, 0, 0) == pytest.approx(0.5 + 2.0 * L)
    assert value_at(table, 1, 0, 1) == pytest.approx(2.0 * (L + 1))


def test_boundary_is_copied_exactly(rng):
    spec = two_node_spec(horizon=3, grid=(0.0, 1.0, 2.0))
    table = solve_general(spec)
    assert np.array_equal(table.values[3], spec.stage_costs[3])


def test_threaded_solve_matches_serial():
    spec = two_node_spec(horizon=4, grid=(0.0, 0.5, 1.0))
    serial = solve_general(spec, max_workers=1)
    threaded = solve_general(spec, max_workers=4)
    assert np.array_equal(serial.values, threaded.values)


def test_value_at_bounds():
    table = solve_general(two_node_spec())
    with pytest.raises(PreconditionError):
        value_at(table, 3, 0, 0)
    with pytest.raises(PreconditionError):
        value_at(table, 1, 2, 0)
    with pytest.raises(PreconditionError):
        value_at(table, 1, 0, 1)


def test_spec_validation_collects_problems():
    graph = build_graph(2, [(0, 1)])
    with pytest.raises(SpecValidationError) as info:
        GeneralGameSpec(
            graph, 1, np.array([0.0, 1.0]),
            dynamics=np.array([[[0, 5], [0, 1]]]),
            stage_costs=np.array([[[1.0, -1.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]),
            defender_costs=np.zeros((1, 2, 2)),
            adversary_costs=np.zeros((1, 2, 2)),
        )
    text = " | ".join(info.value.violations)
    assert "dynamics[1][0][1]" in text
    assert "stage_costs[1][0][1]: negative cost" in text


def test_shape_mismatch_is_reported():
    graph = build_graph(2, [(0, 1)])
    with pytest.raises(SpecValidationError, match="stage_costs"):
        GeneralGameSpec(graph, 2, [0.0], np.zeros((2, 2, 1)), np.zeros((2, 2, 1)), np.zeros((2, 2, 1)), np.zeros((2, 2, 1)))


def test_snap_to_grid_prefers_lowest_index_on_ties():
    idx, dist = snap_to_grid([0.0, 1.0, 2.0], [0.5, 1.9, 3.0])
    assert idx.tolist() == [0, 2, 2]
    assert_allclose(dist, [0.5, 0.1, 1.0])


def test_snap_vector_grid():
    grid = np.array([[0.0, 0.0], [1.0, 1.0]])
    idx, _ = snap_to_grid(grid, [0.9, 0.8])
    assert idx.tolist() == [1]


def test_map_to_grid_rejects_off_grid_points():
    with pytest.raises(SpecValidationError) as info:
        map_to_grid([0.0, 1.0], [1.0, 0.4], where="dynamics.maps.a[0]")
    assert info.value.violations[0].startswith("dynamics.maps.a[0][1]")


def test_map_to_grid_snaps_with_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="general_solver"):
        idx = map_to_grid([0.0, 1.0], [1.0, 0.4], snap=True)
    assert idx.tolist() == [1, 0]
    assert "snapped 1 off-grid point" in caplog.text


def test_check_policy_row():
    assert_allclose(check_policy_row([0.25, 0.75], 2, "row"), [0.25, 0.75])
    with pytest.raises(PreconditionError):
        check_policy_row([0.5, 0.6], 2, "row")
    with pytest.raises(PreconditionError):
        check_policy_row([1.0], 2, "row")


def test_policy_table_perturbation():
    table = PolicyTable(((np.array([1.0, 0.0]),),), ((np.array([0.5, 0.5]),),))
    moved = table.perturbed(0.1, players=[DEFENDER])
    assert_allclose(moved.row(DEFENDER, 1, 0), [0.9, 0.1])
    assert_allclose(moved.row(ADVERSARY, 1, 0), [0.5, 0.5])
    with pytest.raises(PreconditionError):
        table.row(DEFENDER, 2, 0)
    with pytest.raises(PreconditionError):
        table.rows("referee")


def random_grid_spec(rng: np.random.Generator, node_count: int = 3, horizon: int = 3, grid_size: int = 4) -> GeneralGameSpec:
    edges = [(u, v) for u in range(node_count) for v in range(node_count) if u != v and rng.random() < 0.6]
    L, V, G = horizon, node_count, grid_size
    return GeneralGameSpec(
        graph=build_graph(V, edges),
        horizon=L,
        state_grid=np.linspace(0.0, 1.0, G),
        dynamics=rng.integers(0, G, size=(L, V, G)),
        stage_costs=rng.uniform(0.0, 2.0, size=(L + 1, V, G)),
        defender_costs=rng.uniform(0.0, 2.0, size=(L, V, G)),
        adversary_costs=rng.uniform(0.0, 2.0, size=(L, V, G)),
    )


def _with(spec: GeneralGameSpec, **costs) -> GeneralGameSpec:
    fields = dict(
        stage_costs=spec.stage_costs, defender_costs=spec.defender_costs, adversary_costs=spec.adversary_costs,
    )
    fields.update(costs)
    return GeneralGameSpec(spec.graph, spec.horizon, spec.state_grid, spec.dynamics, **fields)


def test_values_are_monotone_in_the_costs(rng):
    def bump(arr):
        return arr + rng.uniform(0.0, 0.5, size=arr.shape)

    for _ in range(10):
        spec = random_grid_spec(rng)
        base = solve_general(spec).values
        more_g = solve_general(_with(spec, stage_costs=bump(spec.stage_costs))).values
        more_d = solve_general(_with(spec, defender_costs=bump(spec.defender_costs))).values
        more_a = solve_general(_with(spec, adversary_costs=bump(spec.adversary_costs))).values
        assert (more_g >= base - 1e-9).all()
        assert (more_d >= base - 1e-9).all()
        assert (more_a <= base + 1e-9).all()


def test_zero_cost_game_has_zero_value(rng):
    spec = random_grid_spec(rng, node_count=4, horizon=5, grid_size=3)
    zero = _with(
        spec,
        stage_costs=np.zeros_like(spec.stage_costs),
        defender_costs=np.zeros_like(spec.defender_costs),
        adversary_costs=np.zeros_like(spec.adversary_costs),
    )
    assert_allclose(solve_general(zero).values, 0.0, atol=1e-12)
