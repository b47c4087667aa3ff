# -*- coding: utf-8 -*-
from __future__ import annotations

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dual_deter import (
    ADVERSARY_TAKEOVER, AGREED, BOTH_TAKEOVER, DEGENERATE, DERIVED, DISAGREED, IDLE, LP_ONLY, MIXED, PRINTED, TIE,
    build_dual_deter_spec, solve_dual_deter, solve_end_node, solve_interior_node, solve_node, solve_start_node,
    threshold_quantities,
)
from errors import PreconditionError, SpecValidationError
from general_solver import ADVERSARY, DEFENDER
from scalar_lq import solve_scalar_lq
from tests.conftest import make_dual_spec


def chain(n: int, a=1.0, d=1.0):
    """one-step chain with zero state cost and no dynamics"""
    return build_dual_deter_spec(n, 1, f=1.0, g=0.0, d=d, a=a)


# start node
def test_start_mixed():
    sol = solve_start_node(chain(1), 1, [1.0, 3.0], PRINTED)
    assert sol.diagnostic.branch == MIXED
    assert sol.diagnostic.status == AGREED
    assert sol.value == pytest.approx(1.5)
    assert_allclose(sol.row_strategy, [0.5, 0.5])
    assert_allclose(sol.col_strategy, [0.5, 0.5])


def test_start_idle():
    sol = solve_start_node(chain(1), 1, [1.0, 1.5], PRINTED)
    assert sol.diagnostic.branch == IDLE and sol.diagnostic.agreed
    assert sol.value == pytest.approx(1.0)


def test_start_adversary_takeover():
    sol = solve_start_node(chain(1, a=0.5, d=3.0), 1, [1.0, 2.0], DERIVED)
    assert sol.diagnostic.branch == ADVERSARY_TAKEOVER and sol.diagnostic.agreed
    assert sol.value == pytest.approx(1.5)
    assert_allclose(sol.col_strategy, [0.0, 1.0])


def test_start_tie_goes_to_the_lp_in_printed_mode():
    spec = chain(1, a=1.0, d=0.5)
    printed = solve_start_node(spec, 1, [1.0, 2.0], PRINTED)
    assert printed.diagnostic.branch == TIE
    assert printed.diagnostic.status == LP_ONLY
    assert np.isnan(printed.diagnostic.closed_form_value)
    derived = solve_start_node(spec, 1, [1.0, 2.0], DERIVED)
    assert derived.diagnostic.branch == IDLE and derived.diagnostic.agreed
    assert printed.value == pytest.approx(1.0)
    assert derived.value == pytest.approx(1.0)


# interior nodes
def test_interior_idle_both_formula_sets():
    spec = chain(2, a=0.5, d=0.5)
    for formulas in (PRINTED, DERIVED):
        sol = solve_interior_node(spec, 1, 1, [1.9, 2.0, 2.2], formulas)
        assert sol.diagnostic.branch == IDLE
        assert sol.diagnostic.agreed
        assert sol.value == pytest.approx(2.0)


def test_interior_degenerate_denominator():
    sol = solve_interior_node(chain(2, a=0.5, d=0.5), 1, 1, [1.0, 2.0, 3.0], PRINTED)
    assert sol.diagnostic.branch == DEGENERATE
    assert sol.diagnostic.status == LP_ONLY
    assert sol.value == pytest.approx(2.0)
    assert_allclose(sol.row_strategy, [0.0, 1.0])
    assert_allclose(sol.col_strategy, [0.0, 1.0])


def test_interior_both_takeover_derived():
    sol = solve_interior_node(chain(2, a=0.5, d=0.5), 1, 1, [1.0, 2.0, 3.0], DERIVED)
    assert sol.diagnostic.branch == BOTH_TAKEOVER and sol.diagnostic.agreed
    assert sol.value == pytest.approx(2.0)


def test_interior_wide_gap_is_degenerate():
    sol = solve_interior_node(chain(2), 1, 1, [0.0, 2.0, 4.0], PRINTED)
    assert sol.diagnostic.status == LP_ONLY
    assert sol.value == pytest.approx(2.0)


def test_interior_rejects_boundary_nodes():
    with pytest.raises(PreconditionError):
        solve_interior_node(chain(2), 1, 0, [1.0, 1.0, 1.0])


# end node
def test_end_node_printed_branch_is_overruled(caplog):
    spec = build_dual_deter_spec(1, 1, f=1.0, g=0.0, d=[1.0, 3.0], a=[1.0, 1.0])
    with caplog.at_level(logging.WARNING, logger="dual_deter"):
        sol = solve_end_node(spec, 1, [1.0, 3.0], PRINTED)
    diag = sol.diagnostic
    assert diag.status == DISAGREED
    assert diag.closed_form_value == pytest.approx(4.0)
    assert diag.lp_value == pytest.approx(3.0)
    assert sol.value == pytest.approx(3.0)
    assert "using the lp" in caplog.text


def test_end_node_derived_idle():
    spec = build_dual_deter_spec(1, 1, f=1.0, g=0.0, d=[1.0, 3.0], a=[1.0, 1.0])
    sol = solve_end_node(spec, 1, [1.0, 3.0], DERIVED)
    assert sol.diagnostic.branch == IDLE and sol.diagnostic.agreed
    assert sol.value == pytest.approx(3.0)


def test_end_node_mixed():
    spec = chain(1, a=0.5, d=0.5)
    for formulas in (PRINTED, DERIVED):
        sol = solve_end_node(spec, 1, [1.0, 3.0], formulas)
        assert sol.diagnostic.branch == MIXED and sol.diagnostic.agreed
        assert sol.value == pytest.approx(2.625)
        assert_allclose(sol.row_strategy, [0.75, 0.25])
        assert_allclose(sol.col_strategy, [0.25, 0.75])


def test_stage_cost_is_added():
    spec = build_dual_deter_spec(1, 1, f=1.0, g=[[0.7, 0.2], [0.0, 0.0]], d=1.0, a=1.0)
    assert solve_node(spec, 1, 0, [1.0, 3.0]).value == pytest.approx(0.7 + 1.5)


def test_threshold_quantities():
    spec = build_dual_deter_spec(2, 1, f=[1.0, 2.0, 1.0], g=0.0, d=1.0, a=1.0)
    p_next = [1.0, 0.5, 3.0]
    # scaled: (1, 2, 3)
    assert threshold_quantities(spec, 1, 0, p_next).p_hat == pytest.approx(1.0)
    mid = threshold_quantities(spec, 1, 1, p_next)
    assert (mid.p_tilde, mid.p_check) == (pytest.approx(1.0), pytest.approx(-1.0))
    assert threshold_quantities(spec, 1, 2, p_next).p_bar == pytest.approx(1.0)


def test_unknown_formula_set():
    with pytest.raises(PreconditionError):
        solve_dual_deter(chain(1), formulas="guessed")


def test_p_next_shape_is_checked():
    with pytest.raises(PreconditionError):
        solve_start_node(chain(2), 1, [1.0, 2.0])


def test_negative_costs_are_rejected():
    with pytest.raises(SpecValidationError):
        build_dual_deter_spec(2, 2, f=1.0, g=1.0, d=-0.1, a=1.0)


# full chain
def test_chain_matches_the_lp_solver(small_dual_spec):
    for formulas in (PRINTED, DERIVED):
        result = solve_dual_deter(small_dual_spec, formulas)
        lp = solve_scalar_lq(small_dual_spec.to_scalar_spec())
        assert_allclose(result.table.coefficients, lp.coefficients, rtol=1e-9, atol=1e-12)
        assert np.array_equal(result.table.coefficients[-1], small_dual_spec.g[-1])
        assert len(result.diagnostics) == small_dual_spec.horizon * small_dual_spec.node_count
        assert result.formulas == formulas


def test_derived_formulas_always_agree(small_dual_spec):
    result = solve_dual_deter(small_dual_spec, DERIVED)
    assert all(d.status == AGREED for d in result.diagnostics)
    assert result.disagreements == []


def test_threaded_chain_matches_serial(small_dual_spec):
    serial = solve_dual_deter(small_dual_spec, max_workers=1)
    threaded = solve_dual_deter(small_dual_spec, max_workers=3)
    assert np.array_equal(serial.table.coefficients, threaded.table.coefficients)


@pytest.mark.slow
def test_random_chains():
    rng = np.random.default_rng(99)
    for _ in range(300):
        spec = make_dual_spec(rng, chain_length=int(rng.integers(1, 7)), horizon=int(rng.integers(1, 11)))
        lp = solve_scalar_lq(spec.to_scalar_spec()).coefficients
        printed = solve_dual_deter(spec, PRINTED)
        derived = solve_dual_deter(spec, DERIVED)
        assert_allclose(printed.table.coefficients, lp, rtol=1e-8, atol=1e-10)
        assert_allclose(derived.table.coefficients, lp, rtol=1e-8, atol=1e-10)
        assert not derived.disagreements


def test_zero_cost_chain_has_zero_value(rng):
    spec = build_dual_deter_spec(4, 6, f=rng.uniform(0.5, 1.5, size=(6, 5)), g=0.0, d=0.0, a=0.0)
    for formulas in (PRINTED, DERIVED):
        assert_allclose(solve_dual_deter(spec, formulas).table.coefficients, 0.0, atol=1e-12)


def test_mixed_cells_play_every_action(rng):
    mixed = 0
    for _ in range(20):
        spec = make_dual_spec(rng, chain_length=3, horizon=4)
        result = solve_dual_deter(spec, DERIVED)
        policies = result.table.policies
        for diag in result.diagnostics:
            if diag.branch != MIXED:
                continue
            mixed += 1
            for row in (policies.row(DEFENDER, diag.k, diag.node), policies.row(ADVERSARY, diag.k, diag.node)):
                assert ((row > 0.0) & (row < 1.0)).all(), (diag, row)
    assert mixed > 0
