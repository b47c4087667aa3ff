# -*- coding: utf-8 -*-
from __future__ import annotations

import pytest

from errors import InvalidActionError, PreconditionError, SpecValidationError
from graph_core import TAU, DualDeterTopology, FlipState, action_label, build_graph, flipdyn_transition


def test_neighborhoods_put_idle_first():
    g = build_graph(3, [(0, 1), (0, 2), (1, 2)])
    assert g.neighborhoods == ((0, 1, 2), (1, 2), (2,))


def test_single_node_is_idle_only():
    assert build_graph(1, []).defender_actions(0) == (0,)


def test_neighborhood_order_is_ascending_after_idle():
    g = build_graph(3, [(0, 1), (1, 0), (1, 2), (2, 1), (0, 2)])
    assert g.adversary_actions(1) == (1, 0, 2)


def test_duplicate_edges_and_self_loops_collapse():
    g = build_graph(2, [(0, 1), (0, 1), (0, 0), (1, 1)])
    assert g.neighborhoods == ((0, 1), (1,))


def test_out_of_range_edges_are_all_reported():
    with pytest.raises(SpecValidationError) as info:
        build_graph(2, [(0, 1), (0, 5), (7, 1)])
    assert len(info.value.violations) == 2
    assert info.value.violations[0].startswith("edges[1]")
    assert "edges[2]" in info.value.violations[1]


@pytest.mark.parametrize("count", [0, -1, True])
def test_node_count_must_be_positive(count):
    with pytest.raises(SpecValidationError):
        build_graph(count, [])


def test_names_and_lookup(line_graph):
    assert line_graph.node_name(2) == "c"
    assert line_graph.node_index("b") == 1
    assert line_graph.node_index(0) == 0
    with pytest.raises(PreconditionError):
        line_graph.node_index("z")


@pytest.mark.parametrize(
    "current, u, w, expected",
    [
        (0, 0, 0, 0),   # both idle
        (0, 0, 1, 1),   # adversary alone
        (0, 2, 0, 2),   # defender alone
        (0, 1, 2, 0),   # different targets
        (0, 1, 1, 1),   # same target
    ],
)
def test_flipdyn_transition(current, u, w, expected):
    g = build_graph(3, [(0, 1), (0, 2), (1, 2)])
    assert flipdyn_transition(g, current, u, w) == expected


def test_transition_rejects_unavailable_action():
    g = build_graph(3, [(0, 1), (0, 2), (1, 2)])
    with pytest.raises(InvalidActionError) as info:
        g.transition(2, 2, 0)
    assert info.value.node == 2
    assert info.value.allowed == (2,)


def test_general_cost_is_charged_at_the_target(line_graph):
    assert line_graph.cost_node(1, 1) is None
    assert line_graph.cost_node(1, 2) == 2


def test_flip_state_bounds():
    s = FlipState.checked(1, 1, 3, 4)
    assert s.advance(2) == FlipState(2, 2)
    with pytest.raises(PreconditionError):
        FlipState.checked(3, 1, 3, 4)
    with pytest.raises(PreconditionError):
        FlipState.checked(0, 6, 3, 4)


def test_dual_deter_actions():
    chain = DualDeterTopology(3)
    assert chain.node_count == 4
    assert chain.defender_actions(0) == (0, TAU)
    assert chain.adversary_actions(3) == (3, TAU)
    assert chain.defender_actions(2) == (2, 1)
    assert chain.adversary_actions(2) == (2, 3)


@pytest.mark.parametrize(
    "current, u, w, expected",
    [
        (0, 0, TAU, 1),
        (0, TAU, TAU, 0),
        (0, 0, 0, 0),
        (0, TAU, 0, 0),
        (3, TAU, 3, 2),
        (3, TAU, TAU, 3),
        (3, 3, TAU, 3),
        (1, 1, 1, 1),
        (1, 0, 1, 0),
        (1, 1, 2, 2),
        (1, 0, 2, 1),
    ],
)
def test_dual_deter_transition(current, u, w, expected):
    assert DualDeterTopology(3).transition(current, u, w) == expected


def test_dual_deter_custom_targets():
    chain = DualDeterTopology(4, lower_targets=(0, 0, 0, 1, 4), upper_targets=(0, 3, 4, 4, 4))
    assert chain.defender_actions(2) == (2, 0)
    assert chain.adversary_actions(1) == (1, 3)
    assert chain.transition(3, 1, 3) == 1


def test_dual_deter_rejects_bad_targets():
    with pytest.raises(SpecValidationError) as info:
        DualDeterTopology(3, lower_targets=(0, 1, 0, 3), upper_targets=(0, 2, 1, 3))
    text = " ".join(info.value.violations)
    assert "targets.lower[1]" in text
    assert "targets.upper[2]" in text


def test_dual_deter_rejects_tau_inside():
    with pytest.raises(InvalidActionError):
        DualDeterTopology(3).transition(1, TAU, 1)


def test_dual_deter_charges_current_node():
    chain = DualDeterTopology(2)
    assert chain.cost_node(1, 2) == 1
    assert chain.cost_node(0, TAU) == 0
    assert chain.cost_node(0, 0) is None


def test_action_label():
    assert action_label(TAU, ("x", "y")) == "tau"
    assert action_label(1, ("x", "y")) == "y"
    assert action_label(1) == "1"
