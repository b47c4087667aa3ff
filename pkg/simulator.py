# -*- coding: utf-8 -*-
"""
sampling and exact evaluation of policy pairs

rollouts draw both players' actions independently from their behavioural
rows at every step, charge
    g_k^{a_k}(x_k) + d_k^{u}(x_k)[u != a_k] - a_k^{w}(x_k)[w != a_k],
move the flip state and then the continuous state with the new node, and add
the terminal cost. best responses and policy values are exact backward
recursions: coefficient level for scalar-lq games, grid level otherwise.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from dual_deter import DualDeterSpec
from errors import PreconditionError
from general_solver import (
    ADVERSARY, DEFENDER, GeneralGameSpec, PolicyTable, build_cost_to_go, check_policy_row, solve_general,
)
from graph_core import Action, FlipState
from rng import StreamBatch, sample_actions
from scalar_lq import ScalarLQSpec, build_scaled_cost_to_go, solve_scalar_lq
from settings import SADDLE_TOL

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrajectoryStep:
    k: int
    node: int
    state: Any
    defender_action: Action
    adversary_action: Action
    cost: float


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[TrajectoryStep, ...]
    final_node: int
    final_state: Any
    terminal_cost: float
    total_cost: float
    seed: int


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    n_samples: int
    degenerate: bool = False    # one sample: stderr is reported as 0


@dataclass(frozen=True)
class SaddleReport:
    value: float
    defender_best_response: float
    adversary_best_response: float
    defender_gap: float
    adversary_gap: float
    tol: float
    passed: bool


# helper functions
def _as_model(spec) -> ScalarLQSpec | GeneralGameSpec:
    if isinstance(spec, DualDeterSpec):
        return spec.to_scalar_spec()
    if isinstance(spec, (ScalarLQSpec, GeneralGameSpec)):
        return spec
    raise PreconditionError(f"cannot simulate a {type(spec).__name__}")


def _check_start(model, policies: PolicyTable, x1, alpha1: int) -> None:
    FlipState.checked(alpha1, 1, model.graph.node_count, model.horizon)
    if policies.horizon != model.horizon:
        raise PreconditionError(f"policies cover {policies.horizon} steps, the game has {model.horizon}")
    general = isinstance(model, GeneralGameSpec)
    if general != policies.state_dependent:
        raise PreconditionError("grid games need state-dependent policies and scalar games state-independent ones")
    if general and not 0 <= int(x1) < model.grid_size:
        raise PreconditionError(f"initial grid index {x1} is outside [0, {model.grid_size})")


def _policy_row(policies: PolicyTable, player: str, k: int, node: int, size: int, grid_index: int | None = None) -> np.ndarray:
    row = policies.row(player, k, node, grid_index)
    where = f"{player} policy k={k} node={node}" + ("" if grid_index is None else f" x={grid_index}")
    return check_policy_row(row, size, where)


def _grid_point(model: GeneralGameSpec, index: int):
    point = model.state_grid[index]
    return float(point) if np.ndim(point) == 0 else tuple(float(v) for v in point)


# sampling
def _simulate(spec, policies: PolicyTable, x1, alpha1: int, seed: int, n: int, trace: bool = False):
    model = _as_model(spec)
    _check_start(model, policies, x1, alpha1)
    graph = model.graph
    general = isinstance(model, GeneralGameSpec)
    L = model.horizon

    streams = StreamBatch(seed, n)
    nodes = np.full(n, int(alpha1), dtype=np.int64)
    if general:
        state = np.full(n, int(x1), dtype=np.int64)
    else:
        state = np.full(n, float(x1))
    total = np.zeros(n)
    steps: list[TrajectoryStep] = []

    for k in range(1, L + 1):
        ud = streams.uniform()
        ua = streams.uniform()
        inc = np.empty(n)
        next_nodes = np.empty(n, dtype=np.int64)
        next_state = np.empty_like(state)
        d_pick = np.empty(n, dtype=np.int64)
        a_pick = np.empty(n, dtype=np.int64)

        keys = np.stack([nodes, state], axis=1) if general else nodes[:, None]
        for key in np.unique(keys, axis=0):
            node = int(key[0])
            mask = (nodes == node) & (state == key[1]) if general else nodes == node
            xi = int(key[1]) if general else None
            d_actions = graph.defender_actions(node)
            a_actions = graph.adversary_actions(node)
            y = _policy_row(policies, DEFENDER, k, node, len(d_actions), xi)
            z = _policy_row(policies, ADVERSARY, k, node, len(a_actions), xi)
            di = sample_actions(y, ud[mask])
            ai = sample_actions(z, ua[mask])

            table = np.array([[graph.transition(node, u, w) for w in a_actions] for u in d_actions], dtype=np.int64)
            nn = table[di, ai]
            if general:
                dc = np.array([0.0 if graph.cost_node(node, u) is None else model.defender_costs[k - 1, graph.cost_node(node, u), xi] for u in d_actions])
                ac = np.array([0.0 if graph.cost_node(node, w) is None else model.adversary_costs[k - 1, graph.cost_node(node, w), xi] for w in a_actions])
                inc[mask] = model.stage_costs[k - 1, node, xi] + dc[di] - ac[ai]
                next_state[mask] = model.dynamics[k - 1, nn, xi]
            else:
                dc = np.array([0.0 if graph.cost_node(node, u) is None else model.d[k - 1, graph.cost_node(node, u)] for u in d_actions])
                ac = np.array([0.0 if graph.cost_node(node, w) is None else model.a[k - 1, graph.cost_node(node, w)] for w in a_actions])
                x = state[mask]
                inc[mask] = (model.g[k - 1, node] + dc[di] - ac[ai]) * (x * x)
                next_state[mask] = model.f[k - 1, nn] * x
            next_nodes[mask] = nn
            d_pick[mask] = di
            a_pick[mask] = ai

        if trace:
            node = int(nodes[0])
            steps.append(TrajectoryStep(
                k, node,
                _grid_point(model, int(state[0])) if general else float(state[0]),
                graph.defender_actions(node)[int(d_pick[0])],
                graph.adversary_actions(node)[int(a_pick[0])],
                float(inc[0]),
            ))
        total += inc
        nodes, state = next_nodes, next_state

    if general:
        terminal = model.stage_costs[L, nodes, state]
    else:
        terminal = model.g[L, nodes] * (state * state)
    total += terminal
    return total, steps, nodes, state, terminal


def rollout(spec, policies: PolicyTable, x1, alpha1: int, seed: int) -> Trajectory:
    """one trajectory; identical to sample 0 of estimate_expected_cost with the same seed"""
    total, steps, nodes, state, terminal = _simulate(spec, policies, x1, alpha1, seed, 1, trace=True)
    model = _as_model(spec)
    final_state = _grid_point(model, int(state[0])) if isinstance(model, GeneralGameSpec) else float(state[0])
    return Trajectory(tuple(steps), int(nodes[0]), final_state, float(terminal[0]), float(total[0]), int(seed))


def estimate_expected_cost(spec, policies: PolicyTable, x1, alpha1: int, n_samples: int, seed: int) -> CostEstimate:
    if isinstance(n_samples, bool) or int(n_samples) < 1:
        raise PreconditionError(f"n_samples must be a positive integer, got {n_samples!r}")
    n = int(n_samples)
    total, *_ = _simulate(spec, policies, x1, alpha1, seed, n)
    if np.all(total == total[0]):
        return CostEstimate(float(total[0]), 0.0, n, degenerate=(n == 1))
    mean = float(total.mean())
    stderr = float(total.std(ddof=1) / math.sqrt(n))
    return CostEstimate(mean, stderr, n)


def trajectory_cost(spec, x1, alpha1: int, actions: Sequence[tuple[Action, Action]]) -> float:
    """replay recorded (defender, adversary) actions through the cost and transition rules"""
    model = _as_model(spec)
    graph = model.graph
    general = isinstance(model, GeneralGameSpec)
    if len(actions) != model.horizon:
        raise PreconditionError(f"expected {model.horizon} action pairs, got {len(actions)}")
    node, x = int(alpha1), (int(x1) if general else float(x1))
    total = 0.0
    for k, (u, w) in enumerate(actions, start=1):
        cu, cw = graph.cost_node(node, u), graph.cost_node(node, w)
        nxt = graph.transition(node, u, w)
        if general:
            dc = 0.0 if cu is None else model.defender_costs[k - 1, cu, x]
            ac = 0.0 if cw is None else model.adversary_costs[k - 1, cw, x]
            total += float(model.stage_costs[k - 1, node, x] + dc - ac)
            x = int(model.dynamics[k - 1, nxt, x])
        else:
            dc = 0.0 if cu is None else model.d[k - 1, cu]
            ac = 0.0 if cw is None else model.a[k - 1, cw]
            total += float((model.g[k - 1, node] + dc - ac) * (x * x))
            x = float(model.f[k - 1, nxt] * x)
        node = nxt
    terminal = model.stage_costs[model.horizon, node, x] if general else model.g[model.horizon, node] * (x * x)
    return total + float(terminal)


# exact evaluation
def _recursion(model, policies: PolicyTable, responder: str | None) -> np.ndarray:
    """
    value table when the responder best-responds to the other player's rows
    (responder None: both rows fixed, i.e. the policy pair's expected cost)
    """
    general = isinstance(model, GeneralGameSpec)
    graph = model.graph
    L, V = model.horizon, graph.node_count
    if general:
        values = np.empty((L + 1, V, model.grid_size))
        values[L] = model.stage_costs[L]
    else:
        values = np.empty((L + 1, V))
        values[L] = model.g[L]

    cells = [(node, x) for node in range(V) for x in range(model.grid_size)] if general else [(node, None) for node in range(V)]
    for k in range(L, 0, -1):
        for node, x in cells:
            if general:
                M = build_cost_to_go(model, k, node, x, values[k])
                stage = model.stage_costs[k - 1, node, x]
            else:
                M = build_scaled_cost_to_go(model, k, node, values[k])
                stage = model.g[k - 1, node]
            m, n = M.shape
            if responder == DEFENDER:
                z = _policy_row(policies, ADVERSARY, k, node, n, x)
                val = float((M @ z).min())
            elif responder == ADVERSARY:
                y = _policy_row(policies, DEFENDER, k, node, m, x)
                val = float((y @ M).max())
            else:
                y = _policy_row(policies, DEFENDER, k, node, m, x)
                z = _policy_row(policies, ADVERSARY, k, node, n, x)
                val = float(y @ M @ z)
            if general:
                values[k - 1, node, x] = stage + val
            else:
                values[k - 1, node] = stage + val
    return values


def _value_from(model, values: np.ndarray, x1, alpha1: int) -> float:
    if isinstance(model, GeneralGameSpec):
        return float(values[0, int(alpha1), int(x1)])
    return float(values[0, int(alpha1)]) * float(x1) ** 2


def best_response_value(spec, opponent_policy: PolicyTable, responder: str, x1, alpha1: int) -> float:
    """
    optimal value for `responder` against the other player's fixed rows in
    opponent_policy (the responder's own rows are ignored)
    """
    if responder not in (DEFENDER, ADVERSARY):
        raise PreconditionError(f"responder must be {DEFENDER!r} or {ADVERSARY!r}, got {responder!r}")
    model = _as_model(spec)
    _check_start(model, opponent_policy, x1, alpha1)
    return _value_from(model, _recursion(model, opponent_policy, responder), x1, alpha1)


def policy_value(spec, policies: PolicyTable, x1, alpha1: int) -> float:
    """exact expected total cost when both players follow `policies`"""
    model = _as_model(spec)
    _check_start(model, policies, x1, alpha1)
    return _value_from(model, _recursion(model, policies, None), x1, alpha1)


def game_value(spec, x1, alpha1: int) -> float:
    model = _as_model(spec)
    if isinstance(model, GeneralGameSpec):
        return float(solve_general(model).values[0, int(alpha1), int(x1)])
    return float(solve_scalar_lq(model).coefficients[0, int(alpha1)]) * float(x1) ** 2


def saddle_check(spec, policies: PolicyTable, x1, alpha1: int, tol: float = SADDLE_TOL, value: float | None = None) -> SaddleReport:
    """both best-response values must match the game value within tol"""
    if value is None:
        value = game_value(spec, x1, alpha1)
    br_def = best_response_value(spec, policies, DEFENDER, x1, alpha1)
    br_adv = best_response_value(spec, policies, ADVERSARY, x1, alpha1)
    gap_def = abs(br_def - value)
    gap_adv = abs(br_adv - value)
    passed = gap_def <= tol and gap_adv <= tol
    if not passed:
        log.warning("saddle check failed at node %d: defender gap %.3g, adversary gap %.3g (tol %.1g)", alpha1, gap_def, gap_adv, tol)
    return SaddleReport(float(value), br_def, br_adv, gap_def, gap_adv, tol, passed)
