# -*- coding: utf-8 -*-
"""
scalar linear dynamics with quadratic costs

x_{k+1} = f_k^{a'} x_k and every cost is a coefficient times x_k^2, so the
value is V_k^a(x) = p_k^a x^2 and the equilibrium policies do not depend on x.
each (k, a) solves the scaled matrix
    Xi[u][w] = (f_k^{a'})^2 p_{k+1}^{a'} + d_k^u [u != a] - a_k^w [w != a]
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from errors import PreconditionError, SolverError, SpecValidationError
from general_solver import GeneralGameSpec, PolicyTable, run_cells, snap_to_grid
from matrix_game import MatrixGameSolution, solve_zero_sum

log = logging.getLogger(__name__)

DEFAULT_INITIAL_STATES = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ScalarLQSpec:
    """
    f (L, V) transition coefficients indexed by the next node
    g (L+1, V) state cost coefficients, d / a (L, V) takeover cost coefficients
    bias is reserved for an affine value term and must stay zero
    """
    graph: Any
    horizon: int
    f: np.ndarray
    g: np.ndarray
    d: np.ndarray
    a: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        for name in ("f", "g", "d", "a"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        if self.bias is not None:
            object.__setattr__(self, "bias", np.array(self.bias, dtype=float))
        problems = validate_scalar_spec(self)
        if problems:
            raise SpecValidationError(problems)

    @property
    def node_count(self) -> int:
        return self.graph.node_count


def validate_scalar_spec(spec: ScalarLQSpec) -> list[str]:
    L, V = spec.horizon, spec.graph.node_count
    if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 1:
        return [f"horizon: must be an integer >= 1, got {L!r}"]
    problems = []
    for name, rows in (("f", L), ("g", L + 1), ("d", L), ("a", L)):
        arr = getattr(spec, name)
        if arr.shape != (rows, V):
            problems.append(f"{name}: expected shape ({rows}, {V}), got {arr.shape}")
        elif not np.isfinite(arr).all():
            problems.append(f"{name}: contains non-finite entries")
        elif name != "f":
            for k, node in np.argwhere(arr < 0)[:20]:
                problems.append(f"{name}[{k + 1}][{node}]: negative cost {arr[k, node]!r}; costs must be non-negative")
    if spec.bias is not None and np.any(spec.bias != 0):
        problems.append("bias: affine value terms are not supported; the bias must be zero")
    return problems


@dataclass(frozen=True)
class ScalarValueTable:
    coefficients: np.ndarray    # (L+1, V), coefficients[k-1]
    policies: PolicyTable
    horizon: int
    nonnegative: bool = True

    @property
    def p(self) -> np.ndarray:
        return self.coefficients


def build_scaled_cost_to_go(spec: ScalarLQSpec, k: int, node: int, p_next) -> np.ndarray:
    graph = spec.graph
    p_next = np.asarray(p_next, dtype=float)
    d_actions = graph.defender_actions(node)
    a_actions = graph.adversary_actions(node)
    M = np.empty((len(d_actions), len(a_actions)))
    for i, u in enumerate(d_actions):
        for j, w in enumerate(a_actions):
            nxt = graph.transition(node, u, w)
            f = spec.f[k - 1, nxt]
            entry = f * f * p_next[nxt]
            cu = graph.cost_node(node, u)
            if cu is not None:
                entry += spec.d[k - 1, cu]
            cw = graph.cost_node(node, w)
            if cw is not None:
                entry -= spec.a[k - 1, cw]
            M[i, j] = entry
    return M


def _solve_node(spec: ScalarLQSpec, k: int, node: int, p_next: np.ndarray) -> MatrixGameSolution:
    try:
        return solve_zero_sum(build_scaled_cost_to_go(spec, k, node, p_next))
    except SolverError as exc:
        raise exc.with_context(k=k, node=node)


def solve_scalar_lq(spec: ScalarLQSpec, max_workers: int | None = None) -> ScalarValueTable:
    L, V = spec.horizon, spec.node_count
    log.info("scalar-lq solve: horizon %d, %d nodes", L, V)

    p = np.empty((L + 1, V))
    p[L] = spec.g[L]
    defender: list[tuple[np.ndarray, ...]] = [()] * L
    adversary: list[tuple[np.ndarray, ...]] = [()] * L
    nodes = list(range(V))

    for k in range(L, 0, -1):
        p_next = p[k]
        sols = run_cells(lambda node: _solve_node(spec, k, node, p_next), nodes, max_workers)
        for node, sol in zip(nodes, sols):
            p[k - 1, node] = spec.g[k - 1, node] + sol.value
        defender[k - 1] = tuple(sol.row_strategy for sol in sols)
        adversary[k - 1] = tuple(sol.col_strategy for sol in sols)

    nonneg = check_nonnegative(p)
    return ScalarValueTable(p, PolicyTable(tuple(defender), tuple(adversary)), L, nonneg)


def check_nonnegative(p: np.ndarray, tol: float = 1e-12) -> bool:
    bad = np.argwhere(p < -tol)
    for k, node in bad[:10]:
        log.warning("value coefficient p[%d][%d] = %.6g is negative", k + 1, node, p[k, node])
    return bad.size == 0


def evaluate_value(table: ScalarValueTable, k: int, node: int, x: float) -> float:
    L1, V = table.coefficients.shape
    if not 1 <= k <= L1:
        raise PreconditionError(f"time {k} is outside [1, {L1}]")
    if not 0 <= node < V:
        raise PreconditionError(f"node {node} is outside [0, {V})")
    return float(table.coefficients[k - 1, node]) * float(x) ** 2


def value_spread(table: ScalarValueTable, k: int) -> float:
    """gap between the largest and smallest value coefficient at time k"""
    row = table.coefficients[k - 1]
    return float(row.max() - row.min())


# tabular equivalent
def to_general_spec(spec: ScalarLQSpec, initial_states: Sequence[float] = DEFAULT_INITIAL_STATES,
                    max_grid_points: int = 4096) -> GeneralGameSpec:
    """
    the same game on a finite grid: every state reachable from the initial
    states within the horizon, with costs g x^2, d x^2, a x^2. maps that leave
    the grid only occur from states that are not reachable at that time; they
    snap to the nearest point and are flagged approximate.
    """
    L, V = spec.horizon, spec.node_count
    factors = sorted({float(v) for v in spec.f.ravel()})
    points = {float(x) for x in initial_states}
    frontier = set(points)
    for _ in range(L):
        fresh = {fv * x for fv in factors for x in frontier} - points
        points |= fresh
        frontier = fresh
        if len(points) > max_grid_points:
            raise PreconditionError(f"reachable state grid exceeds {max_grid_points} points; use fewer distinct f values")

    grid = sorted(points)
    where = {x: i for i, x in enumerate(grid)}
    grid_arr = np.array(grid)

    dynamics = np.empty((L, V, len(grid)), dtype=np.int64)
    approximate = np.zeros((L, V, len(grid)), dtype=bool)
    for k in range(L):
        for node in range(V):
            fv = float(spec.f[k, node])
            for i, x in enumerate(grid):
                j = where.get(fv * x)
                if j is None:
                    j = int(snap_to_grid(grid_arr, [fv * x])[0][0])
                    approximate[k, node, i] = True
                dynamics[k, node, i] = j

    sq = grid_arr ** 2
    return GeneralGameSpec(
        graph=spec.graph,
        horizon=L,
        state_grid=grid_arr,
        dynamics=dynamics,
        stage_costs=spec.g[:, :, None] * sq,
        defender_costs=spec.d[:, :, None] * sq,
        adversary_costs=spec.a[:, :, None] * sq,
        approximate=approximate,
    )
