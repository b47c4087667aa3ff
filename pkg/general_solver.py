# -*- coding: utf-8 -*-
"""
backward induction for arbitrary node dynamics on a finite state grid

V[L+1][a][x] = g_{L+1}^a(x)
V[k][a][x]   = g_k^a(x) + val(Xi), Xi[u][w] = V[k+1][a'](F_k^{a'}(x)) + d_k^u(x)[u != a] - a_k^w(x)[w != a]
where a' is the flip transition of (a, u, w). the cells of one time step only
read V[k+1] and are solved independently.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from errors import PreconditionError, SolverError, SpecValidationError
from matrix_game import MatrixGameSolution, solve_zero_sum
from settings import MAX_WORKERS, POLICY_TOL

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFENDER = "defender"
ADVERSARY = "adversary"
PLAYERS = (DEFENDER, ADVERSARY)


# helper functions
def run_cells(fn: Callable[[T], R], cells: Sequence[T], max_workers: int | None = None) -> list[R]:
    """solve independent cells in order; a thread pool when more than one worker is allowed"""
    workers = MAX_WORKERS if max_workers is None else max(1, int(max_workers))
    if workers == 1 or len(cells) < 2:
        return [fn(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, cells))


def _grid_distance(grid: np.ndarray, point: np.ndarray) -> np.ndarray:
    diff = grid - point
    if diff.ndim == 1:
        return np.abs(diff)
    return np.linalg.norm(diff, axis=1)


def snap_to_grid(grid, points) -> tuple[np.ndarray, np.ndarray]:
    """nearest grid index for every point (lowest index on ties) and the distance snapped over"""
    G = np.asarray(grid, dtype=float)
    P = np.asarray(points, dtype=float)
    if G.ndim == 2 and P.ndim == 1 and P.shape[0] == G.shape[1]:
        P = P[None, :]
    if G.ndim == 1:
        P = P.reshape(-1)
    idx = np.empty(len(P), dtype=np.int64)
    dist = np.empty(len(P))
    for i, point in enumerate(P):
        d = _grid_distance(G, point)
        idx[i] = int(np.argmin(d))
        dist[i] = float(d[idx[i]])
    return idx, dist


def map_to_grid(grid, points, snap: bool = False, where: str = "dynamics", tol: float = 1e-12) -> np.ndarray:
    """grid indices of points that must lie on the grid, or their nearest neighbours when snapping"""
    idx, dist = snap_to_grid(grid, points)
    off = np.flatnonzero(dist > tol)
    if off.size and not snap:
        raise SpecValidationError([f"{where}[{i}]: point is off the state grid (distance {dist[i]:.3g})" for i in off])
    if off.size:
        log.warning("%s: snapped %d off-grid point(s) to the nearest grid point (max distance %.3g)", where, off.size, dist[off].max())
    return idx


def check_policy_row(row, size: int, where: str) -> np.ndarray:
    r = np.asarray(row, dtype=float)
    if r.shape != (size,):
        raise PreconditionError(f"{where}: policy row has shape {r.shape}, expected ({size},)")
    if (r < -POLICY_TOL).any() or abs(float(r.sum()) - 1.0) > POLICY_TOL:
        raise PreconditionError(f"{where}: policy row {r.tolist()} is not a probability vector")
    return r


# policies
@dataclass(frozen=True)
class PolicyTable:
    """
    defender[k-1][node] and adversary[k-1][node] are probability rows over the
    node's action list; shape (m,) when state independent, (grid, m) otherwise
    """
    defender: tuple[tuple[np.ndarray, ...], ...]
    adversary: tuple[tuple[np.ndarray, ...], ...]
    state_dependent: bool = False

    @property
    def horizon(self) -> int:
        return len(self.defender)

    def rows(self, player: str) -> tuple[tuple[np.ndarray, ...], ...]:
        if player == DEFENDER:
            return self.defender
        if player == ADVERSARY:
            return self.adversary
        raise PreconditionError(f"unknown player {player!r}")

    def row(self, player: str, k: int, node: int, grid_index: int | None = None) -> np.ndarray:
        table = self.rows(player)
        if not 1 <= k <= len(table):
            raise PreconditionError(f"no {player} policy for time {k} (horizon {len(table)})")
        if not 0 <= node < len(table[k - 1]):
            raise PreconditionError(f"no {player} policy for node {node} at time {k}")
        entry = table[k - 1][node]
        if self.state_dependent:
            if grid_index is None:
                raise PreconditionError("state-dependent policy needs a grid index")
            return entry[grid_index]
        return entry

    def perturbed(self, eps: float, players: Iterable[str] = PLAYERS) -> "PolicyTable":
        """move eps of the mass onto each row's least likely action"""
        players = set(players)

        def shift(row: np.ndarray) -> np.ndarray:
            if row.shape[-1] < 2:
                return row.copy()
            target = np.argmin(row, axis=-1)
            out = (1.0 - eps) * row
            if row.ndim == 1:
                out[target] += eps
            else:
                out[np.arange(row.shape[0]), target] += eps
            return out

        def table(player: str):
            rows = self.rows(player)
            if player not in players:
                return rows
            return tuple(tuple(shift(r) for r in per_k) for per_k in rows)

        return PolicyTable(table(DEFENDER), table(ADVERSARY), self.state_dependent)


# general spec
@dataclass(frozen=True)
class GeneralGameSpec:
    """
    graph: GameGraph or DualDeterTopology
    state_grid: (G,) scalars or (G, n) vectors
    dynamics[k-1, a', i]: grid index of F_k^{a'}(x_i)
    stage_costs (L+1, V, G), defender_costs / adversary_costs (L, V, G)
    approximate[k-1, a', i] marks maps produced by nearest-point snapping
    """
    graph: Any
    horizon: int
    state_grid: np.ndarray
    dynamics: np.ndarray
    stage_costs: np.ndarray
    defender_costs: np.ndarray
    adversary_costs: np.ndarray
    approximate: np.ndarray | None = None

    def __post_init__(self):
        for name in ("state_grid", "stage_costs", "defender_costs", "adversary_costs"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        object.__setattr__(self, "dynamics", np.array(self.dynamics, dtype=np.int64))
        if self.approximate is not None:
            object.__setattr__(self, "approximate", np.array(self.approximate, dtype=bool))
        problems = validate_general_spec(self)
        if problems:
            raise SpecValidationError(problems)

    @property
    def node_count(self) -> int:
        return self.graph.node_count

    @property
    def grid_size(self) -> int:
        return int(self.state_grid.shape[0])

    @property
    def approximate_maps(self) -> int:
        return 0 if self.approximate is None else int(self.approximate.sum())


def validate_general_spec(spec: GeneralGameSpec) -> list[str]:
    problems: list[str] = []
    L, V = spec.horizon, spec.graph.node_count
    if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 1:
        return [f"horizon: must be an integer >= 1, got {L!r}"]
    grid = spec.state_grid
    if grid.ndim not in (1, 2) or grid.shape[0] < 1:
        return [f"state_grid: expected a non-empty list of scalars or equal-length vectors, got shape {grid.shape}"]
    if not np.isfinite(grid).all():
        problems.append("state_grid: contains non-finite points")
    G = grid.shape[0]

    expected = {
        "dynamics": (L, V, G),
        "stage_costs": (L + 1, V, G),
        "defender_costs": (L, V, G),
        "adversary_costs": (L, V, G),
    }
    for name, shape in expected.items():
        arr = getattr(spec, name)
        if arr.shape != shape:
            problems.append(f"{name}: expected shape {shape}, got {arr.shape}")
    if problems:
        return problems

    bad = np.argwhere((spec.dynamics < 0) | (spec.dynamics >= G))
    for k, node, i in bad[:20]:
        problems.append(f"dynamics[{k + 1}][{node}][{i}]: maps to {spec.dynamics[k, node, i]}, outside the grid of {G} points")
    for name in ("stage_costs", "defender_costs", "adversary_costs"):
        arr = getattr(spec, name)
        if not np.isfinite(arr).all():
            problems.append(f"{name}: contains non-finite entries")
        neg = np.argwhere(arr < 0)
        for k, node, i in neg[:20]:
            problems.append(f"{name}[{k + 1}][{node}][{i}]: negative cost {arr[k, node, i]!r}; costs must be non-negative")
    return problems


# value table
@dataclass(frozen=True)
class GeneralValueTable:
    values: np.ndarray          # (L+1, V, G), values[k-1]
    policies: PolicyTable
    horizon: int
    state_grid: np.ndarray


def build_cost_to_go(spec: GeneralGameSpec, k: int, node: int, x: int, next_values: np.ndarray) -> np.ndarray:
    graph = spec.graph
    d_actions = graph.defender_actions(node)
    a_actions = graph.adversary_actions(node)
    M = np.empty((len(d_actions), len(a_actions)))
    for i, u in enumerate(d_actions):
        for j, w in enumerate(a_actions):
            nxt = graph.transition(node, u, w)
            target = int(spec.dynamics[k - 1, nxt, x])
            if not 0 <= target < next_values.shape[1]:
                raise SpecValidationError(f"dynamics[{k}][{nxt}][{x}]: no grid mapping")
            entry = next_values[nxt, target]
            cu = graph.cost_node(node, u)
            if cu is not None:
                entry += spec.defender_costs[k - 1, cu, x]
            cw = graph.cost_node(node, w)
            if cw is not None:
                entry -= spec.adversary_costs[k - 1, cw, x]
            M[i, j] = entry
    return M


def _solve_cell(spec: GeneralGameSpec, k: int, node: int, x: int, next_values: np.ndarray) -> MatrixGameSolution:
    try:
        return solve_zero_sum(build_cost_to_go(spec, k, node, x, next_values))
    except SolverError as exc:
        raise exc.with_context(k=k, node=node, grid_index=x)


def solve_general(spec: GeneralGameSpec, max_workers: int | None = None) -> GeneralValueTable:
    L, V, G = spec.horizon, spec.node_count, spec.grid_size
    log.info("general solve: horizon %d, %d nodes, %d grid points", L, V, G)

    values = np.empty((L + 1, V, G))
    values[L] = spec.stage_costs[L]
    defender: list[tuple[np.ndarray, ...]] = [()] * L
    adversary: list[tuple[np.ndarray, ...]] = [()] * L
    cells = [(node, x) for node in range(V) for x in range(G)]

    for k in range(L, 0, -1):
        next_values = values[k]
        sols = run_cells(lambda cell: _solve_cell(spec, k, cell[0], cell[1], next_values), cells, max_workers)

        y_rows = [np.empty((G, len(spec.graph.defender_actions(n)))) for n in range(V)]
        z_rows = [np.empty((G, len(spec.graph.adversary_actions(n)))) for n in range(V)]
        for (node, x), sol in zip(cells, sols):
            values[k - 1, node, x] = spec.stage_costs[k - 1, node, x] + sol.value
            y_rows[node][x] = sol.row_strategy
            z_rows[node][x] = sol.col_strategy
        defender[k - 1] = tuple(y_rows)
        adversary[k - 1] = tuple(z_rows)

    policies = PolicyTable(tuple(defender), tuple(adversary), state_dependent=True)
    return GeneralValueTable(values, policies, L, spec.state_grid.copy())


def value_at(table: GeneralValueTable, k: int, node: int, x: int) -> float:
    L1, V, G = table.values.shape
    if not 1 <= k <= L1:
        raise PreconditionError(f"time {k} is outside [1, {L1}]")
    if not 0 <= node < V:
        raise PreconditionError(f"node {node} is outside [0, {V})")
    if not 0 <= x < G:
        raise PreconditionError(f"grid index {x} is outside [0, {G})")
    return float(table.values[k - 1, node, x])
