# -*- coding: utf-8 -*-
"""
game topologies and the discrete flip-state transition rules

two topologies share one small interface used by every solver:
    node_count, defender_actions(node), adversary_actions(node),
    transition(node, d, a), cost_node(node, action)

GameGraph is the general directed multigraph: an action is the node a player
tries to take over and its takeover cost is charged at that target.
DualDeterTopology is the birth-death chain 0..N where the adversary escalates
up-chain, the defender de-escalates down-chain, and the boundary nodes offer
the special action TAU; costs there are charged at the current node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from errors import InvalidActionError, PreconditionError, SpecValidationError


TAU = "tau"
Action = Union[int, str]


# helper functions
def _as_action(action: Action) -> Action:
    if isinstance(action, (bool, np.bool_)):
        raise InvalidActionError(-1, action, (), "")
    if isinstance(action, (int, np.integer)):
        return int(action)
    return action


def _default_names(count: int, names: Sequence[str] | None) -> tuple[str, ...]:
    if not names:
        return tuple(str(i) for i in range(count))
    return tuple(str(n) for n in names)


def _check_names(names: tuple[str, ...], count: int, where: str) -> list[str]:
    problems = []
    if len(names) != count:
        problems.append(f"{where}: expected {count} node names, got {len(names)}")
    seen = set()
    for i, name in enumerate(names):
        if name in seen:
            problems.append(f"{where}[{i}]: duplicate node name {name!r}")
        seen.add(name)
    return problems


def action_label(action: Action, names: Sequence[str] = ()) -> str:
    """node name (or index) for a node action, 'tau' for the boundary action"""
    if action == TAU:
        return TAU
    if names:
        return str(names[int(action)])
    return str(action)


# general multigraph
@dataclass(frozen=True)
class GameGraph:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    neighborhoods: tuple[tuple[int, ...], ...]
    names: tuple[str, ...] = field(default=())

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    def node_name(self, node: int) -> str:
        return self.names[node] if self.names else str(node)

    def node_index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)) and not isinstance(name, bool):
            if 0 <= int(name) < self.node_count:
                return int(name)
        elif name in self.names:
            return self.names.index(name)
        raise PreconditionError(f"unknown node {name!r}")

    def defender_actions(self, node: int) -> tuple[int, ...]:
        return self.neighborhoods[node]

    def adversary_actions(self, node: int) -> tuple[int, ...]:
        return self.neighborhoods[node]

    def transition(self, current: int, defender_action: Action, adversary_action: Action) -> int:
        return flipdyn_transition(self, current, defender_action, adversary_action)

    def cost_node(self, current: int, action: Action) -> int | None:
        # takeover cost is charged at the target node
        return None if action == current else int(action)



def build_graph(node_count: int, edges: Iterable[Sequence[int]], names: Sequence[str] | None = None) -> GameGraph:
    """
    build a GameGraph; every node gets its idle self-loop whether or not the
    edge list names it, and eps(a) is [a, then other targets ascending]
    """
    problems: list[str] = []
    if isinstance(node_count, bool) or not isinstance(node_count, (int, np.integer)) or node_count < 1:
        raise SpecValidationError(f"node_count: must be a positive integer, got {node_count!r}")
    node_count = int(node_count)

    clean: list[tuple[int, int]] = []
    for i, edge in enumerate(edges):
        try:
            src, dst = (int(v) for v in edge)
        except (TypeError, ValueError):
            problems.append(f"edges[{i}]: expected an ordered node pair, got {edge!r}")
            continue
        if not (0 <= src < node_count and 0 <= dst < node_count):
            problems.append(f"edges[{i}]: edge ({src}, {dst}) has an endpoint outside [0, {node_count})")
            continue
        clean.append((src, dst))

    all_names = _default_names(node_count, names)
    problems.extend(_check_names(all_names, node_count, "names"))
    if problems:
        raise SpecValidationError(problems)

    targets: list[set[int]] = [set() for _ in range(node_count)]
    for src, dst in clean:
        if src != dst:
            targets[src].add(dst)
    neighborhoods = tuple((node, *sorted(targets[node])) for node in range(node_count))
    return GameGraph(node_count, tuple(clean), neighborhoods, all_names)


def flipdyn_transition(graph: GameGraph, current: int, defender_action: Action, adversary_action: Action) -> int:
    """
    next flip state on a general graph:
      same choice            -> that node
      only the defender moves -> defender's target
      only the adversary moves -> adversary's target
      both move, different    -> stay
    """
    if not 0 <= current < graph.node_count:
        raise PreconditionError(f"node {current} is outside [0, {graph.node_count})")
    allowed = graph.neighborhoods[current]
    u, w = _as_action(defender_action), _as_action(adversary_action)
    if u not in allowed:
        raise InvalidActionError(current, u, allowed, "defender")
    if w not in allowed:
        raise InvalidActionError(current, w, allowed, "adversary")

    if u == w:
        return u
    if w == current:
        return u
    if u == current:
        return w
    return current


# flip state
@dataclass(frozen=True)
class FlipState:
    node: int
    time: int

    @classmethod
    def checked(cls, node: int, time: int, node_count: int, horizon: int) -> "FlipState":
        if not 0 <= node < node_count:
            raise PreconditionError(f"flip state node {node} is outside [0, {node_count})")
        if not 1 <= time <= horizon + 1:
            raise PreconditionError(f"flip state time {time} is outside [1, {horizon + 1}]")
        return cls(int(node), int(time))

    def advance(self, node: int) -> "FlipState":
        return FlipState(int(node), self.time + 1)


# dual-deter chain
@dataclass(frozen=True)
class DualDeterTopology:
    chain_length: int
    lower_targets: tuple[int, ...] = ()
    upper_targets: tuple[int, ...] = ()
    names: tuple[str, ...] = ()

    def __post_init__(self):
        n = self.chain_length
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise SpecValidationError(f"chain_length: must be an integer >= 1, got {n!r}")
        object.__setattr__(self, "chain_length", int(n))
        lower = tuple(int(t) for t in self.lower_targets) or tuple(max(i - 1, 0) if 0 < i < n else i for i in range(n + 1))
        upper = tuple(int(t) for t in self.upper_targets) or tuple(min(i + 1, n) if 0 < i < n else i for i in range(n + 1))
        object.__setattr__(self, "lower_targets", lower)
        object.__setattr__(self, "upper_targets", upper)
        object.__setattr__(self, "names", _default_names(n + 1, self.names))

        problems = _check_names(self.names, n + 1, "nodes")
        for label, targets in (("lower", lower), ("upper", upper)):
            if len(targets) != n + 1:
                problems.append(f"targets.{label}: expected {n + 1} entries, got {len(targets)}")
        if not problems:
            for node in range(1, n):
                lo, hi = lower[node], upper[node]
                if not 0 <= lo < node:
                    problems.append(f"targets.lower[{node}]: defender target {lo} must lie in [0, {node})")
                if not node < hi <= n:
                    problems.append(f"targets.upper[{node}]: adversary target {hi} must lie in ({node}, {n}]")
        if problems:
            raise SpecValidationError(problems)

    @property
    def node_count(self) -> int:
        return self.chain_length + 1

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    def node_name(self, node: int) -> str:
        return self.names[node]

    def node_index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)) and not isinstance(name, bool):
            if 0 <= int(name) < self.node_count:
                return int(name)
        elif name in self.names:
            return self.names.index(name)
        raise PreconditionError(f"unknown node {name!r}")

    def is_boundary(self, node: int) -> bool:
        return node == 0 or node == self.chain_length

    def defender_actions(self, node: int) -> tuple[Action, ...]:
        self._check_node(node)
        if self.is_boundary(node):
            return (node, TAU)
        return (node, self.lower_targets[node])

    def adversary_actions(self, node: int) -> tuple[Action, ...]:
        self._check_node(node)
        if self.is_boundary(node):
            return (node, TAU)
        return (node, self.upper_targets[node])

    def transition(self, current: int, defender_action: Action, adversary_action: Action) -> int:
        return dual_deter_transition(self, current, defender_action, adversary_action)

    def cost_node(self, current: int, action: Action) -> int | None:
        # the chain charges takeover costs at the node being contested
        return None if action == current else current

    def _check_node(self, node: int) -> None:
        if not 0 <= node <= self.chain_length:
            raise PreconditionError(f"node {node} is outside the chain 0..{self.chain_length}")


def dual_deter_transition(topology: DualDeterTopology, current: int, defender_action: Action, adversary_action: Action) -> int:
    """
    next flip state on the dual-deter chain
      node 0: adversary tau against an idle defender escalates to 1, else stay
      node N: defender tau against an idle adversary de-escalates to N-1, else stay
      interior: both idle stay, a lone move lands on its target, two moves stay
    """
    u, w = _as_action(defender_action), _as_action(adversary_action)
    d_allowed = topology.defender_actions(current)
    a_allowed = topology.adversary_actions(current)
    if u not in d_allowed:
        raise InvalidActionError(current, u, d_allowed, "defender")
    if w not in a_allowed:
        raise InvalidActionError(current, w, a_allowed, "adversary")

    n = topology.chain_length
    if current == 0:
        return 1 if (u == 0 and w == TAU) else 0
    if current == n:
        return n - 1 if (u == TAU and w == n) else n

    if u == w:
        return u
    if w == current:
        return u
    if u == current:
        return w
    return current
