# -*- coding: utf-8 -*-
"""
closed-form equilibria on the dual-deter chain 0..N

every node plays a 2x2 game (idle first, the node's move second):
    start  0 : [[P0,      Q1 - a   ], [P0 + d, P0 + d - a]]
    interior : [[P,       U - a    ], [D + d,  P + d - a ]]
    end    N : [[P,       P - a    ], [Q + d,  P + d - a ]]
with P = (f^a)^2 p^a, U / D the same for the adversary / defender target and
all p at k+1. the closed form of each node is checked against the lp on the
same matrix and the lp wins whenever they disagree.

two formula sets are available: "printed" evaluates the branch conditions and
mixed formulas in their published form, "derived" uses the conditions and
formulas re-derived from the matrices above.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from errors import PreconditionError, SolverError, SpecValidationError
from general_solver import PolicyTable, run_cells
from graph_core import DualDeterTopology
from matrix_game import MatrixGameSolution, solve_zero_sum, verify_solution
from scalar_lq import ScalarLQSpec, ScalarValueTable, build_scaled_cost_to_go, check_nonnegative
from settings import CROSS_CHECK_TOL, DUAL_DETER_FORMULAS, TIE_TOL

log = logging.getLogger(__name__)

PRINTED = "printed"
DERIVED = "derived"
FORMULA_SETS = (PRINTED, DERIVED)

# branch names
IDLE = "idle"
DEFENDER_TAKEOVER = "defender_takeover"
ADVERSARY_TAKEOVER = "adversary_takeover"
BOTH_TAKEOVER = "both_takeover"
MIXED = "mixed"
TIE = "tie"
DEGENERATE = "degenerate"

# cross-check outcomes
AGREED = "agreed"
DISAGREED = "disagreed"
LP_ONLY = "lp_only"


@dataclass(frozen=True)
class DualDeterSpec:
    chain_length: int
    horizon: int
    f: np.ndarray
    g: np.ndarray
    d: np.ndarray
    a: np.ndarray
    lower_targets: tuple[int, ...] = ()
    upper_targets: tuple[int, ...] = ()
    names: tuple[str, ...] = ()
    topology: DualDeterTopology = field(init=False, repr=False, compare=False)
    _scalar: ScalarLQSpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        topo = DualDeterTopology(self.chain_length, tuple(self.lower_targets), tuple(self.upper_targets), tuple(self.names))
        object.__setattr__(self, "topology", topo)
        object.__setattr__(self, "lower_targets", topo.lower_targets)
        object.__setattr__(self, "upper_targets", topo.upper_targets)
        object.__setattr__(self, "names", topo.names)
        scalar = ScalarLQSpec(topo, self.horizon, self.f, self.g, self.d, self.a)
        object.__setattr__(self, "_scalar", scalar)
        for name in ("f", "g", "d", "a"):
            object.__setattr__(self, name, getattr(scalar, name))

    @property
    def node_count(self) -> int:
        return self.chain_length + 1

    def to_scalar_spec(self) -> ScalarLQSpec:
        """the same chain as a generic scalar-lq game (solved by the lp path)"""
        return self._scalar


@dataclass(frozen=True)
class ThresholdQuantities:
    p_hat: float | None = None      # start: Q1 - P0
    p_tilde: float | None = None    # interior: P - D
    p_check: float | None = None    # interior: P - U
    p_bar: float | None = None      # end: P - Q


@dataclass(frozen=True)
class NodeDiagnostic:
    k: int
    node: int
    case: str
    branch: str
    closed_form_value: float
    lp_value: float
    status: str
    discrepancy: float

    @property
    def agreed(self) -> bool:
        return self.status == AGREED


@dataclass(frozen=True)
class NodeSolution:
    value: float            # p_k at the node, stage cost included
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    diagnostic: NodeDiagnostic


@dataclass(frozen=True)
class DualDeterResult:
    table: ScalarValueTable
    diagnostics: tuple[NodeDiagnostic, ...]
    formulas: str = PRINTED

    @property
    def disagreements(self) -> list[NodeDiagnostic]:
        return [d for d in self.diagnostics if d.status == DISAGREED]


# closed-form pieces
@dataclass(frozen=True)
class _ClosedForm:
    branch: str
    value: float | None = None
    y: tuple[float, float] | None = None
    z: tuple[float, float] | None = None

    @property
    def usable(self) -> bool:
        return self.value is not None and self.y is not None and self.z is not None


def _near(x: float, y: float) -> bool:
    return abs(x - y) <= TIE_TOL


def _pick_formulas(formulas: str | None) -> str:
    chosen = (formulas or DUAL_DETER_FORMULAS).lower()
    if chosen not in FORMULA_SETS:
        raise PreconditionError(f"unknown dual-deter formula set {chosen!r}; use one of {FORMULA_SETS}")
    return chosen


def _scaled_next(spec: DualDeterSpec, k: int, p_next) -> np.ndarray:
    p_next = np.asarray(p_next, dtype=float)
    if p_next.shape != (spec.node_count,):
        raise PreconditionError(f"p_next must have {spec.node_count} entries, got shape {p_next.shape}")
    f = spec.f[k - 1]
    return f * f * p_next


def threshold_quantities(spec: DualDeterSpec, k: int, node: int, p_next) -> ThresholdQuantities:
    q = _scaled_next(spec, k, p_next)
    n = spec.chain_length
    if node == 0:
        return ThresholdQuantities(p_hat=float(q[1] - q[0]))
    if node == n:
        return ThresholdQuantities(p_bar=float(q[n] - q[n - 1]))
    if not 0 < node < n:
        raise PreconditionError(f"node {node} is outside the chain 0..{n}")
    lo, hi = spec.lower_targets[node], spec.upper_targets[node]
    return ThresholdQuantities(p_tilde=float(q[node] - q[lo]), p_check=float(q[node] - q[hi]))


def _start_closed_form(P0: float, Q1: float, a: float, d: float, formulas: str) -> _ClosedForm:
    ph = Q1 - P0
    if formulas == PRINTED and (_near(ph, a) or _near(ph, d)):
        return _ClosedForm(TIE)
    # both formula sets agree at the start node
    if ph > a and ph > d:
        return _ClosedForm(MIXED, P0 + d - a * d / ph, (a / ph, 1 - a / ph), (1 - d / ph, d / ph))
    if ph > a:
        return _ClosedForm(ADVERSARY_TAKEOVER, Q1 - a, (1.0, 0.0), (0.0, 1.0))
    return _ClosedForm(IDLE, P0, (1.0, 0.0), (1.0, 0.0))


def _interior_printed(P: float, U: float, D: float, a: float, d: float) -> _ClosedForm:
    pt, pc = P - D, P - U
    den = pt + pc
    if abs(den) <= TIE_TOL:
        return _ClosedForm(DEGENERATE)
    if any(_near(lhs, rhs) for lhs, rhs in ((-pt, a), (pc, a), (pc, d), (-pt, d), (pt, d), (-pc, d))):
        return _ClosedForm(TIE)

    if -pt < a and pc < a and pc < d:
        branch, value = IDLE, P
    elif -pt < a and pc < a and pc > d:
        branch, value = DEFENDER_TAKEOVER, D + d
    elif -pt > a and pc > a and -pt < d:
        branch, value = ADVERSARY_TAKEOVER, U - a
    elif -pt > a and pc > a and -pt > d:
        branch, value = BOTH_TAKEOVER, P - a + d
    else:
        branch, value = MIXED, (P * P + a * d + pt * d - pc * a - D * U) / den

    if pt < d and -pc < d:
        y = (1.0, 0.0)
    elif pt > d and -pc > d:
        y = (0.0, 1.0)
    else:
        y = ((pt - a) / den, (pc + a) / den)

    if -pt < a and pc < a:
        z = (1.0, 0.0)
    elif -pt > a and pc > a:
        z = (0.0, 1.0)
    else:
        z = ((pt + d) / den, (pc - d) / den)
    return _ClosedForm(branch, value, y, z)


def _interior_derived(P: float, U: float, D: float, a: float, d: float) -> _ClosedForm:
    pt, pc = P - D, P - U
    if -pc <= a and pt <= d:
        return _ClosedForm(IDLE, P, (1.0, 0.0), (1.0, 0.0))
    if a <= -pc <= d:
        return _ClosedForm(ADVERSARY_TAKEOVER, U - a, (1.0, 0.0), (0.0, 1.0))
    if d <= pt <= a:
        return _ClosedForm(DEFENDER_TAKEOVER, D + d, (0.0, 1.0), (1.0, 0.0))
    if pt >= a and -pc >= d:
        return _ClosedForm(BOTH_TAKEOVER, P + d - a, (0.0, 1.0), (0.0, 1.0))
    den = pt + pc
    if abs(den) <= TIE_TOL:
        return _ClosedForm(DEGENERATE)
    value = (P * P + P * d - P * a - U * D - U * d + a * D + a * d) / den
    return _ClosedForm(MIXED, value, ((pt - a) / den, (pc + a) / den), ((pc + d) / den, (pt - d) / den))


def _end_printed(P: float, Q: float, a: float, d: float) -> _ClosedForm:
    pb = P - Q
    if _near(pb, a) or _near(pb, d):
        return _ClosedForm(TIE)
    if pb > a and pb > d:
        return _ClosedForm(MIXED, P - d + a * d / pb, (1 - a / pb, a / pb), (d / pb, 1 - d / pb))
    if pb > a:
        return _ClosedForm(DEFENDER_TAKEOVER, Q + d, (1.0, 0.0), (1.0, 0.0))
    y = (0.0, 1.0) if pb > d else (1.0, 0.0)
    return _ClosedForm(IDLE, P, y, (1.0, 0.0))


def _end_derived(P: float, Q: float, a: float, d: float) -> _ClosedForm:
    pb = P - Q
    if pb <= d:
        return _ClosedForm(IDLE, P, (1.0, 0.0), (1.0, 0.0))
    if pb <= a:
        return _ClosedForm(DEFENDER_TAKEOVER, Q + d, (0.0, 1.0), (1.0, 0.0))
    return _ClosedForm(MIXED, P - a + a * d / pb, (1 - a / pb, a / pb), (d / pb, 1 - d / pb))


def _resolve(spec: DualDeterSpec, k: int, node: int, case: str, closed: _ClosedForm, p_next) -> NodeSolution:
    M = build_scaled_cost_to_go(spec.to_scalar_spec(), k, node, p_next)
    try:
        lp = solve_zero_sum(M)
    except SolverError as exc:
        raise exc.with_context(k=k, node=node)
    g = spec.g[k - 1, node]

    if not closed.usable:
        log.debug("dual-deter k=%d node=%d (%s): %s, solved by the lp", k, node, case, closed.branch)
        diag = NodeDiagnostic(k, node, case, closed.branch, float("nan"), lp.value, LP_ONLY, float("nan"))
        return NodeSolution(g + lp.value, lp.row_strategy, lp.col_strategy, diag)

    candidate = MatrixGameSolution(closed.value, np.array(closed.y), np.array(closed.z))
    _, violation = verify_solution(M, candidate, tol=CROSS_CHECK_TOL)
    discrepancy = max(abs(closed.value - lp.value), violation)

    if discrepancy <= CROSS_CHECK_TOL:
        log.debug("dual-deter k=%d node=%d (%s): %s branch, value %.12g", k, node, case, closed.branch, closed.value)
        diag = NodeDiagnostic(k, node, case, closed.branch, closed.value, lp.value, AGREED, discrepancy)
        return NodeSolution(g + closed.value, candidate.row_strategy, candidate.col_strategy, diag)

    log.warning(
        "dual-deter k=%d node=%d (%s): %s branch disagrees with the lp by %.3g (closed %.12g, lp %.12g); using the lp",
        k, node, case, closed.branch, discrepancy, closed.value, lp.value,
    )
    diag = NodeDiagnostic(k, node, case, closed.branch, closed.value, lp.value, DISAGREED, discrepancy)
    return NodeSolution(g + lp.value, lp.row_strategy, lp.col_strategy, diag)


# per-node solvers
def solve_start_node(spec: DualDeterSpec, k: int, p_next, formulas: str | None = None) -> NodeSolution:
    formulas = _pick_formulas(formulas)
    q = _scaled_next(spec, k, p_next)
    closed = _start_closed_form(q[0], q[1], spec.a[k - 1, 0], spec.d[k - 1, 0], formulas)
    return _resolve(spec, k, 0, "start", closed, p_next)


def solve_interior_node(spec: DualDeterSpec, k: int, node: int, p_next, formulas: str | None = None) -> NodeSolution:
    formulas = _pick_formulas(formulas)
    if not 0 < node < spec.chain_length:
        raise PreconditionError(f"node {node} is not an interior node of the chain 0..{spec.chain_length}")
    q = _scaled_next(spec, k, p_next)
    P, U, D = q[node], q[spec.upper_targets[node]], q[spec.lower_targets[node]]
    a, d = spec.a[k - 1, node], spec.d[k - 1, node]
    closed = _interior_printed(P, U, D, a, d) if formulas == PRINTED else _interior_derived(P, U, D, a, d)
    return _resolve(spec, k, node, "interior", closed, p_next)


def solve_end_node(spec: DualDeterSpec, k: int, p_next, formulas: str | None = None) -> NodeSolution:
    formulas = _pick_formulas(formulas)
    n = spec.chain_length
    q = _scaled_next(spec, k, p_next)
    a, d = spec.a[k - 1, n], spec.d[k - 1, n]
    closed = _end_printed(q[n], q[n - 1], a, d) if formulas == PRINTED else _end_derived(q[n], q[n - 1], a, d)
    return _resolve(spec, k, n, "end", closed, p_next)


def solve_node(spec: DualDeterSpec, k: int, node: int, p_next, formulas: str | None = None) -> NodeSolution:
    if node == 0:
        return solve_start_node(spec, k, p_next, formulas)
    if node == spec.chain_length:
        return solve_end_node(spec, k, p_next, formulas)
    return solve_interior_node(spec, k, node, p_next, formulas)


def solve_dual_deter(spec: DualDeterSpec, formulas: str | None = None, max_workers: int | None = None) -> DualDeterResult:
    formulas = _pick_formulas(formulas)
    L, V = spec.horizon, spec.node_count
    log.info("dual-deter solve: horizon %d, chain 0..%d, %s formulas", L, spec.chain_length, formulas)

    p = np.empty((L + 1, V))
    p[L] = spec.g[L]
    defender: list[tuple[np.ndarray, ...]] = [()] * L
    adversary: list[tuple[np.ndarray, ...]] = [()] * L
    diagnostics: list[NodeDiagnostic] = []
    nodes = list(range(V))

    for k in range(L, 0, -1):
        p_next = p[k].copy()
        sols = run_cells(lambda node: solve_node(spec, k, node, p_next, formulas), nodes, max_workers)
        for node, sol in zip(nodes, sols):
            p[k - 1, node] = sol.value
            diagnostics.append(sol.diagnostic)
        defender[k - 1] = tuple(sol.row_strategy for sol in sols)
        adversary[k - 1] = tuple(sol.col_strategy for sol in sols)

    disagreed = sum(1 for d in diagnostics if d.status == DISAGREED)
    if disagreed:
        log.info("dual-deter: %d of %d closed-form cells were resolved by the lp", disagreed, len(diagnostics))
    table = ScalarValueTable(p, PolicyTable(tuple(defender), tuple(adversary)), L, check_nonnegative(p))
    return DualDeterResult(table, tuple(diagnostics), formulas)


def build_dual_deter_spec(chain_length: int, horizon: int, f, g, d, a,
                          lower_targets: Sequence[int] = (), upper_targets: Sequence[int] = (),
                          names: Sequence[str] = ()) -> DualDeterSpec:
    """broadcast scalars or per-node rows to full (time, node) arrays"""
    V = int(chain_length) + 1

    def full(value, rows: int, name: str) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        try:
            return np.broadcast_to(arr, (rows, V)).copy()
        except ValueError:
            raise SpecValidationError(f"{name}: cannot shape {arr.shape} into ({rows}, {V})")

    return DualDeterSpec(
        chain_length, horizon,
        full(f, horizon, "f"), full(g, horizon + 1, "g"), full(d, horizon, "d"), full(a, horizon, "a"),
        tuple(lower_targets), tuple(upper_targets), tuple(names),
    )
