# -*- coding: utf-8 -*-
"""
game spec files in, result bundles out

a spec file is json (see specs/game_spec.schema.json). parsing collects every
problem it can find before giving up, each tagged with its path in the
document, e.g. "costs.g.S[3]: negative cost -1.0; costs must be non-negative".
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from dual_deter import DualDeterSpec, NodeDiagnostic, solve_dual_deter, AGREED, DISAGREED, LP_ONLY
from errors import PreconditionError, SpecValidationError
from general_solver import (
    ADVERSARY, DEFENDER, GeneralGameSpec, GeneralValueTable, build_cost_to_go, map_to_grid, snap_to_grid,
    solve_general,
)
from graph_core import action_label, build_graph
from matrix_game import MatrixGameSolution, verify_solution
from scalar_lq import ScalarLQSpec, ScalarValueTable, build_scaled_cost_to_go, solve_scalar_lq, value_spread
from settings import (
    BUNDLED_SPECS_DIR, DEFAULT_SAMPLES, DEFAULT_SEED, SADDLE_TOL, SOLVER_VERSION, VERIFY_TOL,
)
from simulator import estimate_expected_cost, policy_value, saddle_check

log = logging.getLogger(__name__)

MODELS = ("general", "scalar_lq", "dual_deter")
FORMATS = ("json", "csv", "xlsx")
TOP_LEVEL_KEYS = {
    "$schema", "model", "horizon", "nodes", "edges", "costs", "dynamics", "state_grid",
    "chain_length", "targets", "initial", "simulation", "verify", "metadata", "bias",
}
BUNDLED_EXAMPLES = {
    "sird": "sird.json",
    "stock-market": "stock_market.json",
}
SCHEMA_FILE = "game_spec.schema.json"


# parsed spec
@dataclass(frozen=True)
class GameSpecFile:
    model: str
    horizon: int
    node_names: tuple[str, ...]
    spec: ScalarLQSpec | DualDeterSpec | GeneralGameSpec
    initial_node: int = 0
    initial_state: float | int = 1.0
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    max_spread_ratio: float | None = None
    metadata: dict = field(default_factory=dict)
    spec_hash: str = ""
    source: str | None = None

    @property
    def graph(self):
        return self.spec.topology if isinstance(self.spec, DualDeterSpec) else self.spec.graph

    def node_index(self, ref) -> int:
        if isinstance(ref, str) and ref not in self.node_names and ref.isdigit():
            ref = int(ref)
        return self.graph.node_index(ref)


class _Violations:
    def __init__(self):
        self.items: list[str] = []

    def add(self, path: str, message: str) -> None:
        self.items.append(f"{path}: {message}")

    def __bool__(self) -> bool:
        return bool(self.items)

    def raise_if_any(self) -> None:
        if self.items:
            raise SpecValidationError(self.items)


# helper functions
def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def spec_hash(document: dict) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _resolve_node(ref, names: tuple[str, ...], path: str, errs: _Violations) -> int | None:
    if _is_int(ref) and 0 <= ref < len(names):
        return ref
    if isinstance(ref, str) and ref in names:
        return names.index(ref)
    if isinstance(ref, str) and ref.isdigit() and int(ref) < len(names):
        return int(ref)
    errs.add(path, f"unknown node {ref!r}")
    return None


def _per_node(block, names: tuple[str, ...], path: str, errs: _Violations) -> list | None:
    """per-node entries: one number for every node, a mapping keyed by node name, or a list in node order"""
    if _is_number(block):
        return [block] * len(names)
    if isinstance(block, dict):
        out = [None] * len(names)
        for key, entry in block.items():
            idx = _resolve_node(key, names, f"{path}.{key}", errs)
            if idx is not None:
                out[idx] = entry
        missing = [names[i] for i, e in enumerate(out) if e is None]
        if missing:
            errs.add(path, f"missing entries for node(s) {missing}")
            return None
        return out
    if isinstance(block, list):
        if len(block) != len(names):
            errs.add(path, f"expected {len(names)} per-node entries, got {len(block)}")
            return None
        return list(block)
    errs.add(path, "expected a mapping keyed by node name or a list in node order")
    return None


def _time_series(entry, rows: int, path: str, errs: _Violations, nonneg: bool) -> np.ndarray | None:
    """scalar broadcast over time or an explicit list of `rows` numbers"""
    if _is_number(entry):
        if nonneg and entry < 0:
            errs.add(path, f"negative cost {entry!r}; costs must be non-negative")
            return None
        return np.full(rows, float(entry))
    if not isinstance(entry, list):
        errs.add(path, f"expected a number or a list of {rows} numbers")
        return None
    if len(entry) != rows:
        errs.add(path, f"expected a number or {rows} numbers, got {len(entry)}")
        return None
    ok = True
    for i, v in enumerate(entry):
        if not _is_number(v):
            errs.add(f"{path}[{i}]", f"expected a finite number, got {v!r}")
            ok = False
        elif nonneg and v < 0:
            errs.add(f"{path}[{i}]", f"negative cost {v!r}; costs must be non-negative")
            ok = False
    return np.array(entry, dtype=float) if ok else None


def _grid_series(entry, rows: int, grid_size: int, path: str, errs: _Violations, nonneg: bool) -> np.ndarray | None:
    """number, per-grid list (constant in time) or per-time list of per-grid lists"""
    try:
        arr = np.array(entry, dtype=float)
    except (TypeError, ValueError):
        errs.add(path, "expected a number, a per-grid list, or a per-time list of per-grid lists")
        return None
    if arr.ndim == 0:
        arr = np.full((rows, grid_size), float(arr))
    elif arr.shape == (grid_size,):
        arr = np.broadcast_to(arr, (rows, grid_size)).copy()
    elif arr.shape != (rows, grid_size):
        errs.add(path, f"expected a number, {grid_size} values, or {rows} rows of {grid_size} values; got shape {arr.shape}")
        return None
    if not np.isfinite(arr).all():
        errs.add(path, "contains non-finite values")
        return None
    if nonneg and (arr < 0).any():
        for k, i in np.argwhere(arr < 0)[:10]:
            errs.add(f"{path}[{k}][{i}]", f"negative cost {arr[k, i]!r}; costs must be non-negative")
        return None
    return arr


def _stack(per_node: list | None) -> np.ndarray | None:
    if per_node is None or any(p is None for p in per_node):
        return None
    return np.stack(per_node, axis=1)


def _node_names(doc: dict, count_hint: int | None, errs: _Violations) -> tuple[str, ...]:
    raw = doc.get("nodes")
    if raw is None:
        if count_hint is None:
            errs.add("nodes", "required")
            return ()
        return tuple(str(i) for i in range(count_hint))
    if not isinstance(raw, list) or not raw:
        errs.add("nodes", "expected a non-empty list of node names")
        return ()
    names = []
    for i, name in enumerate(raw):
        if not isinstance(name, str) or not name:
            errs.add(f"nodes[{i}]", f"expected a non-empty string, got {name!r}")
        elif name in names:
            errs.add(f"nodes[{i}]", f"duplicate node name {name!r}")
        names.append(str(name))
    if count_hint is not None and len(names) != count_hint:
        errs.add("nodes", f"expected {count_hint} names (chain 0..{count_hint - 1}), got {len(names)}")
    return tuple(names)


def _scalar_costs(doc: dict, names, L: int, errs: _Violations) -> dict[str, np.ndarray | None]:
    costs = doc.get("costs")
    out: dict[str, np.ndarray | None] = {"g": None, "d": None, "a": None}
    if not isinstance(costs, dict):
        errs.add("costs", "required mapping with g, d and a")
        return out
    for key in costs:
        if key not in out:
            errs.add(f"costs.{key}", "unknown cost; expected g, d or a")
    for key, rows in (("g", L + 1), ("d", L), ("a", L)):
        if key not in costs:
            errs.add(f"costs.{key}", "required")
            continue
        entries = _per_node(costs[key], names, f"costs.{key}", errs)
        if entries is not None:
            out[key] = _stack([_time_series(e, rows, f"costs.{key}.{names[i]}", errs, True) for i, e in enumerate(entries)])
    return out


def _scalar_dynamics(doc: dict, names, L: int, errs: _Violations) -> np.ndarray | None:
    dyn = doc.get("dynamics")
    if dyn is None:
        return np.ones((L, len(names)))
    if not isinstance(dyn, dict) or "f" not in dyn:
        errs.add("dynamics", "expected a mapping with per-node coefficients under 'f'")
        return None
    entries = _per_node(dyn["f"], names, "dynamics.f", errs)
    if entries is None:
        return None
    return _stack([_time_series(e, L, f"dynamics.f.{names[i]}", errs, False) for i, e in enumerate(entries)])


def _check_bias(doc: dict, errs: _Violations) -> None:
    if "bias" not in doc:
        return
    bias = doc["bias"]
    flat = np.atleast_1d(np.array(bias, dtype=object)).ravel()
    if any((not _is_number(v)) or v != 0 for v in flat):
        errs.add("bias", "affine value terms are not supported; the bias must be zero")


def _initial(doc: dict, names, errs: _Violations, general: bool, grid: np.ndarray | None) -> tuple[int, Any]:
    init = doc.get("initial", {})
    if not isinstance(init, dict):
        errs.add("initial", "expected a mapping with node and x")
        return 0, 0 if general else 1.0
    node = 0
    if "node" in init:
        node = _resolve_node(init["node"], names, "initial.node", errs) or 0
    if not general:
        x = init.get("x", 1.0)
        if not _is_number(x):
            errs.add("initial.x", f"expected a finite number, got {x!r}")
            x = 1.0
        return node, float(x)
    if "grid_index" in init:
        gi = init["grid_index"]
        if not _is_int(gi) or grid is None or not 0 <= gi < len(grid):
            errs.add("initial.grid_index", f"expected a grid index, got {gi!r}")
            return node, 0
        return node, gi
    if "x" in init and grid is not None:
        try:
            return node, int(map_to_grid(grid, [init["x"]], snap=False, where="initial.x")[0])
        except SpecValidationError as exc:
            errs.items.extend(exc.violations)
        except (TypeError, ValueError):
            errs.add("initial.x", f"expected a grid point, got {init['x']!r}")
    return node, 0


def _simulation(doc: dict, errs: _Violations) -> tuple[int, int]:
    sim = doc.get("simulation", {})
    if not isinstance(sim, dict):
        errs.add("simulation", "expected a mapping with samples and seed")
        return DEFAULT_SAMPLES, DEFAULT_SEED
    samples, seed = sim.get("samples", DEFAULT_SAMPLES), sim.get("seed", DEFAULT_SEED)
    if not _is_int(samples) or samples < 1:
        errs.add("simulation.samples", f"expected a positive integer, got {samples!r}")
        samples = DEFAULT_SAMPLES
    if not _is_int(seed) or seed < 0:
        errs.add("simulation.seed", f"expected a non-negative integer, got {seed!r}")
        seed = DEFAULT_SEED
    return samples, seed


def _verify_limits(doc: dict, model: str, errs: _Violations) -> float | None:
    block = doc.get("verify")
    if block is None:
        return None
    if not isinstance(block, dict):
        errs.add("verify", "expected a mapping")
        return None
    for key in block:
        if key != "max_spread_ratio":
            errs.add(f"verify.{key}", "unknown field")
    ratio = block.get("max_spread_ratio")
    if ratio is None:
        return None
    if model == "general":
        errs.add("verify.max_spread_ratio", "not used by the general model")
        return None
    if not _is_number(ratio) or ratio <= 0:
        errs.add("verify.max_spread_ratio", f"expected a positive number, got {ratio!r}")
        return None
    return float(ratio)


def _edges(doc: dict, names, errs: _Violations) -> list[tuple[int, int]]:
    raw = doc.get("edges", [])
    if not isinstance(raw, list):
        errs.add("edges", "expected a list of [from, to] pairs")
        return []
    out = []
    for i, edge in enumerate(raw):
        if not isinstance(edge, list) or len(edge) != 2:
            errs.add(f"edges[{i}]", f"expected a [from, to] pair, got {edge!r}")
            continue
        src = _resolve_node(edge[0], names, f"edges[{i}][0]", errs)
        dst = _resolve_node(edge[1], names, f"edges[{i}][1]", errs)
        if src is not None and dst is not None:
            out.append((src, dst))
    return out


def _off_grid(grid: np.ndarray, points) -> np.ndarray:
    return snap_to_grid(grid, points)[1] > 1e-12


def _general_dynamics(doc: dict, names, L: int, grid: np.ndarray, errs: _Violations):
    dyn = doc.get("dynamics")
    if not isinstance(dyn, dict):
        errs.add("dynamics", "required mapping with kind index, values or linear")
        return None, None
    kind = dyn.get("kind", "index")
    snap = bool(dyn.get("snap", False))
    G = len(grid)
    V = len(names)
    point_shape = grid.shape[1:]
    maps = np.zeros((L, V, G), dtype=np.int64)
    approximate = np.zeros((L, V, G), dtype=bool) if snap else None

    if kind == "linear":
        entries = _per_node(dyn.get("f"), names, "dynamics.f", errs)
        if entries is None:
            return None, None
        f = _stack([_time_series(e, L, f"dynamics.f.{names[i]}", errs, False) for i, e in enumerate(entries)])
        if f is None:
            return None, None
        for k in range(L):
            for node in range(V):
                targets = f[k, node] * grid
                try:
                    maps[k, node] = map_to_grid(grid, targets, snap, where=f"dynamics.f.{names[node]}[{k}]")
                except SpecValidationError as exc:
                    errs.items.extend(exc.violations)
                if snap:
                    approximate[k, node] = _off_grid(grid, targets)
        return maps, approximate

    if kind not in ("index", "values"):
        errs.add("dynamics.kind", f"expected index, values or linear, got {kind!r}")
        return None, None
    entries = _per_node(dyn.get("maps"), names, "dynamics.maps", errs)
    if entries is None:
        return None, None
    for node, entry in enumerate(entries):
        path = f"dynamics.maps.{names[node]}"
        try:
            arr = np.array(entry, dtype=float if kind == "values" else object)
        except (TypeError, ValueError):
            errs.add(path, "malformed map")
            continue
        per_time = (L, G) + (point_shape if kind == "values" else ())
        constant = (G,) + (point_shape if kind == "values" else ())
        if arr.shape == constant:
            arr = np.broadcast_to(arr, per_time)
        elif arr.shape != per_time:
            errs.add(path, f"expected shape {constant} or {per_time}, got {arr.shape}")
            continue
        for k in range(L):
            if kind == "index":
                row = arr[k]
                bad = [i for i, v in enumerate(row) if not _is_int(v) or not 0 <= v < G]
                for i in bad[:10]:
                    errs.add(f"{path}[{k}][{i}]", f"expected a grid index in [0, {G}), got {row[i]!r}")
                if not bad:
                    maps[k, node] = np.array(row.tolist(), dtype=np.int64)
            else:
                try:
                    maps[k, node] = map_to_grid(grid, arr[k], snap, where=f"{path}[{k}]")
                except SpecValidationError as exc:
                    errs.items.extend(exc.violations)
                if snap:
                    approximate[k, node] = _off_grid(grid, arr[k])
    return maps, approximate


def _general_grid(doc: dict, errs: _Violations) -> np.ndarray | None:
    raw = doc.get("state_grid")
    if raw is None:
        errs.add("state_grid", "required for the general model")
        return None
    try:
        grid = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        errs.add("state_grid", "expected a list of numbers or of equal-length number lists")
        return None
    if grid.ndim not in (1, 2) or grid.shape[0] < 1 or not np.isfinite(grid).all():
        errs.add("state_grid", "expected a non-empty list of finite scalars or equal-length vectors")
        return None
    return grid


def _general_costs(doc: dict, names, L: int, G: int, errs: _Violations) -> dict[str, np.ndarray | None]:
    costs = doc.get("costs")
    out: dict[str, np.ndarray | None] = {"g": None, "d": None, "a": None}
    if not isinstance(costs, dict):
        errs.add("costs", "required mapping with g, d and a")
        return out
    for key, rows in (("g", L + 1), ("d", L), ("a", L)):
        if key not in costs:
            errs.add(f"costs.{key}", "required")
            continue
        entries = _per_node(costs[key], names, f"costs.{key}", errs)
        if entries is not None:
            out[key] = _stack([_grid_series(e, rows, G, f"costs.{key}.{names[i]}", errs, True) for i, e in enumerate(entries)])
    return out


def _dual_targets(doc: dict, names, N: int, errs: _Violations) -> tuple[tuple[int, ...], tuple[int, ...]]:
    lower = [max(i - 1, 0) if 0 < i < N else i for i in range(N + 1)]
    upper = [min(i + 1, N) if 0 < i < N else i for i in range(N + 1)]
    raw = doc.get("targets")
    if raw is None:
        return tuple(lower), tuple(upper)
    if not isinstance(raw, dict):
        errs.add("targets", "expected a mapping with lower and/or upper")
        return tuple(lower), tuple(upper)
    for label, table in (("lower", lower), ("upper", upper)):
        block = raw.get(label, {})
        if not isinstance(block, dict):
            errs.add(f"targets.{label}", "expected a mapping from interior node to target node")
            continue
        for key, target in block.items():
            node = _resolve_node(key, names, f"targets.{label}.{key}", errs)
            dest = _resolve_node(target, names, f"targets.{label}.{key}", errs)
            if node is None or dest is None:
                continue
            if not 0 < node < N:
                errs.add(f"targets.{label}.{key}", "targets are only set for interior nodes")
                continue
            table[node] = dest
    return tuple(lower), tuple(upper)


# parsing
def parse_spec(path) -> GameSpecFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecValidationError(f"$: cannot read {path}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecValidationError(f"$: invalid json at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return parse_document(doc, source=str(path))


def parse_document(doc: Any, source: str | None = None) -> GameSpecFile:
    errs = _Violations()
    if not isinstance(doc, dict):
        raise SpecValidationError("$: the spec must be a json object")
    for key in doc:
        if key not in TOP_LEVEL_KEYS:
            errs.add(key, "unknown field")

    model = doc.get("model")
    if model not in MODELS:
        errs.add("model", f"expected one of {list(MODELS)}, got {model!r}")
        errs.raise_if_any()
    L = doc.get("horizon")
    if not _is_int(L) or L < 1:
        errs.add("horizon", f"expected an integer >= 1, got {L!r}")
        errs.raise_if_any()

    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        errs.add("metadata", "expected a mapping")
        metadata = {}
    samples, seed = _simulation(doc, errs)
    max_ratio = _verify_limits(doc, model, errs)

    if model == "dual_deter":
        game, names, node, x = _parse_dual(doc, L, errs)
    elif model == "scalar_lq":
        game, names, node, x = _parse_scalar(doc, L, errs)
    else:
        game, names, node, x = _parse_general(doc, L, errs)

    return GameSpecFile(
        model=model, horizon=L, node_names=names, spec=game,
        initial_node=node, initial_state=x, samples=samples, seed=seed, max_spread_ratio=max_ratio,
        metadata=dict(metadata), spec_hash=spec_hash(doc), source=source,
    )


def _parse_scalar(doc: dict, L: int, errs: _Violations):
    names = _node_names(doc, None, errs)
    errs.raise_if_any()
    edges = _edges(doc, names, errs)
    costs = _scalar_costs(doc, names, L, errs)
    f = _scalar_dynamics(doc, names, L, errs)
    _check_bias(doc, errs)
    node, x = _initial(doc, names, errs, general=False, grid=None)
    for key in ("state_grid", "chain_length", "targets"):
        if key in doc:
            errs.add(key, "not used by the scalar_lq model")
    errs.raise_if_any()
    graph = build_graph(len(names), edges, names)
    return ScalarLQSpec(graph, L, f, costs["g"], costs["d"], costs["a"]), names, node, x


def _parse_dual(doc: dict, L: int, errs: _Violations):
    N = doc.get("chain_length")
    if not _is_int(N) or N < 1:
        errs.add("chain_length", f"expected an integer >= 1, got {N!r}")
        errs.raise_if_any()
    names = _node_names(doc, N + 1, errs)
    errs.raise_if_any()
    lower, upper = _dual_targets(doc, names, N, errs)
    costs = _scalar_costs(doc, names, L, errs)
    f = _scalar_dynamics(doc, names, L, errs)
    _check_bias(doc, errs)
    node, x = _initial(doc, names, errs, general=False, grid=None)
    for key in ("edges", "state_grid"):
        if key in doc:
            errs.add(key, "not used by the dual_deter model")
    errs.raise_if_any()
    game = DualDeterSpec(N, L, f, costs["g"], costs["d"], costs["a"], lower, upper, names)
    return game, names, node, x


def _parse_general(doc: dict, L: int, errs: _Violations):
    names = _node_names(doc, None, errs)
    grid = _general_grid(doc, errs)
    errs.raise_if_any()
    edges = _edges(doc, names, errs)
    G = len(grid)
    costs = _general_costs(doc, names, L, G, errs)
    maps, approximate = _general_dynamics(doc, names, L, grid, errs)
    node, x = _initial(doc, names, errs, general=True, grid=grid)
    for key in ("chain_length", "targets", "bias"):
        if key in doc:
            errs.add(key, "not used by the general model")
    errs.raise_if_any()
    graph = build_graph(len(names), edges, names)
    game = GeneralGameSpec(graph, L, grid, maps, costs["g"], costs["d"], costs["a"], approximate)
    return game, names, node, x


# results
@dataclass(frozen=True)
class ResultBundle:
    model: str
    horizon: int
    node_names: tuple[str, ...]
    table: ScalarValueTable | GeneralValueTable
    actions: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    spec_hash: str
    solver_version: str = SOLVER_VERSION
    diagnostics: tuple[NodeDiagnostic, ...] = ()
    formulas: str | None = None
    approximate_maps: int = 0
    simulation: dict | None = None
    verification: dict | None = None

    @property
    def state_dependent(self) -> bool:
        return isinstance(self.table, GeneralValueTable)

    def to_dict(self) -> dict:
        policies = self.table.policies
        out = {
            "solver_version": self.solver_version,
            "spec_hash": self.spec_hash,
            "model": self.model,
            "horizon": self.horizon,
            "nodes": list(self.node_names),
            "actions": {
                name: {DEFENDER: list(d), ADVERSARY: list(a)}
                for name, (d, a) in zip(self.node_names, self.actions)
            },
            "policies": {
                DEFENDER: [[row.tolist() for row in per_k] for per_k in policies.defender],
                ADVERSARY: [[row.tolist() for row in per_k] for per_k in policies.adversary],
            },
        }
        if isinstance(self.table, ScalarValueTable):
            out["values"] = {"kind": "coefficient", "table": self.table.coefficients.tolist()}
        else:
            out["values"] = {
                "kind": "grid",
                "state_grid": self.table.state_grid.tolist(),
                "table": self.table.values.tolist(),
                "approximate_maps": self.approximate_maps,
            }
        if self.model == "dual_deter":
            out["formulas"] = self.formulas
            out["diagnostics"] = [diagnostic_record(d) for d in self.diagnostics]
        if self.simulation is not None:
            out["simulation"] = self.simulation
        if self.verification is not None:
            out["verification"] = self.verification
        return out


def diagnostic_record(diag: NodeDiagnostic) -> dict:
    return {
        "k": diag.k,
        "node": diag.node,
        "case": diag.case,
        "branch": diag.branch,
        "closed_form_value": diag.closed_form_value,
        "lp_value": diag.lp_value,
        "status": diag.status,
        "discrepancy": diag.discrepancy,
    }


def _action_labels(spec_file: GameSpecFile) -> tuple:
    graph = spec_file.graph
    names = spec_file.node_names
    return tuple(
        (
            tuple(action_label(u, names) for u in graph.defender_actions(node)),
            tuple(action_label(w, names) for w in graph.adversary_actions(node)),
        )
        for node in range(graph.node_count)
    )


def run_solve(spec_file: GameSpecFile, formulas: str | None = None, max_workers: int | None = None) -> ResultBundle:
    """dispatch on the model kind"""
    diagnostics: tuple[NodeDiagnostic, ...] = ()
    used_formulas = None
    if spec_file.model == "scalar_lq":
        table = solve_scalar_lq(spec_file.spec, max_workers)
    elif spec_file.model == "dual_deter":
        result = solve_dual_deter(spec_file.spec, formulas, max_workers)
        table, diagnostics, used_formulas = result.table, result.diagnostics, result.formulas
    elif spec_file.model == "general":
        table = solve_general(spec_file.spec, max_workers)
    else:
        raise PreconditionError(f"unknown model {spec_file.model!r}")
    return ResultBundle(
        model=spec_file.model,
        horizon=spec_file.horizon,
        node_names=spec_file.node_names,
        table=table,
        actions=_action_labels(spec_file),
        spec_hash=spec_file.spec_hash,
        diagnostics=diagnostics,
        formulas=used_formulas,
        approximate_maps=spec_file.spec.approximate_maps if spec_file.model == "general" else 0,
    )


def _solver_value(bundle: ResultBundle, node: int, x) -> float:
    if isinstance(bundle.table, ScalarValueTable):
        return float(bundle.table.coefficients[0, node]) * float(x) ** 2
    return float(bundle.table.values[0, node, int(x)])


def _start_node(spec_file: GameSpecFile, ref) -> int:
    try:
        return spec_file.node_index(ref)
    except PreconditionError:
        raise SpecValidationError(f"alpha1: unknown node {ref!r}; expected one of {list(spec_file.node_names)}") from None


def run_simulation(spec_file: GameSpecFile, bundle: ResultBundle, samples: int | None = None, seed: int | None = None,
                   x1=None, alpha1=None) -> ResultBundle:
    samples = spec_file.samples if samples is None else samples
    seed = spec_file.seed if seed is None else seed
    x1 = spec_file.initial_state if x1 is None else x1
    node = spec_file.initial_node if alpha1 is None else _start_node(spec_file, alpha1)

    est = estimate_expected_cost(spec_file.spec, bundle.table.policies, x1, node, samples, seed)
    value = _solver_value(bundle, node, x1)
    summary = {
        "samples": est.n_samples,
        "seed": int(seed),
        "x1": x1,
        "alpha1": spec_file.node_names[node],
        "mean": est.mean,
        "stderr": est.stderr,
        "degenerate": est.degenerate,
        "solver_value": value,
        "policy_value": policy_value(spec_file.spec, bundle.table.policies, x1, node),
        "within_3_stderr": abs(est.mean - value) <= 3.0 * est.stderr if est.stderr > 0 else abs(est.mean - value) <= 1e-9,
    }
    log.info("simulation from %s: mean %.6g +/- %.3g over %d samples (solver value %.6g)",
             summary["alpha1"], est.mean, est.stderr, est.n_samples, value)
    return replace(bundle, simulation=summary)


def _scale(M: np.ndarray) -> float:
    return max(1.0, float(np.abs(M).max()))


def _cell_checks(spec_file: GameSpecFile, bundle: ResultBundle) -> tuple[int, float]:
    """verify_solution on every stored (k, node[, x]) cell; violations relative to max(1, max|M|)"""
    table = bundle.table
    policies = table.policies
    worst, cells = 0.0, 0
    if isinstance(table, ScalarValueTable):
        scalar = spec_file.spec.to_scalar_spec() if isinstance(spec_file.spec, DualDeterSpec) else spec_file.spec
        p = table.coefficients
        for k in range(1, bundle.horizon + 1):
            for node in range(p.shape[1]):
                M = build_scaled_cost_to_go(scalar, k, node, p[k])
                sol = MatrixGameSolution(p[k - 1, node] - scalar.g[k - 1, node],
                                         policies.row(DEFENDER, k, node), policies.row(ADVERSARY, k, node))
                worst = max(worst, verify_solution(M, sol, VERIFY_TOL)[1] / _scale(M))
                cells += 1
    else:
        spec = spec_file.spec
        V = table.values
        for k in range(1, bundle.horizon + 1):
            for node in range(V.shape[1]):
                for x in range(V.shape[2]):
                    M = build_cost_to_go(spec, k, node, x, V[k])
                    sol = MatrixGameSolution(V[k - 1, node, x] - spec.stage_costs[k - 1, node, x],
                                             policies.row(DEFENDER, k, node, x), policies.row(ADVERSARY, k, node, x))
                    worst = max(worst, verify_solution(M, sol, VERIFY_TOL)[1] / _scale(M))
                    cells += 1
    return cells, worst


def run_verify(spec_file: GameSpecFile, bundle: ResultBundle, tol: float = SADDLE_TOL) -> ResultBundle:
    """saddle checks from every start node, cell checks, closed-form diagnostics and the value spread"""
    x1 = spec_file.initial_state
    checks = []
    for node, name in enumerate(spec_file.node_names):
        value = _solver_value(bundle, node, x1)
        # gaps are judged relative to max(1, |V|)
        report = saddle_check(spec_file.spec, bundle.table.policies, x1, node, tol * max(1.0, abs(value)), value=value)
        checks.append({
            "node": name,
            "value": report.value,
            "defender_best_response": report.defender_best_response,
            "adversary_best_response": report.adversary_best_response,
            "defender_gap": report.defender_gap,
            "adversary_gap": report.adversary_gap,
            "passed": report.passed,
        })
    cells, worst = _cell_checks(spec_file, bundle)
    summary: dict[str, Any] = {
        "tol": tol,
        "x1": x1,
        "saddle_checks": checks,
        "cell_checks": {"cells": cells, "worst_violation": worst, "tol": VERIFY_TOL, "passed": worst <= VERIFY_TOL},
    }
    if bundle.model == "dual_deter":
        counts = {status: 0 for status in (AGREED, DISAGREED, LP_ONLY)}
        for diag in bundle.diagnostics:
            counts[diag.status] += 1
        summary["closed_form"] = dict(counts, formulas=bundle.formulas)
    if isinstance(bundle.table, ScalarValueTable):
        first, last = value_spread(bundle.table, 1), value_spread(bundle.table, bundle.horizon)
        ratio = first / last if last > 0 else None
        spread = {"k_first": first, "k_last": last, "ratio": ratio}
        limit = spec_file.max_spread_ratio
        if limit is not None:
            spread["max_ratio"] = limit
            spread["passed"] = ratio is not None and ratio <= limit
            if not spread["passed"]:
                log.warning("value spread ratio %s exceeds %.3g", ratio, limit)
        summary["value_spread"] = spread
    summary["passed"] = (all(c["passed"] for c in checks) and summary["cell_checks"]["passed"]
                         and summary.get("value_spread", {}).get("passed", True))
    return replace(bundle, verification=summary)


# emission
def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def bundle_json(bundle: ResultBundle) -> str:
    return json.dumps(_to_jsonable(bundle.to_dict()), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _state_label(point) -> Any:
    if np.ndim(point) == 0:
        return float(point)
    return "(" + ", ".join(f"{float(v):.17g}" for v in point) + ")"


def bundle_frames(bundle: ResultBundle) -> dict[str, pd.DataFrame]:
    """plot-ready tables: values, one policy table per player, closed-form diagnostics"""
    names = bundle.node_names
    table = bundle.table
    if isinstance(table, ScalarValueTable):
        p = table.coefficients
        values = pd.DataFrame(
            [{"k": k + 1, "node": n, "node_name": names[n], "coefficient": float(p[k, n])}
             for k in range(p.shape[0]) for n in range(p.shape[1])]
        )
    else:
        V = table.values
        values = pd.DataFrame(
            [{"k": k + 1, "node": n, "node_name": names[n], "grid_index": x,
              "state": _state_label(table.state_grid[x]), "value": float(V[k, n, x])}
             for k in range(V.shape[0]) for n in range(V.shape[1]) for x in range(V.shape[2])]
        )

    frames = {"values": values}
    for player, rows in ((DEFENDER, table.policies.defender), (ADVERSARY, table.policies.adversary)):
        records = []
        for k, per_k in enumerate(rows, start=1):
            for node, row in enumerate(per_k):
                labels = bundle.actions[node][0 if player == DEFENDER else 1]
                grid_rows = row if bundle.state_dependent else [row]
                for x, probs in enumerate(grid_rows):
                    for j, prob in enumerate(probs):
                        rec = {"k": k, "node": node, "node_name": names[node]}
                        if bundle.state_dependent:
                            rec["grid_index"] = x
                        rec.update({"action_index": j, "target": labels[j], "probability": float(prob)})
                        records.append(rec)
        frames[f"policy_{player}"] = pd.DataFrame(records)
    if bundle.diagnostics:
        frames["diagnostics"] = pd.DataFrame([diagnostic_record(d) for d in bundle.diagnostics]).sort_values(["k", "node"], kind="stable")
    return frames


def emit(bundle: ResultBundle, fmt: str, path) -> list[Path]:
    """write the bundle; json goes to a file (or result.json in a directory), csv and xlsx into a directory"""
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise PreconditionError(f"unknown output format {fmt!r}; use one of {FORMATS}")
    path = Path(path)
    if fmt == "json":
        target = path if path.suffix == ".json" else path / "result.json"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(bundle_json(bundle), encoding="utf-8")
        return [target]

    path.mkdir(parents=True, exist_ok=True)
    frames = bundle_frames(bundle)
    if fmt == "csv":
        written = []
        for name, frame in frames.items():
            target = path / f"{name}.csv"
            frame.to_csv(target, index=False, float_format="%.17g")
            written.append(target)
        return written

    target = path / "result.xlsx"
    with pd.ExcelWriter(target, engine="openpyxl") as writer:
        for name, frame in frames.items():
            frame.to_excel(writer, sheet_name=name[:31], index=False)
    return [target]


# bundled examples
def bundled_spec_path(name: str) -> Path:
    key = name.lower().replace("_", "-")
    if key not in BUNDLED_EXAMPLES:
        raise PreconditionError(f"unknown example {name!r}; choose from {sorted(BUNDLED_EXAMPLES)}")
    return BUNDLED_SPECS_DIR / BUNDLED_EXAMPLES[key]


def write_example(name: str, out_dir) -> list[Path]:
    """copy a bundled spec (and the schema it refers to) into out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for src in (bundled_spec_path(name), BUNDLED_SPECS_DIR / SCHEMA_FILE):
        dst = out_dir / src.name
        shutil.copyfile(src, dst)
        written.append(dst)
    return written
