# -*- coding: utf-8 -*-
from __future__ import annotations

import numpy as np
import pytest

from dual_deter import build_dual_deter_spec
from graph_core import build_graph
from scalar_lq import ScalarLQSpec
from spec_io import bundled_spec_path, parse_spec


def make_scalar_spec(rng: np.random.Generator, node_count: int = 3, horizon: int = 3,
                     f_values=(0.5, 1.0, 2.0), density: float = 0.6) -> ScalarLQSpec:
    """random graph, costs in [0, 2], f drawn from a small set so grids stay small"""
    edges = [(u, v) for u in range(node_count) for v in range(node_count) if u != v and rng.random() < density]
    graph = build_graph(node_count, edges)
    return ScalarLQSpec(
        graph=graph,
        horizon=horizon,
        f=rng.choice(np.asarray(f_values), size=(horizon, node_count)),
        g=rng.uniform(0.0, 2.0, size=(horizon + 1, node_count)),
        d=rng.uniform(0.0, 2.0, size=(horizon, node_count)),
        a=rng.uniform(0.0, 2.0, size=(horizon, node_count)),
    )


def make_dual_spec(rng: np.random.Generator, chain_length: int = 3, horizon: int = 4):
    V = chain_length + 1
    return build_dual_deter_spec(
        chain_length, horizon,
        f=rng.uniform(0.5, 1.5, size=(horizon, V)),
        g=rng.uniform(0.0, 2.0, size=(horizon + 1, V)),
        d=rng.uniform(0.0, 2.0, size=(horizon, V)),
        a=rng.uniform(0.0, 2.0, size=(horizon, V)),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def line_graph():
    return build_graph(3, [(0, 1), (1, 0), (1, 2), (2, 1)], names=["a", "b", "c"])


@pytest.fixture
def small_scalar_spec(line_graph) -> ScalarLQSpec:
    L = 3
    return ScalarLQSpec(
        graph=line_graph,
        horizon=L,
        f=np.ones((L, 3)),
        g=np.tile([1.0, 2.0, 0.5], (L + 1, 1)),
        d=np.full((L, 3), 0.4),
        a=np.full((L, 3), 0.3),
    )


@pytest.fixture
def small_dual_spec():
    return build_dual_deter_spec(3, 4, f=1.0, g=[0.5, 1.0, 1.5, 2.0], d=0.4, a=0.6)


@pytest.fixture(scope="session")
def sird_file():
    return parse_spec(bundled_spec_path("sird"))


@pytest.fixture(scope="session")
def stock_file():
    return parse_spec(bundled_spec_path("stock-market"))
