# -*- coding: utf-8 -*-
"""
zero-sum matrix games: row player (defender) minimizes, column player
(adversary) maximizes. pure saddles are detected first; everything else goes
through the primal/dual lp pair on the positively shifted matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from errors import PreconditionError, SolverError, SpecValidationError
from settings import SIMPLEX_TOL, VALUE_TOL, VERIFY_TOL

log = logging.getLogger(__name__)

PURE = "pure"
MIXED = "mixed"

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    kind: str = MIXED

    @property
    def is_pure(self) -> bool:
        return self.kind == PURE


def as_game_matrix(A) -> np.ndarray:
    """validate and return a float copy of a payoff matrix"""
    M = np.array(A, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise SpecValidationError(f"matrix: expected a non-empty 2-d array, got shape {M.shape}")
    bad = np.argwhere(~np.isfinite(M))
    if bad.size:
        raise SpecValidationError([f"matrix[{i}][{j}]: entry is not finite" for i, j in bad])
    return M


def _unit(size: int, index: int) -> np.ndarray:
    e = np.zeros(size)
    e[index] = 1.0
    return e


def _clean_strategy(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    x[x < SIMPLEX_TOL] = 0.0
    total = x.sum()
    if not np.isfinite(total) or total <= 0:
        raise SolverError("lp returned an empty strategy")
    return x / total


def pure_saddle(A) -> tuple[int, int, float] | None:
    """
    entry that is the minimum of its column and the maximum of its row;
    lexicographically smallest (row, col) when several exist
    """
    M = as_game_matrix(A)
    mask = (M == M.min(axis=0, keepdims=True)) & (M == M.max(axis=1, keepdims=True))
    hits = np.argwhere(mask)
    if hits.size == 0:
        return None
    i, j = (int(v) for v in hits[0])
    return i, j, float(M[i, j])


def solve_lp_pair(A) -> tuple[float, np.ndarray, float, np.ndarray]:
    """
    both lps of the game after shifting every entry to >= 1
    returns (defender optimum, y, adversary optimum, z)
    """
    M = as_game_matrix(A)
    m, n = M.shape
    shift = 1.0 - float(M.min())
    B = M + shift

    # defender: max sum(u) s.t. B^T u <= 1, u >= 0  ->  v = 1/sum(u), y = u v
    res_def = linprog(-np.ones(m), A_ub=B.T, b_ub=np.ones(n), bounds=(0, None), method="highs-ds", options=_LP_OPTIONS)
    # adversary: min sum(t) s.t. B t >= 1, t >= 0  ->  w = 1/sum(t), z = t w
    res_adv = linprog(np.ones(n), A_ub=-B, b_ub=-np.ones(m), bounds=(0, None), method="highs-ds", options=_LP_OPTIONS)

    for who, res in (("defender", res_def), ("adversary", res_adv)):
        if res.status != 0 or res.x is None:
            raise SolverError(f"{who} lp failed: {res.message}", matrix=M)

    sum_u = float(res_def.x.sum())
    sum_t = float(res_adv.x.sum())
    if sum_u <= 0 or sum_t <= 0:
        raise SolverError("lp optimum is degenerate (zero-sum strategy)", matrix=M)

    y = _clean_strategy(res_def.x)
    z = _clean_strategy(res_adv.x)
    return 1.0 / sum_u - shift, y, 1.0 / sum_t - shift, z


def solve_zero_sum(A) -> MatrixGameSolution:
    M = as_game_matrix(A)
    m, n = M.shape

    saddle = pure_saddle(M)
    if saddle is not None:
        i, j, val = saddle
        return MatrixGameSolution(val, _unit(m, i), _unit(n, j), PURE)

    v_def, y, v_adv, z = solve_lp_pair(M)
    if abs(v_def - v_adv) > VALUE_TOL * max(1.0, abs(v_def)):
        raise SolverError(f"lp duality gap {abs(v_def - v_adv):.3e}", matrix=M)

    # the value is pinned between what y concedes and what z guarantees
    upper = float((y @ M).max())
    lower = float((M @ z).min())
    scale = max(1.0, float(np.abs(M).max()))
    if upper - lower > VALUE_TOL * scale:
        raise SolverError(f"lp strategies leave a saddle gap of {upper - lower:.3e}", matrix=M)
    return MatrixGameSolution(0.5 * (upper + lower), y, z, MIXED)


def solve_2x2_closed_form(A) -> MatrixGameSolution:
    """mixed equilibrium of a 2x2 game with no pure saddle"""
    M = as_game_matrix(A)
    if M.shape != (2, 2):
        raise PreconditionError(f"closed form needs a 2x2 matrix, got {M.shape}")
    if pure_saddle(M) is not None:
        raise PreconditionError("matrix has a pure saddle; the 2x2 mixed formula does not apply")

    (a11, a12), (a21, a22) = M
    den = a11 + a22 - a12 - a21
    y1 = (a22 - a21) / den
    z1 = (a22 - a12) / den
    value = (a11 * a22 - a12 * a21) / den
    return MatrixGameSolution(float(value), np.array([y1, 1.0 - y1]), np.array([z1, 1.0 - z1]), MIXED)


def verify_solution(A, sol: MatrixGameSolution, tol: float = VERIFY_TOL) -> tuple[bool, float]:
    """
    saddle inequalities: no adversary column beats the value against y,
    no defender row undercuts it against z. returns (passed, worst violation)
    """
    M = as_game_matrix(A)
    y = np.asarray(sol.row_strategy, dtype=float)
    z = np.asarray(sol.col_strategy, dtype=float)
    if y.shape != (M.shape[0],) or z.shape != (M.shape[1],):
        raise PreconditionError(f"strategy shapes {y.shape}/{z.shape} do not fit matrix {M.shape}")

    worst = max(
        float((y @ M - sol.value).max()),
        float((sol.value - M @ z).max()),
        float(-y.min()),
        float(-z.min()),
        abs(float(y.sum()) - 1.0),
        abs(float(z.sum()) - 1.0),
        0.0,
    )
    return worst <= tol, worst
