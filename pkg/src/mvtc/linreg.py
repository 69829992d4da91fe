"""Least-squares residualization on lagged regressors and sample partial correlation.

All series are aligned to a common target time index: a block built with
offset ``L`` has rows for target times ``t = L .. T-1``, and the column for
node ``(v, lag)`` holds ``X^v_{t-lag}``.  The maximal-lag prefix is dropped
once per computation so every moment uses the same samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateError, LengthError, SingularityError
from .graph import LaggedNode
from .model import TimeSeriesData

MAX_GRAM_CONDITION = 1e12
RESIDUAL_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class RegressorBlock:
    columns: tuple[LaggedNode, ...]
    matrix: np.ndarray
    offset: int

    @property
    def t_eff(self) -> int:
        return self.matrix.shape[0]

    @property
    def q(self) -> int:
        return self.matrix.shape[1]


def lagged_series(data: TimeSeriesData, node, offset: int) -> np.ndarray:
    """Values of ``node`` aligned to target times ``offset .. T-1``."""
    var, lag = data.index(node[0]), int(node[1])
    if lag > offset:
        raise ValueError(f"lag {lag} exceeds alignment offset {offset}")
    return data.values[offset - lag:data.length - lag, var]


def build_block(data: TimeSeriesData, nodes: Iterable, target_time_lag: int = 0) -> RegressorBlock:
    """Stack the lagged ``nodes`` into a design matrix.

    The alignment offset is the largest lag among the nodes and
    ``target_time_lag``; it is also the number of discarded rows.
    """
    cols = tuple(LaggedNode(data.index(v), int(lag)) for v, lag in nodes)
    if any(c.lag < 0 for c in cols) or target_time_lag < 0:
        raise ValueError("lags must be non-negative")
    offset = max([target_time_lag, *(c.lag for c in cols)])
    if offset >= data.length:
        raise LengthError(f"largest lag {offset} leaves no samples from T={data.length}")
    if cols:
        matrix = np.column_stack([lagged_series(data, c, offset) for c in cols])
    else:
        matrix = np.empty((data.length - offset, 0))
    return RegressorBlock(cols, matrix, offset)


def _centered(a):
    a = np.asarray(a, dtype=float)
    return a - a.mean(axis=0)


def _factor(block: RegressorBlock):
    u = _centered(block.matrix)
    if block.q == 0:
        return u, None
    if block.t_eff <= block.q:
        raise SingularityError(f"{block.t_eff} samples cannot fit {block.q} regressors")
    q_mat, r_mat = np.linalg.qr(u)
    with np.errstate(divide="ignore"):
        gram_cond = np.linalg.cond(r_mat) ** 2
    if not np.isfinite(gram_cond) or gram_cond > MAX_GRAM_CONDITION:
        raise SingularityError("regressor block is rank-deficient or ill-conditioned")
    return q_mat, r_mat


def _check_length(block, y):
    if y.shape[0] != block.t_eff:
        raise LengthError(f"series of length {y.shape[0]} is not aligned to block ({block.t_eff} rows)")


def ols(block: RegressorBlock, y) -> np.ndarray:
    """Least-squares coefficients of ``y`` on the (mean-removed) block via QR."""
    y = _centered(y)
    _check_length(block, y)
    q_mat, r_mat = _factor(block)
    if r_mat is None:
        return np.zeros(0)
    return np.linalg.solve(r_mat, q_mat.T @ y)


def residualize(block: RegressorBlock, *series) -> list[np.ndarray]:
    """OLS residuals of each series on the block, sharing one factorization."""
    q_mat, r_mat = _factor(block)
    out = []
    for s in series:
        s = _centered(s)
        _check_length(block, s)
        out.append(s if r_mat is None else s - q_mat @ (q_mat.T @ s))
    return out


def residual_correlation(rx: np.ndarray, ry: np.ndarray, scale_x=None, scale_y=None) -> float:
    nx, ny = np.linalg.norm(rx), np.linalg.norm(ry)
    if scale_x is not None and nx <= RESIDUAL_FLOOR * scale_x or scale_y is not None and ny <= RESIDUAL_FLOOR * scale_y:
        raise DegenerateError("a residual series has (numerically) zero variance")
    if nx == 0 or ny == 0:
        raise DegenerateError("a residual series has zero variance")
    return float(np.clip(rx @ ry / (nx * ny), -1.0, 1.0))


def partial_correlation(x, y, block: RegressorBlock) -> float:
    """Pearson correlation of the residuals of ``x`` and ``y`` after regressing both on the block."""
    rx, ry = residualize(block, x, y)
    return residual_correlation(rx, ry, np.linalg.norm(_centered(x)), np.linalg.norm(_centered(y)))
