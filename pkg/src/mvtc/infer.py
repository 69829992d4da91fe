"""Time series graph estimation.

Parent discovery is a lag-specific PC-style search.  Every lagged variable
``(X, tau)``, ``tau = 1..tau_max`` (the target's own past included) starts
as a candidate parent of ``Y_t``, ranked by its absolute unconditional
correlation with ``Y_t``.  For ``k = 1 .. max_conds`` each candidate is
tested given the ``k`` strongest other candidates and dropped when the test
is not significant; a level is swept again until no candidate is dropped
(at most ``max_iters`` sweeps).  A candidate's strength is the smallest
absolute partial correlation it has shown so far; ties go to the smaller
lag, then the smaller variable index.

Surviving links are then re-tested with MIT, and contemporaneous links are
added where the parent-regression residuals stay correlated.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_ordered
from .errors import LengthError
from .graph import LaggedNode, TimeSeriesGraph
from .linreg import lagged_series
from .measures import MeasureResult, contemporaneous_mit, coupling_measure, significance
from .model import TimeSeriesData

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InferenceConfig:
    tau_max: int = 10
    alpha: float = 0.05
    max_conds: int = 3
    max_iters: int = 10

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tau_max < 1:
            raise ValueError("tau_max must be >= 1")
        if self.max_conds < 0 or self.max_iters < 1:
            raise ValueError("max_conds must be >= 0 and max_iters >= 1")


@dataclass(frozen=True, eq=False)
class InferenceResult:
    graph: TimeSeriesGraph
    links: list[MeasureResult] = field(default_factory=list)
    contemporaneous: list[MeasureResult] = field(default_factory=list)
    candidates: TimeSeriesGraph | None = None


def _check_length(data, config):
    if data.length <= config.tau_max + config.max_conds + 3:
        raise LengthError(
            f"T={data.length} is too short for tau_max={config.tau_max} and max_conds={config.max_conds}"
        )


def _residual(cols, v):
    if cols.shape[1] == 0:
        return v
    q, _ = np.linalg.qr(cols)
    return v - q @ (q.T @ v)


def infer_parents(data: TimeSeriesData, target, config: InferenceConfig = InferenceConfig()) -> frozenset[LaggedNode]:
    _check_length(data, config)
    y = data.index(target)
    offset = config.tau_max
    n_eff = data.length - offset
    yv = lagged_series(data, (y, 0), offset)
    yv = yv - yv.mean()
    cols = {}
    for v in range(data.n_vars):
        for lag in range(1, config.tau_max + 1):
            s = lagged_series(data, (v, lag), offset)
            cols[LaggedNode(v, lag)] = s - s.mean()

    def pcorr(node, conds):
        u = np.column_stack([cols[c] for c in conds]) if conds else np.empty((n_eff, 0))
        rx, ry = _residual(u, cols[node]), _residual(u, yv)
        denom = np.sqrt((rx @ rx) * (ry @ ry))
        return float(rx @ ry / denom) if denom > 0 else 0.0

    strength = {node: abs(pcorr(node, [])) for node in cols}
    alive = sorted(cols, key=lambda nd: (-strength[nd], nd.lag, nd.var))
    for k in range(1, config.max_conds + 1):
        if len(alive) <= k:
            break
        for _ in range(config.max_iters):
            drop = []
            for node in alive:
                others = [c for c in alive if c != node][:k]
                rho = pcorr(node, others)
                strength[node] = min(strength[node], abs(rho))
                if not significance(rho, n_eff, k, config.alpha).significant:
                    drop.append(node)
            alive = sorted((nd for nd in alive if nd not in drop),
                           key=lambda nd: (-strength[nd], nd.lag, nd.var))
            if not drop or len(alive) <= k:
                break
    return frozenset(alive)


def infer_graph(data: TimeSeriesData, config: InferenceConfig = InferenceConfig()) -> InferenceResult:
    """Estimate the graph, keeping only links whose MIT test is significant."""
    _check_length(data, config)
    found = map_ordered(lambda y: infer_parents(data, y, config), range(data.n_vars))
    links = {(p.var, y, p.lag) for y, ps in enumerate(found) for p in ps}
    candidates = TimeSeriesGraph(data.n_vars, frozenset(links), frozenset(), data.var_names)

    kept, results = set(), []
    for src, tgt, lag in sorted(links):
        res = coupling_measure(data, candidates, "MIT", (src, lag), tgt)
        if res.significant(config.alpha):
            kept.add((src, tgt, lag))
            results.append(res)
        else:
            logger.debug("MIT re-test dropped %s(t-%d) -> %s (p=%.3g)",
                         data.var_names[src], lag, data.var_names[tgt], res.p_value)
    directed = TimeSeriesGraph(data.n_vars, frozenset(kept), frozenset(), data.var_names)

    pairs, contemp = set(), []
    for a in range(data.n_vars):
        for b in range(a + 1, data.n_vars):
            res = contemporaneous_mit(data, directed, a, b)
            if res.significant(config.alpha):
                pairs.add((a, b))
                contemp.append(res)
    graph = TimeSeriesGraph(data.n_vars, frozenset(kept), frozenset(pairs), data.var_names)
    return InferenceResult(graph, results, contemp, candidates)


def write_links_csv(result: InferenceResult, path, var_names=None) -> None:
    """One row per link: source, target, lag, MIT, p-value and CI bounds (empty if absent)."""
    names = var_names or result.graph.var_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "target", "lag", "mit", "p_value", "ci_low", "ci_high"])
        for r in [*result.links, *result.contemporaneous]:
            lo, hi = r.ci if r.ci is not None else ("", "")
            w.writerow([names[r.source.var], names[r.target], r.source.lag,
                        repr(r.estimate), repr(r.p_value), lo, hi])
