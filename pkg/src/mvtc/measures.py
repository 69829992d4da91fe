"""Sample estimators of the coupling measures and their significance.

Every measure is a partial correlation between the source node
``X_{t-tau}`` and the target ``Y_t``; the kinds differ only in the
conditioning set:

========  ==========================================================
CC        nothing
ITY       parents of ``Y_t`` except the source
ITX       parents of ``X_{t-tau}``
MIT       both of the above
MITS      MIT with sidepath nodes swapped for their own parents
========  ==========================================================

Parents of the source are shifted by ``tau``: a parent ``(Z, h)`` of X
enters the condition as ``Z_{t-tau-h}``.  For a link at lag 2 where X
depends on its own lag 1::

    X_{t-3} --> X_{t-2} --> Y_t        condition on X_{t-3} (lag 3)
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from ._parallel import map_ordered
from .errors import ConditionError, DegenerateError, DegreesOfFreedomError, LengthError, SingularityError
from .graph import (
    LaggedNode,
    TimeSeriesGraph,
    ancestors,
    conditions,
    parents,
    sidepath_nodes,
    source_parents,
)
from .linreg import build_block, lagged_series, partial_correlation, residual_correlation, residualize
from .model import TimeSeriesData, VarModel

KINDS = ("CC", "MIT", "ITY", "ITX", "MITS", "CMIT")
BOOT_CHUNK = 100


@dataclass(frozen=True)
class MeasureResult:
    kind: str
    source: LaggedNode
    target: int
    estimate: float
    q: int
    n_eff: int
    t_stat: float
    p_value: float
    ci: tuple[float, float] | None = None
    level: float | None = None
    conditions: tuple[LaggedNode, ...] = ()

    @property
    def df(self) -> int:
        return self.n_eff - 2 - self.q

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def with_ci(self, ci, level) -> "MeasureResult":
        return replace(self, ci=(float(ci[0]), float(ci[1])), level=float(level))

    def to_dict(self, var_names: Sequence[str] | None = None) -> dict:
        name = (lambda v: var_names[v]) if var_names else (lambda v: v)
        doc = asdict(self)
        doc["source"] = name(self.source.var)
        doc["lag"] = self.source.lag
        doc["target"] = name(self.target)
        doc["conditions"] = [[name(v), lag] for v, lag in self.conditions]
        doc["ci"] = list(self.ci) if self.ci is not None else None
        doc["df"] = self.df
        return doc


class Significance(NamedTuple):
    t_stat: float
    p_value: float
    significant: bool


def significance(estimate: float, n_eff: int, q: int, alpha: float = 0.05) -> Significance:
    """Two-sided Student-t test of a partial correlation with ``n_eff - 2 - q`` df."""
    df = n_eff - 2 - q
    if df < 1:
        raise DegreesOfFreedomError(f"n_eff={n_eff} and q={q} leave {df} degrees of freedom")
    if not abs(estimate) < 1:
        raise DegenerateError(f"|estimate| = {abs(estimate)} leaves no residual variance")
    t = estimate * math.sqrt(df / (1.0 - estimate * estimate))
    p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    return Significance(t, p, p < alpha)


def _as_node(data, node) -> LaggedNode:
    var, lag = node
    return LaggedNode(data.index(var), int(lag))


def _residual_pair(data, source, target, conds):
    src = _as_node(data, source)
    tgt = LaggedNode(data.index(target), 0)
    conds = [_as_node(data, c) for c in conds]
    if src in conds:
        raise ConditionError(f"source node {src} is also a condition")
    if tgt in conds:
        raise ConditionError("target node cannot be a condition")
    if len(set(conds)) != len(conds):
        raise ConditionError("duplicate condition nodes")
    if src == tgt:
        raise ConditionError("source and target are the same node")
    block = build_block(data, conds, max(src.lag, 0))
    if block.t_eff <= block.q + 3:
        raise LengthError(f"{block.t_eff} samples are too few for {block.q} conditions")
    x = lagged_series(data, src, block.offset)
    y = lagged_series(data, tgt, block.offset)
    rx, ry = residualize(block, x, y)
    scale = (np.linalg.norm(x - x.mean()), np.linalg.norm(y - y.mean()))
    return src, tgt.var, tuple(conds), block, rx, ry, scale


def partial_correlation_test(data: TimeSeriesData, source, target, conds: Sequence = (),
                             kind: str = "MIT") -> MeasureResult:
    """Partial correlation of ``source`` and ``target_t`` given ``conds`` with its t-test."""
    src, y, conds, block, rx, ry, scale = _residual_pair(data, source, target, conds)
    est = residual_correlation(rx, ry, *scale)
    sig = significance(est, block.t_eff, block.q)
    return MeasureResult(kind, src, y, est, block.q, block.t_eff, sig.t_stat, sig.p_value,
                         conditions=conds)


def cross_correlation_function(data: TimeSeriesData, source, target, tau_max: int) -> list[MeasureResult]:
    """Lagged Pearson correlation of ``source_{t-tau}`` with ``target_t`` for ``tau = 0..tau_max``.

    Each lag uses its own alignment, so ``n_eff = T - tau``.  Lag 0 of an
    autocorrelation is trivially one.
    """
    if not 0 <= tau_max < data.length / 2:
        raise LengthError(f"tau_max={tau_max} must be below T/2 = {data.length / 2}")
    x, y = data.index(source), data.index(target)
    out = []
    for tau in range(tau_max + 1):
        n = data.length - tau
        if x == y and tau == 0:
            out.append(MeasureResult("CC", LaggedNode(x, 0), y, 1.0, 0, n, math.inf, 0.0))
            continue
        out.append(partial_correlation_test(data, (x, tau), y, (), "CC"))
    return out


def coupling_measure(data: TimeSeriesData, graph: TimeSeriesGraph, kind: str, source, target) -> MeasureResult:
    """MIT, ITY or ITX of the link ``source -> target`` with parents read from ``graph``.

    The link need not exist in the graph; absent links give estimates
    centred on zero.
    """
    kind = kind.upper()
    if kind not in ("MIT", "ITY", "ITX", "CC"):
        raise ValueError(f"coupling_measure handles MIT, ITY, ITX and CC, not {kind!r}")
    src = _as_node(data, source)
    conds = conditions(graph, kind, src, data.index(target))
    return partial_correlation_test(data, src, target, conds, kind)


def estimated_sidepath_nodes(data: TimeSeriesData, graph: TimeSeriesGraph, source, target,
                             alpha: float = 0.05) -> frozenset[LaggedNode]:
    """Sidepath nodes found by testing each candidate ancestor against the source."""
    src = _as_node(data, source)
    cond = source_parents(graph, src)
    found = set()
    for node in sorted(ancestors(graph, data.index(target), max(src.lag, 1))):
        if node.lag > src.lag or node == src or node in cond:
            continue
        res = _node_pair_test(data, node, src, sorted(cond))
        if res.p_value < alpha:
            found.add(node)
    return frozenset(found)


def _node_pair_test(data, a: LaggedNode, b: LaggedNode, conds) -> MeasureResult:
    # re-base both nodes so the later one sits at lag 0
    base = min(a.lag, b.lag, *(c.lag for c in conds))
    shift = lambda n: LaggedNode(n.var, n.lag - base)  # noqa: E731
    a, b = shift(a), shift(b)
    conds = [shift(c) for c in conds]
    offset = max(a.lag, b.lag, *(c.lag for c in conds))
    block = build_block(data, conds, offset)
    est = partial_correlation(lagged_series(data, a, offset), lagged_series(data, b, offset), block)
    sig = significance(est, block.t_eff, block.q)
    return MeasureResult("PC", a, b.var, est, block.q, block.t_eff, sig.t_stat, sig.p_value)


def mits(data: TimeSeriesData, graph: TimeSeriesGraph, source, target,
         model: VarModel | None = None, alpha: float = 0.05, eps: float = 1e-10) -> MeasureResult:
    """MIT with sidepaths left open.

    Sidepath nodes come from the model's exact covariances when ``model`` is
    given, otherwise from significance tests on ``data`` at level ``alpha``.
    """
    src = _as_node(data, source)
    y = data.index(target)
    if model is not None:
        side = sidepath_nodes(graph, model, src, y, eps)
    else:
        side = estimated_sidepath_nodes(data, graph, src, y, alpha)
    conds = conditions(graph, "MITS", src, y, side)
    return partial_correlation_test(data, src, y, conds, "MITS")


def measure(data: TimeSeriesData, graph: TimeSeriesGraph, kind: str, source, target,
            model: VarModel | None = None, alpha: float = 0.05) -> MeasureResult:
    kind = kind.upper()
    if kind == "MITS":
        return mits(data, graph, source, target, model, alpha)
    if kind == "CMIT":
        return contemporaneous_mit(data, graph, source[0] if isinstance(source, tuple) else source, target)
    return coupling_measure(data, graph, kind, source, target)


def contemporaneous_mit(data: TimeSeriesData, graph: TimeSeriesGraph, x, y) -> MeasureResult:
    """Contemporaneous MIT: partial correlation of the parent-regression residuals.

    Every variable is regressed on its own parents; the estimate is the
    normalized off-diagonal entry of the inverse residual covariance, i.e.
    the correlation of the X and Y residuals given all other residuals.
    """
    xi, yi = data.index(x), data.index(y)
    if xi == yi:
        raise ConditionError("contemporaneous MIT needs two distinct variables")
    n = data.n_vars
    parent_sets = [sorted(parents(graph, v)) for v in range(n)]
    offset = max([0, *(p.lag for ps in parent_sets for p in ps)])
    if data.length - offset <= offset + n + 3:
        raise LengthError("series too short for contemporaneous MIT")
    resid = []
    for v, ps in enumerate(parent_sets):
        block = build_block(data, ps, offset)
        resid.append(residualize(block, lagged_series(data, (v, 0), offset))[0])
    resid = np.column_stack(resid)
    cov = resid.T @ resid
    if np.linalg.cond(cov) > 1e12:
        raise SingularityError("residual covariance is singular")
    prec = np.linalg.inv(cov)
    est = float(np.clip(-prec[xi, yi] / math.sqrt(prec[xi, xi] * prec[yi, yi]), -1, 1))
    q = len(set(parent_sets[xi]) | set(parent_sets[yi])) + n - 2
    n_eff = data.length - offset
    sig = significance(est, n_eff, q)
    conds = tuple(sorted(set(parent_sets[xi]) | set(parent_sets[yi])))
    return MeasureResult("CMIT", LaggedNode(xi, 0), yi, est, q, n_eff, sig.t_stat, sig.p_value,
                         conditions=conds)


def measure_residuals(data: TimeSeriesData, graph: TimeSeriesGraph, kind: str, source, target,
                      model: VarModel | None = None, alpha: float = 0.05):
    """Aligned residual series ``(source residual, target residual)`` behind a measure."""
    kind = kind.upper()
    src = _as_node(data, source)
    y = data.index(target)
    side = ()
    if kind == "MITS":
        side = (sidepath_nodes(graph, model, src, y) if model is not None
                else estimated_sidepath_nodes(data, graph, src, y, alpha))
    conds = conditions(graph, kind, src, y, side)
    _, _, _, _, rx, ry, scale = _residual_pair(data, src, y, conds)
    residual_correlation(rx, ry, *scale)
    return rx, ry


def _boot_chunk(args):
    rx, ry, seed, size = args
    rng = np.random.default_rng(seed)
    n = rx.shape[0]
    idx = rng.integers(0, n, size=(size, n))
    bx, by = rx[idx], ry[idx]
    bx = bx - bx.mean(axis=1, keepdims=True)
    by = by - by.mean(axis=1, keepdims=True)
    denom = np.sqrt(np.einsum("ij,ij->i", bx, bx) * np.einsum("ij,ij->i", by, by))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.einsum("ij,ij->i", bx, by) / denom


def bootstrap_ci(data: TimeSeriesData, graph: TimeSeriesGraph, kind: str, source, target,
                 level: float = 0.90, n_boot: int = 1000, seed: int = 0,
                 model: VarModel | None = None) -> tuple[float, float]:
    """Percentile interval from resampling the aligned residual pairs with replacement."""
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rx, ry = measure_residuals(data, graph, kind, source, target, model)
    sizes = [BOOT_CHUNK] * (n_boot // BOOT_CHUNK)
    if n_boot % BOOT_CHUNK:
        sizes.append(n_boot % BOOT_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    draws = np.concatenate(map_ordered(_boot_chunk, [(rx, ry, s, k) for s, k in zip(seeds, sizes)]))
    draws = draws[np.isfinite(draws)]
    if draws.size == 0:
        raise DegenerateError("all bootstrap replicates were degenerate")
    lo, hi = np.quantile(draws, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)
