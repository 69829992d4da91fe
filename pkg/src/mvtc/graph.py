"""Time series graphs: lagged directed links and contemporaneous links.

Nodes are ``(variable, lag)`` pairs relative to a reference time ``t``; a
directed link ``(source, target, lag)`` stands for ``source_{t-lag} ->
target_t`` at every ``t``.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import CovarianceError, DimensionError
from .model import VarModel, _default_names, _resolve, require_valid

DEFAULT_EPS = 1e-12
MAX_HORIZON = 100


class LaggedNode(NamedTuple):
    var: int
    lag: int

    def shifted(self, by: int) -> "LaggedNode":
        return LaggedNode(self.var, self.lag + by)


@dataclass(frozen=True)
class TimeSeriesGraph:
    n_vars: int
    directed_links: frozenset = frozenset()
    contemporaneous_links: frozenset = frozenset()
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        names = tuple(self.var_names) if self.var_names else _default_names(self.n_vars)
        if len(names) != self.n_vars:
            raise DimensionError(f"{self.n_vars} variables but {len(names)} names")
        links = set()
        for src, tgt, lag in self.directed_links:
            src, tgt, lag = int(src), int(tgt), int(lag)
            if lag < 1:
                raise ValueError(f"directed link ({src}, {tgt}, {lag}) must have lag >= 1")
            self._check_var(src)
            self._check_var(tgt)
            links.add((src, tgt, lag))
        pairs = set()
        for a, b in self.contemporaneous_links:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"contemporaneous self-link on variable {a}")
            self._check_var(a)
            self._check_var(b)
            pairs.add((min(a, b), max(a, b)))
        object.__setattr__(self, "var_names", names)
        object.__setattr__(self, "directed_links", frozenset(links))
        object.__setattr__(self, "contemporaneous_links", frozenset(pairs))

    def _check_var(self, v):
        if not 0 <= v < self.n_vars:
            raise KeyError(f"variable index {v} out of range")

    @property
    def max_lag(self) -> int:
        return max((lag for _, _, lag in self.directed_links), default=0)

    def index(self, var) -> int:
        return _resolve(var, self.var_names)

    def has_link(self, source, target, lag) -> bool:
        return (self.index(source), self.index(target), lag) in self.directed_links

    def to_dict(self) -> dict:
        name = self.var_names.__getitem__
        return {
            "n_vars": self.n_vars,
            "var_names": list(self.var_names),
            "directed_links": [[name(s), name(t), lag] for s, t, lag in sorted(self.directed_links)],
            "contemporaneous_links": [[name(a), name(b)] for a, b in sorted(self.contemporaneous_links)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TimeSeriesGraph":
        names = tuple(doc.get("var_names") or ())
        n = int(doc.get("n_vars", len(names)))
        names = names or _default_names(n)
        idx = lambda v: _resolve(v, names)  # noqa: E731
        return cls(
            n,
            frozenset((idx(s), idx(t), int(lag)) for s, t, lag in doc.get("directed_links", [])),
            frozenset((idx(a), idx(b)) for a, b in doc.get("contemporaneous_links", [])),
            names,
        )

    def __str__(self):
        name = self.var_names.__getitem__
        parts = [f"{name(s)}(t-{lag}) -> {name(t)}" for s, t, lag in sorted(self.directed_links)]
        parts += [f"{name(a)} -- {name(b)}" for a, b in sorted(self.contemporaneous_links)]
        return "; ".join(parts) or "(empty graph)"


def load_graph(path) -> TimeSeriesGraph:
    with open(path) as fh:
        return TimeSeriesGraph.from_dict(json.load(fh))


def save_graph(graph: TimeSeriesGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=2) + "\n")


def graph_from_model(model: VarModel, eps: float = DEFAULT_EPS,
                     contemporaneous: str = "precision") -> TimeSeriesGraph:
    """Read the graph off the model's nonzero coefficients.

    Contemporaneous links follow nonzero entries of the innovation precision
    matrix; ``contemporaneous="covariance"`` uses nonzero entries of sigma
    itself instead.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    require_valid(model)
    links = {
        (src, tgt, s + 1)
        for s, tgt, src in zip(*np.nonzero(np.abs(model.phi) > eps))
    }
    if contemporaneous == "precision":
        try:
            chol = np.linalg.cholesky(model.sigma)
        except np.linalg.LinAlgError:
            raise CovarianceError("innovation covariance is singular") from None
        inv_chol = np.linalg.inv(chol)
        coupling = inv_chol.T @ inv_chol
    elif contemporaneous == "covariance":
        coupling = model.sigma
    else:
        raise ValueError(f"unknown contemporaneous rule {contemporaneous!r}")
    n = model.n_vars
    pairs = {(i, j) for i in range(n) for j in range(i + 1, n) if abs(coupling[i, j]) > eps}
    return TimeSeriesGraph(n, frozenset(links), frozenset(pairs), model.var_names)


def parents(graph: TimeSeriesGraph, target) -> frozenset[LaggedNode]:
    y = graph.index(target)
    return frozenset(LaggedNode(s, lag) for s, t, lag in graph.directed_links if t == y)


def neighbors(graph: TimeSeriesGraph, target) -> frozenset[int]:
    y = graph.index(target)
    return frozenset(b if a == y else a for a, b in graph.contemporaneous_links if y in (a, b))


def default_horizon(graph: TimeSeriesGraph) -> int:
    return max(1, min(10 * graph.max_lag, MAX_HORIZON))


def ancestors(graph: TimeSeriesGraph, target, horizon: int | None = None) -> frozenset[LaggedNode]:
    """All nodes with a directed path into ``target_t`` within ``horizon`` total lag."""
    if horizon is None:
        horizon = default_horizon(graph)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    y = graph.index(target)
    into = {}
    for s, t, lag in graph.directed_links:
        into.setdefault(t, []).append((s, lag))
    found = set()
    queue = deque([LaggedNode(y, 0)])
    while queue:
        node = queue.popleft()
        for src, lag in into.get(node.var, ()):
            nxt = LaggedNode(src, node.lag + lag)
            if nxt.lag <= horizon and nxt not in found:
                found.add(nxt)
                queue.append(nxt)
    return frozenset(found)


def _node(graph, node) -> LaggedNode:
    var, lag = node
    lag = int(lag)
    if lag < 0:
        raise ValueError(f"node lag must be non-negative, got {lag}")
    return LaggedNode(graph.index(var), lag)


def source_parents(graph: TimeSeriesGraph, source) -> frozenset[LaggedNode]:
    """Parents of the lagged source node ``X_{t-tau}``, with lags relative to ``t``."""
    x, tau = _node(graph, source)
    return frozenset(p.shifted(tau) for p in parents(graph, x))


def sidepath_nodes(graph: TimeSeriesGraph, model: VarModel, source, target,
                   eps: float = 1e-10) -> frozenset[LaggedNode]:
    """Ancestors of ``target_t`` on sidepaths from the source node.

    These are the ancestors, other than the source and its parents, that stay
    correlated with the source after conditioning on the source's parents;
    the partial correlations come from the model's exact lagged covariances.
    """
    from .analytic import lagged_covariance, node_partial_correlation

    src = _node(graph, source)
    y = graph.index(target)
    cond = source_parents(graph, src)
    # nodes older than the source are independent of its innovation given its parents
    candidates = sorted(
        n for n in ancestors(graph, y, max(src.lag, 1))
        if n.lag <= src.lag and n != src and n not in cond
    )
    if not candidates:
        return frozenset()
    max_lag = max(n.lag for n in (*candidates, src, *cond))
    table = lagged_covariance(model, max_lag)
    return frozenset(
        n for n in candidates
        if abs(node_partial_correlation(table, n, src, sorted(cond))) > eps
    )


# -- condition sets of the coupling measures ----------------------------------

def _check_source(graph, source):
    src = _node(graph, source)
    if src.lag < 1:
        raise ValueError("source lag must be >= 1")
    return src


def ity_conditions(graph: TimeSeriesGraph, source, target) -> list[LaggedNode]:
    src = _check_source(graph, source)
    return sorted(parents(graph, target) - {src})


def itx_conditions(graph: TimeSeriesGraph, source, target) -> list[LaggedNode]:
    src = _check_source(graph, source)
    return sorted(source_parents(graph, src))


def mit_conditions(graph: TimeSeriesGraph, source, target) -> list[LaggedNode]:
    src = _check_source(graph, source)
    return sorted((parents(graph, target) - {src}) | source_parents(graph, src))


def mits_conditions(graph: TimeSeriesGraph, source, target,
                    sidepaths: Iterable[LaggedNode]) -> list[LaggedNode]:
    """Conditions that leave the sidepaths open but block everything else.

    The sidepath nodes themselves are dropped from the target's parents and
    replaced by their own parents.
    """
    src = _check_source(graph, source)
    side = frozenset(_node(graph, n) for n in sidepaths)
    cond = set(parents(graph, target))
    for node in side:
        cond |= {p.shifted(node.lag) for p in parents(graph, node.var)}
    cond -= side | {src}
    return sorted(cond | source_parents(graph, src))


def conditions(graph: TimeSeriesGraph, kind: str, source, target, sidepaths=()) -> list[LaggedNode]:
    kind = kind.upper()
    if kind == "CC":
        _check_source(graph, source)
        return []
    if kind == "MIT":
        return mit_conditions(graph, source, target)
    if kind == "ITY":
        return ity_conditions(graph, source, target)
    if kind == "ITX":
        return itx_conditions(graph, source, target)
    if kind == "MITS":
        return mits_conditions(graph, source, target, sidepaths)
    raise ValueError(f"unknown measure kind {kind!r}")
