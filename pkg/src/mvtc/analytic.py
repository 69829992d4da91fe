"""Closed-form second moments of a VAR process and the measures built on them.

Everything here is exact up to series truncation and serves as ground truth
for the sample estimators in :mod:`mvtc.measures`.

Lag convention: ``gamma(k)[i, j] = E[X^i_{t+k} X^j_t]``, so for lagged nodes
``E[X^i_{t-a} X^j_{t-b}] = gamma(b - a)[i, j]`` and ``gamma(-k) = gamma(k).T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DegenerateError, SingularityError
from .graph import (
    LaggedNode,
    TimeSeriesGraph,
    _node,
    conditions,
    graph_from_model,
    parents,
    sidepath_nodes,
    source_parents,
)
from .model import VarModel, require_valid

MAX_SERIES_TERMS = 100_000
MAX_CONDITION = 1e12
DEFAULT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class PsiSequence:
    """Path-coefficient matrices ``Psi(0..n_max)``; ``matrices[n]`` is ``Psi(n)``."""

    matrices: np.ndarray

    @property
    def n_max(self) -> int:
        return self.matrices.shape[0] - 1

    def __getitem__(self, n):
        if n < 0:
            return np.zeros(self.matrices.shape[1:])
        return self.matrices[n]


def _psi_array(phi: np.ndarray, n_max: int) -> np.ndarray:
    p, n = phi.shape[0], phi.shape[1]
    out = np.zeros((n_max + 1, n, n))
    out[0] = np.eye(n)
    for m in range(1, n_max + 1):
        for s in range(1, min(m, p) + 1):
            out[m] += phi[s - 1] @ out[m - s]
    return out


def psi(model: VarModel, n_max: int) -> PsiSequence:
    """``Psi(0) = I``, ``Psi(n) = sum_{s=1}^{min(n, p)} Phi(s) Psi(n - s)``."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    return PsiSequence(_psi_array(model.phi, n_max))


@dataclass(frozen=True, eq=False)
class CovarianceTable:
    """Lagged covariances ``gamma(0..tau_max)`` of a stationary VAR model."""

    gammas: np.ndarray
    truncation_error: float
    model: VarModel = field(repr=False)

    @property
    def tau_max(self) -> int:
        return self.gammas.shape[0] - 1

    def gamma(self, lag: int) -> np.ndarray:
        if abs(lag) > self.tau_max:
            raise IndexError(f"lag {lag} beyond table (tau_max={self.tau_max}); use extended()")
        return self.gammas[lag] if lag >= 0 else self.gammas[-lag].T

    def extended(self, tau_max: int) -> "CovarianceTable":
        """Return a table reaching ``tau_max``, extending by the Yule-Walker recursion.

        For ``k >= 1``, ``gamma(k) = sum_s Phi(s) gamma(k - s)``.
        """
        if tau_max <= self.tau_max:
            return self
        phi = self.model.phi
        p = phi.shape[0]
        gam = list(self.gammas)
        get = lambda k: gam[k] if k >= 0 else gam[-k].T  # noqa: E731
        for k in range(self.tau_max + 1, tau_max + 1):
            gam.append(sum(phi[s - 1] @ get(k - s) for s in range(1, p + 1)))
        return CovarianceTable(np.array(gam), self.truncation_error, self.model)


def lagged_covariance(model: VarModel, tau_max: int, tol: float = DEFAULT_TOL) -> CovarianceTable:
    """Sum ``gamma(tau) = sum_n Psi(n + tau) Sigma Psi(n).T`` for ``tau = 0..tau_max``.

    Summation stops once the largest term norm stays below
    ``tol * ||Sigma||_F`` for ``max(3, p)`` consecutive terms.
    ``truncation_error`` estimates the discarded tail from the last term and
    the squared companion spectral radius.
    """
    if tau_max < 0:
        raise ValueError("tau_max must be non-negative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    radius = require_valid(model).spectral_radius
    phi, sigma = model.phi, model.sigma
    p, n = model.order, model.n_vars
    threshold = tol * np.linalg.norm(sigma)
    patience = max(3, p)

    chunk = 256
    psis = _psi_array(phi, tau_max + chunk)
    filled = psis.shape[0]
    gammas = np.zeros((tau_max + 1, n, n))
    quiet, last = 0, np.inf
    for k in range(MAX_SERIES_TERMS):
        if k + tau_max >= filled:
            grow = np.zeros((filled + chunk, n, n))
            grow[:filled] = psis
            for m in range(filled, filled + chunk):
                for s in range(1, p + 1):
                    grow[m] += phi[s - 1] @ grow[m - s]
            psis, filled = grow, filled + chunk
        right = sigma @ psis[k].T
        terms = psis[k:k + tau_max + 1] @ right
        gammas += terms
        last = float(np.max(np.linalg.norm(terms, axis=(1, 2))))
        quiet = quiet + 1 if last < threshold else 0
        if quiet >= patience:
            break
    ratio = radius ** 2
    bound = last * ratio / (1.0 - ratio) if ratio > 0 else 0.0
    if quiet < patience:
        raise ConvergenceError(
            f"covariance series did not converge within {MAX_SERIES_TERMS} terms", bound
        )
    return CovarianceTable(gammas, bound, model)


def node_covariance(table: CovarianceTable, nodes: Sequence) -> np.ndarray:
    """Covariance matrix of the lagged nodes ``(var, lag)`` read from ``table``."""
    nodes = [LaggedNode(int(v), int(lag)) for v, lag in nodes]
    if not nodes:
        return np.zeros((0, 0))
    lags = [nd.lag for nd in nodes]
    table = table.extended(max(lags) - min(lags))
    m = len(nodes)
    out = np.empty((m, m))
    for a, na in enumerate(nodes):
        for b, nb in enumerate(nodes):
            out[a, b] = table.gamma(nb.lag - na.lag)[na.var, nb.var]
    return out


def _check_conditioning(matrix, what):
    if matrix.size and np.linalg.cond(matrix) > MAX_CONDITION:
        raise SingularityError(f"{what} is singular or ill-conditioned")


def schur_complement(cov: np.ndarray, keep: Sequence[int], given: Sequence[int]) -> np.ndarray:
    """Conditional covariance of ``cov[keep]`` given ``cov[given]``."""
    keep, given = list(keep), list(given)
    block = cov[np.ix_(keep, keep)]
    if not given:
        return block
    gg = cov[np.ix_(given, given)]
    _check_conditioning(gg, "conditioning covariance")
    kg = cov[np.ix_(keep, given)]
    return block - kg @ np.linalg.solve(gg, kg.T)


def node_partial_correlation(table: CovarianceTable, x, y, conds: Sequence = ()) -> float:
    """Population partial correlation of two lagged nodes given the nodes ``conds``."""
    nodes = [tuple(x), tuple(y), *(tuple(c) for c in conds)]
    cov = node_covariance(table, nodes)
    s = schur_complement(cov, [0, 1], range(2, len(nodes)))
    if s[0, 0] <= 0 or s[1, 1] <= 0:
        raise DegenerateError("zero conditional variance")
    return float(s[0, 1] / np.sqrt(s[0, 0] * s[1, 1]))


def analytic_regression(model: VarModel, target, regressors: Sequence, table=None) -> np.ndarray:
    """Population least-squares coefficients of ``target_t`` on lagged ``regressors``."""
    y = model.index(target)
    regs = [LaggedNode(model.index(v), int(lag)) for v, lag in regressors]
    if not regs:
        return np.zeros(0)
    if table is None:
        table = lagged_covariance(model, max(nd.lag for nd in regs))
    cov = node_covariance(table, [LaggedNode(y, 0), *regs])
    uu, uy = cov[1:, 1:], cov[1:, 0]
    _check_conditioning(uu, "regressor covariance")
    return np.linalg.solve(uu, uy)


def analytic_cross_correlation(model: VarModel, source, target, lag: int, table=None) -> float:
    """Correlation of ``source_{t-lag}`` with ``target_t``.

    In the ``rho_YX(tau) = E[X_{t+tau} Y_t] / ...`` notation this is
    ``rho_{source, target}(lag)``: the target sits at the later time.
    """
    x, y = model.index(source), model.index(target)
    if table is None:
        table = lagged_covariance(model, abs(lag))
    table = table.extended(abs(lag))
    g0 = table.gamma(0)
    if g0[x, x] <= 0 or g0[y, y] <= 0:
        raise DegenerateError("zero variance")
    return float(table.gamma(lag)[y, x] / np.sqrt(g0[x, x] * g0[y, y]))


def sidepath_covariance(model: VarModel, graph: TimeSeriesGraph, source, target,
                        regressors: Sequence | None = None) -> np.ndarray:
    """Covariance of the source innovation with each parent of the target.

    Entry ``i`` is ``sum_r Psi_{W_i r}(tau - g_i) Sigma_{r X}`` for the parent
    ``W_i`` at lag ``g_i``; by default the parents are those of the target
    minus the source node, in sorted order.
    """
    src = _node(graph, source)
    if regressors is None:
        regressors = sorted(parents(graph, target) - {src})
    regressors = [LaggedNode(int(v), int(lag)) for v, lag in regressors]
    if not regressors:
        return np.zeros(0)
    gaps = [src.lag - w.lag for w in regressors]
    psis = psi(model, max(max(gaps), 0))
    sig_x = model.sigma[:, src.var]
    return np.array([psis[gap][w.var] @ sig_x for w, gap in zip(regressors, gaps)])


@dataclass(frozen=True, eq=False)
class TheoremQuantities:
    """Residual moments of the MIT regression in closed form.

    ``w_nodes`` are the target's parents other than the source (minus any
    shared with ``z_nodes``), ``z_nodes`` the parents of the source node.
    """

    c: float
    sigma_x2: float
    sigma_y2: float
    sidepath_cov: np.ndarray
    schur: np.ndarray
    cov_xy: float
    var_y: float
    var_x: float
    w_nodes: tuple
    z_nodes: tuple

    @property
    def mit(self) -> float:
        return self.cov_xy / np.sqrt(self.var_y * self.var_x)

    @property
    def no_sidepath_mit(self) -> float:
        """Value predicted when the sidepath covariance vanishes."""
        return mit_without_sidepaths(self.c, self.sigma_x2, self.sigma_y2)


def mit_without_sidepaths(c, sigma_x2, sigma_y2) -> float:
    return c * np.sqrt(sigma_x2) / np.sqrt(sigma_y2 + c * c * sigma_x2)


def theorem_quantities(model: VarModel, graph: TimeSeriesGraph, source, target,
                       tol: float = DEFAULT_TOL) -> TheoremQuantities:
    """Covariance and variances of the MIT residuals via the Schur complement.

    ``cov_xy = c s2x - c q``, ``var_y = s2y + c^2 s2x - c^2 q`` and
    ``var_x = s2x - q`` with ``q = e' S^-1 e``, where ``e`` is the sidepath
    covariance and ``S`` the covariance of the target's parents given the
    source's parents.
    """
    src = _node(graph, source)
    if src.lag < 1:
        raise ValueError("source lag must be >= 1")
    y = graph.index(target)
    z_nodes = sorted(source_parents(graph, src))
    # parents shared with the source's parents lie before the source innovation
    w_nodes = sorted(parents(graph, y) - {src} - set(z_nodes))
    c = model.coefficient(src.var, y, src.lag)
    s2x = float(model.sigma[src.var, src.var])
    s2y = float(model.sigma[y, y])
    e = sidepath_covariance(model, graph, src, y, w_nodes)

    nw = len(w_nodes)
    if nw:
        lags = [nd.lag for nd in (*w_nodes, *z_nodes)]
        table = lagged_covariance(model, max(lags) - min(lags), tol)
        cov = node_covariance(table, [*w_nodes, *z_nodes])
        schur = schur_complement(cov, range(nw), range(nw, len(lags)))
        _check_conditioning(schur, "Schur complement")
        if np.any(np.diag(schur) * MAX_CONDITION <= np.diag(cov)[:nw]):
            raise SingularityError("a parent of the target is determined by the source's parents")
        quad = float(e @ np.linalg.solve(schur, e))
    else:
        schur = np.zeros((0, 0))
        quad = 0.0
    return TheoremQuantities(
        c=c,
        sigma_x2=s2x,
        sigma_y2=s2y,
        sidepath_cov=e,
        schur=schur,
        cov_xy=c * s2x - c * quad,
        var_y=s2y + c * c * s2x - c * c * quad,
        var_x=s2x - quad,
        w_nodes=tuple(w_nodes),
        z_nodes=tuple(z_nodes),
    )


def analytic_measure(model: VarModel, kind: str, source, target,
                     graph: TimeSeriesGraph | None = None, eps: float = 1e-10) -> float:
    """Population value of CC, MIT, ITY, ITX or MITS from the exact covariances."""
    if graph is None:
        graph = graph_from_model(model)
    src = _node(graph, source)
    y = graph.index(target)
    side = sidepath_nodes(graph, model, src, y, eps) if kind.upper() == "MITS" else ()
    conds = conditions(graph, kind, src, y, side)
    lags = [nd.lag for nd in (src, *conds)]
    table = lagged_covariance(model, max(lags))
    return node_partial_correlation(table, src, LaggedNode(y, 0), conds)
