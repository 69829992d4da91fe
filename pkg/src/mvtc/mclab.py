"""Monte Carlo sampling distributions of the coupling measures.

Short series are simulated in batches and each replication's estimate is
converted to a t-statistic, which under independence should follow a
Student-t with ``n_eff - 2 - q`` degrees of freedom.  Replications are
split into fixed-size chunks with their own seed-derived streams, so results
do not depend on how many threads run them.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from ._parallel import map_ordered
from .graph import LaggedNode, TimeSeriesGraph, conditions, graph_from_model, sidepath_nodes
from .model import VarModel, simulate_batch

CHUNK = 500
DEGENERATE = 1 - 1e-12


@dataclass(frozen=True, eq=False)
class EnsembleSample:
    kind: str
    t_values: np.ndarray
    df: int
    model_tag: str = ""
    excluded: int = 0
    estimates: np.ndarray = field(default=None, repr=False)

    @property
    def reps(self) -> int:
        return len(self.t_values)


class KSResult(NamedTuple):
    D: float
    p: float


@dataclass(frozen=True, eq=False)
class QQPoints:
    theoretical: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    df: int
    kind: str
    degenerate: bool

    def rows(self):
        return zip(self.theoretical, self.empirical)


def _batch_estimates(sims: np.ndarray, src: LaggedNode, tgt: int, conds: Sequence[LaggedNode]):
    length = sims.shape[1]
    offset = max([src.lag, *(c.lag for c in conds)])
    take = lambda v, lag: sims[:, offset - lag:length - lag, v]  # noqa: E731
    x = take(src.var, src.lag)
    y = take(tgt, 0)
    x = x - x.mean(axis=1, keepdims=True)
    y = y - y.mean(axis=1, keepdims=True)
    if conds:
        u = np.stack([take(c.var, c.lag) for c in conds], axis=2)
        u = u - u.mean(axis=1, keepdims=True)
        qmat, _ = np.linalg.qr(u)
        x = x - np.einsum("rnk,rk->rn", qmat, np.einsum("rnk,rn->rk", qmat, x))
        y = y - np.einsum("rnk,rk->rn", qmat, np.einsum("rnk,rn->rk", qmat, y))
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.einsum("rn,rn->r", x, y) / np.sqrt(np.einsum("rn,rn->r", x, x) * np.einsum("rn,rn->r", y, y))
    return rho, length - offset


def _tag(model: VarModel) -> str:
    return json.dumps({"phi": model.phi.tolist(), "sigma": model.sigma.tolist()})


def run_ensembles(model: VarModel, kinds: Sequence[str], source, target, length: int, reps: int,
                  seed: int = 0, graph: TimeSeriesGraph | None = None,
                  burn_in: int | None = None) -> dict[str, EnsembleSample]:
    """Estimate several measures on the same ``reps`` simulated series.

    Conditions come from the true graph of ``model`` unless ``graph`` is given.
    """
    if reps < 100:
        raise ValueError("reps must be at least 100")
    if graph is None:
        graph = graph_from_model(model)
    src = LaggedNode(model.index(source[0]), int(source[1]))
    y = model.index(target)
    plans = {}
    for kind in kinds:
        kind = kind.upper()
        side = sidepath_nodes(graph, model, src, y) if kind == "MITS" else ()
        plans[kind] = conditions(graph, kind, src, y, side)
    sizes = [CHUNK] * (reps // CHUNK) + ([reps % CHUNK] if reps % CHUNK else [])
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = root.spawn(len(sizes))

    def work(args):
        ss, size = args
        sims = simulate_batch(model, length, size, np.random.default_rng(ss), burn_in)
        return {k: _batch_estimates(sims, src, y, c) for k, c in plans.items()}

    chunks = map_ordered(work, zip(seeds, sizes))
    out = {}
    tag = _tag(model)
    for kind, conds in plans.items():
        rho = np.concatenate([ch[kind][0] for ch in chunks])
        n_eff = chunks[0][kind][1]
        df = n_eff - 2 - len(conds)
        ok = np.isfinite(rho) & (np.abs(rho) < DEGENERATE)
        r = rho[ok]
        t = r * np.sqrt(df / (1 - r * r))
        out[kind] = EnsembleSample(kind, t, df, tag, int((~ok).sum()), r)
    return out


def run_ensemble(model: VarModel, kind: str, source, target, length: int, reps: int,
                 seed: int = 0, graph: TimeSeriesGraph | None = None,
                 burn_in: int | None = None) -> EnsembleSample:
    """t-statistics of one measure over ``reps`` independent simulations of ``length`` steps."""
    return run_ensembles(model, [kind], source, target, length, reps, seed, graph, burn_in)[kind.upper()]


def ks_test(sample: EnsembleSample) -> KSResult:
    """One-sample Kolmogorov-Smirnov test against Student-t with ``sample.df`` df."""
    x = np.sort(np.asarray(sample.t_values, dtype=float))
    n = x.size
    if n < 100:
        raise ValueError("need at least 100 values")
    cdf = stats.t.cdf(x, sample.df)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    return KSResult(d, float(stats.kstwobign.sf(d * math.sqrt(n))))


def qq_points(sample: EnsembleSample) -> QQPoints:
    """Sorted t-values against Student-t quantiles at positions ``(i - 0.5) / n``.

    ``stderr`` is the asymptotic standard error of each sample quantile.
    """
    emp = np.sort(np.asarray(sample.t_values, dtype=float))
    n = emp.size
    if n < 100:
        raise ValueError("need at least 100 values")
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = stats.t.ppf(probs, sample.df)
    stderr = np.sqrt(probs * (1 - probs) / n) / stats.t.pdf(theo, sample.df)
    degenerate = bool(np.ptp(emp) == 0)
    return QQPoints(theo, emp, stderr, sample.df, sample.kind, degenerate)


def ks_distances(model: VarModel, kinds: Sequence[str], source, target, length: int, reps: int,
                 meta_reps: int, seed: int = 0) -> dict[str, np.ndarray]:
    """KS distance of every kind over ``meta_reps`` independent ensembles."""
    out = {k.upper(): [] for k in kinds}
    for ss in np.random.SeedSequence(seed).spawn(meta_reps):
        ens = run_ensembles(model, kinds, source, target, length, reps, ss)
        for k, sample in ens.items():
            out[k].append(ks_test(sample).D)
    return {k: np.array(v) for k, v in out.items()}


def write_qq_csv(points: Sequence[QQPoints], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theoretical", "empirical", "kind", "df"])
        for pts in points:
            for th, em in pts.rows():
                w.writerow([repr(float(th)), repr(float(em)), pts.kind, pts.df])


def summary(sample: EnsembleSample, ks: KSResult | None = None) -> dict:
    ks = ks or ks_test(sample)
    return {
        "kind": sample.kind,
        "D": ks.D,
        "p": ks.p,
        "reps": sample.reps,
        "excluded_count": sample.excluded,
        "df": sample.df,
    }
