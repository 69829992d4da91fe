import csv

import numpy as np
import pytest

from mvtc.errors import LengthError
from mvtc.graph import LaggedNode, graph_from_model
from mvtc.infer import InferenceConfig, infer_graph, infer_parents, write_links_csv
from mvtc.model import VarModel, coupled_pair, simulate

TRUE_Y = {LaggedNode(0, 1), LaggedNode(1, 1)}


def binomial_band(n, p):
    mean = n * p
    half = 1.96 * np.sqrt(n * p * (1 - p))
    return mean - half, mean + half


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(alpha=0), dict(alpha=1), dict(tau_max=0),
                                    dict(max_conds=-1), dict(max_iters=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            InferenceConfig(**kw)

    def test_defaults(self):
        assert InferenceConfig() == InferenceConfig(10, 0.05, 3, 10)


class TestParents:
    def test_true_parents_found(self):
        m = coupled_pair(0.5, 0.4, 0.3)
        cfg = InferenceConfig(tau_max=5)
        found = [infer_parents(simulate(m, 10_000, seed=s), "Y", cfg) for s in range(100)]
        assert sum(TRUE_Y <= f for f in found) >= 98
        # extra parents are the false positives the test level allows for
        extras = sum(len(f - TRUE_Y) for f in found)
        assert extras / (100 * 8) < 1.5 * cfg.alpha

    def test_null_calibration(self):
        m = VarModel(np.zeros((1, 3, 3)), np.eye(3))
        cfg = InferenceConfig(tau_max=5)
        false = sum(len(infer_parents(simulate(m, 2000, seed=s), y, cfg))
                    for s in range(100) for y in range(3))
        lo, hi = binomial_band(300 * 15, cfg.alpha)
        assert lo <= false <= hi

    def test_absent_coupling(self):
        m = coupled_pair(0.5, 0.4, 0.0)
        cfg = InferenceConfig(tau_max=5)
        hits = sum(sum(p.var == 0 for p in infer_parents(simulate(m, 10_000, seed=s), "Y", cfg))
                   for s in range(100))
        lo, hi = binomial_band(100 * 5, cfg.alpha)
        assert hits <= hi

    def test_too_short(self):
        with pytest.raises(LengthError):
            infer_parents(simulate(coupled_pair(0.5, 0.4, 0.3), 12), 0, InferenceConfig())

    def test_no_conditioning_keeps_marginal_candidates(self):
        d = simulate(coupled_pair(0.9, 0.9, 0.3), 3000, seed=1)
        loose = infer_parents(d, "Y", InferenceConfig(tau_max=5, max_conds=0))
        tight = infer_parents(d, "Y", InferenceConfig(tau_max=5))
        assert tight < loose and len(loose) >= 8


class TestGraph:
    def test_deterministic(self):
        d = simulate(coupled_pair(0.5, 0.4, 0.3), 3000, seed=2)
        a, b = infer_graph(d), infer_graph(d)
        assert a.graph == b.graph and a.links == b.links

    def test_output_invariants(self):
        for seed in range(5):
            res = infer_graph(simulate(coupled_pair(0.5, 0.4, 0.3), 5000, seed=seed))
            assert res.graph.directed_links <= res.candidates.directed_links
            assert {(r.source.var, r.target, r.source.lag) for r in res.links} == res.graph.directed_links
            for r in res.links:
                assert r.source.lag >= 1 and r.p_value < 0.05 and r.kind == "MIT"

    def test_recovers_true_links(self):
        truth = graph_from_model(coupled_pair(0.5, 0.4, 0.3)).directed_links
        for seed in range(10):
            res = infer_graph(simulate(coupled_pair(0.5, 0.4, 0.3), 10_000, seed=seed))
            assert truth <= res.graph.directed_links

    def test_contemporaneous_only(self):
        m = VarModel(np.zeros((1, 2, 2)), [[1, 0.5], [0.5, 1]])
        directed = 0
        for seed in range(30):
            res = infer_graph(simulate(m, 10_000, seed=seed))
            assert res.graph.contemporaneous_links == {(0, 1)}
            assert res.contemporaneous[0].estimate == pytest.approx(0.5, abs=0.05)
            directed += len(res.graph.directed_links)
        assert directed / (30 * 40) < 1.5 * 0.05

    def test_consistency_drift(self):
        m = coupled_pair(0.5, 0.4, 0.1)
        cfg = InferenceConfig(tau_max=3)
        rates = []
        for t in (500, 2000, 10_000):
            hits = sum(infer_graph(simulate(m, t, seed=s), cfg).graph.has_link("X", "Y", 1)
                       for s in range(40))
            rates.append(hits / 40)
        assert rates == sorted(rates) and rates[-1] == 1.0

    def test_too_short(self):
        with pytest.raises(LengthError):
            infer_graph(simulate(coupled_pair(0.5, 0.4, 0.3), 10))

    def test_links_csv(self, tmp_path):
        res = infer_graph(simulate(coupled_pair(0.5, 0.4, 0.3), 5000, seed=3), InferenceConfig(tau_max=2))
        path = tmp_path / "links.csv"
        write_links_csv(res, path)
        rows = list(csv.DictReader(open(path)))
        assert set(rows[0]) == {"source", "target", "lag", "mit", "p_value", "ci_low", "ci_high"}
        got = {(r["source"], r["target"], int(r["lag"])) for r in rows}
        assert {("X", "Y", 1), ("X", "X", 1), ("Y", "Y", 1)} <= got
        assert all(float(r["p_value"]) < 0.05 for r in rows)
