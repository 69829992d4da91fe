import numpy as np
import pytest

from mvtc.analytic import sidepath_covariance
from mvtc.graph import graph_from_model, parents
from mvtc.model import VarModel, validate_model


def random_model(rng, n_vars=None, order=None, density=0.4, scale=0.5, correlated=False):
    """A random stationary VAR with sparse coefficients and positive innovation variances."""
    n = n_vars or int(rng.integers(2, 5))
    p = order or int(rng.integers(1, 4))
    while True:
        mask = rng.random((p, n, n)) < density
        phi = np.where(mask, rng.uniform(-scale, scale, (p, n, n)), 0.0)
        sd = rng.uniform(0.5, 1.5, n)
        if correlated:
            a = rng.normal(size=(n, n)) * 0.3
            corr = np.eye(n) + np.triu(a, 1) + np.triu(a, 1).T
            if np.linalg.eigvalsh(corr).min() < 0.2:
                continue
            sigma = corr * np.outer(sd, sd)
        else:
            sigma = np.diag(sd**2)
        model = VarModel(phi, sigma)
        if validate_model(model).spectral_radius < 0.9:
            return model


def no_sidepath_links(model, graph=None):
    graph = graph or graph_from_model(model)
    out = []
    for src, tgt, lag in sorted(graph.directed_links):
        if src == tgt:
            continue
        e = sidepath_covariance(model, graph, (src, lag), tgt)
        if np.all(np.abs(e) < 1e-14):
            out.append(((src, lag), tgt))
    return out


def model_with_link(rng, **kw):
    """Random model plus one cross link whose sidepath covariance vanishes."""
    while True:
        model = random_model(rng, **kw)
        links = no_sidepath_links(model)
        if links:
            return model, links[int(rng.integers(len(links)))]


def perturb_outside(model, link, rng, scale=0.5, density=0.4):
    """Redraw every coefficient except the link, the source and target variances."""
    (x, tau), y = link
    n, p = model.n_vars, model.order
    while True:
        mask = rng.random((p, n, n)) < density
        phi = np.where(mask, rng.uniform(-scale, scale, (p, n, n)), 0.0)
        phi[tau - 1, y, x] = model.phi[tau - 1, y, x]
        sd2 = rng.uniform(0.25, 2.25, n)
        sd2[x] = model.sigma[x, x]
        sd2[y] = model.sigma[y, y]
        new = VarModel(phi, np.diag(sd2), model.var_names)
        if validate_model(new).spectral_radius >= 0.9:
            continue
        g = graph_from_model(new)
        if (x, tau) in parents(g, y) and link in no_sidepath_links(new, g):
            return new


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
