"""Coupling strength in multivariate autoregressive time series via time series graphs."""
from .analytic import (
    CovarianceTable,
    TheoremQuantities,
    analytic_cross_correlation,
    analytic_measure,
    analytic_regression,
    lagged_covariance,
    psi,
    sidepath_covariance,
    theorem_quantities,
)
from .graph import (
    LaggedNode,
    TimeSeriesGraph,
    ancestors,
    graph_from_model,
    neighbors,
    parents,
    sidepath_nodes,
)
from .infer import InferenceConfig, infer_graph, infer_parents
from .measures import (
    MeasureResult,
    bootstrap_ci,
    contemporaneous_mit,
    coupling_measure,
    cross_correlation_function,
    mits,
    significance,
)
from .model import TimeSeriesData, VarModel, coupled_pair, sidepath_triple, simulate, validate_model

__version__ = "0.1.0"

__all__ = [
    "CovarianceTable", "TheoremQuantities", "analytic_cross_correlation", "analytic_measure",
    "analytic_regression", "lagged_covariance", "psi", "sidepath_covariance", "theorem_quantities",
    "LaggedNode", "TimeSeriesGraph", "ancestors", "graph_from_model", "neighbors", "parents",
    "sidepath_nodes", "InferenceConfig", "infer_graph", "infer_parents", "MeasureResult",
    "bootstrap_ci", "contemporaneous_mit", "coupling_measure", "cross_correlation_function", "mits",
    "significance", "TimeSeriesData", "VarModel", "coupled_pair", "sidepath_triple", "simulate",
    "validate_model",
]
