"""Stationary vector autoregressive processes with Gaussian innovations.

A :class:`VarModel` holds the coefficient matrices ``phi[s - 1]`` (the
effect of all variables at lag ``s`` on the present) and the innovation
covariance ``sigma``.  Row ``i`` of ``phi[s - 1]`` lists the coefficients of
variable ``i``; entry ``phi[s - 1][i, j]`` is the weight of ``X^j_{t-s}`` in
the equation for ``X^i_t``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    CovarianceError,
    DimensionError,
    MissingValueError,
    StationarityError,
)

logger = logging.getLogger(__name__)

STATIONARITY_MARGIN = 1e-10
NEAR_UNIT_ROOT = 0.999
MAX_BURN_IN = 10_000


def _default_names(n):
    if n <= 3:
        return ("X", "Y", "Z")[:n]
    return tuple(f"X{i}" for i in range(n))


@dataclass(frozen=True, eq=False)
class VarModel:
    """VAR(p) process ``X_t = sum_s phi[s-1] X_{t-s} + eps_t``, ``eps_t ~ N(0, sigma)``."""

    phi: np.ndarray
    sigma: np.ndarray
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim == 2:
            phi = phi[np.newaxis]
        sigma = np.array(self.sigma, dtype=float)
        if phi.ndim != 3 or phi.shape[1] != phi.shape[2] or phi.shape[0] < 1:
            raise DimensionError(f"phi must be a stack of square matrices, got shape {phi.shape}")
        n = phi.shape[1]
        if n < 1:
            raise DimensionError("model needs at least one variable")
        if sigma.shape != (n, n):
            raise DimensionError(f"sigma must be {n}x{n}, got {sigma.shape}")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(sigma))):
            raise DimensionError("phi and sigma must be finite")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
            raise CovarianceError("sigma must be symmetric")
        names = tuple(self.var_names) if self.var_names else _default_names(n)
        if len(names) != n:
            raise DimensionError(f"expected {n} variable names, got {len(names)}")
        if len(set(names)) != n:
            raise DimensionError("variable names must be distinct")
        phi.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "var_names", tuple(str(v) for v in names))

    @property
    def n_vars(self) -> int:
        return self.phi.shape[1]

    @property
    def order(self) -> int:
        return self.phi.shape[0]

    def index(self, var) -> int:
        return _resolve(var, self.var_names)

    def coefficient(self, source, target, lag) -> float:
        """Return ``Phi_{target, source}(lag)``; zero beyond the model order."""
        if lag < 1 or lag > self.order:
            return 0.0
        return float(self.phi[lag - 1, self.index(target), self.index(source)])

    def replace(self, phi=None, sigma=None) -> "VarModel":
        return VarModel(
            self.phi if phi is None else phi,
            self.sigma if sigma is None else sigma,
            self.var_names,
        )

    def to_dict(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "order": self.order,
            "phi": self.phi.tolist(),
            "sigma": self.sigma.tolist(),
            "var_names": list(self.var_names),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "VarModel":
        phi = np.asarray(doc["phi"], dtype=float)
        if phi.ndim == 2:
            phi = phi[np.newaxis]
        model = cls(phi, doc["sigma"], tuple(doc.get("var_names") or ()))
        if "n_vars" in doc and int(doc["n_vars"]) != model.n_vars:
            raise DimensionError(f"n_vars={doc['n_vars']} does not match phi ({model.n_vars})")
        if "order" in doc and int(doc["order"]) != model.order:
            raise DimensionError(f"order={doc['order']} does not match phi ({model.order})")
        return model


def _resolve(var, names) -> int:
    if isinstance(var, (int, np.integer)) and not isinstance(var, bool):
        if 0 <= var < len(names):
            return int(var)
        raise KeyError(f"variable index {var} out of range for {len(names)} variables")
    try:
        return names.index(var)
    except ValueError:
        raise KeyError(f"unknown variable {var!r}") from None


def coupled_pair(a, b, c, sigma=None, var_names=("X", "Y")) -> VarModel:
    """Bivariate VAR(1) where X drives Y at lag 1 with coefficient ``c``.

    ``a`` and ``b`` are the lag-1 autodependencies of X and Y.
    """
    phi = np.array([[[a, 0.0], [c, b]]])
    return VarModel(phi, np.eye(2) if sigma is None else sigma, var_names)


def sidepath_triple(c, d, b, sigma=None, var_names=("X", "W", "Y")) -> VarModel:
    """Three-variable VAR(2) with a direct link and one sidepath.

    ``X_{t-2} -> Y_t`` (coefficient ``c``) competes with the path
    ``X_{t-2} -> W_{t-1} -> Y_t`` (coefficients ``d`` then ``b``).
    """
    phi = np.zeros((2, 3, 3))
    phi[0, 1, 0] = d
    phi[0, 2, 1] = b
    phi[1, 2, 0] = c
    return VarModel(phi, np.eye(3) if sigma is None else sigma, var_names)


def companion_matrix(model: VarModel) -> np.ndarray:
    n, p = model.n_vars, model.order
    comp = np.zeros((n * p, n * p))
    comp[:n, :] = np.hstack(list(model.phi))
    if p > 1:
        comp[n:, :-n] = np.eye(n * (p - 1))
    return comp


class ValidationReport(NamedTuple):
    stationary: bool
    spectral_radius: float
    sigma_pd: bool


def validate_model(model: VarModel) -> ValidationReport:
    """Check stationarity (companion spectral radius) and positive definiteness of sigma."""
    if model.phi.shape[1:] != model.sigma.shape:
        raise DimensionError("phi and sigma dimensions disagree")
    radius = float(np.max(np.abs(np.linalg.eigvals(companion_matrix(model)))))
    try:
        chol = np.linalg.cholesky(model.sigma)
        sigma_pd = bool(np.all(np.diag(chol) > 0))
    except np.linalg.LinAlgError:
        sigma_pd = False
    stationary = radius < 1.0 - STATIONARITY_MARGIN
    if stationary and radius > NEAR_UNIT_ROOT:
        warnings.warn(
            f"spectral radius {radius:.6f} is close to one; estimates will be ill-conditioned",
            RuntimeWarning,
            stacklevel=2,
        )
    return ValidationReport(stationary, radius, sigma_pd)


def require_valid(model: VarModel) -> ValidationReport:
    report = validate_model(model)
    if not report.stationary:
        raise StationarityError(f"model is not stationary (spectral radius {report.spectral_radius:.6g})")
    if not report.sigma_pd:
        raise CovarianceError("innovation covariance is not positive definite")
    return report


def default_burn_in(model: VarModel, spectral_radius=None) -> int:
    if spectral_radius is None:
        spectral_radius = validate_model(model).spectral_radius
    steps = 10 * model.order * math.ceil(1.0 / (1.0 - spectral_radius))
    return min(steps, MAX_BURN_IN)


@dataclass(frozen=True, eq=False)
class TimeSeriesData:
    """Observation matrix, one row per time step and one column per variable."""

    values: np.ndarray
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, np.newaxis]
        if values.ndim != 2 or values.shape[0] < 1:
            raise DimensionError(f"values must be a non-empty T x N matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise MissingValueError("time series values must be finite")
        names = tuple(self.var_names) if self.var_names else _default_names(values.shape[1])
        if len(names) != values.shape[1]:
            raise DimensionError(f"{values.shape[1]} columns but {len(names)} names")
        if len(set(names)) != len(names):
            raise DimensionError("variable names must be distinct")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "var_names", tuple(str(v) for v in names))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def index(self, var) -> int:
        return _resolve(var, self.var_names)

    def column(self, var) -> np.ndarray:
        return self.values[:, self.index(var)]


def _innovation_factor(model):
    try:
        return np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError:
        raise CovarianceError("innovation covariance is not positive definite") from None


def simulate(model: VarModel, length: int, seed: int = 0, burn_in: int | None = None) -> TimeSeriesData:
    """Draw a realization of ``length`` steps, starting from zeros.

    The first ``burn_in`` steps are discarded; by default this scales with
    the mixing time ``1 / (1 - spectral radius)``.
    """
    report = require_valid(model)
    if length < 1:
        raise ValueError("length must be at least 1")
    if burn_in is None:
        burn_in = default_burn_in(model, report.spectral_radius)
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    rng = np.random.default_rng(seed)
    chol = _innovation_factor(model)
    n, p = model.n_vars, model.order
    total = burn_in + length
    eps = rng.standard_normal((total, n)) @ chol.T
    x = np.zeros((total + p, n))
    x[p:] = eps
    if p == 1:
        coef = model.phi[0]
        state = np.zeros(n)
        for t in range(total):
            state = coef @ state + eps[t]
            x[t + 1] = state
    else:
        # rows of x are in time order; reverse each window so lag 1 comes first
        stacked = np.hstack(list(model.phi))
        for t in range(p, total + p):
            x[t] += stacked @ x[t - p:t][::-1].ravel()
    return TimeSeriesData(x[p + burn_in:], model.var_names)


def simulate_batch(model: VarModel, length: int, reps: int, rng: np.random.Generator,
                   burn_in: int | None = None) -> np.ndarray:
    """Simulate ``reps`` independent realizations at once; returns (reps, length, N)."""
    report = require_valid(model)
    if burn_in is None:
        burn_in = default_burn_in(model, report.spectral_radius)
    chol = _innovation_factor(model)
    n, p = model.n_vars, model.order
    total = burn_in + length
    x = np.zeros((reps, total + p, n))
    x[:, p:] = rng.standard_normal((reps, total, n)) @ chol.T
    phi_t = np.transpose(model.phi, (0, 2, 1))
    for t in range(p, total + p):
        for s in range(1, p + 1):
            x[:, t] += x[:, t - s] @ phi_t[s - 1]
    return x[:, p + burn_in:]


# -- serialization -----------------------------------------------------------

def load_model(path) -> VarModel:
    with open(path) as fh:
        return VarModel.from_dict(json.load(fh))


def save_model(model: VarModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def write_csv(data: TimeSeriesData, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.var_names)
        for row in data.values:
            writer.writerow([repr(float(v)) for v in row])


def read_csv(path, columns: Sequence[str] | None = None) -> TimeSeriesData:
    """Read a header-plus-rows CSV; rows with missing or non-numeric cells are rejected."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingValueError(f"{path}: empty file") from None
        rows, bad = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                if len(row) != len(header):
                    raise ValueError
                vals = [float(cell) for cell in row]
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError
            except ValueError:
                bad.append(lineno)
                continue
            rows.append(vals)
    if bad:
        shown = ", ".join(str(b) for b in bad[:10])
        more = f" (+{len(bad) - 10} more)" if len(bad) > 10 else ""
        raise MissingValueError(f"{path}: missing or non-numeric values on lines {shown}{more}")
    if not rows:
        raise MissingValueError(f"{path}: no data rows")
    values = np.array(rows)
    if columns:
        idx = [_resolve(c, tuple(header)) for c in columns]
        values, header = values[:, idx], [header[i] for i in idx]
    return TimeSeriesData(values, tuple(header))
