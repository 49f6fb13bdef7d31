"""Outcome models with treatment interactions.

Both families use the design ``[1, x, t, x * t]`` over one-hot encoded
features ``x`` and a binary treatment ``t``:

* linear:   E[Y | x, t] = b0 + b1.x + b2 t + b3.x t   (least squares)
* logistic: P(Y = 1 | x, t) = sigmoid(b0 + b1.x + b2 t + b3.x t)   (IRLS)

For the logistic family outcomes are coded -1/+1 and the mean outcome is
``2 P(Y = 1) - 1``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .errors import (
    EmptyDataset,
    NonBinaryOutcome,
    SingleClassTarget,
    UnknownLevelAtPredictTime,
    WidthMismatch,
)

CATEGORICAL = "categorical"
NUMERIC = "numeric"


@dataclass(frozen=True)
class Column:
    feature: str
    level: Optional[str] = None  # None for numeric passthrough


@dataclass(frozen=True, eq=False)
class Encoding:
    """Column layout of a one-hot design matrix.

    ``schema`` is the ordered list of ``(feature, kind)``; ``levels`` maps each
    categorical feature to its levels in first-appearance order. Numeric
    columns are optionally standardized with the stored ``center``/``scale``.
    """

    schema: tuple
    levels: dict
    columns: tuple
    center: dict = field(default_factory=dict)
    scale: dict = field(default_factory=dict)

    @property
    def width(self):
        return len(self.columns)

    @property
    def feature_names(self):
        return tuple(name for name, _ in self.schema)

    def transform(self, rows):
        rows = list(rows)
        out = np.zeros((len(rows), self.width))
        pos = 0
        for name, kind in self.schema:
            if kind == NUMERIC:
                vals = np.array([float(_get(r, name)) for r in rows], dtype=np.float64)
                if name in self.center:
                    vals = (vals - self.center[name]) / self.scale[name]
                out[:, pos] = vals
                pos += 1
                continue
            lookup = {lvl: j for j, lvl in enumerate(self.levels[name])}
            for i, r in enumerate(rows):
                key = str(_get(r, name))
                if key not in lookup:
                    raise UnknownLevelAtPredictTime(f"{name}={key!r} was not seen in training")
                out[i, pos + lookup[key]] = 1.0
            pos += len(lookup)
        return out

    def to_dict(self):
        return {
            "schema": [list(s) for s in self.schema],
            "levels": {k: list(v) for k, v in self.levels.items()},
            "columns": [[c.feature, c.level] for c in self.columns],
            "center": dict(self.center),
            "scale": dict(self.scale),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            tuple((s[0], s[1]) for s in data["schema"]),
            {k: tuple(v) for k, v in data["levels"].items()},
            tuple(Column(c[0], c[1]) for c in data["columns"]),
            dict(data.get("center", {})),
            dict(data.get("scale", {})),
        )


def _get(row, name):
    if hasattr(row, "features"):
        return row.features[name]
    return row[name]


def one_hot_encode(rows, schema, standardize=False):
    """Full one-hot encoding (no dropped reference level).

    Returns ``(design, encoding)``. Categorical levels are ordered by first
    appearance; values are compared as strings.
    """
    rows = list(rows)
    if not rows:
        raise EmptyDataset("cannot encode an empty row set")
    schema = tuple((name, kind) for name, kind in schema)
    levels, columns, center, scale = {}, [], {}, {}
    for name, kind in schema:
        if kind == NUMERIC:
            columns.append(Column(name))
            if standardize:
                vals = np.array([float(_get(r, name)) for r in rows])
                sd = vals.std()
                center[name] = float(vals.mean())
                scale[name] = float(sd) if sd > 0 else 1.0
        elif kind == CATEGORICAL:
            seen = {}
            for r in rows:
                seen.setdefault(str(_get(r, name)), None)
            levels[name] = tuple(seen)
            columns.extend(Column(name, lvl) for lvl in levels[name])
        else:
            raise ValueError(f"feature {name!r}: unknown kind {kind!r}")
    enc = Encoding(schema, levels, tuple(columns), center, scale)
    return enc.transform(rows), enc


@dataclass(frozen=True, eq=False)
class FitResult:
    family: str
    beta0: float
    beta1: np.ndarray
    beta2: float
    beta3: np.ndarray
    encoding: Optional[Encoding]
    diagnostics: dict
    converged: bool = True
    iterations: int = 0
    ridge: float = 0.0

    @property
    def width(self):
        return self.beta1.shape[0]

    @property
    def coef(self):
        """Stacked ``[b0, b1..., b2, b3...]`` matching :func:`interaction_design`."""
        return np.concatenate([[self.beta0], self.beta1, [self.beta2], self.beta3])

    def to_dict(self):
        return {
            "family": self.family,
            "beta0": self.beta0,
            "beta1": self.beta1.tolist(),
            "beta2": self.beta2,
            "beta3": self.beta3.tolist(),
            "encoding": None if self.encoding is None else self.encoding.to_dict(),
            "diagnostics": dict(self.diagnostics),
            "converged": self.converged,
            "iterations": self.iterations,
            "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, data):
        enc = Encoding.from_dict(data["encoding"]) if data.get("encoding") else None
        return cls(
            data["family"], float(data["beta0"]), np.asarray(data["beta1"], dtype=float),
            float(data["beta2"]), np.asarray(data["beta3"], dtype=float), enc,
            dict(data.get("diagnostics", {})), bool(data.get("converged", True)),
            int(data.get("iterations", 0)), float(data.get("ridge", 0.0)),
        )


def _split(coef, width):
    return float(coef[0]), coef[1 : 1 + width].copy(), float(coef[1 + width]), coef[2 + width :].copy()


def interaction_design(x, t, intercept=True):
    """``[1, x, t, x * t]`` for an (m, d) feature block and length-m treatment."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if t.shape[0] == 1 and x.shape[0] > 1:
        t = np.full(x.shape[0], t[0])
    if t.shape[0] != x.shape[0]:
        raise WidthMismatch("treatment length differs from the number of rows")
    parts = [x, t[:, None], x * t[:, None]]
    if intercept:
        parts.insert(0, np.ones((x.shape[0], 1)))
    return np.hstack(parts)


def _check_inputs(design, treatment, outcome):
    x = np.atleast_2d(np.asarray(design, dtype=np.float64))
    t = np.asarray(treatment, dtype=np.float64).reshape(-1)
    y = np.asarray(outcome, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise EmptyDataset("no rows to fit")
    if not (x.shape[0] == t.shape[0] == y.shape[0]):
        raise WidthMismatch("design, treatment and outcome differ in length")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValueError("treatment must be 0/1")
    return x, t, y


def fit_linear(design, treatment, outcome, encoding=None):
    """Least squares with an unpenalized intercept.

    Solved on centered columns by an SVD-based solver, which returns the
    minimum-norm slope vector when the design is rank deficient (full one-hot
    blocks are). The intercept then restores the means.
    """
    x, t, y = _check_inputs(design, treatment, outcome)
    z = interaction_design(x, t, intercept=False)
    z_mean = z.mean(axis=0)
    y_mean = y.mean()
    slopes, *_ = np.linalg.lstsq(z - z_mean, y - y_mean, rcond=None)
    coef = np.concatenate([[y_mean - z_mean @ slopes], slopes])
    fitted = interaction_design(x, t) @ coef
    resid = y - fitted
    sst = float(np.sum((y - y_mean) ** 2))
    r2 = 0.0 if sst == 0.0 else 1.0 - float(np.sum(resid**2)) / sst
    diag = {"rmse": float(np.sqrt(np.mean(resid**2))), "r2": r2}
    b0, b1, b2, b3 = _split(coef, x.shape[1])
    return FitResult("linear", b0, b1, b2, b3, encoding, diag, True, 1, 0.0)


def _penalized_loglik(z, y01, coef, penalty):
    eta = z @ coef
    ll = -np.sum(y01 * np.logaddexp(0.0, -eta) + (1.0 - y01) * np.logaddexp(0.0, eta))
    return ll - 0.5 * np.sum(penalty * coef**2)


def penalized_gradient(fit_or_coef, design, treatment, outcome, ridge=None):
    """Gradient of the penalized log-likelihood at the given coefficients."""
    if isinstance(fit_or_coef, FitResult):
        coef, ridge = fit_or_coef.coef, fit_or_coef.ridge if ridge is None else ridge
    else:
        coef = np.asarray(fit_or_coef, dtype=np.float64)
    x, t, y = _check_inputs(design, treatment, outcome)
    z = interaction_design(x, t)
    y01 = (y == 1.0).astype(np.float64)
    penalty = np.full(z.shape[1], float(ridge))
    penalty[0] = 0.0
    return z.T @ (y01 - expit(z @ coef)) - penalty * coef


def fit_logistic(design, treatment, outcome, ridge=1e-6, max_iter=100, tol=1e-8, encoding=None):
    """Penalized maximum likelihood by Newton-Raphson / IRLS.

    The intercept is not penalized; every other coefficient carries
    ``ridge / 2 * b**2``. Each Newton step is halved until the penalized
    likelihood does not decrease. Stops when the largest coefficient change
    falls below ``tol`` or after ``max_iter`` iterations.
    """
    x, t, y = _check_inputs(design, treatment, outcome)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise NonBinaryOutcome("logistic outcomes must be coded -1/+1")
    if np.all(y == y[0]):
        raise SingleClassTarget("outcome takes a single value")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    y01 = (y == 1.0).astype(np.float64)
    z = interaction_design(x, t)
    penalty = np.full(z.shape[1], float(ridge))
    penalty[0] = 0.0
    coef = np.zeros(z.shape[1])
    base = y01.mean()
    coef[0] = np.log(base / (1.0 - base))
    current = _penalized_loglik(z, y01, coef, penalty)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(z @ coef)
        w = p * (1.0 - p)
        grad = z.T @ (y01 - p) - penalty * coef
        hess = (z * w[:, None]).T @ z + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(50):
            trial = coef + scale * step
            value = _penalized_loglik(z, y01, trial, penalty)
            if value >= current - 1e-12 * max(1.0, abs(current)):
                break
            scale *= 0.5
        change = np.max(np.abs(trial - coef))
        coef, current = trial, value
        if change < tol:
            converged = True
            break
    prob = expit(z @ coef)
    diag = {"auc": auc(y01, prob), "accuracy": float(np.mean((prob >= 0.5) == (y01 == 1.0)))}
    b0, b1, b2, b3 = _split(coef, x.shape[1])
    return FitResult("logistic", b0, b1, b2, b3, encoding, diag, converged, it, float(ridge))


def auc(labels, scores):
    """Area under the ROC curve (Mann-Whitney; tied scores count one half)."""
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def predict_mu(fit, x_encoded, t):
    """Mean potential outcome under treatment ``t`` at encoded covariates.

    Accepts a single row or an (m, width) block; returns a float or array.
    """
    x = np.asarray(x_encoded, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != fit.width:
        raise WidthMismatch(f"expected {fit.width} encoded columns, got {x.shape[1]}")
    eta = interaction_design(x, np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))) @ fit.coef
    mu = 2.0 * expit(eta) - 1.0 if fit.family == "logistic" else eta
    return float(mu[0]) if single else mu
