"""Reward functions a principal can publish, in expectation and on samples.

Five kinds are supported:

``ATO``  average outcome among the treated
``ATT``  average (outcome - estimated untreated outcome) among the treated
``TO``   total outcome of the treated
``TT``   total (outcome - estimated untreated outcome) of the treated
``WTT``  ``TT`` with every treated unit weighted by a positive ``g(x)``

Expected values use the exact finite-support closed forms. For the averages
this is the ratio of expectations ``E[score * pi] / E[pi]``; the finite-sample
ratio in :func:`realized_reward` has the same expectation up to the
probability ``(1 - P(T=1))**n`` that nobody is treated.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import EmptySample, InvalidPolicy, MissingEstimator, MissingWeight
from .population import Mu0Estimator


class RewardKind(str, Enum):
    ATO = "ATO"
    ATT = "ATT"
    TO = "TO"
    TT = "TT"
    WTT = "WeightedTT"

    @property
    def needs_estimator(self):
        return self in (RewardKind.ATT, RewardKind.TT, RewardKind.WTT)

    @property
    def is_average(self):
        return self in (RewardKind.ATO, RewardKind.ATT)


ALL_KINDS = tuple(RewardKind)


@dataclass(frozen=True, eq=False)
class RewardSpec:
    kind: RewardKind
    mu0_hat: Optional[Mu0Estimator] = None
    weight_g: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = RewardKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.needs_estimator and self.mu0_hat is None:
            raise MissingEstimator(f"{kind.value} needs an untreated-outcome estimator")
        if not kind.needs_estimator and self.mu0_hat is not None:
            raise ValueError(f"{kind.value} does not use an estimator")
        if kind is RewardKind.WTT:
            if self.weight_g is None:
                raise MissingWeight("WeightedTT needs a weight table g")
            g = np.array(self.weight_g, dtype=np.float64, copy=True).reshape(-1)
            if not np.all(g > 0.0) or not np.all(np.isfinite(g)):
                raise MissingWeight("WeightedTT weights must be finite and strictly positive")
            g.setflags(write=False)
            object.__setattr__(self, "weight_g", g)
        elif self.weight_g is not None:
            raise ValueError(f"{kind.value} does not take a weight table")

    def to_dict(self):
        out = {"kind": self.kind.value}
        if self.mu0_hat is not None:
            out["mu0_hat"] = self.mu0_hat.to_dict()
        if self.weight_g is not None:
            out["g"] = self.weight_g.tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        mu0_hat = Mu0Estimator.from_dict(data["mu0_hat"]) if data.get("mu0_hat") else None
        return cls(RewardKind(data["kind"]), mu0_hat, data.get("g"))


def make_spec(kind, model=None, mu0_hat=None, weight_g=None):
    """Convenience constructor; fills an unbiased estimator from an X-only model."""
    kind = RewardKind(kind)
    if kind.needs_estimator and mu0_hat is None and model is not None:
        mu0_hat = Mu0Estimator.unbiased(model)
    if not kind.needs_estimator:
        mu0_hat = None
    return RewardSpec(kind, mu0_hat, weight_g if kind is RewardKind.WTT else None)


def _weights_at_points(spec, model):
    g = spec.weight_g
    if g.shape[0] < model.n_x:
        raise MissingWeight(f"weight table has {g.shape[0]} entries, model needs {model.n_x}")
    return g[model.x_ids]


def point_scores(spec, model):
    """Per-support-point score s such that totals are ``n * sum(p * s * pi)``.

    For averages the score is the per-unit quantity being averaged.
    """
    kind = spec.kind
    if kind in (RewardKind.ATO, RewardKind.TO):
        return np.asarray(model.mu1, dtype=np.float64)
    effect = model.mu1 - spec.mu0_hat.at_points(model)
    if kind is RewardKind.WTT:
        return _weights_at_points(spec, model) * effect
    return effect


def expected_reward(spec, model, policy):
    """Exact expected reward of ``policy`` under ``model``."""
    pi = policy.treat_prob
    if pi.shape[0] != model.size:
        raise InvalidPolicy(f"policy has {pi.shape[0]} entries, support has {model.size}")
    s = point_scores(spec, model)
    weighted = model.probs * pi
    if spec.kind.is_average:
        mass = weighted.sum()
        if mass <= 0.0:
            return 0.0
        return float(np.dot(weighted, s) / mass)
    return float(model.n * np.dot(weighted, s))


def realized_reward(spec, x_ids, treated, outcomes, mu0_hat=None):
    """Literal finite-sample statistic on observed rows.

    ``x_ids``, ``treated`` and ``outcomes`` are equal-length sequences. The
    estimator defaults to the one carried by ``spec``.
    """
    x = np.asarray(x_ids, dtype=np.int64)
    t = np.asarray(treated, dtype=np.float64)
    y = np.asarray(outcomes, dtype=np.float64)
    if x.size == 0:
        raise EmptySample("no rows")
    if not (x.shape == t.shape == y.shape):
        raise EmptySample("x, treatment and outcome columns differ in length")
    kind = spec.kind
    if kind.needs_estimator:
        est = mu0_hat if mu0_hat is not None else spec.mu0_hat
        if est is None:
            raise MissingEstimator(f"{kind.value} needs an untreated-outcome estimator")
        y = y - est.estimates[x]
    if kind is RewardKind.WTT:
        y = y * spec.weight_g[x]
    total = float(np.dot(y, t))
    if kind.is_average:
        count = t.sum()
        return total / count if count > 0 else 0.0
    return total


def realized_reward_batch(spec, x_ids, treated, outcomes, mu0_hat=None):
    """:func:`realized_reward` over a batch: arrays of shape (reps, n)."""
    x = np.asarray(x_ids, dtype=np.int64)
    t = np.asarray(treated, dtype=np.float64)
    y = np.asarray(outcomes, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise EmptySample("expected a non-empty (reps, n) batch")
    kind = spec.kind
    if kind.needs_estimator:
        est = mu0_hat if mu0_hat is not None else spec.mu0_hat
        y = y - est.estimates[x]
    if kind is RewardKind.WTT:
        y = y * spec.weight_g[x]
    total = np.einsum("ij,ij->i", y, t)
    if kind.is_average:
        count = t.sum(axis=1)
        return np.where(count > 0, total / np.where(count > 0, count, 1.0), 0.0)
    return total


def simulate_population(model, policy, reps, rng, noise_sd=1.0, n=None):
    """Draw ``reps`` independent treatment populations of size ``n``.

    Covariates follow ``model.probs``, treatment is Bernoulli(pi) and the
    outcome is the mean potential outcome of the received arm plus Gaussian
    noise. Returns ``(support_index, x_ids, treated, outcomes)`` arrays of
    shape (reps, n).
    """
    n = model.n if n is None else int(n)
    idx = rng.choice(model.size, size=(reps, n), p=model.probs)
    t = (rng.random((reps, n)) < policy.treat_prob[idx]).astype(np.float64)
    mean = np.where(t == 1.0, model.mu1[idx], model.mu0[idx])
    y = mean + noise_sd * rng.standard_normal((reps, n))
    return idx, model.x_ids[idx], t, y
