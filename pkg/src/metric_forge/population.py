"""Finite-population models, treatment policies and untreated-outcome estimators.

A :class:`PopulationModel` is a finite support of covariate points, each
either a bare ``x_id`` (full information) or an ``(x_id, u_id)`` pair when the
agent sees extra covariates ``U`` the principal does not. Every model carries
the probability of each point and the mean untreated / treated outcomes there.
Arrays are stored read-only; all types are frozen after construction.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EstimatorSupportGap,
    InvalidPolicy,
    LengthMismatch,
    NegativeProbability,
    NonPositiveN,
    PositivityViolation,
    ProbabilitySumOutOfTolerance,
    UnknownPoint,
)

INGEST_TOL = 1e-9
SUM_TOL = 1e-12


def _frozen(values, dtype=np.float64):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CovariatePoint:
    x_id: int
    u_id: Optional[int] = None

    def as_json(self):
        return self.x_id if self.u_id is None else [self.x_id, self.u_id]


def _as_point(item):
    if isinstance(item, CovariatePoint):
        return item
    if isinstance(item, (tuple, list, np.ndarray)):
        if len(item) == 1:
            return CovariatePoint(int(item[0]))
        if len(item) == 2:
            return CovariatePoint(int(item[0]), int(item[1]))
        raise UnknownPoint(f"support entry {item!r} is neither x nor (x, u)")
    return CovariatePoint(int(item))


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """Validated finite population.

    Build with :func:`make_population`; the constructor assumes its inputs are
    already consistent.
    """

    x_ids: np.ndarray
    u_ids: Optional[np.ndarray]
    probs: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    n: int
    n_x: int
    n_u: Optional[int] = None
    x_labels: Optional[tuple] = None
    _index: dict = field(default=None, repr=False, compare=False)

    @property
    def size(self):
        return self.probs.shape[0]

    @property
    def has_u(self):
        return self.u_ids is not None

    @property
    def tau(self):
        return self.mu1 - self.mu0

    @property
    def support(self):
        if self.u_ids is None:
            return tuple(CovariatePoint(int(x)) for x in self.x_ids)
        return tuple(CovariatePoint(int(x), int(u)) for x, u in zip(self.x_ids, self.u_ids))

    def index_of(self, point):
        """Position of ``point`` (a CovariatePoint, int or (x, u) pair) in the support."""
        key = _as_point(point)
        try:
            return self._index[(key.x_id, key.u_id)]
        except KeyError:
            raise UnknownPoint(f"{key} is not in the support") from None

    def swapped(self):
        """The same population with treated and untreated outcomes exchanged."""
        return PopulationModel(
            self.x_ids, self.u_ids, self.probs, self.mu1, self.mu0, self.n,
            self.n_x, self.n_u, self.x_labels, self._index,
        )

    def with_probs(self, probs):
        return make_population(
            self.support, probs, self.mu0, self.mu1, self.n,
            n_u=self.n_u, n_x=self.n_x, x_labels=self.x_labels,
        )

    def to_dict(self):
        out = {
            "support": [p.as_json() for p in self.support],
            "probs": self.probs.tolist(),
            "mu0": self.mu0.tolist(),
            "mu1": self.mu1.tolist(),
            "n": self.n,
        }
        if self.u_ids is not None:
            out["u_support"] = self.n_u
        if self.x_labels is not None:
            out["x_labels"] = list(self.x_labels)
        return out

    @classmethod
    def from_dict(cls, data):
        return make_population(
            data["support"], data["probs"], data["mu0"], data["mu1"], data["n"],
            n_u=data.get("u_support"), x_labels=data.get("x_labels"),
        )

    def __eq__(self, other):
        if not isinstance(other, PopulationModel):
            return NotImplemented
        same_u = (self.u_ids is None and other.u_ids is None) or (
            self.u_ids is not None
            and other.u_ids is not None
            and np.array_equal(self.u_ids, other.u_ids)
        )
        return (
            same_u
            and self.n == other.n
            and np.array_equal(self.x_ids, other.x_ids)
            and np.array_equal(self.probs, other.probs)
            and np.array_equal(self.mu0, other.mu0)
            and np.array_equal(self.mu1, other.mu1)
        )

    __hash__ = None


def make_population(support, probs, mu0, mu1, n, *, n_u=None, n_x=None, x_labels=None):
    """Validate inputs and build an immutable :class:`PopulationModel`.

    ``support`` entries may be ints (``x_id``), ``(x_id, u_id)`` pairs or
    :class:`CovariatePoint`. Probabilities whose sum is within 1e-9 of one are
    renormalized; anything further off is rejected.
    """
    points = [_as_point(p) for p in support]
    probs = np.asarray(probs, dtype=np.float64)
    mu0 = np.asarray(mu0, dtype=np.float64)
    mu1 = np.asarray(mu1, dtype=np.float64)
    size = len(points)
    if size == 0:
        raise LengthMismatch("support is empty")
    if not (probs.ndim == mu0.ndim == mu1.ndim == 1):
        raise LengthMismatch("probs, mu0 and mu1 must be one-dimensional")
    if not (probs.shape[0] == mu0.shape[0] == mu1.shape[0] == size):
        raise LengthMismatch(
            f"support has {size} points but probs/mu0/mu1 have lengths "
            f"{probs.shape[0]}/{mu0.shape[0]}/{mu1.shape[0]}"
        )
    if not (np.all(np.isfinite(mu0)) and np.all(np.isfinite(mu1)) and np.all(np.isfinite(probs))):
        raise LengthMismatch("probs and outcome tables must be finite")
    if np.any(probs < 0):
        raise NegativeProbability(f"negative probability at index {int(np.argmin(probs))}")
    total = probs.sum()
    if abs(total - 1.0) > INGEST_TOL:
        raise ProbabilitySumOutOfTolerance(f"probabilities sum to {total!r}")
    if abs(total - 1.0) > SUM_TOL:
        probs = probs / total  # already-normalized input is kept bit-for-bit
    if isinstance(n, bool) or int(n) != n or n <= 0:
        raise NonPositiveN(f"population size must be a positive integer, got {n!r}")

    has_u = [p.u_id is not None for p in points]
    if any(has_u) and not all(has_u):
        raise UnknownPoint("support mixes x-only points with (x, u) points")
    x_ids = np.array([p.x_id for p in points], dtype=np.int64)
    if np.any(x_ids < 0):
        raise UnknownPoint("x_id must be nonnegative")
    u_ids = None
    if all(has_u):
        u_ids = np.array([p.u_id for p in points], dtype=np.int64)
        if np.any(u_ids < 0):
            raise UnknownPoint("u_id must be nonnegative")
        n_u = int(u_ids.max()) + 1 if n_u is None else int(n_u)
        if np.any(u_ids >= n_u):
            raise UnknownPoint(f"u_id exceeds the U support size {n_u}")
    elif n_u is not None:
        raise UnknownPoint("u_support given but support points carry no u_id")
    n_x = int(x_ids.max()) + 1 if n_x is None else int(n_x)
    if np.any(x_ids >= n_x):
        raise UnknownPoint(f"x_id exceeds the X support size {n_x}")
    if x_labels is not None:
        x_labels = tuple(x_labels)
        if len(x_labels) != n_x:
            raise LengthMismatch("x_labels must have one entry per x_id")

    index = {}
    for i, p in enumerate(points):
        key = (p.x_id, p.u_id)
        if key in index:
            raise UnknownPoint(f"duplicate support point {p}")
        index[key] = i

    return PopulationModel(
        _frozen(x_ids, np.int64),
        None if u_ids is None else _frozen(u_ids, np.int64),
        _frozen(probs),
        _frozen(mu0),
        _frozen(mu1),
        int(n),
        n_x,
        n_u,
        x_labels,
        index,
    )


def tau(model, point):
    """Conditional average treatment effect at one support point."""
    i = model.index_of(point)
    return float(model.mu1[i] - model.mu0[i])


def marginal_x_distribution(model):
    """P(x) = sum_u P(x, u), indexed by ``x_id``; identity for X-only models."""
    if not model.has_u:
        out = np.zeros(model.n_x)
        out[model.x_ids] = model.probs
        return out
    return np.bincount(model.x_ids, weights=model.probs, minlength=model.n_x)


# ---------------------------------------------------------------------------
# policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolicyClass:
    """Feasible set of treatment rules.

    ``kind`` is ``"unconstrained"``, ``"positivity"`` or ``"explicit"``. A
    positivity class enforces ``treat_prob >= epsilon``; with ``upper=True`` it
    additionally enforces ``treat_prob <= 1 - epsilon`` so that untreated units
    exist in every cell.
    """

    kind: str = "unconstrained"
    epsilon: float = 0.0
    upper: bool = False
    members: tuple = ()

    def __post_init__(self):
        if self.kind not in ("unconstrained", "positivity", "explicit"):
            raise InvalidPolicy(f"unknown policy class kind {self.kind!r}")
        if self.kind == "positivity":
            limit = 0.5 if self.upper else 1.0
            if not (0.0 < self.epsilon < limit):
                raise InvalidPolicy(f"epsilon must lie in (0, {limit}), got {self.epsilon}")
        if self.kind == "explicit" and not self.members:
            raise InvalidPolicy("explicit policy class needs at least one member")

    @classmethod
    def unconstrained(cls):
        return cls()

    @classmethod
    def positivity(cls, epsilon, upper=False):
        return cls("positivity", float(epsilon), bool(upper))

    @classmethod
    def explicit(cls, policies):
        return cls("explicit", members=tuple(policies))

    @property
    def bounds(self):
        """(lowest, highest) treatment probability allowed per cell."""
        if self.kind == "positivity":
            return self.epsilon, (1.0 - self.epsilon) if self.upper else 1.0
        return 0.0, 1.0

    def contains(self, policy, tol=0.0):
        if self.kind == "explicit":
            return any(np.array_equal(policy.treat_prob, m.treat_prob) for m in self.members)
        lo, hi = self.bounds
        return bool(np.all(policy.treat_prob >= lo - tol) and np.all(policy.treat_prob <= hi + tol))

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "positivity":
            out.update(epsilon=self.epsilon, upper=self.upper)
        if self.kind == "explicit":
            out["members"] = [m.treat_prob.tolist() for m in self.members]
        return out

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind", "unconstrained")
        if kind == "positivity":
            return cls.positivity(data["epsilon"], data.get("upper", False))
        if kind == "explicit":
            return cls.explicit(Policy(m) for m in data["members"])
        return cls.unconstrained()


UNCONSTRAINED = PolicyClass()


@dataclass(frozen=True, eq=False)
class Policy:
    treat_prob: np.ndarray
    policy_class: PolicyClass = UNCONSTRAINED

    def __post_init__(self):
        arr = np.array(self.treat_prob, dtype=np.float64, copy=True).reshape(-1)
        if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidPolicy("treatment probabilities must lie in [0, 1]")
        if self.policy_class.kind == "positivity":
            lo, hi = self.policy_class.bounds
            if np.any(arr < lo) or np.any(arr > hi):
                raise InvalidPolicy(f"policy leaves the positivity box [{lo}, {hi}]")
        arr.setflags(write=False)
        object.__setattr__(self, "treat_prob", arr)

    def __len__(self):
        return self.treat_prob.shape[0]

    @property
    def treated(self):
        """Indices of cells treated with positive probability."""
        return tuple(int(i) for i in np.flatnonzero(self.treat_prob > 0.0))

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.treat_prob, other.treat_prob)

    __hash__ = None

    def to_dict(self):
        return {"treat_prob": self.treat_prob.tolist(), "class": self.policy_class.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["treat_prob"], PolicyClass.from_dict(data.get("class", {})))


def constant_policy(model, value, policy_class=UNCONSTRAINED):
    return Policy(np.full(model.size, float(value)), policy_class)


def indicator_policy(model, treated: Sequence[int], policy_class=UNCONSTRAINED):
    """Deterministic policy treating the support indices in ``treated``."""
    lo, hi = policy_class.bounds
    arr = np.full(model.size, lo)
    arr[list(treated)] = hi
    return Policy(arr, policy_class)


# ---------------------------------------------------------------------------
# untreated-outcome estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Mu0Estimator:
    """Principal's table x_id -> estimated mean untreated outcome.

    ``source`` is ``"auxiliary"`` (unbiased, from outside data) or
    ``"agent-untreated"``, in which case ``policy`` is the agent policy whose
    untreated units produced the estimate.
    """

    estimates: np.ndarray
    source: str = "auxiliary"
    policy: Optional[Policy] = None

    def __post_init__(self):
        if self.source not in ("auxiliary", "agent-untreated"):
            raise ValueError(f"unknown estimator source {self.source!r}")
        if self.source == "agent-untreated" and self.policy is None:
            raise ValueError("agent-untreated estimator needs the generating policy")
        arr = np.array(self.estimates, dtype=np.float64, copy=True).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "estimates", arr)

    def covers(self, model):
        return self.estimates.shape[0] >= model.n_x and np.all(
            np.isfinite(self.estimates[: model.n_x])
        )

    def at_points(self, model):
        """Estimator values looked up at every support point's ``x_id``."""
        if not self.covers(model):
            raise EstimatorSupportGap(
                f"estimator has {self.estimates.shape[0]} finite entries, model needs {model.n_x}"
            )
        return self.estimates[model.x_ids]

    @classmethod
    def auxiliary(cls, estimates):
        return cls(estimates, "auxiliary")

    @classmethod
    def unbiased(cls, model):
        """Exact mu0(x) for an X-only model (the auxiliary-data ideal)."""
        if model.has_u:
            raise ValueError("use asymmetry.marginalize_mu0 for joint models")
        est = np.full(model.n_x, np.nan)
        est[model.x_ids] = model.mu0
        return cls(est, "auxiliary")

    @classmethod
    def agent_untreated(cls, model, policy):
        """Mean untreated outcome among the agent's untreated units, per x.

        Requires positive untreated mass sum_u (1 - pi(x, u)) P(u | x) in every x.
        """
        pi = policy.treat_prob
        if pi.shape[0] != model.size:
            raise InvalidPolicy("policy length does not match the support")
        keep = (1.0 - pi) * model.probs
        mass = np.bincount(model.x_ids, weights=keep, minlength=model.n_x)
        present = np.bincount(model.x_ids, weights=model.probs, minlength=model.n_x) > 0
        bad = np.flatnonzero(present & ~(mass > 0.0))
        if bad.size:
            raise PositivityViolation(f"no untreated mass at x_id {int(bad[0])}")
        top = np.bincount(model.x_ids, weights=keep * model.mu0, minlength=model.n_x)
        est = np.full(model.n_x, np.nan)
        np.divide(top, mass, out=est, where=mass > 0.0)
        return cls(est, "agent-untreated", policy)

    def to_dict(self):
        out = {
            "estimates": [None if not np.isfinite(v) else float(v) for v in self.estimates],
            "source": self.source,
        }
        if self.policy is not None:
            out["policy"] = self.policy.to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        est = [np.nan if v is None else v for v in data["estimates"]]
        policy = Policy.from_dict(data["policy"]) if data.get("policy") else None
        return cls(est, data.get("source", "auxiliary"), policy)


@dataclass(frozen=True, eq=False)
class EmpiricalPopulation:
    """A population built from dataset rows, keeping the raw feature matrix.

    ``features[i]`` holds the (numerically coded) feature vector of support
    point ``i``; columns follow ``feature_names``. Used for information
    asymmetry experiments where the principal sees a subset of columns.
    """

    model: PopulationModel
    features: np.ndarray
    feature_names: tuple
    counts: Optional[np.ndarray] = None

    def __post_init__(self):
        arr = np.array(self.features, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != self.model.size:
            raise LengthMismatch("features must have one row per support point")
        if arr.shape[1] != len(self.feature_names):
            raise LengthMismatch("features must have one column per feature name")
        arr.setflags(write=False)
        object.__setattr__(self, "features", arr)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def to_dict(self):
        out = self.model.to_dict()
        out["feature_names"] = list(self.feature_names)
        out["features"] = self.features.tolist()
        if self.counts is not None:
            out["counts"] = [int(c) for c in self.counts]
        return out

    @classmethod
    def from_dict(cls, data):
        model = PopulationModel.from_dict(data)
        counts = np.asarray(data["counts"], dtype=np.int64) if "counts" in data else None
        return cls(model, np.asarray(data["features"], dtype=np.float64), tuple(data["feature_names"]), counts)
