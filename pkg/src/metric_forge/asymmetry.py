"""Information asymmetry: the agent conditions on covariates U the principal lacks.

The principal rewards TT with an estimate of mu0 that depends on x only. Two
sources are modeled: an unbiased auxiliary estimate (the U-marginalized mean)
and the mean among the agent's own untreated units, which depends on the
agent's policy and is therefore confounded by U.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import EmptyDataset, ParameterOrderViolation, ZeroMassCovariate
from .population import (
    UNCONSTRAINED,
    Mu0Estimator,
    Policy,
    PolicyClass,
    make_population,
    marginal_x_distribution,
)
from .response import best_response, optimal_policy, treat_rate, utility
from .rewards import RewardKind, RewardSpec

MAX_FIXED_POINT_ITER = 100


@dataclass(frozen=True, eq=False)
class AsymmetryReport:
    gamma_marg: float
    gamma_max: float
    regret: float
    bound_marg: float
    bound_max: float
    slack_marg: float
    slack_max: float
    estimator_source: str
    utility: float
    optimal_utility: float
    treat_rate: float
    best_response: Policy
    mu0_hat: Mu0Estimator
    converged: bool = True
    iterations: int = 0

    def to_dict(self):
        return {
            "gamma_marg": self.gamma_marg,
            "gamma_max": self.gamma_max,
            "regret": self.regret,
            "bound_marg": self.bound_marg,
            "bound_max": self.bound_max,
            "slack_marg": self.slack_marg,
            "slack_max": self.slack_max,
            "estimator_source": self.estimator_source,
            "utility": self.utility,
            "optimal_utility": self.optimal_utility,
            "treat_rate": self.treat_rate,
            "converged": self.converged,
            "iterations": self.iterations,
            "best_response": self.best_response.treat_prob.tolist(),
            "mu0_hat": [float(v) for v in self.mu0_hat.estimates],
        }


def marginalize_mu0(joint):
    """Auxiliary-source estimator mu0(x) = sum_u mu0(x, u) P(u | x)."""
    mass = marginal_x_distribution(joint)
    empty = np.flatnonzero(~(mass > 0.0))
    if empty.size:
        raise ZeroMassCovariate(f"x_id {int(empty[0])} has zero probability")
    top = np.bincount(joint.x_ids, weights=joint.probs * joint.mu0, minlength=joint.n_x)
    est = top / mass
    # cells with one live point keep that point's value exactly
    live = joint.probs > 0.0
    single = np.bincount(joint.x_ids[live], minlength=joint.n_x) == 1
    est[single] = _spread_by_x(joint)[0][single]
    return Mu0Estimator.auxiliary(est)


def gamma_marg(joint):
    """E|mu0(X) - mu0(X, U)|: the smallest valid bounded-marginal-error constant."""
    mu0_x = marginalize_mu0(joint).at_points(joint)
    return float(np.dot(joint.probs, np.abs(mu0_x - joint.mu0)))


def _spread_by_x(joint):
    live = joint.probs > 0.0
    lo = np.full(joint.n_x, np.inf)
    hi = np.full(joint.n_x, -np.inf)
    np.minimum.at(lo, joint.x_ids[live], joint.mu0[live])
    np.maximum.at(hi, joint.x_ids[live], joint.mu0[live])
    return lo, hi


def gamma_max(joint):
    """E[max_u' |mu0(X, U) - mu0(X, u')|], maximizing over u' with P(u' | X) > 0."""
    lo, hi = _spread_by_x(joint)
    x = joint.x_ids
    delta = np.maximum(np.abs(joint.mu0 - lo[x]), np.abs(hi[x] - joint.mu0))
    delta = np.where(joint.probs > 0.0, delta, 0.0)
    return float(np.dot(joint.probs, delta))


def mu0_interval(joint):
    """Per-x ``(min_u mu0(x, u), max_u mu0(x, u))`` over positive-probability cells."""
    return _spread_by_x(joint)


def confounded_mu0_hat(joint, policy):
    """Mean untreated outcome among the agent's untreated units, per x."""
    return Mu0Estimator.agent_untreated(joint, policy)


def tt_spec(mu0_hat):
    return RewardSpec(RewardKind.TT, mu0_hat)


def agent_untreated_equilibrium(joint, policy_class):
    """Iterate best response <-> own-untreated estimator until the treated set is stable.

    Starts from the best response to the marginalized estimator. Returns
    ``(policy, estimator, converged, iterations)``; ``estimator`` is the one
    the returned policy best-responds to.
    """
    estimator = marginalize_mu0(joint)
    policy = best_response(tt_spec(estimator), joint, policy_class)
    lo, hi = policy_class.bounds
    for it in range(1, MAX_FIXED_POINT_ITER + 1):
        estimator = Mu0Estimator.agent_untreated(joint, policy)
        nxt = best_response(tt_spec(estimator), joint, policy_class)
        if np.array_equal(nxt.treat_prob == hi, policy.treat_prob == hi):
            return nxt, estimator, True, it
        policy = nxt
    return policy, estimator, False, MAX_FIXED_POINT_ITER


def asym_regret(joint, mu0_hat, policy_class: Optional[PolicyClass] = None):
    """Regret of the TT best response when the principal only sees x.

    With an auxiliary estimator the agent treats ``(x, u)`` iff
    ``mu1(x, u) - mu0_hat(x) > 0``. With an agent-untreated estimator the
    estimator and policy are solved jointly by
    :func:`agent_untreated_equilibrium` in the class of ``mu0_hat.policy``
    (or ``policy_class``), which must keep untreated mass in every cell.
    ``mu0_hat`` may also be the string ``"auxiliary"`` (marginalized mu0) or
    ``"agent-untreated"`` (``policy_class`` then required).
    """
    converged, iterations = True, 0
    if isinstance(mu0_hat, str):
        if mu0_hat == "auxiliary":
            mu0_hat = marginalize_mu0(joint)
        elif mu0_hat == "agent-untreated":
            if policy_class is None:
                raise ValueError("agent-untreated source needs a policy class")
        else:
            raise ValueError(f"unknown estimator source {mu0_hat!r}")
    if isinstance(mu0_hat, str) or mu0_hat.source == "agent-untreated":
        cls = policy_class or mu0_hat.policy.policy_class
        response, mu0_hat, converged, iterations = agent_untreated_equilibrium(joint, cls)
    else:
        cls = policy_class or UNCONSTRAINED
        response = best_response(tt_spec(mu0_hat), joint, cls)
    best = optimal_policy(joint, cls)
    v = utility(joint, response)
    v_star = utility(joint, best)
    r = v_star - v
    g_marg = gamma_marg(joint)
    g_max = gamma_max(joint)
    return AsymmetryReport(
        gamma_marg=g_marg,
        gamma_max=g_max,
        regret=r,
        bound_marg=2.0 * g_marg,
        bound_max=2.0 * g_max,
        slack_marg=2.0 * g_marg - r,
        slack_max=2.0 * g_max - r,
        estimator_source=mu0_hat.source,
        utility=v,
        optimal_utility=v_star,
        treat_rate=treat_rate(joint, response),
        best_response=response,
        mu0_hat=mu0_hat,
        converged=converged,
        iterations=iterations,
    )


def tightness_model(alpha, beta, n=100):
    """Single-x population where the U-blind TT reward loses ``alpha - beta / 2``.

    U is a fair coin. At u=1 the untreated outcome is -alpha and treatment
    yields 0; at u=0 the untreated outcome is alpha and treatment yields beta.
    """
    if not alpha > 0.0:
        raise ParameterOrderViolation(f"alpha must be positive, got {alpha}")
    if not 0.0 < beta < alpha:
        raise ParameterOrderViolation(f"need 0 < beta < alpha, got alpha={alpha}, beta={beta}")
    return make_population(
        [(0, 0), (0, 1)],
        [0.5, 0.5],
        mu0=[alpha, -alpha],
        mu1=[beta, 0.0],
        n=n,
        n_u=2,
    )


# ---------------------------------------------------------------------------
# empirical datasets: principal sees a subset of the feature columns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    prefix_size: int
    feature: Optional[str]
    gamma_marg: float
    gamma_max: float
    regret: float
    utility: float
    treat_rate: float


def _columns(emp, features):
    cols = []
    for f in features:
        cols.append(emp.feature_names.index(f) if isinstance(f, str) else int(f))
    return cols


def principal_cells(emp, features):
    """Group support points by the values of the principal-visible columns.

    Returns ``(cell_of_point, n_cells)``; no visible columns means one cell.
    """
    size = emp.model.size
    if size == 0:
        raise EmptyDataset("no rows")
    cols = _columns(emp, features)
    if not cols:
        return np.zeros(size, dtype=np.int64), 1
    _, inverse = np.unique(emp.features[:, cols], axis=0, return_inverse=True)
    inverse = inverse.reshape(-1).astype(np.int64)
    return inverse, int(inverse.max()) + 1


def induced_joint_model(emp, features):
    """Joint model with X = visible-column cell and U = the full support point."""
    cells, n_cells = principal_cells(emp, features)
    m = emp.model
    return make_population(
        list(zip(cells.tolist(), range(m.size))),
        m.probs, m.mu0, m.mu1, m.n,
        n_u=m.size, n_x=n_cells,
    )


def principal_view(emp, features):
    """Asymmetry statistics when the principal conditions on ``features``.

    Returns a :class:`CurvePoint` (``prefix_size`` = number of features).
    """
    cells, n_cells = principal_cells(emp, features)
    m = emp.model
    _, g_marg, g_max, v, v_star, rate = _kernels.asym_stats(cells, n_cells, m.probs, m.mu0, m.mu1)
    last = features[-1] if features else None
    if last is not None and not isinstance(last, str):
        last = emp.feature_names[int(last)]
    return CurvePoint(len(features), last, g_marg, g_max, v_star - v, v, rate)


def feature_curve(emp, feature_order):
    """Regret as the principal accumulates features in ``feature_order``.

    Entry ``k`` conditions the principal's estimator on the first ``k``
    features; entry 0 uses the grand mean of mu0.
    """
    if emp.model.size == 0:
        raise EmptyDataset("no rows")
    order = list(feature_order)
    return [principal_view(emp, order[:k]) for k in range(len(order) + 1)]


def single_feature_views(emp):
    """Principal view for each feature alone, in column order."""
    return [principal_view(emp, [name]) for name in emp.feature_names]


def importance_order(emp):
    """Features sorted by single-feature gamma_marg, smallest (most informative) first."""
    views = single_feature_views(emp)
    ranked = sorted(range(len(views)), key=lambda i: (views[i].gamma_marg, i))
    return [emp.feature_names[i] for i in ranked], views
