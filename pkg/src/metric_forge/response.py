"""Agent best responses, welfare utility and regret.

The agent maximizes the expected reward; the principal cares about utility
``V(pi) = sum_p tau(p) pi(p) P(p)`` (per-capita welfare gain over treating
nobody). Analytic best responses follow the closed forms for each reward; a
brute-force enumerator over deterministic (vertex) policies certifies them.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import SupportTooLarge, UnsupportedClass
from .population import UNCONSTRAINED, Policy
from .rewards import RewardKind, expected_reward, point_scores

MAX_BRUTE_FORCE_SUPPORT = 20
ARGMAX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RegretReport:
    best_response: Policy
    utility: float
    optimal_utility: float
    regret: float
    optimal_policy: Policy

    def to_dict(self):
        return {
            "best_response": self.best_response.treat_prob.tolist(),
            "utility": self.utility,
            "optimal_utility": self.optimal_utility,
            "regret": self.regret,
            "optimal_policy": self.optimal_policy.treat_prob.tolist(),
        }


def utility(model, policy):
    """Per-capita welfare gain of ``policy`` relative to treating nobody."""
    return float(np.dot(model.tau * policy.treat_prob, model.probs))


def treat_rate(model, policy):
    return float(np.dot(policy.treat_prob, model.probs))


def optimal_policy(model, policy_class=UNCONSTRAINED):
    """Welfare-maximizing rule: treat exactly the cells with tau > 0."""
    if policy_class.kind == "explicit":
        raise UnsupportedClass("optimal policy over an explicit set: use best_over_members")
    lo, hi = policy_class.bounds
    return Policy(np.where(model.tau > 0.0, hi, lo), policy_class)


def _best_member(policy_class, value):
    members = policy_class.members
    values = np.array([value(m) for m in members])
    best = values.max()
    tol = ARGMAX_TOL * max(1.0, abs(best))
    order = sorted(
        (i for i in range(len(members)) if values[i] >= best - tol),
        key=lambda i: (len(members[i].treated), members[i].treated),
    )
    return members[order[0]]


def optimal_utility(model, policy_class=UNCONSTRAINED):
    if policy_class.kind == "explicit":
        return max(utility(model, m) for m in policy_class.members)
    return utility(model, optimal_policy(model, policy_class))


def _pick_vertex(values, size):
    """Index of the maximizing vertex with the deterministic tie-break.

    Ties (within 1e-12 relative) go to the fewest treated cells, then to the
    lexicographically smallest sorted tuple of treated indices.
    """
    best = values.max()
    tol = ARGMAX_TOL * max(1.0, abs(best))
    cand = np.flatnonzero(values >= best - tol).astype(np.int64)
    if cand.size == 1:
        return int(cand[0])
    shifts = np.arange(size, dtype=np.int64)
    bits = ((cand[:, None] >> shifts) & 1).astype(np.int64)
    count = bits.sum(axis=1)
    keep = count == count.min()
    cand, bits = cand[keep], bits[keep]
    # among equal-size sets, the lexicographically smallest sorted index tuple
    # is the one containing the lowest index where the sets first differ
    reversed_key = bits @ (np.int64(1) << (size - 1 - shifts))
    return int(cand[np.argmax(reversed_key)])


def brute_force_best_response(spec, model, policy_class=UNCONSTRAINED):
    """Maximize the expected reward by exhaustive enumeration.

    Unconstrained and positivity classes enumerate all ``2**size`` policies
    whose cells sit at the class bounds (every analytic best response is such
    a vertex, and both the totals and the ratio rewards attain their maximum
    over the box at a vertex). Explicit classes enumerate their members.
    """
    if policy_class.kind == "explicit":
        return _best_member(policy_class, lambda m: expected_reward(spec, model, m))
    size = model.size
    if size > MAX_BRUTE_FORCE_SUPPORT:
        raise SupportTooLarge(f"support of {size} points exceeds 2^{MAX_BRUTE_FORCE_SUPPORT}")
    s = point_scores(spec, model)
    lo, hi = policy_class.bounds
    values = _kernels.vertex_values(
        model.probs * s, model.probs, lo, hi, spec.kind.is_average, float(model.n)
    )
    mask = _pick_vertex(values, size)
    treat = ((mask >> np.arange(size)) & 1).astype(bool)
    return Policy(np.where(treat, hi, lo), policy_class)


def best_response(spec, model, policy_class=UNCONSTRAINED):
    """Agent best response to ``spec``.

    Unconstrained (and, for the total rewards, positivity) classes use the
    closed forms: averages treat the whole argmax set of the per-unit score
    when that maximum is positive, totals treat every cell with a positive
    score. Other cases fall back to :func:`brute_force_best_response`.
    """
    kind = spec.kind
    if policy_class.kind == "explicit":
        return brute_force_best_response(spec, model, policy_class)
    if policy_class.kind == "positivity" and kind.is_average:
        return brute_force_best_response(spec, model, policy_class)
    lo, hi = policy_class.bounds
    s = point_scores(spec, model)
    if kind.is_average:
        cand = (model.probs > 0.0) & (s > 0.0)
        treat = np.zeros(model.size, dtype=bool)
        if cand.any():
            top = s[cand].max()
            treat = cand & (s >= top - ARGMAX_TOL)
    else:
        treat = s > 0.0
    return Policy(np.where(treat, hi, lo), policy_class)


def regret(spec, model, policy_class=UNCONSTRAINED):
    """Regret of the agent's best response against the best rule in the class."""
    response = best_response(spec, model, policy_class)
    if policy_class.kind == "explicit":
        best = _best_member(policy_class, lambda m: utility(model, m))
    else:
        best = optimal_policy(model, policy_class)
    v = utility(model, response)
    v_star = utility(model, best)
    return RegretReport(response, v, v_star, v_star - v, best)
