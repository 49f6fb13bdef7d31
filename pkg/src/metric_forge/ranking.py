"""Scoring and ranking several agents that share the untreated outcome.

Each agent has its own covariate distribution, population size and treated
outcomes. Scoring with plain TT rewards size and case mix; reweighting each
agent's TT by the normalized density ratio to a reference distribution makes
the score ``sum_x max(tau_k(x), 0) P_ref(x)``, which preserves both the
pointwise (uniform) and the reference-average (relative) effect ordering.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AbsoluteContinuityViolation, InsufficientAgents, LengthMismatch
from .population import UNCONSTRAINED, Mu0Estimator, PolicyClass, PopulationModel, marginal_x_distribution
from .response import best_response
from .rewards import RewardKind, RewardSpec, expected_reward

ORDER_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AgentProfile:
    id: str
    model: PopulationModel
    policy_class: PolicyClass = UNCONSTRAINED

    def __post_init__(self):
        if self.model.has_u:
            raise ValueError("agent models must be X-only")

    @property
    def n_k(self):
        return self.model.n

    def tau_by_x(self):
        out = np.full(self.model.n_x, np.nan)
        out[self.model.x_ids] = self.model.tau
        return out

    def mu0_by_x(self):
        out = np.full(self.model.n_x, np.nan)
        out[self.model.x_ids] = self.model.mu0
        return out

    def to_dict(self):
        return {"id": self.id, "model": self.model.to_dict(), "class": self.policy_class.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(
            str(data["id"]),
            PopulationModel.from_dict(data["model"]),
            PolicyClass.from_dict(data.get("class", {})),
        )


@dataclass(frozen=True)
class Violation:
    better: str
    worse: str
    kind: str


@dataclass(frozen=True, eq=False)
class RankingReport:
    scores: dict
    ordering: tuple
    violations: tuple
    reweighted: bool
    relative_applicable: bool
    reference: np.ndarray = field(repr=False, default=None)

    def rank_of(self, agent_id):
        return self.ordering.index(agent_id) + 1

    def to_dict(self):
        return {
            "reweighted": self.reweighted,
            "relative_applicable": self.relative_applicable,
            "scores": dict(self.scores),
            "ordering": list(self.ordering),
            "violations": [
                {"better": v.better, "worse": v.worse, "kind": v.kind} for v in self.violations
            ],
        }

    def leaderboard(self):
        """Rows of (id, score, rank, uniform_violation, relative_violation)."""
        rows = []
        for agent_id in self.ordering:
            flags = {v.kind for v in self.violations if agent_id in (v.better, v.worse)}
            rows.append(
                (agent_id, self.scores[agent_id], self.rank_of(agent_id),
                 "uniform" in flags, "relative" in flags)
            )
        return rows


def reweight_g(reference, agent):
    """Normalized density ratio ``P_ref(x) / (n_k * P_k(x))`` per ``x_id``.

    Zero where the reference has no mass. Raises when the reference puts mass
    on a covariate value the agent never sees.
    """
    ref = np.asarray(reference, dtype=np.float64)
    own = marginal_x_distribution(agent.model)
    if ref.shape[0] != own.shape[0]:
        raise LengthMismatch(f"reference has {ref.shape[0]} cells, agent has {own.shape[0]}")
    bad = np.flatnonzero((ref > 0.0) & ~(own > 0.0))
    if bad.size:
        raise AbsoluteContinuityViolation(
            f"reference has mass at x_id {int(bad[0])} where agent {agent.id!r} has none"
        )
    g = np.zeros_like(ref)
    np.divide(ref, agent.n_k * own, out=g, where=own > 0.0)
    return g


def agent_score(agent, spec):
    """Expected reward of the agent's best response in its own population."""
    policy = best_response(spec, agent.model, agent.policy_class)
    return expected_reward(spec, agent.model, policy)


def scoring_spec(agent, reference=None):
    """TT with the shared untreated outcome, reweighted when ``reference`` is given."""
    mu0_hat = Mu0Estimator.auxiliary(agent.mu0_by_x())
    if reference is None:
        return RewardSpec(RewardKind.TT, mu0_hat)
    return RewardSpec(RewardKind.WTT, mu0_hat, reweight_g(reference, agent))


def _check_shared_mu0(agents):
    first = agents[0].mu0_by_x()
    for agent in agents[1:]:
        other = agent.mu0_by_x()
        if other.shape != first.shape:
            raise LengthMismatch("agents must share the X support")
        both = np.isfinite(first) & np.isfinite(other)
        if not np.allclose(first[both], other[both], rtol=0.0, atol=1e-12):
            raise ValueError(f"agent {agent.id!r} does not share the untreated outcome table")


def audit_rankings(agents, reference, use_reweighting=True):
    """Score, order and audit the agents against the two ranking properties.

    A uniform violation ``(j, k)`` means ``tau_j >= tau_k`` everywhere yet
    ``score_j < score_k``. A relative violation means
    ``E_ref[tau_j] >= E_ref[tau_k]`` yet ``score_j < score_k``; it is only
    audited when every agent's effects are nonnegative.
    """
    agents = list(agents)
    if len(agents) < 2:
        raise InsufficientAgents("ranking needs at least two agents")
    ids = [a.id for a in agents]
    if len(set(ids)) != len(ids):
        raise ValueError("agent ids must be unique")
    _check_shared_mu0(agents)
    ref = np.asarray(reference, dtype=np.float64)

    scores = {}
    for agent in agents:
        spec = scoring_spec(agent, ref if use_reweighting else None)
        scores[agent.id] = agent_score(agent, spec)
    ordering = tuple(sorted(ids, key=lambda i: (-scores[i], i)))

    taus = {a.id: a.tau_by_x() for a in agents}
    relative_ok = all(np.all(t[np.isfinite(t)] >= 0.0) for t in taus.values())
    ref_mean = {i: float(np.dot(np.nan_to_num(t), ref)) for i, t in taus.items()}

    violations = []
    for j in ids:
        for k in ids:
            if j == k:
                continue
            tol = ORDER_TOL * max(1.0, abs(scores[k]))
            inverted = scores[j] < scores[k] - tol
            if not inverted:
                continue
            tj, tk = taus[j], taus[k]
            common = np.isfinite(tj) & np.isfinite(tk)
            if np.all(tj[common] >= tk[common]):
                violations.append(Violation(j, k, "uniform"))
            if relative_ok and ref_mean[j] >= ref_mean[k]:
                violations.append(Violation(j, k, "relative"))
    return RankingReport(scores, ordering, tuple(violations), bool(use_reweighting), relative_ok, ref)
