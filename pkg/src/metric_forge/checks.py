"""Seeded random models and the property suite run by ``metric-forge check``."""

from dataclasses import dataclass

import numpy as np

from .asymmetry import (
    asym_regret,
    gamma_marg,
    marginalize_mu0,
    mu0_interval,
    tightness_model,
)
from .population import PolicyClass, make_population
from .ranking import AgentProfile, audit_rankings
from .response import best_response, brute_force_best_response, regret
from .rewards import ALL_KINDS, RewardKind, expected_reward, make_spec

EXACT_TOL = 1e-12
ORACLE_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: worst={self.worst:.3g} {self.detail}".rstrip()


def _mu(rng, size, lo=-5.0, hi=5.0):
    # a third of the draws land on a coarse grid so exact ties show up
    vals = rng.uniform(lo, hi, size)
    if rng.random() < 1 / 3:
        vals = np.round(vals * 2.0) / 2.0
    return vals


def random_model(rng, max_x=6):
    """X-only model with |X| <= max_x and mu in [-5, 5]; occasionally a zero-mass cell."""
    size = int(rng.integers(1, max_x + 1))
    probs = rng.dirichlet(np.ones(size))
    if size > 1 and rng.random() < 0.1:
        probs[rng.integers(size)] = 0.0
        probs /= probs.sum()
    return make_population(
        list(range(size)), probs, _mu(rng, size), _mu(rng, size), int(rng.integers(1, 201))
    )


def random_joint_model(rng, max_x=4, max_u=4):
    """Joint model on the full X x U grid with strictly positive cells."""
    nx = int(rng.integers(1, max_x + 1))
    nu = int(rng.integers(1, max_u + 1))
    support = [(x, u) for x in range(nx) for u in range(nu)]
    probs = rng.dirichlet(np.ones(len(support)))
    return make_population(
        support, probs, _mu(rng, len(support)), _mu(rng, len(support)),
        int(rng.integers(1, 201)), n_u=nu,
    )


def random_class(rng, size):
    r = rng.random()
    if r < 0.7:
        return PolicyClass.unconstrained()
    eps = float(rng.uniform(0.01, 0.3))
    return PolicyClass.positivity(eps, upper=r < 0.85)


def oracle_agreement(models, rng):
    """best_response and brute force reach the same expected reward."""
    worst = 0.0
    for m in models:
        cls = random_class(rng, m.size)
        for kind in ALL_KINDS:
            g = rng.uniform(0.1, 3.0, m.n_x) if kind is RewardKind.WTT else None
            spec = make_spec(kind, m, weight_g=g)
            a = expected_reward(spec, m, best_response(spec, m, cls))
            b = expected_reward(spec, m, brute_force_best_response(spec, m, cls))
            worst = max(worst, abs(a - b))
    return CheckResult("oracle agreement", worst < ORACLE_TOL, worst)


def tt_exactness(models, rng):
    worst = 0.0
    for m in models:
        g = rng.uniform(0.1, 3.0, m.n_x)
        for spec in (make_spec(RewardKind.TT, m), make_spec(RewardKind.WTT, m, weight_g=g)):
            worst = max(worst, abs(regret(spec, m).regret))
    return CheckResult("TT / weighted TT regret is zero", worst < EXACT_TOL, worst)


def att_ceiling(models):
    worst = -np.inf
    for m in models:
        rep = regret(make_spec(RewardKind.ATT, m), m)
        worst = max(worst, rep.regret - rep.optimal_utility)
    return CheckResult("ATT regret <= optimal utility", worst <= EXACT_TOL, worst)


def ato_fixture(alpha, p=0.5, n=100):
    """Two cells; the better-looking one (mu1 = 1) hides a large effect elsewhere."""
    return make_population([0, 1], [1.0 - p, p], mu0=[alpha, 0.0], mu1=[0.0, 1.0], n=n)


def ato_unboundedness(alphas=(-1.0, -10.0, -100.0), p=0.5):
    worst = 0.0
    for a in alphas:
        m = ato_fixture(a, p)
        got = regret(make_spec(RewardKind.ATO, m), m).regret
        worst = max(worst, abs(got - (-a * (1.0 - p))))
    return CheckResult("ATO regret = -alpha (1 - p)", worst < EXACT_TOL, worst)


def asymmetry_bounds(joints, epsilon=0.05):
    """Both regret bounds plus the interval property of each estimator."""
    slack_marg = slack_max = np.inf
    interval_gap = 0.0
    cls = PolicyClass.positivity(epsilon, upper=True)
    for j in joints:
        lo, hi = mu0_interval(j)
        aux = marginalize_mu0(j)
        rep = asym_regret(j, aux)
        slack_marg = min(slack_marg, rep.bound_marg - rep.regret)
        au = asym_regret(j, "agent-untreated", cls)
        slack_max = min(slack_max, au.bound_max - au.regret)
        for est in (aux.estimates, au.mu0_hat.estimates):
            gap = np.maximum(lo - est, est - hi)
            interval_gap = max(interval_gap, float(gap.max()))
    return [
        CheckResult("regret <= 2 gamma_marg (auxiliary)", slack_marg >= -ORACLE_TOL, 0.0 - slack_marg),
        CheckResult("regret <= 2 gamma_max (agent-untreated)", slack_max >= -ORACLE_TOL, 0.0 - slack_max),
        CheckResult("estimator within per-x mu0 range", interval_gap <= EXACT_TOL, interval_gap),
    ]


def tightness(alphas=(0.5, 1.0, 2.0, 4.0), ratios=(0.25, 0.5, 0.99)):
    worst = 0.0
    for a in alphas:
        for r in ratios:
            b = r * a
            rep = asym_regret(tightness_model(a, b), marginalize_mu0(tightness_model(a, b)))
            worst = max(worst, abs(rep.regret - (a - b / 2.0)))
    return CheckResult("tightness regret = alpha - beta / 2", worst < EXACT_TOL, worst)


def near_tightness(alphas=(0.5, 1.0, 2.0, 4.0)):
    worst = -np.inf
    for a in alphas:
        m = tightness_model(a, 0.01 * a)
        rep = asym_regret(m, marginalize_mu0(m))
        worst = max(worst, (gamma_marg(m) - 0.005 * a) - rep.regret)
    return CheckResult("regret >= gamma_marg - 0.005 alpha at beta = 0.01 alpha", worst <= EXACT_TOL, worst)


def random_dominating_pair(rng, max_x=6, nonnegative=False):
    """Two agents sharing mu0 where agent ``a``'s effect dominates ``b``'s pointwise."""
    nx = int(rng.integers(1, max_x + 1))
    mu0 = rng.uniform(-5, 5, nx)
    if nonnegative:
        tau_b = rng.uniform(0, 3, nx)
    else:
        tau_b = rng.uniform(-3, 3, nx)
    tau_a = tau_b + rng.uniform(0, 2, nx) * (rng.random(nx) < 0.7)
    agents = []
    for name, tau in (("a", tau_a), ("b", tau_b)):
        m = make_population(
            list(range(nx)), rng.dirichlet(np.ones(nx)), mu0, mu0 + tau, int(rng.integers(1, 501))
        )
        agents.append(AgentProfile(name, m))
    ref = rng.dirichlet(np.ones(nx))
    return agents, ref


def ranking_preservation(rng, pairs=200):
    worst = 0.0
    bad = 0
    for i in range(pairs):
        agents, ref = random_dominating_pair(rng, nonnegative=i % 2 == 1)
        rep = audit_rankings(agents, ref)
        worst = max(worst, rep.scores["b"] - rep.scores["a"])
        bad += len(rep.violations)
    return CheckResult(
        "reweighted TT preserves dominance", bad == 0 and worst <= EXACT_TOL, worst,
        f"violations={bad}",
    )


def size_inversion(rng, trials=50):
    """Equal effects, one agent twice the size: plain TT flags a uniform violation."""
    hits = 0
    for _ in range(trials):
        nx = int(rng.integers(1, 7))
        mu0 = rng.uniform(-5, 5, nx)
        mu1 = mu0 + rng.uniform(0.1, 3, nx)
        probs = rng.dirichlet(np.ones(nx))
        n = int(rng.integers(1, 200))
        j = AgentProfile("j", make_population(list(range(nx)), probs, mu0, mu1, n))
        k = AgentProfile("k", make_population(list(range(nx)), probs, mu0, mu1, 2 * n))
        rep = audit_rankings([j, k], probs, use_reweighting=False)
        hits += any(v.kind == "uniform" and v.better == "j" for v in rep.violations)
    return CheckResult("unweighted TT inverts equal agents of unequal size", hits == trials, trials - hits)


def run_suite(seed=0, n_models=1000, n_joint=1000, n_pairs=200):
    """Every property; deterministic given ``seed``."""
    rng = np.random.default_rng(seed)
    models = [random_model(rng) for _ in range(n_models)]
    joints = [random_joint_model(rng) for _ in range(n_joint)]
    out = [
        oracle_agreement(models, rng),
        tt_exactness(models, rng),
        att_ceiling(models),
        ato_unboundedness(),
    ]
    out += asymmetry_bounds(joints)
    out += [tightness(), near_tightness(), ranking_preservation(rng, n_pairs), size_inversion(rng)]
    return out

