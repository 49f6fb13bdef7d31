import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metric_forge.errors import (
    EstimatorSupportGap,
    InvalidPolicy,
    LengthMismatch,
    NegativeProbability,
    NonPositiveN,
    PositivityViolation,
    ProbabilitySumOutOfTolerance,
    UnknownPoint,
)
from metric_forge.population import (
    CovariatePoint,
    EmpiricalPopulation,
    Mu0Estimator,
    Policy,
    PolicyClass,
    PopulationModel,
    constant_policy,
    indicator_policy,
    make_population,
    marginal_x_distribution,
    tau,
)


def test_m1_is_valid(m1):
    assert m1.size == 2
    np.testing.assert_array_equal(m1.tau, [2.0, 1.0])
    assert not m1.has_u


def test_probability_sum_rejected():
    with pytest.raises(ProbabilitySumOutOfTolerance):
        make_population([0, 1], [0.3, 0.6], [0, 0], [0, 0], 10)


def test_single_point():
    m = make_population([0], [1.0], [0.0], [0.0], 1)
    assert m.tau.tolist() == [0.0]


def test_near_one_is_renormalized():
    m = make_population([0, 1], [0.5, 0.5 + 5e-10], [0, 0], [0, 0], 10)
    assert abs(m.probs.sum() - 1.0) <= 1e-12


@pytest.mark.parametrize(
    "kwargs, err",
    [
        (dict(support=[0, 1], probs=[1.0], mu0=[0, 0], mu1=[0, 0], n=1), LengthMismatch),
        (dict(support=[0, 1], probs=[1.2, -0.2], mu0=[0, 0], mu1=[0, 0], n=1), NegativeProbability),
        (dict(support=[0], probs=[1.0], mu0=[0], mu1=[0], n=0), NonPositiveN),
        (dict(support=[0], probs=[1.0], mu0=[0], mu1=[0], n=2.5), NonPositiveN),
        (dict(support=[0, 0], probs=[0.5, 0.5], mu0=[0, 0], mu1=[0, 0], n=1), UnknownPoint),
        (dict(support=[0, (1, 0)], probs=[0.5, 0.5], mu0=[0, 0], mu1=[0, 0], n=1), UnknownPoint),
        (dict(support=[], probs=[], mu0=[], mu1=[], n=1), LengthMismatch),
    ],
)
def test_validation(kwargs, err):
    with pytest.raises(err):
        make_population(**kwargs)


def test_arrays_are_read_only(m1):
    with pytest.raises(ValueError):
        m1.probs[0] = 0.9


@pytest.mark.parametrize("mu1, mu0, want", [(0.0, -2.0, 2.0), (1.0, 3.0, -2.0), (0.7, 0.7, 0.0)])
def test_tau(mu1, mu0, want):
    m = make_population([0], [1.0], [mu0], [mu1], 1)
    assert tau(m, 0) == want
    assert tau(m, CovariatePoint(0)) == want


def test_tau_unknown_point(m1):
    with pytest.raises(UnknownPoint):
        tau(m1, 7)


def test_marginal_uniform_joint():
    m = make_population([(0, 0), (0, 1), (1, 0), (1, 1)], [0.25] * 4, [0] * 4, [0] * 4, 4)
    np.testing.assert_allclose(marginal_x_distribution(m), [0.5, 0.5])


def test_marginal_partial_grid():
    m = make_population([(0, 0), (0, 1), (1, 0)], [0.4, 0.1, 0.5], [0] * 3, [0] * 3, 4)
    np.testing.assert_allclose(marginal_x_distribution(m), [0.5, 0.5], atol=1e-15)


def test_marginal_passthrough(m1):
    np.testing.assert_array_equal(marginal_x_distribution(m1), m1.probs)


def test_marginal_of_u_degenerate_is_exact(rng):
    p = rng.dirichlet(np.ones(5))
    joint = make_population([(x, 0) for x in range(5)], p, np.zeros(5), np.zeros(5), 3)
    flat = make_population(list(range(5)), p, np.zeros(5), np.zeros(5), 3)
    np.testing.assert_array_equal(marginal_x_distribution(joint), flat.probs)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 1.0), finite, finite), min_size=1, max_size=8))
def test_swap_negates_tau(cells):
    w = np.array([c[0] for c in cells])
    m = make_population(list(range(len(cells))), w / w.sum(), [c[1] for c in cells], [c[2] for c in cells], 5)
    np.testing.assert_array_equal(m.swapped().tau, -m.tau)
    assert abs(m.probs.sum() - 1.0) <= 1e-12


def test_json_round_trip_joint():
    m = make_population([(0, 0), (0, 1), (1, 1)], [0.2, 0.3, 0.5], [1.0, -1.0, 0.1], [0.0, 2.0, 0.3], 9, n_u=3)
    again = PopulationModel.from_dict(json.loads(json.dumps(m.to_dict())))
    assert again == m
    assert again.n_u == 3
    assert m.to_dict()["u_support"] == 3


def test_policy_validation(m1):
    with pytest.raises(InvalidPolicy):
        Policy([0.5, 1.5])
    pos = PolicyClass.positivity(0.1)
    with pytest.raises(InvalidPolicy):
        Policy([0.05, 1.0], pos)
    Policy([0.1, 1.0], pos)
    with pytest.raises(InvalidPolicy):
        Policy([0.1, 1.0], PolicyClass.positivity(0.1, upper=True))
    with pytest.raises(InvalidPolicy):
        PolicyClass.positivity(0.0)


def test_policy_helpers(m1):
    assert indicator_policy(m1, [1]).treat_prob.tolist() == [0.0, 1.0]
    cls = PolicyClass.positivity(0.2, upper=True)
    assert indicator_policy(m1, [0], cls).treat_prob.tolist() == [0.8, 0.2]
    assert constant_policy(m1, 0.3).treat_prob.tolist() == [0.3, 0.3]


def test_policy_class_round_trip():
    for cls in (PolicyClass.unconstrained(), PolicyClass.positivity(0.1, upper=True),
                PolicyClass.explicit([Policy([0, 1]), Policy([1, 1])])):
        again = PolicyClass.from_dict(json.loads(json.dumps(cls.to_dict())))
        assert again.to_dict() == cls.to_dict()


def test_unbiased_estimator(m1):
    est = Mu0Estimator.unbiased(m1)
    np.testing.assert_array_equal(est.at_points(m1), m1.mu0)


def test_estimator_gap(m1):
    with pytest.raises(EstimatorSupportGap):
        Mu0Estimator.auxiliary([1.0]).at_points(m1)


def test_agent_untreated_needs_untreated_mass():
    joint = make_population([(0, 0), (0, 1)], [0.5, 0.5], [1.0, -1.0], [0.0, 0.0], 2)
    with pytest.raises(PositivityViolation):
        Mu0Estimator.agent_untreated(joint, Policy([1.0, 1.0]))
    est = Mu0Estimator.agent_untreated(joint, Policy([1.0, 0.0]))
    assert est.estimates.tolist() == [-1.0]
    assert est.source == "agent-untreated"


def test_estimator_round_trip(m1):
    est = Mu0Estimator.agent_untreated(m1, Policy([0.5, 0.0]))
    again = Mu0Estimator.from_dict(json.loads(json.dumps(est.to_dict())))
    np.testing.assert_array_equal(again.estimates, est.estimates)
    assert again.policy == est.policy


def test_empirical_round_trip(m1):
    emp = EmpiricalPopulation(m1, [[1.0, 0.0], [2.0, 5.5]], ("a", "b"), np.array([3, 3]))
    again = EmpiricalPopulation.from_dict(json.loads(json.dumps(emp.to_dict())))
    assert again.model == emp.model
    np.testing.assert_array_equal(again.features, emp.features)
    assert again.feature_names == ("a", "b")
    with pytest.raises(LengthMismatch):
        EmpiricalPopulation(m1, [[1.0]], ("a",))
