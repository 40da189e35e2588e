"""
Test script for penalty functions
Run with: pytest test_penalty.py -v
"""

import math

import numpy as np
import pytest

from errors import SingularPenaltyError, ValidationError
from penalty import (
    Family,
    LQA_DROP,
    PenaltySpec,
    lla_weight,
    lla_weights,
    lqa_coefficient,
    max_concavity,
    penalty_derivative,
    penalty_value,
)


def test_default_shapes():
    """Test that family defaults come from config"""
    assert PenaltySpec(Family.SCAD, 1.0).shape == 3.7
    assert PenaltySpec(Family.MCP, 1.0).shape == 3.0
    assert PenaltySpec("l1", 1.0).family is Family.L1


def test_invalid_parameters():
    """Test parameter validation on construction"""
    with pytest.raises(ValidationError) as exc_info:
        PenaltySpec(Family.SCAD, 1.0, shape=2.0)
    assert exc_info.value.status_code == 1

    with pytest.raises(ValidationError):
        PenaltySpec(Family.MCP, 1.0, shape=1.0)
    with pytest.raises(ValidationError):
        PenaltySpec(Family.L1, -0.5)
    with pytest.raises(ValidationError):
        PenaltySpec("elastic", 1.0)


def test_json_round_trip():
    """Test PenaltySpec serialization"""
    spec = PenaltySpec(Family.MCP, 0.7, shape=2.5)
    assert PenaltySpec.from_json(spec.to_json()) == spec


def test_scad_derivative_regions():
    """Test SCAD derivative on its three pieces"""
    spec = PenaltySpec(Family.SCAD, 1.0)
    assert penalty_derivative(spec, 0.5) == pytest.approx(1.0)
    assert penalty_derivative(spec, 2.0) == pytest.approx((3.7 - 2.0) / 2.7)
    assert penalty_derivative(spec, 4.0) == 0.0


def test_scad_value_plateau_and_continuity():
    """Test SCAD value is continuous and flat beyond a*lambda"""
    spec = PenaltySpec(Family.SCAD, 1.0)
    assert penalty_value(spec, 1.0) == pytest.approx(1.0)
    assert penalty_value(spec, 1.0 + 1e-9) == pytest.approx(1.0, abs=1e-8)
    assert penalty_value(spec, 3.7) == pytest.approx(0.5 * 4.7)
    assert penalty_value(spec, 50.0) == pytest.approx(0.5 * 4.7)


def test_mcp_value_and_derivative():
    """Test MCP closed forms"""
    spec = PenaltySpec(Family.MCP, 1.0, shape=3.0)
    assert penalty_derivative(spec, 1.5) == pytest.approx(0.5)
    assert penalty_derivative(spec, 3.0) == 0.0
    assert penalty_value(spec, 10.0) == pytest.approx(1.5)


def test_l0_value_counts_nonzeros():
    """Test L0 adds lambda^2 / 2 per nonzero"""
    spec = PenaltySpec(Family.L0, 2.0)
    values = penalty_value(spec, np.array([0.0, 0.3, 5.0]))
    assert values.sum() == pytest.approx(2 * 0.5 * 4.0)


def test_l0_has_no_derivative():
    """Test that L0 is rejected by derivative-based routines"""
    spec = PenaltySpec(Family.L0, 1.0)
    with pytest.raises(ValidationError) as exc_info:
        penalty_derivative(spec, 1.0)
    assert "non-differentiable" in exc_info.value.detail
    with pytest.raises(ValidationError):
        lla_weights(spec, np.ones(3))


def test_derivative_requires_positive_argument():
    """Test p'(t) is only defined for t > 0"""
    with pytest.raises(ValidationError):
        penalty_derivative(PenaltySpec(Family.SCAD, 1.0), 0.0)


def test_log_penalty_singular_at_zero():
    """Test log penalty value at 0 with epsilon 0"""
    with pytest.raises(SingularPenaltyError) as exc_info:
        penalty_value(PenaltySpec(Family.LOG, 1.0), 0.0)
    assert exc_info.value.status_code == 2
    assert "singular penalty value" in exc_info.value.detail
    # finite once a guard is added
    assert penalty_value(PenaltySpec(Family.LOG, 1.0, epsilon=1.0), 0.0) == 0.0


def test_vectorised_matches_scalar():
    """Test array inputs give the same values as scalar calls"""
    spec = PenaltySpec(Family.SCAD, 0.8)
    t = np.array([0.1, 0.8, 1.5, 2.96, 10.0])
    values = penalty_value(spec, t)
    assert isinstance(values, np.ndarray)
    assert values == pytest.approx([penalty_value(spec, float(x)) for x in t])


def test_lla_weight_at_zero():
    """Test right-derivative weights at beta0_j = 0"""
    assert lla_weight(PenaltySpec(Family.SCAD, 0.7), 0.0) == pytest.approx(0.7)
    assert lla_weight(PenaltySpec(Family.MCP, 0.7), 0.0) == pytest.approx(0.7)
    assert lla_weight(PenaltySpec(Family.L1, 0.7), 0.0) == pytest.approx(0.7)
    assert math.isinf(lla_weight(PenaltySpec(Family.BRIDGE, 1.0, shape=0.5), 0.0))
    assert math.isinf(lla_weight(PenaltySpec(Family.LOG, 1.0), 0.0))
    assert lla_weight(PenaltySpec(Family.LOG, 1.0, epsilon=0.5), 0.0) == pytest.approx(2.0)


def test_adaptive_weights_exclude_zeros():
    """Test adaptive weights (lambda/2, inf) for beta0 = (2, 0), gamma = 1"""
    spec = PenaltySpec(Family.ADAPTIVE, 1.0, shape=1.0)
    weights = lla_weights(spec, np.array([2.0, 0.0]))
    assert weights[0] == pytest.approx(0.5)
    assert np.isinf(weights[1])


def test_adaptive_correspondences():
    """Test adaptive weights coincide with log and bridge LLA weights"""
    beta0 = np.array([0.3, -1.2, 4.0])
    adaptive_one = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.5, shape=1.0), beta0)
    log = lla_weights(PenaltySpec(Family.LOG, 1.5), beta0)
    assert adaptive_one == pytest.approx(log)

    adaptive_half = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.5, shape=0.5), beta0)
    bridge = lla_weights(PenaltySpec(Family.BRIDGE, 3.0, shape=0.5), beta0)
    assert adaptive_half == pytest.approx(bridge)


def test_l1_weights_ignore_initial():
    """Test L1 weights are lambda whatever beta0 is"""
    spec = PenaltySpec(Family.L1, 0.4)
    assert lla_weights(spec, np.array([0.0, -3.0, 1e-9])) == pytest.approx([0.4] * 3)


def test_lqa_coefficient():
    """Test LQA ridge coefficient and the drop rule"""
    spec = PenaltySpec(Family.L1, 1.0)
    assert lqa_coefficient(spec, 2.0) == pytest.approx(0.25)
    assert lqa_coefficient(spec, 1e-9, tau=1e-6) == LQA_DROP
    coefs = lqa_coefficient(spec, np.array([-2.0, 0.0]))
    assert coefs[0] == pytest.approx(0.25)
    assert np.isinf(coefs[1])
    with pytest.raises(ValidationError):
        lqa_coefficient(spec, 1.0, tau=0.0)


def test_max_concavity():
    """Test maximum concavity for the families where it is defined"""
    assert max_concavity(PenaltySpec(Family.L1, 1.0)) == 0.0
    assert max_concavity(PenaltySpec(Family.SCAD, 1.0)) == pytest.approx(1 / 2.7)
    assert max_concavity(PenaltySpec(Family.MCP, 1.0, shape=2.0)) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        max_concavity(PenaltySpec(Family.BRIDGE, 1.0))


def test_log_penalty_is_nonnegative():
    """Test the log penalty vanishes at 0, stays nonnegative and needs epsilon > 0"""
    spec = PenaltySpec(Family.LOG, 1.0, epsilon=0.1)
    values = penalty_value(spec, np.array([0.0, 0.05, 0.5, 3.0]))
    assert values[0] == 0.0
    assert np.all(values >= 0)
    assert np.all(np.diff(values) > 0)
    assert values[2] == pytest.approx(np.log(6.0))
    with pytest.raises(SingularPenaltyError):
        penalty_value(PenaltySpec(Family.LOG, 1.0), 0.5)


@pytest.mark.parametrize("spec", [
    PenaltySpec(Family.L1, 0.7),
    PenaltySpec(Family.SCAD, 1.0),
    PenaltySpec(Family.MCP, 1.0, shape=2.0),
    PenaltySpec(Family.BRIDGE, 1.5, shape=0.5),
    PenaltySpec(Family.LOG, 1.2, epsilon=0.3),
    PenaltySpec(Family.ADAPTIVE, 0.8, shape=0.5),
])
def test_derivative_matches_finite_differences(spec):
    """Test forward differences of the value track the derivative away from kinks"""
    kinks = {Family.SCAD: (spec.lam, spec.shape * spec.lam), Family.MCP: (spec.shape * spec.lam,)}
    grid = np.linspace(0.05, 6.0, 60)
    for h in (1e-4, 1e-5):
        for t in grid:
            if any(abs(t - k) <= 2 * h for k in kinks.get(spec.family, ())):
                continue
            slope = (penalty_value(spec, t + h) - penalty_value(spec, t)) / h
            assert slope == pytest.approx(penalty_derivative(spec, t), abs=10 * h)


def test_concave_derivatives_are_nonincreasing():
    """Test p' never increases on a grid for the concave families"""
    grid = np.linspace(0.01, 8.0, 400)
    for spec in (
        PenaltySpec(Family.SCAD, 1.0),
        PenaltySpec(Family.MCP, 1.0),
        PenaltySpec(Family.BRIDGE, 1.0, shape=0.5),
        PenaltySpec(Family.LOG, 1.0, epsilon=0.1),
    ):
        assert np.all(np.diff(penalty_derivative(spec, grid)) <= 1e-12)


@pytest.mark.parametrize("a", [2.1, 3.0, 3.7, 10.0])
def test_mcp_is_less_concave_than_scad(a):
    """Test MCP with gamma = a has smaller maximum concavity than SCAD with a"""
    assert max_concavity(PenaltySpec(Family.MCP, 1.0, shape=a)) < max_concavity(PenaltySpec(Family.SCAD, 1.0, shape=a))


def test_scale_moves_the_scad_threshold():
    """Test scale s gives scale * p_{lambda/s}: slope lambda at 0, flat beyond a*lambda/s"""
    spec = PenaltySpec(Family.SCAD, 12.0)
    s = 120.0
    assert lla_weight(spec, 0.0, scale=s) == pytest.approx(12.0)
    assert lla_weight(spec, 0.05, scale=s) == pytest.approx(12.0)
    assert lla_weight(spec, 3.7 * 12.0 / s, scale=s) == 0.0
    assert lla_weight(spec, 3.0, scale=s) == 0.0
    # the same coefficient is fully penalized without the scale
    assert lla_weight(spec, 3.0) == pytest.approx(12.0)
    assert penalty_value(spec, 10.0, scale=s) == pytest.approx(0.5 * 4.7 * 12.0 ** 2 / s)
    assert penalty_value(spec, 0.05, scale=s) == pytest.approx(12.0 * 0.05)

    mcp = PenaltySpec(Family.MCP, 6.0, shape=2.0)
    assert lla_weights(mcp, np.array([0.025, 0.2]), scale=60.0) == pytest.approx([3.0, 0.0])


def test_scale_leaves_linear_families_alone():
    """Test scale has no effect on L1, adaptive and log weights"""
    beta0 = np.array([0.0, 0.4, 2.0])
    for spec in (
        PenaltySpec(Family.L1, 2.0),
        PenaltySpec(Family.ADAPTIVE, 2.0, shape=1.0, epsilon=0.1),
        PenaltySpec(Family.LOG, 2.0, epsilon=0.1),
    ):
        assert lla_weights(spec, beta0, scale=50.0) == pytest.approx(lla_weights(spec, beta0))
    with pytest.raises(ValidationError):
        lla_weights(PenaltySpec(Family.SCAD, 1.0), beta0, scale=0.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
