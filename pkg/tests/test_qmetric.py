"""
Test cho state và ước lượng metric trên truncation A_K.
"""

import cmath
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from processors.filtration import FilteredVector, commutator_matrix
from processors.qmetric import (
    StateSpec,
    metric_estimate,
    metric_grid,
    metric_table,
    parse_state,
    state_eval,
)
from utils.errors import InvalidParameterError, NotAmenableError


def _half_sum_state(z1):
    return StateSpec.vector_state(z1, {(0,): 1.0, (1,): 1.0})


def test_trace_state(free2, rng):
    f = FilteredVector.random(free2, 2, rng)
    assert state_eval(free2, StateSpec.trace(), f) == f.trace()


def test_vector_state_values(z1):
    state = _half_sum_state(z1)
    assert state.radius == 1
    assert state_eval(z1, state, FilteredVector.delta(z1, (1,))) == pytest.approx(0.5)
    assert state_eval(z1, state, FilteredVector.delta(z1, (-1,))) == pytest.approx(0.5)
    assert state_eval(z1, state, FilteredVector.delta(z1, (2,))) == pytest.approx(0.0)
    assert state_eval(z1, state, FilteredVector.constant(z1)) == pytest.approx(1.0)


def test_vector_state_normalization(z1):
    with pytest.raises(InvalidParameterError):
        StateSpec.vector_state(z1, {(0,): 1.0, (1,): 1.0}, normalize=False)
    with pytest.raises(InvalidParameterError):
        StateSpec.vector_state(z1, {(0,): 0.0})


def test_character_state(z1):
    theta = 0.7
    state = StateSpec.character(z1, [cmath.exp(1j * theta)])
    f = FilteredVector.from_values(z1, {(1,): 1.0, (-2,): 2.0})
    expected = cmath.exp(1j * theta) + 2 * cmath.exp(-2j * theta)
    assert state_eval(z1, state, f) == pytest.approx(expected)


def test_character_needs_amenable(free2):
    with pytest.raises(NotAmenableError):
        StateSpec.character(free2, [1.0, 1.0])
    with pytest.raises(NotAmenableError):
        parse_state(free2, 'character:0,0')


def test_parse_state(z1, z2):
    assert parse_state(z1, 'trace').kind == 'trace'
    vector = parse_state(z1, 'vector:0|1')
    assert vector.kind == 'vector'
    assert vector.label == 'vector:0|1'
    assert vector.vector.norm2() == pytest.approx(1.0)
    character = parse_state(z2, 'character:0.5,1')
    assert character.phases[1] == pytest.approx(cmath.exp(1j))
    with pytest.raises(InvalidParameterError):
        parse_state(z1, 'bogus')
    with pytest.raises(InvalidParameterError):
        StateSpec('mixed')


def test_metric_of_state_with_itself(z1):
    state = _half_sum_state(z1)
    est = metric_estimate(z1, state, state, 2, 4)
    assert est.upper_estimate == 0.0
    assert est.witness.is_zero()


def test_metric_rejects_bad_truncation(z1):
    trace = StateSpec.trace()
    with pytest.raises(InvalidParameterError):
        metric_estimate(z1, trace, trace, 0, 3)
    with pytest.raises(InvalidParameterError):
        metric_estimate(z1, trace, trace, 3, 2)
    with pytest.raises(InvalidParameterError):
        metric_estimate(z1, trace, trace, 1, 2, C=0.0)


def test_metric_matches_symmetric_reduction(z1):
    # Theo đối xứng x ↦ −x và liên hợp phức, tối ưu có dạng
    # a = α(δ₁ + δ₋₁) + γ(δ₂ + δ₋₂) và giá trị bằng α
    K, R = 2, 6
    one = FilteredVector.from_values(z1, {(1,): 1.0, (-1,): 1.0})
    two = FilteredVector.from_values(z1, {(2,): 1.0, (-2,): 1.0})
    M1 = commutator_matrix(z1, one, R).to_dense()
    M2 = commutator_matrix(z1, two, R).to_dense()
    best = minimize_scalar(lambda r: np.linalg.norm(M1 + r * M2, 2), bounds=(-3, 3),
                           method='bounded', options={'xatol': 1e-10})
    oracle = 1.0 / best.fun

    est = metric_estimate(z1, StateSpec.trace(), _half_sum_state(z1), K, R, starts=6, seed=3,
                          C=math.sqrt(2))
    assert est.upper_estimate <= oracle * (1 + 1e-6)
    assert est.upper_estimate >= oracle * (1 - 2e-2)
    assert est.witness.is_self_adjoint()
    assert est.witness.trace() == 0
    assert est.certified
    assert 0 < est.certified_lower <= est.upper_estimate
    assert est.to_record()['K'] == K


def test_metric_table_is_symmetric(z1):
    states = [StateSpec.trace(), _half_sum_state(z1), parse_state(z1, 'character:0.7')]
    table = metric_table(z1, states, 1, 3, starts=3)
    assert table.zero_diagonal
    assert table.symmetric
    assert table.values.shape == (3, 3)
    assert np.all(table.values >= 0)
    frame = table.to_frame()
    assert len(frame) == 9
    assert set(frame.columns) >= {'mu', 'nu', 'upper_estimate', 'i', 'j'}


def test_metric_grid_is_monotone_in_K(z1):
    grid = metric_grid(z1, StateSpec.trace(), _half_sum_state(z1), [1, 2, 5], [4], starts=3)
    assert sorted(grid) == [(1, 4), (2, 4)]
    assert grid[(2, 4)].upper_estimate >= grid[(1, 4)].upper_estimate - 1e-9


@pytest.mark.slow
def test_metric_table_of_vector_states(z1):
    states = [
        StateSpec.vector_state(z1, {(0,): 1.0}),
        _half_sum_state(z1),
        StateSpec.vector_state(z1, {(0,): 1.0, (1,): 1.0, (2,): 1.0}),
    ]
    table = metric_table(z1, states, 2, 8)
    assert table.zero_diagonal
    assert table.symmetry_defect <= 2e-6
    assert table.triangle_violations == []
    assert table.consistent
    assert table.values[0, 1] > 0


@pytest.mark.slow
def test_metric_grid_is_monotone(z1):
    Ks, Rs = [1, 2, 3], [4, 6, 8]
    grid = metric_grid(z1, StateSpec.trace(), _half_sum_state(z1), Ks, Rs)
    assert len(grid) == 9
    for R in Rs:
        for lo, hi in zip(Ks, Ks[1:]):
            assert grid[(hi, R)].upper_estimate >= grid[(lo, R)].upper_estimate - 1e-9
    # L_R tăng theo R nên sup giảm theo R
    for K in Ks:
        for lo, hi in zip(Rs, Rs[1:]):
            previous = grid[(K, lo)].upper_estimate
            assert grid[(K, hi)].upper_estimate <= previous * (1 + 1e-3) + 2e-6
