"""
Test cho FilteredVector, block operator, band của [D, a], smoothing,
truncation budget và các bất đẳng thức tăng trưởng.
"""

import math

import numpy as np
import pytest

from groups.models import make_model
from groups.spheres import ball_index, sphere
from processors.filtration import (
    FilteredVector,
    check_growth_inequalities,
    commutator_matrix,
    conv_block,
    dirac_bands,
    phi_norm_sq,
    seminorm_lower,
    seminorm_upper,
    smoothing,
    truncated_operator,
    truncation_budget,
    zeta2_tail,
)
from processors.haagerup import known_ceiling
from processors.linop import op_norm
from utils.errors import DimensionMismatchError, InvalidParameterError


def _dense_convolution(model, f, R):
    ball = ball_index(model, R)
    out = np.zeros((len(ball), len(ball)), dtype=complex)
    for y, coeff in f.values().items():
        for j, z in enumerate(ball.forms):
            i = ball.index.get(model._mul(y, z))
            if i is not None:
                out[i, j] += coeff
    return out


CORPUS_MODELS = ['free(2)', 'zd(1)', 'zd(2)', 'dihedral-infinity']


def _corpus(model, count, degree, seed=2024):
    """count phần tử ngẫu nhiên cố định trên B_degree"""
    rng = np.random.default_rng(seed)
    return [FilteredVector.random(model, degree, rng) for _ in range(count)]


def test_components_follow_spheres(free2):
    f = FilteredVector.from_values(free2, {(1,): 2.0, (1, 2): 1j, (): 0.5})
    assert f.degrees == [0, 1, 2]
    assert f.top_degree == 2
    assert f.trace() == 0.5
    assert f.coefficient((1, 2)) == 1j
    assert f.coefficient((2, 1)) == 0
    assert f.component_norms()[1] == pytest.approx(2.0)
    assert f.norm2() == pytest.approx(math.sqrt(4 + 1 + 0.25))


def test_zero_components_are_dropped(z2):
    f = FilteredVector(z2, {1: np.zeros(4), 2: np.ones(8)})
    assert f.degrees == [2]
    assert FilteredVector.zeros(z2).is_zero()


def test_wrong_component_shape(z2):
    with pytest.raises(DimensionMismatchError):
        FilteredVector(z2, {1: np.ones(3)})
    with pytest.raises(InvalidParameterError):
        FilteredVector(z2, {-1: np.ones(1)})


def test_adjoint_inverts_support(free2):
    f = FilteredVector.from_values(free2, {(1, 2): 1 + 2j})
    adj = f.adjoint()
    assert adj.coefficient((-2, -1)) == 1 - 2j
    assert adj.adjoint().values() == f.values()
    assert (f + adj).is_self_adjoint()
    assert not f.is_self_adjoint()


def test_random_self_adjoint_trace_free(z2, rng):
    f = FilteredVector.random(z2, 3, rng, self_adjoint=True, trace_free=True)
    assert f.is_self_adjoint()
    assert f.trace() == 0
    assert f.top_degree == 3


def test_text_format(free2, rng):
    f = FilteredVector.random(free2, 2, rng)
    again = FilteredVector.from_text(free2, f.to_text())
    assert (again - f).norm2() == 0.0


def test_text_format_writes_plain_floats(z1):
    f = FilteredVector.from_values(z1, {(1,): np.float64(0.5), (-2,): complex(np.float64(0.1), -1 / 3)})
    text = f.to_text()
    assert 'np.' not in text
    assert '1 0.5 0.0' in text.splitlines()
    assert (FilteredVector.from_text(z1, text) - f).norm2() == 0.0
    with pytest.raises(InvalidParameterError):
        FilteredVector.from_text(z1, text + '2 half 0\n')


def test_text_format_checks_model(free2, z2):
    text = FilteredVector.constant(free2).to_text()
    with pytest.raises(InvalidParameterError):
        FilteredVector.from_text(z2, text)
    with pytest.raises(InvalidParameterError):
        FilteredVector.from_text(free2, '')


def test_ball_vector_round_trip(z2, rng):
    f = FilteredVector.random(z2, 2, rng)
    vec = f.ball_vector(4)
    assert len(vec) == len(ball_index(z2, 4))
    assert (FilteredVector.from_ball_vector(z2, 4, vec) - f).is_zero()
    with pytest.raises(InvalidParameterError):
        f.ball_vector(1)


def test_truncated_operator_matches_dense(z2, rng):
    f = FilteredVector.random(z2, 2, rng)
    dense = _dense_convolution(z2, f, 4)
    assert np.allclose(truncated_operator(z2, f, 4).to_dense(), dense)


def test_conv_block_is_sub_block(free2, rng):
    f = FilteredVector.random(free2, 2, rng, degrees=[2])
    ball = ball_index(free2, 4)
    full = truncated_operator(free2, f, 4).to_dense()
    for m in range(5):
        for n in range(5):
            block = conv_block(free2, f, m, n).to_dense()
            assert np.allclose(block, full[ball.sphere_slice(m), ball.sphere_slice(n)])


def test_conv_block_needs_single_component(free2, rng):
    f = FilteredVector.random(free2, 2, rng)
    with pytest.raises(InvalidParameterError):
        conv_block(free2, f, 2, 2)


def test_generator_block_on_free_group(free2):
    f = FilteredVector.delta(free2, (1,))
    block = conv_block(free2, f, 2, 1)
    # a·z có độ dài 2 với mọi z ∈ E_1 trừ a⁻¹
    assert block.nnz == 3
    assert op_norm(block).value == pytest.approx(1.0)


def test_commutator_entries(z2, rng):
    f = FilteredVector.random(z2, 2, rng)
    R = 4
    ball = ball_index(z2, R)
    dense = _dense_convolution(z2, f, R)
    D = np.diag(ball.degrees.astype(float))
    assert np.allclose(commutator_matrix(z2, f, R).to_dense(), D @ dense - dense @ D)


def test_dirac_band_identity(z2, rng):
    f = FilteredVector.random(z2, 2, rng, self_adjoint=True)
    report = dirac_bands(z2, f, 5)
    assert report.identity_holds
    assert sorted(report.bands) == [-2, -1, 0, 1, 2]
    assert report.bands[0].norm_lower > 0
    assert report.bands[2].interior_norm_lower <= report.bands[2].norm_lower


def test_dirac_bands_need_radius(z2, rng):
    f = FilteredVector.random(z2, 3, rng)
    with pytest.raises(InvalidParameterError):
        dirac_bands(z2, f, 2)


def test_seminorm_bounds_on_free_group(free2, rng):
    f = FilteredVector.random(free2, 2, rng, self_adjoint=True)
    lower = seminorm_lower(free2, f, 4)
    assert 0 < lower <= seminorm_upper(f, 1.0)
    assert seminorm_lower(free2, FilteredVector.constant(free2), 2) == 0.0
    with pytest.raises(InvalidParameterError):
        seminorm_upper(f, 0.0)


def test_zeta2_tail_brackets():
    for M in (1, 2, 5, 50, 999, 1001, 5000):
        tail = zeta2_tail(M)
        assert 1 / (M + 1) < tail < 1 / M
    partial = math.fsum(1.0 / (k * k) for k in range(11, 200000))
    assert zeta2_tail(10) == pytest.approx(partial, abs=1e-5)
    assert phi_norm_sq(0) == pytest.approx(math.pi ** 2 / 3)


def test_truncation_budget_is_minimal():
    for eps, C in [(1.0, 1.0), (0.5, math.sqrt(2)), (2.0, 3.0)]:
        budget = truncation_budget(eps, C)
        threshold_n = eps ** 2 / (8 * math.pi ** 2)
        assert 2 * math.pi * math.sqrt(phi_norm_sq(budget.N)) < eps
        assert budget.N == 0 or zeta2_tail(budget.N - 1) >= threshold_n
        threshold_k = (eps / (C * (2 * budget.N + 1))) ** 2
        assert zeta2_tail(budget.K) < threshold_k
        assert budget.K == 0 or zeta2_tail(budget.K - 1) >= threshold_k


def test_truncation_budget_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        truncation_budget(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        truncation_budget(1.0, -1.0)


@pytest.mark.parametrize('N', [0, 1, 2])
def test_smoothing_bound_holds(free2, rng, N):
    f = FilteredVector.random(free2, 3, rng, self_adjoint=True)
    report = smoothing(free2, f, N, 5, C=1.0)
    assert report.identity_deviation == 0.0
    assert report.holds
    assert report.norm <= report.bound


def test_smoothing_removes_everything_beyond_top_degree(z2, rng):
    f = FilteredVector.random(z2, 2, rng)
    report = smoothing(z2, f, 2, 4)
    assert report.matrix.nnz == 0
    assert report.norm == 0.0


def test_growth_inequalities_hold_on_free_group(free2, rng):
    f = FilteredVector.random(free2, 2, rng)
    report = check_growth_inequalities(free2, f, 1.0, 4)
    assert report.all_hold
    frame = report.to_frame()
    assert set(frame['inequality']) == {
        'sphere_growth', 'sobolev_bound', 'polynomial_bound', 'sphere_block',
    }


def test_block_condition_fails_on_zd2_with_small_constant(z2):
    f = FilteredVector.from_values(z2, {(1, 0): 1.0, (0, 1): 1.0})
    report = check_growth_inequalities(z2, f, 1.0, 6)
    assert not report.all_hold
    assert {r.name for r in report.violations} == {'sphere_block'}
    assert report.violations[0].lhs > math.sqrt(2) * 1.3


def _direct_tail(M, terms=10 ** 6):
    """Σ_{k>M} k⁻²: terms số hạng cộng trực tiếp, phần dư ≈ 1/(M + terms + 1/2)"""
    k = np.arange(M + 1, M + terms + 1, dtype=np.float64)
    return float(np.sum(1.0 / (k * k))) + 1.0 / (M + terms + 0.5)


@pytest.mark.parametrize('C', [1.0, 5.0])
@pytest.mark.parametrize('eps', [2.0, 1.0, 0.5])
def test_truncation_budget_against_direct_sums(eps, C):
    budget = truncation_budget(eps, C)
    N, K = budget.as_tuple()

    # 2π‖φ_N‖₂ < ε  <=>  Σ_{k>N} k⁻² < ε²/(8π²)
    threshold_n = eps ** 2 / (8 * math.pi ** 2)
    assert _direct_tail(N) < threshold_n
    assert N == 0 or _direct_tail(N - 1) >= threshold_n

    threshold_k = (eps / (C * (2 * N + 1))) ** 2
    assert _direct_tail(K) < threshold_k
    assert K == 0 or _direct_tail(K - 1) >= threshold_k

    assert zeta2_tail(N) == pytest.approx(_direct_tail(N), rel=1e-9)
    assert zeta2_tail(K) == pytest.approx(_direct_tail(K), rel=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize('spec', CORPUS_MODELS)
def test_dirac_band_identity_on_corpus(spec):
    model = make_model(spec)
    for f in _corpus(model, 50, 3):
        report = dirac_bands(model, f, 8, block_norms=False)
        assert report.identity_deviation <= 1e-12
        assert report.decomposition_deviation <= 1e-12
        assert sorted(report.bands) == list(range(-f.top_degree, f.top_degree + 1))


@pytest.mark.slow
@pytest.mark.parametrize('N', [0, 1, 2])
@pytest.mark.parametrize('spec', CORPUS_MODELS)
def test_smoothing_bound_on_corpus(spec, N):
    model = make_model(spec)
    C = known_ceiling(model)
    for f in _corpus(model, 50, 3):
        report = smoothing(model, f, N, 8, C=C)
        assert report.identity_deviation == 0.0
        assert report.holds


@pytest.mark.slow
def test_growth_inequalities_on_free_group_corpus(free2):
    for f in _corpus(free2, 100, 3):
        report = check_growth_inequalities(free2, f, 1.0, 6)
        assert report.all_hold
        frame = report.to_frame()
        assert frame['holds'].all()
        assert (frame['margin'] >= -1e-9 * frame['rhs'] - 1e-12).all()
