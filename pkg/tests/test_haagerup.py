"""
Test cho best ratio / scan, phản ví dụ trên Z², growth obstruction và
audit hằng số từ geodesic splitting.
"""

import math

import pytest
from sympy import Rational

from groups.geometry import growth_exponent
from groups.models import make_model
from processors.filtration import FilteredVector
from processors.haagerup import (
    admissible_triples,
    amenable_chi_norm,
    best_ratio,
    block_ratio,
    growth_obstruction,
    known_ceiling,
    reports_frame,
    scan,
    split_constant_audit,
    z2_bound_sequence,
    z2_witness,
)
from utils.errors import InvalidParameterError, NotAmenableError


@pytest.mark.parametrize('spec,ceiling', [
    ('free(2)', 1.0),
    ('free(3)', 1.0),
    ('zd(1)', math.sqrt(2)),
    ('cyclic(4)', math.sqrt(2)),
    ('dihedral-infinity', math.sqrt(2)),
    ('fpc(2,2)', math.sqrt(2)),
    ('zd(2)', None),
    ('heisenberg', None),
    ('fpc(2,3)', None),
])
def test_known_ceiling(spec, ceiling):
    assert known_ceiling(make_model(spec)) == ceiling


def test_admissible_triples():
    triples = admissible_triples(1)
    assert len(triples) == 5
    assert (1, 0, 0) not in triples
    assert all(abs(m - n) <= k and abs(n - k) <= m for k, m, n in admissible_triples(3))


def test_best_ratio_on_free_group(free2):
    report = best_ratio(free2, 1, 2, 1, strategy='combined', starts=4, iters=20, trials=20, seed=1)
    assert 0.99 <= report.ratio <= 1.0 + 1e-8
    assert not report.exceeds_ceiling()
    assert report.reevaluate() == pytest.approx(report.ratio, rel=1e-8)
    assert report.witness.degrees == [1]


def test_best_ratio_outside_band_is_zero(free2):
    report = best_ratio(free2, 1, 4, 1, seed=1)
    assert report.ratio == 0.0
    assert report.witness.norm2() == pytest.approx(1.0)


def test_best_ratio_is_deterministic(z2):
    a = best_ratio(z2, 1, 3, 2, strategy='random', trials=15, seed=9)
    b = best_ratio(z2, 1, 3, 2, strategy='random', trials=15, seed=9)
    assert a.ratio == b.ratio


def test_best_ratio_rejects_bad_arguments(z2):
    with pytest.raises(InvalidParameterError):
        best_ratio(z2, 1, 1, 1, strategy='greedy')
    with pytest.raises(InvalidParameterError):
        best_ratio(z2, -1, 1, 1)
    with pytest.raises(InvalidParameterError):
        best_ratio(z2, 1, 1, 1, strategy='random', trials=0)


def test_scan_respects_ceiling_on_zd1(z1):
    reports = scan(z1, 3, strategy='combined', starts=2, iters=10, trials=10, seed=2)
    assert [r.triple for r in reports] == admissible_triples(3)
    assert not any(r.exceeds_ceiling() for r in reports)
    frame = reports_frame(reports)
    assert len(frame) == len(reports)
    assert frame['ratio'].max() <= math.sqrt(2) + 1e-8


def test_z2_witness_exact():
    witness = z2_witness(4, 16, numeric_check=True)
    assert witness.m == 20
    assert witness.verified
    assert witness.bound_squared == Rational(3)
    assert witness.ratio_bound == pytest.approx(math.sqrt(3))
    assert witness.verification['full_rows'] == [5, 17]
    assert witness.verification['numeric_agrees']
    # hàng r = m là điểm (k+n, 0): c(r)² cộng lại 1+4+9+13·16+9+4+1 = 236
    assert witness.verification['image_norm2_squared'] == '59/64'
    assert witness.verification['numeric_image_norm2_squared'] == pytest.approx(236 / 256)


@pytest.mark.parametrize('k,n', [(1, 2), (2, 5), (3, 9), (5, 7)])
def test_z2_witness_exact_matches_float_block(k, n):
    witness = z2_witness(k, n, numeric_check=True)
    assert witness.verification['numeric_agrees']
    assert witness.verified


def test_z2_witness_rejects_bad_degrees():
    with pytest.raises(InvalidParameterError):
        z2_witness(0, 4)
    with pytest.raises(InvalidParameterError):
        z2_witness(4, 4)


def test_z2_bounds_are_unbounded():
    witnesses = z2_bound_sequence([1, 2, 3, 4, 5])
    assert [w.k for w in witnesses] == [2, 3, 4, 5]
    for w in witnesses:
        assert w.verified
        assert w.bound_squared == w.k - 1


def test_z2_numeric_block_exceeds_bound(z2):
    witness = z2_witness(3, 9)
    f = FilteredVector.from_values(z2, {key: float(v) for key, v in witness.f_values.items()})
    ratio = block_ratio(z2, f, witness.m, witness.n, tol=1e-13)
    assert ratio >= witness.ratio_bound - 1e-6
    assert witness.ratio_bound == pytest.approx(math.sqrt(2))


def test_growth_obstruction_verdicts():
    assert growth_obstruction(make_model('zd(3)'), 10).verdict == 'bounded'
    report = growth_obstruction(make_model('zd(4)'), 10)
    assert report.verdict == 'increasing'
    assert report.factor >= 1.2
    assert len(report.to_frame()) == 11


def test_growth_obstruction_requires_amenable(free2):
    with pytest.raises(NotAmenableError):
        growth_obstruction(free2, 6)


def test_amenable_chi_norm_approaches_ball_size(z1):
    report = amenable_chi_norm(z1, 1, [8, 2, 4])
    assert report.radii == [2, 4, 8]
    assert report.ball_size == 3
    assert report.monotone
    assert 2.9 < report.norms[-1] <= 3.0 + 1e-9


def test_split_constant_audit_on_tree(free2):
    audit = split_constant_audit(free2, 2, [(1, 1, 2), (2, 2, 2)], starts=2, iters=10, seed=3)
    assert audit.delta.value == 0
    assert audit.predicted_C == 5
    assert audit.predicted_C_squared == 25
    assert audit.within_prediction
    assert audit.max_ratio <= 1.0 + 1e-8


def test_best_ratio_on_zd2_beats_sqrt3(z2):
    report = best_ratio(z2, 4, 20, 16, seed=11)
    assert report.ceiling is None
    assert report.ratio >= math.sqrt(3) - 1e-6
    assert report.reevaluate() == pytest.approx(report.ratio, rel=1e-6)


@pytest.mark.slow
def test_free_group_scan_stays_below_one(free2):
    reports = scan(free2, 4, strategy='combined', starts=20, trials=200)
    assert len(reports) == len(admissible_triples(4))
    assert not any(r.exceeds_ceiling() for r in reports)
    assert max(r.ratio for r in reports) <= 1.0 + 1e-8


@pytest.mark.slow
def test_heisenberg_growth_is_quartic():
    model = make_model('heisenberg')
    report = growth_exponent(model, 14)
    assert 3.4 <= report.loglog_slope <= 4.6
    assert growth_obstruction(model, 14).verdict == 'increasing'
    assert growth_obstruction(make_model('zd(2)'), 14).verdict == 'bounded'
