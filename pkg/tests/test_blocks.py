"""
Test cho block operator trên free product, tách theo cell, cận √5·C và
đối chiếu với dihedral-infinity.
"""

import math

import numpy as np
import pytest

from freeprod.blocks import (
    FAMILY_FACTORS,
    block_by_cell,
    bound_frame,
    cross_validate_group,
    fp_block,
    free_block_structure,
    free_product_bound_check,
    free_product_bound_scan,
)
from freeprod.cells import CellLabel, cell_memberships
from freeprod.components import component_from_cyclic
from freeprod.words import FreeProduct, FreeWord, get_free_product
from utils.errors import DimensionMismatchError, InvalidParameterError


def test_fp_block_shape_and_entries(involution):
    fp = get_free_product(involution, involution)
    s = fp.word([(1, 1)])
    B = fp_block({s: 1.0}, 2, 1, involution, involution)
    assert B.shape == (2, 2)
    # s*·t = st, s*·s = 1 (degree 0, bị bỏ)
    dense = B.to_dense()
    row = fp.index(2)[fp.word([(1, 1), (2, 1)])]
    col = fp.index(1)[fp.word([(2, 1)])]
    assert dense[row, col] == 1.0
    assert B.nnz == 1


def test_fp_block_conjugates_coefficients(involution):
    fp = get_free_product(involution, involution)
    s = fp.word([(1, 1)])
    B = fp_block({s: 2j}, 0, 1, involution, involution)
    assert B.to_dense()[0, fp.index(1)[s]] == -2j


def test_fp_block_outside_band_is_empty(involution):
    fp = get_free_product(involution, involution)
    structure = free_block_structure(fp, 1, 4, 1)
    assert structure.rows.size == 0
    assert structure.shape == (2, 2)


def test_coefficient_validation(involution):
    fp = get_free_product(involution, involution)
    s, st = fp.word([(1, 1)]), fp.word([(1, 1), (2, 1)])
    with pytest.raises(InvalidParameterError):
        fp_block({s: 1.0, st: 1.0}, 1, 1, involution, involution)
    with pytest.raises(InvalidParameterError):
        fp_block(np.ones(2), 1, 1, involution, involution)
    with pytest.raises(DimensionMismatchError):
        fp_block(np.ones(3), 1, 1, involution, involution, k=1)
    with pytest.raises(InvalidParameterError):
        fp_block({s: 1.0}, 1, 1, involution, involution, k=2)
    with pytest.raises(InvalidParameterError):
        fp_block({}, 1, 1, involution, involution)


def test_empty_coefficients_with_degree(involution):
    B = fp_block({}, 1, 1, involution, involution, k=2)
    assert B.nnz == 0


@pytest.mark.parametrize('m,k,n', [
    (m, k, n)
    for m in range(4) for k in range(4) for n in range(4)
])
def test_cross_validation_with_dihedral_group(m, k, n):
    report = cross_validate_group(m, k, n, seed=11)
    assert report.equal, report.to_record()


@pytest.mark.slow
def test_cross_validation_up_to_four():
    for m in range(5):
        for k in range(5):
            for n in range(5):
                assert cross_validate_group(m, k, n).equal


def test_block_by_cell_consistent(rng):
    fp = FreeProduct(component_from_cyclic(3), component_from_cyclic(2))
    for k, m, n in [(1, 2, 1), (2, 2, 2), (2, 3, 1), (1, 1, 1), (3, 3, 2), (2, 4, 2)]:
        a = rng.standard_normal(len(fp.basis(k))) + 1j * rng.standard_normal(len(fp.basis(k)))
        report = block_by_cell(fp, a, k, m, n)
        assert report.consistent, report.to_record()
        assert report.overlapping_rows == 0
        assert report.uncovered_rows == 0
        assert report.structure_violations == 0
        assert report.max_cell_norm <= report.norm + 1e-6
        # component constants chưa khai báo: không kiểm tra cận
        assert report.within_bounds is None


@pytest.mark.parametrize('k,m,n', [(1, 2, 1), (2, 2, 2), (2, 3, 1), (1, 1, 2), (3, 3, 2), (2, 4, 2)])
def test_cells_respect_family_bounds(involution, rng, k, m, n):
    fp = get_free_product(involution, involution)
    a = rng.standard_normal(len(fp.basis(k)))
    report = block_by_cell(fp, a, k, m, n)
    assert report.constant == 1.0
    assert report.consistent, report.to_record()
    assert report.within_bounds, report.to_record()
    for variant, value in report.family_norms.items():
        assert value <= FAMILY_FACTORS[variant] * np.linalg.norm(a) + 1e-6


def test_too_small_constant_is_flagged(involution):
    fp = get_free_product(involution, involution)
    report = block_by_cell(fp, np.ones(2), 1, 2, 1, C=0.01)
    assert report.consistent
    assert report.within_bounds is False
    assert report.bound_violations


def test_wrong_cell_suffix_is_rejected(involution):
    fp = get_free_product(involution, involution)
    s = fp.word([(1, 1)])

    def wrong(x, k, n):
        return [CellLabel('P', s=s)]

    report = block_by_cell(fp, np.ones(2), 1, 2, 1, assign=wrong)
    assert report.structure_violations > 0
    assert not report.consistent


def test_overlapping_cells_are_rejected(involution):
    fp = get_free_product(involution, involution)

    def twice(x, k, n):
        return cell_memberships(x, k, n) + [CellLabel('PT', t=x.slice(1))]

    report = block_by_cell(fp, np.ones(2), 1, 2, 1, assign=twice)
    assert report.overlapping_rows == 2
    assert report.shared_support_pairs > 0
    assert not report.consistent


def test_uncovered_rows_are_rejected(involution):
    fp = get_free_product(involution, involution)
    report = block_by_cell(fp, np.ones(2), 1, 2, 1, assign=lambda x, k, n: [])
    assert report.uncovered_rows == 2
    assert not report.consistent


def test_bound_check_on_involutions(involution):
    report = free_product_bound_check(involution, involution, 1, 2, 1, trials=10, starts=2, iters=10, seed=5)
    assert report.ceiling == pytest.approx(math.sqrt(5))
    assert report.holds
    # C[Z/2] * C[Z/2] là group algebra của dihedral-infinity: ratio <= √2
    assert 0.99 <= report.ratio <= math.sqrt(2) + 1e-8


def test_bound_check_empty_triple(involution):
    report = free_product_bound_check(involution, involution, 1, 4, 1, trials=3, starts=1, iters=2)
    assert report.ratio == 0.0
    assert report.witness is None
    assert report.holds


def test_bound_check_needs_declared_constants():
    A = component_from_cyclic(3)
    with pytest.raises(InvalidParameterError):
        free_product_bound_check(A, A, 1, 1, 1)


def test_bound_scan_on_mixed_product(cyclic3, involution):
    reports = free_product_bound_scan(cyclic3, involution, 2, trials=5, starts=1, iters=5, seed=2)
    assert all(abs(r.m - r.n) <= r.k for r in reports)
    assert all(r.holds for r in reports)
    frame = bound_frame(reports)
    assert len(frame) == len(reports)
    assert frame['holds'].all()


def test_bound_check_is_deterministic(involution):
    a = free_product_bound_check(involution, involution, 2, 2, 2, trials=5, starts=1, iters=3, seed=8)
    b = free_product_bound_check(involution, involution, 2, 2, 2, trials=5, starts=1, iters=3, seed=8)
    assert a.ratio == b.ratio


@pytest.mark.slow
def test_bound_acceptance_scale(cyclic3, involution):
    for A1, A2 in [(involution, involution), (cyclic3, involution)]:
        for report in free_product_bound_scan(A1, A2, 3, trials=100, starts=3, iters=20):
            assert report.holds, report.to_record()


def test_identity_word_is_unit(involution):
    fp = get_free_product(involution, involution)
    s = fp.word([(1, 1)])
    assert fp.reduce_product(FreeWord(), s) == {s: 1.0}
