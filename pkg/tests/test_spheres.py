"""
Test cho sphere / ball index, block structure và sphere cache trên đĩa.
"""

import numpy as np
import pytest

from groups.models import make_model
from groups.spheres import ball_index, ball_sizes, block_structure, sphere
from utils.errors import InvalidParameterError


def test_zd2_ball_sizes(z2):
    sizes = ball_sizes(z2, 6)
    assert sizes == [2 * p * p + 2 * p + 1 for p in range(7)]


def test_free_group_ball_sizes(free2):
    # |B_p| = 1 + 4(3^p − 1)/2
    assert ball_sizes(free2, 4) == [1 + 2 * (3 ** p - 1) for p in range(5)]


def test_sphere_index_positions(free2):
    s2 = sphere(free2, 2)
    assert len(s2) == 12
    for i, form in enumerate(s2.forms):
        assert s2.position(form) == i
        assert s2.position(free2.element(form)) == i
    assert s2.position((1,)) is None


def test_negative_radius_rejected(z2):
    with pytest.raises(InvalidParameterError):
        sphere(z2, -1)
    with pytest.raises(InvalidParameterError):
        ball_sizes(z2, -1)


def test_ball_index_layout(z2):
    ball = ball_index(z2, 3)
    assert len(ball) == 25
    assert ball.offsets == (0, 1, 5, 13, 25)
    for k in range(4):
        block = ball.forms[ball.sphere_slice(k)]
        assert tuple(block) == sphere(z2, k).forms
        assert np.all(ball.degrees[ball.sphere_slice(k)] == k)


def test_block_structure_products(free2):
    k, m, n = 1, 3, 2
    structure = block_structure(free2, k, m, n)
    ek, em, en = sphere(free2, k), sphere(free2, m), sphere(free2, n)
    assert structure.shape == (len(em), len(en))
    for r, c, i in zip(structure.rows, structure.cols, structure.left):
        assert free2._mul(ek.forms[i], en.forms[c]) == em.forms[r]
    # Mỗi z ∈ E_2 có đúng 3 cách kéo dài lên E_3
    assert len(structure.rows) == 3 * len(en)


def test_block_structure_outside_band_is_empty(free2):
    structure = block_structure(free2, 1, 4, 1)
    assert structure.rows.size == 0
    assert structure.shape == (len(sphere(free2, 4)), len(sphere(free2, 1)))


def test_block_structure_is_cached(z2):
    first = block_structure(z2, 2, 3, 2)
    assert block_structure(z2, 2, 3, 2) is first


def test_sphere_cache_round_trip(sphere_store):
    model = make_model('fpc(2,3)')
    forms = model.sphere_forms(3)
    assert sphere_store.save(model, 3, forms)
    assert sphere_store.load(model, 3) == forms

    fresh = make_model('fpc(2,3)')
    assert sphere(fresh, 3, store=sphere_store).forms == tuple(forms)


def test_sphere_from_cache_fills_lengths(sphere_store):
    model = make_model('zd(2)')
    forms = model.sphere_forms(4)
    sphere_store.save(model, 4, forms)

    fresh = make_model('zd(2)')
    sphere(fresh, 4, store=sphere_store)
    # length() đọc từ cache, chưa chạy BFS
    assert all(fresh.form_length(f) == 4 for f in forms)
    assert fresh.sphere_forms(0) == [fresh.identity_form()]
    assert len(fresh._spheres) == 1

    # BFS sau đó vẫn dựng đủ các sphere và geodesic
    assert fresh.sphere_forms(4) == forms
    assert ball_sizes(fresh, 4) == [2 * p * p + 2 * p + 1 for p in range(5)]
    g = fresh.element(forms[0])
    assert len(fresh.geodesic_word(g)) == 4


def test_sphere_cache_rejects_other_model(sphere_store):
    a, b = make_model('free(2)'), make_model('free(3)')
    sphere_store.save(a, 2, a.sphere_forms(2))
    assert sphere_store.load(b, 2) is None


def test_sphere_cache_ignores_truncated_file(sphere_store, free2):
    sphere_store.save(free2, 2, free2.sphere_forms(2))
    path = sphere_store.path_for(free2, 2)
    with open(path, 'r', encoding='utf-8') as fh:
        lines = fh.read().splitlines()
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write('\n'.join(lines[:-3]) + '\n')
    assert sphere_store.load(free2, 2) is None


def test_sphere_cache_clear(sphere_store, z2):
    for k in range(3):
        sphere(z2, k, store=sphere_store)
    assert sphere_store.clear() == 3
    assert sphere_store.load(z2, 1) is None
