"""
Test cho group models: normal form, phép nhân, độ dài, sphere và character.
"""

import itertools

import numpy as np
import pytest

from groups.models import FreeGroupModel, ZdModel, make_model, sample_elements
from utils.errors import InvalidParameterError


@pytest.mark.parametrize('spec,expected', [
    ('free(2)', 'free(2)'),
    ('zd(3)', 'zd(3)'),
    ('z2', 'zd(2)'),
    ('heisenberg', 'heisenberg'),
    ('cyclic(5)', 'cyclic(5)'),
    ('fpc(2,3)', 'free-product-cyclic(2,3)'),
    ('dihedral', 'dihedral-infinity'),
    ({'kind': 'free', 'params': [3]}, 'free(3)'),
])
def test_make_model_names(spec, expected):
    assert make_model(spec).name == expected


@pytest.mark.parametrize('spec', ['free', 'zd(0)', 'cyclic(1)', 'torus(2)', 'free(a)', 'fpc(2)'])
def test_make_model_rejects_bad_specs(spec):
    with pytest.raises(InvalidParameterError):
        make_model(spec)


def test_fingerprint_is_stable():
    assert make_model('free(2)').fingerprint == make_model('free2').fingerprint
    assert make_model('free(2)').fingerprint != make_model('free(3)').fingerprint


@pytest.mark.parametrize('spec', ['free(2)', 'zd(2)', 'heisenberg', 'fpc(2,3)', 'dihedral-infinity', 'cyclic(4)'])
def test_group_axioms_on_small_ball(spec):
    model = make_model(spec)
    elements = sample_elements(model, 3, 12, np.random.default_rng(1))
    e = model.identity
    for g in elements:
        assert model.multiply(g, e) == g
        assert model.multiply(model.invert(g), g) == e
        assert model.length(model.invert(g)) == model.length(g)
    for g, h, k in itertools.islice(itertools.product(elements, repeat=3), 200):
        assert model.multiply(model.multiply(g, h), k) == model.multiply(g, model.multiply(h, k))
        assert model.length(model.multiply(g, h)) <= model.length(g) + model.length(h)


@pytest.mark.parametrize('spec,sizes', [
    ('free(2)', [1, 4, 12, 36, 108]),
    ('zd(2)', [1, 4, 8, 12, 16]),
    ('zd(1)', [1, 2, 2, 2, 2]),
    ('heisenberg', [1, 4, 12]),
    ('dihedral-infinity', [1, 2, 2, 2, 2]),
    ('cyclic(5)', [1, 2, 2, 0, 0]),
    ('fpc(2,2)', [1, 2, 2, 2, 2]),
])
def test_sphere_sizes(spec, sizes):
    model = make_model(spec)
    assert [len(model.sphere_forms(k)) for k in range(len(sizes))] == sizes


def test_bfs_length_matches_closed_forms():
    # Override form_length bằng công thức; BFS là ground truth
    for model in (FreeGroupModel(2), ZdModel(2)):
        for k in range(4):
            for form in model.sphere_forms(k):
                assert model._bfs_length(form) == k == model.form_length(form)


def test_spheres_are_sorted_and_distinct(free2):
    forms = free2.sphere_forms(3)
    assert len(set(forms)) == len(forms)
    assert forms == sorted(forms, key=free2.sort_key)
    assert free2.sphere_forms(1) == [(1,), (-1,), (2,), (-2,)]


def test_geodesic_word_multiplies_back():
    model = make_model('heisenberg')
    for form in model.sphere_forms(3):
        g = model.element(form)
        word = model.geodesic_word(g)
        assert len(word) == 3
        product = model.identity
        for s in word:
            product = model.multiply(product, s)
        assert product == g


def test_heisenberg_central_generator_commutes():
    model = make_model('heisenberg')
    z = model.central_generator()
    assert model.length(z) == 4
    for s in model.generators:
        assert model.multiply(s, z) == model.multiply(z, s)


def test_character_values(z2):
    phases = [1j, -1.0]
    g = z2.element((2, -1))
    assert z2.character_value(phases, g) == pytest.approx(-1.0 * -1.0)


def test_character_rejects_broken_relators():
    model = make_model('cyclic(3)')
    model.check_phases([np.exp(2j * np.pi / 3)])
    with pytest.raises(InvalidParameterError):
        model.check_phases([1j])
    with pytest.raises(InvalidParameterError):
        model.check_phases([2.0])


def test_form_encoding_round_trip():
    model = make_model('fpc(2,3)')
    for form in model.sphere_forms(3):
        assert model.decode_form(model.encode_form(form)) == form
    assert model.encode_form(()) == 'e'


def test_amenability_flags():
    assert make_model('zd(2)').amenable
    assert make_model('heisenberg').amenable
    assert make_model('free(1)').amenable
    assert not make_model('free(2)').amenable
    assert make_model('fpc(2,2)').amenable
    assert not make_model('fpc(2,3)').amenable
