"""
Test cho command-line front end: exit code và report được ghi.
"""

import json

import pytest

import cli
from utils.errors import InvariantViolation


def _run(tmp_path, *argv):
    return cli.run(['--output-dir', str(tmp_path), '--no-cache', *argv])


def _report(tmp_path, name):
    with open(tmp_path / name, 'r', encoding='utf-8') as fh:
        return json.load(fh)


def test_budget(tmp_path):
    assert _run(tmp_path, 'budget', '--eps', '1', '--c', '1') == 0
    report = _report(tmp_path, 'budget_none.json')
    assert report['status'] == 'ok'
    assert report['config']['eps'] == 1.0
    assert report['results']['summary']['N'] >= 1


def test_spheres(tmp_path):
    assert _run(tmp_path, 'spheres', '--model', 'zd(2)', '--radius', '3') == 0
    report = _report(tmp_path, 'spheres_zd-2.json')
    assert [row['sphere_size'] for row in report['results']['rows']] == [1, 4, 8, 12]
    assert [row['ball_size'] for row in report['results']['rows']] == [1, 5, 13, 25]
    assert (tmp_path / 'spheres_zd-2.csv').exists()


def test_same_arguments_give_identical_reports(tmp_path):
    contents = []
    for _ in range(2):
        assert _run(tmp_path, 'delta', '--model', 'free2', '--radius', '1') == 0
        contents.append((tmp_path / 'delta_free2.json').read_bytes())
    assert contents[0] == contents[1]


def test_z2_witness(tmp_path):
    assert _run(tmp_path, 'z2-witness', '--k', '4', '--n', '16', '--numeric', '--sequence', '4') == 0
    report = _report(tmp_path, 'z2-witness_none.json')
    assert report['results']['summary']['ratio_bound_squared'] == '3'
    assert [row['k'] for row in report['results']['rows']] == [2, 3, 4]


def test_cross_validate(tmp_path):
    assert _run(tmp_path, 'cross-validate', '--max', '2') == 0
    summary = _report(tmp_path, 'cross-validate_none.json')['results']['summary']
    assert summary == {'triples': 27, 'mismatches': 0}


def test_freeprod_check(tmp_path):
    argv = ['freeprod-check', '--components', '2,2', '--max', '2', '--trials', '3', '--starts', '1',
            '--iters', '3']
    assert _run(tmp_path, *argv) == 0
    summary = _report(tmp_path, 'freeprod-check_none.json')['results']['summary']
    assert summary['partition_failures'] == []
    assert summary['max_ratio'] <= summary['ceiling']


def test_metric(tmp_path):
    argv = ['metric', '--model', 'zd(1)', '--state', 'trace', '--state', 'vector:0|1',
            '--K', '1', '--R', '3', '--starts', '2']
    assert _run(tmp_path, *argv) == 0
    report = _report(tmp_path, 'metric_zd-1.json')
    assert report['results']['summary']['labels'] == ['trace', 'vector:0|1']
    assert len(report['results']['rows']) == 4


@pytest.mark.parametrize('argv', [
    ['spheres', '--model', 'torus(2)', '--radius', '2'],
    ['spheres', '--model', 'zd(2)'],
    ['budget', '--eps', '-1', '--c', '1'],
    ['inequalities', '--model', 'zd(2)'],
    ['freeprod-check', '--components', '2,2,2'],
    ['freeprod-check', '--components', 'a,b'],
    ['launch'],
])
def test_errors_exit_one(tmp_path, argv):
    assert _run(tmp_path, *argv) == 1


def test_falsified_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.COMMANDS, 'budget', lambda config: (None, {'N': 0}, True))
    assert _run(tmp_path, 'budget', '--eps', '1', '--c', '1') == 2
    assert _report(tmp_path, 'budget_none.json')['status'] == 'falsified'


def test_invariant_violation_exit_code(tmp_path, monkeypatch):
    def broken(config):
        raise InvariantViolation('ball sizes disagree')

    monkeypatch.setitem(cli.COMMANDS, 'budget', broken)
    assert _run(tmp_path, 'budget', '--eps', '1', '--c', '1') == 2
    assert not (tmp_path / 'budget_none.json').exists()
