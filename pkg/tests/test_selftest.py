import pytest

import quadtex


def test_oracle_suite_passes():
    results = quadtex.run_selftest(suites=('oracle',))
    assert results
    assert {r.suite for r in results} == {'oracle'}
    failed = [(r.name, r.detail) for r in results if not r.ok]
    assert not failed


@pytest.mark.slow
def test_fd_suite_passes():
    results = quadtex.run_selftest(suites=('fd',))
    failed = [(r.name, r.detail) for r in results if not r.ok]
    assert not failed


def test_failing_check_is_reported():
    results = [quadtex.CheckResult('fd', 'ok_check', True, 'fine', 0.1),
               quadtex.CheckResult('oracle', 'broken', False, 'ValueError: boom', 0.2)]
    table = quadtex.format_table(results).splitlines()
    assert table[0].split() == ['check', 'ok', 'detail']
    assert 'PASS' in table[1] and 'fd.ok_check' in table[1]
    assert 'FAIL' in table[2] and 'ValueError: boom' in table[2]
    assert table[-1] == '1/2 passed'


def test_unknown_suite_runs_nothing():
    assert quadtex.run_selftest(suites=('nope',)) == []
