"""Acceptance criteria 1-14 at their stated tolerances.

The whole suite runs once (about two minutes, most of it the
determinism rerun) and each criterion is then reported and asserted on
its own.  CSVs land in a pytest temporary directory.
"""
import pytest

from porous_euler.verify import run_verify

N_CRITERIA = 14


@pytest.fixture(scope="session")
def verdicts(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    results = run_verify(str(out), seed=0, determinism=True)
    return {r.number: r for r in results}


def test_all_criteria_reported(verdicts):
    assert sorted(verdicts) == list(range(1, N_CRITERIA + 1))


@pytest.mark.parametrize("number", range(1, N_CRITERIA + 1))
def test_criterion(verdicts, number, capsys):
    r = verdicts[number]
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()
