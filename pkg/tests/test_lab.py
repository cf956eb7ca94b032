"""
Tests for rate studies, result emission and manifest replay.
"""
import numpy as np
import pandas as pd
import pytest

from src.errors import InsufficientLadder
from src.lab import (CSV_COLUMNS, FAIL, PASS, emit, expected_exponent, fit_slope, load_manifest, load_study,
                     make_manifest, max_relative_deviation, rate_verdict, replay_manifest, run_rate_study,
                     run_symbol_sweep)
from src.solver import SolveReport, SolverContext, solve
from src.utils import read_json

from tests.conftest import make_config

LAB_CONFIG = {
    'tasks': {'max_retries': 3},
    'solver': {'c0_factor': 1.5},
    'operators': {'seed': 0, 'trials': 4},
}
REFERENCE_LADDER = [2.0, 2.8, 4.0, 5.7, 8.0]


@pytest.fixture(scope="module")
def reference_study(context1):
    return run_rate_study(make_config(), REFERENCE_LADDER, LAB_CONFIG, workers=2, context=context1)


def test_fit_slope_recovers_power_law():
    c = np.array([2.0, 4.0, 8.0, 16.0])
    assert fit_slope(c, 3.0 * c ** -6.0) == pytest.approx(-6.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_slope([2.0], [1.0])
    with pytest.raises(ValueError):
        fit_slope([2.0, 4.0], [1.0])


def test_expected_exponents():
    assert expected_exponent(0.75, 3.0) == pytest.approx(-6.0)
    assert expected_exponent(0.75, 2.0) == pytest.approx(-4.5)
    assert expected_exponent(0.6, 3.0) == pytest.approx(-3.0)
    assert expected_exponent(0.6, 1.5) == pytest.approx(-1.8)


def test_verdicts():
    assert rate_verdict(-6.0, 0.75, 3.0) == PASS
    assert rate_verdict(-5.2, 0.75, 3.0) == PASS
    assert rate_verdict(-4.0, 0.75, 3.0) == FAIL
    assert rate_verdict(-7.5, 0.75, 3.0) == FAIL
    # one-sided for p <= 2
    assert rate_verdict(-4.2, 0.75, 2.0) == PASS
    assert rate_verdict(-9.0, 0.75, 2.0) == PASS
    assert rate_verdict(-3.9, 0.75, 2.0) == FAIL


def test_ladder_validation(context1):
    with pytest.raises(ValueError):
        run_rate_study(make_config(), [4.0, 8.0, 16.0], LAB_CONFIG, context=context1)
    with pytest.raises(ValueError):
        run_rate_study(make_config(), [4.0, 8.0, 8.0, 16.0], LAB_CONFIG, context=context1)


def test_too_few_converged(context1):
    with pytest.raises(InsufficientLadder):
        run_rate_study(make_config(), [1.01, 1.02, 1.03, 1.05], LAB_CONFIG, context=context1)


def test_reference_rate(reference_study):
    assert -6.9 <= reference_study.fitted_slope <= -5.1
    assert reference_study.verdict == PASS
    assert reference_study.expected_exponent == pytest.approx(-6.0)
    norms = reference_study.norms
    assert len(norms) >= 4
    assert all(n > 0 for n in norms)
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_reference_rate_is_asymptotic(reference_study):
    converged = reference_study.converged
    trimmed = fit_slope([e.c for e in converged[1:]], [e.norm_max for e in converged[1:]])
    assert abs(trimmed - reference_study.fitted_slope) <= 0.3


def test_quadratic_nonlinearity_rate():
    base = make_config(p=2.0)
    study = run_rate_study(base, REFERENCE_LADDER, LAB_CONFIG, workers=2, context=SolverContext.build(base))
    assert study.fitted_slope <= -4.0
    assert study.verdict == PASS


def test_rate_at_smaller_s(context1):
    study = run_rate_study(make_config(s=0.6), [4.0, 5.7, 8.0, 11.3, 16.0], LAB_CONFIG, workers=2,
                           context=context1)
    assert study.fitted_slope == pytest.approx(-3.0, rel=0.15)


def test_auto_c0_recovers_low_rungs(context1):
    study = run_rate_study(make_config(), [1.05, 4.0, 5.7, 8.0, 11.3], LAB_CONFIG, workers=2, auto_c0=True,
                           context=context1)
    low = study.entries[0]
    assert low.requested_c == 1.05
    assert low.attempts[0] == 1.05
    assert len(low.attempts) >= 2
    assert len(study.converged) >= 4


def test_emit_study(reference_study, tmp_path):
    manifest = make_manifest('rates', LAB_CONFIG, make_config(), REFERENCE_LADDER, workers=2)
    paths = emit(reference_study, tmp_path / 'rates', manifest)

    with open(paths['csv']) as f:
        assert f.readline().strip() == ','.join(CSV_COLUMNS)
    frame = pd.read_csv(paths['csv'])
    assert list(frame['c']) == [e.c for e in reference_study.entries]

    assert load_study(paths['json']) == reference_study

    saved = load_manifest(paths['manifest'])
    assert saved.outputs == {'csv': str(paths['csv']), 'json': str(paths['json'])}
    assert saved.excluded == reference_study.excluded
    assert saved.resolvent_constants is not None
    assert saved.decay_constants is not None
    assert saved.finished_at is not None


def test_manifest_replay_reproduces_norms(reference_study, tmp_path):
    manifest = make_manifest('rates', LAB_CONFIG, make_config(), REFERENCE_LADDER, workers=2, resolvent=False)
    paths = emit(reference_study, tmp_path / 'rates', manifest)
    replayed = replay_manifest(paths['manifest'])
    assert max_relative_deviation(reference_study, replayed) <= 1e-12


def test_replay_rejects_other_commands(tmp_path):
    manifest = make_manifest('solve', LAB_CONFIG, make_config(), resolvent=False)
    with pytest.raises(ValueError):
        replay_manifest(manifest)


def test_emit_report(context1, tmp_path):
    report = solve(make_config(c=16.0, lipschitz_pairs=0), context1)
    paths = emit(report, tmp_path / 'solve')
    assert set(paths) == {'json'}
    restored = SolveReport.from_dict(read_json(paths['json']))
    assert restored.u_c == report.u_c
    assert restored.norms == report.norms
    with pytest.raises(TypeError):
        emit({'not': 'a result'}, tmp_path / 'bad')


def test_symbol_sweep_frame():
    table, reports = run_symbol_sweep([0.75], [2.0], samples=200)
    assert len(table) == 200
    assert all(report.ok for report in reports.values())


def test_threaded_study_matches_serial(reference_study, context1):
    serial = run_rate_study(make_config(), REFERENCE_LADDER, LAB_CONFIG, workers=1, context=context1)
    assert serial.excluded == reference_study.excluded == []
    assert max_relative_deviation(serial, reference_study) <= 1e-12
    assert serial.fitted_slope == pytest.approx(reference_study.fitted_slope, rel=1e-12)
