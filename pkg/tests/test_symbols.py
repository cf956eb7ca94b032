"""
Tests for the symbol layer against arbitrary-precision evaluations.
"""
import time

import mpmath
import numpy as np
import pytest

from src.errors import BoundViolation
from src.symbols import (SWEEP_COLUMNS, DecayConstants, SymbolParams, calibrate_decay_constants, check_difference,
                         check_high_bracket, check_low_bracket, check_multiplier_decay, d_multiplier_a, d_p_c,
                         d_symbol_difference, d_symbol_ratio, decay_envelope, diff_and_bound, difference_bound,
                         eval_p_c, eval_p_inf, g_function, high_bracket_constant, multiplier_a, sweep,
                         symbol_difference, symbol_ratio, xi_star)

mpmath.mp.dps = 60


def mp_p_c(xi, s, c, m=None, mu=1):
    s, c, xi = mpmath.mpf(s), mpmath.mpf(c), mpmath.mpf(xi)
    m = s ** (1 / (2 - 2 * s)) if m is None else mpmath.mpf(m)
    a2 = m ** 2 * c ** (2 / (1 - s))
    return (c ** 2 * xi ** 2 + a2) ** s - a2 ** s + mu


def mp_difference(xi, s, c):
    return mp_p_c(xi, s, c) - (mpmath.mpf(xi) ** 2 + 1)


def test_p_c_spot_value():
    params = SymbolParams(s=0.75, c=2.0)
    assert eval_p_c(1.0, params) == pytest.approx(1.99390, abs=1e-4)
    assert eval_p_c(1.0, params) == pytest.approx(float(mp_p_c(1, 0.75, 2)), rel=1e-14)


def test_difference_spot_value_within_bound():
    params = SymbolParams(s=0.75, c=2.0)
    diff, bound = diff_and_bound(1.0, params)
    assert diff == pytest.approx(float(mp_difference(1, 0.75, 2)), rel=1e-12)
    assert diff == pytest.approx(-6.049e-3, abs=1e-5)
    assert bound == pytest.approx(6.173e-3, abs=1e-6)
    assert abs(diff) <= bound


def test_difference_at_origin_and_huge_c():
    assert symbol_difference(0.0, SymbolParams(s=0.75, c=2.0)) == 0.0
    params = SymbolParams(s=0.75, c=1e6)
    diff = symbol_difference(1.0, params)
    assert diff < 0
    assert abs(diff) <= difference_bound(1.0, params)
    with mpmath.workdps(150):
        exact = float(mp_difference(1, 0.75, 1e6))
    assert diff == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
@pytest.mark.parametrize("t", [1e-12, 1e-6, 0.01, 0.0499, 0.0501, 0.5, 10.0, 1e8])
def test_g_function_matches_oracle(s, t):
    exact = (1 + mpmath.mpf(t)) ** mpmath.mpf(s) - 1 - mpmath.mpf(s) * mpmath.mpf(t)
    assert g_function(t, s) == pytest.approx(float(exact), rel=1e-13)


def test_limit_symbol_general_parameters():
    params = SymbolParams.general(s=0.75, c=3.0, m=2.0, mu=0.5)
    xi = np.array([0.0, 0.5, 2.0])
    expected = 0.75 * 2.0 ** (2 * 0.75 - 2) * xi ** 2 + 0.5
    np.testing.assert_allclose(eval_p_inf(xi, params), expected, rtol=1e-15)
    assert eval_p_inf(1.0) == 2.0


def test_general_symbol_matches_oracle():
    params = SymbolParams.general(s=0.6, c=5.0, m=1.3, mu=2.0)
    assert eval_p_c(0.8, params) == pytest.approx(float(mp_p_c(0.8, 0.6, 5.0, m=1.3, mu=2)), rel=1e-12)


def test_crossover_and_high_constant():
    assert xi_star(SymbolParams(s=0.75, c=1.0)) == pytest.approx(2.17855, abs=1e-5)
    s = mpmath.mpf('0.75')
    expected = (mpmath.mpf(16) / 15) ** s - mpmath.mpf(15) ** -s
    assert high_bracket_constant(0.75) == pytest.approx(float(expected), rel=1e-13)


def test_brackets_hold_on_their_ranges():
    params = SymbolParams(s=0.75, c=2.0)
    star = xi_star(params)
    assert check_low_bracket(np.linspace(0.0, star, 200), params).ok
    assert check_high_bracket(np.geomspace(star, 1e6, 200), params).ok


def test_bracket_range_and_normalization_preconditions():
    params = SymbolParams(s=0.75, c=2.0)
    with pytest.raises(ValueError):
        check_low_bracket(2.0 * xi_star(params), params)
    with pytest.raises(ValueError):
        check_low_bracket(0.1, SymbolParams.general(s=0.75, c=2.0, m=1.0, mu=1.0))


def test_small_c_rejected_for_verification():
    with pytest.raises(ValueError):
        check_difference(1.0, SymbolParams(s=0.75, c=1.5))


def test_violation_raises_with_location():
    tight = DecayConstants(c0=1e-12, c1=1e-12, ratio1=1e-12)
    params = SymbolParams(s=0.75, c=2.0)
    with pytest.raises(BoundViolation) as info:
        check_multiplier_decay(np.geomspace(1e-3, 1e6, 400), params, order=0, constants=tight)
    assert info.value.xi > 0
    report = check_multiplier_decay(np.geomspace(1e-3, 1e6, 400), params, order=0, constants=tight, strict=False)
    assert report.violations > 0


def test_invalid_inputs():
    with pytest.raises(ValueError):
        SymbolParams(s=0.4, c=2.0)
    with pytest.raises(ValueError):
        SymbolParams(s=0.75, c=-1.0)
    with pytest.raises(ValueError):
        eval_p_c(-1.0, SymbolParams(s=0.75, c=2.0))


@pytest.mark.parametrize("xi", [0.05, 0.7, 3.0, 40.0])
def test_derivatives_match_oracle(xi):
    s, c = 0.75, 3.0
    params = SymbolParams(s=s, c=c)

    def p_c(x):
        return mp_p_c(x, s, c)

    def diff(x):
        return p_c(x) - (x ** 2 + 1)

    def a(x):
        return 1 / (x ** 2 + 1) - 1 / p_c(x)

    def ratio(x):
        return p_c(x) / (x ** 2 + 1)

    assert d_p_c(xi, params) == pytest.approx(float(mpmath.diff(p_c, xi)), rel=1e-10)
    assert d_symbol_difference(xi, params) == pytest.approx(float(mpmath.diff(diff, xi)), rel=1e-10)
    assert d_multiplier_a(xi, params) == pytest.approx(float(mpmath.diff(a, xi)), rel=1e-9)
    assert d_symbol_ratio(xi, params) == pytest.approx(float(mpmath.diff(ratio, xi)), rel=1e-9)


def test_multiplier_and_ratio_consistency():
    params = SymbolParams(s=0.6, c=10.0)
    xi = np.geomspace(1e-2, 1e3, 50)
    p_c, p_inf = eval_p_c(xi, params), eval_p_inf(xi)
    np.testing.assert_allclose(multiplier_a(xi, params) * p_c * p_inf, symbol_difference(xi, params),
                               rtol=1e-13, atol=0)
    np.testing.assert_allclose(symbol_ratio(xi, params), p_c / p_inf, rtol=1e-15)
    assert np.all(symbol_ratio(xi, params) <= 1.0)


def test_decay_envelope_is_flat_at_low_frequency():
    params = SymbolParams(s=0.75, c=4.0)
    assert decay_envelope(0.0, params) == pytest.approx(4.0 ** -6)


def test_acceptance_sweep_has_no_violations():
    constants = calibrate_decay_constants()
    start = time.perf_counter()
    table, reports = sweep([0.6, 0.75, 0.9], [2.0, 10.0, 100.0], 1e-3, 1e6, 2000, constants)
    elapsed = time.perf_counter() - start
    assert list(table.columns) == SWEEP_COLUMNS
    assert len(table) == 9 * 2000
    for name, report in reports.items():
        assert report.ok, f"{name}: {report}"
    assert bool(table['decay0_ok'].all()) and bool(table['decay1_ok'].all())
    assert elapsed < 5.0


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
@pytest.mark.parametrize("c", [1.05, 2.0, 10.0, 100.0])
def test_relativistic_symbol_is_increasing(s, c):
    xi = np.geomspace(1e-3, 1e6, 2000)
    assert np.all(np.diff(eval_p_c(xi, SymbolParams(s=s, c=c))) > 0)


@pytest.mark.parametrize("s, c", [(0.6, 2.0), (0.6, 4.0), (0.75, 2.0), (0.75, 4.0), (0.9, 2.0)])
def test_stable_difference_matches_naive_subtraction(s, c):
    params = SymbolParams(s=s, c=c)
    xi = np.geomspace(1e-1, 1e2, 400)
    rest = params.mass ** (2.0 * s) * c ** (2.0 * s / (1.0 - s))
    relativistic = (c * c * xi * xi + params.mass ** 2 * c ** (2.0 / (1.0 - s))) ** s
    naive = relativistic - rest + 1.0 - (xi * xi + 1.0)
    # naive subtraction keeps six significant digits only well above its rounding floor
    trusted = np.abs(naive) >= 1e-8 * (relativistic + xi * xi + 1.0)
    assert np.count_nonzero(trusted) > 50
    stable = np.asarray(symbol_difference(xi, params))
    np.testing.assert_allclose(stable[trusted], naive[trusted], rtol=1e-6)
