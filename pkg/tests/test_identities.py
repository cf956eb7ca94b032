"""
Tests for the Pohozaev functional, the existence classifier, the commutator identity
and the normalizing rescaling.
"""
import numpy as np
import pytest

from src.errors import DimMismatch, SupportOverflow
from src.identities import (BACKWARD, FORWARD, ExistenceRegime, ScalingMap, classify_existence, existence_report,
                            fractional_critical_exponent, obstruction_coefficient, pohozaev, pohozaev_terms,
                            pointwise_identity_check, relative_pohozaev, scale)
from src.radial import RadialField, RadialGrid, gaussian, random_band_limited
from src.solver import equation_residual, solve
from src.symbols import SymbolParams

from tests.conftest import make_config


@pytest.fixture(scope="module")
def solution1(context1):
    return solve(make_config(c=8.0), context1)


def test_pohozaev_of_zero(grid3):
    params = SymbolParams(s=0.75, c=8.0)
    assert pohozaev(RadialField.zeros(grid3), 3.0, params) == 0.0
    assert relative_pohozaev(RadialField.zeros(grid3), 3.0, params) == 0.0


def test_pohozaev_vanishes_on_solutions(context3):
    report = solve(make_config(c=8.0, dim=3), context3)
    assert report.accepted
    assert relative_pohozaev(report.u_c, 3.0, report.config.params) <= 1e-4


def test_pohozaev_vanishes_in_one_dimension(solution1):
    assert relative_pohozaev(solution1.u_c, 3.0, solution1.config.params) <= 1e-4


def test_pohozaev_detects_non_solutions(soliton3):
    # the limit ground state does not solve the c = 2 equation
    params = SymbolParams(s=0.75, c=2.0)
    assert relative_pohozaev(soliton3.field, 3.0, params) > 1e-4


def test_resolvent_term_is_nonnegative(grid3):
    rng = np.random.default_rng(12)
    for _ in range(5):
        terms = pohozaev_terms(random_band_limited(grid3, rng), 3.0, SymbolParams(s=0.6, c=3.0))
        assert terms.resolvent >= 0.0
        assert terms.value == pytest.approx(terms.nonlinear + terms.mass + terms.kinetic)


def test_critical_exponents():
    assert fractional_critical_exponent(3, 0.75) == pytest.approx(3.0)
    assert fractional_critical_exponent(1, 0.75) == np.inf
    assert obstruction_coefficient(3.0, 3, 0.75) == pytest.approx(0.0, abs=1e-15)
    assert obstruction_coefficient(4.0, 3, 0.75) < 0
    assert obstruction_coefficient(2.0, 3, 0.75) > 0


def test_classification():
    boundary = SymbolParams.general(s=0.75, c=1.0, m=1.0, mu=1.0)
    assert boundary.kappa == 0.0
    assert classify_existence(3.0, boundary, 3) == ExistenceRegime.NONEXISTENCE
    assert classify_existence(4.0, SymbolParams(s=0.75, c=16.0), 3) == ExistenceRegime.LARGE_C
    assert classify_existence(4.0, SymbolParams(s=0.75, c=1.05), 3) == ExistenceRegime.NONEXISTENCE
    assert classify_existence(6.0, SymbolParams(s=0.75, c=16.0), 3) == ExistenceRegime.OPEN
    assert classify_existence(3.0, SymbolParams(s=0.75, c=8.0), 1) == ExistenceRegime.LARGE_C


def test_existence_report_fields():
    report = existence_report(4.0, SymbolParams(s=0.75, c=1.05), 3)
    assert report.kappa > 0
    assert report.fractional_critical == pytest.approx(3.0)
    assert report.sobolev_critical == pytest.approx(5.0)
    assert report.regime == ExistenceRegime.NONEXISTENCE
    assert report.model_dump()['regime'] == 'nonexistence_regime'


@pytest.mark.parametrize("c_tilde", [0.5, 1.0, 3.0, 20.0])
def test_classification_is_scale_invariant(c_tilde):
    general = SymbolParams.general(s=0.75, c=c_tilde, m=1.0, mu=3.0)
    mapping = ScalingMap.from_symbol_params(general, 4.0)
    normalized = SymbolParams(s=0.75, c=mapping.normalized_c(c_tilde))
    assert np.sign(general.kappa) == np.sign(normalized.kappa)
    assert classify_existence(4.0, general, 3) == classify_existence(4.0, normalized, 3)


def test_pointwise_identity_on_gaussian():
    grid = RadialGrid(3, 2048, 20.0)
    assert pointwise_identity_check(gaussian(grid), s=0.75, a2=81.0, b2=4.0) <= 1e-6


def test_pointwise_identity_converges_at_fourth_order():
    coarse = pointwise_identity_check(gaussian(RadialGrid(3, 1024, 20.0)), s=0.75, a2=81.0, b2=4.0)
    fine = pointwise_identity_check(gaussian(RadialGrid(3, 2048, 20.0)), s=0.75, a2=81.0, b2=4.0)
    assert coarse / fine >= 8.0


def test_pointwise_identity_classical_case():
    grid = RadialGrid(3, 2048, 20.0)
    assert pointwise_identity_check(gaussian(grid), s=1.0, a2=81.0, b2=4.0) <= 1e-6


def test_pointwise_identity_from_params():
    grid = RadialGrid(1, 2048, 20.0)
    assert pointwise_identity_check(gaussian(grid), SymbolParams(s=0.75, c=2.0)) <= 1e-6
    with pytest.raises(ValueError):
        pointwise_identity_check(gaussian(grid))


def test_normalized_parameters_give_identity_map(solution1):
    params = SymbolParams(s=0.75, c=8.0)
    mapping = ScalingMap.from_symbol_params(params, 3.0)
    assert (mapping.amplitude, mapping.dilation, mapping.speed_factor) == (1.0, 1.0, 1.0)
    assert scale(solution1.u_c, mapping) == solution1.u_c
    assert mapping.general_c(8.0) == 8.0
    explicit = ScalingMap.from_params(0.75, 3.0, params.mass, 1.0)
    assert explicit.amplitude == pytest.approx(1.0, rel=1e-14)
    assert explicit.dilation == pytest.approx(1.0, rel=1e-14)
    assert explicit.speed_factor == pytest.approx(1.0, rel=1e-14)


def test_scale_round_trip(solution1):
    mapping = ScalingMap.from_params(0.75, 3.0, 1.0, 3.0)
    there = scale(solution1.u_c, mapping, FORWARD)
    back = scale(there, mapping, BACKWARD)
    assert back.grid.radius == pytest.approx(solution1.u_c.grid.radius, rel=1e-14)
    assert np.max(np.abs(back.values - solution1.u_c.values)) <= 1e-8


def test_scaled_solution_solves_general_equation(solution1):
    s, p, m, mu = 0.75, 3.0, 1.0, 3.0
    mapping = ScalingMap.from_params(s, p, m, mu)
    v = scale(solution1.u_c, mapping, BACKWARD)
    general = SymbolParams.general(s=s, c=mapping.general_c(8.0), m=m, mu=mu)
    assert equation_residual(v, general, p) <= 1e-5
    # and the forward map carries it back to a normalized solution
    u = scale(v, mapping, FORWARD)
    assert equation_residual(u, SymbolParams(s=s, c=8.0), p) <= 1e-5


def test_resampling_onto_a_target_grid(grid1):
    mapping = ScalingMap(amplitude=2.0, dilation=0.5, speed_factor=1.0)
    resampled = scale(gaussian(grid1), mapping, target=grid1)
    expected = 2.0 * np.exp(-(0.5 * grid1.nodes) ** 2 / 2.0)
    assert np.max(np.abs(resampled.values - expected)) <= 1e-7


def test_scale_rejects_overflow_and_dimension(grid1, grid3):
    mapping = ScalingMap(amplitude=1.0, dilation=2.0, speed_factor=1.0)
    with pytest.raises(SupportOverflow):
        scale(gaussian(grid1), mapping, target=grid1)
    with pytest.raises(DimMismatch):
        scale(gaussian(grid1), mapping, target=grid3)
    with pytest.raises(ValueError):
        scale(gaussian(grid1), mapping, direction='sideways')
    with pytest.raises(ValueError):
        ScalingMap(amplitude=0.0, dilation=1.0, speed_factor=1.0)
