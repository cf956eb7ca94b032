"""
Symbols of the pseudorelativistic operator and its nonrelativistic limit.

    P_c(xi)   = (b^2 xi^2 + a^2)^s - a^{2s} + mu
    P_inf(xi) = s m^{2s-2} xi^2 + mu          (= xi^2 + 1 when normalized)

with a^2 = m^2 c^{2/(1-s)}, b^2 = c^2. Writing t = b^2 xi^2 / a^2 every quantity is
expressed through (1+t)^s, so the large a^{2s} terms cancel symbolically and the
difference P_c - P_inf = a^{2s} g(t), g(t) = (1+t)^s - 1 - s t, keeps full relative
precision when t is tiny.
"""
import logging
from functools import lru_cache
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import BoundViolation

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# below this t the binomial series of g(t) is used
_SERIES_SWITCH = 0.05
_SERIES_TERMS = 16
_TINY = 1e-300


class SymbolParams(BaseModel):
    """Parameters (s, c) and, when not normalized, the mass m and shift mu."""

    model_config = ConfigDict(frozen=True)

    s: float
    c: float
    normalized: bool = True
    m: Optional[float] = None
    mu: Optional[float] = None

    @model_validator(mode='after')
    def _check(self) -> 'SymbolParams':
        if not 0.5 < self.s < 1.0:
            raise ValueError(f"s must lie in (1/2, 1), got {self.s}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.normalized:
            if self.m is not None or self.mu is not None:
                raise ValueError("normalized parameters take no m or mu")
        else:
            if self.m is None or self.mu is None:
                raise ValueError("general parameters need both m and mu")
            if self.m <= 0 or self.mu <= 0:
                raise ValueError("m and mu must be positive")
        return self

    @classmethod
    def general(cls, s: float, c: float, m: float, mu: float) -> 'SymbolParams':
        return cls(s=s, c=c, normalized=False, m=m, mu=mu)

    def with_c(self, c: float) -> 'SymbolParams':
        return self.model_copy(update={'c': float(c)})

    @property
    def mass(self) -> float:
        if self.normalized:
            return self.s ** (1.0 / (2.0 - 2.0 * self.s))
        return float(self.m)

    @property
    def shift(self) -> float:
        return 1.0 if self.normalized else float(self.mu)

    @property
    def a2(self) -> float:
        return self.mass ** 2 * self.c ** (2.0 / (1.0 - self.s))

    @property
    def b2(self) -> float:
        return self.c ** 2

    @property
    def offset(self) -> float:
        """a^{2s} = m^{2s} c^{2s/(1-s)}."""
        return self.mass ** (2.0 * self.s) * self.c ** (2.0 * self.s / (1.0 - self.s))

    @property
    def kappa(self) -> float:
        return self.shift - self.offset

    @property
    def limit_coefficient(self) -> float:
        """Coefficient of xi^2 in P_inf."""
        if self.normalized:
            return 1.0
        return self.s * self.mass ** (2.0 * self.s - 2.0)

    @property
    def t_scale(self) -> float:
        """t / xi^2 = c^{-2s/(1-s)} / m^2."""
        return self.c ** (-2.0 * self.s / (1.0 - self.s)) / self.mass ** 2


class BoundReport(BaseModel):
    """Outcome of a sampled inequality check; worst_slack is relative to the local scale."""

    name: str
    samples: int
    violations: int
    worst_slack: float
    worst_xi: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def merge(self, other: 'BoundReport') -> 'BoundReport':
        if other.samples == 0:
            return self
        if self.samples == 0:
            return other.model_copy(update={'name': self.name})
        worst = self if self.worst_slack <= other.worst_slack else other
        return BoundReport(
            name=self.name,
            samples=self.samples + other.samples,
            violations=self.violations + other.violations,
            worst_slack=worst.worst_slack,
            worst_xi=worst.worst_xi,
        )


class DecayConstants(BaseModel):
    """Frozen constants of the multiplier decay bounds."""

    model_config = ConfigDict(frozen=True)

    c0: float
    c1: float
    ratio1: float
    margin: float = 1.05


def _out(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def _as_xi(xi: ArrayLike) -> np.ndarray:
    arr = np.asarray(xi, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("xi must be finite and non-negative")
    return arr


def _binomial_coefficients(s: float) -> np.ndarray:
    coeffs = np.empty(_SERIES_TERMS)
    coef = s
    for k in range(2, _SERIES_TERMS + 2):
        coef = coef * (s - k + 1) / k
        coeffs[k - 2] = coef
    return coeffs


def power_minus_one(t: ArrayLike, exponent: float) -> ArrayLike:
    """(1+t)^exponent - 1 without cancellation."""
    return np.expm1(exponent * np.log1p(t))


def g_function(t: ArrayLike, s: float) -> ArrayLike:
    """g(t) = (1+t)^s - 1 - s t, accurate to relative round-off for every t >= 0."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < _SERIES_SWITCH
    if np.any(small):
        ts = t[small]
        acc = np.zeros_like(ts)
        for coef in _binomial_coefficients(s)[::-1]:
            acc = acc * ts + coef
        out[small] = acc * ts * ts
    if np.any(~small):
        tl = t[~small]
        out[~small] = np.expm1(s * np.log1p(tl)) - s * tl
    return _out(out)


def _t(xi: np.ndarray, params: SymbolParams) -> np.ndarray:
    return xi * xi * params.t_scale


def eval_p_inf(xi: ArrayLike, params: Optional[SymbolParams] = None) -> ArrayLike:
    xi = _as_xi(xi)
    if params is None:
        return _out(xi * xi + 1.0)
    return _out(params.limit_coefficient * xi * xi + params.shift)


def eval_p_c(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    xi = _as_xi(xi)
    t = _t(xi, params)
    return _out(params.offset * power_minus_one(t, params.s) + params.shift)


def symbol_difference(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    """P_c - P_inf, always <= 0."""
    xi = _as_xi(xi)
    return _out(params.offset * np.asarray(g_function(_t(xi, params), params.s)))


def difference_bound(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    """a^{2s} s(1-s)/2 t^2; for normalized parameters s(1-s)/(2 s^{(2-s)/(1-s)}) xi^4 c^{-2s/(1-s)}."""
    xi = _as_xi(xi)
    t = _t(xi, params)
    return _out(params.offset * params.s * (1.0 - params.s) / 2.0 * t * t)


def multiplier_a(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    """1/P_inf - 1/P_c."""
    xi = _as_xi(xi)
    p_c = np.asarray(eval_p_c(xi, params))
    p_inf = np.asarray(eval_p_inf(xi, params))
    return _out(np.asarray(symbol_difference(xi, params)) / (p_c * p_inf))


def symbol_ratio(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    xi = _as_xi(xi)
    return _out(np.asarray(eval_p_c(xi, params)) / np.asarray(eval_p_inf(xi, params)))


def d_p_c(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    xi = _as_xi(xi)
    t = _t(xi, params)
    return _out(2.0 * xi * params.limit_coefficient * (1.0 + t) ** (params.s - 1.0))


def d_p_inf(xi: ArrayLike, params: Optional[SymbolParams] = None) -> ArrayLike:
    xi = _as_xi(xi)
    coef = 1.0 if params is None else params.limit_coefficient
    return _out(2.0 * coef * xi)


def d_symbol_difference(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    xi = _as_xi(xi)
    t = _t(xi, params)
    return _out(2.0 * xi * params.limit_coefficient * power_minus_one(t, params.s - 1.0))


def d_multiplier_a(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    xi = _as_xi(xi)
    p_c = np.asarray(eval_p_c(xi, params))
    p_inf = np.asarray(eval_p_inf(xi, params))
    a = np.asarray(symbol_difference(xi, params)) / (p_c * p_inf)
    dd = np.asarray(d_symbol_difference(xi, params))
    return _out(dd / (p_c * p_inf) - a * (np.asarray(d_p_c(xi, params)) / p_c + np.asarray(d_p_inf(xi, params)) / p_inf))


def d_symbol_ratio(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    xi = _as_xi(xi)
    p_inf = np.asarray(eval_p_inf(xi, params))
    ratio = np.asarray(eval_p_c(xi, params)) / p_inf
    return _out((np.asarray(d_p_c(xi, params)) - ratio * np.asarray(d_p_inf(xi, params))) / p_inf)


def crossover_t(s: float) -> float:
    return 2.0 ** (1.0 / (1.0 - s)) - 1.0


def xi_star(params: SymbolParams) -> float:
    """Frequency separating the nonrelativistic and relativistic brackets."""
    return float(np.sqrt(crossover_t(params.s) / params.t_scale))


def high_bracket_constant(s: float) -> float:
    t_star = crossover_t(s)
    return (1.0 + 1.0 / t_star) ** s - t_star ** (-s)


def decay_envelope(xi: ArrayLike, params: SymbolParams) -> ArrayLike:
    """min{c^{-2s/(1-s)}, c^{-2s^2/(1-s)} (xi^2+1)^{-(1-s)}}."""
    xi = _as_xi(xi)
    s, c = params.s, params.c
    flat = c ** (-2.0 * s / (1.0 - s))
    tail = c ** (-2.0 * s * s / (1.0 - s)) * (xi * xi + 1.0) ** (-(1.0 - s))
    return _out(np.minimum(flat, tail))


def _require_normalized(params: SymbolParams) -> None:
    if not params.normalized:
        raise ValueError("bracket checks are stated for normalized parameters")


def _require_large_c(params: SymbolParams) -> None:
    if params.c < 2.0:
        raise ValueError(f"bound verification requires c >= 2, got {params.c}")


Term = Tuple[str, np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]


def _relative_slack(value: np.ndarray, lower: Optional[np.ndarray], upper: Optional[np.ndarray]) -> np.ndarray:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    lo = np.full_like(value, -np.inf) if lower is None else np.broadcast_to(lower, value.shape)
    hi = np.full_like(value, np.inf) if upper is None else np.broadcast_to(upper, value.shape)
    scale = np.maximum.reduce([
        np.abs(value),
        np.where(np.isfinite(lo), np.abs(lo), 0.0),
        np.where(np.isfinite(hi), np.abs(hi), 0.0),
        np.full_like(value, _TINY),
    ])
    return np.minimum(value - lo, hi - value) / scale


def _reports(terms: Iterable[Term], xi: np.ndarray, rel_tol: float, strict: bool) -> BoundReport:
    xi = np.atleast_1d(xi)
    merged: Optional[BoundReport] = None
    for name, value, lower, upper in terms:
        slack = _relative_slack(value, lower, upper)
        violations = int(np.count_nonzero(slack < -rel_tol))
        worst = int(np.argmin(slack))
        if violations and strict:
            value = np.atleast_1d(value)
            raise BoundViolation(
                float(xi[worst]), float(value[worst]),
                None if lower is None else float(np.broadcast_to(lower, value.shape)[worst]),
                None if upper is None else float(np.broadcast_to(upper, value.shape)[worst]),
                name,
            )
        report = BoundReport(name=name, samples=int(xi.size), violations=violations,
                             worst_slack=float(slack[worst]), worst_xi=float(xi[worst]))
        if merged is None:
            merged = report
        else:
            # parallel inequalities on the same samples
            worst_report = merged if merged.worst_slack <= report.worst_slack else report
            merged = BoundReport(name=merged.name, samples=merged.samples,
                                 violations=max(merged.violations, report.violations),
                                 worst_slack=worst_report.worst_slack, worst_xi=worst_report.worst_xi)
    return merged


def _pointwise_ok(terms: Iterable[Term], rel_tol: float) -> np.ndarray:
    ok = None
    for _, value, lower, upper in terms:
        passed = _relative_slack(value, lower, upper) >= -rel_tol
        ok = passed if ok is None else ok & passed
    return ok


def _low_terms(xi: np.ndarray, params: SymbolParams) -> Tuple[Term, ...]:
    _require_normalized(params)
    if np.any(xi > xi_star(params) * (1.0 + 1e-12)):
        raise ValueError("low bracket applies only for xi <= xi_star")
    p_c = np.asarray(eval_p_c(xi, params))
    p_inf = np.asarray(eval_p_inf(xi))
    return (('low_bracket', p_c, p_inf / 2.0, p_inf),)


def _high_terms(xi: np.ndarray, params: SymbolParams) -> Tuple[Term, ...]:
    _require_normalized(params)
    if np.any(xi < xi_star(params) * (1.0 - 1e-12)):
        raise ValueError("high bracket applies only for xi >= xi_star")
    power = (params.c * xi) ** (2.0 * params.s)
    p_c = np.asarray(eval_p_c(xi, params))
    return (('high_bracket', p_c, high_bracket_constant(params.s) * power + 1.0, power + 1.0),)


def _difference_terms(xi: np.ndarray, params: SymbolParams) -> Tuple[Term, ...]:
    _require_large_c(params)
    diff = np.asarray(symbol_difference(xi, params))
    bound = np.asarray(difference_bound(xi, params))
    # P_c <= P_inf everywhere
    return (('difference', np.abs(diff), None, bound), ('difference_sign', diff, None, np.zeros_like(diff)))


def _decay_terms(xi: np.ndarray, params: SymbolParams, order: int, constants: DecayConstants) -> Tuple[Term, ...]:
    _require_large_c(params)
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    envelope = np.asarray(decay_envelope(xi, params))
    if order == 0:
        a = np.abs(np.asarray(multiplier_a(xi, params)))
        ratio = np.asarray(symbol_ratio(xi, params))
        return (('decay0', a, None, constants.c0 * envelope), ('ratio0', ratio, None, np.ones_like(ratio)))
    if np.any(xi <= 0):
        raise ValueError("order-1 decay needs xi > 0")
    da = np.abs(np.asarray(d_multiplier_a(xi, params)))
    dr = np.abs(np.asarray(d_symbol_ratio(xi, params)))
    return (('decay1', da, None, constants.c1 * envelope / xi), ('ratio1', dr, None, constants.ratio1 / xi))


def check_low_bracket(xi: ArrayLike, params: SymbolParams, rel_tol: float = 1e-12,
                      strict: bool = True) -> BoundReport:
    """(xi^2+1)/2 <= P_c(xi) <= xi^2 + 1 for xi <= xi_star."""
    xi = np.atleast_1d(_as_xi(xi))
    return _reports(_low_terms(xi, params), xi, rel_tol, strict)


def check_high_bracket(xi: ArrayLike, params: SymbolParams, rel_tol: float = 1e-12,
                       strict: bool = True) -> BoundReport:
    """K_s c^{2s} xi^{2s} + 1 <= P_c(xi) <= c^{2s} xi^{2s} + 1 for xi >= xi_star."""
    xi = np.atleast_1d(_as_xi(xi))
    return _reports(_high_terms(xi, params), xi, rel_tol, strict)


def check_difference(xi: ArrayLike, params: SymbolParams, rel_tol: float = 1e-12,
                     strict: bool = True) -> BoundReport:
    xi = np.atleast_1d(_as_xi(xi))
    return _reports(_difference_terms(xi, params), xi, rel_tol, strict)


def diff_and_bound(xi: ArrayLike, params: SymbolParams, rel_tol: float = 1e-12,
                   strict: bool = True) -> Tuple[ArrayLike, ArrayLike]:
    """Signed P_c - P_inf and its quartic bound; raises BoundViolation if |diff| exceeds it."""
    xi_arr = _as_xi(xi)
    check_difference(xi_arr, params, rel_tol, strict)
    return symbol_difference(xi_arr, params), difference_bound(xi_arr, params)


def check_multiplier_decay(xi: ArrayLike, params: SymbolParams, order: int,
                           constants: Optional[DecayConstants] = None, rel_tol: float = 1e-12,
                           strict: bool = True) -> BoundReport:
    """Order 0: |a| <= C0 env and P_c/P_inf <= 1. Order 1: |a'| <= C1 env/xi and |(P_c/P_inf)'| <= C/xi."""
    xi = np.atleast_1d(_as_xi(xi))
    constants = constants or default_decay_constants()
    return _reports(_decay_terms(xi, params, order, constants), xi, rel_tol, strict)


def calibrate_decay_constants(s_values: Iterable[float] = (0.6, 0.75, 0.9),
                              c_values: Iterable[float] = (2.0, 10.0, 100.0),
                              xi_min: float = 1e-3, xi_max: float = 1e6,
                              samples: int = 400, margin: float = 1.05) -> DecayConstants:
    """Freeze C0, C1 as margin times the largest observed ratio on a coarse sweep."""
    xi = np.geomspace(xi_min, xi_max, samples)
    worst0 = worst1 = worst_r = 0.0
    for s in s_values:
        for c in c_values:
            params = SymbolParams(s=float(s), c=float(c))
            envelope = np.asarray(decay_envelope(xi, params))
            worst0 = max(worst0, float(np.max(np.abs(multiplier_a(xi, params)) / envelope)))
            worst1 = max(worst1, float(np.max(xi * np.abs(d_multiplier_a(xi, params)) / envelope)))
            worst_r = max(worst_r, float(np.max(xi * np.abs(d_symbol_ratio(xi, params)))))
    constants = DecayConstants(c0=margin * worst0, c1=margin * worst1, ratio1=margin * worst_r, margin=margin)
    logger.info(f"Calibrated decay constants C0={constants.c0:.6g}, C1={constants.c1:.6g}, "
                f"ratio C={constants.ratio1:.6g} over {samples} samples")
    return constants


@lru_cache(maxsize=1)
def default_decay_constants() -> DecayConstants:
    return calibrate_decay_constants()


SWEEP_COLUMNS = ['s', 'c', 'xi', 'p_c', 'p_inf', 'diff', 'diff_bound',
                 'low_ok', 'high_ok', 'decay0_ok', 'decay1_ok']


def sweep(s_values: Iterable[float], c_values: Iterable[float], xi_min: float, xi_max: float,
          samples: int, constants: Optional[DecayConstants] = None,
          rel_tol: float = 1e-12) -> Tuple[pd.DataFrame, Dict[str, BoundReport]]:
    """Evaluate every bound on log-spaced xi for each (s, c); returns the table and merged reports."""
    if xi_min <= 0 or xi_max <= xi_min or samples < 2:
        raise ValueError("sweep needs 0 < xi_min < xi_max and at least two samples")
    constants = constants or default_decay_constants()
    xi = np.geomspace(xi_min, xi_max, samples)
    names = ('low_bracket', 'high_bracket', 'difference', 'decay0', 'decay1')
    reports = {name: BoundReport(name=name, samples=0, violations=0, worst_slack=float('inf')) for name in names}
    frames = []

    for s in s_values:
        for c in c_values:
            params = SymbolParams(s=float(s), c=float(c))
            star = xi_star(params)
            low = xi <= star
            high = xi >= star

            low_ok = pd.array([pd.NA] * samples, dtype='boolean')
            high_ok = pd.array([pd.NA] * samples, dtype='boolean')
            if np.any(low):
                terms = _low_terms(xi[low], params)
                reports['low_bracket'] = reports['low_bracket'].merge(_reports(terms, xi[low], rel_tol, False))
                low_ok[low] = _pointwise_ok(terms, rel_tol)
            if np.any(high):
                terms = _high_terms(xi[high], params)
                reports['high_bracket'] = reports['high_bracket'].merge(_reports(terms, xi[high], rel_tol, False))
                high_ok[high] = _pointwise_ok(terms, rel_tol)

            diff_terms = _difference_terms(xi, params)
            decay0 = _decay_terms(xi, params, 0, constants)
            decay1 = _decay_terms(xi, params, 1, constants)
            reports['difference'] = reports['difference'].merge(_reports(diff_terms, xi, rel_tol, False))
            reports['decay0'] = reports['decay0'].merge(_reports(decay0, xi, rel_tol, False))
            reports['decay1'] = reports['decay1'].merge(_reports(decay1, xi, rel_tol, False))

            frames.append(pd.DataFrame({
                's': params.s,
                'c': params.c,
                'xi': xi,
                'p_c': eval_p_c(xi, params),
                'p_inf': eval_p_inf(xi),
                'diff': diff_terms[1][1],
                'diff_bound': diff_terms[0][3],
                'low_ok': low_ok,
                'high_ok': high_ok,
                'decay0_ok': _pointwise_ok(decay0, rel_tol),
                'decay1_ok': _pointwise_ok(decay1, rel_tol),
            }))
            logger.info(f"Swept s={params.s}, c={params.c}: xi_star={star:.6g}")

    return pd.concat(frames, ignore_index=True)[SWEEP_COLUMNS], reports
