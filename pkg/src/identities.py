"""
Integral and pointwise identities: the Pohozaev functional and the nonexistence
classifier built on it, the commutator identity for (a^2 - b^2 Delta)^s against the
dilation generator r d/dr, and the rescaling that normalizes (m, mu).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.interpolate import CubicSpline

from .errors import DimMismatch, SupportOverflow
from .groundstate import sobolev_critical_exponent
from .radial import (RadialField, RadialGrid, apply_multiplier, derivative, forward_array, integrate,
                     l2_norm, norms, origin_value)
from .symbols import SymbolParams

logger = logging.getLogger(__name__)


class ExistenceRegime(str, Enum):
    NONEXISTENCE = 'nonexistence_regime'
    OPEN = 'open'
    LARGE_C = 'large_c_regime'


def fractional_critical_exponent(dim: int, s: float) -> float:
    """(N + 2s) / (N - 2s), infinite when N <= 2s."""
    if dim <= 2.0 * s:
        return np.inf
    return (dim + 2.0 * s) / (dim - 2.0 * s)


def obstruction_coefficient(p: float, dim: int, s: float) -> float:
    """1/(p+1) - (N-2s)/(2N); non-positive exactly when p reaches the fractional critical exponent."""
    return 1.0 / (p + 1.0) - (dim - 2.0 * s) / (2.0 * dim)


def classify_existence(p: float, params: SymbolParams, dim: int) -> ExistenceRegime:
    if dim < 1:
        raise DimMismatch(f"dimension must be positive, got {dim}")
    if params.kappa >= 0 and p >= fractional_critical_exponent(dim, params.s):
        return ExistenceRegime.NONEXISTENCE
    if p < sobolev_critical_exponent(dim):
        return ExistenceRegime.LARGE_C
    return ExistenceRegime.OPEN


class ExistenceReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    dim: int
    s: float
    c: float
    kappa: float
    fractional_critical: float
    sobolev_critical: float
    obstruction: float
    regime: ExistenceRegime


def existence_report(p: float, params: SymbolParams, dim: int) -> ExistenceReport:
    report = ExistenceReport(
        p=p, dim=dim, s=params.s, c=params.c, kappa=params.kappa,
        fractional_critical=fractional_critical_exponent(dim, params.s),
        sobolev_critical=sobolev_critical_exponent(dim),
        obstruction=obstruction_coefficient(p, dim, params.s),
        regime=classify_existence(p, params, dim),
    )
    logger.info(f"p={p}, N={dim}, s={params.s}, c={params.c}: kappa={report.kappa:.6g}, "
                f"obstruction={report.obstruction:.6g} -> {report.regime.value}")
    return report


@dataclass(frozen=True)
class PohozaevTerms:
    """Pieces of the functional; resolvent is int u (a^2 - b^2 Delta)^{s-1} u >= 0."""

    nonlinear: float
    mass: float
    kinetic: float
    resolvent: float

    @property
    def value(self) -> float:
        return self.nonlinear + self.mass + self.kinetic


def pohozaev_terms(u: RadialField, p: float, params: SymbolParams) -> PohozaevTerms:
    grid = u.grid
    dim, s = grid.dim, params.s
    u_hat = forward_array(grid, u.values)
    weights = grid.spectral_weights
    t = grid.frequencies ** 2 * params.t_scale
    power_integral = integrate(grid, np.abs(u.values) ** (p + 1.0))
    mass_integral = float(np.sum(weights * u_hat * u_hat))
    # a^2 (a^2 + b^2 rho^2)^{s-1} - a^{2s} = a^{2s} ((1+t)^{s-1} - 1)
    relative = params.offset * np.expm1((s - 1.0) * np.log1p(t))
    return PohozaevTerms(
        nonlinear=(dim - 2.0 * s - 2.0 * dim / (p + 1.0)) * power_integral,
        mass=2.0 * s * params.shift * mass_integral,
        kinetic=2.0 * s * float(np.sum(weights * relative * u_hat * u_hat)),
        resolvent=params.offset / params.a2 * float(np.sum(weights * np.exp((s - 1.0) * np.log1p(t)) * u_hat * u_hat)),
    )


def pohozaev(u: RadialField, p: float, params: SymbolParams) -> float:
    """(N-2s) int u f(u) - 2N int F(u) + 2 a^2 s int u (a^2 - b^2 Delta)^{s-1} u,
    f(t) = |t|^{p-1} t - kappa t; zero on solutions."""
    return pohozaev_terms(u, p, params).value


def relative_pohozaev(u: RadialField, p: float, params: SymbolParams) -> float:
    """|pohozaev| / ||u||_{H1}^2."""
    scale = norms(u, 2.0).h1 ** 2
    if scale == 0:
        return 0.0
    return abs(pohozaev(u, p, params)) / scale


def pointwise_identity_check(phi: RadialField, params: Optional[SymbolParams] = None, *,
                             s: Optional[float] = None, a2: Optional[float] = None,
                             b2: Optional[float] = None) -> float:
    """Relative L2 defect of
        L^s(r phi') - r (L^s phi)' = 2s L^s phi - 2 a^2 s L^{s-1} phi,  L = a^2 - b^2 Delta.
    Explicit s, a2, b2 override params; s = 1 gives the classical commutator."""
    if params is not None:
        s = params.s if s is None else s
        a2 = params.a2 if a2 is None else a2
        b2 = params.b2 if b2 is None else b2
    if s is None or a2 is None or b2 is None:
        raise ValueError("need params or all of s, a2, b2")
    grid = phi.grid
    r = grid.nodes

    def power(exponent: float):
        return lambda rho: np.exp(exponent * np.log(a2 + b2 * rho * rho))

    dilation = RadialField(grid, r * derivative(phi).values)
    l_phi = apply_multiplier(phi, power(s))
    lhs = apply_multiplier(dilation, power(s)) - RadialField(grid, r * derivative(l_phi).values)
    rhs = 2.0 * s * l_phi - 2.0 * a2 * s * apply_multiplier(phi, power(s - 1.0))
    return l2_norm(lhs - rhs) / l2_norm(rhs)


FORWARD = 'forward'
BACKWARD = 'backward'


class ScalingMap(BaseModel):
    """u(x) = amplitude * v(dilation * x) carries a (m, mu, c_tilde) solution v to a
    normalized solution u with c = c_tilde / speed_factor."""

    model_config = ConfigDict(frozen=True)

    amplitude: float
    dilation: float
    speed_factor: float

    @model_validator(mode='after')
    def _check(self) -> 'ScalingMap':
        if not (self.amplitude > 0 and self.dilation > 0 and self.speed_factor > 0):
            raise ValueError("scaling constants must be positive")
        return self

    @classmethod
    def from_params(cls, s: float, p: float, m: float, mu: float) -> 'ScalingMap':
        return cls(
            amplitude=mu ** (1.0 / (1.0 - p)),
            dilation=float(np.sqrt(s / (mu * m ** (2.0 * (1.0 - s))))),
            speed_factor=float(np.sqrt(s) * mu ** ((1.0 - s) / (2.0 * s)) / m ** (1.0 - s)),
        )

    @classmethod
    def from_symbol_params(cls, params: SymbolParams, p: float) -> 'ScalingMap':
        """Normalized parameters give the identity map exactly."""
        if params.normalized:
            return cls(amplitude=1.0, dilation=1.0, speed_factor=1.0)
        return cls.from_params(params.s, p, params.mass, params.shift)

    def general_c(self, c: float) -> float:
        """c_tilde for the normalized speed c."""
        return self.speed_factor * c

    def normalized_c(self, c_tilde: float) -> float:
        return c_tilde / self.speed_factor

    def target_grid(self, grid: RadialGrid, direction: str = FORWARD) -> RadialGrid:
        """Same K with the radius rescaled so target nodes map onto source nodes."""
        factor = 1.0 / self.dilation if direction == FORWARD else self.dilation
        return RadialGrid(grid.dim, grid.points, grid.radius * factor)

    def to_dict(self) -> Dict[str, float]:
        return self.model_dump()


def _spline(field: RadialField) -> CubicSpline:
    grid = field.grid
    r, u = grid.nodes, field.values
    if grid.dim == 1:
        knots = np.concatenate([-r[:0:-1], r, [grid.radius]])
        values = np.concatenate([u[:0:-1], u, [0.0]])
    else:
        knots = np.concatenate([-r[::-1], [0.0], r, [grid.radius]])
        values = np.concatenate([u[::-1], [origin_value(field)], u, [0.0]])
    return CubicSpline(knots, values)


def scale(u: RadialField, mapping: ScalingMap, direction: str = FORWARD,
          target: Optional[RadialGrid] = None) -> RadialField:
    """forward: amplitude * u(dilation r); backward undoes it.

    Without a target the natural grid is used and samples are carried over exactly;
    otherwise the field is resampled with a cubic spline."""
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")
    amplitude, dilation = mapping.amplitude, mapping.dilation
    if direction == BACKWARD:
        amplitude, dilation = 1.0 / amplitude, 1.0 / dilation
    natural = mapping.target_grid(u.grid, direction)
    if target is None or target == natural:
        return RadialField(natural, amplitude * u.values)
    if target.dim != u.grid.dim:
        raise DimMismatch(f"target grid has N={target.dim}, field has N={u.grid.dim}")
    reach = dilation * target.radius
    if reach > u.grid.radius * (1.0 + 1e-12):
        raise SupportOverflow(f"mapped radius {reach:.6g} exceeds the source radius {u.grid.radius:.6g}")
    return RadialField(target, amplitude * _spline(u)(dilation * target.nodes))
