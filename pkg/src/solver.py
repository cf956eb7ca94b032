"""
Fixed-point construction of u_c = u_inf + w.

w solves w = R_c + L_{c,inf}^{-1} Q(w) where R_c = L_{c,inf}^{-1} (P_inf(D) - P_c(D)) u_inf
and Q is the superlinear remainder of the nonlinearity around u_inf.
"""
import logging
from dataclasses import dataclass, field as dataclass_field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import BallExit, NoContraction, QMismatch
from .groundstate import GroundState, petviashvili, signed_power
from .operators import DenseOperator, LinearizedInverse, apply_diff, apply_p_c, build_A
from .radial import RadialField, RadialGrid, l2_norm, norms, random_band_limited
from .symbols import SymbolParams

logger = logging.getLogger(__name__)

RESIDUAL_GATE = 1e-6


class SolveConfig(BaseModel):
    """One solve: symbol parameters, exponent, grid and iteration controls."""

    model_config = ConfigDict(frozen=True)

    params: SymbolParams
    p: float
    q: float = 4.0
    dim: int = 1
    points: int = 4096
    radius: float = 40.0
    # None resolves to min(0.5, ||u_inf||_{H1} / 2)
    delta: Optional[float] = None
    tol: float = 1e-12
    max_iter: int = 200
    neumann_tol: float = 1e-14
    neumann_max_terms: int = 50
    groundstate_tol: float = 1e-12
    groundstate_max_iter: int = 500
    lipschitz_pairs: int = 20
    seed: int = 0

    @model_validator(mode='after')
    def _check(self) -> 'SolveConfig':
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.q > self.dim:
            raise QMismatch(f"q must exceed N={self.dim}, got {self.q}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")
        return self

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.dim, self.points, self.radius)

    @property
    def c(self) -> float:
        return self.params.c

    def with_c(self, c: float) -> 'SolveConfig':
        return self.model_copy(update={'params': self.params.with_c(c)})


class SolverContext:
    """Ground state and factorized A shared by every c for one (p, grid)."""

    def __init__(self, u_inf: GroundState, A: Optional[DenseOperator] = None):
        self.u_inf = u_inf
        self.A = A if A is not None else build_A(u_inf)

    @classmethod
    def build(cls, config: SolveConfig) -> 'SolverContext':
        u_inf = petviashvili(config.p, config.grid, tol=config.groundstate_tol,
                             max_iter=config.groundstate_max_iter)
        return cls(u_inf)

    @property
    def grid(self) -> RadialGrid:
        return self.u_inf.grid

    def delta_for(self, config: SolveConfig) -> float:
        limit = norms(self.u_inf.field, 2.0).h1
        delta = config.delta if config.delta is not None else default_delta(self.u_inf)
        if delta > limit:
            raise ValueError(f"delta={delta} exceeds ||u_inf||_H1={limit:.6g}")
        return delta

    def inverse(self, config: SolveConfig) -> LinearizedInverse:
        if config.grid != self.grid or config.p != self.u_inf.p:
            raise ValueError("solver context was built for a different grid or exponent")
        return LinearizedInverse(config.params, self.u_inf, self.A,
                                 neumann_tol=config.neumann_tol, max_terms=config.neumann_max_terms)


def default_delta(u_inf: GroundState) -> float:
    return min(0.5, norms(u_inf.field, 2.0).h1 / 2.0)


def Q(w: RadialField, u_inf: RadialField, p: float) -> RadialField:
    """|u+w|^{p-1}(u+w) - u^p - p u^{p-1} w."""
    u = np.abs(u_inf.values)
    total = signed_power(u + w.values, p)
    return RadialField(w.grid, total - u ** p - p * u ** (p - 1.0) * w.values)


def intersection_norm(field: RadialField, q: float) -> float:
    return norms(field, q).intersection


def forcing_R_c(params: SymbolParams, u_inf: GroundState, q: float,
                linv: Optional[LinearizedInverse] = None) -> Tuple[RadialField, float]:
    """R_c = L_{c,inf}^{-1} (P_inf(D) - P_c(D)) u_inf and its H1 cap W^{1,q} norm."""
    linv = linv if linv is not None else LinearizedInverse(params, u_inf)
    forcing = linv.apply(apply_diff(u_inf.field, params))
    return forcing, intersection_norm(forcing, q)


def phi_c(w: RadialField, config: SolveConfig, u_inf: GroundState, linv: Optional[LinearizedInverse] = None,
          forcing: Optional[RadialField] = None, delta: Optional[float] = None) -> RadialField:
    """R_c + L_{c,inf}^{-1} Q(w); leaving the delta-ball raises BallExit."""
    linv = linv if linv is not None else LinearizedInverse(config.params, u_inf)
    if forcing is None:
        forcing, _ = forcing_R_c(config.params, u_inf, config.q, linv)
    out = forcing + linv.apply(Q(w, u_inf.field, config.p))
    if delta is None:
        delta = config.delta if config.delta is not None else default_delta(u_inf)
    size = intersection_norm(out, config.q)
    if not np.isfinite(size) or size > delta:
        raise BallExit(f"Phi_c left the ball of radius {delta:g} at c={config.c} (norm {size:.3e})")
    return out


def equation_residual(u: RadialField, params: SymbolParams, p: float) -> float:
    """||P_c(D) u - |u|^{p-1} u||_2 / ||u||_2."""
    norm = l2_norm(u)
    if norm == 0:
        return 0.0
    return l2_norm(apply_p_c(u, params) - RadialField(u.grid, signed_power(u.values, p))) / norm


def lipschitz_probe(config: SolveConfig, u_inf: GroundState, linv: LinearizedInverse, radius: float,
                    pairs: int = 20, seed: int = 0) -> float:
    """Largest ||Phi(w1) - Phi(w2)|| / ||w1 - w2|| over random pairs in the ball of given radius."""
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    rng = np.random.default_rng(seed)
    grid = u_inf.grid
    worst = 0.0
    for _ in range(pairs):
        sample = []
        for _ in range(2):
            f = random_band_limited(grid, rng)
            sample.append(f * (radius * rng.uniform(0.0, 1.0) / intersection_norm(f, config.q)))
        w1, w2 = sample
        gap = intersection_norm(w1 - w2, config.q)
        if gap == 0:
            continue
        image = linv.apply(Q(w1, u_inf.field, config.p) - Q(w2, u_inf.field, config.p))
        worst = max(worst, intersection_norm(image, config.q) / gap)
    return worst


@dataclass(frozen=True)
class SolveReport:
    config: SolveConfig
    w: RadialField
    u_c: RadialField
    iterations: int
    final_step: float
    residual: float
    norms: Dict[str, float]
    forcing_norm: float
    delta: float
    trace: List[float] = dataclass_field(default_factory=list)
    lipschitz_probe: Optional[float] = None
    neumann_terms: Optional[int] = None
    attempts: List[float] = dataclass_field(default_factory=list)

    @property
    def c(self) -> float:
        return self.config.c

    @property
    def accepted(self) -> bool:
        return self.residual <= RESIDUAL_GATE

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config.model_dump(),
            'iterations': self.iterations,
            'final_step': self.final_step,
            'residual': self.residual,
            'norms': dict(self.norms),
            'forcing_norm': self.forcing_norm,
            'delta': self.delta,
            'trace': list(self.trace),
            'lipschitz_probe': self.lipschitz_probe,
            'neumann_terms': self.neumann_terms,
            'attempts': list(self.attempts),
            'w': self.w.to_dict(),
            'u_c': self.u_c.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'SolveReport':
        return cls(
            config=SolveConfig.model_validate(payload['config']),
            w=RadialField.from_dict(payload['w']),
            u_c=RadialField.from_dict(payload['u_c']),
            iterations=int(payload['iterations']),
            final_step=float(payload['final_step']),
            residual=float(payload['residual']),
            norms={k: float(v) for k, v in payload['norms'].items()},
            forcing_norm=float(payload['forcing_norm']),
            delta=float(payload['delta']),
            trace=[float(v) for v in payload.get('trace', [])],
            lipschitz_probe=payload.get('lipschitz_probe'),
            neumann_terms=payload.get('neumann_terms'),
            attempts=[float(v) for v in payload.get('attempts', [])],
        )


def solve(config: SolveConfig, context: Optional[SolverContext] = None,
          initial: Optional[RadialField] = None) -> SolveReport:
    """Iterate w <- Phi_c(w) from w0 = 0 (or initial) until the L2 step drops below tol."""
    context = context if context is not None else SolverContext.build(config)
    u_inf = context.u_inf
    delta = context.delta_for(config)
    linv = context.inverse(config)
    forcing, forcing_norm = forcing_R_c(config.params, u_inf, config.q, linv)
    logger.info(f"Solving c={config.c}, s={config.params.s}, p={config.p}, N={config.dim}: "
                f"||R_c||={forcing_norm:.6e}, delta={delta:g}")

    w = initial if initial is not None else RadialField.zeros(context.grid)
    trace: List[float] = []
    for iteration in range(1, config.max_iter + 1):
        new = phi_c(w, config, u_inf, linv, forcing, delta)
        step = l2_norm(new - w)
        trace.append(step)
        w = new
        if step < config.tol:
            break
        if iteration > 3 and step >= trace[-2]:
            raise NoContraction(f"steps stopped decreasing at iteration {iteration} for c={config.c} "
                                f"({trace[-2]:.3e} -> {step:.3e})")
    else:
        raise NoContraction(f"no convergence in {config.max_iter} iterations for c={config.c}")

    u_c = u_inf.field + w
    residual = equation_residual(u_c, config.params, config.p)
    _, info = linv.apply_with_info(forcing)
    probe = None
    if config.lipschitz_pairs > 0:
        radius = min(delta, 2.0 * forcing_norm)
        probe = lipschitz_probe(config, u_inf, linv, radius, config.lipschitz_pairs, config.seed) if radius > 0 else 0.0

    report = SolveReport(
        config=config, w=w, u_c=u_c, iterations=len(trace), final_step=trace[-1], residual=residual,
        norms=norms(w, config.q).to_dict(), forcing_norm=forcing_norm, delta=delta, trace=trace,
        lipschitz_probe=probe, neumann_terms=info.terms, attempts=[config.c],
    )
    if report.accepted:
        logger.info(f"c={config.c}: converged in {report.iterations} iterations, residual={residual:.3e}")
    else:
        logger.warning(f"c={config.c}: fixed point reached but residual {residual:.3e} exceeds {RESIDUAL_GATE:g}")
    return report


def solve_with_auto_c0(config: SolveConfig, context: Optional[SolverContext] = None, factor: float = 1.5,
                       max_steps: int = 10) -> SolveReport:
    """Walk c upward by factor on NoContraction; the report lists every c tried."""
    context = context if context is not None else SolverContext.build(config)
    attempts = []
    current = config
    for _ in range(max_steps + 1):
        attempts.append(current.c)
        try:
            report = solve(current, context)
        except NoContraction as exc:
            logger.warning(f"{exc}; retrying at c={current.c * factor:.6g}")
            current = current.with_c(current.c * factor)
            continue
        return replace(report, attempts=attempts)
    raise NoContraction(f"no contraction for c in {attempts}")
