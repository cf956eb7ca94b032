"""
Ground state of the limit equation -Delta u + u = u^p.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .errors import DimMismatch, NoConvergence
from .radial import (RadialField, RadialGrid, forward_array, gaussian, inverse_array,
                     l2_norm, apply_multiplier)
from .symbols import eval_p_inf

logger = logging.getLogger(__name__)

CLOSED_FORM = 'closed_form'
PETVIASHVILI = 'petviashvili'

_SIGN_TOL = 1e-12


def signed_power(values: np.ndarray, p: float) -> np.ndarray:
    """|u|^{p-1} u."""
    return np.sign(values) * np.abs(values) ** p


def sobolev_critical_exponent(dim: int) -> float:
    return np.inf if dim <= 2 else (dim + 2.0) / (dim - 2.0)


def check_exponent(p: float, dim: int) -> None:
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if p >= sobolev_critical_exponent(dim):
        raise ValueError(f"p={p} is not below the critical exponent {sobolev_critical_exponent(dim)} for N={dim}")


def residual(field: RadialField, p: float) -> float:
    """||P_inf(D) u - u^p||_2 / ||u||_2, spectrally."""
    norm = l2_norm(field)
    if norm == 0:
        return 0.0
    lhs = apply_multiplier(field, eval_p_inf)
    return l2_norm(lhs - RadialField(field.grid, signed_power(field.values, p))) / norm


def stabilizing_factor(field: RadialField, p: float) -> float:
    """M = <P_inf v, v> / <v^p, v>, equal to 1 at an exact solution."""
    grid = field.grid
    weights = grid.spectral_weights
    v_hat = forward_array(grid, field.values)
    n_hat = forward_array(grid, signed_power(field.values, p))
    return float(np.sum(weights * eval_p_inf(grid.frequencies) * v_hat * v_hat) / np.sum(weights * n_hat * v_hat))


@dataclass(frozen=True)
class GroundState:
    field: RadialField
    p: float
    residual: float
    method: str
    iterations: int = 0
    stabilizer: Optional[float] = None

    @property
    def grid(self) -> RadialGrid:
        return self.field.grid

    def is_positive(self) -> bool:
        u = self.field.values
        return bool(np.all(u > -_SIGN_TOL * np.max(np.abs(u)))) and bool(np.max(u) > 0)

    def is_monotone(self) -> bool:
        u = self.field.values
        return bool(np.all(np.diff(u) <= _SIGN_TOL * np.max(np.abs(u))))

    def to_dict(self) -> Dict:
        return {
            'p': self.p,
            'residual': self.residual,
            'method': self.method,
            'iterations': self.iterations,
            'stabilizer': self.stabilizer,
            'field': self.field.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> 'GroundState':
        return cls(
            field=RadialField.from_dict(payload['field']),
            p=float(payload['p']),
            residual=float(payload['residual']),
            method=payload.get('method', PETVIASHVILI),
            iterations=int(payload.get('iterations', 0)),
            stabilizer=payload.get('stabilizer'),
        )


def closed_form_1d(p: float, grid: RadialGrid) -> GroundState:
    """((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1) x / 2)."""
    if grid.dim != 1:
        raise DimMismatch("the closed-form soliton exists only for N = 1")
    check_exponent(p, 1)
    x = grid.nodes
    amplitude = ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    values = amplitude / np.cosh((p - 1.0) * x / 2.0) ** (2.0 / (p - 1.0))
    field = RadialField(grid, values)
    state = GroundState(field=field, p=p, residual=residual(field, p), method=CLOSED_FORM,
                        stabilizer=stabilizing_factor(field, p))
    logger.info(f"Closed-form soliton p={p}: residual={state.residual:.3e}")
    return state


def _iterate(p: float, grid: RadialGrid, seed: np.ndarray, tol: float, max_iter: int):
    gamma = p / (p - 1.0)
    weights = grid.spectral_weights
    symbol = eval_p_inf(grid.frequencies)
    v = seed
    v_hat = forward_array(grid, v)
    for iteration in range(1, max_iter + 1):
        n_hat = forward_array(grid, signed_power(v, p))
        denominator = np.sum(weights * n_hat * v_hat)
        if not denominator > 0:
            raise NoConvergence(f"Petviashvili iteration collapsed at step {iteration}", iteration)
        m = np.sum(weights * symbol * v_hat * v_hat) / denominator
        new_hat = m ** gamma * n_hat / symbol
        new = inverse_array(grid, new_hat)

        change = np.sqrt(np.sum(weights * (new_hat - v_hat) ** 2) / np.sum(weights * new_hat ** 2))
        v, v_hat = new, new_hat
        if not np.isfinite(change):
            raise NoConvergence(f"Petviashvili iteration diverged at step {iteration}", iteration)
        if change < tol:
            return v, iteration
    raise NoConvergence(f"Petviashvili iteration did not converge in {max_iter} steps", max_iter)


def petviashvili(p: float, grid: RadialGrid, tol: float = 1e-12, max_iter: int = 500,
                 amplitude: float = 1.0) -> GroundState:
    """v <- M^gamma P_inf(D)^{-1}[v^p], gamma = p/(p-1), seeded with a Gaussian."""
    check_exponent(p, grid.dim)
    if not tol > 0:
        raise ValueError("tol must be positive")

    try:
        values, iterations = _iterate(p, grid, gaussian(grid, amplitude).values, tol, max_iter)
    except NoConvergence as exc:
        logger.warning(f"{exc}; retrying with seed amplitude {2 * amplitude}")
        values, iterations = _iterate(p, grid, gaussian(grid, 2.0 * amplitude).values, tol, max_iter)

    field = RadialField(grid, values)
    state = GroundState(field=field, p=p, residual=residual(field, p), method=PETVIASHVILI,
                        iterations=iterations, stabilizer=stabilizing_factor(field, p))
    if not (state.is_positive() and state.is_monotone()):
        logger.warning(f"Ground state p={p}, N={grid.dim} failed the positivity/monotonicity post-check")
    logger.info(f"Petviashvili p={p}, N={grid.dim}, K={grid.points}: {iterations} iterations, "
                f"residual={state.residual:.3e}, M={state.stabilizer:.15f}")
    return state

