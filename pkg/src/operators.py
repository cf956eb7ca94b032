"""
Discrete operators: the multipliers P_c(D), P_inf(D) and their stable difference,
the dense operator A = I - p u_inf^{p-1} P_inf(D)^{-1}, the perturbation
B = p u_inf^{p-1} (P_inf(D)^{-1} - P_c(D)^{-1}) A^{-1}, and the factorized inverse

    L_{c,inf}^{-1} = P_c(D)^{-1} A^{-1} (I + B)^{-1}

with (I + B)^{-1} summed as a Neumann series.
"""
import logging
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from .errors import GridMismatch, NeumannDivergence, SingularA
from .groundstate import GroundState
from .radial import (RadialField, RadialGrid, Symbol, apply_multiplier_array, lq_norm,
                     random_band_limited, symbol_values, w2q_norm, norms)
from .symbols import SymbolParams, eval_p_c, eval_p_inf, multiplier_a, symbol_difference

logger = logging.getLogger(__name__)

MULTIPLIER = 'multiplier'
COMPOSED = 'composed'
DENSE = 'dense'

# Neumann terms larger than this multiple of ||f|| count as divergence
_DIVERGENCE_FACTOR = 1e8


class LinearOperatorHandle:
    """A linear action on fields of one grid; arrays of shape (K,) or (K, m) act column-wise."""

    def __init__(self, kind: str, grid: RadialGrid, action: Callable[[np.ndarray], np.ndarray],
                 params: Optional[SymbolParams] = None, name: str = ''):
        self.kind = kind
        self.grid = grid
        self.params = params
        self.name = name
        self._action = action

    def apply_array(self, values: np.ndarray) -> np.ndarray:
        return self._action(values)

    def apply(self, field: RadialField) -> RadialField:
        if field.grid != self.grid:
            raise GridMismatch(f"operator {self.name} lives on {self.grid}, field on {field.grid}")
        return RadialField(self.grid, self._action(field.values))

    __call__ = apply

    def to_dense(self) -> np.ndarray:
        return self._action(np.eye(self.grid.points))

    def __repr__(self) -> str:
        return f"LinearOperatorHandle(kind={self.kind!r}, name={self.name!r}, K={self.grid.points})"


class DenseOperator(LinearOperatorHandle):
    """Dense matrix with a cached LU factorization.

    One instance is shared by all workers of a rate study, so BLAS and LAPACK calls
    on it are serialized: concurrent getrs on one factorization returns wrong results."""

    def __init__(self, grid: RadialGrid, matrix: np.ndarray, name: str = ''):
        matrix = np.ascontiguousarray(matrix, dtype=float)
        self._lock = threading.Lock()
        super().__init__(DENSE, grid, self._matvec, name=name)
        self.matrix = matrix
        self.matrix.flags.writeable = False
        self._lu = lu_factor(matrix, check_finite=False)
        if np.any(np.diag(self._lu[0]) == 0.0):
            raise SingularA(f"{name} has an exactly singular factorization")
        rcond, info = dgecon(self._lu[0], np.linalg.norm(matrix, 1), norm='1')
        if info != 0 or not np.isfinite(rcond):
            raise SingularA(f"condition estimate failed for {name} (info={info})")
        self.rcond = float(rcond)

    @property
    def condition_number(self) -> float:
        return 1.0 / self.rcond if self.rcond > 0 else np.inf

    def _matvec(self, values: np.ndarray) -> np.ndarray:
        with self._lock:
            return self.matrix @ values

    def solve_array(self, values: np.ndarray) -> np.ndarray:
        with self._lock:
            return lu_solve(self._lu, values, check_finite=False)

    def solve(self, field: RadialField) -> RadialField:
        return RadialField(self.grid, self.solve_array(field.values))


def multiplier_operator(grid: RadialGrid, symbol: Symbol, params: Optional[SymbolParams] = None,
                        name: str = '') -> LinearOperatorHandle:
    values = symbol_values(grid, symbol).copy()
    return LinearOperatorHandle(MULTIPLIER, grid, lambda x: apply_multiplier_array(grid, values, x), params, name)


def p_c_operator(grid: RadialGrid, params: SymbolParams) -> LinearOperatorHandle:
    return multiplier_operator(grid, lambda rho: eval_p_c(rho, params), params, 'P_c')


def p_inf_operator(grid: RadialGrid) -> LinearOperatorHandle:
    return multiplier_operator(grid, eval_p_inf, name='P_inf')


def diff_operator(grid: RadialGrid, params: SymbolParams) -> LinearOperatorHandle:
    """P_inf(D) - P_c(D) from the stable difference symbol."""
    return multiplier_operator(grid, lambda rho: -np.asarray(symbol_difference(rho, params)), params, 'P_inf-P_c')


def apply_p_c(field: RadialField, params: SymbolParams) -> RadialField:
    return p_c_operator(field.grid, params).apply(field)


def apply_p_inf(field: RadialField) -> RadialField:
    return p_inf_operator(field.grid).apply(field)


def apply_diff(field: RadialField, params: SymbolParams) -> RadialField:
    return diff_operator(field.grid, params).apply(field)


def potential(u_inf: GroundState) -> np.ndarray:
    """p u_inf^{p-1} on the positive branch."""
    return u_inf.p * np.abs(u_inf.field.values) ** (u_inf.p - 1.0)


def build_A(u_inf: GroundState, q: Optional[float] = None) -> DenseOperator:
    """A = I - p u_inf^{p-1} P_inf(D)^{-1}, assembled by applying A to every basis field."""
    grid = u_inf.grid
    identity = np.eye(grid.points)
    smoothing = apply_multiplier_array(grid, 1.0 / np.asarray(eval_p_inf(grid.frequencies)), identity)
    matrix = identity - potential(u_inf)[:, None] * smoothing
    operator = DenseOperator(grid, matrix, name='A')
    if operator.rcond < 1e-13:
        raise SingularA(f"A is numerically singular (rcond={operator.rcond:.3e}); refine the grid")
    logger.info(f"Assembled A for p={u_inf.p}, N={grid.dim}, K={grid.points}: "
                f"condition ~ {operator.condition_number:.3e}")
    return operator


def weighted_l2(grid: RadialGrid, values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(grid.physical_weights * values * values)))


@dataclass(frozen=True)
class NeumannInfo:
    terms: int
    last_term: float
    # tau * beta / (1 - beta) when an estimate of ||B|| is supplied
    tail_bound: Optional[float] = None


class LinearizedInverse:
    """Factorized inverse of L_{c,inf} = P_c(D) - p u_inf^{p-1} for one c."""

    def __init__(self, params: SymbolParams, u_inf: GroundState, A: Optional[DenseOperator] = None,
                 neumann_tol: float = 1e-14, max_terms: int = 50):
        self.params = params
        self.u_inf = u_inf
        self.grid = u_inf.grid
        self.A = A if A is not None else build_A(u_inf)
        if self.A.grid != self.grid:
            raise ValueError("A was assembled on a different grid")
        self.neumann_tol = neumann_tol
        self.max_terms = max_terms
        self.potential = potential(u_inf)
        freq = self.grid.frequencies
        self._a_symbol = np.asarray(multiplier_a(freq, params))
        self._p_c_symbol = np.asarray(eval_p_c(freq, params))

    def _b_array(self, values: np.ndarray) -> np.ndarray:
        pot = self.potential if values.ndim == 1 else self.potential[:, None]
        return pot * apply_multiplier_array(self.grid, self._a_symbol, self.A.solve_array(values))

    @property
    def B(self) -> LinearOperatorHandle:
        return LinearOperatorHandle(COMPOSED, self.grid, self._b_array, self.params, 'B')

    @property
    def L(self) -> LinearOperatorHandle:
        """The forward operator L_{c,inf}."""
        def action(values: np.ndarray) -> np.ndarray:
            pot = self.potential if values.ndim == 1 else self.potential[:, None]
            return apply_multiplier_array(self.grid, self._p_c_symbol, values) - pot * values
        return LinearOperatorHandle(COMPOSED, self.grid, action, self.params, 'L')

    def neumann(self, values: np.ndarray, beta: Optional[float] = None) -> Tuple[np.ndarray, NeumannInfo]:
        """(I + B)^{-1} f as sum (-B)^k f."""
        f_norm = weighted_l2(self.grid, values)
        if f_norm == 0.0:
            return np.zeros_like(values), NeumannInfo(terms=0, last_term=0.0, tail_bound=0.0)
        total = values.copy()
        term = values
        for k in range(1, self.max_terms + 1):
            term = -self._b_array(term)
            term_norm = weighted_l2(self.grid, term)
            if not np.isfinite(term_norm) or term_norm > _DIVERGENCE_FACTOR * f_norm:
                raise NeumannDivergence(f"Neumann series diverged at term {k} for c={self.params.c}")
            total += term
            if term_norm < self.neumann_tol * f_norm:
                tail = term_norm * beta / (1.0 - beta) if beta is not None and beta < 1 else None
                return total, NeumannInfo(terms=k, last_term=term_norm, tail_bound=tail)
        raise NeumannDivergence(
            f"Neumann series did not reach {self.neumann_tol:g} relative in {self.max_terms} terms "
            f"for c={self.params.c}; increase c")

    def apply_with_info(self, f: RadialField, beta: Optional[float] = None) -> Tuple[RadialField, NeumannInfo]:
        y, info = self.neumann(f.values, beta)
        z = self.A.solve_array(y)
        return RadialField(self.grid, apply_multiplier_array(self.grid, 1.0 / self._p_c_symbol, z)), info

    def apply(self, f: RadialField) -> RadialField:
        return self.apply_with_info(f)[0]

    __call__ = apply


def apply_L_inverse(f: RadialField, params: SymbolParams, u_inf: GroundState, q: Optional[float] = None,
                    A: Optional[DenseOperator] = None) -> RadialField:
    """P_c(D)^{-1} A^{-1} (I + B)^{-1} f."""
    return LinearizedInverse(params, u_inf, A).apply(f)


def b_operator_norm(linv: LinearizedInverse, max_iter: int = 200, tol: float = 1e-10, seed: int = 0) -> float:
    """L2 operator norm of B by power iteration on B^* B in the weighted inner product."""
    grid = linv.grid
    root = np.sqrt(grid.physical_weights)
    matrix = linv.B.to_dense()
    weighted = root[:, None] * matrix / root[None, :]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(grid.points)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iter):
        y = weighted.T @ (weighted @ x)
        value = float(np.linalg.norm(y))
        if value == 0.0:
            return 0.0
        x = y / value
        if abs(value - estimate) <= tol * value:
            estimate = value
            break
        estimate = value
    return float(np.sqrt(estimate))


def discover_c0(u_inf: GroundState, s: float, c_start: float = 2.0, factor: float = 1.5,
                max_steps: int = 20, threshold: float = 0.5,
                A: Optional[DenseOperator] = None) -> Tuple[float, List[Tuple[float, float]]]:
    """Smallest c on the ladder c_start * factor^k with ||B|| <= threshold."""
    A = A if A is not None else build_A(u_inf)
    ladder = []
    c = c_start
    for _ in range(max_steps):
        beta = b_operator_norm(LinearizedInverse(SymbolParams(s=s, c=c), u_inf, A))
        ladder.append((c, beta))
        logger.info(f"||B|| at c={c:.6g}: {beta:.6e}")
        if beta <= threshold:
            return c, ladder
        c *= factor
    raise NeumannDivergence(f"||B|| stayed above {threshold} up to c={c / factor:.6g}")


def probe_fields(grid: RadialGrid, trials: int, seed: int) -> List[RadialField]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    return [random_band_limited(grid, rng) for _ in range(trials)]


def norm_equivalence_probe(params: SymbolParams, q: float, trials: int, grid: RadialGrid, seed: int = 0,
                           fields: Optional[Sequence[RadialField]] = None) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Ranges of ||P_c f||_q / ||f||_{W^{1,q}} and ||P_c f||_q / ||f||_{W^{2,q}} over probe fields."""
    fields = list(fields) if fields is not None else probe_fields(grid, trials, seed)
    op = p_c_operator(grid, params)
    lower, upper = [], []
    for f in fields:
        value = lq_norm(op.apply(f), q)
        lower.append(value / norms(f, q).w1q)
        upper.append(value / w2q_norm(f, q))
    return (min(lower), max(lower)), (min(upper), max(upper))


def norm_equivalence_band(grid: RadialGrid, s: float, q: float, c_values: Iterable[float] = (4.0, 16.0, 64.0),
                          trials: int = 8, seed: int = 0,
                          fields: Optional[Sequence[RadialField]] = None) -> Dict[str, float]:
    """Spread (max/min over c) of the two norm-equivalence ratios on fixed probe fields."""
    fields = list(fields) if fields is not None else probe_fields(grid, trials, seed)
    low_min, low_max, up_min, up_max = np.inf, 0.0, np.inf, 0.0
    for c in c_values:
        (lo_a, lo_b), (up_a, up_b) = norm_equivalence_probe(SymbolParams(s=s, c=c), q, len(fields), grid,
                                                            fields=fields)
        low_min, low_max = min(low_min, lo_a), max(low_max, lo_b)
        up_min, up_max = min(up_min, up_a), max(up_max, up_b)
    return {
        'lower_min': low_min, 'lower_max': low_max, 'lower_spread': low_max / low_min,
        'upper_min': up_min, 'upper_max': up_max, 'upper_spread': up_max / up_min,
    }


class ResolventConstants(BaseModel):
    """Frozen constants of the two resolvent-difference estimates."""

    model_config = ConfigDict(frozen=True)

    flat: float
    smoothing: float
    margin: float = 1.05


def resolvent_difference_probe(params: SymbolParams, q: float, fields: Sequence[RadialField]) -> Tuple[float, float]:
    """Largest c-rescaled ratios
    ||(P_inf^{-1} - P_c^{-1}) f||_q c^{2s/(1-s)} / ||f||_q and
    ||(P_inf^{-1} - P_c^{-1}) f||_q c^{2s^2/(1-s)} / ||P_inf^{-(1-s)} f||_q."""
    s, c = params.s, params.c
    grid = fields[0].grid
    diff = multiplier_operator(grid, lambda rho: multiplier_a(rho, params), params, 'resolvent_difference')
    smooth = multiplier_operator(grid, lambda rho: np.asarray(eval_p_inf(rho)) ** (-(1.0 - s)), name='P_inf^-(1-s)')
    flat_scale = c ** (2.0 * s / (1.0 - s))
    smooth_scale = c ** (2.0 * s * s / (1.0 - s))
    flat, smoothing = 0.0, 0.0
    for f in fields:
        value = lq_norm(diff.apply(f), q)
        flat = max(flat, value * flat_scale / lq_norm(f, q))
        smoothing = max(smoothing, value * smooth_scale / lq_norm(smooth.apply(f), q))
    return flat, smoothing


def calibrate_resolvent_constants(grid: RadialGrid, s: float, q: float, c_values: Iterable[float],
                                  fields: Sequence[RadialField], margin: float = 1.05) -> ResolventConstants:
    flat, smoothing = 0.0, 0.0
    for c in c_values:
        a, b = resolvent_difference_probe(SymbolParams(s=s, c=c), q, fields)
        flat, smoothing = max(flat, a), max(smoothing, b)
    constants = ResolventConstants(flat=margin * flat, smoothing=margin * smoothing, margin=margin)
    logger.info(f"Calibrated resolvent constants flat={constants.flat:.6g}, smoothing={constants.smoothing:.6g}")
    return constants
