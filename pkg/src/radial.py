"""
Radial grids, the radial Fourier transform pair for N = 1 and N = 3, multipliers,
quadrature, derivatives and norms.

Both dimensions use the even Dirichlet eigenbasis of the ball of radius R, so every
basis function vanishes at r = R and the discrete transforms are exact scipy.fft pairs:

    N = 1   h = R / K,      r_j = (j-1) h,  rho_k = (k - 1/2) pi / R,  u_hat = h / sqrt(2 pi) * DCT-III(u)
    N = 3   h = R / (K+1),  r_j = j h,      rho_k = k pi / R,          u_hat = sqrt(2/pi) (h/2) DST-I(r u) / rho

The Dirichlet node r = R is implied and not stored.

Spectral inner products carry the exact discrete Parseval weights.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Union

import numpy as np
from scipy.fft import dct, dst
from scipy.integrate import simpson

from .errors import DimMismatch, GridMismatch, QMismatch

logger = logging.getLogger(__name__)

Symbol = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RadialGrid:
    dim: int
    points: int
    radius: float

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise DimMismatch(f"dim must be 1 or 3, got {self.dim}")
        if self.points < 256 or self.points & (self.points - 1):
            raise ValueError(f"points must be a power of two >= 256, got {self.points}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, 'points', int(self.points))
        object.__setattr__(self, 'radius', float(self.radius))

    @property
    def spacing(self) -> float:
        return self.radius / (self.points if self.dim == 1 else self.points + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        offset = 0 if self.dim == 1 else 1
        return _readonly((np.arange(self.points) + offset) * self.spacing)

    @cached_property
    def frequencies(self) -> np.ndarray:
        shift = 0.5 if self.dim == 1 else 0.0
        return _readonly((np.arange(1, self.points + 1) - shift) * np.pi / self.radius)

    @cached_property
    def spectral_weights(self) -> np.ndarray:
        """Weights making sum(w * f_hat * g_hat) the discrete L2 inner product."""
        if self.dim == 1:
            w = np.full(self.points, 2.0 * np.pi / self.radius)
        else:
            w = 4.0 * np.pi * np.pi / self.radius * self.frequencies ** 2
        return _readonly(w)

    @cached_property
    def physical_weights(self) -> np.ndarray:
        """Trapezoid weights on the nodes, Parseval-exact with the spectral weights."""
        h = self.spacing
        if self.dim == 1:
            w = np.full(self.points, 2.0 * h)
            w[0] = h
        else:
            w = 4.0 * np.pi * self.nodes ** 2 * h
        return _readonly(w)

    def to_dict(self) -> Dict[str, Union[int, float]]:
        return {'dim': self.dim, 'K': self.points, 'R': self.radius}


def _check_same_grid(a: 'RadialGrid', b: 'RadialGrid') -> None:
    if a != b:
        raise GridMismatch(f"fields live on different grids: {a} vs {b}")


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.points,):
            raise ValueError(f"expected {self.grid.points} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, 'values', _readonly(values))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> 'RadialField':
        return cls(grid, np.zeros(grid.points))

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable[[np.ndarray], np.ndarray]) -> 'RadialField':
        return cls(grid, func(grid.nodes))

    def _other_values(self, other) -> Union[np.ndarray, float]:
        if isinstance(other, RadialField):
            _check_same_grid(self.grid, other.grid)
            return other.values
        return float(other)

    def __add__(self, other) -> 'RadialField':
        return RadialField(self.grid, self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other) -> 'RadialField':
        return RadialField(self.grid, self.values - self._other_values(other))

    def __rsub__(self, other) -> 'RadialField':
        return RadialField(self.grid, self._other_values(other) - self.values)

    def __mul__(self, other) -> 'RadialField':
        return RadialField(self.grid, self.values * self._other_values(other))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> 'RadialField':
        return RadialField(self.grid, self.values / float(other))

    def __neg__(self) -> 'RadialField':
        return RadialField(self.grid, -self.values)

    def __eq__(self, other) -> bool:
        return (isinstance(other, RadialField) and self.grid == other.grid
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self) -> Dict:
        return {**self.grid.to_dict(), 'values': [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, payload: Dict) -> 'RadialField':
        grid = RadialGrid(int(payload['dim']), int(payload['K']), float(payload['R']))
        return cls(grid, np.asarray(payload['values'], dtype=float))


@dataclass(frozen=True)
class SpectralField:
    grid: RadialGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (self.grid.points,):
            raise ValueError(f"expected {self.grid.points} coefficients, got shape {coeffs.shape}")
        object.__setattr__(self, 'coeffs', _readonly(coeffs))

    def inner(self, other: 'SpectralField') -> float:
        _check_same_grid(self.grid, other.grid)
        return float(np.sum(self.grid.spectral_weights * self.coeffs * other.coeffs))

    def l2_norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def __mul__(self, symbol_values) -> 'SpectralField':
        return SpectralField(self.grid, self.coeffs * symbol_values)

    __rmul__ = __mul__


def _column(vector: np.ndarray, ndim: int) -> np.ndarray:
    return vector.reshape((-1,) + (1,) * (ndim - 1))


def forward_array(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    """Forward transform along axis 0 (columns are independent fields)."""
    h = grid.spacing
    if grid.dim == 1:
        return h / np.sqrt(2.0 * np.pi) * dct(values, type=3, axis=0)
    r = _column(grid.nodes, values.ndim)
    rho = _column(grid.frequencies, values.ndim)
    return np.sqrt(2.0 / np.pi) * (h / 2.0) * dst(r * values, type=1, axis=0) / rho


def inverse_array(grid: RadialGrid, coeffs: np.ndarray) -> np.ndarray:
    h = grid.spacing
    if grid.dim == 1:
        return dct(coeffs * (np.sqrt(2.0 * np.pi) / h), type=2, axis=0) / (2.0 * grid.points)
    r = _column(grid.nodes, coeffs.ndim)
    rho = _column(grid.frequencies, coeffs.ndim)
    return dst(coeffs * rho * (np.sqrt(np.pi / 2.0) * 2.0 / h), type=1, axis=0) / (2.0 * (grid.points + 1)) / r


def forward(field: RadialField) -> SpectralField:
    return SpectralField(field.grid, forward_array(field.grid, field.values))


def inverse(spec: SpectralField) -> RadialField:
    return RadialField(spec.grid, inverse_array(spec.grid, spec.coeffs))


def symbol_values(grid: RadialGrid, symbol: Symbol) -> np.ndarray:
    values = symbol(grid.frequencies) if callable(symbol) else symbol
    values = np.broadcast_to(np.asarray(values, dtype=float), (grid.points,))
    if not np.all(np.isfinite(values)):
        raise ValueError("symbol must be finite on the grid frequencies")
    return values


def apply_multiplier(field: RadialField, symbol: Symbol) -> RadialField:
    """inverse(symbol(rho) * forward(field))."""
    values = symbol_values(field.grid, symbol)
    return RadialField(field.grid, inverse_array(field.grid, values * forward_array(field.grid, field.values)))


def apply_multiplier_array(grid: RadialGrid, symbol: Symbol, values: np.ndarray) -> np.ndarray:
    """Multiplier on raw sample arrays, axis 0."""
    sym = _column(symbol_values(grid, symbol), values.ndim)
    return inverse_array(grid, sym * forward_array(grid, values))


def origin_value(field: RadialField) -> float:
    """u(0); for N = 3 extrapolated from an even quartic through the first three nodes."""
    u = field.values
    if field.grid.dim == 1:
        return float(u[0])
    return float(1.5 * u[0] - 0.6 * u[1] + 0.1 * u[2])


def _padded(field: RadialField) -> np.ndarray:
    """Samples on -2h..R: even reflection at the origin, the Dirichlet zero at R."""
    u = field.values
    if field.grid.dim == 1:
        return np.concatenate([u[2:0:-1], u, [0.0]])
    return np.concatenate([u[1::-1], [origin_value(field)], u, [0.0]])


def derivative(field: RadialField) -> RadialField:
    """u'(r) at the nodes to 4th order: central stencil inside, one-sided at the last node."""
    y = _padded(field)
    h = field.grid.spacing
    d = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    # d[i] is the derivative at padded index i+2
    start = 0 if field.grid.dim == 1 else 1
    last = (3.0 * y[-1] + 10.0 * y[-2] - 18.0 * y[-3] + 6.0 * y[-4] - y[-5]) / (12.0 * h)
    return RadialField(field.grid, np.append(d[start:start + field.grid.points - 1], last))


def integrate(grid: RadialGrid, integrand: np.ndarray) -> float:
    """Radial-measure integral of a node-sampled integrand by composite Simpson on 0..R.

    The integrand is taken to vanish at the Dirichlet node R."""
    h = grid.spacing
    if grid.dim == 1:
        # weight 2 by evenness
        samples = np.concatenate([integrand, [0.0]])
        return float(2.0 * simpson(samples, dx=h))
    r = grid.nodes
    samples = np.concatenate([[0.0], 4.0 * np.pi * r * r * integrand, [0.0]])
    return float(simpson(samples, dx=h))


def inner_product(u: RadialField, v: RadialField) -> float:
    _check_same_grid(u.grid, v.grid)
    return integrate(u.grid, u.values * v.values)


def lq_norm(field: RadialField, q: float) -> float:
    return float(integrate(field.grid, np.abs(field.values) ** q) ** (1.0 / q))


def l2_norm(field: RadialField) -> float:
    return float(np.sqrt(max(integrate(field.grid, field.values ** 2), 0.0)))


@dataclass(frozen=True)
class FieldNorms:
    l2: float
    lq: float
    h1: float
    w1q: float
    intersection: float
    q: float
    sup: float

    def to_dict(self) -> Dict[str, float]:
        return {'l2': self.l2, 'lq': self.lq, 'h1': self.h1, 'w1q': self.w1q,
                'max': self.intersection, 'sup': self.sup, 'q': self.q}


def norms(field: RadialField, q: float) -> FieldNorms:
    """L2, Lq, H1, W^{1,q} and the intersection norm max(H1, W^{1,q})."""
    if q < 2:
        raise QMismatch(f"q must be at least 2, got {q}")
    grad = derivative(field)
    l2 = l2_norm(field)
    lq = lq_norm(field, q)
    grad_l2 = l2_norm(grad)
    h1 = float(np.sqrt(l2 ** 2 + grad_l2 ** 2))
    w1q = lq + lq_norm(grad, q)
    return FieldNorms(l2=l2, lq=lq, h1=h1, w1q=w1q, intersection=max(h1, w1q), q=float(q),
                      sup=field.max_abs())


def laplacian(field: RadialField) -> RadialField:
    """Delta u computed spectrally."""
    return apply_multiplier(field, lambda rho: -rho * rho)


def w2q_norm(field: RadialField, q: float) -> float:
    """||f||_q + ||f'||_q + ||Delta f||_q."""
    return lq_norm(field, q) + lq_norm(derivative(field), q) + lq_norm(laplacian(field), q)


def random_band_limited(grid: RadialGrid, rng: np.random.Generator, fraction: float = 0.125) -> RadialField:
    """Uniform [-1, 1] coefficients on the lowest fraction of the modes."""
    coeffs = np.zeros(grid.points)
    modes = max(1, int(grid.points * fraction))
    coeffs[:modes] = rng.uniform(-1.0, 1.0, modes)
    return inverse(SpectralField(grid, coeffs))


def gaussian(grid: RadialGrid, amplitude: float = 1.0) -> RadialField:
    return RadialField.from_function(grid, lambda r: amplitude * np.exp(-r * r / 2.0))
