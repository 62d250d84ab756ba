"""
Spatial discretization: uniform midpoint mesh on an interval, the dispersal
kernel sampled on it, and the mesh quadrature.
"""
import logging
from dataclasses import dataclass, field
from math import exp, pi, sqrt

import numpy as np
from scipy.special import erf

from .exceptions import InvalidDomain, KernelTooNarrow, LengthMismatch, NegativeParameter, SolverError

logger = logging.getLogger(__name__)

TRIANGLE = 'triangle'
GAUSSIAN = 'gaussian'
KERNEL_FAMILIES = (TRIANGLE, GAUSSIAN)


@dataclass(frozen=True, eq=False)
class Mesh:
    a: float
    b: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weight: float

    @property
    def length(self):
        """|Omega|."""
        return self.b - self.a

    def constant(self, value):
        return np.full(self.n, float(value))

    def __eq__(self, other):
        return isinstance(other, Mesh) and (self.a, self.b, self.n) == (other.a, other.b, other.n)

    def __hash__(self):
        return hash((self.a, self.b, self.n))


@dataclass(frozen=True)
class KernelSpec:
    """
    Kernel family descriptor.

    ``triangle``: J(x) = max(0, 1 - |x|/delta) / delta.
    ``gaussian``: J(x) = (exp(-x^2 / 2 sigma^2) - exp(-cutoff^2 / 2))_+ / Z on
    |x| <= cutoff * sigma, with Z the analytic full-line normalizer.
    """
    family: str = TRIANGLE
    delta: float = None
    sigma: float = None
    cutoff: float = 3.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise SolverError(f'Unknown kernel family {self.family!r}.', code='unknown_kernel')
        params = ('delta',) if self.family == TRIANGLE else ('sigma', 'cutoff')
        for name in params:
            value = getattr(self, name)
            if value is None or not value > 0:
                raise NegativeParameter(f'Kernel parameter {name} must be positive, got {value!r}.')

    @property
    def support(self):
        """Radius of the kernel support."""
        if self.family == TRIANGLE:
            return self.delta
        return self.cutoff * self.sigma

    @property
    def peak(self):
        """J(0)."""
        if self.family == TRIANGLE:
            return 1.0 / self.delta
        return (1.0 - exp(-0.5 * self.cutoff ** 2)) / self._gaussian_normalizer()

    def _gaussian_normalizer(self):
        c, s = self.cutoff, self.sigma
        return s * sqrt(2 * pi) * erf(c / sqrt(2)) - 2 * c * s * exp(-0.5 * c ** 2)

    def density(self, x):
        """Evaluate J pointwise."""
        x = np.abs(np.asarray(x, dtype=float))
        if self.family == TRIANGLE:
            return np.maximum(0.0, 1.0 - x / self.delta) / self.delta
        shifted = np.exp(-0.5 * (x / self.sigma) ** 2) - exp(-0.5 * self.cutoff ** 2)
        return np.where(x <= self.support, shifted, 0.0) / self._gaussian_normalizer()

    def antiderivative(self, u):
        """G(u) = integral of J from 0 to u (odd in u)."""
        u = np.asarray(u, dtype=float)
        if self.family == TRIANGLE:
            t = np.clip(np.abs(u), 0.0, self.delta) / self.delta
            return np.sign(u) * (t - 0.5 * t ** 2)
        clipped = np.clip(u, -self.support, self.support)
        s = self.sigma
        value = s * sqrt(pi / 2) * erf(clipped / (s * sqrt(2))) - exp(-0.5 * self.cutoff ** 2) * clipped
        return value / self._gaussian_normalizer()


@dataclass(frozen=True, eq=False)
class Kernel:
    spec: KernelSpec
    mesh: Mesh
    matrix: np.ndarray = field(repr=False)
    row_integral: np.ndarray = field(repr=False)


def build_mesh(a, b, n):
    """Uniform midpoint mesh on (a, b) with n cells."""
    a, b = float(a), float(b)
    if not b > a:
        raise InvalidDomain(f'Need b > a, got a={a}, b={b}.')
    if int(n) != n or n < 2:
        raise InvalidDomain(f'Need an integer n >= 2, got {n!r}.')
    n = int(n)
    h = (b - a) / n
    nodes = a + (np.arange(n) + 0.5) * h
    nodes.setflags(write=False)
    return Mesh(a=a, b=b, n=n, nodes=nodes, weight=h)


def build_kernel(mesh, spec):
    """
    Discretize J on ``mesh``: K[i][j] = J(x_i - x_j) * h.

    The triangle kernel is sampled at node offsets (midpoint rule). When
    delta/h is fractional the sampled rows straddle the kink at |x| = delta and
    overshoot unit mass by O(h^2); the whole matrix is then divided by the
    heaviest row. The truncated Gaussian uses exact
    cell integrals of J so no row ever carries more than unit mass.
    """
    if isinstance(spec, dict):
        spec = KernelSpec(**spec)
    h = mesh.weight
    if spec.support < 2 * h:
        raise KernelTooNarrow(
            f'{spec.family} support {spec.support:g} is below two cells (2h = {2 * h:g}).')

    offsets = np.abs(mesh.nodes[:, None] - mesh.nodes[None, :])
    if spec.family == TRIANGLE:
        matrix = spec.density(offsets) * h
        peak = matrix.sum(axis=1).max()
        if peak > 1 + 1e-12:
            logger.debug('triangle rows overshoot unit mass by %.3g on n=%d, rescaling', peak - 1, mesh.n)
            matrix /= peak
    else:
        matrix = spec.antiderivative(offsets + 0.5 * h) - spec.antiderivative(offsets - 0.5 * h)
    row_integral = matrix.sum(axis=1)

    _check_kernel(matrix, row_integral)
    matrix.setflags(write=False)
    row_integral.setflags(write=False)
    logger.debug('kernel %s on n=%d: row integral in [%.6f, %.6f]',
                 spec.family, mesh.n, row_integral.min(), row_integral.max())
    return Kernel(spec=spec, mesh=mesh, matrix=matrix, row_integral=row_integral)


def _check_kernel(matrix, row_integral):
    if not np.array_equal(matrix, matrix.T):
        raise SolverError('Kernel matrix is not symmetric.', code='kernel_invariant')
    if np.any(matrix < 0) or np.any(np.diag(matrix) <= 0):
        raise SolverError('Kernel matrix needs nonnegative entries and a positive diagonal.',
                          code='kernel_invariant')
    if np.any(row_integral <= 0) or np.any(row_integral > 1 + 1e-8):
        raise SolverError('Kernel row integrals must lie in (0, 1].', code='kernel_invariant')
    if not row_integral.min() < 1:
        raise SolverError('Kernel carries full mass on every row.', code='kernel_invariant')


def as_field(mesh, values):
    """Coerce ``values`` (array or scalar) to a float array aligned with the mesh."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(mesh.n, float(arr))
    if arr.shape != (mesh.n,):
        raise LengthMismatch(f'Field has shape {arr.shape}, mesh has {mesh.n} nodes.')
    return arr


def integrate(mesh, f):
    """Midpoint quadrature of a nodal field over Omega."""
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n,):
        raise LengthMismatch(f'Field has shape {f.shape}, mesh has {mesh.n} nodes.')
    return mesh.weight * f.sum()
