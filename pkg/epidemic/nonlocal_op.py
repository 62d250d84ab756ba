"""
Discrete nonlocal dispersal operator d (K - D) and the linearized infection
operator A = d_I (K - D) - diag(gamma), with their spectral bounds.

D = diag(row_integral). All matrices here are dense and symmetric.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import AsymmetricOperator, NonpositiveDiffusivity, NonpositiveRate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray = field(repr=False)
    symmetric_flag: bool

    @classmethod
    def from_array(cls, entries):
        entries = np.asarray(entries, dtype=float)
        entries.setflags(write=False)
        return cls(entries=entries, symmetric_flag=bool(np.array_equal(entries, entries.T)))

    @property
    def n(self):
        return self.entries.shape[0]

    def __matmul__(self, u):
        return self.entries @ u

    def __add__(self, other):
        other = other.entries if isinstance(other, OperatorMatrix) else np.asarray(other)
        return OperatorMatrix.from_array(self.entries + other)


def dispersal_matrix(kernel):
    """K - D, the unit-rate dispersal matrix."""
    return kernel.matrix - np.diag(kernel.row_integral)


def assemble_dispersal(kernel, d):
    """d * (K - D)."""
    if not d > 0:
        raise NonpositiveDiffusivity(f'Dispersal rate must be positive, got {d!r}.')
    return OperatorMatrix.from_array(d * dispersal_matrix(kernel))


def assemble_A(kernel, d_I, gamma):
    """A = d_I (K - D) - diag(gamma)."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise NonpositiveRate('Recovery rate gamma must be positive at every node.')
    dispersal = assemble_dispersal(kernel, d_I)
    return OperatorMatrix.from_array(dispersal.entries - np.diag(gamma))


def apply(op, u):
    return op.entries @ np.asarray(u, dtype=float)


def spectral_bound(op):
    """Largest eigenvalue of a symmetric operator."""
    if not op.symmetric_flag:
        raise AsymmetricOperator()
    top = linalg.eigvalsh(op.entries, subset_by_index=[op.n - 1, op.n - 1])
    return float(top[0])


def quadratic_form(kernel, u):
    """
    Discrete Rayleigh numerator: -(h^2 / 2) sum_ij J(x_i - x_j) (u_j - u_i)^2,
    equal to u^T (K - D) u * h.
    """
    u = np.asarray(u, dtype=float)
    h = kernel.mesh.weight
    jumps = (u[None, :] - u[:, None]) ** 2
    return -0.5 * h * float(np.sum(kernel.matrix * jumps))
