"""
Threshold quantities of the linearized infection problem.

lambda_p(d_I) is the minimum of the discrete Rayleigh quotient
    [-d_I u^T (K - D) u + u^T diag(gamma - beta) u] / u^T u,
mu_p is the principal value of the beta-weighted problem
    [-d_I (K - D) + diag(gamma)] phi = mu diag(beta) phi,
and R0 = 1 / mu_p is also computed as the top of the variational quotient and
as the spectral radius of the next-generation matrix diag(beta) (-A)^-1.
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .exceptions import InvalidBracket, LengthMismatch, NonpositiveEigenvector, NonpositiveRate, SingularOperator
from .mesh import as_field, integrate
from .nonlocal_op import OperatorMatrix, assemble_A, assemble_dispersal, spectral_bound

logger = logging.getLogger(__name__)

BISECTION_MAX_ITER = 60
SIGN_TOL = 1e-9
ROUTE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class RateFields:
    beta: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if beta.shape != gamma.shape:
            raise LengthMismatch('beta and gamma must share the mesh.')
        if np.any(~(beta > 0)):
            raise NonpositiveRate('Transmission rate beta must be positive at every node.')
        if np.any(~(gamma > 0)):
            raise NonpositiveRate('Recovery rate gamma must be positive at every node.')
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'gamma', gamma)

    @classmethod
    def on_mesh(cls, mesh, beta, gamma):
        return cls(beta=as_field(mesh, beta), gamma=as_field(mesh, gamma))


@dataclass(eq=False)
class SpectralReport:
    d_I: float
    lambda_p: float
    lambda_p_eigvec: np.ndarray = field(repr=False)
    principal_exists: bool
    mu_p: float
    mu_p_eigvec: np.ndarray = field(repr=False)
    r0_weighted: float
    r0_variational: float
    r0_nextgen: float
    spectral_bound_M: float
    limit_d0: float
    limit_dinf: float
    r0_limit_d0: float
    r0_limit_dinf: float

    CSV_COLUMNS = ('d_I', 'lambda_p', 'principal_exists', 'mu_p', 'r0_weighted', 'r0_variational',
                   'r0_nextgen', 'limit_d0', 'limit_dinf', 'r0_limit_d0', 'r0_limit_dinf')

    def as_row(self):
        return {name: getattr(self, name) for name in self.CSV_COLUMNS}

    def check_invariants(self):
        """Sign relation, route agreement and the S(A + F) = -lambda_p identity."""
        lp, r0 = self.lambda_p, self.r0_weighted
        sign_ok = abs(lp) <= SIGN_TOL or np.sign(lp) == np.sign(1.0 - r0)
        return {
            'sign_relation': bool(sign_ok),
            'route_variational': abs(r0 - self.r0_variational) <= ROUTE_TOL * r0,
            'route_nextgen': abs(r0 - self.r0_nextgen) <= ROUTE_TOL * r0,
            'spectral_bound': abs(self.spectral_bound_M + lp) <= SIGN_TOL * (1 + abs(lp)),
        }


class RiskProfile(NamedTuple):
    high_risk_sites: int
    low_risk_sites: int
    high_risk_domain: bool
    regime: str  # 'high_risk_domain' | 'all_low_risk' | 'no_high_risk' | 'neutral' | 'mixed'


class DiffusivityThreshold(NamedTuple):
    d_star: Optional[float]
    reason: str
    iterations: int = 0


def rayleigh_minimum(kernel, d, potential):
    """
    Smallest eigenpair of -d (K - D) + diag(potential), eigenvector unit-norm
    with nonnegative sum.
    """
    dispersal = assemble_dispersal(kernel, d)
    matrix = -dispersal.entries + np.diag(np.asarray(potential, dtype=float))
    values, vectors = linalg.eigh(matrix, subset_by_index=[0, 0])
    vector = vectors[:, 0]
    if vector.sum() < 0:
        vector = -vector
    return float(values[0]), vector


def lambda_p(kernel, d_I, rates):
    """lambda_p(d_I) and its unit-norm minimizer."""
    return rayleigh_minimum(kernel, d_I, rates.gamma - rates.beta)


def principal_eigen_exists(kernel, d_I, rates, lp):
    """Existence criterion: lambda_p below min(d_I * row_integral + gamma - beta)."""
    edge = np.min(d_I * kernel.row_integral + rates.gamma - rates.beta)
    return bool(lp < edge - 1e-12)


def _infection_matrix(kernel, d_I, rates):
    """-d_I (K - D) + diag(gamma), i.e. -A."""
    return -assemble_A(kernel, d_I, rates.gamma).entries


def mu_p(kernel, d_I, rates):
    """
    Principal value of the beta-weighted problem by congruence with
    diag(beta)^-1/2; eigenvector positive, normalized to max 1.
    """
    scale = 1.0 / np.sqrt(rates.beta)
    congruent = scale[:, None] * _infection_matrix(kernel, d_I, rates) * scale[None, :]
    values, vectors = linalg.eigh(congruent, subset_by_index=[0, 0])
    phi = scale * vectors[:, 0]
    phi = phi / phi[np.argmax(np.abs(phi))]
    if phi.min() < -1e-8:
        raise NonpositiveEigenvector(f'mu_p eigenvector has min {phi.min():.3e} after normalization.')
    return float(values[0]), phi


def basic_reproduction_number(kernel, d_I, rates):
    return 1.0 / mu_p(kernel, d_I, rates)[0]


def _r0_variational(kernel, d_I, rates):
    # max of beta-energy over the dispersal+gamma energy: top eigenvalue of L^-1 B L^-T
    try:
        lower = linalg.cholesky(_infection_matrix(kernel, d_I, rates), lower=True)
    except linalg.LinAlgError as exc:
        raise SingularOperator(str(exc)) from exc
    half = linalg.solve_triangular(lower, np.diag(np.sqrt(rates.beta)), lower=True)
    gram = half @ half.T
    n = gram.shape[0]
    return float(linalg.eigvalsh(gram, subset_by_index=[n - 1, n - 1])[0])


def _r0_nextgen(kernel, d_I, rates):
    # r(diag(beta) (-A)^-1) via diag(beta)^1/2 (-A)^-1 diag(beta)^1/2
    neg_a = -assemble_A(kernel, d_I, rates.gamma).entries
    root = np.sqrt(rates.beta)
    try:
        factor = linalg.cho_factor(neg_a, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularOperator(str(exc)) from exc
    nextgen = root[:, None] * linalg.cho_solve(factor, np.diag(root))
    nextgen = 0.5 * (nextgen + nextgen.T)
    n = nextgen.shape[0]
    return float(linalg.eigvalsh(nextgen, subset_by_index=[n - 1, n - 1])[0])


def lambda_limits(mesh, rates):
    """(d_I -> 0, d_I -> infinity) limits of lambda_p."""
    potential = rates.gamma - rates.beta
    return float(potential.min()), integrate(mesh, potential) / mesh.length


def r0_limits(mesh, rates):
    """(d_I -> 0, d_I -> infinity) limits of R0."""
    return float(np.max(rates.beta / rates.gamma)), integrate(mesh, rates.beta) / integrate(mesh, rates.gamma)


def r0_all_routes(kernel, d_I, rates):
    mesh = kernel.mesh
    lp, lp_vec = lambda_p(kernel, d_I, rates)
    mu, mu_vec = mu_p(kernel, d_I, rates)
    A = assemble_A(kernel, d_I, rates.gamma)
    bound_M = spectral_bound(A + OperatorMatrix.from_array(np.diag(rates.beta)))
    limit_d0, limit_dinf = lambda_limits(mesh, rates)
    r0_d0, r0_dinf = r0_limits(mesh, rates)
    report = SpectralReport(
        d_I=float(d_I),
        lambda_p=lp,
        lambda_p_eigvec=lp_vec,
        principal_exists=principal_eigen_exists(kernel, d_I, rates, lp),
        mu_p=mu,
        mu_p_eigvec=mu_vec,
        r0_weighted=1.0 / mu,
        r0_variational=_r0_variational(kernel, d_I, rates),
        r0_nextgen=_r0_nextgen(kernel, d_I, rates),
        spectral_bound_M=bound_M,
        limit_d0=limit_d0,
        limit_dinf=limit_dinf,
        r0_limit_d0=r0_d0,
        r0_limit_dinf=r0_dinf,
    )
    logger.debug('d_I=%g lambda_p=%.12g R0=%.12g', d_I, lp, report.r0_weighted)
    return report


def classify_risk(mesh, rates):
    high = int(np.sum(rates.beta > rates.gamma))
    low = int(np.sum(rates.beta < rates.gamma))
    high_domain = bool(integrate(mesh, rates.beta) > integrate(mesh, rates.gamma))
    if high_domain:
        regime = 'high_risk_domain'
    elif high == 0 and low == 0:
        regime = 'neutral'
    elif high == 0 and low < mesh.n:
        regime = 'no_high_risk'
    elif high == 0:
        regime = 'all_low_risk'
    else:
        regime = 'mixed'
    return RiskProfile(high_risk_sites=high, low_risk_sites=low, high_risk_domain=high_domain, regime=regime)


def find_d_star(kernel, rates, d_lo, d_hi):
    """
    Root of lambda_p(d) = 0 by bisection, for a low-risk domain that holds a
    high-risk site. Returns a DiffusivityThreshold whose d_star is None (with
    the reason) when no root is bracketed.
    """
    if not d_lo < d_hi:
        raise InvalidBracket(f'Need d_lo < d_hi, got {d_lo!r} >= {d_hi!r}.')
    risk = classify_risk(kernel.mesh, rates)
    if risk.regime == 'high_risk_domain':
        return DiffusivityThreshold(None, 'high-risk domain: R₀>1 for all d_I')
    if risk.regime == 'all_low_risk':
        return DiffusivityThreshold(None, 'β<γ everywhere: R₀<1 for all d_I')
    if risk.regime == 'no_high_risk':
        return DiffusivityThreshold(None, 'β≤γ with β<γ somewhere: R₀<1 for all d_I')
    if risk.regime == 'neutral':
        return DiffusivityThreshold(None, 'β≡γ: R₀=1 for all d_I')

    def value(d):
        return lambda_p(kernel, d, rates)[0]

    f_lo, f_hi = value(d_lo), value(d_hi)
    if not (f_lo < 0 < f_hi):
        return DiffusivityThreshold(
            None, f'bracket does not straddle zero: lambda_p({d_lo:g})={f_lo:.3e}, lambda_p({d_hi:g})={f_hi:.3e}')

    lo, hi = float(d_lo), float(d_hi)
    mid = 0.5 * (lo + hi)
    for iteration in range(1, BISECTION_MAX_ITER + 1):
        mid = 0.5 * (lo + hi)
        f_mid = value(mid)
        if abs(f_mid) <= 1e-10:
            break
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * d_hi:
            mid = 0.5 * (lo + hi)
            break
    logger.info('d* = %.12g after %d bisection steps', mid, iteration)
    return DiffusivityThreshold(mid, 'root bracketed', iteration)


def lambda_p_monotonicity_scan(kernel, rates, d_list):
    d_list = np.asarray(d_list, dtype=float)
    if d_list.ndim != 1 or d_list.size == 0 or np.any(np.diff(d_list) <= 0) or np.any(d_list <= 0):
        raise InvalidBracket('d_list must be a nonempty, strictly increasing array of positive values.')
    values = np.array([lambda_p(kernel, d, rates)[0] for d in d_list])
    drops = np.diff(values) < -1e-10
    if np.any(drops):
        logger.warning('lambda_p decreased at d=%s', d_list[1:][drops])
    return values
