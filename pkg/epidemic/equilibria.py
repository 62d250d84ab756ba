"""
Steady states of the nonlocal SIS system.

    0 = d_S (K - D) S - beta S I / (S + I) + gamma I
    0 = d_I (K - D) I + beta S I / (S + I) - gamma I,     integral(S + I) = N

The endemic state is obtained through the reduced problem
    1 = d_S S + I,
    0 = d_I (K - D) I + (beta - gamma) I - d_S beta I^2 / (d_S I + d_I (1 - I))
solved by a bracketed monotone iteration started from the super-solution
I = 1 and a small multiple of the principal eigenvector, then rescaled by the
constant k = d_S S~ + d_I I~.
"""
import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import linalg

from . import spectral
from .exceptions import (AssumptionViolated, BracketViolation, NegativeParameter, NoConvergence,
                         NonpositiveDiffusivity, NonpositiveRate, OutOfRange, SubcriticalRegime)
from .mesh import as_field, integrate
from .nonlocal_op import assemble_dispersal, dispersal_matrix

logger = logging.getLogger(__name__)

BRACKET_TOL = 1e-10
MAX_ITERATIONS = 10 ** 6
MAX_HALVINGS = 60
SUBCRITICAL_MARGIN = 1e-9
INNER_MAX = 10 ** 5
INNER_TOL = 1e-9
NEWTON_MAX = 50
NEWTON_TOL = 1e-13
OUTER_MAX = 200


@dataclass(frozen=True, eq=False)
class ModelParams:
    d_S: float
    d_I: float
    N: float
    rates: spectral.RateFields = field(repr=False)
    kernel: object = field(repr=False)
    mesh: object = field(repr=False, default=None)

    def __post_init__(self):
        for name in ('d_S', 'd_I'):
            if not getattr(self, name) > 0:
                raise NonpositiveDiffusivity(f'{name} must be positive, got {getattr(self, name)!r}.')
        if not self.N > 0:
            raise NegativeParameter(f'Total population N must be positive, got {self.N!r}.')
        if self.mesh is None:
            object.__setattr__(self, 'mesh', self.kernel.mesh)

    @property
    def omega(self):
        return self.mesh.length

    @cached_property
    def dispersal_S(self):
        return assemble_dispersal(self.kernel, self.d_S)

    @cached_property
    def dispersal_I(self):
        return assemble_dispersal(self.kernel, self.d_I)

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in ('d_S', 'd_I', 'N', 'rates', 'kernel', 'mesh')}
        values.update(changes)
        return ModelParams(**values)


class EquilibriumKind(str, enum.Enum):
    DISEASE_FREE = 'disease_free'
    ENDEMIC = 'endemic'


@dataclass(eq=False)
class EquilibriumResult:
    S_tilde: np.ndarray = field(repr=False)
    I_tilde: np.ndarray = field(repr=False)
    k: float
    kind: EquilibriumKind
    iterations: int
    residual: float


class BracketSolution(NamedTuple):
    """Converged monotone bracket; ``values`` is the midpoint field."""
    values: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    iterations: int
    gap: float


class LimitPair(NamedTuple):
    S: object
    I: object


def frequency_incidence(beta, S, I):
    """beta S I / (S + I), taken as 0 where S + I vanishes."""
    total = S + I
    quotient = np.divide(S * I, total, out=np.zeros_like(total, dtype=float), where=total > 1e-300)
    return beta * quotient


def steady_state_residual(params, S, I):
    """Sup-norm residual of both stationary equations."""
    incidence = frequency_incidence(params.rates.beta, S, I)
    recovery = params.rates.gamma * I
    eq_S = params.dispersal_S @ S - incidence + recovery
    eq_I = params.dispersal_I @ I + incidence - recovery
    return float(max(np.max(np.abs(eq_S)), np.max(np.abs(eq_I))))


def disease_free(params):
    S_hat = params.N / params.omega
    S = params.mesh.constant(S_hat)
    I = np.zeros(params.mesh.n)
    return EquilibriumResult(
        S_tilde=S, I_tilde=I, k=params.d_S * S_hat, kind=EquilibriumKind.DISEASE_FREE,
        iterations=0, residual=steady_state_residual(params, S, I))


def _monotone_iteration(residual, upper, lower, tau, label, tol=BRACKET_TOL, max_iter=MAX_ITERATIONS):
    """
    Iterate u <- u + tau * residual(u) from a super-solution and a sub-solution
    until the two iterates are within ``tol``. The upper iterate must not
    increase, the lower must not decrease and they must stay ordered.
    """
    slack = 1e-12 * max(1.0, float(np.max(np.abs(upper))))
    gap = float(np.max(upper - lower))
    for iteration in range(1, max_iter + 1):
        new_upper = upper + tau * residual(upper)
        new_lower = lower + tau * residual(lower)
        if np.any(new_upper > upper + slack):
            raise BracketViolation(f'{label}: upper iterate increased at step {iteration}.')
        if np.any(new_lower < lower - slack):
            raise BracketViolation(f'{label}: lower iterate decreased at step {iteration}.')
        if np.any(new_upper < new_lower - slack):
            raise BracketViolation(f'{label}: iterates crossed at step {iteration}.')
        upper, lower = new_upper, new_lower
        gap = float(np.max(upper - lower))
        if gap <= tol:
            logger.debug('%s: bracket closed to %.3e after %d steps', label, gap, iteration)
            return BracketSolution(0.5 * (upper + lower), upper, lower, iteration, gap)
    raise NoConvergence(f'{label}: bracket gap {gap:.3e} after {max_iter} steps.')


def _solve_bracketed(residual, upper, lower, tau, label, max_iter=MAX_ITERATIONS):
    try:
        return _monotone_iteration(residual, upper, lower, tau, label, max_iter=max_iter)
    except NoConvergence:
        logger.warning('%s: no convergence with tau=%.3e, retrying with tau/2', label, tau)
        return _monotone_iteration(residual, upper, lower, 0.5 * tau, label, max_iter=max_iter)


def _sub_solution(residual, phi, delta, scale, label):
    """Halve delta until residual(delta * phi) >= 0 at every node."""
    phi = np.maximum(phi / np.max(phi), 0.0)
    for _ in range(MAX_HALVINGS):
        candidate = delta * phi
        if np.all(residual(candidate) >= -1e-12 * delta * scale):
            return candidate
        delta *= 0.5
    raise NoConvergence(f'{label}: no sub-solution after {MAX_HALVINGS} halvings.')


def _require_supercritical(kernel, d_I, rates):
    r0 = spectral.basic_reproduction_number(kernel, d_I, rates)
    if r0 <= 1 + SUBCRITICAL_MARGIN:
        raise SubcriticalRegime(f'R0 = {r0:.12g} <= 1: only the disease-free state exists.')
    return r0


def reduced_residual(params, I):
    beta, gamma = params.rates.beta, params.rates.gamma
    d_S, d_I = params.d_S, params.d_I
    saturation = d_S * beta * I ** 2 / (d_S * I + d_I * (1.0 - I))
    return params.dispersal_I @ I + (beta - gamma) * I - saturation


def _reduced_step(params):
    # d_S beta d/dI[I^2 / (d_S I + d_I (1 - I))] peaks at I = 1 with value beta (1 + d_I / d_S)
    rates = params.rates
    lipschitz = (params.d_I * params.kernel.row_integral + rates.gamma
                 + rates.beta * (1.0 + params.d_I / params.d_S))
    return 1.0 / np.max(lipschitz)


def solve_reduced_I(params):
    """Unique solution 0 < I < 1 of the reduced infection equation."""
    _require_supercritical(params.kernel, params.d_I, params.rates)
    _, phi = spectral.lambda_p(params.kernel, params.d_I, params.rates)

    def residual(I):
        return reduced_residual(params, I)

    scale = 1.0 + params.d_I * float(np.max(params.kernel.row_integral))
    lower = _sub_solution(residual, phi, 0.5, scale, 'reduced I')
    upper = np.ones(params.mesh.n)
    return _solve_bracketed(residual, upper, lower, _reduced_step(params), 'reduced I')


def recover_equilibrium(params, I_reduced, iterations=0):
    """Map the reduced solution back to (S~, I~) with total mass N."""
    I = as_field(params.mesh, I_reduced)
    if np.any(I <= 0) or np.any(I >= 1):
        raise OutOfRange(f'Reduced field spans [{I.min():.3e}, {I.max():.3e}], expected (0, 1).')
    S = (1.0 - I) / params.d_S
    k = params.d_I * params.N / integrate(params.mesh, params.d_I * S + I)
    S_tilde = k * S
    I_tilde = (k / params.d_I) * I
    return EquilibriumResult(
        S_tilde=S_tilde, I_tilde=I_tilde, k=k, kind=EquilibriumKind.ENDEMIC,
        iterations=iterations, residual=steady_state_residual(params, S_tilde, I_tilde))


def endemic(params):
    solution = solve_reduced_I(params)
    result = recover_equilibrium(params, solution.values, iterations=solution.iterations)
    logger.info('endemic equilibrium: k=%.12g, %d steps, residual %.3e',
                result.k, result.iterations, result.residual)
    return result


def steady_state(params):
    """Endemic equilibrium when R0 > 1, otherwise the disease-free one."""
    try:
        return endemic(params)
    except SubcriticalRegime:
        return disease_free(params)


def uniqueness_probe(params, I_reduced, scale=0.1, tol=1e-12, max_iter=MAX_ITERATIONS):
    """
    Restart the reduced map from I * (1 +- scale) and return the largest
    sup-norm distance between the re-converged fields and I.
    """
    tau = _reduced_step(params)
    distance = 0.0
    for factor in (1.0 + scale, 1.0 - scale):
        current = np.clip(I_reduced * factor, 1e-300, 1.0)
        for _ in range(max_iter):
            step = tau * reduced_residual(params, current)
            current = current + step
            if np.max(np.abs(step)) <= tol:
                break
        else:
            raise NoConvergence(f'uniqueness probe from factor {factor} did not settle.')
        distance = max(distance, float(np.max(np.abs(current - I_reduced))))
    return distance


def logistic_steady(kernel, d, r, c):
    """Unique positive steady state of d (K - D) u + (r - c u) u = 0."""
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise NonpositiveRate('Logistic saturation c must be positive at every node.')
    lp, phi = spectral.rayleigh_minimum(kernel, d, -r)
    if lp >= -SUBCRITICAL_MARGIN:
        raise SubcriticalRegime(f'lambda_p = {lp:.3e} >= 0: the zero state is the only steady state.')
    ceiling = float(np.max(r / c))
    dispersal = assemble_dispersal(kernel, d)

    def residual(u):
        return dispersal @ u + (r - c * u) * u

    tau = 1.0 / np.max(d * kernel.row_integral + np.abs(r) + 2 * c * ceiling)
    scale = ceiling * (1.0 + d * float(np.max(kernel.row_integral)))
    lower = _sub_solution(residual, phi, 0.5 * ceiling, scale, 'logistic')
    upper = np.full(kernel.mesh.n, ceiling)
    return _solve_bracketed(residual, upper, lower, tau, 'logistic')


def logistic_envelopes(params, eps):
    """
    For d_S = d_I: steady states of the comparison problems with saturation
    beta / (N/|Omega| -+ eps). Returns (lower, upper) fields.
    """
    if params.d_S != params.d_I:
        raise AssumptionViolated('Comparison envelopes need d_S = d_I.')
    density = params.N / params.omega
    if not 0 < eps < density:
        raise OutOfRange(f'eps must lie in (0, N/|Omega| = {density:g}).')
    r = params.rates.beta - params.rates.gamma
    lower = logistic_steady(params.kernel, params.d_I, r, params.rates.beta / (density - eps))
    upper = logistic_steady(params.kernel, params.d_I, r, params.rates.beta / (density + eps))
    return lower.values, upper.values


def theta_star(kernel, d_I, rates):
    """Positive solution of d_I (K - D) theta + (beta - gamma) theta - beta theta^2 / (d_I + theta) = 0."""
    _require_supercritical(kernel, d_I, rates)
    beta, gamma = rates.beta, rates.gamma
    ceiling = d_I * float(np.max((beta - gamma) / gamma))
    dispersal = assemble_dispersal(kernel, d_I)

    def residual(theta):
        return dispersal @ theta + (beta - gamma) * theta - beta * theta ** 2 / (d_I + theta)

    _, phi = spectral.lambda_p(kernel, d_I, rates)
    tau = 1.0 / np.max(d_I * kernel.row_integral + gamma + beta)
    scale = ceiling * (1.0 + d_I * float(np.max(kernel.row_integral)))
    lower = _sub_solution(residual, phi, 0.5 * ceiling, scale, 'theta*')
    upper = np.full(kernel.mesh.n, ceiling)
    return _solve_bracketed(residual, upper, lower, tau, 'theta*')


def _require_high_risk_domain(mesh, rates):
    if not integrate(mesh, rates.beta) > integrate(mesh, rates.gamma):
        raise AssumptionViolated('Large-diffusion limits need integral(beta) > integral(gamma).')


def limit_profile_both_infinity(rates, N, mesh):
    """Constant (S, I) limit as d_S, d_I -> infinity."""
    _require_high_risk_domain(mesh, rates)
    ratio = integrate(mesh, rates.gamma) / integrate(mesh, rates.beta)
    density = N / mesh.length
    return LimitPair(density * ratio, density * (1.0 - ratio))


def limit_profile_ds_infinity(kernel, d_I, rates, N):
    """(S, I) limit as d_S -> infinity, built from theta*."""
    mesh = kernel.mesh
    _require_high_risk_domain(mesh, rates)
    theta = theta_star(kernel, d_I, rates).values
    denominator = integrate(mesh, d_I + theta)
    return LimitPair(mesh.constant(d_I * N / denominator), N * theta / denominator)


def di_limit_residual(kernel, d_S, rates, S, I_star):
    """Sup-norm residual of the d_I -> infinity limit system (S*(x), I*)."""
    dispersal = assemble_dispersal(kernel, d_S)
    incidence = frequency_incidence(rates.beta, S, np.full_like(S, I_star))
    return float(np.max(np.abs(dispersal @ S + rates.gamma * I_star - incidence)))


def _limit_susceptible(kernel, d_S, rates, I_star, start):
    # a S^2 + G S - H = 0 solved nodewise for the positive root
    a = d_S * kernel.row_integral
    beta, gamma = rates.beta, rates.gamma
    S = start
    for iteration in range(1, INNER_MAX + 1):
        h = d_S * (kernel.matrix @ S)
        G = (a - gamma + beta) * I_star - h
        H = gamma * I_star ** 2 + h * I_star
        root = np.sqrt(G ** 2 + 4 * a * H)
        new_S = np.where(G > 0, 2 * H / (G + root), (root - G) / (2 * a))
        change = float(np.max(np.abs(new_S - S)))
        S = new_S
        if change <= INNER_TOL:
            return _newton_susceptible(kernel, d_S, rates, I_star, S), iteration
    raise NoConvergence(f'd_I -> infinity inner iteration: change {change:.3e} after {INNER_MAX} steps.')


def _newton_susceptible(kernel, d_S, rates, I_star, S):
    """Newton steps on the full limit system, started from the fixed point S."""
    dispersal = d_S * dispersal_matrix(kernel)
    tol = NEWTON_TOL * (1.0 + d_S) * max(float(np.max(S)), I_star)
    for _ in range(NEWTON_MAX):
        total = S + I_star
        residual = dispersal @ S + rates.gamma * I_star - rates.beta * S * I_star / total
        if np.max(np.abs(residual)) <= tol:
            return S
        # minus the Jacobian, symmetric positive definite
        jacobian = np.diag(rates.beta * I_star ** 2 / total ** 2) - dispersal
        S = S + linalg.solve(jacobian, residual, assume_a='pos')
    raise NoConvergence(f'd_I -> infinity Newton finish: residual {np.max(np.abs(residual)):.3e} '
                        f'after {NEWTON_MAX} steps.')


def limit_profile_di_infinity(kernel, d_S, rates, N):
    """
    (S*(x), I*) limit as d_I -> infinity: bisection on the constant I* for
    the mass constraint, nodewise quadratic fixed point for S* finished by
    Newton steps on the limit system.
    """
    mesh = kernel.mesh
    _require_high_risk_domain(mesh, rates)
    if not d_S > 0:
        raise NonpositiveDiffusivity(f'd_S must be positive, got {d_S!r}.')
    density = N / mesh.length

    def mass_defect(I_star, start):
        S, _ = _limit_susceptible(kernel, d_S, rates, I_star, start)
        return integrate(mesh, S) + I_star * mesh.length - N, S

    lo, hi = 0.0, density
    f_lo = -N
    f_hi, S_hi = mass_defect(hi, mesh.constant(0.5 * density))
    S, I_star = S_hi, hi
    # the limit system is 1-homogeneous in (S, I*), so rescaling is an exact warm start
    for iteration in range(1, OUTER_MAX + 1):
        I_star = 0.5 * (lo + hi)
        f_mid, S = mass_defect(I_star, S_hi * (I_star / hi))
        if not f_lo - 1e-12 * N <= f_mid <= f_hi + 1e-12 * N:
            raise NoConvergence(f'total mass is not monotone in I* near I*={I_star:.6g}.')
        if abs(f_mid) <= 1e-8 * N:
            logger.info('d_I -> infinity limit: I*=%.12g after %d bisection steps', I_star, iteration)
            return LimitPair(S, I_star)
        if f_mid < 0:
            lo, f_lo = I_star, f_mid
        else:
            hi, f_hi, S_hi = I_star, f_mid, S
    raise NoConvergence(f'd_I -> infinity outer bisection: defect {f_mid:.3e} after {OUTER_MAX} steps.')
