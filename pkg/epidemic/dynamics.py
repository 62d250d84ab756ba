"""
Time integration of the semi-discrete SIS system with explicit RK4, plus the
long-time diagnostics: distance to the equilibria, the Lyapunov functional for
proportional rates and the dispersal spectral gap alpha.
"""
import enum
import logging
from dataclasses import dataclass, field
from math import ceil, floor
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from . import equilibria, spectral
from .exceptions import (AssumptionViolated, DivisionGuard, LengthMismatch, MassDrift, MassMismatch,
                         NegativeState, StepCollapse, StepTooLarge)
from .mesh import as_field, integrate
from .nonlocal_op import dispersal_matrix

logger = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-12
MAX_STEP_HALVINGS = 20
MAX_SAMPLES = 500
MASS_TOL = 1e-8
CONVERGED_DISTANCE = 1e-3


@dataclass(frozen=True, eq=False)
class State:
    S: np.ndarray = field(repr=False)
    I: np.ndarray = field(repr=False)
    t: float = 0.0


class TrajectorySample(NamedTuple):
    t: float
    mass: float
    dist_dfe: float
    dist_endemic: Optional[float]
    lyapunov: Optional[float]


@dataclass(eq=False)
class Trajectory:
    samples: list
    final_state: State
    snapshots: list = field(default_factory=list, repr=False)
    step_halvings: int = 0

    CSV_COLUMNS = TrajectorySample._fields

    def column(self, name):
        return np.array([np.nan if getattr(s, name) is None else getattr(s, name) for s in self.samples])

    @property
    def times(self):
        return self.column('t')


class Outcome(str, enum.Enum):
    CONVERGED_DFE = 'converged_dfe'
    CONVERGED_ENDEMIC = 'converged_endemic'
    UNDECIDED = 'undecided'


class LongtimeVerdict(NamedTuple):
    outcome: Outcome
    diagnostics: dict


def _vector_field(params, S, I):
    incidence = equilibria.frequency_incidence(params.rates.beta, S, I)
    recovery = params.rates.gamma * I
    dS = params.dispersal_S @ S - incidence + recovery
    dI = params.dispersal_I @ I + incidence - recovery
    return dS, dI


def rhs(params, state):
    """Time derivatives (dS/dt, dI/dt) at ``state``."""
    if np.min(state.S) < -NEGATIVE_TOL or np.min(state.I) < -NEGATIVE_TOL:
        raise NegativeState(f'State at t={state.t:g} has entries below {-NEGATIVE_TOL:g}.')
    return _vector_field(params, state.S, state.I)


def reduced_infection_rhs(params, v, I):
    """dI/dt of the d_S = d_I reduction with total density v = S + I."""
    beta = params.rates.beta
    return params.dispersal_I @ I + (beta - params.rates.gamma) * I - beta * I ** 2 / v


def max_time_step(params):
    """Explicit stability bound for the bounded dispersal operator."""
    rates = params.rates
    spread = max(params.d_S, params.d_I) * float(np.max(params.kernel.row_integral))
    return 0.5 / (spread + float(max(np.max(rates.beta), np.max(rates.gamma))))


def _rk4(params, S, I, dt):
    k1 = _vector_field(params, S, I)
    k2 = _vector_field(params, S + 0.5 * dt * k1[0], I + 0.5 * dt * k1[1])
    k3 = _vector_field(params, S + 0.5 * dt * k2[0], I + 0.5 * dt * k2[1])
    k4 = _vector_field(params, S + dt * k3[0], I + dt * k3[1])
    S_next = S + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    I_next = I + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return S_next, I_next


def _advance(params, S, I, dt, depth=0):
    """One RK4 step; retried as two half steps while the result dips below zero."""
    S_next, I_next = _rk4(params, S, I, dt)
    if min(S_next.min(), I_next.min()) >= -NEGATIVE_TOL:
        return S_next, I_next, depth
    if depth >= MAX_STEP_HALVINGS:
        raise StepCollapse(f'Still negative after {MAX_STEP_HALVINGS} halvings of dt.')
    S_half, I_half, d1 = _advance(params, S, I, 0.5 * dt, depth + 1)
    S_next, I_next, d2 = _advance(params, S_half, I_half, 0.5 * dt, depth + 1)
    return S_next, I_next, max(d1, d2)


def proportional_rates(rates, tol=1e-12):
    """True when beta = r gamma for a constant r."""
    ratio = rates.beta / rates.gamma
    return bool(np.ptp(ratio) <= tol * np.max(ratio))


def sup_distance(S, I, S_ref, I_ref):
    return float(max(np.max(np.abs(S - S_ref)), np.max(np.abs(I - I_ref))))


def lyapunov_V(state, equilibrium, mesh):
    """V = 1/2 integral[(S - S~)^2 / S~ + (I - I~)^2 / I~]."""
    S_eq, I_eq = equilibrium.S_tilde, equilibrium.I_tilde
    if np.min(I_eq) <= 1e-14 or np.min(S_eq) <= 1e-14:
        raise DivisionGuard('Lyapunov functional needs a strictly positive equilibrium.')
    density = (state.S - S_eq) ** 2 / S_eq + (state.I - I_eq) ** 2 / I_eq
    return 0.5 * integrate(mesh, density)


def integrate_to(params, initial, t_end, dt, endemic=None, keep_snapshots=False):
    """
    Integrate from ``initial`` to ``t_end`` with RK4 steps of size ``dt``,
    sampling mass, distances to the equilibria and (for proportional rates)
    the Lyapunov functional.
    """
    mesh = params.mesh
    S = as_field(mesh, initial.S).copy()
    I = as_field(mesh, initial.I).copy()
    dt_max = max_time_step(params)
    if dt > dt_max * (1 + 1e-12):
        raise StepTooLarge(f'dt={dt:g} exceeds the stability bound {dt_max:g}.')
    if not integrate(mesh, I) > 0:
        raise AssumptionViolated('Initial infection must carry positive mass.')
    N = params.N
    mass0 = integrate(mesh, S + I)
    if abs(mass0 - N) > MASS_TOL * N:
        raise MassMismatch(f'Initial mass {mass0:.12g} differs from N={N:.12g}.')

    S_dfe = mesh.constant(N / params.omega)
    I_dfe = np.zeros(mesh.n)
    use_lyapunov = (endemic is not None and endemic.kind == equilibria.EquilibriumKind.ENDEMIC
                    and proportional_rates(params.rates))

    def sample(t):
        state = State(S=S, I=I, t=t)
        mass = integrate(mesh, S + I)
        if abs(mass - N) > MASS_TOL * N:
            raise MassDrift(f'Mass {mass:.15g} at t={t:g} drifted from N={N:.15g}.')
        return TrajectorySample(
            t=t,
            mass=mass,
            dist_dfe=sup_distance(S, I, S_dfe, I_dfe),
            dist_endemic=None if endemic is None else sup_distance(S, I, endemic.S_tilde, endemic.I_tilde),
            lyapunov=lyapunov_V(state, endemic, mesh) if use_lyapunov else None,
        )

    n_steps = max(1, ceil(t_end / dt - 1e-9))
    every = max(1, floor(t_end / dt / MAX_SAMPLES))
    t = float(initial.t)
    t_final = t + t_end
    samples = [sample(t)]
    snapshots = [State(S=S.copy(), I=I.copy(), t=t)] if keep_snapshots else []
    halvings = 0
    for step in range(1, n_steps + 1):
        h = dt if step < n_steps else t_final - t
        S, I, depth = _advance(params, S, I, h)
        if depth:
            halvings += 1
            logger.warning('step %d at t=%g needed %d halvings', step, t, depth)
        t = t_final if step == n_steps else t + h
        if step % every == 0 or step == n_steps:
            samples.append(sample(t))
            if keep_snapshots:
                snapshots.append(State(S=S.copy(), I=I.copy(), t=t))
    logger.debug('integrated to t=%g in %d steps, %d samples', t, n_steps, len(samples))
    return Trajectory(samples=samples, final_state=State(S=S, I=I, t=t), snapshots=snapshots,
                      step_halvings=halvings)


def _settles(distances, threshold=CONVERGED_DISTANCE):
    tail = distances[-max(2, ceil(0.1 * len(distances))):]
    return bool(distances[-1] <= threshold and np.all(np.diff(tail) <= 1e-12))


def classify_trajectory(trajectory, endemic=None):
    """Decide which equilibrium an integrated trajectory settled on."""
    dist_dfe = trajectory.column('dist_dfe')
    diagnostics = {
        'final_dist_dfe': float(dist_dfe[-1]),
        'final_dist_endemic': None,
        'times': trajectory.times.tolist(),
        'dist_dfe': dist_dfe.tolist(),
    }
    outcome = Outcome.UNDECIDED
    if endemic is not None:
        dist_endemic = trajectory.column('dist_endemic')
        diagnostics['final_dist_endemic'] = float(dist_endemic[-1])
        diagnostics['dist_endemic'] = dist_endemic.tolist()
        if _settles(dist_endemic):
            outcome = Outcome.CONVERGED_ENDEMIC
    if outcome == Outcome.UNDECIDED and _settles(dist_dfe):
        outcome = Outcome.CONVERGED_DFE
    return LongtimeVerdict(outcome, diagnostics)


def reference_endemic(params):
    """The endemic equilibrium when R0 > 1, else None."""
    reference = equilibria.steady_state(params)
    return reference if reference.kind == equilibria.EquilibriumKind.ENDEMIC else None


def classify_longtime(params, initial, horizon, dt=None):
    """
    Integrate to ``horizon`` and decide whether the run settled on the
    disease-free or the endemic equilibrium.
    """
    r0 = spectral.basic_reproduction_number(params.kernel, params.d_I, params.rates)
    endemic = reference_endemic(params)
    dt = 0.9 * max_time_step(params) if dt is None else dt
    trajectory = integrate_to(params, initial, horizon, dt, endemic=endemic)
    verdict = classify_trajectory(trajectory, endemic)
    verdict.diagnostics['r0'] = r0
    verdict.diagnostics['alpha'] = alpha_gap(params.kernel, params.d_S)
    logger.info('long-time behaviour: %s (R0=%.6g, alpha=%.6g)', verdict.outcome.value, r0,
                verdict.diagnostics['alpha'])
    return verdict


def alpha_gap(kernel, d_S, mesh=None):
    """Smallest eigenvalue of -d_S (K - D) on mean-zero fields."""
    if mesh is not None and mesh != kernel.mesh:
        raise LengthMismatch('alpha_gap: mesh differs from the kernel mesh.')
    matrix = -d_S * dispersal_matrix(kernel)
    return float(linalg.eigvalsh(matrix, subset_by_index=[1, 1])[0])


def fit_decay_rate(times, values):
    """Exponential decay rate of ``values`` by a least-squares fit of log(values)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    slope, _ = np.polyfit(times[keep], np.log(values[keep]), 1)
    return -float(slope)


def initial_state(mesh, spec, N, seed=None):
    """
    Initial condition from a config spec, scaled to total mass N.

    kinds: ``uniform`` (infected_fraction), ``random`` (seeded, infected_fraction),
    ``bump`` (center, width, infected_fraction).
    """
    kind = spec.get('kind', 'uniform')
    fraction = float(spec.get('infected_fraction', 0.1))
    x = mesh.nodes
    if kind == 'uniform':
        S = mesh.constant(1.0 - fraction)
        I = mesh.constant(fraction)
    elif kind == 'random':
        rng = np.random.default_rng(seed)
        S = rng.uniform(0.5, 1.5, mesh.n) * (1.0 - fraction)
        I = rng.uniform(0.5, 1.5, mesh.n) * fraction
    elif kind == 'bump':
        center = float(spec.get('center', 0.5 * (mesh.a + mesh.b)))
        width = float(spec.get('width', 0.1 * mesh.length))
        S = mesh.constant(1.0 - fraction)
        I = fraction * np.exp(-((x - center) / width) ** 2)
    else:
        raise AssumptionViolated(f'Unknown initial condition kind {kind!r}.')
    scale = N / integrate(mesh, S + I)
    return State(S=scale * S, I=scale * I, t=0.0)
