"""
Acceptance battery: every threshold, stability and large-diffusion claim of
the model checked numerically at desk scale.

Each check is a plain function of a SuiteContext returning a CheckOutcome;
``theorem_suite`` runs them in order, records failures (including raised
errors) instead of stopping, and writes ``suite.csv``.
"""
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from math import log, pi
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd

from . import dynamics, equilibria, spectral
from .mesh import build_kernel, build_mesh, integrate
from .runner import OutputWriter, RunRecord, relative_gap
from .serializers import RunRecordSerializer, SuiteRowSerializer

logger = logging.getLogger(__name__)

DOMAIN = (-1.0, 1.0)
DELTA = 0.5
HORIZON = 200.0


class CheckOutcome(NamedTuple):
    passed: bool
    value: Optional[float]
    threshold: Optional[float]
    detail: str = ''


class CheckRow(NamedTuple):
    check: str
    passed: bool
    value: Optional[float]
    threshold: Optional[float]
    detail: str
    seconds: float


@dataclass
class SuiteContext:
    n: int = 400
    trials: int = 100
    seed: int = 0
    mass_drift: list = field(default_factory=list)

    @cached_property
    def kernel(self):
        return kernel_on(self.n)

    @property
    def mesh(self):
        return self.kernel.mesh

    def params(self, beta, gamma, d_S=1.0, d_I=1.0, N=2.0, kernel=None):
        kernel = self.kernel if kernel is None else kernel
        rates = spectral.RateFields.on_mesh(kernel.mesh, beta, gamma)
        return equilibria.ModelParams(d_S=d_S, d_I=d_I, N=N, rates=rates, kernel=kernel)

    @cached_property
    def random_reports(self):
        """Constant anchors (R0 = 2 and R0 = 1/2) followed by seeded random trials."""
        rng = np.random.default_rng(self.seed)
        cases = [(2.0, 1.0, 1.0), (1.0, 2.0, 1.0)]
        for _ in range(self.trials):
            beta = np.exp(rng.uniform(log(0.5), log(2.0), self.n))
            gamma = np.exp(rng.uniform(log(0.5), log(2.0), self.n))
            cases.append((beta, gamma, float(rng.uniform(0.01, 10.0))))
        reports = []
        for beta, gamma, d_I in cases:
            rates = spectral.RateFields.on_mesh(self.mesh, beta, gamma)
            reports.append(spectral.r0_all_routes(self.kernel, d_I, rates))
        return reports

    def record_mass(self, trajectory, N):
        self.mass_drift.append(float(np.max(np.abs(trajectory.column('mass') - N))) / N)


def kernel_on(n, a=DOMAIN[0], b=DOMAIN[1]):
    return build_kernel(build_mesh(a, b, n), {'family': 'triangle', 'delta': DELTA})


def cosine_profile(mesh, base=1.0, amplitude=0.8):
    return base + amplitude * np.cos(pi * mesh.nodes)


def _random_initials(context, params, count=3):
    return [dynamics.initial_state(params.mesh, {'kind': 'random'}, params.N, seed=context.seed + index)
            for index in range(count)]


def _run(context, params, initial, endemic=None, keep_snapshots=False):
    dt = 0.9 * dynamics.max_time_step(params)
    trajectory = dynamics.integrate_to(params, initial, HORIZON, dt, endemic=endemic, keep_snapshots=keep_snapshots)
    context.record_mass(trajectory, params.N)
    return trajectory


def check_constant_r0(context):
    params = context.params(2.0, 1.0)
    report = spectral.r0_all_routes(params.kernel, 1.0, params.rates)
    r0_error = max(abs(r0 - 2.0) for r0 in (report.r0_weighted, report.r0_variational, report.r0_nextgen))
    lp_error = abs(report.lambda_p + 1.0)
    return CheckOutcome(r0_error <= 1e-9 and lp_error <= 1e-10, r0_error, 1e-9,
                        f'lambda_p error {lp_error:.3e}')


def check_sign_relation(context):
    violations = [report.d_I for report in context.random_reports
                  if abs(report.lambda_p) > spectral.SIGN_TOL
                  and np.sign(report.lambda_p) != np.sign(1.0 - report.r0_weighted)]
    return CheckOutcome(not violations, float(len(violations)), 0.0,
                        f'{len(context.random_reports)} trials')


def check_route_agreement(context):
    worst = 0.0
    for report in context.random_reports:
        r0 = report.r0_weighted
        worst = max(worst, abs(r0 - report.r0_variational) / r0, abs(r0 - report.r0_nextgen) / r0)
    return CheckOutcome(worst <= spectral.ROUTE_TOL, worst, spectral.ROUTE_TOL,
                        f'{len(context.random_reports)} trials')


def check_lambda_limits(context):
    params = context.params(cosine_profile(context.mesh), 1.0)
    kernel, rates = params.kernel, params.rates
    low, high = spectral.lambda_limits(params.mesh, rates)
    small_gap = abs(spectral.lambda_p(kernel, 1e-4, rates)[0] - low)
    large_gap = abs(spectral.lambda_p(kernel, 1e5, rates)[0] - high)
    scan = spectral.lambda_p_monotonicity_scan(kernel, rates, np.logspace(-3, 3, 25))
    monotone = bool(np.all(np.diff(scan) > -1e-10))
    passed = small_gap <= 5e-3 and large_gap <= 1e-4 and monotone
    return CheckOutcome(passed, large_gap, 1e-4,
                        f'd->0 gap {small_gap:.3e}, d->inf gap {large_gap:.3e}, monotone={monotone}')


def check_d_star(context):
    mesh = context.mesh
    beta = 1.0 + 1.5 * np.exp(-20.0 * mesh.nodes ** 2)
    rates = spectral.RateFields.on_mesh(mesh, beta, 1.4)
    threshold = spectral.find_d_star(context.kernel, rates, 1e-3, 1e3)
    if threshold.d_star is None:
        return CheckOutcome(False, None, None, threshold.reason)
    below = spectral.lambda_p(context.kernel, 0.5 * threshold.d_star, rates)[0]
    above = spectral.lambda_p(context.kernel, 2.0 * threshold.d_star, rates)[0]
    return CheckOutcome(below < -1e-6 and above > 1e-6, threshold.d_star, None,
                        f'lambda_p(d*/2)={below:.3e}, lambda_p(2d*)={above:.3e}')


def check_dfe_convergence(context):
    params = context.params(1.0, 2.0)
    lp = spectral.lambda_p(params.kernel, params.d_I, params.rates)[0]
    worst_distance, slowest = 0.0, np.inf
    for initial in _random_initials(context, params):
        trajectory = _run(context, params, initial, keep_snapshots=True)
        worst_distance = max(worst_distance, trajectory.column('dist_dfe')[-1])
        times = np.array([state.t for state in trajectory.snapshots])
        sup_I = np.array([state.I.max() for state in trajectory.snapshots])
        tail = slice(len(times) // 2, None)
        slowest = min(slowest, dynamics.fit_decay_rate(times[tail], sup_I[tail]))
    passed = worst_distance <= 1e-4 and slowest >= 0.9 * lp / 2
    return CheckOutcome(passed, worst_distance, 1e-4, f'fitted I decay {slowest:.4g} vs lambda_p/2 = {lp / 2:.4g}')


def check_endemic_equilibrium(context):
    params = context.params(cosine_profile(context.mesh), 1.0, d_S=0.5, d_I=0.1)
    bracket = equilibria.solve_reduced_I(params)
    result = equilibria.recover_equilibrium(params, bracket.values, iterations=bracket.iterations)
    k_spread = float(np.max(np.abs(params.d_S * result.S_tilde + params.d_I * result.I_tilde - result.k)))
    probe = equilibria.uniqueness_probe(params, bracket.values)
    passed = (bracket.gap <= equilibria.BRACKET_TOL and result.residual <= 1e-8
              and k_spread <= 1e-8 * result.k and probe <= 1e-8)
    return CheckOutcome(passed, result.residual, 1e-8,
                        f'gap {bracket.gap:.2e}, k spread {k_spread:.2e}, probe {probe:.2e}')


def check_global_convergence(context):
    params = context.params(2.0, 1.0)
    endemic = equilibria.endemic(params)
    explicit = dynamics.sup_distance(endemic.S_tilde, endemic.I_tilde, 0.5, 0.5)
    initial = _random_initials(context, params, count=1)[0]
    trajectory = _run(context, params, initial, endemic=endemic)
    final = trajectory.final_state
    distance = dynamics.sup_distance(final.S, final.I, 0.5, 0.5)
    return CheckOutcome(distance <= 1e-4 and explicit <= 1e-8, distance, 1e-4,
                        f'equilibrium vs explicit formula {explicit:.2e}')


def check_lyapunov_decrease(context):
    gamma = cosine_profile(context.mesh, amplitude=0.5)
    params = context.params(2.0 * gamma, gamma, d_S=1.0, d_I=0.5)
    endemic = equilibria.endemic(params)
    worst_rise = -np.inf
    for initial in _random_initials(context, params):
        trajectory = _run(context, params, initial, endemic=endemic)
        worst_rise = max(worst_rise, float(np.max(np.diff(trajectory.column('lyapunov')))))
    return CheckOutcome(worst_rise <= 1e-10, worst_rise, 1e-10, 'largest sample-to-sample change of V')


def check_comparison_principle(context):
    params = context.params(cosine_profile(context.mesh), 0.8)
    endemic = equilibria.endemic(params)
    lower, upper = equilibria.logistic_envelopes(params, 0.1)
    enveloped = bool(np.all(lower < endemic.I_tilde) and np.all(endemic.I_tilde < upper))

    # same S + I, infected fields ordered pointwise
    low = _random_initials(context, params, count=1)[0]
    shift = 0.5 * low.S
    high = dynamics.State(S=low.S - shift, I=low.I + shift)
    runs = [_run(context, params, state, keep_snapshots=True) for state in (low, high)]
    order_gap = min(float(np.min(upper_state.I - lower_state.I))
                    for lower_state, upper_state in zip(runs[0].snapshots, runs[1].snapshots))
    reduction_gap = max(
        float(np.max(np.abs(dynamics.reduced_infection_rhs(params, state.S + state.I, state.I)
                            - dynamics.rhs(params, state)[1])))
        for state in runs[0].snapshots)
    passed = enveloped and order_gap >= -1e-10 and reduction_gap <= 1e-10
    return CheckOutcome(passed, order_gap, -1e-10,
                        f'envelopes hold={enveloped}, reduced dI/dt gap {reduction_gap:.2e}')


def check_mass_conservation(context):
    if not context.mass_drift:
        return CheckOutcome(False, None, 1e-10, 'no trajectories were integrated')
    worst = max(context.mass_drift)
    return CheckOutcome(worst <= 1e-10, worst, 1e-10, f'{len(context.mass_drift)} trajectories')


def check_limit_both_infinity(context):
    errors = []
    for (a, b), beta, N, expected in (((-1.0, 1.0), 2.0, 2.0, (0.5, 0.5)), ((0.0, 1.0), 3.0, 3.0, (1.0, 2.0))):
        mesh = build_mesh(a, b, context.n)
        rates = spectral.RateFields.on_mesh(mesh, beta, 1.0)
        S, I = equilibria.limit_profile_both_infinity(rates, N, mesh)
        errors.append(max(abs(S - expected[0]), abs(I - expected[1])))
    worst = max(errors)
    return CheckOutcome(worst <= 1e-12, worst, 1e-12, 'constant-rate formula cases')


def check_limit_ds_infinity(context):
    params = context.params(cosine_profile(context.mesh, base=1.5), 1.0, d_S=1e3, d_I=1.0)
    S, I = equilibria.limit_profile_ds_infinity(params.kernel, params.d_I, params.rates, params.N)
    result = equilibria.endemic(params)
    gap = relative_gap(result.S_tilde, result.I_tilde, S, I)
    return CheckOutcome(gap <= 2e-2, gap, 2e-2, 'endemic state at d_S = 1e3')


def check_limit_di_infinity(context):
    params = context.params(cosine_profile(context.mesh, base=1.5), 1.0, d_S=1.0, d_I=1e3)
    S, I_star = equilibria.limit_profile_di_infinity(params.kernel, params.d_S, params.rates, params.N)
    residual = equilibria.di_limit_residual(params.kernel, params.d_S, params.rates, S, I_star)
    mass_error = abs(integrate(params.mesh, S) + I_star * params.omega - params.N)
    result = equilibria.endemic(params)
    gap = relative_gap(result.S_tilde, result.I_tilde, S, I_star)
    passed = gap <= 2e-2 and residual <= 1e-8 and mass_error <= 1e-8 * params.N
    return CheckOutcome(passed, gap, 2e-2, f'limit residual {residual:.2e}, I*={I_star:.6g}')


def check_mesh_refinement(context):
    values = {}
    for n in (200, 800):
        kernel = kernel_on(n)
        rates = spectral.RateFields.on_mesh(kernel.mesh, cosine_profile(kernel.mesh), 1.0)
        values[n] = (spectral.lambda_p(kernel, 0.1, rates)[0], spectral.basic_reproduction_number(kernel, 0.1, rates))
    lp_change = abs(values[800][0] - values[200][0]) / abs(values[800][0])
    r0_change = abs(values[800][1] - values[200][1]) / values[800][1]
    worst = max(lp_change, r0_change)
    return CheckOutcome(worst <= 1e-3, worst, 1e-3, f'lambda_p {lp_change:.2e}, R0 {r0_change:.2e}')


CHECKS = {
    'constant_r0': check_constant_r0,
    'sign_relation': check_sign_relation,
    'route_agreement': check_route_agreement,
    'lambda_limits': check_lambda_limits,
    'd_star': check_d_star,
    'dfe_convergence': check_dfe_convergence,
    'endemic_equilibrium': check_endemic_equilibrium,
    'global_convergence': check_global_convergence,
    'lyapunov_decrease': check_lyapunov_decrease,
    'comparison_principle': check_comparison_principle,
    'mass_conservation': check_mass_conservation,
    'limit_both_infinity': check_limit_both_infinity,
    'limit_ds_infinity': check_limit_ds_infinity,
    'limit_di_infinity': check_limit_di_infinity,
    'mesh_refinement': check_mesh_refinement,
}


def run_check(name, context):
    started = time.perf_counter()
    try:
        outcome = CHECKS[name](context)
    except Exception as exc:
        logger.exception('check %s raised', name)
        outcome = CheckOutcome(False, None, None, f'{type(exc).__name__}: {exc}')
    seconds = time.perf_counter() - started
    value = None if outcome.value is None else float(outcome.value)
    threshold = None if outcome.threshold is None else float(outcome.threshold)
    row = CheckRow(name, bool(outcome.passed), value, threshold, outcome.detail, seconds)
    logger.info('%-22s %s (%.2fs) %s', name, 'PASS' if row.passed else 'FAIL', seconds, row.detail)
    return row


def theorem_suite(out_dir, n=400, trials=100, seed=0, only=None):
    """Run the acceptance battery and write suite.csv / record.json under ``out_dir``."""
    started = time.perf_counter()
    names = list(CHECKS) if not only else [name for name in CHECKS if name in set(only)]
    unknown = set(only or ()) - set(CHECKS)
    context = SuiteContext(n=n, trials=trials, seed=seed)
    rows = [run_check(name, context) for name in names]

    writer = OutputWriter(out_dir)
    frame = pd.DataFrame(SuiteRowSerializer(rows, many=True).data, columns=CheckRow._fields)
    writer.csv('suite.csv', frame)
    record = RunRecord(
        task='suite',
        config=None,
        outputs=list(writer.paths) + [str(Path(out_dir) / 'record.json')],
        wall_time=time.perf_counter() - started,
        checks={row.check: row.passed for row in rows},
        errors=[f'unknown check {name!r}' for name in sorted(unknown)],
    )
    writer.json('record.json', RunRecordSerializer(record).data)
    logger.info('suite: %d/%d checks passed in %.1fs', sum(row.passed for row in rows), len(rows), record.wall_time)
    return record
