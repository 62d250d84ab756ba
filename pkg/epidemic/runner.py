"""
Scenario orchestration: load a config, dispatch the task pipeline, write the
CSV / JSON outputs and return a RunRecord.
"""
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.serializers.json import DjangoJSONEncoder

from . import dynamics, equilibria, spectral
from .config import LimitsSpec, ScenarioConfig
from .exceptions import SolverError, SubcriticalRegime, TaskFailed
from .mesh import build_kernel, build_mesh, integrate
from .serializers import (EquilibriumHeaderSerializer, RunRecordSerializer, ScenarioSerializer,
                          SpectralReportSerializer)

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
MASS_TOL = 1e-10
LIMIT_GAP_TOL = 2e-2


@dataclass(eq=False)
class RunRecord:
    task: str
    config: Optional[ScenarioConfig]
    outputs: list = field(default_factory=list)
    wall_time: float = 0.0
    checks: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors and all(self.checks.values())


class OutputWriter:
    """Writes run artifacts under one directory and remembers their paths."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.paths = []

    def csv(self, name, frame):
        path = self.out_dir / name
        frame.to_csv(path, index=False, float_format=settings.SIS_CSV_FLOAT_FORMAT)
        self.paths.append(str(path))
        return path

    def json(self, name, payload):
        path = self.out_dir / name
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(payload, fh, cls=DjangoJSONEncoder, indent=2)
            fh.write('\n')
        self.paths.append(str(path))
        return path


def load_config(path):
    """Parse and validate a scenario file; raises ValidationError with field-level messages."""
    with open(path, encoding='utf-8') as fh:
        payload = json.load(fh)
    serializer = ScenarioSerializer(data=payload)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def emit_config(config):
    return dict(ScenarioSerializer(config).data)


def build_model(config):
    mesh = build_mesh(config.mesh.a, config.mesh.b, config.mesh.n)
    kernel = build_kernel(mesh, config.kernel)
    rates = spectral.RateFields(beta=config.beta.evaluate(mesh), gamma=config.gamma.evaluate(mesh))
    return equilibria.ModelParams(d_S=config.d_S, d_I=config.d_I, N=config.N, rates=rates, kernel=kernel)


def resolve_workers(config):
    """SIS_WORKERS from the environment wins over the scenario's ``workers``."""
    return getattr(settings, 'SIS_WORKERS', None) or config.workers


def _node_frame(mesh, **columns):
    return pd.DataFrame({'node': np.arange(mesh.n), 'x': mesh.nodes, **columns})


def relative_gap(S, I, S_ref, I_ref):
    """Relative sup-norm distance between two (S, I) profiles."""
    S_ref, I_ref = np.broadcast_to(S_ref, np.shape(S)), np.broadcast_to(I_ref, np.shape(I))
    scale = max(np.max(np.abs(S_ref)), np.max(np.abs(I_ref)))
    return dynamics.sup_distance(S, I, S_ref, I_ref) / scale


def equilibrium_checks(params, result, bracket_gap=None):
    """Mass, the k identity, bounds and residual of a computed steady state."""
    N, k = params.N, result.k
    checks = {
        'mass': abs(integrate(params.mesh, result.S_tilde + result.I_tilde) - N) <= 1e-8 * N,
        'residual': result.residual <= RESIDUAL_TOL * max(np.max(params.rates.beta), np.max(params.rates.gamma)),
    }
    if result.kind == equilibria.EquilibriumKind.ENDEMIC:
        combined = params.d_S * result.S_tilde + params.d_I * result.I_tilde
        checks['k_constant'] = bool(np.max(np.abs(combined - k)) <= 1e-8 * k)
        checks['bounds'] = bool(np.all(result.I_tilde > 0) and np.all(result.I_tilde < k / params.d_I)
                                and np.all(result.S_tilde > 0) and np.all(result.S_tilde < k / params.d_S))
        lp, _ = spectral.lambda_p(params.kernel, params.d_I, params.rates)
        checks['lambda_p_negative'] = lp < 0
    if bracket_gap is not None:
        checks['bracket_gap'] = bracket_gap <= equilibria.BRACKET_TOL
    return {name: bool(value) for name, value in checks.items()}


def run_spectrum(config, params, writer):
    report = spectral.r0_all_routes(params.kernel, params.d_I, params.rates)
    risk = spectral.classify_risk(params.mesh, params.rates)
    writer.csv('spectrum.csv', pd.DataFrame([report.as_row()], columns=report.CSV_COLUMNS))
    writer.csv('spectrum_eigvec.csv', _node_frame(
        params.mesh, lambda_p_eigvec=report.lambda_p_eigvec, mu_p_eigvec=report.mu_p_eigvec))
    writer.json('spectrum.json', {**SpectralReportSerializer(report).data, 'risk': risk._asdict()})
    if not config.checks:
        return {}
    checks = report.check_invariants()
    if report.principal_exists:
        checks['eigvec_positive'] = bool(report.mu_p_eigvec.min() > 0)
    return checks


def run_equilibrium(config, params, writer):
    # Step 1: reduced problem when R0 > 1, disease-free state otherwise
    bracket = None
    try:
        bracket = equilibria.solve_reduced_I(params)
        result = equilibria.recover_equilibrium(params, bracket.values, iterations=bracket.iterations)
    except SubcriticalRegime:
        logger.info('R0 <= 1: reporting the disease-free equilibrium')
        result = equilibria.disease_free(params)

    # Step 2: write the nodal profile and the header
    writer.csv('equilibrium.csv', _node_frame(params.mesh, S_tilde=result.S_tilde, I_tilde=result.I_tilde))
    header = dict(EquilibriumHeaderSerializer(result).data)
    if bracket is not None:
        header['bracket_gap'] = bracket.gap
    writer.json('equilibrium.json', header)

    if not config.checks:
        return {}
    checks = equilibrium_checks(params, result, None if bracket is None else bracket.gap)
    if bracket is not None:
        checks['uniqueness'] = bool(equilibria.uniqueness_probe(params, bracket.values) <= 1e-8)
    return checks


def run_simulate(config, params, writer):
    options = config.simulate
    mesh = params.mesh

    # Step 1: initial state and the reference equilibrium
    initial = dynamics.initial_state(mesh, options.initial.as_dict(), params.N, seed=options.seed)
    endemic = dynamics.reference_endemic(params)
    dt = options.dt if options.dt is not None else 0.9 * dynamics.max_time_step(params)

    # Step 2: integrate and classify
    trajectory = dynamics.integrate_to(params, initial, options.t_end, dt, endemic=endemic,
                                       keep_snapshots=options.snapshots)
    verdict = dynamics.classify_trajectory(trajectory, endemic)
    verdict.diagnostics['alpha'] = dynamics.alpha_gap(params.kernel, params.d_S)

    # Step 3: write samples, final fields and the verdict
    samples = pd.DataFrame.from_records(trajectory.samples, columns=trajectory.CSV_COLUMNS)
    writer.csv('trajectory.csv', samples)
    final = trajectory.final_state
    writer.csv('final_S.csv', pd.DataFrame({'node': np.arange(mesh.n), 'value': final.S}))
    writer.csv('final_I.csv', pd.DataFrame({'node': np.arange(mesh.n), 'value': final.I}))
    if options.snapshots:
        frames = [_node_frame(mesh, t=state.t, S=state.S, I=state.I) for state in trajectory.snapshots]
        writer.csv('snapshots.csv', pd.concat(frames, ignore_index=True))
    writer.json('verdict.json', {
        'outcome': verdict.outcome.value,
        'final_dist_dfe': verdict.diagnostics['final_dist_dfe'],
        'final_dist_endemic': verdict.diagnostics['final_dist_endemic'],
        'alpha': verdict.diagnostics['alpha'],
        'step_halvings': trajectory.step_halvings,
        'dt': dt,
    })

    if not config.checks:
        return {}
    mass = trajectory.column('mass')
    checks = {
        'mass': bool(np.max(np.abs(mass - params.N)) <= MASS_TOL * params.N),
        'nonnegative': bool(min(final.S.min(), final.I.min()) >= -dynamics.NEGATIVE_TOL),
    }
    lyapunov = trajectory.column('lyapunov')
    if not np.all(np.isnan(lyapunov)):
        checks['lyapunov_nonincreasing'] = bool(np.all(np.diff(lyapunov) <= 1e-10))
    return checks


def _spectrum_point(params, d):
    report = spectral.r0_all_routes(params.kernel, d, params.rates)
    return report.as_row(), report.check_invariants()


def _steady_point(params, d):
    point = params.replace(d_S=d)
    result = equilibria.steady_state(point)
    row = {
        'd_S': d,
        'kind': result.kind.value,
        'k': result.k,
        'S_min': float(result.S_tilde.min()),
        'S_max': float(result.S_tilde.max()),
        'I_min': float(result.I_tilde.min()),
        'I_max': float(result.I_tilde.max()),
        'residual': result.residual,
        'iterations': result.iterations,
    }
    return row, equilibrium_checks(point, result)


def _sign_changes(values):
    return [index for index in range(len(values) - 1) if values[index] < 0 < values[index + 1]
            or values[index] > 0 > values[index + 1]]


def run_sweep(config, params, writer):
    options = config.sweep
    grid = options.points()
    point = _spectrum_point if options.parameter == 'd_I' else _steady_point
    workers = resolve_workers(config)
    logger.info('sweep over %s: %d points on %d workers', options.parameter, grid.size, workers)

    def evaluate(index):
        try:
            return point(params, float(grid[index]))
        except SolverError as exc:
            raise TaskFailed(f'sweep[{index}] {options.parameter}={grid[index]:g}', exc) from exc

    # Step 1: points run concurrently, rows merge in grid order
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(evaluate, index) for index in range(grid.size)]
        results = [future.result() for future in futures]
    rows = [dict(index=index, **row) for index, (row, _) in enumerate(results)]
    writer.csv('sweep.csv', pd.DataFrame(rows))

    checks = {}
    if options.parameter == 'd_I':
        # Step 2: threshold d* between the bracketing grid points
        lambdas = np.array([row['lambda_p'] for row in rows])
        changes = _sign_changes(lambdas)
        summary = {'parameter': 'd_I', 'sign_changes': len(changes), 'd_star': None, 'bracket': None,
                   'reason': 'no sign change of lambda_p on the grid'}
        if len(changes) == 1:
            lo, hi = float(grid[changes[0]]), float(grid[changes[0] + 1])
            threshold = spectral.find_d_star(params.kernel, params.rates, lo, hi)
            summary.update(d_star=threshold.d_star, bracket=[lo, hi], reason=threshold.reason,
                           iterations=threshold.iterations)
        else:
            risk = spectral.classify_risk(params.mesh, params.rates)
            summary['risk'] = risk._asdict()
        writer.json('sweep.json', summary)
        if config.checks:
            checks['monotone'] = bool(np.all(np.diff(lambdas) >= -1e-10))
            checks['at_most_one_sign_change'] = len(changes) <= 1
    else:
        writer.json('sweep.json', {'parameter': 'd_S', 'points': int(grid.size)})

    if config.checks:
        names = sorted({name for _, point_checks in results for name in point_checks})
        for name in names:
            checks[name] = all(point_checks.get(name, True) for _, point_checks in results)
    return checks


def run_limits(config, params, writer):
    mesh, rates, N = params.mesh, params.rates, params.N
    grid = (config.limits or LimitsSpec()).grid

    # Step 1: the three large-diffusion limit profiles
    S_both, I_both = equilibria.limit_profile_both_infinity(rates, N, mesh)
    S_ds, I_ds = equilibria.limit_profile_ds_infinity(params.kernel, params.d_I, rates, N)
    S_di, I_di = equilibria.limit_profile_di_infinity(params.kernel, params.d_S, rates, N)
    di_residual = equilibria.di_limit_residual(params.kernel, params.d_S, rates, S_di, I_di)

    # Step 2: finite-diffusion endemic equilibria for comparison
    columns = {'S_both_inf': mesh.constant(S_both), 'I_both_inf': mesh.constant(I_both),
               'S_dS_inf': S_ds, 'I_dS_inf': I_ds, 'S_dI_inf': S_di, 'I_dI_inf': mesh.constant(I_di)}
    gaps = []
    for d in grid:
        large_s = equilibria.endemic(params.replace(d_S=d))
        large_i = equilibria.endemic(params.replace(d_I=d))
        large_both = equilibria.endemic(params.replace(d_S=d, d_I=d))
        columns.update({f'S_dS_{d:g}': large_s.S_tilde, f'I_dS_{d:g}': large_s.I_tilde,
                        f'S_dI_{d:g}': large_i.S_tilde, f'I_dI_{d:g}': large_i.I_tilde})
        gaps.append({
            'd': d,
            'gap_dS': relative_gap(large_s.S_tilde, large_s.I_tilde, S_ds, I_ds),
            'gap_dI': relative_gap(large_i.S_tilde, large_i.I_tilde, S_di, I_di),
            'gap_both': relative_gap(large_both.S_tilde, large_both.I_tilde, S_both, I_both),
        })
    writer.csv('limits.csv', _node_frame(mesh, **columns))
    writer.csv('limit_gaps.csv', pd.DataFrame(gaps))
    writer.json('limits.json', {
        'both_infinity': {'S': S_both, 'I': I_both},
        'dI_infinity': {'I_star': I_di, 'residual': di_residual},
        'gaps': gaps,
    })

    if not config.checks:
        return {}
    largest = gaps[-1]
    return {
        'dI_limit_residual': di_residual <= RESIDUAL_TOL,
        'dS_limit_gap': largest['gap_dS'] <= LIMIT_GAP_TOL,
        'dI_limit_gap': largest['gap_dI'] <= LIMIT_GAP_TOL,
        'dS_limit_mass': abs(integrate(mesh, S_ds + I_ds) - N) <= 1e-9 * N,
    }


TASKS = {
    'spectrum': run_spectrum,
    'equilibrium': run_equilibrium,
    'simulate': run_simulate,
    'sweep': run_sweep,
    'limits': run_limits,
}


def run(config, out_dir, strict=False):
    """
    Run one scenario and write its outputs to ``out_dir``.

    Task errors are recorded on the returned RunRecord (and re-raised as
    TaskFailed when ``strict``); record.json is always written.
    """
    started = time.perf_counter()
    writer = OutputWriter(out_dir)
    record = RunRecord(task=config.task, config=config)
    logger.info('running %s task %s', config.name or 'scenario', config.task)
    try:
        params = build_model(config)
        record.checks = TASKS[config.task](config, params, writer)
    except SolverError as exc:
        failure = exc if isinstance(exc, TaskFailed) else TaskFailed(config.task, exc)
        logger.error('task failed [%s]: %s', failure.code, failure)
        record.errors.append(f'[{failure.code}] {failure}')
        if strict:
            if failure is exc:
                raise
            raise failure from exc
    finally:
        record.wall_time = time.perf_counter() - started
        record.outputs = list(writer.paths)
        record.outputs.append(str(writer.out_dir / 'record.json'))
        writer.json('record.json', RunRecordSerializer(record).data)
    failed = [name for name, passed in record.checks.items() if not passed]
    if failed:
        logger.warning('failed checks: %s', ', '.join(failed))
    logger.info('finished %s in %.2fs, %d files', config.task, record.wall_time, len(record.outputs))
    return record
