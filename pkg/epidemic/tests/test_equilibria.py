import numpy as np
import pytest

from epidemic import equilibria
from epidemic.equilibria import EquilibriumKind
from epidemic.exceptions import (AssumptionViolated, NegativeParameter, NonpositiveDiffusivity, OutOfRange,
                                 SubcriticalRegime)
from epidemic.mesh import integrate
from epidemic.spectral import RateFields


def test_model_params_validate(kernel, make_params):
    with pytest.raises(NonpositiveDiffusivity):
        make_params(kernel, 2.0, 1.0, d_S=0.0)
    with pytest.raises(NegativeParameter):
        make_params(kernel, 2.0, 1.0, N=-1.0)
    params = make_params(kernel, 2.0, 1.0)
    assert params.replace(d_I=3.0).d_I == 3.0
    assert params.omega == pytest.approx(2.0)


def test_disease_free(kernel, make_params):
    result = equilibria.disease_free(make_params(kernel, 1.0, 2.0, d_S=0.5, N=3.0))
    assert result.kind == EquilibriumKind.DISEASE_FREE
    np.testing.assert_allclose(result.S_tilde, 1.5)
    assert not result.I_tilde.any()
    assert result.k == pytest.approx(0.75)
    assert result.residual <= 1e-12


def test_reduced_solution_for_constant_rates(kernel, make_params):
    solution = equilibria.solve_reduced_I(make_params(kernel, 2.0, 1.0))
    np.testing.assert_allclose(solution.values, 0.5, atol=1e-9)
    assert solution.gap <= equilibria.BRACKET_TOL
    assert np.all(solution.upper >= solution.lower)
    assert solution.iterations > 0


def test_endemic_for_constant_rates(kernel, make_params):
    params = make_params(kernel, 2.0, 1.0)
    result = equilibria.endemic(params)
    assert result.kind == EquilibriumKind.ENDEMIC
    np.testing.assert_allclose(result.S_tilde, 0.5, atol=1e-8)
    np.testing.assert_allclose(result.I_tilde, 0.5, atol=1e-8)
    assert result.k == pytest.approx(1.0, abs=1e-8)
    assert result.residual <= 1e-8


def test_heterogeneous_endemic(kernel, cosine_beta, make_params):
    params = make_params(kernel, cosine_beta, 1.0, d_S=0.5, d_I=0.1)
    result = equilibria.endemic(params)
    assert result.residual <= 1e-8
    assert integrate(params.mesh, result.S_tilde + result.I_tilde) == pytest.approx(params.N, rel=1e-10)
    k_field = params.d_S * result.S_tilde + params.d_I * result.I_tilde
    assert np.ptp(k_field) <= 1e-10 * result.k
    assert result.S_tilde.min() > 0 and result.I_tilde.min() > 0
    assert np.ptp(result.I_tilde) > 1e-3


def test_subcritical_has_no_endemic_state(kernel, make_params):
    params = make_params(kernel, 1.0, 2.0)
    with pytest.raises(SubcriticalRegime):
        equilibria.solve_reduced_I(params)
    result = equilibria.steady_state(params)
    assert result.kind == EquilibriumKind.DISEASE_FREE
    np.testing.assert_allclose(result.S_tilde, 1.0)


@pytest.mark.parametrize('value', [0.0, 1.0, -0.2])
def test_recover_rejects_out_of_range(kernel, make_params, value):
    with pytest.raises(OutOfRange):
        equilibria.recover_equilibrium(make_params(kernel, 2.0, 1.0), np.full(kernel.mesh.n, value))


def test_uniqueness_probe(kernel, cosine_beta, make_params):
    params = make_params(kernel, cosine_beta, 1.0, d_S=0.5, d_I=0.1)
    solution = equilibria.solve_reduced_I(params)
    assert equilibria.uniqueness_probe(params, solution.values) <= 1e-8


def test_logistic_steady(kernel, cosine_beta):
    constant = equilibria.logistic_steady(kernel, 1.0, np.ones(kernel.mesh.n), np.ones(kernel.mesh.n))
    np.testing.assert_allclose(constant.values, 1.0, atol=1e-9)

    r = cosine_beta - 0.5
    c = np.full(kernel.mesh.n, 2.0)
    solution = equilibria.logistic_steady(kernel, 0.3, r, c)
    dispersal = 0.3 * (kernel.matrix - np.diag(kernel.row_integral))
    residual = dispersal @ solution.values + (r - c * solution.values) * solution.values
    assert np.max(np.abs(residual)) <= 1e-8
    assert solution.values.min() > 0

    with pytest.raises(SubcriticalRegime):
        equilibria.logistic_steady(kernel, 1.0, -np.ones(kernel.mesh.n), np.ones(kernel.mesh.n))


def test_logistic_envelopes_bracket_infection(kernel, cosine_beta, make_params):
    params = make_params(kernel, cosine_beta, 0.8, d_S=1.0, d_I=1.0)
    I_tilde = equilibria.endemic(params).I_tilde
    lower, upper = equilibria.logistic_envelopes(params, 0.1)
    assert np.all(lower < I_tilde)
    assert np.all(I_tilde < upper)

    density = params.N / params.omega
    exact = equilibria.logistic_steady(kernel, 1.0, cosine_beta - 0.8, cosine_beta / density)
    np.testing.assert_allclose(exact.values, I_tilde, atol=1e-8)


def test_logistic_envelopes_assumptions(kernel, cosine_beta, make_params):
    with pytest.raises(AssumptionViolated):
        equilibria.logistic_envelopes(make_params(kernel, cosine_beta, 0.8, d_S=2.0), 0.1)
    with pytest.raises(OutOfRange):
        equilibria.logistic_envelopes(make_params(kernel, cosine_beta, 0.8), 1.0)


@pytest.mark.parametrize('d_I', [0.5, 1.0, 4.0])
def test_theta_star_constant_rates(kernel, d_I):
    rates = RateFields.on_mesh(kernel.mesh, 2.0, 1.0)
    np.testing.assert_allclose(equilibria.theta_star(kernel, d_I, rates).values, d_I, rtol=1e-8)


def test_theta_star_heterogeneous(kernel, cosine_beta):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta + 0.5, 1.0)
    theta = equilibria.theta_star(kernel, 1.0, rates).values
    dispersal = kernel.matrix - np.diag(kernel.row_integral)
    residual = dispersal @ theta + (rates.beta - rates.gamma) * theta - rates.beta * theta ** 2 / (1.0 + theta)
    assert np.max(np.abs(residual)) <= 1e-8
    assert theta.min() > 0
    assert theta.max() <= np.max((rates.beta - rates.gamma) / rates.gamma) + 1e-12


def test_limit_both_infinity(mesh):
    S, I = equilibria.limit_profile_both_infinity(RateFields.on_mesh(mesh, 2.0, 1.0), 2.0, mesh)
    assert (S, I) == (pytest.approx(0.5), pytest.approx(0.5))
    with pytest.raises(AssumptionViolated):
        equilibria.limit_profile_both_infinity(RateFields.on_mesh(mesh, 1.0, 1.0), 2.0, mesh)


def test_limit_ds_infinity_constant_rates(kernel):
    S, I = equilibria.limit_profile_ds_infinity(kernel, 1.0, RateFields.on_mesh(kernel.mesh, 2.0, 1.0), 2.0)
    np.testing.assert_allclose(S, 0.5, atol=1e-8)
    np.testing.assert_allclose(I, 0.5, atol=1e-8)


def test_limit_ds_infinity_mass(kernel, cosine_beta):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta + 0.5, 1.0)
    S, I = equilibria.limit_profile_ds_infinity(kernel, 1.0, rates, 2.0)
    assert np.ptp(S) == 0
    assert integrate(kernel.mesh, S + I) == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize('d_S', [1.0, 10.0, 100.0, 1e3])
def test_limit_di_infinity_constant_rates(kernel, d_S):
    rates = RateFields.on_mesh(kernel.mesh, 2.0, 1.0)
    S, I_star = equilibria.limit_profile_di_infinity(kernel, d_S, rates, 2.0)
    np.testing.assert_allclose(S, 0.5, atol=1e-7)
    assert I_star == pytest.approx(0.5, abs=1e-7)
    assert equilibria.di_limit_residual(kernel, d_S, rates, S, I_star) <= 1e-8


@pytest.mark.parametrize('d_S', [1.0, 1e3])
def test_limit_di_infinity_heterogeneous(kernel, cosine_beta, d_S):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta + 0.5, 1.0)
    S, I_star = equilibria.limit_profile_di_infinity(kernel, d_S, rates, 2.0)
    assert equilibria.di_limit_residual(kernel, d_S, rates, S, I_star) <= 1e-8
    assert integrate(kernel.mesh, S) + I_star * kernel.mesh.length == pytest.approx(2.0, rel=1e-7)
    assert S.min() > 0 and I_star > 0
