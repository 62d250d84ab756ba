import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from epidemic import spectral
from epidemic.exceptions import InvalidBracket, LengthMismatch, NonpositiveRate
from epidemic.mesh import build_kernel, build_mesh
from epidemic.nonlocal_op import dispersal_matrix
from epidemic.spectral import RateFields


def bump_rates(mesh):
    return RateFields.on_mesh(mesh, 1.0 + 1.5 * np.exp(-20.0 * mesh.nodes ** 2), 1.4)


def test_rate_fields_validate(mesh):
    with pytest.raises(NonpositiveRate):
        RateFields.on_mesh(mesh, 0.0, 1.0)
    with pytest.raises(NonpositiveRate):
        RateFields.on_mesh(mesh, 1.0, -1.0)
    with pytest.raises(LengthMismatch):
        RateFields(beta=np.ones(3), gamma=np.ones(4))


@pytest.mark.parametrize('beta, gamma, expected_r0', [(2.0, 1.0, 2.0), (1.0, 2.0, 0.5), (1.0, 1.0, 1.0)])
def test_constant_rates(kernel, beta, gamma, expected_r0):
    rates = RateFields.on_mesh(kernel.mesh, beta, gamma)
    report = spectral.r0_all_routes(kernel, 1.0, rates)
    assert report.lambda_p == pytest.approx(gamma - beta, abs=1e-10)
    assert report.mu_p == pytest.approx(gamma / beta, rel=1e-10)
    assert report.r0_weighted == pytest.approx(expected_r0, rel=1e-10)
    assert report.r0_variational == pytest.approx(expected_r0, rel=1e-8)
    assert report.r0_nextgen == pytest.approx(expected_r0, rel=1e-8)
    assert report.principal_exists
    assert all(report.check_invariants().values())


def test_lambda_p_matches_dense_minimum(kernel, cosine_beta):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta, 1.0)
    matrix = -0.3 * dispersal_matrix(kernel) + np.diag(rates.gamma - rates.beta)
    value, vector = spectral.lambda_p(kernel, 0.3, rates)
    assert value == pytest.approx(np.linalg.eigvalsh(matrix).min(), abs=1e-10)
    assert np.linalg.norm(vector) == pytest.approx(1.0)
    assert vector.min() > 0


def test_principal_existence_criterion(kernel, cosine_beta):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta, 1.0)
    for d in (1e-4, 0.1, 10.0):
        lp, _ = spectral.lambda_p(kernel, d, rates)
        edge = np.min(d * kernel.row_integral + rates.gamma - rates.beta)
        assert spectral.principal_eigen_exists(kernel, d, rates, lp) == (lp < edge - 1e-12)


def test_mu_p_matches_generalized_eigenproblem(kernel, cosine_beta):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta, 1.0 + 0.2 * kernel.mesh.nodes)
    infection = -0.7 * dispersal_matrix(kernel) + np.diag(rates.gamma)
    expected = linalg.eigh(infection, np.diag(rates.beta), eigvals_only=True)[0]
    value, phi = spectral.mu_p(kernel, 0.7, rates)
    assert value == pytest.approx(expected, rel=1e-10)
    assert phi.max() == pytest.approx(1.0)
    assert phi.min() > 0
    assert spectral.basic_reproduction_number(kernel, 0.7, rates) == pytest.approx(1.0 / expected, rel=1e-10)


def test_heterogeneous_routes_agree(kernel, cosine_beta):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta, 1.2)
    report = spectral.r0_all_routes(kernel, 0.5, rates)
    assert report.check_invariants() == {
        'sign_relation': True, 'route_variational': True, 'route_nextgen': True, 'spectral_bound': True}
    assert set(report.as_row()) == set(spectral.SpectralReport.CSV_COLUMNS)


def test_limits(mesh, cosine_beta):
    rates = RateFields.on_mesh(mesh, cosine_beta, 1.0)
    d0, dinf = spectral.lambda_limits(mesh, rates)
    assert d0 == pytest.approx(np.min(1.0 - cosine_beta))
    assert dinf == pytest.approx(np.mean(1.0 - cosine_beta))
    r0_d0, r0_dinf = spectral.r0_limits(mesh, rates)
    assert r0_d0 == pytest.approx(np.max(cosine_beta))
    assert r0_dinf == pytest.approx(np.mean(cosine_beta))


def test_classify_risk(mesh, cosine_beta):
    assert spectral.classify_risk(mesh, RateFields.on_mesh(mesh, 2.0, 1.0)).regime == 'high_risk_domain'
    assert spectral.classify_risk(mesh, RateFields.on_mesh(mesh, 1.0, 2.0)).regime == 'all_low_risk'
    profile = spectral.classify_risk(mesh, bump_rates(mesh))
    assert profile.regime == 'mixed'
    assert profile.high_risk_sites > 0 and profile.low_risk_sites > 0


def test_classify_risk_with_ties(mesh):
    assert spectral.classify_risk(mesh, RateFields.on_mesh(mesh, 1.5, 1.5)).regime == 'neutral'
    profile = spectral.classify_risk(mesh, RateFields.on_mesh(mesh, 1.0 - 0.5 * np.clip(mesh.nodes, 0, None), 1.0))
    assert profile.regime == 'no_high_risk'
    assert profile.high_risk_sites == 0 and 0 < profile.low_risk_sites < mesh.n


def test_find_d_star(kernel):
    rates = bump_rates(kernel.mesh)
    threshold = spectral.find_d_star(kernel, rates, 1e-3, 1e3)
    assert threshold.d_star is not None
    assert 1e-3 < threshold.d_star < 1e3
    assert abs(spectral.lambda_p(kernel, threshold.d_star, rates)[0]) <= 1e-6
    assert spectral.basic_reproduction_number(kernel, threshold.d_star, rates) == pytest.approx(1.0, abs=1e-5)
    assert spectral.lambda_p(kernel, 0.5 * threshold.d_star, rates)[0] < 0
    assert spectral.lambda_p(kernel, 2.0 * threshold.d_star, rates)[0] > 0


@pytest.mark.parametrize('beta, gamma, reason', [
    (2.0, 1.0, 'high-risk domain'),
    (1.0, 2.0, 'β<γ everywhere'),
    (1.5, 1.5, 'β≡γ: R₀=1'),
])
def test_find_d_star_without_root(kernel, beta, gamma, reason):
    threshold = spectral.find_d_star(kernel, RateFields.on_mesh(kernel.mesh, beta, gamma), 1e-3, 1e3)
    assert threshold.d_star is None
    assert threshold.reason.startswith(reason)


def test_find_d_star_unbracketed(kernel):
    threshold = spectral.find_d_star(kernel, bump_rates(kernel.mesh), 5e2, 1e3)
    assert threshold.d_star is None
    assert 'does not straddle' in threshold.reason


def test_find_d_star_rejects_bad_bracket(kernel):
    with pytest.raises(InvalidBracket):
        spectral.find_d_star(kernel, bump_rates(kernel.mesh), 1.0, 1.0)


def test_monotonicity_scan(kernel, cosine_beta):
    rates = RateFields.on_mesh(kernel.mesh, cosine_beta, 1.0)
    values = spectral.lambda_p_monotonicity_scan(kernel, rates, np.logspace(-3, 3, 13))
    assert np.all(np.diff(values) >= -1e-10)
    with pytest.raises(InvalidBracket):
        spectral.lambda_p_monotonicity_scan(kernel, rates, [1.0, 0.5])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), log_d=st.floats(-2.0, 1.0))
def test_random_fields(seed, log_d):
    kernel = build_kernel(build_mesh(-1.0, 1.0, 40), {'family': 'triangle', 'delta': 0.5})
    rng = np.random.default_rng(seed)
    rates = RateFields(beta=np.exp(rng.uniform(np.log(0.5), np.log(2.0), 40)),
                       gamma=np.exp(rng.uniform(np.log(0.5), np.log(2.0), 40)))
    d = 10.0 ** log_d
    report = spectral.r0_all_routes(kernel, d, rates)

    assert all(report.check_invariants().values())
    assert report.limit_d0 - 1e-10 <= report.lambda_p <= report.limit_dinf + 1e-10
    assert report.r0_limit_dinf * (1 - 1e-10) <= report.r0_weighted <= report.r0_limit_d0 * (1 + 1e-10)
    assert report.mu_p_eigvec.min() > 0

    further = spectral.r0_all_routes(kernel, 2.0 * d, rates)
    assert further.lambda_p >= report.lambda_p - 1e-10
    assert further.r0_weighted <= report.r0_weighted * (1 + 1e-10)


def test_find_d_star_when_beta_touches_gamma(kernel):
    rates = RateFields.on_mesh(kernel.mesh, 1.0 - 0.5 * np.clip(kernel.mesh.nodes, 0, None), 1.0)
    threshold = spectral.find_d_star(kernel, rates, 1e-3, 1e3)
    assert threshold.d_star is None
    assert threshold.reason.startswith('β≤γ')
    assert spectral.basic_reproduction_number(kernel, 1.0, rates) < 1
