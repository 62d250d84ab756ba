import numpy as np
import pytest

from epidemic import equilibria, spectral
from epidemic.mesh import build_kernel, build_mesh

TRIANGLE = {'family': 'triangle', 'delta': 0.5}


@pytest.fixture
def mesh():
    return build_mesh(-1.0, 1.0, 80)


@pytest.fixture
def kernel(mesh):
    return build_kernel(mesh, TRIANGLE)


@pytest.fixture
def small_kernel():
    return build_kernel(build_mesh(-1.0, 1.0, 40), TRIANGLE)


@pytest.fixture
def cosine_beta(mesh):
    return 1.0 + 0.8 * np.cos(np.pi * mesh.nodes)


@pytest.fixture
def make_params():
    def factory(kernel, beta, gamma, d_S=1.0, d_I=1.0, N=2.0):
        rates = spectral.RateFields.on_mesh(kernel.mesh, beta, gamma)
        return equilibria.ModelParams(d_S=d_S, d_I=d_I, N=N, rates=rates, kernel=kernel)
    return factory


@pytest.fixture
def scenario_payload():
    return {
        'name': 'test scenario',
        'task': 'spectrum',
        'mesh': {'a': -1.0, 'b': 1.0, 'n': 60},
        'kernel': {'family': 'triangle', 'delta': 0.5},
        'beta': {'kind': 'constant', 'value': 2.0},
        'gamma': {'kind': 'constant', 'value': 1.0},
        'd_S': 1.0,
        'd_I': 1.0,
        'N': 2.0,
        'checks': True,
    }
