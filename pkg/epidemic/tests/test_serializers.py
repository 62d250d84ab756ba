import copy
import json
from pathlib import Path

import pytest

from epidemic.config import InitialSpec, MeshSpec, RateSpec, ScenarioConfig, SimulateSpec, SweepSpec
from epidemic.mesh import KernelSpec
from epidemic.serializers import ScenarioSerializer

SCENARIOS = sorted((Path(__file__).resolve().parent.parent / 'scenarios').glob('*.json'))


def errors_for(payload):
    serializer = ScenarioSerializer(data=payload)
    assert not serializer.is_valid()
    return serializer.errors


def test_valid_payload_builds_config(scenario_payload):
    serializer = ScenarioSerializer(data=scenario_payload)
    assert serializer.is_valid(), serializer.errors
    config = serializer.save()
    assert isinstance(config, ScenarioConfig)
    assert config.mesh == MeshSpec(a=-1.0, b=1.0, n=60)
    assert config.kernel == KernelSpec(family='triangle', delta=0.5, cutoff=3.0)
    assert config.beta == RateSpec(kind='constant', value=2.0)
    assert config.sweep is None and config.workers == 1


def test_nested_specs(scenario_payload):
    payload = dict(scenario_payload, task='simulate', simulate={
        't_end': 10.0, 'initial': {'kind': 'bump', 'center': 0.2, 'width': 0.1}, 'seed': 3})
    serializer = ScenarioSerializer(data=payload)
    assert serializer.is_valid(), serializer.errors
    simulate = serializer.save().simulate
    assert simulate == SimulateSpec(t_end=10.0, initial=InitialSpec(kind='bump', center=0.2, width=0.1), seed=3)

    payload = dict(scenario_payload, task='sweep', sweep={'start': -2, 'stop': 2, 'num': 5})
    serializer = ScenarioSerializer(data=payload)
    assert serializer.is_valid(), serializer.errors
    sweep = serializer.save().sweep
    assert sweep == SweepSpec(start=-2.0, stop=2.0, num=5)
    assert sweep.points()[0] == pytest.approx(1e-2)


@pytest.mark.parametrize('path', SCENARIOS, ids=[path.stem for path in SCENARIOS])
def test_shipped_scenarios_round_trip(path):
    serializer = ScenarioSerializer(data=json.loads(path.read_text()))
    assert serializer.is_valid(), serializer.errors
    config = serializer.save()
    emitted = ScenarioSerializer(config).data
    again = ScenarioSerializer(data=json.loads(json.dumps(emitted)))
    assert again.is_valid(), again.errors
    assert again.save() == config


@pytest.mark.parametrize('change, field', [
    ({'task': 'animate'}, 'task'),
    ({'beta': {'kind': 'quadratic'}}, 'beta'),
    ({'beta': {'kind': 'cosine', 'base': 1.0}}, 'beta'),
    ({'d_S': 0.0}, 'd_S'),
    ({'N': -2.0}, 'N'),
    ({'mesh': {'a': 1.0, 'b': -1.0, 'n': 10}}, 'mesh'),
    ({'mesh': {'a': -1.0, 'b': 1.0, 'n': 1}}, 'mesh'),
    ({'kernel': {'family': 'triangle'}}, 'kernel'),
    ({'kernel': {'family': 'gaussian', 'sigma': -0.1}}, 'kernel'),
    ({'kernel': {'family': 'triangle', 'delta': 0.01}}, 'kernel'),
    ({'gamma': {'kind': 'constant', 'value': -1.0}}, 'gamma'),
    ({'beta': {'kind': 'cosine', 'base': 0.5, 'amplitude': 1.0, 'frequency': 1.0}}, 'beta'),
    ({'task': 'sweep'}, 'sweep'),
    ({'task': 'simulate'}, 'simulate'),
    ({'workers': 0}, 'workers'),
])
def test_field_errors(scenario_payload, change, field):
    assert field in errors_for(dict(scenario_payload, **change))


def test_sweep_errors(scenario_payload):
    payload = dict(scenario_payload, task='sweep', sweep={'parameter': 'd_I'})
    assert 'non_field_errors' in errors_for(payload)['sweep']

    payload['sweep'] = {'grid': [1.0, 0.5, 2.0]}
    assert 'grid' in errors_for(payload)['sweep']

    payload['sweep'] = {'grid': [0.0, 1.0]}
    assert 'grid' in errors_for(payload)['sweep']


def test_table_rates(scenario_payload):
    payload = copy.deepcopy(scenario_payload)
    payload['gamma'] = {'kind': 'table', 'values': [1.0, 2.0, 1.0], 'x': [-1.0, 0.0, 1.0]}
    serializer = ScenarioSerializer(data=payload)
    assert serializer.is_valid(), serializer.errors
    assert serializer.save().gamma.x == (-1.0, 0.0, 1.0)

    payload['gamma'] = {'kind': 'table', 'values': [1.0, 2.0, 1.0], 'x': [-0.5, 0.0, 0.5]}
    assert 'gamma' in errors_for(payload)

    payload['gamma'] = {'kind': 'table', 'values': [1.0, 2.0, 1.0], 'x': [-1.0, 1.0]}
    assert 'x' in errors_for(payload)['gamma']

    payload['gamma'] = {'kind': 'table', 'values': [1.0, 2.0, 1.0], 'x': [-1.0, 1.0, 0.0]}
    assert 'x' in errors_for(payload)['gamma']


def test_emitted_config_drops_unset_fields(scenario_payload):
    serializer = ScenarioSerializer(data=scenario_payload)
    serializer.is_valid(raise_exception=True)
    data = ScenarioSerializer(serializer.save()).data
    assert data['beta'] == {'kind': 'constant', 'value': 2.0}
    assert 'sweep' not in data and 'simulate' not in data
