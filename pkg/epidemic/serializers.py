from rest_framework import serializers

from .config import (INITIAL_KINDS, RATE_KINDS, SWEEP_PARAMETERS, TASKS, InitialSpec, LimitsSpec, MeshSpec,
                     RateSpec, ScenarioConfig, SimulateSpec, SweepSpec)
from .exceptions import SolverError
from .mesh import KERNEL_FAMILIES, KernelSpec, build_mesh

RATE_PARAMETERS = {
    'constant': ('value',),
    'cosine': ('base', 'amplitude', 'frequency'),
    'gaussian_bump': ('base', 'height', 'width', 'center'),
    'table': ('values',),
}


class SpecSerializer(serializers.Serializer):
    """Serializer for a frozen spec dataclass; optional fields left unset are not emitted."""

    spec_class = None

    def to_representation(self, instance):
        data = super().to_representation(instance)
        return {key: value for key, value in data.items() if value is not None}

    def build(self, attrs):
        return self.spec_class(**attrs)


class MeshSerializer(SpecSerializer):
    spec_class = MeshSpec

    a = serializers.FloatField()
    b = serializers.FloatField()
    n = serializers.IntegerField(min_value=2)

    def validate(self, attrs):
        if not attrs['b'] > attrs['a']:
            raise serializers.ValidationError({'b': 'Must be greater than a.'})
        return attrs


class KernelSerializer(SpecSerializer):
    spec_class = KernelSpec

    family = serializers.ChoiceField(choices=KERNEL_FAMILIES)
    delta = serializers.FloatField(required=False, allow_null=True)
    sigma = serializers.FloatField(required=False, allow_null=True)
    cutoff = serializers.FloatField(required=False, default=3.0)

    def validate(self, attrs):
        needed = ('delta',) if attrs['family'] == 'triangle' else ('sigma', 'cutoff')
        errors = {name: 'Required positive value for the {} kernel.'.format(attrs['family'])
                  for name in needed if not (attrs.get(name) is not None and attrs[name] > 0)}
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class RateSpecSerializer(SpecSerializer):
    spec_class = RateSpec

    kind = serializers.ChoiceField(choices=RATE_KINDS)
    value = serializers.FloatField(required=False, allow_null=True)
    base = serializers.FloatField(required=False, allow_null=True)
    amplitude = serializers.FloatField(required=False, allow_null=True)
    frequency = serializers.FloatField(required=False, allow_null=True)
    height = serializers.FloatField(required=False, allow_null=True)
    width = serializers.FloatField(required=False, allow_null=True)
    center = serializers.FloatField(required=False, allow_null=True)
    values = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True, min_length=2)
    x = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True, min_length=2)

    def validate(self, attrs):
        kind = attrs['kind']
        missing = {name: 'Required for {} rates.'.format(kind)
                   for name in RATE_PARAMETERS[kind] if attrs.get(name) is None}
        if missing:
            raise serializers.ValidationError(missing)
        if kind == 'gaussian_bump' and not attrs['width'] > 0:
            raise serializers.ValidationError({'width': 'Must be positive.'})
        if kind == 'table':
            attrs['values'] = tuple(attrs['values'])
            if attrs.get('x') is not None:
                attrs['x'] = tuple(attrs['x'])
                if len(attrs['x']) != len(attrs['values']):
                    raise serializers.ValidationError({'x': 'Must have as many entries as values.'})
                if any(right <= left for left, right in zip(attrs['x'], attrs['x'][1:])):
                    raise serializers.ValidationError({'x': 'Must be strictly increasing.'})
        return attrs


class SweepSerializer(SpecSerializer):
    spec_class = SweepSpec

    parameter = serializers.ChoiceField(choices=SWEEP_PARAMETERS, default='d_I')
    grid = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True, min_length=2)
    start = serializers.FloatField(required=False, allow_null=True)
    stop = serializers.FloatField(required=False, allow_null=True)
    num = serializers.IntegerField(required=False, allow_null=True, min_value=2)
    spacing = serializers.ChoiceField(choices=('log', 'linear'), default='log')

    def validate(self, attrs):
        if attrs.get('grid') is not None:
            attrs['grid'] = tuple(attrs['grid'])
        elif any(attrs.get(name) is None for name in ('start', 'stop', 'num')):
            raise serializers.ValidationError('Give either grid or start, stop and num.')
        points = SweepSpec(**attrs).points()
        if any(right <= left for left, right in zip(points, points[1:])):
            raise serializers.ValidationError({'grid': 'Sweep grid must be strictly increasing.'})
        if points[0] <= 0:
            raise serializers.ValidationError({'grid': 'Diffusivities must be positive.'})
        return attrs


class InitialSerializer(SpecSerializer):
    spec_class = InitialSpec

    kind = serializers.ChoiceField(choices=INITIAL_KINDS, default='uniform')
    infected_fraction = serializers.FloatField(default=0.1, min_value=0.0, max_value=1.0)
    center = serializers.FloatField(required=False, allow_null=True)
    width = serializers.FloatField(required=False, allow_null=True)

    def validate(self, attrs):
        if not attrs['infected_fraction'] > 0:
            raise serializers.ValidationError({'infected_fraction': 'Initial infection must be positive.'})
        if attrs.get('width') is not None and not attrs['width'] > 0:
            raise serializers.ValidationError({'width': 'Must be positive.'})
        return attrs


class SimulateSerializer(SpecSerializer):
    spec_class = SimulateSpec

    t_end = serializers.FloatField()
    dt = serializers.FloatField(required=False, allow_null=True)
    initial = InitialSerializer(required=False)
    seed = serializers.IntegerField(required=False, allow_null=True)
    snapshots = serializers.BooleanField(default=False)

    def validate(self, attrs):
        if not attrs['t_end'] > 0:
            raise serializers.ValidationError({'t_end': 'Must be positive.'})
        if attrs.get('dt') is not None and not attrs['dt'] > 0:
            raise serializers.ValidationError({'dt': 'Must be positive.'})
        return attrs

    def build(self, attrs):
        attrs = dict(attrs)
        attrs['initial'] = InitialSpec(**attrs.get('initial', {}))
        return SimulateSpec(**attrs)


class LimitsSerializer(SpecSerializer):
    spec_class = LimitsSpec

    grid = serializers.ListField(child=serializers.FloatField(min_value=0.0), min_length=1)

    def validate(self, attrs):
        attrs['grid'] = tuple(attrs['grid'])
        if any(value <= 0 for value in attrs['grid']):
            raise serializers.ValidationError({'grid': 'Diffusivities must be positive.'})
        return attrs


class ScenarioSerializer(SpecSerializer):
    """
    Scenario config (one JSON document per scenario).

    ``ScenarioSerializer(data=payload)`` validates and ``save()`` returns a
    frozen ``ScenarioConfig``; ``ScenarioSerializer(config).data`` emits the
    config back in the same shape.
    """
    name = serializers.CharField(required=False, allow_blank=True, default='')
    task = serializers.ChoiceField(choices=TASKS)
    mesh = MeshSerializer()
    kernel = KernelSerializer()
    beta = RateSpecSerializer()
    gamma = RateSpecSerializer()
    d_S = serializers.FloatField()
    d_I = serializers.FloatField()
    N = serializers.FloatField()
    sweep = SweepSerializer(required=False, allow_null=True)
    simulate = SimulateSerializer(required=False, allow_null=True)
    limits = LimitsSerializer(required=False, allow_null=True)
    checks = serializers.BooleanField(default=False)
    workers = serializers.IntegerField(default=1, min_value=1)

    def validate(self, attrs):
        errors = {name: 'Must be positive.' for name in ('d_S', 'd_I', 'N') if not attrs[name] > 0}
        if attrs['task'] == 'sweep' and not attrs.get('sweep'):
            errors['sweep'] = 'Required for the sweep task.'
        if attrs['task'] == 'simulate' and not attrs.get('simulate'):
            errors['simulate'] = 'Required for the simulate task.'
        if errors:
            raise serializers.ValidationError(errors)

        # Step 1: the mesh must carry the kernel
        mesh_spec = MeshSpec(**attrs['mesh'])
        mesh = build_mesh(mesh_spec.a, mesh_spec.b, mesh_spec.n)
        kernel = KernelSpec(**attrs['kernel'])
        if kernel.support < 2 * mesh.weight:
            raise serializers.ValidationError(
                {'kernel': 'Support {:g} is below two mesh cells ({:g}).'.format(kernel.support, 2 * mesh.weight)})

        # Step 2: both rates must evaluate to strictly positive fields on the mesh
        for name in ('beta', 'gamma'):
            try:
                values = RateSpec(**attrs[name]).evaluate(mesh)
            except SolverError as exc:
                raise serializers.ValidationError({name: str(exc)})
            if not values.min() > 0:
                raise serializers.ValidationError(
                    {name: 'Must be strictly positive on every node (min {:g}).'.format(values.min())})
        return attrs

    def create(self, validated_data):
        data = dict(validated_data)
        for name in ('mesh', 'kernel', 'beta', 'gamma', 'sweep', 'simulate', 'limits'):
            if data.get(name) is not None:
                data[name] = self.fields[name].build(data[name])
        return ScenarioConfig(**data)


class SpectralReportSerializer(serializers.Serializer):
    d_I = serializers.FloatField()
    lambda_p = serializers.FloatField()
    principal_exists = serializers.BooleanField()
    mu_p = serializers.FloatField()
    r0_weighted = serializers.FloatField()
    r0_variational = serializers.FloatField()
    r0_nextgen = serializers.FloatField()
    spectral_bound_M = serializers.FloatField()
    limit_d0 = serializers.FloatField()
    limit_dinf = serializers.FloatField()
    r0_limit_d0 = serializers.FloatField()
    r0_limit_dinf = serializers.FloatField()


class EquilibriumHeaderSerializer(serializers.Serializer):
    k = serializers.FloatField()
    kind = serializers.CharField(source='kind.value')
    iterations = serializers.IntegerField()
    residual = serializers.FloatField()


class RunRecordSerializer(serializers.Serializer):
    task = serializers.CharField()
    config = ScenarioSerializer(allow_null=True)
    outputs = serializers.ListField(child=serializers.CharField())
    wall_time = serializers.FloatField()
    checks = serializers.DictField(child=serializers.BooleanField())
    errors = serializers.ListField(child=serializers.CharField())


class SuiteRowSerializer(serializers.Serializer):
    check = serializers.CharField()
    passed = serializers.BooleanField()
    value = serializers.FloatField(allow_null=True)
    threshold = serializers.FloatField(allow_null=True)
    detail = serializers.CharField(allow_blank=True)
    seconds = serializers.FloatField()
