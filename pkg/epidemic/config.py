"""
Frozen scenario configuration objects.

These are what ``ScenarioSerializer.save()`` returns; the runner only ever sees
validated instances.
"""
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np

from .exceptions import OutOfRange
from .mesh import KernelSpec

TASKS = ('spectrum', 'equilibrium', 'simulate', 'sweep', 'limits')
RATE_KINDS = ('constant', 'cosine', 'gaussian_bump', 'table')
INITIAL_KINDS = ('uniform', 'random', 'bump')
SWEEP_PARAMETERS = ('d_I', 'd_S')


@dataclass(frozen=True)
class MeshSpec:
    a: float
    b: float
    n: int


@dataclass(frozen=True)
class RateSpec:
    """
    One rate field.

    constant:       value
    cosine:         base + amplitude * cos(frequency * pi * x)
    gaussian_bump:  base + height * exp(-((x - center) / width)^2)
    table:          node values, linearly interpolated from ``x`` (default
                    evenly spaced over [a, b]) when the count differs from n
    """
    kind: str
    value: Optional[float] = None
    base: Optional[float] = None
    amplitude: Optional[float] = None
    frequency: Optional[float] = None
    height: Optional[float] = None
    width: Optional[float] = None
    center: Optional[float] = None
    values: Optional[Tuple[float, ...]] = None
    x: Optional[Tuple[float, ...]] = None

    def evaluate(self, mesh):
        nodes = mesh.nodes
        if self.kind == 'constant':
            return mesh.constant(self.value)
        if self.kind == 'cosine':
            return self.base + self.amplitude * np.cos(self.frequency * np.pi * nodes)
        if self.kind == 'gaussian_bump':
            return self.base + self.height * np.exp(-((nodes - self.center) / self.width) ** 2)

        values = np.asarray(self.values, dtype=float)
        if self.x is None and values.size == mesh.n:
            return values.copy()
        x = np.linspace(mesh.a, mesh.b, values.size) if self.x is None else np.asarray(self.x, dtype=float)
        if nodes[0] < x[0] or nodes[-1] > x[-1]:
            raise OutOfRange(f'Table spans [{x[0]:g}, {x[-1]:g}] but mesh nodes span '
                             f'[{nodes[0]:g}, {nodes[-1]:g}].', code='table_range')
        return np.interp(nodes, x, values)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str = 'd_I'
    grid: Optional[Tuple[float, ...]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = None
    spacing: str = 'log'

    def points(self):
        if self.grid is not None:
            return np.asarray(self.grid, dtype=float)
        if self.spacing == 'log':
            return np.logspace(self.start, self.stop, self.num)
        return np.linspace(self.start, self.stop, self.num)


@dataclass(frozen=True)
class InitialSpec:
    kind: str = 'uniform'
    infected_fraction: float = 0.1
    center: Optional[float] = None
    width: Optional[float] = None

    def as_dict(self):
        return {key: value for key, value in asdict(self).items() if value is not None}


@dataclass(frozen=True)
class SimulateSpec:
    t_end: float
    dt: Optional[float] = None
    initial: InitialSpec = field(default_factory=InitialSpec)
    seed: Optional[int] = None
    snapshots: bool = False


@dataclass(frozen=True)
class LimitsSpec:
    grid: Tuple[float, ...] = (10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class ScenarioConfig:
    mesh: MeshSpec
    kernel: KernelSpec
    beta: RateSpec
    gamma: RateSpec
    d_S: float
    d_I: float
    N: float
    task: str
    name: str = ''
    sweep: Optional[SweepSpec] = None
    simulate: Optional[SimulateSpec] = None
    limits: Optional[LimitsSpec] = None
    checks: bool = False
    workers: int = 1
