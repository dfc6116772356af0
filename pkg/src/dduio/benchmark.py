"""Two-mass-spring benchmark: plant, sensor network, and online signals.

Five heterogeneous sensor nodes observe a four-state two-mass-spring
system driven by one shared known input, one input channel unknown to
every node, and a scalar process disturbance.  Each node views the
unknown input column through its own scaling; the scaled column and the
reciprocally scaled signal describe the same physical drive.
"""
from __future__ import annotations

import numpy as np

from .network import SensorGraph, ring
from .plant import PlantModel
from .signals import AutonomousLinear, PiecewiseConstantRandom, Sinusoid, Zero

A = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [-5.3333, 0.0, 2.6667, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [2.6667, 0.0, -2.6667, 0.0],
])
B_KNOWN = np.array([[0.0], [1.3333], [0.0], [0.0]])
B_UNKNOWN = np.array([[1.0], [1.0], [1.0], [1.0]])
E_DIST = np.array([[0.1], [0.0], [0.1], [0.0]])

# Per-node scaling of the shared unknown input column.
UNKNOWN_SCALES = (1.0, 0.5, 0.33, 0.25, 0.2)

C_NODES = (
    np.array([[1, 0, 1, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1]], dtype=float),
    np.array([[0, 1, 0, 0], [1, 0, 1, 0], [0, 0, 0, 1], [0, 0, 1, 1]], dtype=float),
    np.array([[0, 0, 1, 1], [0, 1, 0, 0], [1, 0, 1, 0], [0, 1, 1, 0]], dtype=float),
    np.array([[1, 0, 1, 1], [0, 1, 0, 0], [0, 0, 1, 1], [1, 0, 1, 0]], dtype=float),
    np.array([[1, 0, 1, 0], [0, 0, 1, 1], [0, 0, 1, 1], [0, 0, 0, 1]], dtype=float),
)

# The known input follows the sampled recursion u(k+1) = 0.5 u(k); its
# continuous interpolation is the autonomous system u' = ln(0.5) u.
KNOWN_INPUT_DECAY = float(np.log(0.5))

UNKNOWN_AMPLITUDE = 0.2
UNKNOWN_FREQUENCY = 0.2
UNKNOWN_PHASE = 2.0

DISTURBANCE_RANGE = 0.1
GAMMA = 5.0
N_SAMPLES = 50
HORIZON = 40.0


def two_mass_spring() -> PlantModel:
    """The five-node benchmark plant."""
    b = np.hstack([B_KNOWN, B_UNKNOWN])
    specs = [(C_NODES[i], (0,), np.array([UNKNOWN_SCALES[i]])) for i in range(5)]
    return PlantModel.assemble(A, b, E_DIST, specs)


def benchmark_graph() -> SensorGraph:
    """Default communication topology: the unit-weight five-ring."""
    return ring(5)


def online_inputs(seed: int, u0: float | None = None):
    """Known-input generators for an online run.

    The initial value is drawn uniformly from [0, 1] unless given.
    """
    if u0 is None:
        u0 = float(np.random.default_rng(seed).uniform(0.0, 1.0))
    return [AutonomousLinear([[KNOWN_INPUT_DECAY]], [u0]),
            Sinusoid(UNKNOWN_AMPLITUDE, UNKNOWN_FREQUENCY, UNKNOWN_PHASE)]


def online_disturbances(seed: int, dt_hold: float, active: bool = True):
    """Disturbance generators: uniform noise held per integration step."""
    if not active:
        return [Zero()]
    return [PiecewiseConstantRandom(-DISTURBANCE_RANGE, DISTURBANCE_RANGE,
                                    dt_hold, seed)]
