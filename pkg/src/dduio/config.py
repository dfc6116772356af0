"""Experiment configuration: schema, validation, and resolution.

One YAML file drives the whole pipeline.  Unknown keys are rejected and
every default is recorded into the resolved configuration that commands
write next to their outputs, so any run is reproducible from its
artifacts alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from . import benchmark
from .errors import ConfigError
from .network import GENERATORS, SensorGraph, from_edges
from .plant import PlantModel
from .signals import AutonomousLinear, PiecewiseConstantRandom, Sinusoid, Zero

_SIGNAL_KINDS = ("sinusoid", "autonomous-linear", "piecewise-constant-random", "zero")


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}; "
                          f"allowed: {sorted(allowed)}")


def _matrix(value, where: str) -> np.ndarray:
    try:
        m = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric matrix: {exc}") from exc
    return m


@dataclass(frozen=True)
class SignalSpec:
    """Declarative form of one scalar signal channel."""

    kind: str
    params: dict = field(default_factory=dict)

    def build(self, seed, default_hold: float):
        p = self.params
        if self.kind == "zero":
            return Zero()
        if self.kind == "sinusoid":
            return Sinusoid(p["amplitude"], p["frequency"], p.get("phase", 0.0))
        if self.kind == "autonomous-linear":
            initial = p["initial"]
            if isinstance(initial, dict):
                lo, hi = initial["uniform"]
                k = np.atleast_2d(np.asarray(p["transition"], dtype=float)).shape[0]
                initial = np.random.default_rng(seed).uniform(lo, hi, k)
            return AutonomousLinear(p["transition"], initial, p.get("component", 0))
        if self.kind == "piecewise-constant-random":
            hold = p.get("hold") or default_hold
            return PiecewiseConstantRandom(p["low"], p["high"], hold, seed)
        raise ConfigError(f"unknown signal kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def _parse_signal(spec: dict, where: str) -> SignalSpec:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where}: a signal needs a 'kind' field")
    kind = spec["kind"]
    if kind not in _SIGNAL_KINDS:
        raise ConfigError(f"{where}: unknown signal kind {kind!r}; choose from {_SIGNAL_KINDS}")
    allowed = {
        "zero": {"kind"},
        "sinusoid": {"kind", "amplitude", "frequency", "phase"},
        "autonomous-linear": {"kind", "transition", "initial", "component"},
        "piecewise-constant-random": {"kind", "low", "high", "hold"},
    }[kind]
    _require_keys(spec, allowed, where)
    return SignalSpec(kind=kind, params={k: v for k, v in spec.items() if k != "kind"})


@dataclass(frozen=True)
class PlantSection:
    preset: str | None
    A: np.ndarray
    B: np.ndarray
    E_dist: np.ndarray
    node_specs: tuple
    inputs: tuple[SignalSpec, ...]
    disturbances: tuple[SignalSpec, ...]

    def build_model(self) -> PlantModel:
        return PlantModel.assemble(self.A, self.B, self.E_dist, list(self.node_specs))


def _preset_plant() -> PlantSection:
    inputs = (
        SignalSpec("autonomous-linear", {
            "transition": [[benchmark.KNOWN_INPUT_DECAY]],
            "initial": {"uniform": [0.0, 1.0]}}),
        SignalSpec("sinusoid", {
            "amplitude": benchmark.UNKNOWN_AMPLITUDE,
            "frequency": benchmark.UNKNOWN_FREQUENCY,
            "phase": benchmark.UNKNOWN_PHASE}),
    )
    disturbances = (
        SignalSpec("piecewise-constant-random", {
            "low": -benchmark.DISTURBANCE_RANGE,
            "high": benchmark.DISTURBANCE_RANGE,
            "hold": None}),
    )
    node_specs = tuple(
        (benchmark.C_NODES[i], (0,), np.array([benchmark.UNKNOWN_SCALES[i]]))
        for i in range(5))
    return PlantSection(preset="two-mass-spring",
                        A=benchmark.A,
                        B=np.hstack([benchmark.B_KNOWN, benchmark.B_UNKNOWN]),
                        E_dist=benchmark.E_DIST,
                        node_specs=node_specs,
                        inputs=inputs, disturbances=disturbances)


def _parse_plant(section: dict) -> PlantSection:
    _require_keys(section, {"preset", "A", "B", "E", "nodes", "inputs", "disturbances"},
                  "plant")
    if section.get("preset"):
        if section["preset"] != "two-mass-spring":
            raise ConfigError(f"unknown plant preset {section['preset']!r}")
        extra = set(section) - {"preset"}
        if extra:
            raise ConfigError(f"plant preset does not accept extra keys {sorted(extra)}")
        return _preset_plant()
    for key in ("A", "B", "E", "nodes", "inputs"):
        if key not in section:
            raise ConfigError(f"plant: explicit form requires key {key!r}")
    a = _matrix(section["A"], "plant.A")
    b = _matrix(section["B"], "plant.B")
    e = _matrix(section["E"], "plant.E")
    if e.size == 0:
        e = np.zeros((a.shape[0], 0))
    elif e.ndim == 1:
        e = e.reshape(-1, 1)
    node_specs = []
    for k, node in enumerate(section["nodes"]):
        _require_keys(node, {"C", "known_input_indices", "unknown_scales"}, f"plant.nodes[{k}]")
        scales = node.get("unknown_scales")
        node_specs.append((_matrix(node["C"], f"plant.nodes[{k}].C"),
                           tuple(node["known_input_indices"]),
                           None if scales is None else np.asarray(scales, dtype=float)))
    inputs = tuple(_parse_signal(s, f"plant.inputs[{k}]")
                   for k, s in enumerate(section["inputs"]))
    dist = tuple(_parse_signal(s, f"plant.disturbances[{k}]")
                 for k, s in enumerate(section.get("disturbances", [])))
    if len(inputs) != b.shape[1]:
        raise ConfigError(f"plant: {b.shape[1]} input channels need {b.shape[1]} "
                          f"input signals, got {len(inputs)}")
    if len(dist) != e.shape[1]:
        raise ConfigError(f"plant: {e.shape[1]} disturbance channels need signals, "
                          f"got {len(dist)}")
    fixed = []
    for c, known, scales in node_specs:
        if scales is None:
            scales = np.ones(b.shape[1] - len(known))
        fixed.append((c, known, scales))
    return PlantSection(preset=None, A=a, B=b, E_dist=e, node_specs=tuple(fixed),
                        inputs=inputs, disturbances=dist)


@dataclass(frozen=True)
class GraphSection:
    generator: str | None
    size: int
    edges: tuple | None
    weight: float = 1.0

    def build_graph(self) -> SensorGraph:
        if self.generator is not None:
            return GENERATORS[self.generator](self.size, self.weight)
        return from_edges(self.size, self.edges)


def _parse_graph(section: dict) -> GraphSection:
    _require_keys(section, {"generator", "size", "edges", "weight"}, "graph")
    if section.get("edges") is not None:
        if "size" not in section:
            raise ConfigError("graph: explicit edges need 'size'")
        return GraphSection(generator=None, size=int(section["size"]),
                            edges=tuple(tuple(e) for e in section["edges"]))
    gen = section.get("generator") or "ring"
    if gen not in GENERATORS:
        raise ConfigError(f"graph: unknown generator {gen!r}; choose from {sorted(GENERATORS)}")
    return GraphSection(generator=gen, size=int(section.get("size", 5)),
                        edges=None, weight=float(section.get("weight", 1.0)))


@dataclass(frozen=True)
class DataSection:
    N: int = benchmark.N_SAMPLES
    sample_interval: float = 0.1
    substeps: int = 20
    restarts: int = 1
    jitter: bool = False
    u_amplitude: float = 1.0
    d_amplitude: float = 0.1
    noise_amplitude: float = 0.0


@dataclass(frozen=True)
class DesignSection:
    decay: float = 0.5
    gamma_margin: float = 0.1
    gamma_override: float | None = None
    rank_multiplier: float = 1e3
    residual_rtol: float = 1e-6
    # The identification baseline is granted the unknown-input coupling
    # matrices; "plant" reads them from the plant section, "none" denies
    # the grant (the baseline then refuses to run).
    grant_couplings: str = "plant"


@dataclass(frozen=True)
class RunSection:
    horizon: float = benchmark.HORIZON
    dt: float = 1e-3
    z0: str = "zero"
    x0: tuple | None = None
    x0_range: tuple[float, float] = (-1.0, 1.0)
    disturbance: bool = True


@dataclass(frozen=True)
class CompareSection:
    K: int = 10
    methods: tuple[str, ...] = ("model", "data", "id")


def _parse_simple(section: dict, cls, where: str):
    fields = {f for f in cls.__dataclass_fields__}
    _require_keys(section, fields, where)
    kwargs = {}
    for key, value in section.items():
        if key in ("methods", "x0", "x0_range"):
            value = tuple(value) if value is not None else None
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    plant: PlantSection
    graph: GraphSection
    data: DataSection
    design: DesignSection
    run: RunSection
    compare: CompareSection

    def build_model(self) -> PlantModel:
        return self.plant.build_model()

    def build_graph(self) -> SensorGraph:
        return self.graph.build_graph()

    def build_inputs(self, seed) -> list:
        children = np.random.SeedSequence([int(seed), 1]).spawn(len(self.plant.inputs))
        return [spec.build(children[k], self.run.dt)
                for k, spec in enumerate(self.plant.inputs)]

    def build_disturbances(self, seed, active: bool | None = None) -> list:
        if active is None:
            active = self.run.disturbance
        if not active:
            return [Zero() for _ in self.plant.disturbances]
        children = np.random.SeedSequence([int(seed), 2]).spawn(
            max(len(self.plant.disturbances), 1))
        return [spec.build(children[k], self.run.dt)
                for k, spec in enumerate(self.plant.disturbances)]

    def draw_x0(self, seed) -> np.ndarray:
        if self.run.x0 is not None:
            return np.asarray(self.run.x0, dtype=float)
        lo, hi = self.run.x0_range
        n_x = self.plant.A.shape[0]
        return np.random.default_rng(np.random.SeedSequence([int(seed), 3])).uniform(lo, hi, n_x)

    def initial_observer_states(self, x0, model, gains) -> np.ndarray:
        if self.run.z0 == "zero":
            return np.zeros((model.M, model.n_x))
        if self.run.z0 == "matched":
            # z_i(0) = x0 - H_i y_i(0) makes the initial estimate exact.
            return np.vstack([x0 - gains.H[i] @ (model.nodes[i].C @ x0)
                              for i in range(model.M)])
        raise ConfigError(f"unknown z0 policy {self.run.z0!r}")

    def resolved_dict(self) -> dict:
        # Emitted in the explicit form (presets expanded) so the resolved
        # file reloads through the same parser and reproduces the run.
        plant = {
            "preset": None,
            "A": self.plant.A.tolist(),
            "B": self.plant.B.tolist(),
            "E": self.plant.E_dist.tolist(),
            "nodes": [{"C": c.tolist(), "known_input_indices": list(known),
                       "unknown_scales": np.asarray(scales).tolist()}
                      for c, known, scales in self.plant.node_specs],
            "inputs": [s.to_dict() for s in self.plant.inputs],
            "disturbances": [s.to_dict() for s in self.plant.disturbances],
        }
        graph = {"generator": self.graph.generator, "size": self.graph.size,
                 "weight": self.graph.weight,
                 "edges": None if self.graph.edges is None else
                 [list(e) for e in self.graph.edges]}
        def section_dict(obj):
            out = {}
            for name in obj.__dataclass_fields__:
                v = getattr(obj, name)
                out[name] = list(v) if isinstance(v, tuple) else v
            return out
        return {
            "seed": self.seed,
            "plant": plant,
            "graph": graph,
            "data": section_dict(self.data),
            "design": section_dict(self.design),
            "run": section_dict(self.run),
            "compare": section_dict(self.compare),
        }


def parse_config(raw: dict) -> ExperimentConfig:
    if raw is None:
        raw = {}
    _require_keys(raw, {"seed", "plant", "graph", "data", "design", "run", "compare"},
                  "top level")
    plant = _parse_plant(raw.get("plant", {"preset": "two-mass-spring"}))
    graph = _parse_graph(raw.get("graph", {}))
    return ExperimentConfig(
        seed=int(raw.get("seed", 0)),
        plant=plant,
        graph=graph,
        data=_parse_simple(raw.get("data", {}), DataSection, "data"),
        design=_parse_simple(raw.get("design", {}), DesignSection, "design"),
        run=_parse_simple(raw.get("run", {}), RunSection, "run"),
        compare=_parse_simple(raw.get("compare", {}), CompareSection, "compare"),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return parse_config(raw)


def write_resolved(config: ExperimentConfig, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        yaml.safe_dump(config.resolved_dict(), fh, sort_keys=True)
