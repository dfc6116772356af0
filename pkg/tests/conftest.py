"""Shared fixtures: the five-node benchmark and random test systems."""
from __future__ import annotations

import numpy as np
import pytest

from dduio import benchmark
from dduio.datagen import NodeDataset, collect
from dduio.design_data import analyze_datasets, build_data_driven_gains
from dduio.design_model import build_model_based_gains
from dduio.plant import PlantModel

BENCH_SEED = 20240100


@pytest.fixture(scope="session")
def bench_model():
    return benchmark.two_mass_spring()


@pytest.fixture(scope="session")
def bench_graph():
    return benchmark.benchmark_graph()


@pytest.fixture(scope="session")
def bench_datasets(bench_model):
    return [collect(bench_model, i, benchmark.N_SAMPLES, seed=BENCH_SEED + i)
            for i in range(bench_model.M)]


@pytest.fixture(scope="session")
def model_gains(bench_model, bench_graph):
    return build_model_based_gains(bench_model, bench_graph,
                                   gamma_override=benchmark.GAMMA)


@pytest.fixture(scope="session")
def data_gains(bench_datasets, bench_graph):
    reports, leader = analyze_datasets([ds.design_view() for ds in bench_datasets])
    assert leader is not None
    return build_data_driven_gains(reports, bench_graph,
                                   gamma_override=benchmark.GAMMA)


def pointwise_dataset(A, B_m, B_p, C, N, seed, node_index=0) -> NodeDataset:
    """Dataset of N single-sample trajectories (fresh state and inputs each).

    Every column satisfies the node dynamics exactly, which is all the
    data-driven theory requires of offline samples.
    """
    A = np.asarray(A, dtype=float)
    B_m = np.asarray(B_m, dtype=float).reshape(A.shape[0], -1)
    B_p = np.asarray(B_p, dtype=float).reshape(A.shape[0], -1)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    rng = np.random.default_rng(seed)
    n_x, n_m, r = A.shape[0], B_m.shape[1], B_p.shape[1]
    X = rng.uniform(-1, 1, (n_x, N))
    U = rng.uniform(-1, 1, (n_m, N))
    W = rng.uniform(-1, 1, (r, N))
    Xdot = A @ X + B_m @ U + B_p @ W
    return NodeDataset(U=U, Y=C @ X, Ydot=C @ Xdot, X=X, Xdot=Xdot,
                       W_validation=W, sample_times=np.zeros(N),
                       node_index=node_index, seed=seed)


def single_node_model(A, B_m, B_p, C) -> PlantModel:
    """Wrap one node's matrices as a one-node plant (no disturbance block)."""
    A = np.asarray(A, dtype=float)
    B_m = np.asarray(B_m, dtype=float).reshape(A.shape[0], -1)
    B_p = np.asarray(B_p, dtype=float).reshape(A.shape[0], -1)
    B = np.hstack([B_m, B_p])
    known = tuple(range(B_m.shape[1]))
    return PlantModel.assemble(A, B, np.zeros((A.shape[0], 0)), [(C, known)])


def random_node_system(rng: np.random.Generator, kind: str):
    """Random (A, B_m, B_p, C) of one of four constructed families.

    "generic": dense random, solvable and detectable almost surely.
    "annihilating": C has an exact zero column aligned with one
        unknown-input direction, so the decoupling condition fails.
    "hidden-unstable"/"hidden-stable": no unknown input; the first mode
        is invisible to C and is unstable resp. stable, giving an
        undetectable resp. detectable-but-unobservable pair.
    """
    n_x = int(rng.integers(2, 6))
    n_m = int(rng.integers(0, 3))
    if kind == "generic":
        r = int(rng.integers(0, 3))
        n_y = int(rng.integers(max(r, 1), n_x + 2))
        a = rng.normal(size=(n_x, n_x))
        c = rng.normal(size=(n_y, n_x))
        b_p = rng.normal(size=(n_x, r))
    elif kind == "annihilating":
        r = int(rng.integers(1, 3))
        n_y = int(rng.integers(r, n_x + 2))
        a = rng.normal(size=(n_x, n_x))
        b_p = rng.normal(size=(n_x, r))
        b_p[:, 0] = 0.0
        b_p[0, 0] = 1.0
        c = rng.normal(size=(n_y, n_x))
        c[:, 0] = 0.0
    elif kind in ("hidden-unstable", "hidden-stable"):
        r = 0
        n_y = int(rng.integers(1, n_x + 1))
        lam = rng.uniform(0.2, 1.5) if kind == "hidden-unstable" \
            else -rng.uniform(0.3, 1.0)
        a = np.zeros((n_x, n_x))
        a[0, 0] = lam
        rest = rng.normal(size=(n_x - 1, n_x - 1))
        a[1:, 1:] = rest - (np.max(np.linalg.eigvals(rest).real) + 0.4) \
            * np.eye(n_x - 1)
        c = np.hstack([np.zeros((n_y, 1)), rng.normal(size=(n_y, n_x - 1))])
        b_p = np.zeros((n_x, 0))
    else:
        raise ValueError(kind)
    b_m = rng.normal(size=(n_x, n_m))
    return a, b_m, b_p, c


def random_connected_graph(rng: np.random.Generator, m: int):
    """Random spanning tree plus extra random edges, random weights."""
    from dduio.network import SensorGraph
    adj = np.zeros((m, m))
    order = rng.permutation(m)
    for k in range(1, m):
        i, j = order[k], order[rng.integers(0, k)]
        adj[i, j] = adj[j, i] = rng.uniform(0.2, 2.0)
    extra = rng.integers(0, m)
    for _ in range(extra):
        i, j = rng.integers(0, m, 2)
        if i != j:
            adj[i, j] = adj[j, i] = rng.uniform(0.2, 2.0)
    return SensorGraph(adj)
