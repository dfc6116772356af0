"""Offline data collection per node and the data-richness checks.

A dataset holds sampled known inputs, outputs, output derivatives,
states, and state derivatives, one column per sample.  The ground-truth
unknown-input samples are retained for validation oracles only; the
design path must never read them (see ``NodeDataset.design_view``).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from ._csvio import read_csv, write_csv
from .errors import DimensionError, ExcitationError, OracleUnavailableError
from .linalg import numerical_rank, singular_values, rank_threshold
from .plant import PlantModel, simulate
from .signals import PiecewiseConstantRandom

DEFAULT_SAMPLE_INTERVAL = 0.1
DEFAULT_SUBSTEPS = 20


@dataclass(frozen=True)
class NodeDataset:
    """Offline data matrices for one node, channel-major (dim x N)."""

    U: np.ndarray
    Y: np.ndarray
    Ydot: np.ndarray
    X: np.ndarray
    Xdot: np.ndarray
    sample_times: np.ndarray
    W_validation: np.ndarray | None = None
    node_index: int = 0
    seed: int | None = None

    def __post_init__(self):
        n = self.X.shape[1]
        for name in ("U", "Y", "Ydot", "X", "Xdot"):
            m = getattr(self, name)
            if m.ndim != 2 or m.shape[1] != n:
                raise DimensionError(f"{name} must have one column per sample ({n})")
        if self.Y.shape != self.Ydot.shape or self.X.shape != self.Xdot.shape:
            raise DimensionError("Y/Ydot and X/Xdot must have matching shapes")
        if len(self.sample_times) != n:
            raise DimensionError("one sample time per column is required")

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def n_m(self) -> int:
        return self.U.shape[0]

    @property
    def n_y(self) -> int:
        return self.Y.shape[0]

    @property
    def n_x(self) -> int:
        return self.X.shape[0]

    def design_view(self) -> "NodeDataset":
        """Copy without the ground-truth unknown-input samples."""
        return replace(self, W_validation=None)


@dataclass(frozen=True)
class RankReport:
    ok: bool
    rank: int
    required: int
    singular_values: np.ndarray


def check_excitation_rank(ds: NodeDataset, multiplier: float | None = None) -> RankReport:
    """Full-row-rank test of the stacked [U; W; X] data matrix.

    This is a generation-time oracle: it needs the ground-truth unknown
    inputs, which the design path never sees.
    """
    if ds.W_validation is None:
        raise OracleUnavailableError(
            "rank check needs W_validation; it is absent from this dataset")
    stack = np.vstack([ds.U, ds.W_validation, ds.X])
    required = stack.shape[0]
    sv = singular_values(stack)
    rank = int(np.sum(sv > rank_threshold(sv, stack.shape, multiplier)))
    return RankReport(ok=rank == required, rank=rank, required=required, singular_values=sv)


def check_compatibility(ds: NodeDataset, sample, tol: float = 1e-8) -> tuple[bool, float]:
    """Membership of one online sample in the span of the offline data.

    ``sample`` is the tuple (u_i, y_i, ydot_i, x, xdot).  The residual is
    the norm of the least-squares projection error, relative to the
    sample norm (floored at one).  For data collected from the true
    plant, every genuine online sample of that plant must pass.
    """
    u, y, ydot, x, xdot = (np.asarray(v, dtype=float).reshape(-1) for v in sample)
    stack = np.vstack([ds.U, ds.Y, ds.Ydot, ds.X, ds.Xdot])
    v = np.concatenate([u, y, ydot, x, xdot])
    if v.size != stack.shape[0]:
        raise DimensionError(f"sample has {v.size} entries, dataset rows {stack.shape[0]}")
    coeff, *_ = np.linalg.lstsq(stack, v, rcond=None)
    residual = float(np.linalg.norm(v - stack @ coeff) / max(np.linalg.norm(v), 1.0))
    return residual < tol, residual


def _default_excitation(model: PlantModel, hold: float, u_amplitude: float,
                        d_amplitude: float, seeds) -> tuple[list, list]:
    inputs = [PiecewiseConstantRandom(-u_amplitude, u_amplitude, hold, seeds[k])
              for k in range(model.n_u)]
    dist = [PiecewiseConstantRandom(-d_amplitude, d_amplitude, hold, seeds[model.n_u + k])
            for k in range(model.n_d)]
    return inputs, dist


def _deficient_block(ds: NodeDataset, multiplier) -> str:
    r = ds.W_validation.shape[0]
    if numerical_rank(ds.U, multiplier) < ds.n_m:
        return "known-input rows U"
    if numerical_rank(np.vstack([ds.U, ds.W_validation]), multiplier) < ds.n_m + r:
        return "unknown-input rows W"
    return "state rows X"


def collect(model: PlantModel, i: int, N: int, *, seed: int,
            sample_interval: float = DEFAULT_SAMPLE_INTERVAL,
            substeps: int = DEFAULT_SUBSTEPS, restarts: int = 1,
            jitter: bool = False, u_amplitude: float = 1.0,
            d_amplitude: float = 0.1, noise_amplitude: float = 0.0,
            excitation=None, x0=None, max_retries: int = 8,
            rank_multiplier: float | None = None) -> NodeDataset:
    """Collect an offline dataset for node ``i`` from simulated trajectories.

    Samples come from ``restarts`` trajectory segments with fresh random
    initial states; the default excitation holds independent uniform
    values on every input and disturbance channel over each sampling
    interval.  Retries with a fresh seed offset until the stacked
    [U; W; X] matrix reaches full row rank.

    Parameters
    ----------
    excitation : optional (inputs, disturbances) generator lists; when
        given, retries reuse them verbatim.
    x0 : optional fixed initial state; default draws uniform in [-1, 1].
    jitter : sample at random grid instants instead of the uniform grid.
    noise_amplitude : additive uniform output noise on Y and Ydot, for
        robustness experiments only.
    """
    if not 0 <= i < model.M:
        raise IndexError(f"node index {i} out of range for M={model.M}")
    node = model.nodes[i]
    n_min = node.n_m + node.r + model.n_x
    if N < n_min:
        raise ExcitationError(
            f"node {i}: N={N} is below n_m + r + n_x = {n_min}; "
            "the excitation rank condition cannot hold")
    if restarts < 1 or restarts > N:
        raise DimensionError("restarts must be between 1 and N")

    dt = sample_interval / substeps
    per_seg = [N // restarts + (1 if k < N % restarts else 0) for k in range(restarts)]
    last = None
    for attempt in range(max_retries):
        ss = np.random.SeedSequence([int(seed), int(i), attempt])
        children = ss.spawn(3 + model.n_u + model.n_d)
        rng_x0 = np.random.default_rng(children[0])
        rng_pick = np.random.default_rng(children[1])
        rng_noise = np.random.default_rng(children[2])
        if excitation is not None:
            inputs, dist = excitation
        else:
            inputs, dist = _default_excitation(model, sample_interval, u_amplitude,
                                               d_amplitude, children[3:])
        cols_u, cols_y, cols_yd, cols_x, cols_xd, cols_w, times = [], [], [], [], [], [], []
        for n_k in per_seg:
            x_init = np.asarray(x0, dtype=float) if x0 is not None \
                else rng_x0.uniform(-1.0, 1.0, model.n_x)
            grid = 2 * n_k * substeps if jitter else n_k * substeps
            traj = simulate(model, x_init, inputs, dist,
                            horizon=grid * dt, dt=dt)
            if jitter:
                idx = np.sort(rng_pick.choice(grid + 1, size=n_k, replace=False))
            else:
                idx = np.arange(n_k) * substeps
            cols_u.append(traj.known_inputs(i)[idx])
            cols_y.append(traj.outputs(i)[idx])
            cols_yd.append(traj.output_derivatives(i)[idx])
            cols_x.append(traj.x[idx])
            cols_xd.append(traj.xdot[idx])
            cols_w.append(traj.unknown_inputs(i)[idx])
            times.append(traj.t[idx])
        Y = np.vstack(cols_y).T
        Ydot = np.vstack(cols_yd).T
        if noise_amplitude > 0:
            Y = Y + rng_noise.uniform(-noise_amplitude, noise_amplitude, Y.shape)
            Ydot = Ydot + rng_noise.uniform(-noise_amplitude, noise_amplitude, Ydot.shape)
        ds = NodeDataset(U=np.vstack(cols_u).T, Y=Y, Ydot=Ydot,
                         X=np.vstack(cols_x).T, Xdot=np.vstack(cols_xd).T,
                         W_validation=np.vstack(cols_w).T,
                         sample_times=np.concatenate(times),
                         node_index=i, seed=int(seed))
        if check_excitation_rank(ds, rank_multiplier).ok:
            return ds
        last = ds
    raise ExcitationError(
        f"node {i}: data remain rank-deficient after {max_retries} retries; "
        f"deficient block: {_deficient_block(last, rank_multiplier)}")


_FILES = ("U", "Y", "Ydot", "X", "Xdot")
_PREFIX = {"U": "u", "Y": "y", "Ydot": "ydot", "X": "x", "Xdot": "xdot"}


def save_dataset(ds: NodeDataset, out_dir: str) -> None:
    """Serialize to CSV files plus a JSON sidecar (W is never written)."""
    os.makedirs(out_dir, exist_ok=True)
    for name in _FILES:
        m = getattr(ds, name)
        header = [f"{_PREFIX[name]}{k + 1}" for k in range(m.shape[0])]
        write_csv(os.path.join(out_dir, f"{name}.csv"), header, m.T)
    write_csv(os.path.join(out_dir, "times.csv"), ["t"], ds.sample_times.reshape(-1, 1))
    meta = {"N": ds.N, "n_m": ds.n_m, "n_x": ds.n_x, "n_y": ds.n_y,
            "node_index": ds.node_index, "seed": ds.seed}
    with open(os.path.join(out_dir, "meta.json"), "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(data_dir: str) -> NodeDataset:
    with open(os.path.join(data_dir, "meta.json")) as fh:
        meta = json.load(fh)
    dims = {"U": meta["n_m"], "Y": meta["n_y"], "Ydot": meta["n_y"],
            "X": meta["n_x"], "Xdot": meta["n_x"]}
    arrays = {name: read_csv(os.path.join(data_dir, f"{name}.csv"), dims[name]).T
              for name in _FILES}
    times = read_csv(os.path.join(data_dir, "times.csv"), 1).ravel()
    return NodeDataset(U=arrays["U"], Y=arrays["Y"], Ydot=arrays["Ydot"],
                       X=arrays["X"], Xdot=arrays["Xdot"],
                       sample_times=times, W_validation=None,
                       node_index=meta["node_index"], seed=meta["seed"])
