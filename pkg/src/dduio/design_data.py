"""Purely data-driven observer design from offline datasets.

All quantities come from the stacked data matrices; the true plant
matrices are never consulted.  The rank tests certify, from data alone,
that the decoupling equations are solvable and that a detectable leader
exists; the construction then recovers the observer blocks from the
linear data equation  Xdot = [T_u  T_y  T_x] [U; Ydot; X].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DesignError, PreconditionError, RankError
from .datagen import NodeDataset
from .design_model import (DEFAULT_DECAY, DEFAULT_GAMMA_MARGIN, assemble_from_blocks,
                           decoupling_gain, DuioGains)
from .linalg import numerical_rank, pbh_detectable, pinv, singular_values
from .network import SensorGraph

PENCIL_POINTS = 16
PENCIL_SEED = 20240917
DEFAULT_RESIDUAL_RTOL = 1e-6


def check_data_solvability(ds: NodeDataset,
                           multiplier: float | None = None) -> tuple[bool, int, int]:
    """Data-side test of the decoupling solvability condition.

    Returns (holds, rank of [U; Ydot; X], rank of [U; X; Xdot]); the two
    ranks agree exactly when rank(C B_p) = rank(B_p) on the underlying
    plant.
    """
    lhs = numerical_rank(np.vstack([ds.U, ds.Ydot, ds.X]), multiplier)
    rhs = numerical_rank(np.vstack([ds.U, ds.X, ds.Xdot]), multiplier)
    return lhs == rhs, lhs, rhs


def infer_unknown_rank(ds: NodeDataset, multiplier: float | None = None) -> int:
    """Number of unknown-input channels seen by the data.

    rank([U; X; Xdot]) - n_m - n_x, never negative.
    """
    rank = numerical_rank(np.vstack([ds.U, ds.X, ds.Xdot]), multiplier)
    return max(rank - ds.n_m - ds.n_x, 0)


def recover_output_map(ds: NodeDataset, multiplier: float | None = None) -> np.ndarray:
    """C = Y X^+; requires the state data to have full row rank."""
    if numerical_rank(ds.X, multiplier) < ds.n_x:
        raise RankError("state data X is row-rank deficient; cannot recover the output map")
    return ds.Y @ pinv(ds.X, multiplier)


@dataclass(frozen=True)
class DataEquationSolution:
    """Minimum-norm solution of Xdot = [T_u T_y T_x] [U; Ydot; X].

    ``family(Z)`` returns the affine family member min-norm + Z (I - S S^+);
    every member solves the same equation.
    """

    T_u: np.ndarray
    T_y: np.ndarray
    T_x: np.ndarray
    residual: float
    rank_Ty: int
    _stack: np.ndarray
    _null_projector: np.ndarray

    def family(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        Z = np.asarray(Z, dtype=float)
        t = np.hstack([self.T_u, self.T_y, self.T_x]) + Z @ self._null_projector
        n_m = self.T_u.shape[1]
        n_y = self.T_y.shape[1]
        return t[:, :n_m], t[:, n_m:n_m + n_y], t[:, n_m + n_y:]


def solve_data_equation(ds: NodeDataset, rtol: float = DEFAULT_RESIDUAL_RTOL,
                        multiplier: float | None = None) -> DataEquationSolution:
    """Minimum-norm blocks, Frobenius residual, and the solution family."""
    stack = np.vstack([ds.U, ds.Ydot, ds.X])
    stack_pinv = pinv(stack, multiplier)
    t = ds.Xdot @ stack_pinv
    residual = float(np.linalg.norm(ds.Xdot - t @ stack))
    scale = max(np.linalg.norm(ds.Xdot), 1.0)
    if residual > rtol * scale:
        raise ConsistencyError(
            f"data equation residual {residual:.3e} exceeds {rtol:.1e} x ||Xdot||; "
            "data are not consistent with one LTI system of this structure")
    null_proj = np.eye(stack.shape[0]) - stack @ stack_pinv
    n_m, n_y = ds.n_m, ds.n_y
    return DataEquationSolution(
        T_u=t[:, :n_m], T_y=t[:, n_m:n_m + n_y], T_x=t[:, n_m + n_y:],
        residual=residual, rank_Ty=numerical_rank(t[:, n_m:n_m + n_y], multiplier),
        _stack=stack, _null_projector=null_proj)


def solve_data_equation_structured(ds: NodeDataset, rtol: float = DEFAULT_RESIDUAL_RTOL,
                                   multiplier: float | None = None):
    """The family member with rank(T_y) equal to the unknown-input rank.

    The span of the unknown-input directions is recovered as the column
    space of Xdot projected onto the orthogonal complement of the rows
    of [U; X]; the output feedthrough built from that span annihilates
    the unknown input, and the remaining blocks follow from a full-rank
    least squares.  On noise-free data this member coincides with the
    blocks the true plant matrices would give.

    Returns (T_u, T_y, T_x, C_recovered, residual, r_inferred).
    """
    solvable, _, _ = check_data_solvability(ds, multiplier)
    if not solvable:
        raise PreconditionError("data solvability rank test failed for this dataset")
    c_rec = recover_output_map(ds, multiplier)
    known = np.vstack([ds.U, ds.X])
    perp = ds.Xdot @ (np.eye(ds.N) - pinv(known, multiplier) @ known)
    r_hat = infer_unknown_rank(ds, multiplier)
    if r_hat > 0:
        basis = np.linalg.svd(perp)[0][:, :r_hat]
    else:
        basis = np.zeros((ds.n_x, 0))
    t_y = decoupling_gain(c_rec, basis)
    eye = np.eye(ds.n_x)
    t_ux = (eye - t_y @ c_rec) @ ds.Xdot @ pinv(known, multiplier)
    t_u, t_x = t_ux[:, :ds.n_m], t_ux[:, ds.n_m:]
    stack = np.vstack([ds.U, ds.Ydot, ds.X])
    residual = float(np.linalg.norm(ds.Xdot - np.hstack([t_u, t_y, t_x]) @ stack))
    scale = max(np.linalg.norm(ds.Xdot), 1.0)
    if residual > rtol * scale:
        raise ConsistencyError(
            f"structured data equation residual {residual:.3e} exceeds {rtol:.1e} x ||Xdot||")
    return t_u, t_y, t_x, c_rec, residual, r_hat


def _pencil_points(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.uniform(0.0, 10.0, count) + 1j * rng.uniform(-10.0, 10.0, count)


def check_data_detectability(ds: NodeDataset, multiplier: float | None = None,
                             tol: float = 1e-8, n_points: int = PENCIL_POINTS,
                             rtol: float = DEFAULT_RESIDUAL_RTOL) -> tuple[bool, np.ndarray]:
    """Data-side detectability test for a candidate leader node.

    The pencil [s X - Xdot; U; Y] must keep rank n_x + n_m + r over the
    closed right half-plane.  The test is made finite by the PBH test on
    the recovered pair at the eigenvalues of the recovered error matrix
    (the only points where the rank can drop), cross-checked by direct
    rank evaluation at randomly drawn points with Re(s) >= 0.
    """
    solvable, _, _ = check_data_solvability(ds, multiplier)
    if not solvable:
        raise PreconditionError("data solvability rank test failed; "
                                "detectability test is undefined")
    _, _, t_x, c_rec, _, r_hat = solve_data_equation_structured(
        ds, rtol=rtol, multiplier=multiplier)
    detectable = pbh_detectable(t_x, c_rec, tol, multiplier)

    rng = np.random.default_rng(PENCIL_SEED)
    points = _pencil_points(rng, n_points)
    want = ds.n_x + ds.n_m + r_hat
    for s in points:
        # row scaling keeps the rank and stops the top singular value from
        # growing with |s|, which would otherwise inflate the threshold
        pencil = np.vstack([(s * ds.X - ds.Xdot) / max(1.0, abs(s)),
                            ds.U.astype(complex), ds.Y.astype(complex)])
        if numerical_rank(pencil, multiplier) != want:
            detectable = False
            break
    return detectable, points


@dataclass(frozen=True)
class DataDesignReport:
    """Everything the data-driven construction derived for one node."""

    node_index: int
    solvable: bool
    rank_with_output_derivs: int
    rank_with_state_derivs: int
    detectable: bool | None
    pencil_points: np.ndarray | None
    T_u: np.ndarray | None
    T_y: np.ndarray | None
    T_x: np.ndarray | None
    rank_Ty: int | None
    C_recovered: np.ndarray | None
    residual: float | None
    r_inferred: int | None

    def to_json_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()
        return {
            "node_index": self.node_index,
            "solvable": self.solvable,
            "rank_with_output_derivs": self.rank_with_output_derivs,
            "rank_with_state_derivs": self.rank_with_state_derivs,
            "detectable": self.detectable,
            "pencil_points": None if self.pencil_points is None else
                [[float(s.real), float(s.imag)] for s in self.pencil_points],
            "T_u": arr(self.T_u), "T_y": arr(self.T_y), "T_x": arr(self.T_x),
            "rank_Ty": self.rank_Ty,
            "C_recovered": arr(self.C_recovered),
            "residual": self.residual,
            "r_inferred": self.r_inferred,
        }


def analyze_node(ds: NodeDataset, test_detectability: bool = False,
                 rtol: float = DEFAULT_RESIDUAL_RTOL,
                 multiplier: float | None = None) -> DataDesignReport:
    """Run the rank tests and, when solvable, recover the observer blocks."""
    solvable, lhs, rhs = check_data_solvability(ds, multiplier)
    if not solvable:
        return DataDesignReport(
            node_index=ds.node_index, solvable=False,
            rank_with_output_derivs=lhs, rank_with_state_derivs=rhs,
            detectable=None, pencil_points=None, T_u=None, T_y=None, T_x=None,
            rank_Ty=None, C_recovered=None, residual=None, r_inferred=None)
    t_u, t_y, t_x, c_rec, residual, r_hat = solve_data_equation_structured(
        ds, rtol=rtol, multiplier=multiplier)
    detectable, points = (None, None)
    if test_detectability:
        detectable, points = check_data_detectability(ds, multiplier, rtol=rtol)
    return DataDesignReport(
        node_index=ds.node_index, solvable=True,
        rank_with_output_derivs=lhs, rank_with_state_derivs=rhs,
        detectable=detectable, pencil_points=points,
        T_u=t_u, T_y=t_y, T_x=t_x,
        rank_Ty=numerical_rank(t_y, multiplier),
        C_recovered=c_rec, residual=residual, r_inferred=r_hat)


def analyze_datasets(datasets, rtol: float = DEFAULT_RESIDUAL_RTOL,
                     multiplier: float | None = None) -> tuple[list[DataDesignReport], int | None]:
    """Per-node reports plus the first node passing the detectability test."""
    reports = []
    leader = None
    for ds in datasets:
        test_leader = leader is None
        report = analyze_node(ds, test_detectability=test_leader,
                              rtol=rtol, multiplier=multiplier)
        if test_leader and report.solvable and report.detectable:
            leader = report.node_index
        reports.append(report)
    return reports, leader


def build_data_driven_gains(reports, graph: SensorGraph,
                            decay: float = DEFAULT_DECAY,
                            gamma_margin: float = DEFAULT_GAMMA_MARGIN,
                            gamma_override: float | None = None) -> DuioGains:
    """Observer gains from per-node data reports.

    Preconditions: every node solvable, some node detectable from data,
    and every recovered feedthrough with rank equal to the inferred
    unknown-input rank.
    """
    reports = list(reports)
    for rep in reports:
        if not rep.solvable:
            raise DesignError(f"node {rep.node_index}: data solvability rank test failed")
    leader = next((k for k, rep in enumerate(reports) if rep.detectable), None)
    if leader is None:
        raise DesignError("no node passed the data detectability test; "
                          "cannot stabilize a leader")
    for rep in reports:
        if rep.rank_Ty != rep.r_inferred:
            raise DesignError(
                f"node {rep.node_index}: rank(T_y)={rep.rank_Ty} differs from the "
                f"inferred unknown-input rank {rep.r_inferred}")
    return assemble_from_blocks(
        ts=[rep.T_x for rep in reports], hs=[rep.T_y for rep in reports],
        fs=[rep.T_u for rep in reports], cs=[rep.C_recovered for rep in reports],
        graph=graph, decay=decay, gamma_margin=gamma_margin,
        gamma_override=gamma_override, method="data", leader=leader)


def rank_spectra(ds: NodeDataset) -> dict[str, np.ndarray]:
    """Singular-value spectra of every stacked matrix the rank tests use."""
    spectra = {
        "U;Ydot;X": singular_values(np.vstack([ds.U, ds.Ydot, ds.X])),
        "U;X;Xdot": singular_values(np.vstack([ds.U, ds.X, ds.Xdot])),
        "X": singular_values(ds.X),
    }
    if ds.W_validation is not None:
        spectra["U;W;X"] = singular_values(np.vstack([ds.U, ds.W_validation, ds.X]))
    return spectra
