"""Plant model construction and trajectory integration."""
import numpy as np
import pytest
import scipy.linalg

from dduio import benchmark
from dduio.errors import DimensionError, DivergenceError, RankError
from dduio.plant import PlantModel, node_dynamics_matrices, simulate
from dduio.signals import AutonomousLinear, Sinusoid, Zero

from conftest import single_node_model


def two_state_model(a):
    return single_node_model(a, np.zeros((2, 1)), np.zeros((2, 0)), np.eye(2))


def test_zero_dynamics_constant_state():
    model = two_state_model(np.zeros((2, 2)))
    traj = simulate(model, [1.0, 2.0], [Zero()], [], horizon=2.0, dt=0.01)
    assert np.allclose(traj.x, [1.0, 2.0], atol=0)
    assert np.allclose(traj.xdot, 0.0, atol=0)


def test_double_integrator_analytic():
    model = two_state_model(np.array([[0.0, 1.0], [0.0, 0.0]]))
    traj = simulate(model, [0.0, 1.0], [Zero()], [], horizon=1.0, dt=1e-3)
    # x(1) = (1, 1); the RK4 map is exact for nilpotent dynamics.
    assert np.linalg.norm(traj.x[-1] - np.array([1.0, 1.0])) < 1e-9


def _augmented_oracle(model, u0, t_end):
    """Matrix-exponential solution of the benchmark with its smooth inputs.

    Augments the state with the known-input exponential and the harmonic
    pair generating the unknown-input cosine; evaluates exp(A_aug t)
    directly, fully independent of the package integrator.
    """
    w = benchmark.UNKNOWN_FREQUENCY
    amp = benchmark.UNKNOWN_AMPLITUDE
    phase = benchmark.UNKNOWN_PHASE
    n = model.n_x
    a_aug = np.zeros((n + 3, n + 3))
    a_aug[:n, :n] = model.A
    a_aug[:n, n] = benchmark.B_KNOWN[:, 0]
    a_aug[:n, n + 1] = amp * benchmark.B_UNKNOWN[:, 0]
    a_aug[n, n] = benchmark.KNOWN_INPUT_DECAY
    a_aug[n + 1, n + 2] = -w
    a_aug[n + 2, n + 1] = w
    z0 = np.zeros(n + 3)
    z0[n] = u0
    z0[n + 1] = np.cos(phase)
    z0[n + 2] = np.sin(phase)
    return (scipy.linalg.expm(a_aug * t_end) @ z0)[:n]


def bench_inputs(u0):
    return [AutonomousLinear([[benchmark.KNOWN_INPUT_DECAY]], [u0]),
            Sinusoid(benchmark.UNKNOWN_AMPLITUDE, benchmark.UNKNOWN_FREQUENCY,
                     benchmark.UNKNOWN_PHASE)]


def test_rk4_matches_matrix_exponential_oracle(bench_model):
    u0 = 0.63
    traj = simulate(bench_model, np.zeros(4), bench_inputs(u0), [Zero()],
                    horizon=1.0, dt=1e-4)
    x_ref = _augmented_oracle(bench_model, u0, 1.0)
    assert np.linalg.norm(traj.x[-1] - x_ref) < 1e-6


def test_rk4_fourth_order_convergence(bench_model):
    u0 = 0.63
    x_ref = _augmented_oracle(bench_model, u0, 1.0)
    errors = []
    for dt in (0.02, 0.01):
        traj = simulate(bench_model, np.zeros(4), bench_inputs(u0), [Zero()],
                        horizon=1.0, dt=dt)
        errors.append(np.linalg.norm(traj.x[-1] - x_ref))
    assert errors[0] / errors[1] >= 12.0


def test_output_derivative_consistency(bench_model):
    traj = simulate(bench_model, [0.3, -0.2, 0.5, 0.1], bench_inputs(0.4),
                    [benchmark.online_disturbances(3, 1e-2)[0]],
                    horizon=1.0, dt=1e-2)
    for i, node in enumerate(bench_model.nodes):
        assert np.allclose(traj.output_derivatives(i), traj.xdot @ node.C.T,
                           atol=1e-13)
        assert np.allclose(traj.outputs(i), traj.x @ node.C.T, atol=1e-13)


def test_node_split_reconstructs_global_forcing(bench_model):
    rng = np.random.default_rng(5)
    for _ in range(100):
        u = rng.normal(size=bench_model.n_u)
        d = rng.normal(size=bench_model.n_d)
        want = bench_model.B @ u + bench_model.E_dist @ d
        for i, node in enumerate(bench_model.nodes):
            u_i = u[list(node.known_input_indices)]
            unknown = [k for k in range(bench_model.n_u)
                       if k not in node.known_input_indices]
            w_i = np.concatenate([u[unknown] / node.unknown_input_scales, d])
            got = node.B_m @ u_i + node.B_p @ w_i
            assert np.linalg.norm(got - want) < 1e-12


def test_benchmark_node1_matrices(bench_model):
    _, b_m, b_p = node_dynamics_matrices(bench_model, 0)
    assert np.allclose(b_m, [[0.0], [1.3333], [0.0], [0.0]])
    assert np.allclose(b_p, [[1.0, 0.1], [1.0, 0.0], [1.0, 0.1], [1.0, 0.0]])


def test_fully_known_inputs_leave_empty_unknown_block():
    a = np.zeros((2, 2))
    b = np.array([[1.0], [0.5]])
    model = PlantModel.assemble(a, b, np.zeros((2, 0)), [(np.eye(2), (0,))])
    _, b_m, b_p = node_dynamics_matrices(model, 0)
    assert b_p.shape == (2, 0)
    assert np.array_equal(b_m, b)


def test_node_index_out_of_range(bench_model):
    with pytest.raises(IndexError):
        node_dynamics_matrices(bench_model, 5)


def test_rank_deficient_unknown_columns_rejected():
    a = np.zeros((2, 2))
    b = np.array([[1.0, 2.0], [1.0, 2.0]])  # unknown column parallel to E
    e = np.array([[1.0], [1.0]])
    with pytest.raises(RankError):
        PlantModel.assemble(a, b, e, [(np.eye(2), (0,))])


def test_dimension_errors(bench_model):
    with pytest.raises(DimensionError):
        simulate(bench_model, [1.0, 2.0], bench_inputs(0.1), [Zero()],
                 horizon=1.0, dt=1e-2)
    with pytest.raises(DimensionError):
        simulate(bench_model, np.zeros(4), bench_inputs(0.1), [Zero()],
                 horizon=1.0, dt=0.0)
    with pytest.raises(DimensionError):
        PlantModel.assemble(np.zeros((2, 3)), np.zeros((2, 1)),
                            np.zeros((2, 0)), [(np.eye(2), (0,))])


def test_divergence_reports_timestamp():
    model = two_state_model(np.array([[5.0, 0.0], [0.0, 5.0]]))
    with pytest.raises(DivergenceError) as err:
        simulate(model, [1.0, 1.0], [Zero()], [], horizon=10.0, dt=1e-2,
                 divergence_limit=1e3)
    assert 0.0 < err.value.t < 10.0


def test_trajectory_csv_export(tmp_path, bench_model):
    from dduio.plant import export_trajectory
    traj = simulate(bench_model, [0.1, 0.2, 0.3, 0.4], bench_inputs(0.5),
                    [Zero()], horizon=0.5, dt=1e-2)
    path = tmp_path / "traj.csv"
    export_trajectory(traj, path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header[:9] == ["t", "x1", "x2", "x3", "x4",
                          "xdot1", "xdot2", "xdot3", "xdot4"]
    # per node: one known input, four outputs, four output derivatives
    assert len(header) == 9 + 5 * (1 + 4 + 4)
    assert len(lines) == 1 + traj.t.size
