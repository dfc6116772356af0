"""Identification baseline, error metrics, and the comparison harness."""
import dataclasses

import numpy as np
import pytest

from dduio import benchmark
from dduio.baselines import (build_identified_gains, compute_mse_mae,
                             identify_least_squares, monte_carlo_compare,
                             write_comparison_table)
from dduio.config import parse_config
from dduio.errors import EmptyRunError, RankError
from dduio.linalg import spectral_abscissa
from dduio.network import build_laplacian
from dduio.linalg import coupling_matrix
from dduio.observer_sim import RunResult

from conftest import pointwise_dataset


def test_identification_exact_without_unknown_inputs():
    a = np.array([[0.0, 1.0], [-3.0, -0.5]])
    b_m = np.array([[0.2], [1.0]])
    ds = pointwise_dataset(a, b_m, np.zeros((2, 0)), np.eye(2), N=25, seed=1)
    a_hat, b_hat, c_hat = identify_least_squares(ds, np.zeros((2, 0)),
                                                 np.zeros((2, 0)))
    assert np.linalg.norm(a_hat - a) < 1e-9
    assert np.linalg.norm(b_hat - b_m) < 1e-9
    assert np.linalg.norm(c_hat - np.eye(2)) < 1e-9


def test_identification_biased_by_active_unknown_inputs(bench_model, bench_datasets):
    node = bench_model.nodes[0]
    a_hat, _, c_hat = identify_least_squares(
        bench_datasets[0], node.B_p[:, :1], bench_model.E_dist)
    assert np.linalg.norm(a_hat - bench_model.A) > 0.1
    # the bias lies in the span of the unknown-input columns
    resid = a_hat - bench_model.A
    proj = node.B_p @ np.linalg.pinv(node.B_p)
    assert np.linalg.norm(resid - proj @ resid) < 1e-8
    assert np.linalg.norm(c_hat - node.C) < 1e-9


def test_identification_matches_normal_equations_oracle():
    rng = np.random.default_rng(4)
    n_x, n_m, n_samples = 3, 2, 12
    q, _ = np.linalg.qr(rng.normal(size=(n_samples, n_x + n_m)))
    x = q[:, :n_x].T
    u = q[:, n_x:].T
    a = rng.normal(size=(n_x, n_x))
    b_m = rng.normal(size=(n_x, n_m))
    xdot = a @ x + b_m @ u
    ds = dataclasses.replace(pointwise_dataset(a, b_m, np.zeros((n_x, 0)),
                                               np.eye(n_x), n_samples, seed=5),
                             X=x, U=u, Xdot=xdot, Y=x, Ydot=xdot)
    a_hat, b_hat, _ = identify_least_squares(ds, np.zeros((n_x, 0)),
                                             np.zeros((n_x, 0)))
    big = np.vstack([x, u])
    theta = xdot @ big.T @ np.linalg.inv(big @ big.T)
    assert np.allclose(np.hstack([a_hat, b_hat]), theta, atol=1e-10)


def test_identification_rank_error():
    ds = pointwise_dataset(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((2, 0)),
                           np.eye(2), N=10, seed=6)
    broken = dataclasses.replace(ds, U=ds.X[:1, :].copy())
    with pytest.raises(RankError):
        identify_least_squares(broken, np.zeros((2, 0)), np.zeros((2, 0)))


def test_identified_gains_are_stable_on_benchmark(bench_model, bench_graph,
                                                  bench_datasets):
    granted = [node.B_p[:, :node.r - bench_model.n_d] for node in bench_model.nodes]
    gains = build_identified_gains(bench_datasets, granted, bench_model.E_dist,
                                   bench_graph, gamma_override=benchmark.GAMMA)
    assert gains.method == "identified"
    lap = build_laplacian(bench_graph).laplacian
    assert spectral_abscissa(coupling_matrix(gains.E_obs, gains.K, lap)) < 0


def _result_with_error(error_of_t, horizon=1.0, dt=1e-3, m_nodes=2):
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    e = error_of_t(t)
    x = np.zeros((t.size, 3))
    xhat = np.zeros((t.size, m_nodes, 3))
    xhat[:, :, 0] = -e[:, None]
    err = np.tile(np.abs(e)[:, None], (1, m_nodes))
    return RunResult(t=t, x=x, xhat=xhat, error_norms=err,
                     spread=np.zeros(t.size))


def test_metrics_trivial_cases():
    res0 = _result_with_error(lambda t: np.zeros_like(t))
    m0 = compute_mse_mae(res0)
    assert m0.mse == 0.0 and m0.mae == 0.0

    res_c = _result_with_error(lambda t: 0.7 * np.ones_like(t))
    mc = compute_mse_mae(res_c)
    assert mc.mse == pytest.approx(0.49, rel=1e-12)
    assert mc.mae == pytest.approx(0.7, rel=1e-12)


def test_metrics_linear_decay_analytic():
    # |e| = 1 - t on [0, 1]: integral of (1-t)^2 is 1/3, of (1-t) is 1/2
    res = _result_with_error(lambda t: 1.0 - t)
    m = compute_mse_mae(res)
    assert m.mse == pytest.approx(1.0 / 3.0, abs=1e-6)
    assert m.mae == pytest.approx(0.5, abs=1e-9)


def test_metrics_empty_run():
    res = _result_with_error(lambda t: t)
    short = RunResult(t=res.t[:1], x=res.x[:1], xhat=res.xhat[:1],
                      error_norms=res.error_norms[:1], spread=res.spread[:1])
    with pytest.raises(EmptyRunError):
        compute_mse_mae(short)


@pytest.fixture(scope="module")
def small_compare_config():
    return parse_config({"run": {"horizon": 5.0, "dt": 2e-3},
                         "compare": {"K": 2},
                         "design": {"gamma_override": benchmark.GAMMA}})


def test_monte_carlo_deterministic(small_compare_config):
    a = monte_carlo_compare(small_compare_config, K=2, master_seed=11)
    b = monte_carlo_compare(small_compare_config, K=2, master_seed=11)
    for sa, sb in zip(a, b):
        assert sa.mse == sb.mse
        assert sa.mae == sb.mae
        assert np.array_equal(sa.per_experiment_mse, sb.per_experiment_mse)
    c = monte_carlo_compare(small_compare_config, K=2, master_seed=12)
    assert any(ca.mse != cb.mse for ca, cb in zip(a, c))


def test_monte_carlo_aggregation_identity(small_compare_config):
    summaries = monte_carlo_compare(small_compare_config, K=3, master_seed=21)
    for s in summaries:
        assert s.mse == pytest.approx(s.per_experiment_mse.mean(), rel=1e-15)
        assert s.mae == pytest.approx(s.per_experiment_mae.mean(), rel=1e-15)
        assert s.experiments == 3


def test_comparison_table_files(tmp_path, small_compare_config):
    summaries = monte_carlo_compare(small_compare_config, K=2, master_seed=31)
    write_comparison_table(summaries, tmp_path)
    csv = (tmp_path / "table1.csv").read_text()
    assert csv.splitlines()[0] == "method,mse,mae"
    assert len(csv.splitlines()) == 4
    md = (tmp_path / "table1.md").read_text()
    assert md.count("|") >= 15


def test_quadrature_refinement(bench_model, bench_graph, model_gains):
    from dduio.observer_sim import run
    x0 = np.array([0.5, -0.1, 0.7, -0.3])
    values = []
    for dt in (2e-3, 1e-3):
        inputs = benchmark.online_inputs(seed=17)
        dist = benchmark.online_disturbances(seed=18, dt_hold=dt)
        res = run(bench_model, bench_graph, model_gains, x0, inputs, dist,
                  horizon=20.0, dt=dt)
        values.append(compute_mse_mae(res).mse)
    assert abs(values[0] - values[1]) / values[1] < 0.005
