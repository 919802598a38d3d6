"""Loss, metrics, parameter flattening, L-BFGS and the gradient harness."""

import copy
import csv

import numpy as np
import pytest

from admmnet.basic import basic_model_init
from admmnet.data import make_dataset
from admmnet.generic import generic_model_init, generic_random_init
from admmnet.training import (
    TrainConfig,
    finite_diff_check,
    lbfgs_minimize,
    make_objective,
    nmse_grad,
    nmse_loss,
    pack_gradients,
    pack_params,
    psnr,
    train_net,
    unpack_params,
)

from conftest import random_grid


class TestNmse:
    def test_exact_reconstruction_is_zero(self, rng):
        x = random_grid(rng, 8, 8)
        assert nmse_loss(x, x) == 0.0

    def test_zero_estimate_is_one(self, rng):
        x = random_grid(rng, 8, 8)
        assert nmse_loss(np.zeros_like(x), x) == pytest.approx(1.0)

    def test_double_estimate_is_one(self, rng):
        x = random_grid(rng, 8, 8)
        assert nmse_loss(2 * x, x) == pytest.approx(1.0)

    def test_batch_averages_per_sample_ratios(self, rng):
        xgt = np.stack([random_grid(rng, 4, 4), random_grid(rng, 4, 4)])
        xhat = np.stack([xgt[0], np.zeros((4, 4))])
        assert nmse_loss(xhat, xgt) == pytest.approx(0.5)

    def test_zero_ground_truth_rejected(self):
        with pytest.raises(ValueError):
            nmse_loss(np.ones((4, 4)), np.zeros((4, 4)))


class TestNmseGrad:
    def test_matches_finite_differences(self, rng):
        xhat = random_grid(rng, 8, 8)
        xgt = random_grid(rng, 8, 8)
        grad, degenerate = nmse_grad(xhat, xgt)
        assert not degenerate
        h = 1e-4
        for idx in [(0, 0), (3, 5), (7, 2)]:
            for comp in (1.0, 1.0j):
                xp = xhat.copy()
                xm = xhat.copy()
                xp[idx] += h * comp
                xm[idx] -= h * comp
                numeric = (nmse_loss(xp, xgt) - nmse_loss(xm, xgt)) / (2 * h)
                analytic = (
                    grad[idx].real if comp == 1.0 else grad[idx].imag
                )
                assert abs(numeric - analytic) / max(abs(numeric), 1e-12) < 1e-7

    def test_direction_parallel_to_residual(self, rng):
        xhat = random_grid(rng, 8, 8)
        xgt = random_grid(rng, 8, 8)
        grad, _ = nmse_grad(xhat, xgt)
        r = (xhat - xgt).ravel()
        g = grad.ravel()
        cos = np.vdot(r, g) / (np.linalg.norm(r) * np.linalg.norm(g))
        assert abs(cos - 1.0) < 1e-12

    def test_doubling_ground_truth_halves_magnitude(self, rng):
        xgt = random_grid(rng, 8, 8)
        residual = random_grid(rng, 8, 8)
        g1, _ = nmse_grad(xgt + residual, xgt)
        g2, _ = nmse_grad(2 * xgt + residual, 2 * xgt)
        assert np.linalg.norm(g2) == pytest.approx(np.linalg.norm(g1) / 2)

    def test_degenerate_point_flagged(self, rng):
        x = random_grid(rng, 4, 4)
        grad, degenerate = nmse_grad(x, x.copy())
        assert degenerate
        assert np.all(grad == 0)


class TestPsnr:
    def test_rmse_equal_to_peak_is_zero_db(self):
        xgt = np.zeros((4, 4), dtype=complex)
        xgt[0, 0] = 1.0
        xhat = xgt + np.full((4, 4), 1.0)  # |xhat|-|xgt| has rms 1 = peak
        assert psnr(np.abs(xgt) + 1.0, xgt) == pytest.approx(0.0, abs=1e-9)

    def test_forty_db_at_one_percent_rmse(self):
        xgt = np.ones((8, 8), dtype=complex)
        xhat = np.ones((8, 8)) * (1.0 + 0.01)
        assert psnr(xhat, xgt) == pytest.approx(40.0, abs=1e-9)

    def test_cross_check_scalar_computation(self, rng):
        xhat = random_grid(rng, 8, 8)
        xgt = random_grid(rng, 8, 8)
        expected = 20.0 * np.log10(
            np.max(np.abs(xgt))
            / np.sqrt(np.mean((np.abs(xhat) - np.abs(xgt)) ** 2))
        )
        assert psnr(xhat, xgt) == pytest.approx(expected, rel=1e-12)

    def test_exact_match_is_infinite(self, rng):
        x = random_grid(rng, 4, 4)
        assert psnr(x, x.copy()) == float("inf")


class TestPacking:
    @pytest.mark.parametrize("kind", ["basic", "generic"])
    def test_round_trip_identity_bitwise(self, kind):
        if kind == "basic":
            params = basic_model_init(n_stages=2, n_controls=11)
        else:
            params = generic_random_init(
                n_stages=2, n_filters=3, n_subiters=2, n_controls=11, seed=4
            )
        flat = pack_params(params)
        back = unpack_params(flat)
        again = pack_params(back)
        assert np.array_equal(flat.x, again.x)
        assert flat.layout == again.layout

    def test_layout_length_matches_analytic_count(self):
        # generic, L=8, w_f=3, N_s=4, N_t=1, N_c=101:
        #   per stage: rho + [mu1 + mu2 + 72 + 8 + 72 + 1 + 101] + eta = 258
        #   4 stages + final rho = 1033
        params = generic_model_init(n_stages=4, n_subiters=1, filter_size=3, n_controls=101)
        assert pack_params(params).layout.size == 1033
        # basic: per stage 72 + 8 + 72 + 8*101 + 8 = 968; + final 80 = 3952
        params = basic_model_init(n_stages=4, filter_size=3, n_controls=101)
        assert pack_params(params).layout.size == 3952

    def test_gradient_vector_aligns_slice_for_slice(self):
        params = basic_model_init(n_stages=2, n_controls=11)
        flat = pack_params(params)
        # a gradient bundle with the parameter values themselves must
        # reproduce the parameter vector exactly
        from admmnet.basic import BasicGradients, BasicStageGradients

        grads = BasicGradients(
            stages=[
                BasicStageGradients(
                    filters_h=st.filters_h,
                    rho_raw=st.rho_raw,
                    filters_d=st.filters_d,
                    plf_values=st.plf_values,
                    eta=st.eta,
                )
                for st in params.stages
            ],
            final_h=params.final_h,
            final_rho_raw=params.final_rho_raw,
        )
        assert np.array_equal(pack_gradients(grads, flat.layout), flat.x)

    def test_objective_matches_direct_loss_bitwise(self):
        from admmnet.generic import generic_forward

        ds = make_dataset(8, 3, 0.3, seed=7)
        params = generic_model_init(n_stages=2, n_controls=11)
        flat = pack_params(params)
        objective = make_objective(flat.layout, ds)
        value, _ = objective(flat.x)
        ratios = []
        for i in range(len(ds)):
            y, xgt = ds.sample(i)
            out = generic_forward(y, ds.mask, params)
            ratios.append(np.linalg.norm(out - xgt) / np.linalg.norm(xgt))
        assert value == float(np.mean(ratios))

    def test_threaded_objective_is_deterministic(self):
        ds = make_dataset(8, 4, 0.3, seed=8)
        params = generic_model_init(n_stages=2, n_controls=11)
        flat = pack_params(params)
        obj1 = make_objective(flat.layout, ds, threads=1)
        obj2 = make_objective(flat.layout, ds, threads=2)
        v1, g1 = obj1(flat.x)
        v2, g2 = obj2(flat.x)
        assert v1 == v2
        assert np.array_equal(g1, g2)


def quadratic(center):
    def fun(x):
        d = x - center
        return float(d @ d), 2 * d

    return fun


class TestLbfgs:
    def test_one_dimensional_quadratic(self):
        res = lbfgs_minimize(quadratic(np.array([3.0])), np.array([0.0]))
        assert abs(res.x[0] - 3.0) < 1e-8
        assert res.status == "converged"

    def test_rosenbrock(self):
        def rosen(x):
            a, b = x
            f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
            g = np.array(
                [-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)]
            )
            return float(f), g

        res = lbfgs_minimize(rosen, np.array([-1.2, 1.0]), TrainConfig(max_iters=200))
        assert np.max(np.abs(res.x - 1.0)) < 1e-6

    def test_spd_quadratic_matches_direct_solve(self):
        rng = np.random.default_rng(15)
        a = rng.standard_normal((20, 20))
        spd = a @ a.T + 20 * np.eye(20)
        b = rng.standard_normal(20)

        def fun(x):
            return float(0.5 * x @ spd @ x - b @ x), spd @ x - b

        res = lbfgs_minimize(fun, np.zeros(20), TrainConfig(max_iters=200, gtol=1e-12))
        direct = np.linalg.solve(spd, b)
        assert np.max(np.abs(res.x - direct)) < 1e-8

    def test_accepted_values_non_increasing(self):
        def rosen(x):
            a, b = x
            f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
            g = np.array(
                [-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)]
            )
            return float(f), g

        res = lbfgs_minimize(rosen, np.array([-1.2, 1.0]), TrainConfig(max_iters=50))
        values = [row[1] for row in res.history]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_line_search_failure_returns_best_so_far(self):
        def unbounded(x):
            return float(-x.sum()), -np.ones_like(x)

        res = lbfgs_minimize(unbounded, np.zeros(3), TrainConfig(max_iters=5))
        assert res.status == "line_search_failed"

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(history=0)
        with pytest.raises(ValueError):
            TrainConfig(c1=0.5, c2=0.1)


class TestFiniteDiffCheck:
    def test_initialized_nets_pass(self):
        ds = make_dataset(8, 2, 0.3, seed=5)
        basic = basic_model_init(n_stages=2, n_controls=11, theta=0.2)
        report = finite_diff_check(basic, ds, max_filter_coords=10)
        assert report.passed(1e-5)
        generic = generic_model_init(n_stages=2, n_subiters=1, n_controls=11, lam=0.1)
        report = finite_diff_check(generic, ds, max_filter_coords=10)
        assert report.passed(1e-5)

    def test_corrupted_gradient_detected(self):
        ds = make_dataset(8, 2, 0.3, seed=5)
        params = generic_model_init(n_stages=2, n_subiters=1, n_controls=11, lam=0.1)
        report = finite_diff_check(
            params, ds, max_filter_coords=5, corrupt_class="eta"
        )
        assert report.classes["eta"]["max_rel_err"] > 1e-1
        assert not report.passed(1e-5)

    def test_report_lists_every_class(self):
        ds = make_dataset(8, 1, 0.3, seed=5)
        params = basic_model_init(n_stages=1, n_controls=11)
        report = finite_diff_check(params, ds, max_filter_coords=4)
        assert [line.split(":")[0].strip() for line in report.lines()] == [
            "H", "rho", "D", "q", "eta",
        ]


class TestTrainNet:
    def test_training_reduces_loss_and_writes_csv(self, tmp_path):
        ds = make_dataset(8, 3, 0.3, seed=11)
        params = generic_model_init(n_stages=1, n_controls=11, lam=0.05)
        flat = pack_params(params)
        objective = make_objective(flat.layout, ds)
        before, _ = objective(flat.x)
        csv_path = tmp_path / "metrics.csv"
        trained, result = train_net(
            params, ds, TrainConfig(max_iters=10), csv_path=str(csv_path)
        )
        after, _ = make_objective(flat.layout, ds)(pack_params(trained).x)
        assert after < before
        with open(csv_path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "loss", "grad_norm", "seconds"]
        assert len(rows) == len(result.history) + 1
        losses = [float(r[1]) for r in rows[1:]]
        assert all(b <= a for a, b in zip(losses, losses[1:]))

    def test_resumed_training_continues_monotone(self):
        ds = make_dataset(8, 2, 0.3, seed=12)
        params = generic_model_init(n_stages=1, n_controls=11, lam=0.05)
        first, res1 = train_net(params, ds, TrainConfig(max_iters=4))
        second, res2 = train_net(copy.deepcopy(first), ds, TrainConfig(max_iters=4))
        values = [r[1] for r in res1.history] + [r[1] for r in res2.history]
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))
