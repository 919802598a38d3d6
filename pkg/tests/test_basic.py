"""Per-filter unrolled network: layer contracts, solver equivalence and
hand-derived gradients."""

import numpy as np
import pytest

from admmnet.basic import (
    BasicTape,
    SingularReconstructionError,
    basic_backward,
    basic_forward,
    basic_model_init,
    basic_random_init,
    basic_recon_layer,
)
from admmnet.data import make_phantom, pseudo_radial_mask, simulate_kspace
from admmnet.plf import plf_eval, plf_positions
from admmnet.signal import conv2_circular, dct_filter_bank, ifft2_unitary
from admmnet.solvers import Solver1Config, admm_solver1

from conftest import random_grid
from oracles import solver1_xstep_dense


def shrink(params, L):
    for st in params.stages:
        st.filters_h = st.filters_h[:L].copy()
        st.rho_raw = st.rho_raw[:L].copy()
        st.filters_d = st.filters_d[:L].copy()
        st.plf_values = st.plf_values[:L].copy()
        st.eta = st.eta[:L].copy()
    params.final_h = params.final_h[:L].copy()
    params.final_rho_raw = params.final_rho_raw[:L].copy()
    return params


def problem(n=16, rate=0.3, seed=9):
    xgt = make_phantom(n, seed=seed)
    mask = pseudo_radial_mask(n, rate)
    return simulate_kspace(xgt, mask), mask, xgt


class TestReconLayer:
    def test_stage_one_tiny_rho_is_inverse_transform(self, rng):
        n = 8
        mask = np.ones((n, n), dtype=bool)
        y = random_grid(rng, n, n)
        bank = dct_filter_bank(3)
        x = basic_recon_layer(y, mask, bank, np.full(8, 1e-10))
        ref = ifft2_unitary(y)
        assert np.max(np.abs(x - ref)) / np.max(np.abs(ref)) < 1e-6

    def test_matches_dense_normal_equations(self, rng):
        n = 4
        g = np.random.default_rng(31)
        mask = g.random((n, n)) < 0.5
        mask[0, 0] = True
        y = np.where(mask, random_grid(rng, n, n), 0.0)
        filters = g.standard_normal((2, 3, 3))
        rho = np.array([0.9, 1.7])
        z = np.stack([random_grid(rng, n, n) for _ in range(2)])
        beta = np.stack([random_grid(rng, n, n) for _ in range(2)])
        x = basic_recon_layer(y, mask, filters, rho, z, beta)
        oracle = solver1_xstep_dense(y, mask, filters, rho, z, beta)
        assert np.max(np.abs(x - oracle)) < 1e-9

    def test_equal_code_and_dual_reduce_to_data_only(self, rng):
        n = 8
        g = np.random.default_rng(3)
        mask = g.random((n, n)) < 0.6
        mask[0, 0] = True
        y = np.where(mask, random_grid(rng, n, n), 0.0)
        bank = dct_filter_bank(3)
        rho = np.full(8, 0.8)
        zb = np.stack([random_grid(rng, n, n) for _ in range(8)])
        with_zb = basic_recon_layer(y, mask, bank, rho, zb, zb.copy())
        without = basic_recon_layer(y, mask, bank, rho)
        assert np.max(np.abs(with_zb - without)) < 1e-12

    def test_singular_frequency_reported(self, rng):
        # zero-sum filters vanish exactly at DC; a mask that misses DC
        # makes the solve singular at that frequency
        n = 8
        mask = np.zeros((n, n), dtype=bool)
        mask[1, 2] = True
        y = np.where(mask, random_grid(rng, n, n), 0.0)
        filt = np.zeros((2, 3, 3))
        filt[0, 1, 1], filt[0, 1, 2] = 1.0, -1.0
        filt[1, 1, 1], filt[1, 2, 1] = 1.0, -1.0
        with pytest.raises(SingularReconstructionError, match=r"\(0, 0\)"):
            basic_recon_layer(y, mask, filt, np.ones(2))

    def test_denominator_positive_everywhere_with_dc_mask(self):
        # enumerate all frequencies of the standard setup
        from admmnet.signal import filter_spectrum

        mask = pseudo_radial_mask(8, 0.3)
        bank = dct_filter_bank(3)
        denom = mask.astype(float) + sum(
            np.abs(filter_spectrum(k, 8, 8)) ** 2 for k in bank
        )
        assert np.all(denom > 0)


class TestForward:
    def test_equals_solver_iterates_stage_by_stage(self):
        y, mask, _ = problem()
        params = basic_model_init(n_stages=4, filter_size=3, theta=0.08)
        st = params.stages[0]
        cfg = Solver1Config(
            filters=st.filters_d,
            rho=st.rho,
            eta=st.eta,
            theta=np.full(8, 0.08),
            iterations=5,
        )
        iterates = admm_solver1(y, mask, cfg)
        out, tape = basic_forward(y, mask, params, record=True)
        for n in range(4):
            assert np.max(np.abs(tape.x[n] - iterates[n])) < 1e-10
        assert np.max(np.abs(out - iterates[4])) < 1e-10

    def test_zero_eta_keeps_duals_zero(self):
        y, mask, _ = problem(n=8)
        params = basic_model_init(n_stages=3, filter_size=3, eta=0.0)
        _, tape = basic_forward(y, mask, params, record=True)
        for beta in tape.beta:
            assert np.all(beta == 0)

    def test_single_stage_equals_manual_composition(self):
        y, mask, _ = problem(n=8)
        params = shrink(basic_model_init(n_stages=1, filter_size=3, theta=0.1), 2)
        st = params.stages[0]
        out, tape = basic_forward(y, mask, params, record=True)

        x = basic_recon_layer(y, mask, st.filters_h, st.rho)
        p = plf_positions(params.n_controls)
        c = np.stack([conv2_circular(x, st.filters_d[l]) for l in range(2)])
        z = np.stack(
            [
                plf_eval(st.plf_values[l], c[l].real, p)
                + 1j * plf_eval(st.plf_values[l], c[l].imag, p)
                for l in range(2)
            ]
        )
        beta = st.eta[:, None, None] * (c - z)
        manual = basic_recon_layer(y, mask, params.final_h, params.final_rho, z, beta)
        assert np.max(np.abs(out - manual)) == 0.0

    def test_deterministic_bitwise(self):
        y, mask, _ = problem(n=8)
        params = basic_random_init(n_stages=2, n_filters=4, seed=7)
        a = basic_forward(y, mask, params)
        b = basic_forward(y, mask, params)
        assert np.array_equal(a, b)


class TestBackward:
    def test_zero_output_gradient_gives_zero_gradients(self):
        y, mask, _ = problem(n=8)
        params = shrink(basic_model_init(n_stages=2, n_controls=11, theta=0.2), 2)
        _, tape = basic_forward(y, mask, params, record=True)
        grads = basic_backward(tape, y, mask, params, np.zeros_like(y))
        for sg in grads.stages:
            assert np.all(sg.filters_h == 0)
            assert np.all(sg.rho_raw == 0)
            assert np.all(sg.filters_d == 0)
            assert np.all(sg.plf_values == 0)
            assert np.all(sg.eta == 0)
        assert np.all(grads.final_h == 0)
        assert np.all(grads.final_rho_raw == 0)

    def test_eta_gradient_spot_formula(self, rng):
        # dE/deta_l for the last stage reduces to Re<grad_beta, c - z>,
        # cross-checked against a one-parameter finite difference
        y, mask, xgt = problem(n=8)
        params = shrink(basic_model_init(n_stages=2, n_controls=11, theta=0.2), 2)
        seed = random_grid(rng, 8, 8) * 0.1

        def loss_of(p):
            out = basic_forward(y, mask, p)
            return float(np.vdot(seed, out).real)

        _, tape = basic_forward(y, mask, params, record=True)
        grads = basic_backward(tape, y, mask, params, seed)
        h = 1e-6
        for l in range(2):
            import copy

            pp = copy.deepcopy(params)
            pm = copy.deepcopy(params)
            pp.stages[1].eta[l] += h
            pm.stages[1].eta[l] -= h
            numeric = (loss_of(pp) - loss_of(pm)) / (2 * h)
            assert abs(grads.stages[1].eta[l] - numeric) < 1e-6 * max(
                1.0, abs(numeric)
            )

    def test_requires_recorded_tape(self):
        y, mask, _ = problem(n=8)
        params = basic_model_init(n_stages=2)
        with pytest.raises(ValueError):
            basic_backward(None, y, mask, params, np.zeros_like(y))
        with pytest.raises(ValueError):
            basic_backward(BasicTape(), y, mask, params, np.zeros_like(y))

    def test_stale_tape_rejected(self):
        y, mask, _ = problem(n=8)
        params = basic_model_init(n_stages=2)
        _, tape = basic_forward(y, mask, params, record=True)
        deeper = basic_model_init(n_stages=3)
        with pytest.raises(ValueError, match="stages"):
            basic_backward(tape, y, mask, deeper, np.zeros_like(y))


class TestFiniteDifferences:
    def test_all_parameter_classes_match(self):
        from admmnet.data import make_dataset
        from admmnet.training import finite_diff_check

        ds = make_dataset(8, 2, 0.3, seed=5)
        params = shrink(
            basic_model_init(n_stages=2, n_controls=11, rho=1.0, theta=0.2), 2
        )
        report = finite_diff_check(params, ds, max_filter_coords=20)
        assert set(report.classes) == {"H", "rho", "D", "q", "eta"}
        for cls, stats in report.classes.items():
            assert stats["checked"] > 0, cls
            assert stats["max_rel_err"] < 1e-5, (cls, stats)
