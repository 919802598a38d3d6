"""Classical ADMM solvers against dense linear-algebra oracles."""

import numpy as np
import pytest

from admmnet.data import make_phantom, pseudo_radial_mask, simulate_kspace
from admmnet.plf import plf_from_soft_threshold
from admmnet.signal import (
    conv2_circular,
    dct_filter_bank,
    fft2_unitary,
    ifft2_unitary,
)
from admmnet.solvers import (
    Solver1Config,
    Solver2Config,
    admm_solver1,
    admm_solver2,
    augmented_lagrangian_1,
)

from conftest import random_grid
from oracles import solver1_xstep_dense, solver2_xstep_dense


def small_problem(rng, n=4, rate=None):
    mask = np.zeros((n, n), dtype=bool)
    g = np.random.default_rng(42)
    mask |= g.random((n, n)) < (rate or 0.5)
    mask[0, 0] = True
    y = np.where(mask, random_grid(rng, n, n), 0.0)
    return y, mask


class TestSolver1:
    def test_first_iterate_matches_dense_oracle(self, rng):
        y, mask = small_problem(rng)
        filters = np.random.default_rng(5).standard_normal((2, 3, 3))
        rho = np.array([0.7, 1.3])
        cfg = Solver1Config(filters=filters, rho=rho, eta=np.ones(2), theta=np.full(2, 0.1), iterations=1)
        x1 = admm_solver1(y, mask, cfg)[0]
        z = np.zeros((2, 4, 4), dtype=complex)
        beta = np.zeros_like(z)
        oracle = solver1_xstep_dense(y, mask, filters, rho, z, beta)
        assert np.max(np.abs(x1 - oracle)) < 1e-8

    def test_full_mask_tiny_rho_recovers_inverse_transform(self, rng):
        n = 8
        mask = np.ones((n, n), dtype=bool)
        y = random_grid(rng, n, n)
        bank = dct_filter_bank(3)
        cfg = Solver1Config(
            filters=bank, rho=np.full(8, 1e-8), eta=np.ones(8), theta=np.zeros(8), iterations=1
        )
        x1 = admm_solver1(y, mask, cfg)[0]
        ref = ifft2_unitary(y)
        assert np.max(np.abs(x1 - ref)) / np.max(np.abs(ref)) < 1e-6

    def test_augmented_lagrangian_non_increasing(self):
        xgt = make_phantom(8, seed=3)
        mask = pseudo_radial_mask(8, 0.3)
        y = simulate_kspace(xgt, mask)
        bank = dct_filter_bank(3)
        cfg = Solver1Config(
            filters=bank,
            rho=np.full(8, 0.5),
            eta=np.ones(8),
            theta=np.full(8, 0.05),
            iterations=30,
        )
        _, trace = admm_solver1(y, mask, cfg, record=True)
        vals = [
            augmented_lagrangian_1(trace.x[i], trace.z[i], trace.beta[i], y, mask, cfg)
            for i in range(cfg.iterations)
        ]
        assert np.max(np.diff(vals)) <= 1e-12

    def test_xstep_normal_equation_residual(self, rng):
        # the returned x must zero the gradient of its quadratic subproblem
        y, mask = small_problem(rng, n=8)
        bank = dct_filter_bank(3)
        cfg = Solver1Config(
            filters=bank, rho=np.full(8, 0.8), eta=np.ones(8), theta=np.full(8, 0.05), iterations=4
        )
        _, trace = admm_solver1(y, mask, cfg, record=True)
        from admmnet.signal import filter_spectrum

        spectra = np.stack([filter_spectrum(k, 8, 8) for k in bank])
        m = mask.astype(float)
        z, beta = trace.z[2], trace.beta[2]
        x = trace.x[3]
        lhs = (m + np.einsum("l,lhw->hw", cfg.rho, np.abs(spectra) ** 2)) * fft2_unitary(x)
        rhs = m * y + sum(
            cfg.rho[l] * np.conj(spectra[l]) * fft2_unitary(z[l] - beta[l])
            for l in range(8)
        )
        assert np.linalg.norm(lhs - rhs) < 1e-8

    def test_feasibility_trend_after_burn_in(self):
        xgt = make_phantom(8, seed=3)
        mask = pseudo_radial_mask(8, 0.3)
        y = simulate_kspace(xgt, mask)
        bank = dct_filter_bank(3)
        cfg = Solver1Config(
            filters=bank, rho=np.ones(8), eta=np.ones(8), theta=np.full(8, 0.05), iterations=20
        )
        _, trace = admm_solver1(y, mask, cfg, record=True)
        feas = [
            sum(
                np.linalg.norm(conv2_circular(trace.x[i], bank[l]) - trace.z[i][l])
                for l in range(8)
            )
            for i in range(cfg.iterations)
        ]
        assert np.max(np.diff(feas[3:])) <= 1e-3 * feas[3]

    def test_nonpositive_rho_rejected(self):
        with pytest.raises(ValueError):
            Solver1Config(
                filters=dct_filter_bank(3), rho=np.zeros(8), eta=np.ones(8), theta=np.zeros(8)
            )

    def test_dimension_mismatch(self, rng):
        cfg = Solver1Config(
            filters=dct_filter_bank(3), rho=np.ones(8), eta=np.ones(8), theta=np.zeros(8)
        )
        with pytest.raises(ValueError):
            admm_solver1(random_grid(rng, 8, 8), np.ones((4, 4), dtype=bool), cfg)


class TestSolver2:
    def test_fully_sampled_first_iterate_is_half(self, rng):
        n = 8
        x0 = random_grid(rng, n, n)
        y = fft2_unitary(x0)
        mask = np.ones((n, n), dtype=bool)
        cfg = Solver2Config(
            filters=dct_filter_bank(3),
            rho=1.0,
            eta=1.0,
            mu1=0.9,
            mu2=0.1,
            lambdas=np.full(8, 0.001),
            iterations=1,
        )
        x1 = admm_solver2(y, mask, cfg)[0]
        assert np.max(np.abs(x1 - x0 / 2)) < 1e-12

    def test_xstep_matches_dense_oracle(self, rng):
        y, mask = small_problem(rng)
        cfg = Solver2Config(
            filters=dct_filter_bank(3),
            rho=0.7,
            eta=1.0,
            mu1=0.93,
            mu2=0.07,
            lambdas=np.full(8, 0.01),
            iterations=3,
        )
        _, trace = admm_solver2(y, mask, cfg, record=True)
        # check iteration 3's x-step against the dense solve of its inputs
        oracle = solver2_xstep_dense(y, mask, cfg.rho, trace.z[1], trace.beta[1])
        assert np.max(np.abs(trace.x[2] - oracle)) < 1e-10

    def test_xstep_normal_equation_residual(self, rng):
        y, mask = small_problem(rng, n=8)
        cfg = Solver2Config(
            filters=dct_filter_bank(3),
            rho=0.5,
            eta=1.0,
            mu1=0.95,
            mu2=0.05,
            lambdas=np.full(8, 0.01),
            iterations=4,
        )
        _, trace = admm_solver2(y, mask, cfg, record=True)
        m = mask.astype(float)
        z, beta, x = trace.z[2], trace.beta[2], trace.x[3]
        residual = (m + cfg.rho) * fft2_unitary(x) - (
            m * y + cfg.rho * fft2_unitary(z - beta)
        )
        assert np.linalg.norm(residual) < 1e-8

    def test_feasibility_trend_after_burn_in(self):
        xgt = make_phantom(8, seed=5)
        mask = pseudo_radial_mask(8, 0.3)
        y = simulate_kspace(xgt, mask)
        cfg = Solver2Config(
            filters=dct_filter_bank(3),
            rho=1.0,
            eta=1.0,
            mu1=0.9,
            mu2=0.1,
            lambdas=np.full(8, 0.1 * 0.05),
            shrink=plf_from_soft_threshold(0.05),
            iterations=20,
        )
        _, trace = admm_solver2(y, mask, cfg, record=True)
        feas = [np.linalg.norm(trace.x[i] - trace.z[i]) for i in range(cfg.iterations)]
        assert np.max(np.diff(feas[3:])) <= 1e-3 * feas[3]

    def test_inner_iterates_start_from_x_plus_beta(self, rng):
        y, mask = small_problem(rng, n=8)
        cfg = Solver2Config(
            filters=dct_filter_bank(3),
            rho=1.0,
            eta=1.0,
            mu1=0.9,
            mu2=0.1,
            lambdas=np.full(8, 0.01),
            inner_iterations=2,
            iterations=2,
        )
        _, trace = admm_solver2(y, mask, cfg, record=True)
        for i in range(2):
            beta_prev = np.zeros_like(y) if i == 0 else trace.beta[i - 1]
            assert np.array_equal(trace.z_inner[i][0], trace.x[i] + beta_prev)
            assert len(trace.z_inner[i]) == cfg.inner_iterations + 1

    def test_default_shrink_is_plf(self):
        cfg = Solver2Config(
            filters=dct_filter_bank(3), rho=1.0, eta=1.0, mu1=0.9, mu2=0.1, lambdas=np.ones(8)
        )
        assert cfg.shrink(0.76) == pytest.approx(0.26)
