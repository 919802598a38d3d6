"""The per-filter unrolled network (variant I).

Each stage runs four layers: a reconstruction layer solving the filtered
normal equations per frequency, a convolution layer producing filter
responses, a learned piecewise-linear shrinkage, and a multiplier update.
A terminal reconstruction layer with its own filters and penalties
produces the output image. With model-based initialization the forward
pass reproduces the classical solver I iterates exactly.

The backward pass is written out by hand. Cotangents of complex grids are
carried as complex arrays whose real/imaginary parts are the loss
gradients w.r.t. the real/imaginary parts of the value; gradients of real
parameters contract cotangents with forward sensitivities through
``Re<g, d>``, which sums the contributions of both components.
"""

from dataclasses import dataclass, field

import numpy as np

from .plf import plf_apply_stack, plf_backward_stack, plf_positions, soft_threshold
from .reparam import sigmoid, softplus, softplus_inv
from .signal import (
    conv_bank,
    conv_bank_contract,
    conv_bank_grad_shared,
    dct_filter_bank,
    fft2_unitary,
    filter_bank_spectra,
    ifft2_unitary,
    reflect_bank,
    spectra_grad_to_bank,
)
from .validation import as_filter_bank, as_grid, as_mask, check_same_shape

__all__ = [
    "SingularReconstructionError",
    "BasicStageParams",
    "BasicNetParams",
    "BasicTape",
    "BasicGradients",
    "basic_recon_layer",
    "basic_forward",
    "basic_backward",
    "basic_model_init",
    "basic_random_init",
]


class SingularReconstructionError(ValueError):
    """A reconstruction solve has a zero denominator at some frequency."""


@dataclass
class BasicStageParams:
    """Learnable parameters of one stage."""

    filters_h: np.ndarray   # (L, w, w) reconstruction-layer filters
    rho_raw: np.ndarray     # (L,) raw penalties; rho = softplus(rho_raw)
    filters_d: np.ndarray   # (L, w, w) convolution-layer filters
    plf_values: np.ndarray  # (L, N_c) shrinkage control values
    eta: np.ndarray         # (L,) multiplier update rates

    @property
    def rho(self):
        return softplus(self.rho_raw)


@dataclass
class BasicNetParams:
    stages: list
    final_h: np.ndarray        # (L, w, w)
    final_rho_raw: np.ndarray  # (L,)

    @property
    def final_rho(self):
        return softplus(self.final_rho_raw)

    @property
    def n_stages(self):
        return len(self.stages)

    @property
    def n_filters(self):
        return self.stages[0].filters_h.shape[0]

    @property
    def filter_size(self):
        return self.stages[0].filters_h.shape[1]

    @property
    def n_controls(self):
        return self.stages[0].plf_values.shape[1]


@dataclass
class BasicTape:
    """Forward intermediates consumed by the backward pass."""

    x: list = field(default_factory=list)        # per stage (H, W)
    c: list = field(default_factory=list)        # per stage (L, H, W)
    a: list = field(default_factory=list)        # per stage (L, H, W), PLF inputs
    z: list = field(default_factory=list)        # per stage (L, H, W)
    beta: list = field(default_factory=list)     # per stage (L, H, W)
    recon: list = field(default_factory=list)    # per stage (spectra, denom, xhat)
    final_recon: tuple = None
    output: np.ndarray = None


@dataclass
class BasicStageGradients:
    filters_h: np.ndarray
    rho_raw: np.ndarray
    filters_d: np.ndarray
    plf_values: np.ndarray
    eta: np.ndarray


@dataclass
class BasicGradients:
    stages: list
    final_h: np.ndarray
    final_rho_raw: np.ndarray


def _recon_solve(y, mask, filters_h, rho, z, beta):
    """Per-frequency solve of the filtered normal equations, with cache."""
    H, W = y.shape
    m = mask.astype(np.float64)
    spectra = filter_bank_spectra(filters_h, H, W)
    denom = m + np.einsum("l,lhw->hw", rho, np.abs(spectra) ** 2)
    bad = denom <= 0
    if np.any(bad):
        k = tuple(int(v) for v in np.unravel_index(int(np.argmax(bad)), denom.shape))
        raise SingularReconstructionError(
            f"reconstruction solve singular at frequency {k}: "
            "frequency is unsampled and every filter spectrum vanishes there"
        )
    num = np.where(mask, y, 0.0).astype(np.complex128)
    if z is not None:
        that = np.fft.fft2(z - beta, axes=(-2, -1), norm="ortho")
        num = num + np.einsum("l,lhw->hw", rho, np.conj(spectra) * that)
    xhat = num / denom
    x = ifft2_unitary(xhat)
    return x, (spectra, denom, xhat)


def basic_recon_layer(y, mask, filters_h, rho, z=None, beta=None):
    """Reconstruction layer: solves the filtered data-fidelity quadratic.

    ``z``/``beta`` are the per-filter codes and duals of the previous
    stage; ``None`` means the all-zero first-stage inputs.
    """
    y = as_grid(y, "k-space data")
    mask = as_mask(mask)
    check_same_shape(y, mask, "data and mask")
    filters_h = as_filter_bank(filters_h)
    rho = np.asarray(rho, dtype=np.float64)
    if (z is None) != (beta is None):
        raise ValueError("z and beta must be given together")
    x, _ = _recon_solve(y, mask, filters_h, rho, z, beta)
    return x


def _recon_backward(grad_x, cache, rho, z_prev, beta_prev, w, skip_inputs):
    """Backward through one reconstruction layer.

    Returns (grad_filters, grad_rho, grad_to_z_stack_or_None). The z/beta
    input gradients are ``+t`` and ``-t`` respectively for the returned
    stack ``t``.
    """
    spectra, denom, xhat = cache
    grad_xhat = fft2_unitary(grad_x)
    grad_num = grad_xhat / denom
    grad_den = -(np.conj(grad_xhat) * xhat).real / denom
    den_part = grad_den * np.abs(spectra) ** 2
    gspec = 2.0 * rho[:, None, None] * grad_den * spectra
    if z_prev is None:
        grad_rho = np.einsum("lhw->l", den_part)
    else:
        that = np.fft.fft2(z_prev - beta_prev, axes=(-2, -1), norm="ortho")
        num_part = np.conj(grad_num)[None] * np.conj(spectra) * that
        grad_rho = np.einsum("lhw->l", num_part.real + den_part)
        gspec = gspec + rho[:, None, None] * np.conj(grad_num)[None] * that
    grad_filters = spectra_grad_to_bank(gspec, w)
    t = None
    if not skip_inputs:
        t = np.fft.ifft2(
            rho[:, None, None] * spectra * grad_num[None], axes=(-2, -1), norm="ortho"
        )
    return grad_filters, grad_rho, t


def basic_forward(y, mask, params, record=False):
    """Forward pass; with ``record`` also returns the tape for backward."""
    y = as_grid(y, "k-space data")
    mask = as_mask(mask)
    check_same_shape(y, mask, "data and mask")
    L = params.n_filters
    w = params.filter_size
    positions = plf_positions(params.n_controls)
    tape = BasicTape() if record else None

    z = None
    beta = None
    for stage in params.stages:
        x, cache = _recon_solve(y, mask, stage.filters_h, stage.rho, z, beta)
        if beta is None:
            beta = np.zeros((L,) + y.shape, dtype=np.complex128)
        c = conv_bank(x, stage.filters_d)
        a = c + beta
        z = plf_apply_stack(stage.plf_values, a, positions)
        beta = beta + stage.eta[:, None, None] * (c - z)
        if record:
            tape.x.append(x)
            tape.c.append(c)
            tape.a.append(a)
            tape.z.append(z)
            tape.beta.append(beta)
            tape.recon.append(cache)
    out, final_cache = _recon_solve(y, mask, params.final_h, params.final_rho, z, beta)
    if record:
        tape.final_recon = final_cache
        tape.output = out
        return out, tape
    return out


def basic_backward(tape, y, mask, params, grad_at_output):
    """Gradients of a scalar loss w.r.t. every parameter.

    ``grad_at_output`` is the loss cotangent at the output image.
    Intermediates with several consumers accumulate the gradients of all
    downstream uses. Raises if the tape was not recorded.
    """
    if tape is None or tape.final_recon is None:
        raise ValueError("backward requires a tape recorded by basic_forward")
    n_stages = params.n_stages
    if len(tape.x) != n_stages:
        raise ValueError(
            f"tape has {len(tape.x)} stages but params expect {n_stages}"
        )
    L = params.n_filters
    w = params.filter_size
    positions = plf_positions(params.n_controls)
    grad_out = as_grid(grad_at_output, "output gradient")

    # terminal reconstruction layer
    dfinal_h, dfinal_rho, t = _recon_backward(
        grad_out,
        tape.final_recon,
        params.final_rho,
        tape.z[-1],
        tape.beta[-1],
        w,
        skip_inputs=False,
    )
    g_z = t
    g_beta = -t

    stage_grads = [None] * n_stages
    for n in reversed(range(n_stages)):
        stage = params.stages[n]
        c, a, z_cur = tape.c[n], tape.a[n], tape.z[n]
        z_prev = tape.z[n - 1] if n > 0 else None
        beta_prev = tape.beta[n - 1] if n > 0 else None

        # multiplier update layer
        d_eta = np.array(
            [np.vdot(g_beta[l], c[l] - z_cur[l]).real for l in range(L)]
        )
        g_c = stage.eta[:, None, None] * g_beta
        g_z = g_z - stage.eta[:, None, None] * g_beta
        g_beta_prev = g_beta.copy()

        # nonlinear transform layer
        g_a, d_q = plf_backward_stack(stage.plf_values, a, g_z, positions)
        g_c += g_a
        g_beta_prev += g_a

        # convolution layer
        x = tape.x[n]
        d_filters_d = conv_bank_grad_shared(x, g_c, w)
        g_x = conv_bank_contract(g_c, reflect_bank(stage.filters_d))

        # reconstruction layer
        d_h, d_rho, t = _recon_backward(
            g_x, tape.recon[n], stage.rho, z_prev, beta_prev, w, skip_inputs=(n == 0),
        )
        stage_grads[n] = BasicStageGradients(
            filters_h=d_h,
            rho_raw=d_rho * sigmoid(stage.rho_raw),
            filters_d=d_filters_d,
            plf_values=d_q,
            eta=d_eta,
        )
        if n > 0:
            g_z = t
            g_beta = g_beta_prev - t

    return BasicGradients(
        stages=stage_grads,
        final_h=dfinal_h,
        final_rho_raw=dfinal_rho * sigmoid(params.final_rho_raw),
    )


def basic_model_init(n_stages, filter_size=3, n_controls=101, rho=1.0, theta=0.05, eta=1.0):
    """Model-based initialization: orthonormal DCT filters (constant basis
    dropped), soft-threshold-sampled control values and classical solver
    constants, so the untrained net executes solver I exactly.

    ``theta`` is the shrinkage threshold ``lambda / rho``; thresholds that
    are multiples of the knot spacing keep the sampled PLF equal to the
    exact soft threshold everywhere.
    """
    bank = dct_filter_bank(filter_size)
    L = bank.shape[0]
    p = plf_positions(n_controls)
    rho_arr = np.full(L, float(rho))
    q = np.tile(soft_threshold(p, theta), (L, 1))
    stages = [
        BasicStageParams(
            filters_h=bank.copy(),
            rho_raw=softplus_inv(rho_arr),
            filters_d=bank.copy(),
            plf_values=q.copy(),
            eta=np.full(L, float(eta)),
        )
        for _ in range(n_stages)
    ]
    return BasicNetParams(
        stages=stages, final_h=bank.copy(), final_rho_raw=softplus_inv(rho_arr)
    )


def basic_random_init(
    n_stages, n_filters, filter_size=3, n_controls=101, rho=1.0, eta=1.0, seed=0
):
    """Random initialization: Gaussian filters scaled by fan-in, ReLU-sampled
    control values, solver defaults for the scalar constants."""
    rng = np.random.default_rng(seed)
    p = plf_positions(n_controls)
    q_relu = np.maximum(p, 0.0)
    std = np.sqrt(2.0 / (filter_size * filter_size))

    def bank():
        return std * rng.standard_normal((n_filters, filter_size, filter_size))

    stages = [
        BasicStageParams(
            filters_h=bank(),
            rho_raw=softplus_inv(np.full(n_filters, float(rho))),
            filters_d=bank(),
            plf_values=np.tile(q_relu, (n_filters, 1)),
            eta=np.full(n_filters, float(eta)),
        )
        for _ in range(n_stages)
    ]
    return BasicNetParams(
        stages=stages,
        final_h=bank(),
        final_rho_raw=softplus_inv(np.full(n_filters, float(rho))),
    )
