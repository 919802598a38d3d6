"""The image-domain unrolled network (variant II, the default).

Each stage runs a scalar-penalty reconstruction layer, a denoising
sub-stage of ``N_t`` inner iterations (addition + two convolutions + a
learned piecewise-linear nonlinearity) and a multiplier update. A final
reconstruction layer with its own penalty produces the output.

Complex data support follows one rule: all grids are complex arrays, real
filters act by plain complex arithmetic, the nonlinearity is applied to
real and imaginary parts separately with shared control values, and real
biases add to the real component. Real-valued data is simply the special
case with zero imaginary parts, so the ``complex_mode`` flag on the
parameter bundle documents intent (and selects complex phantoms in the
data harness) without changing the numerics.
"""

from dataclasses import dataclass, field

import numpy as np

from .plf import plf_apply, plf_backward, plf_positions, soft_threshold
from .reparam import sigmoid, softplus, softplus_inv
from .signal import (
    conv_bank,
    conv_bank_contract,
    conv_bank_grad_shared,
    conv_bank_grad_stacked,
    dct_filter_bank,
    fft2_unitary,
    ifft2_unitary,
    reflect_bank,
    reflect_kernel,
)
from .validation import as_grid, as_mask, check_same_shape

__all__ = [
    "GenericSubIterParams",
    "GenericStageParams",
    "GenericNetParams",
    "GenericTape",
    "GenericGradients",
    "generic_recon_layer",
    "denoise_substage",
    "generic_forward",
    "generic_backward",
    "generic_model_init",
    "generic_random_init",
]


@dataclass
class GenericSubIterParams:
    """Parameters of one inner denoising iteration."""

    mu1: float
    mu2: float
    w1: np.ndarray          # (L, w, w) feature filters
    b1: np.ndarray          # (L,) feature biases
    w2: np.ndarray          # (L, f, f) fusion filter over the L channels
    b2: float
    plf_values: np.ndarray  # (N_c,) shared across channels


@dataclass
class GenericStageParams:
    rho_raw: float
    subiters: list
    eta: float

    @property
    def rho(self):
        return softplus(self.rho_raw)


@dataclass
class GenericNetParams:
    stages: list
    final_rho_raw: float
    complex_mode: bool = False

    @property
    def final_rho(self):
        return softplus(self.final_rho_raw)

    @property
    def n_stages(self):
        return len(self.stages)

    @property
    def n_subiters(self):
        return len(self.stages[0].subiters)

    @property
    def n_filters(self):
        return self.stages[0].subiters[0].w1.shape[0]

    @property
    def filter_size(self):
        return self.stages[0].subiters[0].w1.shape[1]

    @property
    def fusion_size(self):
        return self.stages[0].subiters[0].w2.shape[1]

    @property
    def n_controls(self):
        return self.stages[0].subiters[0].plf_values.shape[0]


@dataclass
class GenericTape:
    x: list = field(default_factory=list)       # per stage (H, W)
    u: list = field(default_factory=list)       # per stage x + beta_prev
    z_iters: list = field(default_factory=list)  # per stage: list of N_t+1 grids
    c1: list = field(default_factory=list)      # per stage: list of (L, H, W)
    h: list = field(default_factory=list)       # per stage: list of (L, H, W)
    beta: list = field(default_factory=list)    # per stage (H, W)
    recon: list = field(default_factory=list)   # per stage (fhat, xhat)
    final_recon: tuple = None
    output: np.ndarray = None


@dataclass
class GenericSubIterGradients:
    mu1: float
    mu2: float
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    plf_values: np.ndarray


@dataclass
class GenericStageGradients:
    rho_raw: float
    subiters: list
    eta: float


@dataclass
class GenericGradients:
    stages: list
    final_rho_raw: float


def _recon_solve(y, mask, rho, z, beta):
    m = mask.astype(np.float64)
    my = np.where(mask, y, 0.0)
    if z is None:
        fhat = np.zeros_like(y)
    else:
        fhat = fft2_unitary(z - beta)
    xhat = (my + rho * fhat) / (m + rho)
    return ifft2_unitary(xhat), (fhat, xhat)


def generic_recon_layer(y, mask, rho, z=None, beta=None):
    """Reconstruction layer with a scalar penalty, solved per frequency."""
    y = as_grid(y, "k-space data")
    mask = as_mask(mask)
    check_same_shape(y, mask, "data and mask")
    if rho <= 0:
        raise ValueError(f"penalty rho must be positive, got {rho}")
    if (z is None) != (beta is None):
        raise ValueError("z and beta must be given together")
    x, _ = _recon_solve(y, mask, rho, z, beta)
    return x


def _substage_forward(x, beta_prev, subiters, positions, record):
    u = x + beta_prev
    zk = u
    z_iters, c1s, hs = [zk], [], []
    for sub in subiters:
        c1 = conv_bank(zk, sub.w1) + sub.b1[:, None, None]
        h = plf_apply(sub.plf_values, c1, positions)
        c2 = conv_bank_contract(h, sub.w2) + sub.b2
        zk = sub.mu1 * zk + sub.mu2 * u - c2
        if record:
            z_iters.append(zk)
            c1s.append(c1)
            hs.append(h)
    return zk, u, z_iters, c1s, hs


def denoise_substage(x, beta, subiters, n_controls=None):
    """Run the inner denoising iterations; returns (z, sub-tape).

    The sub-tape holds the inner iterates ``z^(0..N_t)``, feature maps and
    nonlinearity outputs, in forward order.
    """
    x = as_grid(x, "image")
    beta = as_grid(beta, "dual variable")
    check_same_shape(x, beta, "image and dual")
    positions = plf_positions(subiters[0].plf_values.size)
    zk, u, z_iters, c1s, hs = _substage_forward(x, beta, subiters, positions, True)
    return zk, {"u": u, "z_iters": z_iters, "c1": c1s, "h": hs}


def generic_forward(y, mask, params, record=False):
    """Forward pass; with ``record`` also returns the tape for backward."""
    y = as_grid(y, "k-space data")
    mask = as_mask(mask)
    check_same_shape(y, mask, "data and mask")
    positions = plf_positions(params.n_controls)
    tape = GenericTape() if record else None

    z = None
    beta = None
    for stage in params.stages:
        x, cache = _recon_solve(y, mask, stage.rho, z, beta)
        if beta is None:
            beta = np.zeros_like(y)
        z, u, z_iters, c1s, hs = _substage_forward(
            x, beta, stage.subiters, positions, record
        )
        beta = beta + stage.eta * (x - z)
        if record:
            tape.x.append(x)
            tape.u.append(u)
            tape.z_iters.append(z_iters)
            tape.c1.append(c1s)
            tape.h.append(hs)
            tape.beta.append(beta)
            tape.recon.append(cache)
    out, final_cache = _recon_solve(y, mask, params.final_rho, z, beta)
    if record:
        tape.final_recon = final_cache
        tape.output = out
        return out, tape
    return out


def _recon_backward(grad_x, cache, rho, mask, skip_inputs):
    """Backward through one scalar-penalty reconstruction layer."""
    fhat, xhat = cache
    m = mask.astype(np.float64)
    denom = m + rho
    grad_xhat = fft2_unitary(grad_x)
    d_rho = float(np.sum((np.conj(grad_xhat) * (fhat - xhat)).real / denom))
    if skip_inputs:
        return d_rho, None
    t = ifft2_unitary(rho / denom * grad_xhat)
    return d_rho, t


def generic_backward(tape, y, mask, params, grad_at_output, record_adjoints=False):
    """Gradients of a scalar loss w.r.t. every parameter.

    With ``record_adjoints`` also returns a per-stage list of the
    multiplier-layer contributions to the image and denoiser adjoints
    (used to assert the update-layer gradient identity).
    """
    if tape is None or tape.final_recon is None:
        raise ValueError("backward requires a tape recorded by generic_forward")
    n_stages = params.n_stages
    if len(tape.x) != n_stages:
        raise ValueError(
            f"tape has {len(tape.x)} stages but params expect {n_stages}"
        )
    w = params.filter_size
    f = params.fusion_size
    positions = plf_positions(params.n_controls)
    mask = as_mask(mask)
    grad_out = as_grid(grad_at_output, "output gradient")

    dfinal_rho, t = _recon_backward(
        grad_out, tape.final_recon, params.final_rho, mask, skip_inputs=False
    )
    g_z = t
    g_beta = -t

    stage_grads = [None] * n_stages
    adjoints = [None] * n_stages
    for n in reversed(range(n_stages)):
        stage = params.stages[n]
        x = tape.x[n]
        u = tape.u[n]
        z_iters = tape.z_iters[n]
        z_final = z_iters[-1]

        # multiplier update layer
        d_eta = np.vdot(g_beta, x - z_final).real
        m_to_x = stage.eta * g_beta
        g_x = m_to_x.copy()
        g_z = g_z - stage.eta * g_beta
        g_beta_prev = g_beta.copy()
        if record_adjoints:
            adjoints[n] = {"m_to_x": m_to_x, "m_to_z": -stage.eta * g_beta}

        # denoising sub-stage, inner iterations in reverse
        sub_grads = [None] * len(stage.subiters)
        g_zk = g_z
        g_u = np.zeros_like(u)
        for k in reversed(range(len(stage.subiters))):
            sub = stage.subiters[k]
            z_prev = z_iters[k]
            c1 = tape.c1[n][k]
            h = tape.h[n][k]

            d_mu1 = np.vdot(g_zk, z_prev).real
            d_mu2 = np.vdot(g_zk, u).real
            g_c2 = -g_zk
            g_u += sub.mu2 * g_zk
            g_zprev = sub.mu1 * g_zk

            d_b2 = float(np.sum(g_c2.real))
            d_w2 = conv_bank_grad_stacked(h, g_c2, f)
            g_h = conv_bank(g_c2, reflect_bank(sub.w2))
            g_c1, d_q = plf_backward(sub.plf_values, c1, g_h, positions)
            d_b1 = np.einsum("lhw->l", g_c1.real)
            d_w1 = conv_bank_grad_shared(z_prev, g_c1, w)
            g_zprev += conv_bank_contract(g_c1, reflect_bank(sub.w1))
            sub_grads[k] = GenericSubIterGradients(
                mu1=d_mu1, mu2=d_mu2, w1=d_w1, b1=d_b1, w2=d_w2, b2=d_b2, plf_values=d_q
            )
            g_zk = g_zprev
        g_u += g_zk  # z^(n,0) = u

        # split u = x + beta_prev
        g_x += g_u
        g_beta_prev += g_u

        # reconstruction layer
        d_rho, t = _recon_backward(
            g_x, tape.recon[n], stage.rho, mask, skip_inputs=(n == 0)
        )
        stage_grads[n] = GenericStageGradients(
            rho_raw=d_rho * sigmoid(stage.rho_raw), subiters=sub_grads, eta=d_eta
        )
        if n > 0:
            g_z = t
            g_beta = g_beta_prev - t

    grads = GenericGradients(
        stages=stage_grads,
        final_rho_raw=dfinal_rho * sigmoid(params.final_rho_raw),
    )
    if record_adjoints:
        return grads, adjoints
    return grads


def generic_model_init(
    n_stages,
    n_subiters=1,
    filter_size=3,
    n_controls=101,
    rho=1.0,
    lam=0.05,
    step=0.1,
    eta=1.0,
    fusion_size=None,
    complex_mode=False,
):
    """Model-based initialization mirroring classical solver II.

    Feature filters are the DCT bank; the fusion filter applies the
    step-scaled adjoint filters (``step * lam`` times the point-reflected
    kernels); mixing weights are ``1 - step*rho`` and ``step*rho``; the
    nonlinearity samples the soft threshold at ``lam / rho``. The
    initialized net reproduces the solver II iterates exactly.
    """
    if fusion_size is not None and fusion_size != filter_size:
        raise ValueError(
            "model-based initialization requires fusion_size == filter_size"
        )
    bank = dct_filter_bank(filter_size)
    L = bank.shape[0]
    p = plf_positions(n_controls)
    q = soft_threshold(p, lam / rho)
    w2 = np.stack([step * lam * reflect_kernel(bank[l]) for l in range(L)])

    def subiter():
        return GenericSubIterParams(
            mu1=1.0 - step * rho,
            mu2=step * rho,
            w1=bank.copy(),
            b1=np.zeros(L),
            w2=w2.copy(),
            b2=0.0,
            plf_values=q.copy(),
        )

    stages = [
        GenericStageParams(
            rho_raw=softplus_inv(rho),
            subiters=[subiter() for _ in range(n_subiters)],
            eta=float(eta),
        )
        for _ in range(n_stages)
    ]
    return GenericNetParams(
        stages=stages, final_rho_raw=softplus_inv(rho), complex_mode=complex_mode
    )


def generic_random_init(
    n_stages,
    n_filters,
    n_subiters=1,
    filter_size=3,
    n_controls=101,
    rho=1.0,
    step=0.1,
    eta=1.0,
    fusion_size=None,
    complex_mode=False,
    seed=0,
):
    """Random initialization: fan-in-scaled Gaussian filters, ReLU-sampled
    control values, solver defaults for the scalar constants."""
    rng = np.random.default_rng(seed)
    f = fusion_size or filter_size
    p = plf_positions(n_controls)
    q_relu = np.maximum(p, 0.0)
    std1 = np.sqrt(2.0 / (filter_size * filter_size))
    std2 = np.sqrt(2.0 / (f * f * n_filters))

    def subiter():
        return GenericSubIterParams(
            mu1=1.0 - step * rho,
            mu2=step * rho,
            w1=std1 * rng.standard_normal((n_filters, filter_size, filter_size)),
            b1=np.zeros(n_filters),
            w2=std2 * rng.standard_normal((n_filters, f, f)),
            b2=0.0,
            plf_values=q_relu.copy(),
        )

    stages = [
        GenericStageParams(
            rho_raw=softplus_inv(rho),
            subiters=[subiter() for _ in range(n_subiters)],
            eta=float(eta),
        )
        for _ in range(n_stages)
    ]
    return GenericNetParams(
        stages=stages, final_rho_raw=softplus_inv(rho), complex_mode=complex_mode
    )
