"""Classical ADMM solvers for the filtered CS-MRI model.

Two variable splittings of the same objective
``0.5 * ||P F x - y||^2 + sum_l lambda_l g(D_l x)``:

* Solver I introduces one auxiliary variable per filter response
  (``z_l = D_l x``); its z-update is an exact per-component soft
  threshold and its x-update is solved per frequency through the filter
  spectra.
* Solver II splits in the image domain (``z = x``) and handles the
  regularizer by a few inner gradient-descent steps whose nonlinearity
  ``shrink`` is pluggable; the default matches the PLF used for
  model-based network initialization, which makes these solvers exact
  stage-by-stage oracles for the initialized networks.

Both operate on complex grids natively; thresholds act on real and
imaginary parts separately.
"""

from dataclasses import dataclass, field

import numpy as np

from .plf import plf_from_soft_threshold, soft_threshold
from .signal import (
    apply_mask,
    conv2_adjoint,
    conv2_circular,
    fft2_unitary,
    filter_spectrum,
    ifft2_unitary,
)
from .validation import as_filter_bank, as_grid, as_mask, check_same_shape

__all__ = [
    "Solver1Config",
    "Solver2Config",
    "Solver1Trace",
    "Solver2Trace",
    "admm_solver1",
    "admm_solver2",
    "augmented_lagrangian_1",
]


@dataclass
class Solver1Config:
    """Parameters of the per-filter splitting (solver I).

    ``theta`` holds the shrinkage thresholds ``lambda_l / rho_l``; ``eta``
    the dual update rates (1.0 is the standard scaled-dual choice).
    """

    filters: np.ndarray
    rho: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    iterations: int = 10

    def __post_init__(self):
        self.filters = as_filter_bank(self.filters)
        L = self.filters.shape[0]
        self.rho = np.broadcast_to(np.asarray(self.rho, dtype=np.float64), (L,)).copy()
        self.eta = np.broadcast_to(np.asarray(self.eta, dtype=np.float64), (L,)).copy()
        self.theta = np.broadcast_to(np.asarray(self.theta, dtype=np.float64), (L,)).copy()
        if np.any(self.rho <= 0):
            raise ValueError("penalty parameters rho must be positive")
        if np.any(self.theta < 0):
            raise ValueError("shrinkage thresholds must be nonnegative")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")


@dataclass
class Solver2Config:
    """Parameters of the image-domain splitting (solver II).

    ``mu1``/``mu2`` are the inner gradient-descent mixing weights
    (``mu1 = 1 - step * rho``, ``mu2 = step * rho``) and ``lambdas`` the
    per-filter step-scaled regularization weights ``step * lambda_l``.
    ``shrink`` maps filter responses element-wise; the default is the
    soft-threshold-sampled PLF so the solver matches the initialized
    network bit-for-bit in structure.
    """

    filters: np.ndarray
    rho: float
    eta: float
    mu1: float
    mu2: float
    lambdas: np.ndarray
    inner_iterations: int = 1
    iterations: int = 10
    shrink: object = field(default=None)

    def __post_init__(self):
        self.filters = as_filter_bank(self.filters)
        L = self.filters.shape[0]
        self.lambdas = np.broadcast_to(
            np.asarray(self.lambdas, dtype=np.float64), (L,)
        ).copy()
        if self.rho <= 0:
            raise ValueError("penalty parameter rho must be positive")
        if self.inner_iterations < 1 or self.iterations < 1:
            raise ValueError("iteration counts must be at least 1")
        if self.shrink is None:
            self.shrink = plf_from_soft_threshold(0.5)


@dataclass
class Solver1Trace:
    """Per-iteration state of solver I (images, filter codes, duals)."""

    x: list
    z: list
    beta: list


@dataclass
class Solver2Trace:
    """Per-iteration state of solver II, including inner z iterates."""

    x: list
    z: list
    z_inner: list
    beta: list


def _shrink_complex(a, theta):
    return soft_threshold(a.real, theta) + 1j * soft_threshold(a.imag, theta)


def admm_solver1(y, mask, cfg, record=False):
    """Run solver I; returns the per-iteration images ``x^(1..N)``.

    ``y`` is zero-filled k-space (entries off the mask are ignored).
    With ``record=True`` also returns the full iterate trace.
    """
    y = as_grid(y, "k-space data")
    mask = as_mask(mask)
    check_same_shape(y, mask, "data and mask")
    H, W = y.shape
    L = cfg.filters.shape[0]

    spectra = np.stack([filter_spectrum(k, H, W) for k in cfg.filters])
    denom = mask.astype(np.float64) + np.einsum(
        "l,lhw->hw", cfg.rho, np.abs(spectra) ** 2
    )
    if np.any(denom <= 0):
        k = tuple(int(v) for v in np.unravel_index(int(np.argmin(denom)), denom.shape))
        raise ValueError(f"singular reconstruction at frequency {k}")

    my = np.where(mask, y, 0.0)
    z = np.zeros((L, H, W), dtype=np.complex128)
    beta = np.zeros((L, H, W), dtype=np.complex128)
    images = []
    trace = Solver1Trace(x=[], z=[], beta=[])
    for _ in range(cfg.iterations):
        num = my.astype(np.complex128)
        for l in range(L):
            num = num + cfg.rho[l] * np.conj(spectra[l]) * fft2_unitary(z[l] - beta[l])
        x = ifft2_unitary(num / denom)
        for l in range(L):
            c = conv2_circular(x, cfg.filters[l])
            z[l] = _shrink_complex(c + beta[l], cfg.theta[l])
            beta[l] = beta[l] + cfg.eta[l] * (c - z[l])
        images.append(x)
        if record:
            trace.x.append(x)
            trace.z.append(z.copy())
            trace.beta.append(beta.copy())
    if record:
        return images, trace
    return images


def admm_solver2(y, mask, cfg, record=False):
    """Run solver II; returns the per-iteration images ``x^(1..N)``."""
    y = as_grid(y, "k-space data")
    mask = as_mask(mask)
    check_same_shape(y, mask, "data and mask")
    L = cfg.filters.shape[0]

    m = mask.astype(np.float64)
    denom = m + cfg.rho
    my = np.where(mask, y, 0.0)
    z = np.zeros_like(y)
    beta = np.zeros_like(y)
    images = []
    trace = Solver2Trace(x=[], z=[], z_inner=[], beta=[])
    for _ in range(cfg.iterations):
        x = ifft2_unitary((my + cfg.rho * fft2_unitary(z - beta)) / denom)
        u = x + beta
        zk = u
        inner = [zk]
        for _ in range(cfg.inner_iterations):
            step = np.zeros_like(y)
            for l in range(L):
                r = cfg.shrink(conv2_circular(zk, cfg.filters[l]))
                step = step + cfg.lambdas[l] * conv2_adjoint(r, cfg.filters[l])
            zk = cfg.mu1 * zk + cfg.mu2 * u - step
            inner.append(zk)
        z = zk
        beta = beta + cfg.eta * (x - z)
        images.append(x)
        if record:
            trace.x.append(x)
            trace.z.append(z)
            trace.z_inner.append(inner)
            trace.beta.append(beta)
    if record:
        return images, trace
    return images


def augmented_lagrangian_1(x, z, beta, y, mask, cfg):
    """Augmented Lagrangian of splitting I with a component-wise l1 prior.

    Uses the scaled duals ``alpha_l = rho_l * beta_l`` and
    ``g(v) = sum |Re v| + |Im v|``, the prior whose proximal map is the
    per-component soft threshold used by the z-update.
    """
    x = as_grid(x, "image")
    residual = apply_mask(fft2_unitary(x), mask) - np.where(as_mask(mask), y, 0.0)
    value = 0.5 * float(np.sum(np.abs(residual) ** 2))
    for l in range(cfg.filters.shape[0]):
        dx = conv2_circular(x, cfg.filters[l])
        gap = dx - z[l]
        lam = cfg.theta[l] * cfg.rho[l]
        value += lam * float(np.sum(np.abs(z[l].real) + np.abs(z[l].imag)))
        value += cfg.rho[l] * float(np.vdot(beta[l], gap).real)
        value += 0.5 * cfg.rho[l] * float(np.sum(np.abs(gap) ** 2))
    return value
