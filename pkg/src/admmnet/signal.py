"""Fourier transforms, k-space masking and circular filter algebra.

Conventions, fixed once here and relied on everywhere else:

* Fourier transforms are unitary (``1/sqrt(H*W)`` both directions), so the
  inverse transform equals the adjoint. DC sits at index (0, 0); no
  fftshift is applied internally.
* Convolutions are circular (periodic boundary) with the kernel anchored
  at its center tap. This is what makes filtered normal equations diagonal
  in the Fourier domain, so reconstruction layers can solve per frequency.
* Filters are real valued. Complex images are convolved channel-wise on
  real and imaginary parts (real taps make this plain complex arithmetic).
* ``filter_spectrum`` returns the transfer function ``dhat`` of the
  *unnormalized* DFT of the zero-padded kernel, placed at the top-left and
  circularly shifted by ``(-w//2, -w//2)``; with the unitary transforms
  above, ``fft2_unitary(conv2_circular(x, k)) = dhat * fft2_unitary(x)``.
"""

import numpy as np

from .validation import as_grid, as_kernel, as_mask, check_same_shape

__all__ = [
    "fft2_unitary",
    "ifft2_unitary",
    "apply_mask",
    "zero_filled",
    "conv2_circular",
    "conv2_adjoint",
    "reflect_kernel",
    "reflect_bank",
    "filter_spectrum",
    "filter_bank_spectra",
    "spectrum_grad_to_kernel",
    "spectra_grad_to_bank",
    "conv2_kernel_grad",
    "conv_bank",
    "conv_bank_contract",
    "conv_bank_grad_shared",
    "conv_bank_grad_stacked",
    "dct_filter_bank",
    "sampling_rate",
]


def fft2_unitary(img):
    """Unitary 2-D DFT of a (complex) image grid."""
    return np.fft.fft2(as_grid(img, "image"), norm="ortho")


def ifft2_unitary(ksp):
    """Inverse (= adjoint) of :func:`fft2_unitary`."""
    return np.fft.ifft2(as_grid(ksp, "k-space"), norm="ortho")


def apply_mask(ksp, mask):
    """Zero out frequencies not kept by the sampling mask.

    This is the orthogonal projection onto the acquired frequencies:
    idempotent and self-adjoint.
    """
    ksp = as_grid(ksp, "k-space")
    mask = as_mask(mask)
    check_same_shape(ksp, mask, "k-space and mask")
    return np.where(mask, ksp, 0.0 + 0.0j)


def zero_filled(y, mask):
    """Zero-filling reconstruction: inverse transform of the masked k-space."""
    return ifft2_unitary(apply_mask(y, mask))


def sampling_rate(mask):
    """Fraction of kept frequencies of a sampling mask."""
    mask = as_mask(mask)
    return float(mask.sum()) / mask.size


def conv2_circular(img, kernel):
    """Circular 2-D convolution of a (complex) image with a real kernel.

    The kernel is anchored at its center tap: the output at pixel ``p`` is
    ``sum_t kernel[c + t] * img[p - t]`` with ``c = w // 2`` and periodic
    indexing. Raises if the kernel is larger than the image.
    """
    img = as_grid(img, "image")
    kernel = as_kernel(kernel)
    w = kernel.shape[0]
    if w > min(img.shape):
        raise ValueError(
            f"kernel of size {w} larger than image of shape {img.shape}"
        )
    c = w // 2
    out = np.zeros_like(img)
    for i in range(w):
        for j in range(w):
            tap = kernel[i, j]
            if tap != 0.0:
                out += tap * np.roll(img, (i - c, j - c), axis=(0, 1))
    return out


def reflect_kernel(kernel):
    """Point reflection of a kernel about its center tap."""
    return np.ascontiguousarray(np.asarray(kernel)[::-1, ::-1])


def conv2_adjoint(img, kernel):
    """Adjoint of :func:`conv2_circular` in the real Re/Im inner product.

    Equals circular convolution with the point-reflected kernel.
    """
    return conv2_circular(img, reflect_kernel(as_kernel(kernel)))


def filter_spectrum(kernel, height, width):
    """Per-frequency transfer function of a center-anchored circular filter.

    Returns the unnormalized DFT of the kernel zero-padded to
    ``(height, width)`` (top-left placement, then circular shift by
    ``(-w//2, -w//2)``), so that convolution becomes an element-wise
    product in the Fourier domain.
    """
    kernel = as_kernel(kernel)
    w = kernel.shape[0]
    if w > min(height, width):
        raise ValueError(f"kernel of size {w} exceeds grid {height}x{width}")
    padded = np.zeros((height, width))
    padded[:w, :w] = kernel
    c = w // 2
    padded = np.roll(padded, (-c, -c), axis=(0, 1))
    return np.fft.fft2(padded)


def filter_bank_spectra(bank, height, width):
    """Batched :func:`filter_spectrum` over a kernel stack -> (L, H, W)."""
    bank = np.asarray(bank, dtype=np.float64)
    L, w, _ = bank.shape
    if w > min(height, width):
        raise ValueError(f"kernel of size {w} exceeds grid {height}x{width}")
    padded = np.zeros((L, height, width))
    padded[:, :w, :w] = bank
    c = w // 2
    padded = np.roll(padded, (-c, -c), axis=(1, 2))
    return np.fft.fft2(padded, axes=(-2, -1))


def spectra_grad_to_bank(grad_spectra, w):
    """Batched :func:`spectrum_grad_to_kernel` over a cotangent stack."""
    grad_spectra = np.asarray(grad_spectra)
    height, width = grad_spectra.shape[-2:]
    full = np.fft.ifft2(grad_spectra, axes=(-2, -1)) * (height * width)
    c = w // 2
    full = np.roll(full.real, (c, c), axis=(-2, -1))
    return np.ascontiguousarray(full[:, :w, :w])


def spectrum_grad_to_kernel(grad_spec, w):
    """Pull a spectrum cotangent back to real kernel taps.

    ``grad_spec`` carries d(loss)/d(Re spec) + 1j * d(loss)/d(Im spec) for a
    spectrum produced by :func:`filter_spectrum`; the return value is the
    (w, w) gradient w.r.t. the real taps. The adjoint of the unnormalized
    DFT is ``H*W * ifft2``; the adjoint of the padded placement extracts
    the tap positions.
    """
    grad_spec = np.asarray(grad_spec)
    height, width = grad_spec.shape
    full = np.fft.ifft2(grad_spec) * (height * width)
    c = w // 2
    full = np.roll(full.real, (c, c), axis=(0, 1))
    return np.ascontiguousarray(full[:w, :w])


def conv2_kernel_grad(img, grad_out, w):
    """Gradient of a circular convolution w.r.t. its real kernel taps.

    ``grad_out`` is the cotangent of ``conv2_circular(img, kernel)``;
    entries are ``Re <grad_out, shift(img)>`` per tap, which sums the real
    and imaginary channel contributions.
    """
    img = np.asarray(img)
    grad_out = np.asarray(grad_out)
    c = w // 2
    grad = np.empty((w, w))
    for i in range(w):
        for j in range(w):
            shifted = np.roll(img, (i - c, j - c), axis=(0, 1))
            grad[i, j] = np.vdot(grad_out, shifted).real
    return grad


def conv_bank(img, bank):
    """Apply a stack of kernels to one image: out[l] = bank[l] * img.

    Tap-major accumulation: one circular shift of the image per tap,
    broadcast across the L kernels.
    """
    img = np.asarray(img)
    bank = np.asarray(bank)
    L, w, _ = bank.shape
    c = w // 2
    out = np.zeros((L,) + img.shape, dtype=img.dtype)
    for i in range(w):
        for j in range(w):
            rolled = np.roll(img, (i - c, j - c), axis=(0, 1))
            out += bank[:, i, j, None, None] * rolled[None]
    return out


def conv_bank_contract(stack, bank):
    """Channel-summed convolution: sum_l bank[l] * stack[l]."""
    stack = np.asarray(stack)
    bank = np.asarray(bank)
    w = bank.shape[1]
    c = w // 2
    out = np.zeros(stack.shape[1:], dtype=stack.dtype)
    for i in range(w):
        for j in range(w):
            rolled = np.roll(stack, (i - c, j - c), axis=(1, 2))
            out += np.einsum("l,lhw->hw", bank[:, i, j], rolled)
    return out


def conv_bank_grad_shared(img, grad_stack, w):
    """Kernel gradients when every channel convolves the same image.

    ``grad_stack[l]`` is the cotangent of ``bank[l] * img``; returns the
    (L, w, w) tap gradients ``Re <grad_stack[l], shift(img)>``.
    """
    img = np.asarray(img)
    grad_stack = np.asarray(grad_stack)
    L = grad_stack.shape[0]
    c = w // 2
    grad = np.empty((L, w, w))
    gconj = np.conj(grad_stack)
    for i in range(w):
        for j in range(w):
            rolled = np.roll(img, (i - c, j - c), axis=(0, 1))
            grad[:, i, j] = np.einsum("lhw,hw->l", gconj, rolled).real
    return grad


def conv_bank_grad_stacked(stack, grad_out, w):
    """Kernel gradients of a channel-summed convolution.

    ``grad_out`` is the cotangent of ``sum_l bank[l] * stack[l]``; returns
    the (L, w, w) tap gradients ``Re <grad_out, shift(stack[l])>``.
    """
    stack = np.asarray(stack)
    grad_out = np.asarray(grad_out)
    L = stack.shape[0]
    c = w // 2
    grad = np.empty((L, w, w))
    gconj = np.conj(grad_out)
    for i in range(w):
        for j in range(w):
            rolled = np.roll(stack, (i - c, j - c), axis=(1, 2))
            grad[:, i, j] = np.einsum("hw,lhw->l", gconj, rolled).real
    return grad


def reflect_bank(bank):
    """Point reflection of every kernel in a stack."""
    return np.ascontiguousarray(np.asarray(bank)[:, ::-1, ::-1])


def dct_filter_bank(w, drop_constant=True):
    """Orthonormal 2-D DCT-II basis kernels of size ``w`` x ``w``.

    Returns an (L, w, w) stack. With ``drop_constant`` the flat basis
    kernel is discarded (it carries no structure for regularization),
    giving ``L = w**2 - 1``; otherwise all ``w**2`` kernels are returned
    in row-major (u, v) frequency order.
    """
    if w < 1 or w % 2 != 1:
        raise ValueError(f"filter size must be odd and positive, got {w}")
    n = np.arange(w)
    basis = np.cos(np.pi * (2.0 * n[None, :] + 1.0) * n[:, None] / (2.0 * w))
    scale = np.full(w, np.sqrt(2.0 / w))
    scale[0] = np.sqrt(1.0 / w)
    basis = basis * scale[:, None]  # rows: frequency u, columns: sample i
    kernels = np.einsum("ui,vj->uvij", basis, basis).reshape(w * w, w, w)
    if drop_constant:
        kernels = kernels[1:]
    return np.ascontiguousarray(kernels)
