"""Learnable piecewise-linear scalar functions.

The nonlinearities of the unrolled networks are piecewise-linear functions
(PLFs) with fixed, uniformly spaced control positions on [-1, 1] and
learnable control values. Outside the knot range the function continues
with slope 1 from the boundary control point; no clamping or input
normalization is performed.

Kink convention: at a control point the right segment's slope is used.
Cell location goes through ``searchsorted`` so that evaluation at a
control position returns the control value exactly.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "plf_positions",
    "plf_eval",
    "plf_grad_input",
    "plf_grad_controls",
    "plf_backward",
    "plf_apply",
    "plf_apply_stack",
    "plf_backward_stack",
    "PiecewiseLinearFunction",
    "plf_from_soft_threshold",
    "plf_from_relu",
    "soft_threshold",
]

DEFAULT_CONTROLS = 101


def plf_positions(n_controls=DEFAULT_CONTROLS):
    """Uniform control positions on [-1, 1]."""
    if n_controls < 2:
        raise ValueError(f"need at least 2 control points, got {n_controls}")
    return np.linspace(-1.0, 1.0, n_controls)


def soft_threshold(a, theta):
    """Scalar soft threshold ``sgn(a) * max(|a| - theta, 0)``."""
    a = np.asarray(a, dtype=np.float64)
    return np.sign(a) * np.maximum(np.abs(a) - theta, 0.0)


def _cells(p, a):
    """Segment index, fraction within the segment and out-of-range flags."""
    r = np.clip(np.searchsorted(p, a, side="right") - 1, 0, p.size - 2)
    seg = p[r + 1] - p[r]
    frac = (a - p[r]) / seg
    low = a < p[0]
    high = a > p[-1]
    return r, frac, low, high


def plf_eval(q, a, p=None):
    """Evaluate the PLF with control values ``q`` at points ``a``.

    ``a`` may be a scalar or an array of any shape (real valued). The
    barycentric form ``(1-frac)*q[r] + frac*q[r+1]`` keeps both segment
    endpoints exact.
    """
    q = np.asarray(q, dtype=np.float64)
    if p is None:
        p = plf_positions(q.size)
    a = np.asarray(a, dtype=np.float64)
    r, frac, low, high = _cells(p, a)
    inner = (1.0 - frac) * q[r] + frac * q[r + 1]
    out = np.where(low, a + q[0] - p[0], np.where(high, a + q[-1] - p[-1], inner))
    return out if out.ndim else float(out)


def plf_grad_input(q, a, p=None):
    """Slope of the active segment at ``a`` (1 outside the knot range)."""
    q = np.asarray(q, dtype=np.float64)
    if p is None:
        p = plf_positions(q.size)
    a = np.asarray(a, dtype=np.float64)
    r, _, low, high = _cells(p, a)
    slope = (q[r + 1] - q[r]) / (p[r + 1] - p[r])
    out = np.where(low | high, 1.0, slope)
    return out if out.ndim else float(out)


def plf_grad_controls(q, a, p=None):
    """Interpolation weights of each control value at scalar ``a``.

    Returns a dense length-``n_controls`` vector: the two bracketing
    weights for interior points, weight 1 on the boundary value outside
    the knot range.
    """
    q = np.asarray(q, dtype=np.float64)
    if p is None:
        p = plf_positions(q.size)
    weights = np.zeros(q.size)
    a = float(a)
    if a < p[0]:
        weights[0] = 1.0
    elif a > p[-1]:
        weights[-1] = 1.0
    else:
        r, frac, _, _ = _cells(p, np.asarray(a))
        weights[r] = 1.0 - frac
        weights[r + 1] = frac
    return weights


def _backward_real(q, p, a, grad_out):
    """Backward pass for one real channel: input grad and control grads."""
    r, frac, low, high = _cells(p, a)
    out_of_range = low | high
    slope = (q[r + 1] - q[r]) / (p[r + 1] - p[r])
    grad_a = np.where(out_of_range, grad_out, slope * grad_out)
    grad_q = np.zeros(q.size)
    inner = ~out_of_range
    np.add.at(grad_q, r[inner], (1.0 - frac[inner]) * grad_out[inner])
    np.add.at(grad_q, r[inner] + 1, frac[inner] * grad_out[inner])
    grad_q[0] += grad_out[low].sum()
    grad_q[-1] += grad_out[high].sum()
    return grad_a, grad_q


def plf_apply(q, a, p=None):
    """Apply the PLF element-wise; complex input is handled per component."""
    q = np.asarray(q, dtype=np.float64)
    if p is None:
        p = plf_positions(q.size)
    if np.iscomplexobj(a):
        return plf_eval(q, a.real, p) + 1j * plf_eval(q, a.imag, p)
    return plf_eval(q, a, p)


def plf_backward(q, a, grad_out, p=None):
    """Input and control gradients for a recorded PLF application.

    ``a`` is the recorded input grid, ``grad_out`` the cotangent of the
    output. For complex grids both components pass through the same PLF;
    parameter gradients sum the real- and imaginary-part contributions.
    Returns ``(grad_a, grad_q)`` with ``grad_a`` shaped like ``a``.
    """
    q = np.asarray(q, dtype=np.float64)
    if p is None:
        p = plf_positions(q.size)
    if np.iscomplexobj(a):
        ga_re, gq_re = _backward_real(q, p, a.real, np.asarray(grad_out).real)
        ga_im, gq_im = _backward_real(q, p, a.imag, np.asarray(grad_out).imag)
        return ga_re + 1j * ga_im, gq_re + gq_im
    grad_out = np.asarray(grad_out, dtype=np.float64)
    return _backward_real(q, p, np.asarray(a, dtype=np.float64), grad_out)


def _stack_index(a):
    L = a.shape[0]
    return np.arange(L).reshape((L,) + (1,) * (a.ndim - 1))


def _eval_stack_real(q, p, a):
    r, frac, low, high = _cells(p, a)
    li = _stack_index(a)
    inner = (1.0 - frac) * q[li, r] + frac * q[li, r + 1]
    return np.where(
        low, a + q[li, 0] - p[0], np.where(high, a + q[li, -1] - p[-1], inner)
    )


def plf_apply_stack(q, a, p=None):
    """Apply per-channel PLFs: ``q`` is (L, N_c), ``a`` is (L, ...)."""
    q = np.asarray(q, dtype=np.float64)
    if p is None:
        p = plf_positions(q.shape[1])
    if np.iscomplexobj(a):
        return _eval_stack_real(q, p, a.real) + 1j * _eval_stack_real(q, p, a.imag)
    return _eval_stack_real(q, p, np.asarray(a, dtype=np.float64))


def _backward_stack_real(q, p, a, grad_out):
    r, frac, low, high = _cells(p, a)
    inner = ~(low | high)
    li = np.broadcast_to(_stack_index(a), a.shape)
    slope = (q[_stack_index(a), r + 1] - q[_stack_index(a), r]) / (p[r + 1] - p[r])
    grad_a = np.where(inner, slope * grad_out, grad_out)
    grad_q = np.zeros_like(q)
    np.add.at(grad_q, (li[inner], r[inner]), (1.0 - frac[inner]) * grad_out[inner])
    np.add.at(grad_q, (li[inner], r[inner] + 1), frac[inner] * grad_out[inner])
    np.add.at(grad_q, (li[low], 0), grad_out[low])
    np.add.at(grad_q, (li[high], q.shape[1] - 1), grad_out[high])
    return grad_a, grad_q


def plf_backward_stack(q, a, grad_out, p=None):
    """Stacked analogue of :func:`plf_backward` for per-channel PLFs."""
    q = np.asarray(q, dtype=np.float64)
    if p is None:
        p = plf_positions(q.shape[1])
    if np.iscomplexobj(a):
        ga_re, gq_re = _backward_stack_real(q, p, a.real, np.asarray(grad_out).real)
        ga_im, gq_im = _backward_stack_real(q, p, a.imag, np.asarray(grad_out).imag)
        return ga_re + 1j * ga_im, gq_re + gq_im
    return _backward_stack_real(
        q, p, np.asarray(a, dtype=np.float64), np.asarray(grad_out, dtype=np.float64)
    )


@dataclass(frozen=True)
class PiecewiseLinearFunction:
    """A PLF with fixed uniform knots on [-1, 1] and given control values."""

    values: np.ndarray
    positions: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if self.positions is None:
            object.__setattr__(self, "positions", plf_positions(values.size))
        if self.positions.size != values.size:
            raise ValueError("positions and values must have equal length")

    @property
    def n_controls(self):
        return self.values.size

    def __call__(self, a):
        return plf_apply(self.values, a, self.positions)

    def grad_input(self, a):
        return plf_grad_input(self.values, a, self.positions)

    def grad_controls(self, a):
        return plf_grad_controls(self.values, a, self.positions)


def plf_from_soft_threshold(theta, n_controls=DEFAULT_CONTROLS):
    """PLF sampling the soft threshold: ``q_i = sgn(p_i) max(|p_i|-theta, 0)``."""
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    p = plf_positions(n_controls)
    return PiecewiseLinearFunction(soft_threshold(p, theta), p)


def plf_from_relu(n_controls=DEFAULT_CONTROLS):
    """PLF sampling a rectified linear unit: ``q_i = max(p_i, 0)``."""
    p = plf_positions(n_controls)
    return PiecewiseLinearFunction(np.maximum(p, 0.0), p)
