"""Positive reparameterization of penalty parameters.

Penalty weights must stay positive while the optimizer works on an
unconstrained vector, so parameter bundles store a raw value ``s`` and
expose ``rho = softplus(s)``; gradients w.r.t. ``rho`` are chained with
``sigmoid(s)``.
"""

import numpy as np

__all__ = ["softplus", "softplus_inv", "sigmoid"]


def softplus(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.where(s > 30, s, np.log1p(np.exp(np.minimum(s, 30.0))))
    return out if out.ndim else float(out)


def softplus_inv(rho):
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 0):
        raise ValueError("softplus inverse requires positive input")
    # s = rho + log(1 - exp(-rho)), stable for small and large rho
    out = rho + np.log(-np.expm1(-rho))
    return out if out.ndim else float(out)


def sigmoid(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.where(s >= 0, 1.0 / (1.0 + np.exp(-np.abs(s))), np.exp(-np.abs(s)) / (1.0 + np.exp(-np.abs(s))))
    return out if out.ndim else float(out)
