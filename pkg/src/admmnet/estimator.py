"""Scikit-learn-style estimator wrapping the unrolled networks.

``AdmmNetReconstructor`` exposes the train/reconstruct workflow through
the familiar ``fit``/``predict``/``score`` surface so the nets compose
with pipelines and model-selection tooling: ``X`` is a stack of masked
k-space grids, ``y`` the matching ground-truth images, and the shared
sampling mask is passed to ``fit``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .basic import basic_forward, basic_model_init, basic_random_init
from .data import Dataset
from .generic import generic_forward, generic_model_init, generic_random_init
from .signal import sampling_rate
from .training import TrainConfig, nmse_loss, train_net
from .validation import as_mask

__all__ = ["AdmmNetReconstructor"]

_NETS = ("basic", "generic", "complex")
_INITS = ("model", "random")


def _check_stack(arr, name):
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be (n_samples, H, W), got shape {arr.shape}")
    return arr.astype(np.complex128, copy=False)


class AdmmNetReconstructor(BaseEstimator):
    """Learned unrolled-ADMM reconstructor for masked k-space data.

    Parameters mirror the network architecture knobs: ``net`` selects the
    per-filter variant (``"basic"``), the image-domain variant
    (``"generic"``) or the latter flagged for complex-valued images
    (``"complex"``); ``init`` chooses model-based or random
    initialization. ``score`` returns the negative mean relative error,
    so greater is better as model-selection tools expect.
    """

    def __init__(
        self,
        net="generic",
        n_stages=3,
        n_filters=8,
        filter_size=3,
        n_subiters=1,
        n_controls=101,
        fusion_size=None,
        init="model",
        rho=1.0,
        lam=0.05,
        step=0.1,
        eta=1.0,
        max_iter=100,
        history=10,
        gtol=1e-8,
        threads=1,
        seed=0,
    ):
        self.net = net
        self.n_stages = n_stages
        self.n_filters = n_filters
        self.filter_size = filter_size
        self.n_subiters = n_subiters
        self.n_controls = n_controls
        self.fusion_size = fusion_size
        self.init = init
        self.rho = rho
        self.lam = lam
        self.step = step
        self.eta = eta
        self.max_iter = max_iter
        self.history = history
        self.gtol = gtol
        self.threads = threads
        self.seed = seed

    def _initial_params(self):
        if self.net not in _NETS:
            raise ValueError(f"net must be one of {_NETS}, got {self.net!r}")
        if self.init not in _INITS:
            raise ValueError(f"init must be one of {_INITS}, got {self.init!r}")
        L_model = self.filter_size**2 - 1
        if self.init == "model" and self.n_filters != L_model:
            raise ValueError(
                f"model-based initialization with filter_size={self.filter_size} "
                f"fixes n_filters={L_model}, got {self.n_filters}"
            )
        if self.net == "basic":
            if self.init == "model":
                return basic_model_init(
                    self.n_stages,
                    filter_size=self.filter_size,
                    n_controls=self.n_controls,
                    rho=self.rho,
                    theta=self.lam / self.rho,
                    eta=self.eta,
                )
            return basic_random_init(
                self.n_stages,
                self.n_filters,
                filter_size=self.filter_size,
                n_controls=self.n_controls,
                rho=self.rho,
                eta=self.eta,
                seed=self.seed,
            )
        complex_mode = self.net == "complex"
        if self.init == "model":
            return generic_model_init(
                self.n_stages,
                n_subiters=self.n_subiters,
                filter_size=self.filter_size,
                n_controls=self.n_controls,
                rho=self.rho,
                lam=self.lam,
                step=self.step,
                eta=self.eta,
                fusion_size=self.fusion_size,
                complex_mode=complex_mode,
            )
        return generic_random_init(
            self.n_stages,
            self.n_filters,
            n_subiters=self.n_subiters,
            filter_size=self.filter_size,
            n_controls=self.n_controls,
            rho=self.rho,
            step=self.step,
            eta=self.eta,
            fusion_size=self.fusion_size,
            complex_mode=complex_mode,
            seed=self.seed,
        )

    def fit(self, X, y, mask=None):
        """Train on masked k-space ``X`` and ground-truth images ``y``.

        ``mask`` is the shared boolean sampling mask; it is stored on the
        estimator and reused by ``predict``/``score``.
        """
        X = _check_stack(X, "X")
        y = _check_stack(y, "y")
        if X.shape != y.shape:
            raise ValueError(f"X and y shapes differ: {X.shape} vs {y.shape}")
        if mask is None:
            raise ValueError("fit requires the sampling mask")
        mask = as_mask(mask)
        dataset = Dataset(
            y=X, xgt=y, mask=mask, sampling_rate=sampling_rate(mask)
        )
        params = self._initial_params()
        cfg = TrainConfig(max_iters=self.max_iter, history=self.history, gtol=self.gtol)
        self.params_, result = train_net(params, dataset, cfg, threads=self.threads)
        self.mask_ = mask
        self.loss_curve_ = [row[1] for row in result.history]
        self.n_iter_ = result.n_iters
        self.status_ = result.status
        return self

    def _forward(self):
        return basic_forward if self.net == "basic" else generic_forward

    def predict(self, X):
        """Reconstruct images from masked k-space grids."""
        if not hasattr(self, "params_"):
            raise NotFittedError("this reconstructor has not been fitted yet")
        X = _check_stack(X, "X")
        forward = self._forward()
        return np.stack([forward(x, self.mask_, self.params_) for x in X])

    def score(self, X, y):
        """Negative mean relative reconstruction error (greater is better)."""
        y = _check_stack(y, "y")
        return -nmse_loss(self.predict(X), y)
