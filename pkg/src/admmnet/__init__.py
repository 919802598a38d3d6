"""Unrolled ADMM networks for compressive-sensing MRI reconstruction."""

from .signal import (
    fft2_unitary,
    ifft2_unitary,
    apply_mask,
    zero_filled,
    conv2_circular,
    conv2_adjoint,
    filter_spectrum,
    dct_filter_bank,
    sampling_rate,
)
from .plf import (
    PiecewiseLinearFunction,
    plf_eval,
    plf_grad_input,
    plf_grad_controls,
    plf_from_soft_threshold,
    plf_from_relu,
)
from .solvers import (
    Solver1Config,
    Solver2Config,
    admm_solver1,
    admm_solver2,
    augmented_lagrangian_1,
)
from .basic import (
    BasicNetParams,
    basic_forward,
    basic_backward,
    basic_model_init,
    basic_random_init,
    basic_recon_layer,
)
from .generic import (
    GenericNetParams,
    generic_forward,
    generic_backward,
    generic_model_init,
    generic_random_init,
    generic_recon_layer,
    denoise_substage,
)
from .training import (
    TrainConfig,
    nmse_loss,
    nmse_grad,
    psnr,
    pack_params,
    unpack_params,
    lbfgs_minimize,
    train_net,
    finite_diff_check,
)
from .data import (
    Dataset,
    make_dataset,
    make_phantom,
    pseudo_radial_mask,
    simulate_kspace,
    read_container,
    write_container,
)
from .estimator import AdmmNetReconstructor

__version__ = "0.1.0"
