"""Online prediction of 3-way tensors under the t-product algebra.

Submodules:

``tensor_core``  t-product, t-SVD, tubal measures and the Fourier helpers
``spectral``     exp/log/entropy of PD tensors and the (beta, tau) embedding
``teg``          the exponentiated-gradient step and trace projection
``oteg``         the online tensor learner and its game loop
``baselines``    FoReL, OMEG on mode unfoldings, slice-by-slice learners
``datagen``      influence graphs and the Dataset A / B rating dynamics
``harness``      play sampling, experiment runs and output files
"""
from .oteg import OtegConfig, compute_tau_beta, nominal_learning_rate, oteg_run, regret_bound
from .tensor_core import fft3, ifft3, t_product, t_svd, t_transpose, tnn

__version__ = "0.1.0"

__all__ = [
    "OtegConfig",
    "compute_tau_beta",
    "fft3",
    "ifft3",
    "nominal_learning_rate",
    "oteg_run",
    "regret_bound",
    "t_product",
    "t_svd",
    "t_transpose",
    "tnn",
]
