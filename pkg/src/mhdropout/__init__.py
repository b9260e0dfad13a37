"""Multiple-hypothesis dropout networks, stochastic winner-take-all training,
mixtures of multiple-output functions and a toy MH-VQ autoencoder."""

from .autodiff import Parameter, Tape, Tensor, backward, sgd_step, zero_grad
from .dropout import (
    DropoutMask,
    DropoutSpec,
    MHDropoutNetwork,
    enumerate_masks,
    forward_masked,
    hypotheses,
    mc_dropout_inference,
    predictive_mean,
    predictive_variance,
    sample_masks,
)
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateSampleError,
    DimensionError,
    MHDropoutError,
    NumericError,
    ValidationError,
)
from .losses import WinnerSelection, mixture_wta_loss, mom_loss, swta_loss, wta_loss
from .network import MLP

__version__ = "0.1.0"
