"""AMP with sliding-window denoisers for binary Markov random field signals."""

from .amp import AmpConfig, AmpRecord, AmpState, AmpTrajectory, amp_init, amp_step, run_amp
from .denoisers import (
    BayesWindowDenoiser,
    DenoiseResult,
    DenoiserSpec,
    apply_denoiser,
    bayes_window_denoise,
    bayes_window_derivative,
    tv_denoise,
)
from .estimator import AmpRecovery, SlidingWindowDenoiser
from .lattice import (
    LatticeShape,
    WindowSpec,
    devectorize,
    extract_window,
    partition_indices,
    shift_window_fill,
    vectorize,
    window_patches,
)
from .measurement import MeasurementModel, calibrate_noise, measure, n_measurements, sample_matrix
from .metrics import TrialSummary, concentration_report, mse, pl2_loss
from .mrf import (
    BlockJoint,
    MrfParams,
    WindowDistribution,
    derive_block_joint,
    dobrushin_coefficients,
    sample_field,
    window_marginal,
)
from .state_evolution import SeTrajectory, family_weights, run_se, se_init, se_step

__version__ = "0.1.0"
