"""Compressive acquisition and reconstruction toolkit for 2D scientific images."""

from .diffusion import (
    GaussianScore,
    MlpScore,
    NoiseSchedule,
    linear_schedule,
    load_score_weights,
    save_score_weights,
    tweedie_denoise,
)
from .forward import (
    Measurement,
    MeasurementPlan,
    add_noise,
    adjoint,
    apply,
    lipschitz_bound,
    zero_filled_inverse,
)
from .masks import (
    FourierMask,
    FourierStrategy,
    PixelMaskSet,
    compression_of,
    make_fourier_mask,
    make_pixel_masks,
)
from .metrics import psnr, shell_correlation, ssim
from .phantoms import synth_particles
from .sampler import GuidanceSchedule, guidance_weights, sample_posterior
from .sparse import Prior, SparseConfig, grid_search, solve_sparse, tv_prox
from .transforms import (
    dct2_forward,
    dct2_inverse,
    soft_threshold,
    tv_anisotropic,
    wavelet_forward,
    wavelet_inverse,
)

__version__ = "0.1.0"
