"""Iterative diffusion-style cost volume filtering for stereo matching.

A classical census-correlation matcher produces a base cost volume; a
diffusion filter volume, denoised over a handful of DDIM steps, gates that
volume so redundant disparity hypotheses fade out. Volume renewal resets
badly behaving pixels and dense integration blends the per-step
predictions with the unfiltered baseline.
"""

from .datagen import PlaneRegion, SceneSpec, default_suite, gen_stereogram, warp_with_disparity
from .matcher import (
    ImagePair,
    MatcherConfig,
    aggregate,
    base_predict,
    build_concat_volume,
    build_group_corr_volume,
    compute_base_volume,
    extract_features,
    fuse_volumes,
    make_matcher,
)
from .metrics import MetricReport, bad_p, d1, epe, evaluate, weighted_l1_loss
from .pipeline import SceneRun, run_pair, run_scene, run_suite
from .sampler import (
    RenewalPolicy,
    SamplerConfig,
    SamplerOutput,
    ddim_step,
    ddpm_mean,
    ddpm_step,
    dense_integration,
    run_reverse,
    time_embedding,
    volume_renewal,
)
from .schedule import NoiseSchedule, cosine_schedule, predict_x0, q_sample, recover_noise
from .volume import (
    DisparityMap,
    discretize_two_hot,
    downsample_disparity,
    entropy_map,
    filter_volume,
    rescale_signed,
    rescale_unit,
    signed_volume_entropy,
    soft_argmin,
)

__version__ = "0.1.0"
