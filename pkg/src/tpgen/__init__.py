"""Generative model trained with target propagation instead of backprop.

Layer pairs (f_k up, g_k down) form Gaussian conditionals of a directed
chain; latents are inferred by iterative encoder/decoder difference
updates, layers are trained as local denoising auto-encoders, and samples
come from ancestral or inference-refined descent. Includes the
spike-timing plasticity simulation, Parzen-window scoring, IDX data
handling, and a CLI tying the stages together.
"""

from .activations import ACTIVATIONS, activation_pair, sigmoid, softplus
from .checkpoint import (
    CheckpointError,
    CheckpointVersionError,
    load_checkpoint,
    save_checkpoint,
)
from .config import RunConfig, apply_overrides, dump_config, load_config, save_config
from .data import (
    Dataset,
    IdxFormatError,
    load_idx_images,
    load_idx_labels,
    minibatches,
    save_idx_images,
    save_idx_labels,
    split,
)
from .generation import (
    GenerateConfig,
    generate,
    generate_many,
    load_raw_samples,
    render_sample_grid,
    sample_directed,
    sample_directed_many,
    sample_joint_dae_chain,
    sample_joint_dae_chain_many,
    save_raw_samples,
    write_pgm,
)
from .inference import (
    InferenceConfig,
    InferenceTrace,
    compose_visible,
    infer,
    infer_clamped,
    inpaint,
    random_visibility_mask,
    targetprop_delta,
)
from .model import (
    GaussianPrior,
    LatentState,
    LayerMap,
    LayerPair,
    NetworkParams,
    feedback_pass,
    feedforward_pass,
    init_network,
    joint_log_likelihood,
)
from .parzen import (
    ParzenModel,
    log_mean_exp,
    parzen_fit,
    parzen_log_likelihood,
    parzen_select_bandwidth,
)
from .rng import RandomSource, gaussian_noise
from .stdp import StdpConfig, StdpTrace, default_drift_rates, simulate_stdp
from .training import (
    CorruptionSpec,
    TrainConfig,
    TrainMetrics,
    corrupt,
    default_corruption,
    fit_top_prior,
    local_layer_update,
    train,
)

__version__ = "0.1.0"
