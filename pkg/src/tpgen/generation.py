"""Sampling procedures: directed ancestral draws, inference-refined
generation, and the joint denoising-auto-encoder Markov chain.

All three return visible MEANS. The visible conditional is a unit-variance
Gaussian around g1(h1), but sampling actual pixel noise would bury the
image; the mean is the useful sample. Noise enters the chain sampler
through corruption of the latent/visible state instead.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .inference import InferenceConfig, infer
from .model import NetworkParams, feedback_pass
from .rng import RandomSource
from .training import CorruptionSpec, corrupt, default_corruption


@dataclass
class GenerateConfig:
    refinement_steps: int = 3
    refinement_alpha: float = 0.3
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    chain_steps: int = 10
    inject_noise: bool = True

    def validate(self):
        if self.refinement_steps < 0:
            raise ValueError("refinement_steps must be >= 0")
        if self.chain_steps < 0:
            raise ValueError("chain_steps must be >= 0")


def _require_prior(params: NetworkParams):
    if params.prior is None:
        raise RuntimeError("sampling requires a fitted top-layer prior")


def _ancestral(params: NetworkParams, rng: RandomSource, n: int | None):
    """Prior draw + deterministic descent; returns (latent state, x)."""
    _require_prior(params)
    top = params.prior.sample(rng, n)
    return feedback_pass(params, top)


def sample_directed(params: NetworkParams, rng: RandomSource) -> np.ndarray:
    """One ancestral sample from the directed model: top prior, then descend."""
    _, x = _ancestral(params, rng, None)
    return x


def sample_directed_many(params: NetworkParams, count: int,
                         rng: RandomSource) -> np.ndarray:
    """Batch of ancestral samples, one split substream per sample."""
    _require_prior(params)
    streams = rng.split(count)
    top = np.stack([params.prior.sample(s) for s in streams])
    _, x = feedback_pass(params, top)
    return x


def _refine(params: NetworkParams, x: np.ndarray, cfg: GenerateConfig,
            rng: RandomSource | None) -> np.ndarray:
    infer_cfg = replace(cfg.inference,
                        top_down_weight=cfg.refinement_alpha,
                        record_trace=False)
    for _ in range(cfg.refinement_steps):
        state, _ = infer(params, x, infer_cfg, rng)
        x = params.layers[0].g.apply(state.h[0])
    return x


def generate(params: NetworkParams, cfg: GenerateConfig,
             rng: RandomSource) -> np.ndarray:
    """Ancestral start, then rounds of strongly top-down-weighted inference
    with the visible vector re-decoded from h1 after each round."""
    cfg.validate()
    x = sample_directed(params, rng)
    noise_rng = rng if cfg.inference.noise_std > 0 else None
    return _refine(params, x, cfg, noise_rng)


def generate_many(params: NetworkParams, count: int, cfg: GenerateConfig,
                  rng: RandomSource) -> np.ndarray:
    """Batched generate: per-sample prior substreams, shared refinement sweeps."""
    cfg.validate()
    x = sample_directed_many(params, count, rng)
    noise_rng = rng.child() if cfg.inference.noise_std > 0 else None
    return _refine(params, x, cfg, noise_rng)


def sample_joint_dae_chain(
    params: NetworkParams,
    steps: int,
    cfg: GenerateConfig,
    rng: RandomSource,
    corruption: list[CorruptionSpec] | None = None,
) -> np.ndarray:
    """Markov chain over the joint (x, h) state.

    Each transition corrupts the whole state (as during training, when
    inject_noise is set), then resamples every level synchronously from
    the corrupted snapshot: x from g1, the top from f_M, and each middle
    layer from below (f) or above (g) with probability one half.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    state, x = _ancestral(params, rng, None)
    levels = [x] + list(state.h)              # index k holds h_k, k=0 is x
    m = params.n_layers
    specs = corruption or default_corruption(params)
    level_specs = [specs[0]] + list(specs)
    for _ in range(steps):
        if cfg.inject_noise:
            tilde = [
                _chain_corrupt(levels[k], level_specs[k], rng)
                for k in range(m + 1)
            ]
        else:
            tilde = levels
        new = list(levels)
        new[0] = params.layers[0].g.apply(tilde[1])
        new[m] = params.layers[m - 1].f.apply(tilde[m - 1])
        for k in range(1, m):
            go_up = rng.uniform(()) < 0.5
            if go_up:
                new[k] = params.layers[k - 1].f.apply(tilde[k - 1])
            else:
                new[k] = params.layers[k].g.apply(tilde[k + 1])
        levels = new
    return levels[0]


def _chain_corrupt(value, spec: CorruptionSpec, rng: RandomSource):
    if spec.kind == "bernoulli_spike_avg":
        value = np.clip(value, 0.0, 1.0)
    return corrupt(value, spec, rng)


def sample_joint_dae_chain_many(
    params: NetworkParams,
    count: int,
    steps: int,
    cfg: GenerateConfig,
    rng: RandomSource,
    corruption: list[CorruptionSpec] | None = None,
) -> np.ndarray:
    """Independent chains, one split substream per sample."""
    streams = rng.split(count)
    return np.stack([
        sample_joint_dae_chain(params, steps, cfg, s, corruption)
        for s in streams
    ])


def render_sample_grid(samples, rows: int, cols: int, path,
                       image_shape: tuple[int, int] = (28, 28)) -> None:
    """Tile samples row-major into one 8-bit grayscale PGM image."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[None, :]
    if samples.shape[0] != rows * cols:
        raise ValueError(f"{samples.shape[0]} samples do not fill a {rows}x{cols} grid")
    r, c = image_shape
    if samples.shape[1] != r * c:
        raise ValueError(f"sample length {samples.shape[1]} does not match shape {image_shape}")
    canvas = np.zeros((rows * r, cols * c))
    for i in range(rows):
        for j in range(cols):
            canvas[i * r:(i + 1) * r, j * c:(j + 1) * c] = \
                samples[i * cols + j].reshape(r, c)
    write_pgm(canvas, path)


def write_pgm(image, path) -> None:
    """Binary PGM (P5), maxval 255; values clamped to [0,1], round-half-to-even."""
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if image.ndim != 2:
        raise ValueError("PGM output needs a 2-D image")
    quantized = np.rint(image * 255.0).astype(np.uint8)
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(quantized.tobytes())


def save_raw_samples(samples, path) -> None:
    """Sample matrix as: uint32 count, uint32 dim, count*dim little-endian float64."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", samples.shape[0], samples.shape[1]))
        fh.write(samples.astype("<f8").tobytes(order="C"))


def load_raw_samples(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) != 8:
            raise ValueError(f"truncated sample file {path}")
        n, d = struct.unpack("<II", head)
        raw = fh.read(n * d * 8)
    if len(raw) != n * d * 8:
        raise ValueError(f"sample file {path} payload is truncated")
    return np.frombuffer(raw, dtype="<f8").reshape(n, d).copy()
