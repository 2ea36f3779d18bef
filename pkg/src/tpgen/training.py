"""Layer-local denoising training wrapped around the inference E-step.

Each minibatch first infers latents for its examples, then every layer
pair takes one stochastic step that decreases its two local squared
reconstruction losses,

    L_g = ||g_k(corrupt(h_k)) - h_{k-1}||^2
    L_f = ||f_k(corrupt(h_{k-1})) - h_k||^2

with targets treated as constants and derivatives taken through the
layer's own activation only; no gradient ever crosses a layer boundary.
Inputs are corrupted (Gaussian noise for real-valued layers, averaged
Bernoulli spikes for the sigmoid top layer) so each pair learns a
denoising auto-encoder. The top-level prior is not touched during
training; it is fitted afterwards from the inferred top-layer statistics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .activations import activation_pair
from .data import minibatch_indices
from .inference import InferenceConfig, infer
from .model import (
    GaussianPrior,
    LayerMap,
    LayerPair,
    NetworkParams,
    joint_log_likelihood,
)
from .rng import RandomSource


@dataclass
class CorruptionSpec:
    kind: str                 # "gaussian" | "bernoulli_spike_avg"
    std: float = 0.3          # gaussian only
    samples: int = 3          # bernoulli_spike_avg only

    def validate(self):
        if self.kind == "gaussian":
            if self.std < 0:
                raise ValueError("gaussian corruption std must be >= 0")
        elif self.kind == "bernoulli_spike_avg":
            if self.samples < 1:
                raise ValueError("bernoulli_spike_avg needs samples >= 1")
        else:
            raise ValueError(f"unknown corruption kind {self.kind!r}")

    @staticmethod
    def gaussian(std: float) -> "CorruptionSpec":
        return CorruptionSpec(kind="gaussian", std=std)

    @staticmethod
    def bernoulli_spike_avg(samples: int) -> "CorruptionSpec":
        return CorruptionSpec(kind="bernoulli_spike_avg", samples=samples)


@dataclass
class TrainConfig:
    epochs: int = 20
    minibatch_size: int = 100
    learning_rate: float = 0.01
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    corruption_per_layer: list[CorruptionSpec] | None = None  # defaults per network
    seed: int = 0
    prior_variance_scale: float = 4.0

    def validate(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainMetrics:
    """Per-epoch means: reconstruction losses per layer/direction and joint LL."""

    g_loss: np.ndarray    # (epochs, n_layers)
    f_loss: np.ndarray    # (epochs, n_layers)
    joint_ll: np.ndarray  # (epochs,)

    @property
    def n_epochs(self) -> int:
        return len(self.joint_ll)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "layer", "g_loss", "f_loss", "joint_ll"])
            for e in range(self.n_epochs):
                for layer in range(self.g_loss.shape[1]):
                    writer.writerow([
                        e,
                        layer + 1,
                        repr(float(self.g_loss[e, layer])),
                        repr(float(self.f_loss[e, layer])),
                        repr(float(self.joint_ll[e])),
                    ])


def default_corruption(params: NetworkParams, gaussian_std: float = 0.3,
                       bernoulli_samples: int = 3) -> list[CorruptionSpec]:
    """Gaussian noise for every layer except an averaged-Bernoulli top sigmoid layer."""
    specs = [CorruptionSpec.gaussian(gaussian_std) for _ in params.layers]
    if params.layers[-1].f.activation == "sigmoid":
        specs[-1] = CorruptionSpec.bernoulli_spike_avg(bernoulli_samples)
    return specs


def corrupt(h, spec: CorruptionSpec, rng: RandomSource) -> np.ndarray:
    """Apply one corruption draw to h (any shape)."""
    spec.validate()
    h = np.asarray(h, dtype=np.float64)
    if spec.kind == "gaussian":
        return h + spec.std * rng.normal(h.shape)
    # averaged Bernoulli spikes: values land on {0, 1/k, ..., 1}
    if np.any(h < -1e-9) or np.any(h > 1.0 + 1e-9):
        raise ValueError(
            "bernoulli_spike_avg needs values in [0, 1]; "
            f"got range [{h.min()}, {h.max()}]"
        )
    p = np.clip(h, 0.0, 1.0)
    total = np.zeros_like(p)
    for _ in range(spec.samples):
        total += rng.bernoulli(p)
    return total / spec.samples


def _map_gradients(layer_map: LayerMap, u: np.ndarray, target: np.ndarray):
    """Gradients of mean_i ||act(W u_i + b) - target_i||^2 w.r.t. W and b."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    z = layer_map.preactivation(u)
    fn, deriv = activation_pair(layer_map.activation)
    err = fn(z) - target
    grad_z = 2.0 * err * deriv(z)   # (n, out)
    n = u.shape[0]
    grad_w = grad_z.T @ u / n
    grad_b = grad_z.sum(axis=0) / n
    loss = float(np.mean(np.sum(err * err, axis=-1)))
    return grad_w, grad_b, loss


def local_layer_update(
    layer: LayerPair,
    h_below,
    h,
    h_below_tilde,
    h_tilde,
    learning_rate: float,
) -> tuple[LayerPair, float, float]:
    """One descent step on both local denoising losses of a layer pair.

    Returns the updated pair and the (pre-update) g and f losses. Targets
    h_below and h are constants; the derivative goes through the pair's
    own activations only.
    """
    gw, gb, g_loss = _map_gradients(layer.g, h_tilde, h_below)
    fw, fb, f_loss = _map_gradients(layer.f, h_below_tilde, h)
    new_g = LayerMap(layer.g.weight - learning_rate * gw,
                     layer.g.bias - learning_rate * gb, layer.g.activation)
    new_f = LayerMap(layer.f.weight - learning_rate * fw,
                     layer.f.bias - learning_rate * fb, layer.f.activation)
    return LayerPair(layer.index, new_f, new_g), g_loss, f_loss


def _corrupt_level(value, spec: CorruptionSpec, rng: RandomSource) -> np.ndarray:
    # inference can push a sigmoid layer slightly past [0, 1]; snap before
    # drawing spikes since Bernoulli probabilities must stay in range
    if spec.kind == "bernoulli_spike_avg":
        value = np.clip(value, 0.0, 1.0)
    return corrupt(value, spec, rng)


def train(
    dataset,
    params: NetworkParams,
    cfg: TrainConfig,
) -> tuple[NetworkParams, TrainMetrics]:
    """Minibatch EM-style training: infer latents, then update every layer locally.

    dataset is a (n, d_0) array of visible vectors. Returns new parameters
    (the input object is not mutated) and per-epoch metrics.
    """
    cfg.validate()
    x_all = np.asarray(dataset, dtype=np.float64)
    if x_all.ndim != 2 or x_all.shape[0] == 0:
        raise ValueError("dataset must be a nonempty (n, d) array")
    if x_all.shape[1] != params.visible_dim:
        raise ValueError(
            f"dataset dimension {x_all.shape[1]} does not match model {params.visible_dim}"
        )
    specs = cfg.corruption_per_layer or default_corruption(params)
    if len(specs) != params.n_layers:
        raise ValueError(
            f"got {len(specs)} corruption specs for {params.n_layers} layers"
        )
    for spec in specs:
        spec.validate()

    params = params.copy()
    m = params.n_layers
    root = RandomSource(cfg.seed)
    g_hist = np.zeros((cfg.epochs, m))
    f_hist = np.zeros((cfg.epochs, m))
    ll_hist = np.zeros(cfg.epochs)

    for epoch in range(cfg.epochs):
        epoch_rng = root.child()
        g_sums = np.zeros(m)
        f_sums = np.zeros(m)
        ll_sum = 0.0
        n_batches = 0
        for idx in minibatch_indices(x_all.shape[0], cfg.minibatch_size, cfg.seed, epoch):
            batch_rng = epoch_rng.child()
            x = x_all[idx]
            state, _ = infer(params, x, cfg.inference, batch_rng.child())
            levels = [x] + list(state.h)          # h_0 .. h_M
            level_specs = [specs[0]] + specs      # x shares the layer-1 spec
            tilde = [
                _corrupt_level(levels[l], level_specs[l], batch_rng.child())
                for l in range(m + 1)
            ]
            new_layers = []
            for k in range(1, m + 1):
                updated, g_loss, f_loss = local_layer_update(
                    params.layers[k - 1],
                    levels[k - 1], levels[k],
                    tilde[k - 1], tilde[k],
                    cfg.learning_rate,
                )
                new_layers.append(updated)
                g_sums[k - 1] += g_loss
                f_sums[k - 1] += f_loss
            ll_sum += float(np.mean(joint_log_likelihood(params, x, state)))
            params = NetworkParams(new_layers, params.prior, params.seed)
            n_batches += 1
        g_hist[epoch] = g_sums / n_batches
        f_hist[epoch] = f_sums / n_batches
        ll_hist[epoch] = ll_sum / n_batches
    return params, TrainMetrics(g_loss=g_hist, f_loss=f_hist, joint_ll=ll_hist)


def fit_top_prior(
    dataset,
    params: NetworkParams,
    cfg: TrainConfig,
    max_examples: int | None = None,
) -> GaussianPrior:
    """Fit the top-layer Gaussian from inferred latents over the training set.

    Uses the elementwise mean and population variance of the inferred top
    layer, with variances scaled up (by 4 by default) to broaden the
    prior, then floored. The prior is stored on params and returned.
    """
    x_all = np.asarray(dataset, dtype=np.float64)
    if x_all.ndim != 2 or x_all.shape[0] == 0:
        raise ValueError("dataset must be a nonempty (n, d) array")
    if max_examples is not None and x_all.shape[0] > max_examples:
        x_all = x_all[:max_examples]
    tops = []
    step = max(cfg.minibatch_size, 1)
    quiet = replace(cfg.inference, noise_std=0.0, record_trace=False)
    for start in range(0, x_all.shape[0], step):
        state, _ = infer(params, x_all[start:start + step], quiet)
        tops.append(state.top)
    top = np.concatenate(tops, axis=0)
    prior = GaussianPrior(
        mean=top.mean(axis=0),
        variance=top.var(axis=0) * cfg.prior_variance_scale,
    )
    params.prior = prior
    return prior
