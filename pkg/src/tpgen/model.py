"""Layered generative model with separate feedforward and feedback maps.

Each level k owns two independent affine-plus-activation maps: a
feedforward (recognition) map f_k from layer k-1 to layer k and a feedback
(generative) map g_k from layer k to layer k-1. Nothing ties the feedback
weights to the transpose of the feedforward weights.

All conditional densities are unit-variance Gaussians centered on the map
outputs, so the joint log-likelihood of a visible/latent configuration
reduces to squared reconstruction errors plus Gaussian normalization
constants. The top layer carries an optional diagonal Gaussian prior
fitted from data after training.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .activations import activation_pair
from .rng import RandomSource

LOG_2PI = float(np.log(2.0 * np.pi))
PRIOR_VARIANCE_FLOOR = 1e-6


@dataclass
class LayerMap:
    """One affine map plus elementwise activation: act(W u + b)."""

    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray    # (out_dim,)
    activation: str

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ValueError(f"weight must be 2-D, got shape {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"bias shape {self.bias.shape} does not match weight rows {self.weight.shape[0]}"
            )
        activation_pair(self.activation)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def preactivation(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape[-1] != self.in_dim:
            raise ValueError(
                f"input has dimension {u.shape[-1]}, map expects {self.in_dim}"
            )
        return u @ self.weight.T + self.bias

    def apply(self, u) -> np.ndarray:
        fn, _ = activation_pair(self.activation)
        return fn(self.preactivation(u))

    def copy(self) -> "LayerMap":
        return LayerMap(self.weight.copy(), self.bias.copy(), self.activation)


@dataclass
class LayerPair:
    """Feedforward map f and feedback map g for one level of the stack."""

    index: int  # 1-based level
    f: LayerMap
    g: LayerMap

    def __post_init__(self):
        if self.f.in_dim != self.g.out_dim or self.f.out_dim != self.g.in_dim:
            raise ValueError(
                f"layer {self.index}: f maps {self.f.in_dim}->{self.f.out_dim} "
                f"but g maps {self.g.in_dim}->{self.g.out_dim}"
            )

    @property
    def lower_dim(self) -> int:
        return self.f.in_dim

    @property
    def upper_dim(self) -> int:
        return self.f.out_dim

    def copy(self) -> "LayerPair":
        return LayerPair(self.index, self.f.copy(), self.g.copy())


@dataclass
class GaussianPrior:
    """Diagonal Gaussian over the top latent layer.

    Variances are floored at PRIOR_VARIANCE_FLOOR so degenerate (constant)
    statistics cannot produce a zero-width prior.
    """

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.variance = np.maximum(
            np.asarray(self.variance, dtype=np.float64), PRIOR_VARIANCE_FLOOR
        )
        if self.mean.shape != self.variance.shape or self.mean.ndim != 1:
            raise ValueError(
                f"prior mean/variance must be 1-D and equal length, got "
                f"{self.mean.shape} and {self.variance.shape}"
            )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, rng: RandomSource, n: Optional[int] = None) -> np.ndarray:
        shape = self.mean.shape if n is None else (n, self.dim)
        return self.mean + np.sqrt(self.variance) * rng.normal(shape)

    def log_density(self, v) -> np.ndarray:
        z2 = (np.asarray(v, dtype=np.float64) - self.mean) ** 2 / self.variance
        return -0.5 * np.sum(z2 + np.log(2.0 * np.pi * self.variance), axis=-1)

    def copy(self) -> "GaussianPrior":
        return GaussianPrior(self.mean.copy(), self.variance.copy())


@dataclass
class NetworkParams:
    """The full stack of layer pairs plus the optional top-level prior."""

    layers: list[LayerPair]
    prior: Optional[GaussianPrior] = None
    seed: int = 0  # seed the parameters were initialized with, kept for checkpoints

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer pair")
        for lo, hi in zip(self.layers, self.layers[1:]):
            if lo.upper_dim != hi.lower_dim:
                raise ValueError(
                    f"layer {lo.index} outputs {lo.upper_dim} but layer "
                    f"{hi.index} expects {hi.lower_dim}"
                )
        if self.prior is not None and self.prior.dim != self.top_dim:
            raise ValueError(
                f"prior dimension {self.prior.dim} does not match top layer "
                f"width {self.top_dim}"
            )

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].lower_dim] + [lp.upper_dim for lp in self.layers]

    @property
    def visible_dim(self) -> int:
        return self.layers[0].lower_dim

    @property
    def top_dim(self) -> int:
        return self.layers[-1].upper_dim

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            [lp.copy() for lp in self.layers],
            None if self.prior is None else self.prior.copy(),
            self.seed,
        )


@dataclass
class LatentState:
    """Per-example free latent variables, one array per hidden layer.

    Arrays are (d_k,) for a single example or (n, d_k) for a batch; the
    leading batch dimension is shared across layers.
    """

    h: list[np.ndarray]

    def copy(self) -> "LatentState":
        return LatentState([hk.copy() for hk in self.h])

    @property
    def top(self) -> np.ndarray:
        return self.h[-1]


def init_network(
    widths,
    hidden_activations,
    visible_activation: str = "sigmoid",
    seed: int = 0,
) -> NetworkParams:
    """Build a network with uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.

    widths is (d_0, d_1, ..., d_M); hidden_activations has one entry per
    hidden layer and is used for f_k. The feedback map g_k reconstructs
    layer k-1, so its output activation is the visible activation for k=1
    and the producing layer's activation otherwise.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("need at least one hidden layer")
    hidden_activations = list(hidden_activations)
    if len(hidden_activations) != len(widths) - 1:
        raise ValueError(
            f"got {len(hidden_activations)} activations for {len(widths) - 1} hidden layers"
        )
    rng = RandomSource(seed)
    layers = []
    for k in range(1, len(widths)):
        lo, hi = widths[k - 1], widths[k]
        limit = np.sqrt(6.0 / (lo + hi))
        w_f = rng.uniform((hi, lo), low=-limit, high=limit)
        w_g = rng.uniform((lo, hi), low=-limit, high=limit)
        act_f = hidden_activations[k - 1]
        act_g = visible_activation if k == 1 else hidden_activations[k - 2]
        layers.append(
            LayerPair(
                index=k,
                f=LayerMap(w_f, np.zeros(hi), act_f),
                g=LayerMap(w_g, np.zeros(lo), act_g),
            )
        )
    return NetworkParams(layers=layers, prior=None, seed=seed)


def _check_visible(params: NetworkParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.visible_dim:
        raise ValueError(
            f"visible vector has dimension {x.shape[-1]}, model expects {params.visible_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("visible vector contains non-finite values")
    return x


def feedforward_pass(params: NetworkParams, x) -> LatentState:
    """Initialize latents bottom-up: h_k = f_k(h_{k-1}) with h_0 = x."""
    x = _check_visible(params, x)
    h = []
    below = x
    for lp in params.layers:
        below = lp.f.apply(below)
        h.append(below)
    return LatentState(h)


def feedback_pass(params: NetworkParams, h_top) -> tuple[LatentState, np.ndarray]:
    """Descend the chain with the feedback maps from a top-layer value.

    Returns all hidden layers (top included) and the visible-layer mean.
    """
    h_top = np.asarray(h_top, dtype=np.float64)
    if h_top.shape[-1] != params.top_dim:
        raise ValueError(
            f"top vector has dimension {h_top.shape[-1]}, model expects {params.top_dim}"
        )
    h = [None] * params.n_layers
    h[-1] = h_top
    for k in range(params.n_layers - 1, 0, -1):
        h[k - 1] = params.layers[k].g.apply(h[k])
    x = params.layers[0].g.apply(h[0])
    return LatentState(h), x


def _unit_gaussian_ll(residual: np.ndarray) -> np.ndarray:
    return -0.5 * np.sum(residual * residual, axis=-1) - 0.5 * residual.shape[-1] * LOG_2PI


def joint_log_likelihood(
    params: NetworkParams, x, h: LatentState, include_prior: bool = False
) -> np.ndarray:
    """log p(x, h) under the chain of unit-variance Gaussian conditionals.

    Normalization constants are included so values are comparable to a
    direct density evaluation. The top prior term is added only when
    requested and fitted.
    """
    x = np.asarray(x, dtype=np.float64)
    total = _unit_gaussian_ll(x - params.layers[0].g.apply(h.h[0]))
    for k in range(1, params.n_layers):
        total = total + _unit_gaussian_ll(h.h[k - 1] - params.layers[k].g.apply(h.h[k]))
    if include_prior:
        if params.prior is None:
            raise RuntimeError("no fitted prior on the top layer; fit one first")
        total = total + params.prior.log_density(h.h[-1])
    return total
