"""Iterative latent-state improvement driven by the targetprop estimator.

Instead of differentiating log p(h_{k-1} | h_k) through the feedback map,
the update direction for each hidden layer is estimated with forward maps
only:

    delta_k = f_k(h_{k-1}) - f_k(g_k(h_k))

which vanishes exactly when g_k reconstructs the layer below and points
uphill in the joint likelihood when the layer pair forms a well-trained
denoising auto-encoder. A sweep updates the top layer first, then each
layer below it; non-top layers additionally feel a small top-down pull
toward the reconstruction from the layer above. Optionally, Gaussian noise
injected after every update turns the MAP ascent into an MCMC-style
sampler.

The clamped variant handles partially observed inputs: the bottom-up drive
composes the observed pixels with the model's current fill-in for the
missing ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import LatentState, LayerMap, NetworkParams, feedforward_pass, joint_log_likelihood
from .rng import RandomSource


@dataclass
class InferenceConfig:
    steps: int = 15              # N
    step_size: float = 0.1       # delta
    top_down_weight: float = 0.001  # alpha
    noise_std: float = 0.0       # >0 switches MAP ascent to the MCMC-style variant
    record_trace: bool = False

    def validate(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.step_size < 0:
            raise ValueError("step_size must be >= 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass
class InferenceTrace:
    """Joint log-likelihood (prior excluded) before step 1 and after each step."""

    values: np.ndarray  # (steps + 1,) or (steps + 1, n) for a batch


def targetprop_delta(f: LayerMap, g: LayerMap, input_below, h) -> np.ndarray:
    """Estimated uphill direction f(input_below) - f(g(h)) for one layer.

    The 1/sigma^2 scale of the underlying score estimator is folded into
    the caller's step size.
    """
    return f.apply(input_below) - f.apply(g.apply(h))


def _sweep(params, x_drive_fn, state, cfg, rng):
    """One top-to-bottom update sweep over all hidden layers, in place.

    x_drive_fn(state) supplies the bottom-up drive f_1(x) for layer 1;
    it is a hook so the clamped variant can substitute its composite input.
    """
    m = params.n_layers
    for k in range(m, 0, -1):
        lp = params.layers[k - 1]
        h_k = state.h[k - 1]
        recon = lp.f.apply(lp.g.apply(h_k))
        if k == 1:
            delta = x_drive_fn(state) - recon
        else:
            delta = lp.f.apply(state.h[k - 2]) - recon
        new_h = h_k + cfg.step_size * delta
        if k < m:
            above = params.layers[k].g.apply(state.h[k])
            new_h = new_h + cfg.top_down_weight * (above - h_k)
        if cfg.noise_std > 0:
            new_h = new_h + cfg.noise_std * rng.normal(new_h.shape)
        state.h[k - 1] = new_h


def infer(
    params: NetworkParams,
    x,
    cfg: InferenceConfig | None = None,
    rng: RandomSource | None = None,
) -> tuple[LatentState, InferenceTrace | None]:
    """Feedforward initialization followed by N targetprop ascent sweeps.

    x may be a single visible vector or a (n, d_0) batch; latents and the
    optional trace carry the same leading batch shape.
    """
    cfg = cfg or InferenceConfig()
    cfg.validate()
    if cfg.noise_std > 0 and rng is None:
        raise ValueError("noise_std > 0 requires a RandomSource")
    x = np.asarray(x, dtype=np.float64)
    state = feedforward_pass(params, x)
    f1x = params.layers[0].f.apply(x)  # constant bottom-up drive
    trace = [joint_log_likelihood(params, x, state)] if cfg.record_trace else None
    for _ in range(cfg.steps):
        _sweep(params, lambda s: f1x, state, cfg, rng)
        if cfg.record_trace:
            trace.append(joint_log_likelihood(params, x, state))
    return state, (InferenceTrace(np.asarray(trace)) if cfg.record_trace else None)


def compose_visible(x, mask, fill) -> np.ndarray:
    """Observed pixels from x where the mask is true, fill values elsewhere."""
    return np.where(mask, x, fill)


def infer_clamped(
    params: NetworkParams,
    x_partial,
    mask,
    cfg: InferenceConfig | None = None,
    rng: RandomSource | None = None,
) -> tuple[LatentState, np.ndarray]:
    """Inference with observed pixels clamped and missing ones free.

    x_partial holds observed values at mask-true positions and caller
    supplied initial values elsewhere. The bottom-up drive for layer 1
    becomes f_1(compose(x_observed, g_1(h_1))) so only the visible part of
    the input exerts pressure. Returns the final latents and the filled-in
    visible vector.
    """
    cfg = cfg or InferenceConfig()
    cfg.validate()
    if cfg.noise_std > 0 and rng is None:
        raise ValueError("noise_std > 0 requires a RandomSource")
    x_partial = np.asarray(x_partial, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[-1] != params.visible_dim:
        raise ValueError(
            f"mask has dimension {mask.shape[-1]}, model expects {params.visible_dim}"
        )
    state = feedforward_pass(params, x_partial)
    g1 = params.layers[0].g
    f1 = params.layers[0].f

    def drive(s):
        filled = compose_visible(x_partial, mask, g1.apply(s.h[0]))
        return f1.apply(filled)

    for _ in range(cfg.steps):
        _sweep(params, drive, state, cfg, rng)
    filled = compose_visible(x_partial, mask, g1.apply(state.h[0]))
    return state, filled


def random_visibility_mask(shape, missing_fraction: float, rng: RandomSource) -> np.ndarray:
    """Boolean mask (true = observed) with the given fraction missing at random."""
    if not 0.0 <= missing_fraction <= 1.0:
        raise ValueError("missing_fraction must be in [0, 1]")
    return rng.uniform(shape) >= missing_fraction


def inpaint(
    params: NetworkParams,
    x_true,
    mask,
    iterations: int,
    cfg: InferenceConfig | None = None,
    rng: RandomSource | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fill missing pixels by repeated clamped encode/decode rounds.

    Missing entries start as uniform random values; every outer iteration
    feeds the previous filled-in vector back through infer_clamped. Returns
    (filled, corrupted_start, mse) where mse[:, t] is each example's mean
    squared error on missing pixels after t iterations (column 0 is the
    corrupted start).
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if rng is None:
        raise ValueError("inpaint needs a RandomSource for the initial fill")
    x_true = np.atleast_2d(np.asarray(x_true, dtype=np.float64))
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    if mask.shape != x_true.shape:
        raise ValueError(f"mask shape {mask.shape} does not match data {x_true.shape}")
    start = compose_visible(x_true, mask, rng.uniform(x_true.shape))
    missing = ~mask

    def missing_mse(candidate):
        err = (candidate - x_true) ** 2
        counts = np.maximum(missing.sum(axis=-1), 1)
        return np.sum(np.where(missing, err, 0.0), axis=-1) / counts

    work = start
    mse = [missing_mse(work)]
    for _ in range(iterations):
        _, work = infer_clamped(params, work, mask, cfg, rng)
        mse.append(missing_mse(work))
    return work, start, np.stack(mse, axis=1)


def export_trace_csv(trace: InferenceTrace, path) -> None:
    """Trace as CSV rows `step,joint_ll`; batch traces are averaged per step."""
    values = np.asarray(trace.values, dtype=np.float64)
    if values.ndim > 1:
        values = values.mean(axis=tuple(range(1, values.ndim)))
    with open(path, "w") as fh:
        fh.write("step,joint_ll\n")
        for step, value in enumerate(values):
            fh.write(f"{step},{float(value)!r}\n")
