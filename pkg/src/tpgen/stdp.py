"""Simulation of the weight-change rule dW = eta * (pre-synaptic spike) * dV/dt.

A pre-synaptic spike lands at t = 0 while the post-synaptic potential sits
below threshold and drifts with an approximately constant slope set by the
rest of the neuron's inputs. A positive slope crosses the firing threshold
some time after the spike; a negative slope implies the potential was last
above threshold some time before it. Sweeping the slope therefore traces
out the classic relationship between the spike-time difference and the
weight change: matching signs, with magnitude decaying as the time
difference grows.

Dynamics are pure linear drift plus optional per-step Gaussian voltage
noise; no leak, no reset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .rng import RandomSource


def default_drift_rates(n_per_side: int = 13) -> tuple[float, ...]:
    """Log-spaced slopes +-[0.02, 1.0] V/ms, slowest to fastest on each sign."""
    mags = np.geomspace(0.02, 1.0, n_per_side)
    return tuple(-mags[::-1]) + tuple(mags)


@dataclass
class StdpConfig:
    threshold: float = 1.0          # firing threshold (voltage units)
    v0: float = 0.0                 # potential at the pre-synaptic spike, below threshold
    drift_rates: tuple = field(default_factory=default_drift_rates)  # V/ms
    window_ms: float = 50.0         # half-width of the observation window
    dt_ms: float = 0.1              # integration step
    noise_std: float = 0.0          # per-step voltage noise
    learning_rate: float = 1.0      # proportionality constant eta
    repetitions: int = 1            # noise repetitions averaged per drift rate

    def validate(self):
        if not self.v0 < self.threshold:
            raise ValueError(f"v0 ({self.v0}) must be below threshold ({self.threshold})")
        if self.window_ms <= 0:
            raise ValueError("window_ms must be positive")
        if self.dt_ms <= 0:
            raise ValueError("dt_ms must be positive")
        if len(self.drift_rates) == 0:
            raise ValueError("drift_rates must be nonempty")
        if any(r == 0 for r in self.drift_rates):
            raise ValueError("drift rates must be nonzero")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass
class StdpTrace:
    """Sweep result: one (delta_t, delta_w) point per retained drift rate."""

    points: list[tuple[float, float]]   # sorted by delta_t
    repetitions: int
    dropped: list[float]                # drift rates whose crossing left the window


def _crossing_time_ms(slope_mag: float, cfg: StdpConfig, gen: RandomSource | None) -> float | None:
    """Time for the potential to climb from v0 to threshold at |slope|, or None.

    Walks in dt steps and linearly interpolates the crossing inside the
    final step, so the noise-free result is exact for linear drift.
    """
    # one step past the window so a crossing landing exactly on the boundary
    # is found despite accumulated rounding, then gated on t <= window
    n_steps = int(np.ceil(cfg.window_ms / cfg.dt_ms)) + 1
    gap = cfg.threshold - cfg.v0
    v_prev = 0.0
    for i in range(1, n_steps + 1):
        v = v_prev + slope_mag * cfg.dt_ms
        if gen is not None and cfg.noise_std > 0:
            v += cfg.noise_std * gen.normal()
        if v >= gap:
            t = (i - 1) * cfg.dt_ms + (gap - v_prev) / (v - v_prev) * cfg.dt_ms
            return t if t <= cfg.window_ms + 1e-9 else None
        v_prev = v
    return None


def simulate_stdp(config: StdpConfig, rng: RandomSource) -> StdpTrace:
    """Sweep the drift rates and return averaged (delta_t, delta_w) points.

    delta_t is the threshold-crossing time relative to the pre-synaptic
    spike (negative for downward drift, extrapolating the same slope into
    the past); delta_w is eta * drift rate. Each drift rate gets its own
    substream, so results do not depend on sweep order.
    """
    config.validate()
    streams = rng.split(len(config.drift_rates))
    points = []
    dropped = []
    for rate, stream in zip(config.drift_rates, streams):
        reps = config.repetitions if config.noise_std > 0 else 1
        crossings = []
        for rep_stream in stream.split(reps):
            t = _crossing_time_ms(abs(rate), config, rep_stream if config.noise_std > 0 else None)
            if t is not None:
                crossings.append(t)
        if not crossings:
            dropped.append(float(rate))
            continue
        delta_t = float(np.sign(rate) * np.mean(crossings))
        delta_w = float(config.learning_rate * rate)
        points.append((delta_t, delta_w))
    points.sort(key=lambda p: p[0])
    return StdpTrace(points=points, repetitions=config.repetitions, dropped=dropped)


def export_stdp_curve(trace: StdpTrace, path) -> None:
    """Write the sweep as CSV with header delta_t_ms,delta_w."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta_t_ms", "delta_w"])
        for delta_t, delta_w in trace.points:
            writer.writerow([repr(delta_t), repr(delta_w)])
