"""Flat run configuration: one `key = value` per line, `#` comments.

Every hyperparameter of every stage lives here with its standard default,
so a dumped config file fully reproduces a run. Values are typed from the
field defaults; unknown keys are rejected by name.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .generation import GenerateConfig
from .inference import InferenceConfig
from .training import TrainConfig


@dataclass
class RunConfig:
    # network
    widths: tuple = (784, 1000, 100)
    hidden_activation: str = "softplus"
    top_activation: str = "sigmoid"
    visible_activation: str = "sigmoid"
    # training
    epochs: int = 20
    minibatch_size: int = 100
    learning_rate: float = 0.01
    gaussian_corruption_std: float = 0.3
    spike_corruption_samples: int = 3
    prior_variance_scale: float = 4.0
    prior_max_examples: int = 0          # 0 = use the whole training set
    # inference
    inference_steps: int = 15
    inference_step_size: float = 0.1
    inference_alpha: float = 0.001
    inference_noise_std: float = 0.0
    # generation
    refinement_steps: int = 3
    refinement_alpha: float = 0.3
    chain_steps: int = 10
    chain_inject_noise: bool = True
    sample_count: int = 100
    # evaluation
    parzen_sigma: float = 0.2
    parzen_centers: int = 10000
    # in-painting
    missing_fraction: float = 0.5
    inpaint_iterations: int = 20
    # data
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    valid_count: int = 10000
    # run
    seed: int = 0
    threads: int = 0                     # 0 = all available cores

    def layer_activations(self) -> list[str]:
        """Per-layer f activations: hidden everywhere, top layer its own."""
        n_hidden = len(self.widths) - 1
        if n_hidden < 1:
            raise ValueError("widths must name at least one hidden layer")
        return [self.hidden_activation] * (n_hidden - 1) + [self.top_activation]

    def inference_config(self, record_trace: bool = False) -> InferenceConfig:
        return InferenceConfig(
            steps=self.inference_steps,
            step_size=self.inference_step_size,
            top_down_weight=self.inference_alpha,
            noise_std=self.inference_noise_std,
            record_trace=record_trace,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            minibatch_size=self.minibatch_size,
            learning_rate=self.learning_rate,
            inference=self.inference_config(),
            corruption_per_layer=None,   # resolved per network in the command
            seed=self.seed,
            prior_variance_scale=self.prior_variance_scale,
        )

    def generate_config(self) -> GenerateConfig:
        return GenerateConfig(
            refinement_steps=self.refinement_steps,
            refinement_alpha=self.refinement_alpha,
            inference=self.inference_config(),
            chain_steps=self.chain_steps,
            inject_noise=self.chain_inject_noise,
        )


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, tuple):
        if not text:
            return ()
        return tuple(int(part) for part in text.split(","))
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def dump_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_config(cfg))


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """New config with string values parsed into each named field's type."""
    defaults = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    updates = {}
    for key, raw in overrides.items():
        if key not in defaults:
            raise KeyError(f"unknown config key {key!r}")
        updates[key] = _parse_value(str(raw), defaults[key])
    return dataclasses.replace(cfg, **updates)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
            key, _, value = stripped.partition("=")
            overrides[key.strip()] = value.strip()
    try:
        return apply_overrides(cfg, overrides)
    except KeyError as exc:
        raise ValueError(f"{path}: {exc.args[0]}") from None
