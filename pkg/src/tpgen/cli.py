"""Command-line entry point: train, generate, inpaint, eval-parzen,
stdp-curve, infer-trace.

Every command resolves one RunConfig (defaults, then --config file, then
--set overrides, then dedicated flags), writes its artifacts into --out,
and dumps the effective config there so the run can be replayed from it.
All randomness flows from the config seed, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import RunConfig, apply_overrides, load_config, save_config
from .data import IdxFormatError, load_idx_images
from .generation import (
    generate_many,
    load_raw_samples,
    render_sample_grid,
    sample_directed_many,
    sample_joint_dae_chain_many,
    save_raw_samples,
)
from .inference import export_trace_csv, infer, inpaint, random_visibility_mask
from .model import init_network
from .parzen import (
    BANDWIDTH_GRID,
    parzen_fit,
    parzen_log_likelihood,
    parzen_select_bandwidth,
    write_parzen_result,
)
from .rng import RandomSource
from .stdp import StdpConfig, export_stdp_curve, simulate_stdp
from .training import default_corruption, fit_top_prior, train


class CliError(Exception):
    """User-facing command failure; message printed, exit code 1."""


def _add_shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int,
                        help="worker cap for parallel evaluation (0 = all cores)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config field (repeatable)")


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        if not os.path.exists(args.config):
            raise CliError(f"config file not found: {args.config}")
        cfg = load_config(args.config, cfg)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise CliError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    try:
        cfg = apply_overrides(cfg, overrides)
    except KeyError as exc:
        raise CliError(f"--set: unknown config key {exc.args[0]!r}") from None
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    return cfg


def _thread_count(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)


def _prepare_out(args, cfg: RunConfig) -> str:
    os.makedirs(args.out, exist_ok=True)
    save_config(cfg, os.path.join(args.out, "config.txt"))
    return args.out


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise CliError(f"no {what} given (flag or config)")
    if not os.path.exists(path):
        raise CliError(f"{what} not found: {path}")
    return path


def _image_shape(dim: int) -> tuple[int, int]:
    side = math.isqrt(dim)
    return (side, side) if side * side == dim else (1, dim)


def _grid_shape(count: int) -> tuple[int, int]:
    rows = max(math.isqrt(count), 1)
    while rows > 1 and count % rows:
        rows -= 1
    return rows, count // rows


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    path = _require_file(args.train_images or cfg.train_images, "training images file")
    cfg = dataclasses.replace(cfg, train_images=path)
    out = _prepare_out(args, cfg)
    dataset = load_idx_images(path, split="train")
    if dataset.dim != cfg.widths[0]:
        raise CliError(
            f"data dimension {dataset.dim} does not match configured width {cfg.widths[0]}"
        )
    params = init_network(cfg.widths, cfg.layer_activations(),
                          cfg.visible_activation, cfg.seed)
    tcfg = cfg.train_config()
    tcfg.corruption_per_layer = default_corruption(
        params, cfg.gaussian_corruption_std, cfg.spike_corruption_samples
    )
    params, metrics = train(dataset.images, params, tcfg)
    fit_top_prior(dataset.images, params, tcfg,
                  max_examples=cfg.prior_max_examples or None)
    save_checkpoint(params, os.path.join(out, "model.tpgen"))
    metrics.write_csv(os.path.join(out, "metrics.csv"))
    if metrics.n_epochs:
        print(f"trained {metrics.n_epochs} epochs on {dataset.n} examples; "
              f"final joint LL {metrics.joint_ll[-1]:.3f}")
    else:
        print(f"epochs=0: wrote initialization with fitted prior ({dataset.n} examples)")
    return 0


def cmd_generate(args) -> int:
    cfg = _resolve_config(args)
    params = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    out = _prepare_out(args, cfg)
    count = args.count if args.count is not None else cfg.sample_count
    if count < 1:
        raise CliError("--count must be >= 1")
    rng = RandomSource(cfg.seed)
    gcfg = cfg.generate_config()
    if args.mode == "directed":
        samples = sample_directed_many(params, count, rng)
    elif args.mode == "refine":
        samples = generate_many(params, count, gcfg, rng)
    else:
        samples = sample_joint_dae_chain_many(params, count, cfg.chain_steps, gcfg, rng)
    rows, cols = _grid_shape(count)
    render_sample_grid(samples, rows, cols,
                       os.path.join(out, f"samples_{args.mode}.pgm"),
                       _image_shape(params.visible_dim))
    save_raw_samples(samples, os.path.join(out, f"samples_{args.mode}.raw"))
    print(f"wrote {count} {args.mode} samples ({rows}x{cols} grid)")
    return 0


def cmd_inpaint(args) -> int:
    cfg = _resolve_config(args)
    if args.missing_fraction is not None:
        cfg = dataclasses.replace(cfg, missing_fraction=args.missing_fraction)
    if args.iterations is not None:
        cfg = dataclasses.replace(cfg, inpaint_iterations=args.iterations)
    params = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    test = load_idx_images(_require_file(args.test_images or cfg.test_images,
                                         "test images file"), split="test")
    out = _prepare_out(args, cfg)
    count = min(args.count, test.n)
    x = test.images[:count]
    rng = RandomSource(cfg.seed)
    mask = random_visibility_mask(x.shape, cfg.missing_fraction, rng)
    filled, start, mse = inpaint(params, x, mask, cfg.inpaint_iterations,
                                 cfg.inference_config(), rng)
    triptych = np.stack([x, start, filled], axis=1).reshape(-1, x.shape[1])
    render_sample_grid(triptych, count, 3, os.path.join(out, "inpaint.pgm"),
                       _image_shape(params.visible_dim))
    with open(os.path.join(out, "inpaint_mse.csv"), "w") as fh:
        fh.write("iteration,mean_mse\n")
        for step, value in enumerate(mse.mean(axis=0)):
            fh.write(f"{step},{float(value)!r}\n")
    improved = float(np.mean(mse[:, -1] < mse[:, 0]))
    print(f"inpainted {count} images: mean missing-pixel MSE "
          f"{mse[:, 0].mean():.4f} -> {mse[:, -1].mean():.4f}, "
          f"improved on {improved:.0%}")
    return 0


def cmd_eval_parzen(args) -> int:
    cfg = _resolve_config(args)
    samples = load_raw_samples(_require_file(args.samples, "samples file"))
    test = load_idx_images(_require_file(args.test_images or cfg.test_images,
                                         "test images file"), split="test")
    out = _prepare_out(args, cfg)
    centers = samples[:cfg.parzen_centers]
    if args.select_on:
        valid = load_idx_images(_require_file(args.select_on, "validation images file"))
        sigma = parzen_select_bandwidth(centers, valid.images, BANDWIDTH_GRID)
    elif args.sigma is not None:
        sigma = args.sigma
    else:
        sigma = cfg.parzen_sigma
    model = parzen_fit(centers, sigma)
    mean, std_err = parzen_log_likelihood(model, test.images,
                                          threads=_thread_count(cfg))
    write_parzen_result(os.path.join(out, "parzen.csv"), model, mean, std_err)
    print(f"parzen LL {mean:.2f} +- {std_err:.2f} "
          f"(sigma {sigma}, {centers.shape[0]} centers, {test.n} test points)")
    return 0


def cmd_stdp_curve(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(args, cfg)
    scfg = StdpConfig(noise_std=args.noise_std, repetitions=args.repetitions)
    trace = simulate_stdp(scfg, RandomSource(cfg.seed))
    export_stdp_curve(trace, os.path.join(out, "stdp_curve.csv"))
    print(f"wrote {len(trace.points)} STDP curve points "
          f"({len(trace.dropped)} non-crossing rates dropped)")
    return 0


def cmd_infer_trace(args) -> int:
    cfg = _resolve_config(args)
    params = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    test = load_idx_images(_require_file(args.test_images or cfg.test_images,
                                         "test images file"), split="test")
    out = _prepare_out(args, cfg)
    count = min(args.count, test.n) if args.count else test.n
    icfg = cfg.inference_config(record_trace=True)
    if args.steps is not None:
        icfg = dataclasses.replace(icfg, steps=args.steps)
    rng = RandomSource(cfg.seed) if icfg.noise_std > 0 else None
    _, trace = infer(params, test.images[:count], icfg, rng)
    export_trace_csv(trace, os.path.join(out, "infer_trace.csv"))
    means = np.asarray(trace.values)
    means = means.mean(axis=1) if means.ndim > 1 else means
    print(f"inference trace over {count} examples: joint LL "
          f"{means[0]:.3f} -> {means[-1]:.3f} in {icfg.steps} steps")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpgen",
        description="Train, sample, and evaluate the target-propagation generative model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write checkpoint + metrics")
    p.add_argument("--train-images", help="IDX image file to train on")
    _add_shared_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("generate", help="sample images from a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("directed", "refine", "chain"), default="refine")
    p.add_argument("--count", type=int, help="number of samples")
    _add_shared_flags(p)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("inpaint", help="fill in missing pixels on test images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test-images", help="IDX image file to corrupt and restore")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--missing-fraction", type=float)
    p.add_argument("--iterations", type=int)
    _add_shared_flags(p)
    p.set_defaults(handler=cmd_inpaint)

    p = sub.add_parser("eval-parzen", help="score a raw sample file against a test set")
    p.add_argument("--samples", required=True, help="raw sample file from `generate`")
    p.add_argument("--test-images", help="IDX image file to score")
    p.add_argument("--sigma", type=float, help="kernel bandwidth (skips selection)")
    p.add_argument("--select-on", help="IDX validation file for bandwidth selection")
    _add_shared_flags(p)
    p.set_defaults(handler=cmd_eval_parzen)

    p = sub.add_parser("stdp-curve", help="simulate the spike-timing weight-change curve")
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--repetitions", type=int, default=1)
    _add_shared_flags(p)
    p.set_defaults(handler=cmd_stdp_curve)

    p = sub.add_parser("infer-trace", help="record the joint-likelihood inference trace")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test-images", help="IDX image file to trace on")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--steps", type=int)
    _add_shared_flags(p)
    p.set_defaults(handler=cmd_infer_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (CliError, CheckpointError, IdxFormatError, OSError,
            ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
