"""Command-line entry point: ``stekit <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 numeric failure during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint, planner, ste, verify
from .errors import FormatError, NumericError, SpecError, SpecParseError, DimensionError
from .pipeline import Pipeline, PipelineConfig
from .rng import Rng
from .specstr import format_stack, parse_stack
from .tensorio import read_tensor, write_tensor
from .training import (RunConfig, SyntheticTask, TASKS, evaluate, heldout,
                       losses_csv, run_two_stage, weights_digest)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_LADDER = ["(2:2)"] + [s for s, _ in verify.LADDER]
DEFAULT_TRAIN_STACK = "(2:1)"


class UsageError(Exception):
    pass


def precision(default: str):
    value = os.environ.get("STEKIT_PRECISION", default)
    if value not in ("f32", "f64"):
        raise UsageError(f"STEKIT_PRECISION must be f32 or f64, got {value!r}")
    return np.float32 if value == "f32" else np.float64


def _stack(text):
    return parse_stack(text)


def cmd_plan(args):
    stack = _stack(args.spec)
    pl = planner.plan(args.frames, args.patches, args.dim, stack, args.dim_after)
    sys.stdout.write(planner.to_csv([pl]))
    if args.layers:
        print("layer,t_in,k,units,t_out,params")
        for i, lp in enumerate(pl.layers):
            print(f"{i},{lp.t_in},{lp.k},{lp.units},{lp.t_out},{lp.params}")
    return EXIT_OK


def cmd_param_count(args):
    stack = _stack(args.spec)
    counts = ste.param_count(stack, args.dim, args.dim_after)
    print("layer,params")
    for i, n in enumerate(counts.per_layer):
        print(f"{i},{n}")
    print(f"total,{counts.total}")
    return EXIT_OK


def cmd_ladder(args):
    stacks = [_stack(s) for s in (args.specs or DEFAULT_LADDER)]
    sys.stdout.write(planner.ladder_table(stacks, args.dim, args.frames, args.patches,
                                          args.dim_after))
    return EXIT_OK


def cmd_verify(args):
    checks = verify.run_suite(args.suite)
    for check in checks:
        print(check.line())
    passed = sum(c.passed for c in checks)
    print(f"suite={args.suite} summary passed={passed}/{len(checks)}")
    return EXIT_OK if passed == len(checks) else EXIT_VERIFY


def cmd_init(args):
    stack = _stack(args.spec)
    dtype = precision("f64")
    rng = Rng(args.seed)
    weights = ste.init_stack(stack, args.dim, args.mode, rng, dtype)
    checkpoint.save_stack(args.out, stack, weights, args.dim)
    return EXIT_OK


def cmd_forward(args):
    stack = _stack(args.spec)
    z = read_tensor(args.input)
    if z.ndim != 3:
        raise FormatError(f"{args.input}: expected rank 3 (t, p, d), got shape {z.shape}")
    ck_stack, weights, _ = checkpoint.load_stack(args.weights)
    if format_stack(ck_stack) != format_stack(stack):
        raise FormatError(f"{args.weights}: field 'stack' is {format_stack(ck_stack)!r}, "
                          f"but --spec is {format_stack(stack)!r}")
    if any(w.kernel.dtype != z.dtype for w in weights):
        raise FormatError(f"{args.weights}: dtype differs from {args.input} ({z.dtype})")
    stack = ste.StackSpec(stack.layers, activation=ck_stack.activation)
    write_tensor(args.out, ste.stack_forward(z, stack, weights))
    return EXIT_OK


def _load_json(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None


def _run_config(raw, task_kind, seed):
    task_keys = {k: raw.pop(k) for k in ("t", "p", "d_raw", "noise") if k in raw}
    task = SyntheticTask(task_kind, seed=seed, **task_keys)
    run_keys = {k: raw.pop(k) for k in ("n_train", "n_eval", "pretrain_lr", "sft_lr",
                                        "epochs", "batch_size") if k in raw}
    try:
        run = RunConfig(task=task, seed=seed, **run_keys)
    except TypeError as exc:
        raise UsageError(f"bad run config: {exc}") from None
    raw.setdefault("stack", DEFAULT_TRAIN_STACK)
    if raw["stack"] in ("none", ""):
        raw["stack"] = None
    raw.update(d_raw=task.d_raw, p=task.p, seed=seed)
    try:
        return run, PipelineConfig.from_dict(raw)
    except TypeError as exc:
        raise UsageError(f"bad pipeline config: {exc}") from None


def cmd_train(args):
    raw = _load_json(args.config)
    run, cfg = _run_config(raw, args.task, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipe = Pipeline.create(cfg, precision("f32"))
    result = run_two_stage(run, pipe)
    frozen = {}
    for i, stage in enumerate(result.stages, 1):
        checkpoint.save_pipeline(out / f"stage{i}.ckpt", stage.pipeline, {"stage": stage.stage})
        if stage.stage == "pretrain":
            frozen = {"before": stage.frozen_digest_before,
                      "after": stage.frozen_digest_after,
                      "unchanged": stage.frozen_digest_before == stage.frozen_digest_after}
    (out / "losses.csv").write_text(losses_csv(result.stages))
    metrics = {
        "task": args.task, "seed": args.seed, "config": cfg.to_dict(),
        "train_accuracy": result.train_metrics.accuracy,
        "train_mean_log_likelihood": result.train_metrics.mean_log_likelihood,
        "heldout_accuracy": result.eval_metrics.accuracy,
        "heldout_mean_log_likelihood": result.eval_metrics.mean_log_likelihood,
        "pretrain_frozen_weights": frozen,
        "final_weights_sha256": weights_digest(result.pipeline.weights),
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    print(json.dumps({k: metrics[k] for k in ("train_accuracy", "heldout_accuracy")}))
    return EXIT_OK


def cmd_eval(args):
    pipe = checkpoint.load_pipeline(args.weights)
    task = SyntheticTask(args.task, t=args.frames, p=pipe.config.p,
                         d_raw=pipe.config.d_raw, seed=args.seed)
    res = evaluate(pipe, heldout(task, args.count))
    print(json.dumps({"accuracy": res.accuracy,
                      "mean_log_likelihood": res.mean_log_likelihood}))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="stekit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def widths(p, dim=1152):
        p.add_argument("--dim", type=int, default=dim, help="embedding width")
        p.add_argument("--dim-after", type=int, default=None,
                       help="width for layers after the projector (default: --dim)")

    p = sub.add_parser("plan", help="frame/token/parameter plan for one stack")
    p.add_argument("spec")
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--patches", type=int, default=1)
    p.add_argument("--layers", action="store_true", help="also print the per-layer ladder")
    widths(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("param-count", help="trainable parameters per layer")
    p.add_argument("spec")
    widths(p)
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("ladder", help="CSV table over several stacks")
    p.add_argument("specs", nargs="*")
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--patches", type=int, default=1)
    widths(p)
    p.set_defaults(func=cmd_ladder)

    p = sub.add_parser("verify", help="run a self-check suite")
    p.add_argument("--suite", required=True, choices=sorted(verify.SUITES))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("init", help="write a freshly initialised stack checkpoint")
    p.add_argument("spec")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--mode", choices=ste.INIT_MODES, default="scaled_uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("forward", help="run a stack over an embeddings file")
    p.add_argument("--input", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("train", help="two-stage training on a synthetic task")
    p.add_argument("--task", choices=TASKS, default="order_discrimination")
    p.add_argument("--config", help="JSON pipeline/run configuration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a pipeline checkpoint on held-out data")
    p.add_argument("--task", choices=TASKS, default="order_discrimination")
    p.add_argument("--weights", required=True)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SpecParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, UsageError, FormatError, DimensionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
