"""Command-line driver.

Subcommands: train (one config -> checkpoint + trace CSV), eval
(checkpoint -> error estimate), convergence (training-curve CSV), sweep
(error-vs-SNR CSV), selftest (oracle suite). Configuration comes from a
JSON file with a flat key set; a few flags override it.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .baseband import snr_db_to_noise_variance
from .channels import make_channel
from .config import ConfigError, ExperimentConfig, default_config
from .harness import (
    evaluate_error_rate,
    run_convergence_experiment,
    run_snr_sweep,
    trace_csv,
    train_system,
)
from .training import eval_stream, load_checkpoint, save_checkpoint


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = default_config(args.channel or "awgn")
    updates = {}
    if args.channel is not None:
        updates["channel"] = args.channel
    if args.method is not None:
        updates["method"] = args.method
    if args.seed_count is not None:
        updates["seeds"] = list(range(args.seed_count))
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.threads is not None:
        updates["threads"] = args.threads
    if updates:
        raw = cfg.to_dict()
        raw.update(updates)
        cfg = ExperimentConfig.from_dict(raw)
    return cfg.validate()


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON experiment config")
    parser.add_argument("--channel", choices=("awgn", "rbf", "quantizer"))
    parser.add_argument("--method", choices=("alternating", "supervised", "both"))
    parser.add_argument("--seed-count", type=int, help="use seeds 0..count-1")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker processes for independent cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chanfree",
        description="Train and evaluate transceivers with and without a channel model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one system, write checkpoint and trace CSV")
    _add_common(p_train)
    p_train.add_argument("--seed", type=int, default=None, help="single training seed")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint at one SNR")
    p_eval.add_argument("checkpoint", type=Path)
    p_eval.add_argument("--channel", choices=("awgn", "rbf", "quantizer"), default="awgn")
    p_eval.add_argument("--snr-db", type=float, default=10.0)
    p_eval.add_argument("--messages", type=int, default=100_000)
    p_eval.add_argument("--seed", type=int, default=0)

    p_conv = sub.add_parser("convergence", help="multi-seed training-curve CSV")
    _add_common(p_conv)

    p_sweep = sub.add_parser("sweep", help="error-rate-vs-SNR CSV")
    _add_common(p_sweep)

    p_self = sub.add_parser("selftest", help="run the gradient/invariant oracle suite")
    p_self.add_argument("--quiet", action="store_true")
    return parser


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if cfg.method == "both":
        raise ConfigError("method: pick one method for `train` (alternating or supervised)")
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    state, trace = train_system(cfg, cfg.method, seed)
    out = _out_dir(cfg)
    stem = f"{cfg.channel}_{cfg.method}_seed{seed}"
    ckpt_path = out / f"{stem}.ckpt.json"
    save_checkpoint(ckpt_path, state)
    csv_path = out / f"{stem}_trace.csv"
    csv_path.write_text(trace_csv(cfg, cfg.method, trace))
    print(f"wrote {ckpt_path}")
    print(f"wrote {csv_path}")
    return 0


def cmd_eval(args) -> int:
    state, _ = load_checkpoint(args.checkpoint)
    channel = make_channel(args.channel, snr_db_to_noise_variance(args.snr_db))
    estimate = evaluate_error_rate(state, channel, args.messages, eval_stream(args.seed))
    print(
        f"channel={args.channel} snr_db={args.snr_db} messages={estimate.n} "
        f"error_rate={estimate.rate:.6g} ci95={estimate.ci95:.3g}"
    )
    return 0


def cmd_convergence(args) -> int:
    cfg = _load_config(args)
    csv_text = run_convergence_experiment(cfg)
    out = _out_dir(cfg) / f"convergence_{cfg.channel}.csv"
    out.write_text(csv_text)
    print(f"wrote {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    csv_text = run_snr_sweep(cfg)
    out = _out_dir(cfg) / f"sweep_{cfg.channel}.csv"
    out.write_text(csv_text)
    print(f"wrote {out}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(verbose=not args.quiet) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "convergence": cmd_convergence,
        "sweep": cmd_sweep,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
