"""robustness, sweep-alpha, ensemble and ablation."""

import argparse

from bmdsnet.formats.report import write_report
from bmdsnet.services.harness import (
    ensemble_eval, parse_scenarios, robustness, run_ablation, sensitivity_sweep,
    write_ablation, write_calibration, write_robustness_summary, write_sweep,
)
from .context import RunContext, add_data_arg, positive_int


def run_robustness(ctx: RunContext, args: argparse.Namespace) -> None:
    cfg = ctx.cfg
    result = robustness(cfg, ctx.splits(), parse_scenarios(cfg.eval.scenarios), ctx.out_dir,
                        workers=ctx.threads, threads=1)
    write_report(result.reports, ctx.out_dir / "robustness.csv")
    write_robustness_summary(result.summary, ctx.out_dir / "robustness_summary.csv")
    for row in result.summary:
        ctx.emit(f"{row.scenario} dice {row.dice_mean} std {row.dice_std}")


def sweep_alpha(ctx: RunContext, args: argparse.Namespace) -> None:
    rows = sensitivity_sweep(ctx.cfg, ctx.cfg.eval.alpha_values, ctx.splits(), ctx.out_dir,
                             workers=ctx.threads)
    write_sweep(rows, ctx.out_dir / "sweep_alpha.csv")
    for row in rows:
        label = "zero-init" if row.zero_init else f"{row.alpha_init:g}"
        ctx.emit(f"alpha {label} dice {row.dice_mean} final_alpha {row.final_alpha_mean}")


def ensemble(ctx: RunContext, args: argparse.Namespace) -> None:
    table = ensemble_eval(ctx.cfg, ctx.splits(), args.members, ctx.out_dir, workers=ctx.threads)
    for path in write_calibration(table, ctx.out_dir):
        ctx.emit(f"wrote {path}")


def ablation(ctx: RunContext, args: argparse.Namespace) -> None:
    rows = run_ablation(ctx.cfg, ctx.splits(), ctx.out_dir, workers=ctx.threads)
    write_ablation(rows, ctx.out_dir / "ablation.csv")
    for row in rows:
        ctx.emit(f"{row.variant} params {row.params} dice {row.dice_mean:.6g}")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("robustness", parents=[common],
                                   help="Scenario evaluation over eval.num_seeds trained models")
    add_data_arg(parser)
    parser.set_defaults(handler=run_robustness)

    parser = subparsers.add_parser("sweep-alpha", parents=[common],
                                   help="Zero-init vs eval.alpha_values, eval.num_seeds seeds each")
    add_data_arg(parser)
    parser.set_defaults(handler=sweep_alpha)

    parser = subparsers.add_parser("ensemble", parents=[common],
                                   help="Deterministic vs deep ensemble vs Bayesian head calibration")
    add_data_arg(parser)
    parser.add_argument("--members", type=positive_int, default=None, help="Override eval.ensemble_size")
    parser.set_defaults(handler=ensemble)

    parser = subparsers.add_parser("ablation", parents=[common],
                                   help="Train and test the four MMCF/DDS wiring variants")
    add_data_arg(parser)
    parser.set_defaults(handler=ablation)
