"""eval and report."""

import argparse

from bmdsnet.formats.report import write_report
from bmdsnet.schemas.metrics import ALL_REGIONS
from bmdsnet.services.harness import (
    dump_ledger, evaluate, load_model, parse_scenarios, record_run,
    write_reliability, write_uncertainty,
)
from .context import RunContext, add_checkpoint_args, add_data_arg
from .training import STAGE1_CHECKPOINT, STAGE2_CHECKPOINT


def run_eval(ctx: RunContext, args: argparse.Namespace) -> None:
    cfg = ctx.cfg
    ckpt = ctx.checkpoint([STAGE2_CHECKPOINT, STAGE1_CHECKPOINT])
    net = load_model(cfg, ckpt)
    splits = ctx.splits()
    scenarios = parse_scenarios(cfg.eval.scenarios)
    result = evaluate(net, splits.test, scenarios, cfg.eval, T_infer=cfg.stage2.T_infer,
                      seed=cfg.seed, threads=ctx.threads)

    write_report(result.reports, ctx.out_dir / "report.csv")
    write_reliability(result.reliability, ctx.out_dir / "reliability.csv")
    write_uncertainty(result.uncertainty, ctx.out_dir / "uncertainty.csv")

    overall = {r.scenario: r for r in result.reports if r.region == ALL_REGIONS}
    kind = "stage2" if ckpt.is_bayesian else "stage1"
    first = overall[scenarios[0].label]
    record_run(ctx.out_dir, f"eval/{kind}/seed={cfg.seed}", kind="eval", seed=cfg.seed,
               config_hash=ckpt.config_hash, test_dice=first.dice_mean,
               final_alpha=net.alpha, final_gamma=net.gamma)
    for sc in scenarios:
        ctx.emit(f"{sc.label} dice {overall[sc.label].dice_mean:.6g}")


def report(ctx: RunContext, args: argparse.Namespace) -> None:
    path = ctx.out_dir / "runs.csv"
    count = dump_ledger(ctx.out_dir, path)
    ctx.emit(f"{path} {count} runs")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "eval", parents=[common],
        help="Evaluate a checkpoint on the test split under eval.scenarios",
    )
    add_data_arg(parser)
    add_checkpoint_args(parser)
    parser.set_defaults(handler=run_eval)

    parser = subparsers.add_parser("report", parents=[common], help="Dump the run ledger to <out>/runs.csv")
    parser.set_defaults(handler=report)
