"""gen-data: write the synthetic phantom dataset."""

import argparse

from bmdsnet.services.datagen import SPLITS, write_dataset
from bmdsnet.services.harness import phantom_spec
from .context import RunContext, positive_int


def gen_data(ctx: RunContext, args: argparse.Namespace) -> None:
    data = ctx.cfg.data
    if args.seed is not None:
        data = data.model_copy(update={"seed": args.seed})
    n = args.num_samples or data.num_samples
    splits = write_dataset(ctx.out_dir, phantom_spec(data), n)
    counts = {name: sum(1 for s in splits.values() if s == name) for name in SPLITS}
    ctx.emit(" ".join(f"{name}={counts[name]}" for name in SPLITS))


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "gen-data", parents=[common],
        help="Generate phantoms into --out (--seed sets the dataset seed)",
    )
    parser.add_argument("--num-samples", type=positive_int, default=None,
                        help="Override data.num_samples")
    parser.set_defaults(handler=gen_data)
