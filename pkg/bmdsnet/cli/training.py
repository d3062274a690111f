"""train (Stage 1) and finetune-bayes (Stage 2)."""

import argparse

from bmdsnet.services.harness import finetune_stage2, record_checkpoint, train_stage1
from .context import RunContext, add_checkpoint_args, add_data_arg

STAGE1_CHECKPOINT = "stage1.ckpt"
STAGE2_CHECKPOINT = "stage2.ckpt"


def train(ctx: RunContext, args: argparse.Namespace) -> None:
    splits = ctx.splits()
    path = ctx.out_dir / STAGE1_CHECKPOINT
    result = train_stage1(ctx.cfg, splits.train, splits.val, path)
    record_checkpoint(ctx.out_dir, f"stage1/seed={ctx.cfg.seed}", result.checkpoint, path,
                      alpha_init=ctx.cfg.model.alpha_init)
    ctx.emit(f"checkpoint {path}")
    ctx.emit(f"best_val_dice {result.best_val_dice} epoch {result.best_epoch}")
    ctx.emit(f"alpha {result.net.alpha} gamma {result.net.gamma}")


def finetune_bayes(ctx: RunContext, args: argparse.Namespace) -> None:
    stage1 = ctx.checkpoint([STAGE1_CHECKPOINT])
    splits = ctx.splits()
    path = ctx.out_dir / STAGE2_CHECKPOINT
    result = finetune_stage2(ctx.cfg, stage1, splits.train, splits.val, path)
    record_checkpoint(ctx.out_dir, f"stage2/seed={ctx.cfg.seed}", result.checkpoint, path)
    ctx.emit(f"checkpoint {path}")
    ctx.emit(f"val_dice {result.best_val_dice} kl {result.history['kl_history'][-1]}")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("train", parents=[common], help="Stage 1: deterministic training")
    add_data_arg(parser)
    parser.set_defaults(handler=train)

    parser = subparsers.add_parser("finetune-bayes", parents=[common],
                                   help="Stage 2: Bayesian fine-tuning of the segmentation head")
    add_data_arg(parser)
    add_checkpoint_args(parser)
    parser.set_defaults(handler=finetune_bayes)
