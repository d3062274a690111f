"""Shared command state: parsed config, output directory and thread count."""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence
import argparse
import logging

from bmdsnet.config import get_settings
from bmdsnet.errors import FormatError
from bmdsnet.formats.checkpoint import Checkpoint, load_checkpoint
from bmdsnet.formats.config_file import config_hash, parse_config
from bmdsnet.schemas.experiment import ExperimentConfig
from bmdsnet.services.harness import DataSplits, load_splits

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64


def seed_arg(text: str) -> int:
    """argparse type for an unsigned 64-bit seed."""
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}")
    if not 0 <= value < MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def common_parser(parser_class) -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    common = parser_class(add_help=False)
    common.add_argument("--config", default=None, help="Experiment config file (defaults when omitted)")
    common.add_argument("--seed", type=seed_arg, default=None, help="Override the config seed")
    common.add_argument("--out", default="out", help="Output directory")
    common.add_argument("--threads", type=positive_int, default=1,
                        help="Worker threads (BMDS_THREADS overrides)")
    return common


def add_data_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", default=None,
                        help="Dataset directory (default <out>/data, generated when missing)")


def add_checkpoint_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", default=None, help="Checkpoint to load")
    parser.add_argument("--force", action="store_true",
                        help="Accept a checkpoint whose config hash differs from the current config")


@dataclass
class RunContext:
    cfg: ExperimentConfig
    out_dir: Path
    threads: int
    args: argparse.Namespace

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunContext":
        """
        Raises:
            ConfigError: if the config file is missing or invalid
        """
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        threads = get_settings().BMDS_THREADS or args.threads
        return cls(cfg=cfg, out_dir=Path(args.out), threads=max(1, int(threads)), args=args)

    @property
    def data_dir(self) -> Path:
        data = getattr(self.args, "data", None)
        return Path(data) if data else self.out_dir / "data"

    def splits(self) -> DataSplits:
        return load_splits(self.cfg, self.data_dir)

    def checkpoint(self, defaults: Sequence[str]) -> Checkpoint:
        """
        Load --checkpoint, or the first existing default name inside --out.

        Raises:
            FormatError: if none exists, the file is malformed, or its config
                hash differs and --force was not given
        """
        path: Optional[Path] = Path(self.args.checkpoint) if self.args.checkpoint else None
        if path is None:
            candidates = [self.out_dir / name for name in defaults]
            path = next((c for c in candidates if c.exists()), None)
            if path is None:
                raise FormatError(f"no checkpoint given and none of {', '.join(map(str, candidates))} exists")
        logger.info(f"Loading checkpoint {path}")
        return load_checkpoint(path, expected_hash=config_hash(self.cfg), allow_mismatch=self.args.force)

    def emit(self, line: str) -> None:
        """Machine-readable result line on stdout."""
        print(line, flush=True)
