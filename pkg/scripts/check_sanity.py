#!/usr/bin/env python3
"""
Sanity check script to verify the pipeline runs end to end.

Tests:
- Gradient check of a few core ops
- Tiny dataset generation
- Stage 1, Stage 2 and evaluation on the tiny dataset
"""

from pathlib import Path
import contextlib
import io
import sys
import tempfile

from bmdsnet.main import cli_dispatch

TINY_CONFIG = """\
data.num_samples = 10
data.size = 16
data.crop_size = 8
model.widths = 2,4,4
stage1.epochs = 1
stage1.batch_size = 4
stage2.epochs = 1
stage2.T_infer = 3
eval.scenarios = full,missing:3
"""


def check_command(name: str, argv: list[str], expected_lines: list[str]) -> bool:
    """
    Run one command and check its stdout.

    Args:
        name: Step name for logging
        argv: Command line
        expected_lines: Prefixes that must each start some stdout line

    Returns:
        bool: True if the command exited 0 and printed every expected line
    """
    print(f"Testing {name}...", end=" ")
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        code = cli_dispatch(argv)
    lines = buffer.getvalue().splitlines()

    if code != 0:
        print(f"FAIL (exit {code})")
        return False
    missing = [p for p in expected_lines if not any(line.startswith(p) for line in lines)]
    if missing:
        print(f"FAIL (missing lines: {missing})")
        return False

    print("OK")
    return True


def main():
    """Run sanity checks."""
    print("=== BMDS-Net - Sanity Check ===\n")

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        cfg = out / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        common = ["--config", str(cfg), "--out", str(out)]

        steps = [
            ("Gradient check", ["gradcheck", "--only", "conv3d", "dice_ce", "kl_to_prior", *common],
             ["conv3d", "dice_ce", "kl_to_prior", "OK gradcheck"]),
            ("Dataset", ["gen-data", "--config", str(cfg), "--out", str(out / "data")], ["train=8", "OK gen-data"]),
            ("Stage 1", ["train", *common], ["checkpoint", "OK train"]),
            ("Stage 2", ["finetune-bayes", *common], ["checkpoint", "OK finetune-bayes"]),
            ("Evaluation", ["eval", *common], ["full dice", "missing_t2 dice", "OK eval"]),
            ("Ledger", ["report", *common], ["OK report"]),
        ]

        passed = 0
        failed = 0
        for name, argv, expected in steps:
            if check_command(name, argv, expected):
                passed += 1
            else:
                failed += 1

    print(f"\n=== Results ===")
    print(f"Passed: {passed}/{len(steps)}")
    print(f"Failed: {failed}/{len(steps)}")

    if failed > 0:
        print("\nSome checks failed. Check that:")
        print("1. Dependencies are installed (pip install -r requirements.txt)")
        print("2. The package is importable from the repo root")
        print("3. BMDS_LOG_LEVEL=DEBUG shows where the failing step stopped")
        sys.exit(1)
    else:
        print("\nAll checks passed!")
        sys.exit(0)


if __name__ == "__main__":
    main()
