"""gradcheck: finite-difference suite over every differentiable op."""

import argparse

from bmdsnet.errors import GradCheckError
from bmdsnet.services.gradient_suite import CASES, STEP, TOLERANCE, run_suite
from .context import RunContext

DESCRIPTION = (
    f"Compare analytic gradients with central differences (h = {STEP:g}) for every "
    "differentiable op. The reported error is normalised per tensor, not per entry: "
    "max|analytic - numeric| / max(1e-12, max|numeric|) over all entries of one "
    "parameter, so an entry with a tiny numeric gradient is judged against the "
    f"largest gradient of its tensor. A case fails at {TOLERANCE:g} or above."
)


def gradcheck(ctx: RunContext, args: argparse.Namespace) -> None:
    results = run_suite(seed=ctx.cfg.seed, names=args.only)
    for r in results:
        ctx.emit(f"{r.name} {r.max_error:.3e} {'ok' if r.passed else 'FAIL'}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise GradCheckError(f"relative error >= {TOLERANCE:g} for: {', '.join(failed)}")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("gradcheck", parents=[common], description=DESCRIPTION,
                                   help="Check analytic gradients against central differences")
    parser.add_argument("--only", nargs="+", choices=[c.name for c in CASES], default=None,
                        help="Run only these cases")
    parser.set_defaults(handler=gradcheck)
