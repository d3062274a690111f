"""
CSV Reports

Metric reports use a fixed header; floats are written with six significant
digits and undefined values as empty fields. Rows are sorted by scenario,
then region (WT, TC, ET, ALL), so identical rows always give identical bytes.
"""

from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union
import csv
import io
import logging

from bmdsnet.errors import ReportError
from bmdsnet.schemas.metrics import REGION_ORDER, MetricReport

logger = logging.getLogger(__name__)

REPORT_HEADER = [
    "scenario", "region", "dice_mean", "dice_std", "hd95_mean", "hd95_std",
    "ece", "nll", "unc_auc", "n_cases",
]


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _region_rank(region: str) -> int:
    return REGION_ORDER.index(region) if region in REGION_ORDER else len(REGION_ORDER)


def sort_reports(rows: Iterable[MetricReport]) -> List[MetricReport]:
    return sorted(rows, key=lambda r: (r.scenario, _region_rank(r.region), r.region))


def write_table(path: Union[str, Path], header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """
    Write a CSV table with formatted cells and '\\n' line endings.

    Raises:
        ReportError: if rows is empty or the path cannot be written
    """
    if not rows:
        raise ReportError(f"refusing to write an empty report to {path}")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buffer.getvalue())
    except OSError as e:
        raise ReportError(f"cannot write report {path}: {e}") from e
    logger.info(f"Wrote {len(rows)} rows to {path}")


def write_report(rows: Sequence[MetricReport], path: Union[str, Path]) -> None:
    """Write MetricReport rows under the fixed report header."""
    ordered = sort_reports(rows)
    write_table(path, REPORT_HEADER, [
        [r.scenario, r.region, r.dice_mean, r.dice_std, r.hd95_mean, r.hd95_std,
         r.ece, r.nll, r.unc_auc, r.n_cases]
        for r in ordered
    ])


def read_table(path: Union[str, Path]) -> List[dict]:
    """Rows of a CSV file as dicts (empty fields stay empty strings)."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
