"""Run ledger - upserts RunRecord rows into `<out>/runs.sqlite` and dumps them as CSV."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import logging

from sqlalchemy import inspect

from bmdsnet.db.session import ledger_path, ledger_session
from bmdsnet.domain import RunRecord
from bmdsnet.formats.checkpoint import Checkpoint
from bmdsnet.formats.report import write_table

logger = logging.getLogger(__name__)

RUN_COLUMNS = [column.key for column in inspect(RunRecord).columns]


def record_run(out_dir: Union[str, Path], run_id: str, kind: str, seed: int, **fields: Any) -> None:
    """Insert or replace the ledger row for run_id."""
    with ledger_session(out_dir) as db:
        db.merge(RunRecord(run_id=run_id, kind=kind, seed=int(seed), **fields))
    logger.debug(f"Ledger: recorded {run_id}")


def record_checkpoint(out_dir: Union[str, Path], run_id: str, ckpt: Checkpoint,
                      checkpoint_path: Optional[Union[str, Path]] = None, **fields: Any) -> None:
    """Ledger row filled from a checkpoint's metadata."""
    meta = ckpt.metadata
    kl_history = meta.get("kl_history") or [None]
    record_run(
        out_dir, run_id,
        kind=fields.pop("kind", meta.get("kind", "stage1")),
        seed=meta.get("seed", 0),
        config_hash=ckpt.config_hash,
        final_alpha=meta.get("final_alpha"),
        final_gamma=meta.get("final_gamma"),
        val_dice=meta.get("best_val_dice"),
        kl_final=kl_history[-1],
        checkpoint_path=str(checkpoint_path) if checkpoint_path is not None else None,
        **fields,
    )


def list_runs(out_dir: Union[str, Path]) -> List[Dict[str, Any]]:
    """All ledger rows ordered by run_id."""
    if not ledger_path(out_dir).exists():
        return []
    with ledger_session(out_dir) as db:
        records = db.query(RunRecord).order_by(RunRecord.run_id).all()
        return [{name: getattr(r, name) for name in RUN_COLUMNS} for r in records]


def dump_ledger(out_dir: Union[str, Path], path: Union[str, Path]) -> int:
    """
    Write the ledger as CSV.

    Returns:
        Number of rows written

    Raises:
        ReportError: if the ledger is empty or the path is unwritable
    """
    rows = list_runs(out_dir)
    write_table(path, RUN_COLUMNS, [[row[name] for name in RUN_COLUMNS] for row in rows])
    return len(rows)
