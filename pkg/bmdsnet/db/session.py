"""Run-ledger engine and session factory, one SQLite file per output directory."""

from contextlib import contextmanager
from pathlib import Path
from typing import Generator, Optional, Union

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from bmdsnet.config import get_settings
from bmdsnet.db.base import Base


def ledger_path(out_dir: Union[str, Path], name: Optional[str] = None) -> Path:
    return Path(out_dir) / (name or get_settings().BMDS_LEDGER_NAME)


def create_ledger_engine(out_dir: Union[str, Path]) -> Engine:
    """
    Engine for `<out_dir>/<BMDS_LEDGER_NAME>`; tables are created on first use.
    """
    path = ledger_path(out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(
        f"sqlite:///{path}",
        connect_args={"check_same_thread": False},
        echo=False,
    )
    # Import entities so they register on Base.metadata
    import bmdsnet.domain  # noqa: F401
    Base.metadata.create_all(engine)
    return engine


@contextmanager
def ledger_session(out_dir: Union[str, Path]) -> Generator[Session, None, None]:
    """
    Transactional session on the run ledger.

    Usage:
        with ledger_session(out) as db:
            db.merge(record)
    """
    engine = create_ledger_engine(out_dir)
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    db = SessionLocal()
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
        engine.dispose()
