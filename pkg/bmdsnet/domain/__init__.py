"""Domain models - SQLAlchemy ORM entities."""

from bmdsnet.domain.run import RunRecord

__all__ = ["RunRecord"]
