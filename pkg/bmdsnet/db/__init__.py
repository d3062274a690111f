"""Database layer - run ledger engine and sessions."""
