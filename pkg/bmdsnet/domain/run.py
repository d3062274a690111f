"""Run ledger domain model."""

from sqlalchemy import Column, Float, Integer, String

from bmdsnet.db.base import Base


class RunRecord(Base):
    """
    One harness run (training, fine-tuning, sweep cell, ensemble member, evaluation).

    Attributes:
        run_id: Primary key, e.g. "sweep/alpha=0.5/seed=1"
        kind: stage1, stage2, sweep, ensemble, ablation, robustness
        seed: Run seed
        config_hash: SHA-256 of the training-relevant config sections
        alpha_init: Initial MMCF alpha
        final_alpha: Learned alpha at the selected checkpoint
        final_gamma: Learned gamma at the selected checkpoint
        val_dice: Best validation mean Dice
        test_dice: Mean test Dice, when evaluated
        kl_final: Final KL term (Stage 2 only)
        checkpoint_path: Where the checkpoint was written
    """

    __tablename__ = "runs"

    run_id = Column(String, primary_key=True)
    kind = Column(String, nullable=False, index=True)
    seed = Column(Integer, nullable=False)
    config_hash = Column(String(64), nullable=True)
    alpha_init = Column(Float, nullable=True)
    final_alpha = Column(Float, nullable=True)
    final_gamma = Column(Float, nullable=True)
    val_dice = Column(Float, nullable=True)
    test_dice = Column(Float, nullable=True)
    kl_final = Column(Float, nullable=True)
    checkpoint_path = Column(String, nullable=True)

    def __repr__(self) -> str:
        return f"<RunRecord(run_id='{self.run_id}', kind={self.kind}, val_dice={self.val_dice})>"
