"""
Two-Stage Training

Stage 1 trains the deterministic network (MMCF -> encoder -> DDS-gated decoder
-> heads) on the total Stage-1 loss with AdamW and cosine decay, keeping the
checkpoint with the best validation Dice.

Stage 2 swaps the segmentation head for a variational one, freezes everything
else and minimizes the ELBO.

Every crop, flip and batch order is drawn from a stream keyed by the run seed,
so a run is bit-reproducible.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np

from bmdsnet.errors import DimensionError, FormatError, TrainingError
from bmdsnet.formats.checkpoint import Checkpoint, save_checkpoint
from bmdsnet.formats.config_file import config_hash
from bmdsnet.schemas.experiment import ExperimentConfig
from bmdsnet.services.datagen import Sample, augment, crop
from bmdsnet.services.losses import stage1_terms
from bmdsnet.services.network import BMDSNet, Backbone, build_from_config, elbo_terms, kl_to_prior
from bmdsnet.services.tensor import AdamW, Tensor, as_tensor, cosine_lr
from .evaluation import mean_dice, model_predictor
from .seeding import AUGMENT, BATCH_ORDER, CROP, STAGE2, derive_seed, stream

logger = logging.getLogger(__name__)

STAGE1 = 0x01


@dataclass
class TrainResult:
    """A trained model with the checkpoint that reproduces it."""
    net: BMDSNet
    checkpoint: Checkpoint
    best_val_dice: Optional[float]
    best_epoch: int
    history: Dict[str, List[Any]] = field(default_factory=dict)


def make_batch(samples: Sequence[Sample], indices: Sequence[int], cfg: ExperimentConfig,
               stage: int, epoch: int) -> Tuple[np.ndarray, np.ndarray]:
    """Stack cropped (and augmented) training samples into [B,C,s,s,s] arrays."""
    volumes, labels = [], []
    for i in indices:
        i = int(i)
        sample = crop(samples[i], cfg.data.crop_size, [cfg.seed, CROP, stage, epoch, i])
        if cfg.data.augment:
            sample = augment(sample, [cfg.seed, AUGMENT, stage, epoch, i])
        volumes.append(sample.volume)
        labels.append(sample.label)
    return np.stack(volumes), np.stack(labels)


def _batches(n: int, batch_size: int, seed: int, stage: int, epoch: int) -> List[np.ndarray]:
    order = stream(seed, BATCH_ORDER, stage, epoch).permutation(n)
    return [order[start:start + batch_size] for start in range(0, n, batch_size)]


def _check_finite(breakdown: Dict[str, float], stage: str, epoch: int, batch: int) -> None:
    if all(math.isfinite(v) for v in breakdown.values()):
        return
    detail = ", ".join(f"{k}={v!r}" for k, v in breakdown.items())
    logger.error(f"{stage}: non-finite loss at epoch {epoch} batch {batch}: {detail}")
    raise TrainingError(f"{stage}: non-finite loss at epoch {epoch}, batch {batch}", breakdown=breakdown)


def load_model(cfg: ExperimentConfig, ckpt: Checkpoint) -> BMDSNet:
    """
    Build the network described by cfg and load the checkpoint into it.

    Raises:
        DimensionError: if parameter names or shapes do not match
    """
    net = build_from_config(cfg, bayesian=ckpt.is_bayesian)
    own = {name for name, _ in net.named_parameters()}
    unexpected = [name for name in ckpt.params if name not in own]
    if unexpected:
        raise DimensionError(f"checkpoint has parameters the model lacks: {', '.join(unexpected)}")
    net.load_state_dict(ckpt.params)
    return net


def train_stage1(cfg: ExperimentConfig, train: Sequence[Sample], val: Sequence[Sample],
                 checkpoint_path: Union[str, Path, None] = None) -> TrainResult:
    """
    Deterministic Stage-1 training.

    Validation Dice is computed every `stage1.eval_every` epochs and after the
    last one; the best state (first on ties) is restored into the returned net.
    With epochs=0 the checkpoint holds the initialization.

    Raises:
        TrainingError: on an empty training split or a non-finite loss
    """
    if not train:
        raise TrainingError("training split is empty")
    Backbone.check_size(cfg.data.crop_size)
    s1 = cfg.stage1
    net = build_from_config(cfg)
    opt = AdamW(net.parameters(), lr=s1.lr, weight_decay=s1.weight_decay)
    predictor = model_predictor(net)

    history: Dict[str, List[Any]] = {
        "alpha_history": [net.alpha] if net.alpha is not None else [],
        "gamma_history": [net.gamma] if net.gamma is not None else [],
        "train_loss_history": [],
        "val_dice_history": [],
    }
    best_state, best_epoch = net.state_dict(), 0
    best_dice: Optional[float] = None
    if not val:
        logger.warning("Validation split is empty; keeping the last epoch")
    elif s1.epochs == 0:
        best_dice = mean_dice(predictor, val, cfg.eval.threshold)

    logger.info(
        f"Stage 1: {net.wiring.name}, {net.num_parameters()} parameters, "
        f"{s1.epochs} epochs over {len(train)} volumes"
    )
    for epoch in range(s1.epochs):
        opt.lr = cosine_lr(epoch, s1.epochs, s1.lr, s1.final_lr_ratio)
        losses = []
        for b, indices in enumerate(_batches(len(train), s1.batch_size, cfg.seed, STAGE1, epoch)):
            x, y = make_batch(train, indices, cfg, STAGE1, epoch)
            terms = stage1_terms(net(x), y, cfg.losses)
            breakdown = terms.breakdown()
            _check_finite(breakdown, "stage1", epoch, b)
            opt.zero_grad()
            terms.total.backward()
            opt.step()
            losses.append(breakdown["total"])
            logger.debug(f"epoch {epoch} batch {b}: {breakdown}")

        train_loss = float(np.mean(losses))
        history["train_loss_history"].append(train_loss)
        if net.alpha is not None:
            history["alpha_history"].append(net.alpha)
        if net.gamma is not None:
            history["gamma_history"].append(net.gamma)

        message = f"Stage 1 epoch {epoch + 1}/{s1.epochs}: loss={train_loss:.5f} lr={opt.lr:.3g}"
        if val and ((epoch + 1) % s1.eval_every == 0 or epoch + 1 == s1.epochs):
            dice = mean_dice(predictor, val, cfg.eval.threshold)
            history["val_dice_history"].append([epoch + 1, dice])
            message += f" val_dice={dice:.4f}"
            if best_dice is None or dice > best_dice:
                best_state, best_epoch, best_dice = net.state_dict(), epoch + 1, dice
        logger.info(message)

    if val:
        net.load_state_dict(best_state)
    else:
        best_epoch = s1.epochs

    metadata = {
        "kind": "stage1",
        "seed": cfg.seed,
        "variant": net.wiring.name,
        "epochs": s1.epochs,
        "epoch": best_epoch,
        "best_val_dice": best_dice,
        "final_alpha": net.alpha,
        "final_gamma": net.gamma,
        **history,
    }
    ckpt = Checkpoint(config_hash=config_hash(cfg), params=net.state_dict(), metadata=metadata)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, ckpt)
    logger.info(f"Stage 1 done: best val_dice={best_dice} at epoch {best_epoch}, alpha={net.alpha}, gamma={net.gamma}")
    return TrainResult(net=net, checkpoint=ckpt, best_val_dice=best_dice, best_epoch=best_epoch, history=history)


def finetune_stage2(cfg: ExperimentConfig, stage1_ckpt: Checkpoint, train: Sequence[Sample],
                    val: Sequence[Sample], checkpoint_path: Union[str, Path, None] = None) -> TrainResult:
    """
    Bayesian fine-tuning of the segmentation head.

    Each step averages the ELBO over `stage2.T_train` weight draws. ELBO, the
    segmentation term and the KL term are logged separately per epoch.

    Raises:
        FormatError: if the checkpoint already has a variational head
        DimensionError: if the checkpoint does not match the configured model
        TrainingError: on an empty training split or a non-finite loss
    """
    if stage1_ckpt.is_bayesian:
        raise FormatError("finetune-bayes expects a Stage-1 checkpoint, got one with a variational head")
    if not train:
        raise TrainingError("training split is empty")
    s2 = cfg.stage2
    net = load_model(cfg, stage1_ckpt)
    net.convert_to_bayes(s2.rho_init)
    opt = AdamW(net.stage2_parameters(), lr=s2.lr, weight_decay=s2.weight_decay)

    history: Dict[str, List[Any]] = {
        "elbo_history": [],
        "seg_history": [],
        "kl_history": [float(kl_to_prior(net.head).item())],
    }
    logger.info(f"Stage 2: {net.head.num_parameters()} variational parameters, {s2.epochs} epochs")
    for epoch in range(s2.epochs):
        opt.lr = cosine_lr(epoch, s2.epochs, s2.lr, cfg.stage1.final_lr_ratio)
        elbos, segs = [], []
        for b, indices in enumerate(_batches(len(train), cfg.stage1.batch_size, cfg.seed, STAGE2, epoch)):
            x, y = make_batch(train, indices, cfg, STAGE2, epoch)
            x = as_tensor(x)
            draws = [elbo_terms(net, x, y, derive_seed(cfg.seed, STAGE2, epoch, b, t), s2.kl_beta)
                     for t in range(s2.T_train)]
            loss: Tensor = draws[0].loss
            seg: Tensor = draws[0].seg
            for extra in draws[1:]:
                loss, seg = loss + extra.loss, seg + extra.seg
            if len(draws) > 1:
                loss, seg = loss * (1.0 / len(draws)), seg * (1.0 / len(draws))

            breakdown = {"elbo": loss.item(), "seg": seg.item(), "kl": draws[0].kl.item()}
            _check_finite(breakdown, "stage2", epoch, b)
            opt.zero_grad()
            loss.backward()
            opt.step()
            elbos.append(breakdown["elbo"])
            segs.append(breakdown["seg"])

        kl = float(kl_to_prior(net.head).item())
        history["elbo_history"].append(float(np.mean(elbos)))
        history["seg_history"].append(float(np.mean(segs)))
        history["kl_history"].append(kl)
        logger.info(
            f"Stage 2 epoch {epoch + 1}/{s2.epochs}: elbo={history['elbo_history'][-1]:.5f} "
            f"seg={history['seg_history'][-1]:.5f} kl={kl:.5g}"
        )

    val_dice = mean_dice(model_predictor(net, s2.T_infer), val, cfg.eval.threshold, seed=cfg.seed) if val else None
    metadata = {
        "kind": "stage2",
        "seed": cfg.seed,
        "variant": net.wiring.name,
        "epochs": s2.epochs,
        "epoch": s2.epochs,
        "kl_beta": s2.kl_beta,
        "rho_init": s2.rho_init,
        "best_val_dice": val_dice,
        "stage1_val_dice": stage1_ckpt.metadata.get("best_val_dice"),
        "final_alpha": net.alpha,
        "final_gamma": net.gamma,
        **history,
    }
    ckpt = Checkpoint(config_hash=stage1_ckpt.config_hash, params=net.state_dict(), metadata=metadata)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, ckpt)
    logger.info(f"Stage 2 done: val_dice={val_dice}, final KL={history['kl_history'][-1]:.5g}")
    return TrainResult(net=net, checkpoint=ckpt, best_val_dice=val_dice, best_epoch=s2.epochs, history=history)
