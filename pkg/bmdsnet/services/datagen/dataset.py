"""
Dataset Directory

On-disk layout produced by `gen-data`:

    <dir>/manifest.txt      "# id split" header, then one "<id> <split>" line per sample
    <dir>/<id>.vol          volume file holding [C_in + C_out, S, S, S]:
                            normalized modalities followed by label channels

Split assignment is 80/15/5 train/val/test in id order after a seeded shuffle.
"""

from pathlib import Path
from typing import Dict, List, Tuple, Union
import logging

import numpy as np

from bmdsnet.errors import FormatError
from bmdsnet.formats.volume_file import read_volume, write_volume
from .phantom import PhantomSpec, Sample, generate
from .preprocessing import normalize_sample

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"
MANIFEST_HEADER = "# id split"
SPLITS = ("train", "val", "test")
SPLIT_FRACTIONS = (0.80, 0.15)


def split_counts(n: int) -> Tuple[int, int, int]:
    """Train/val/test sizes; 50 -> (40, 7, 3)."""
    n_train = int(n * SPLIT_FRACTIONS[0])
    n_val = int(n * SPLIT_FRACTIONS[1])
    return n_train, n_val, n - n_train - n_val


def assign_splits(ids: List[str], seed: int) -> Dict[str, str]:
    rng = np.random.default_rng([seed, 0x5EED])
    order = rng.permutation(len(ids))
    n_train, n_val, _ = split_counts(len(ids))
    splits: Dict[str, str] = {}
    for rank, idx in enumerate(order):
        if rank < n_train:
            splits[ids[idx]] = "train"
        elif rank < n_train + n_val:
            splits[ids[idx]] = "val"
        else:
            splits[ids[idx]] = "test"
    return splits


def write_dataset(out_dir: Union[str, Path], spec: PhantomSpec, n: int) -> Dict[str, str]:
    """
    Generate, normalize and write n phantoms plus the manifest.

    Returns:
        id -> split mapping
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    samples = [normalize_sample(s) for s in generate(spec, n)]
    splits = assign_splits([s.id for s in samples], spec.seed)

    for sample in samples:
        write_volume(out_dir / f"{sample.id}.vol", np.concatenate([sample.volume, sample.label]))

    lines = [MANIFEST_HEADER] + [f"{s.id} {splits[s.id]}" for s in samples]
    (out_dir / MANIFEST_NAME).write_text("\n".join(lines) + "\n")

    counts = {name: sum(1 for v in splits.values() if v == name) for name in SPLITS}
    logger.info(f"Wrote dataset to {out_dir}: {counts}")
    return splits


def read_manifest(data_dir: Union[str, Path]) -> Dict[str, str]:
    path = Path(data_dir) / MANIFEST_NAME
    if not path.exists():
        raise FormatError(f"Dataset manifest not found: {path}")
    splits: Dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in SPLITS:
            raise FormatError(f"{path}:{lineno}: expected '<id> <train|val|test>', got {raw!r}")
        splits[parts[0]] = parts[1]
    return splits


def load_sample(data_dir: Union[str, Path], sample_id: str, num_modalities: int = 4) -> Sample:
    raw = read_volume(Path(data_dir) / f"{sample_id}.vol")
    if raw.ndim != 4 or raw.shape[0] <= num_modalities:
        raise FormatError(f"{sample_id}: expected [C_in+C_out,S,S,S], got {raw.shape}")
    return Sample(volume=raw[:num_modalities].copy(), label=raw[num_modalities:].copy(), id=sample_id)


def load_split(data_dir: Union[str, Path], split: str, num_modalities: int = 4) -> List[Sample]:
    """Samples of one split, ordered by id."""
    splits = read_manifest(data_dir)
    ids = sorted(i for i, s in splits.items() if s == split)
    return [load_sample(data_dir, i, num_modalities) for i in ids]
