"""Subject-disjoint splitting and manifest-driven image access."""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from src.config.settings import SplitConfig
from src.core.errors import InsufficientSubjectsError
from src.models.dataset_models import Manifest, ManifestEntry
from src.models.image_models import GrayImage
from src.storage.image_store import read_image

logger = logging.getLogger(__name__)


def subject_disjoint_split(manifest: Manifest, config: SplitConfig) -> Tuple[Manifest, Manifest]:
    """Shuffle subjects with a seeded permutation; the first n_train train, the next n_test test."""
    subjects = manifest.subjects
    needed = config.n_train_subjects + config.n_test_subjects
    if needed > len(subjects):
        raise InsufficientSubjectsError(
            f"split needs {config.n_train_subjects} + {config.n_test_subjects} subjects, manifest has {len(subjects)}"
        )
    order = np.random.default_rng(config.seed).permutation(len(subjects))
    shuffled = [subjects[int(i)] for i in order]
    train = manifest.for_subjects(shuffled[: config.n_train_subjects])
    test = manifest.for_subjects(shuffled[config.n_train_subjects : needed])
    logger.info(
        "split: %d training subjects (%d entries), %d test subjects (%d entries)",
        config.n_train_subjects,
        len(train),
        config.n_test_subjects,
        len(test),
    )
    return train, test


def read_entry(entry: ManifestEntry, root: Union[str, Path]) -> GrayImage:
    return read_image(Path(root) / entry.path)


def group_by_illumination(entries: Sequence[ManifestEntry]) -> Dict[int, List[ManifestEntry]]:
    groups: Dict[int, List[ManifestEntry]] = {}
    for entry in entries:
        groups.setdefault(entry.illumination, []).append(entry)
    return dict(sorted(groups.items()))
