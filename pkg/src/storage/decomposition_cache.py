"""On-disk cache of decomposed maps, keyed by solver settings and image content.

Entries live under ``<directory>/<solver hash>/<image hash>.npz``; an entry
that cannot be read counts as a miss.
"""

import hashlib
import logging
import os
import zipfile
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from src.config.settings import SolverConfig
from src.core.errors import PadError
from src.models.image_models import GrayImage, NormalMap, ScalarMap

logger = logging.getLogger(__name__)

DecomposedMaps = Tuple[NormalMap, ScalarMap]

KEY_LENGTH = 16


def solver_key(config: SolverConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()[:KEY_LENGTH]


def image_key(image: GrayImage) -> str:
    digest = hashlib.sha256(f"{image.height}x{image.width}:".encode("ascii"))
    digest.update(np.ascontiguousarray(image.pixels, dtype="<f8").tobytes())
    return digest.hexdigest()


class DecompositionCache:
    def __init__(self, directory: Union[str, Path], solver: SolverConfig):
        self.directory = Path(directory) / solver_key(solver)

    def path_for(self, image: GrayImage) -> Path:
        return self.directory / f"{image_key(image)}.npz"

    def get(self, image: GrayImage) -> Optional[DecomposedMaps]:
        path = self.path_for(image)
        if not path.exists():
            return None
        try:
            with np.load(path) as data:
                normals = NormalMap(data["normals"])
                diffuse = ScalarMap(data["diffuse"])
        except (OSError, EOFError, KeyError, ValueError, zipfile.BadZipFile, PadError) as exc:
            logger.warning("ignoring unreadable cache entry %s: %s", path, exc)
            return None
        if normals.shape != image.shape or diffuse.shape != image.shape:
            logger.warning("ignoring cache entry %s with shape %s for image %s", path, normals.shape, image.shape)
            return None
        return normals, diffuse

    def put(self, image: GrayImage, maps: DecomposedMaps) -> None:
        """Store the maps; concurrent writers of the same entry are harmless."""
        normals, diffuse = maps
        path = self.path_for(image)
        staging = path.with_name(f".{path.stem}.{os.getpid()}.npz")
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            np.savez(staging, normals=normals.normals, diffuse=diffuse.values)
            os.replace(staging, path)
        except OSError as exc:
            logger.warning("cannot write cache entry %s: %s", path, exc)
            staging.unlink(missing_ok=True)
