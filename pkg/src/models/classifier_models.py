"""Trained linear PAD classifier."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from src.core.errors import ContractError, DimensionError
from src.models.feature_models import DescriptorKind, SourceKind

FloatArray = npt.NDArray[np.float64]


class TrainMeta(BaseModel):
    """Provenance and training statistics stored alongside a model."""

    model_config = ConfigDict(frozen=True)

    descriptor_kind: DescriptorKind
    source_kind: SourceKind
    illumination: Optional[int] = None
    n_bona_fide: int = 0
    n_attack: int = 0
    epochs_run: int = 0
    primal_objective: float = 0.0
    dual_objective: float = 0.0
    max_violation: float = 0.0
    score_min: Optional[float] = None
    score_max: Optional[float] = None


@dataclass(frozen=True, eq=False)
class LinearModel:
    """w . scale(x) + b; higher scores mean more bona fide."""

    weights: FloatArray
    bias: float
    feature_min: FloatArray
    feature_max: FloatArray
    meta: TrainMeta
    dual_trace: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        arrays = []
        for name in ("weights", "feature_min", "feature_max"):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if array.ndim != 1:
                raise DimensionError(f"{name} must be a vector, got shape {array.shape}")
            if not np.all(np.isfinite(array)):
                raise ContractError(f"{name} must be finite")
            array.setflags(write=False)
            object.__setattr__(self, name, array)
            arrays.append(array)
        if not (arrays[0].size == arrays[1].size == arrays[2].size):
            raise DimensionError("weights and scaling statistics differ in length")
        if np.any(self.feature_min > self.feature_max):
            raise ContractError("feature_min must not exceed feature_max")
        if not np.isfinite(self.bias):
            raise ContractError("bias must be finite")

    @property
    def dimension(self) -> int:
        return int(self.weights.size)

    def with_meta(self, meta: TrainMeta) -> "LinearModel":
        return LinearModel(self.weights, self.bias, self.feature_min, self.feature_max, meta, self.dual_trace)
