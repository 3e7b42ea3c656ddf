"""Descriptor outputs and learned filter banks."""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt

from src.core.errors import ContractError, DimensionError

FloatArray = npt.NDArray[np.float64]

LBP_BINS = 59
LPQ_BINS = 256


class DescriptorKind(str, Enum):
    LBP = "lbp"
    LPQ = "lpq"
    BSIF = "bsif"


class SourceKind(str, Enum):
    RAW = "raw"
    NORMAL_MAP = "normal"
    DIFFUSE_MAP = "diffuse"


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """L1-normalised descriptor histogram."""

    bins: FloatArray
    descriptor_kind: DescriptorKind
    source_kind: SourceKind

    def __post_init__(self) -> None:
        bins = np.array(self.bins, dtype=np.float64, copy=True)
        if bins.ndim != 1 or bins.size == 0:
            raise DimensionError(f"feature bins must be a non-empty vector, got shape {bins.shape}")
        if not np.all(np.isfinite(bins)) or bins.min() < 0.0:
            raise ContractError("feature bins must be finite and non-negative")
        if abs(float(bins.sum()) - 1.0) > 1e-9:
            raise ContractError(f"feature bins must sum to 1, got {bins.sum()!r}")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    @property
    def dimension(self) -> int:
        return int(self.bins.size)


@dataclass(frozen=True, eq=False)
class FilterBank:
    """k zero-mean s x s filters for BSIF coding, shape (k, s, s)."""

    filters: FloatArray
    converged: bool = True
    iterations: int = 0

    def __post_init__(self) -> None:
        filters = np.array(self.filters, dtype=np.float64, copy=True)
        if filters.ndim != 3 or filters.shape[1] != filters.shape[2]:
            raise DimensionError(f"filter bank must have shape (k, s, s), got {filters.shape}")
        if not np.all(np.isfinite(filters)):
            raise ContractError("filter coefficients must be finite")
        sums = filters.reshape(filters.shape[0], -1).sum(axis=1)
        if np.any(np.abs(sums) > 1e-6):
            raise ContractError(f"filters must be zero-mean, got sums {sums}")
        filters.setflags(write=False)
        object.__setattr__(self, "filters", filters)
        if self.gram_rank() < self.k:
            raise ContractError(f"filters are linearly dependent (rank {self.gram_rank()} < {self.k})")

    @property
    def k(self) -> int:
        return int(self.filters.shape[0])

    @property
    def s(self) -> int:
        return int(self.filters.shape[1])

    @property
    def bins(self) -> int:
        return 2**self.k

    def gram_rank(self) -> int:
        flat = self.filters.reshape(self.k, -1)
        return int(np.linalg.matrix_rank(flat @ flat.T))
