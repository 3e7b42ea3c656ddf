"""Outputs of the shape/material decomposition."""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from src.core.errors import ContractError, DimensionError
from src.models.image_models import LightingCoeffs, NormalMap, ScalarMap


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    normal_map: NormalMap
    albedo: ScalarMap
    shading: ScalarMap
    diffuse: ScalarMap
    lighting: LightingCoeffs
    residual_rmse: float
    objective_trace: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        shape = self.normal_map.shape
        for name, scalar_map in (
            ("albedo", self.albedo),
            ("shading", self.shading),
            ("diffuse", self.diffuse),
        ):
            if scalar_map.shape != shape:
                raise DimensionError(f"{name} map {scalar_map.shape} does not match normal map {shape}")
        expected = np.clip(self.albedo.values * self.shading.values, 0.0, 1.0)
        if np.max(np.abs(expected - self.diffuse.values)) > 1e-9:
            raise ContractError("diffuse map must equal clamp(albedo * shading, 0, 1)")
        if not np.isfinite(self.residual_rmse) or self.residual_rmse < 0.0:
            raise ContractError(f"residual_rmse must be finite and >= 0, got {self.residual_rmse}")

    @property
    def iterations(self) -> int:
        return max(len(self.objective_trace) - 1, 0)
