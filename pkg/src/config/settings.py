from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, get_args, get_origin

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.models.feature_models import DescriptorKind


class PipelineMode(str, Enum):
    PROPOSED = "proposed"
    BASELINE = "baseline"


class SolverConfig(BaseModel):
    """Alternating decomposition solver parameters."""

    max_outer_iterations: int = Field(default=50, gt=0)
    convergence_tol: float = Field(default=1e-4, gt=0.0, lt=1.0)
    smoothness_weight: float = Field(default=0.1, ge=0.0)
    shading_floor: float = Field(default=1e-3, gt=0.0)
    albedo_max: float = Field(default=2.0, gt=0.0)
    init_blur_sigma: float = Field(default=4.0, gt=0.0)
    normal_step: float = Field(default=1.0, gt=0.0)
    max_step_halvings: int = Field(default=12, ge=0)
    seed: int = 0


class TrainConfig(BaseModel):
    """Linear SVM training parameters."""

    regularization_c: float = Field(default=1.0, gt=0.0)
    epochs: int = Field(default=200, gt=0)
    tol: float = Field(default=1e-6, gt=0.0)
    seed: int = 0


class SplitConfig(BaseModel):
    n_train_subjects: int = Field(default=36, ge=1)
    n_test_subjects: int = Field(default=42, ge=1)
    seed: int = 0


class SynthConfig(BaseModel):
    """Synthetic finger-vein capture parameters."""

    n_subjects: int = Field(default=78, gt=0)
    width: int = Field(default=744, ge=16)
    height: int = Field(default=480, ge=16)
    vein_count: Tuple[int, int] = (3, 6)
    vein_width: Tuple[float, float] = (2.0, 5.0)
    vein_contrast: Tuple[float, float] = (0.25, 0.5)
    illumination_scales: Tuple[float, float, float] = (1.0, 0.8, 1.2)
    noise_sigma: float = Field(default=0.01, ge=0.0)
    finger_tilt: float = Field(default=1.2, gt=0.0)
    session_shift: int = Field(default=5, ge=0)
    halftone_period: float = Field(default=4.0, gt=0.0)
    halftone_amplitude: float = Field(default=0.15, ge=0.0, le=1.0)
    grain_amplitude: float = Field(default=0.04, ge=0.0)
    flattening: float = Field(default=0.85, ge=0.0, le=1.0)
    seed: int = 0

    @field_validator("vein_count", "vein_width", "vein_contrast")
    @classmethod
    def _ordered_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if low <= 0 or high < low:
            raise ValueError(f"range must satisfy 0 < low <= high, got {value}")
        return value

    @field_validator("illumination_scales")
    @classmethod
    def _positive_scales(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(scale <= 0 for scale in value):
            raise ValueError(f"illumination scales must be positive, got {value}")
        return value


class DescriptorConfig(BaseModel):
    kind: DescriptorKind = DescriptorKind.LBP
    bsif_filters: int = Field(default=8, ge=1, le=16)
    bsif_size: int = Field(default=11, ge=3)
    bsif_patches: int = Field(default=10000, ge=5000)
    bsif_filter_path: Optional[Path] = None

    @model_validator(mode="after")
    def _filters_fit_patch(self) -> "DescriptorConfig":
        if self.bsif_size % 2 == 0:
            raise ValueError(f"bsif_size must be odd, got {self.bsif_size}")
        if self.bsif_filters > self.bsif_size**2 - 1:
            raise ValueError("bsif_filters must not exceed bsif_size**2 - 1")
        return self


class RuntimeConfig(BaseModel):
    workers: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    cache_dir: Optional[Path] = None


class PipelineConfig(BaseModel):
    """Everything one pipeline run depends on; snapshotted into model bundles."""

    mode: PipelineMode = PipelineMode.PROPOSED
    descriptor: DescriptorConfig = DescriptorConfig()
    solver: SolverConfig = SolverConfig()
    train: TrainConfig = TrainConfig()
    split: SplitConfig = SplitConfig()
    synth: SynthConfig = SynthConfig()

    @property
    def use_decomposition(self) -> bool:
        return self.mode is PipelineMode.PROPOSED

    def to_snapshot(self) -> Dict[str, str]:
        """Flatten to dotted ``key=value`` pairs."""
        flat: Dict[str, str] = {}

        def walk(prefix: str, data: object) -> None:
            if isinstance(data, dict):
                for key, value in data.items():
                    walk(f"{prefix}.{key}" if prefix else key, value)
            elif isinstance(data, (list, tuple)):
                flat[prefix] = ",".join(str(item) for item in data)
            else:
                flat[prefix] = "" if data is None else str(data)

        walk("", self.model_dump(mode="json"))
        return dict(sorted(flat.items()))

    @classmethod
    def from_snapshot(cls, flat: Dict[str, str]) -> "PipelineConfig":
        """Rebuild from ``to_snapshot`` output, parsing each value by its field's type."""
        nested: Dict[str, Any] = {}
        for dotted, raw in flat.items():
            node = nested
            model: Optional[Type[BaseModel]] = cls
            *parents, leaf = dotted.split(".")
            for part in parents:
                field = model.model_fields.get(part) if model is not None else None
                annotation = field.annotation if field is not None else None
                model = annotation if isinstance(annotation, type) and issubclass(annotation, BaseModel) else None
                node = node.setdefault(part, {})
            field = model.model_fields.get(leaf) if model is not None else None
            node[leaf] = _parse_snapshot_value(raw, field.annotation if field is not None else None)
        return cls.model_validate(nested)


def _parse_snapshot_value(raw: str, annotation: Any) -> Any:
    if raw == "" and type(None) in get_args(annotation):
        return None
    if get_origin(annotation) in (tuple, list):
        return raw.split(",") if raw else []
    return raw


class Settings(BaseSettings):
    """Application settings loaded from environment variables or .env file"""

    descriptor: DescriptorConfig = DescriptorConfig()
    solver: SolverConfig = SolverConfig()
    train: TrainConfig = TrainConfig()
    split: SplitConfig = SplitConfig()
    synth: SynthConfig = SynthConfig()
    runtime: RuntimeConfig = RuntimeConfig()

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        env_nested_delimiter="__",
        env_prefix="FVPAD_",
    )

    def pipeline(self, mode: PipelineMode = PipelineMode.PROPOSED) -> PipelineConfig:
        return PipelineConfig(
            mode=mode,
            descriptor=self.descriptor,
            solver=self.solver,
            train=self.train,
            split=self.split,
            synth=self.synth,
        )


# Create a global instance of the settings
settings = Settings()
