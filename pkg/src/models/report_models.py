from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict

from src.config.settings import PipelineMode
from src.models.feature_models import DescriptorKind, SourceKind


class ModelSummary(BaseModel):
    """Per-classifier training record."""

    model_config = ConfigDict(frozen=True)

    name: str
    source_kind: SourceKind
    illumination: int
    n_bona_fide: int
    n_attack: int
    epochs_run: int
    primal_objective: float
    dual_objective: float
    score_min: float
    score_max: float


class TrainReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: PipelineMode
    descriptor_kind: DescriptorKind
    train_subjects: int
    test_subjects: int
    bsif_filters_learned: Optional[bool] = None
    models: List[ModelSummary]


class MetricRow(BaseModel):
    """Error rates of one score set, as fractions in [0, 1]."""

    model_config = ConfigDict(frozen=True)

    name: str
    n_bona_fide: int
    n_attack: int
    d_eer: float
    eer_threshold: float
    bpcer_at_apcer_5: float
    bpcer_at_apcer_10: float


class EvalReport(BaseModel):
    """Per-classifier rows keyed by illumination plus the fused rows."""

    model_config = ConfigDict(frozen=True)

    mode: PipelineMode
    descriptor_kind: DescriptorKind
    per_illumination: Dict[int, List[MetricRow]]
    fused: List[MetricRow]
