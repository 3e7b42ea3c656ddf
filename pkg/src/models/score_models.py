"""Labelled PAD scores and DET curves."""

import math
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, field_validator

from src.core.errors import DimensionError, MetricError
from src.models.image_models import PresentationLabel


class ScoreEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    score: float
    label: PresentationLabel
    sample_id: str

    @field_validator("score")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"score must be finite, got {value}")
        return value


class ScoreSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: Tuple[ScoreEntry, ...] = ()

    @classmethod
    def from_lists(
        cls, scores: List[float], labels: List[PresentationLabel], sample_ids: List[str]
    ) -> "ScoreSet":
        if not len(scores) == len(labels) == len(sample_ids):
            raise DimensionError(
                f"got {len(scores)} scores, {len(labels)} labels and {len(sample_ids)} sample ids"
            )
        return cls(
            entries=tuple(
                ScoreEntry(score=s, label=l, sample_id=i) for s, l, i in zip(scores, labels, sample_ids)
            )
        )

    def scores_for(self, label: PresentationLabel) -> List[float]:
        return [entry.score for entry in self.entries if entry.label is label]

    @property
    def bona_fide(self) -> List[float]:
        return self.scores_for(PresentationLabel.BONA_FIDE)

    @property
    def attacks(self) -> List[float]:
        return self.scores_for(PresentationLabel.ATTACK)

    def require_both_classes(self) -> None:
        if not self.bona_fide or not self.attacks:
            raise MetricError(
                f"score set needs both classes, got {len(self.bona_fide)} bona fide and {len(self.attacks)} attack"
            )


class DetPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    threshold: float
    apcer: float
    bpcer: float


class DetCurve(BaseModel):
    """Operating points ordered by increasing threshold."""

    model_config = ConfigDict(frozen=True)

    points: Tuple[DetPoint, ...]

    @property
    def thresholds(self) -> List[float]:
        return [point.threshold for point in self.points]
