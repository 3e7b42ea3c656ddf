"""Score normalisation, sum-rule fusion and ISO/IEC 30107-3 error rates.

A presentation is classified bona fide iff its score >= threshold. APCER is
the fraction of attacks accepted, BPCER the fraction of bona fide rejected.
"""

from typing import List, Sequence, Tuple

import numpy as np

from src.core.errors import DimensionError, NormalizationError
from src.models.score_models import DetCurve, DetPoint, ScoreSet


def score_range(training_scores: Sequence[float]) -> Tuple[float, float]:
    if len(training_scores) == 0:
        raise NormalizationError("no training scores to take statistics from")
    return float(min(training_scores)), float(max(training_scores))


def minmax_normalize(scores: Sequence[float], stats_from: Tuple[float, float]) -> List[float]:
    """Map scores to [0, 1] with training (min, max); out-of-range scores are clamped."""
    low, high = stats_from
    if not high > low:
        raise NormalizationError(f"degenerate normalisation statistics: min {low}, max {high}")
    values = (np.asarray(scores, dtype=np.float64) - low) / (high - low)
    return [float(v) for v in np.clip(values, 0.0, 1.0)]


def sum_rule_fuse(per_classifier_scores: Sequence[Sequence[float]]) -> List[float]:
    """Per-sample mean of K aligned, already normalised score lists."""
    if len(per_classifier_scores) == 0:
        raise DimensionError("sum-rule fusion needs at least one score list")
    lengths = {len(scores) for scores in per_classifier_scores}
    if len(lengths) != 1:
        raise DimensionError(f"score lists differ in length: {sorted(lengths)}")
    stacked = np.asarray(per_classifier_scores, dtype=np.float64)
    mean = stacked.sum(axis=0) / len(per_classifier_scores)
    # Rounding in the sum must not push the mean outside the inputs' range.
    mean = np.clip(mean, stacked.min(axis=0), stacked.max(axis=0))
    return [float(v) for v in mean]


def apcer_bpcer(scores: ScoreSet, threshold: float) -> Tuple[float, float]:
    scores.require_both_classes()
    attacks = np.asarray(scores.attacks)
    bona_fide = np.asarray(scores.bona_fide)
    apcer = float(np.count_nonzero(attacks >= threshold)) / attacks.size
    bpcer = float(np.count_nonzero(bona_fide < threshold)) / bona_fide.size
    return apcer, bpcer


def candidate_thresholds(scores: ScoreSet) -> List[float]:
    """Every distinct score (the lowest accepts all) plus one step above the maximum (rejects all)."""
    distinct = sorted({entry.score for entry in scores.entries})
    return distinct + [float(np.nextafter(distinct[-1], np.inf))]


def _sweep(scores: ScoreSet) -> List[DetPoint]:
    scores.require_both_classes()
    attacks = np.sort(np.asarray(scores.attacks))
    bona_fide = np.sort(np.asarray(scores.bona_fide))
    thresholds = np.asarray(candidate_thresholds(scores))
    accepted_attacks = attacks.size - np.searchsorted(attacks, thresholds, side="left")
    rejected_bona_fide = np.searchsorted(bona_fide, thresholds, side="left")
    return [
        DetPoint(threshold=float(t), apcer=float(a) / attacks.size, bpcer=float(r) / bona_fide.size)
        for t, a, r in zip(thresholds, accepted_attacks, rejected_bona_fide)
    ]


def d_eer(scores: ScoreSet) -> Tuple[float, float]:
    """Detection equal error rate and its threshold.

    Picks the swept threshold minimising |APCER - BPCER| (the lower threshold on
    ties) and reports (APCER + BPCER) / 2 there.
    """
    points = _sweep(scores)
    best = min(points, key=lambda p: (abs(p.apcer - p.bpcer), p.threshold))
    return (best.apcer + best.bpcer) / 2.0, best.threshold


def bpcer_at_apcer(scores: ScoreSet, target: float) -> float:
    """Lowest BPCER among thresholds with APCER <= target (1.0 when only reject-all qualifies)."""
    return min(point.bpcer for point in _sweep(scores) if point.apcer <= target)


def det_curve(scores: ScoreSet) -> DetCurve:
    return DetCurve(points=tuple(_sweep(scores)))
