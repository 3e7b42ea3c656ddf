"""Linear max-margin classifier trained by dual coordinate ascent.

Solves  min_{w,b} 1/2 |w|^2 + C sum_i max(0, 1 - y_i (w . x_i + b))  with an
unregularised bias. Its dual keeps sum_i alpha_i y_i = 0, so each update moves
the smallest feasible block: the coordinate visited from the epoch's seeded
permutation together with its maximal-violation partner.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.config.settings import TrainConfig
from src.core.errors import DimensionError, TrainingError
from src.models.classifier_models import LinearModel, TrainMeta
from src.models.feature_models import FeatureVector
from src.models.image_models import PresentationLabel

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

SCORE_CLAMP = (-0.5, 1.5)
_MIN_CURVATURE = 1e-12


def scale_features(features: FloatArray, minimum: FloatArray, maximum: FloatArray) -> FloatArray:
    """Min-max scale columns to the training range; constant columns map to 0."""
    span = maximum - minimum
    constant = span == 0.0
    scaled = (features - minimum) / np.where(constant, 1.0, span)
    scaled[..., constant] = 0.0
    return scaled


def primal_objective(scaled: FloatArray, targets: FloatArray, weights: FloatArray, bias: float, c: float) -> float:
    margins = targets * (scaled @ weights + bias)
    return float(0.5 * weights @ weights + c * np.sum(np.maximum(0.0, 1.0 - margins)))


class _DualCoordinateAscent:
    def __init__(self, data: FloatArray, targets: FloatArray, config: TrainConfig):
        self.data = data
        self.targets = targets
        self.c = config.regularization_c
        self.config = config
        self.alpha = np.zeros(len(targets))
        self.weights = np.zeros(data.shape[1])

    def dual_objective(self) -> float:
        return float(np.sum(self.alpha) - 0.5 * self.weights @ self.weights)

    def _violation_sets(self) -> Tuple[FloatArray, npt.NDArray[np.bool_], npt.NDArray[np.bool_]]:
        # v_t = -y_t * dual gradient; KKT holds when max over up-set <= min over low-set.
        values = self.targets - self.data @ self.weights
        positive = self.targets > 0
        up = ((self.alpha < self.c) & positive) | ((self.alpha > 0.0) & ~positive)
        low = ((self.alpha < self.c) & ~positive) | ((self.alpha > 0.0) & positive)
        return values, up, low

    def max_violation(self) -> float:
        values, up, low = self._violation_sets()
        if not up.any() or not low.any():
            return 0.0
        return float(values[up].max() - values[low].min())

    def _step_bound(self, index: int, direction: float) -> float:
        """Largest t keeping alpha_index + direction * y_index * t inside [0, C]."""
        signed = direction * self.targets[index]
        return float(self.c - self.alpha[index] if signed > 0 else self.alpha[index])

    def _update_pair(self, i: int, j: int, values: FloatArray) -> None:
        difference = self.data[i] - self.data[j]
        curvature = max(float(difference @ difference), _MIN_CURVATURE)
        step = (values[i] - values[j]) / curvature
        step = min(step, self._step_bound(i, 1.0), self._step_bound(j, -1.0))
        if step <= 0.0:
            return
        self.alpha[i] = np.clip(self.alpha[i] + self.targets[i] * step, 0.0, self.c)
        self.alpha[j] = np.clip(self.alpha[j] - self.targets[j] * step, 0.0, self.c)
        self.weights = self.weights + step * difference

    def _visit(self, i: int) -> None:
        values, up, low = self._violation_sets()
        best_gain, pair = self.config.tol, None
        if up[i] and low.any():
            j = int(np.argmin(np.where(low, values, np.inf)))
            if values[i] - values[j] > best_gain:
                best_gain, pair = values[i] - values[j], (i, j)
        if low[i] and up.any():
            j = int(np.argmax(np.where(up, values, -np.inf)))
            if values[j] - values[i] > best_gain:
                best_gain, pair = values[j] - values[i], (j, i)
        if pair is not None:
            self._update_pair(pair[0], pair[1], values)

    def run(self) -> Tuple[int, List[float]]:
        rng = np.random.default_rng(self.config.seed)
        trace = [self.dual_objective()]
        epoch = 0
        for epoch in range(1, self.config.epochs + 1):
            for i in rng.permutation(len(self.targets)):
                self._visit(int(i))
            trace.append(self.dual_objective())
            violation = self.max_violation()
            logger.debug("epoch %d dual %.6e violation %.3e", epoch, trace[-1], violation)
            if violation < self.config.tol:
                break
        self.weights = (self.alpha * self.targets) @ self.data
        return epoch, trace

    def bias(self) -> float:
        values, up, low = self._violation_sets()
        margin = 1e-12 * self.c
        free = (self.alpha > margin) & (self.alpha < self.c - margin)
        if free.any():
            return float(np.mean(values[free]))
        upper = values[up].max() if up.any() else 0.0
        lower = values[low].min() if low.any() else 0.0
        return float((upper + lower) / 2.0)


def train(
    features: Sequence[FeatureVector],
    labels: Sequence[PresentationLabel],
    config: Optional[TrainConfig] = None,
    illumination: Optional[int] = None,
) -> LinearModel:
    """Fit a linear SVM with bona fide as the positive class."""
    config = config or TrainConfig()
    if len(features) != len(labels):
        raise DimensionError(f"{len(features)} features but {len(labels)} labels")
    if not features:
        raise TrainingError("no training samples")
    dimensions = {feature.dimension for feature in features}
    if len(dimensions) != 1:
        raise DimensionError(f"training features differ in dimension: {sorted(dimensions)}")
    targets = np.array([label.sign for label in labels], dtype=np.float64)
    n_bona_fide = int(np.sum(targets > 0))
    n_attack = int(np.sum(targets < 0))
    if n_bona_fide < 2 or n_attack < 2:
        raise TrainingError(
            f"need at least 2 samples per class, got {n_bona_fide} bona fide and {n_attack} attack"
        )

    raw = np.stack([feature.bins for feature in features])
    minimum, maximum = raw.min(axis=0), raw.max(axis=0)
    scaled = scale_features(raw, minimum, maximum)

    solver = _DualCoordinateAscent(scaled, targets, config)
    epochs_run, trace = solver.run()
    bias = solver.bias()
    meta = TrainMeta(
        descriptor_kind=features[0].descriptor_kind,
        source_kind=features[0].source_kind,
        illumination=illumination,
        n_bona_fide=n_bona_fide,
        n_attack=n_attack,
        epochs_run=epochs_run,
        primal_objective=primal_objective(scaled, targets, solver.weights, bias, config.regularization_c),
        dual_objective=solver.dual_objective(),
        max_violation=solver.max_violation(),
    )
    logger.debug(
        "trained %s/%s: %d epochs, primal %.6f, dual %.6f",
        meta.descriptor_kind.value,
        meta.source_kind.value,
        epochs_run,
        meta.primal_objective,
        meta.dual_objective,
    )
    return LinearModel(solver.weights, bias, minimum, maximum, meta, tuple(trace))


def score(model: LinearModel, feature: FeatureVector) -> float:
    """Signed distance-like score: w . clamp(scale(x), -0.5, 1.5) + b."""
    if feature.dimension != model.dimension:
        raise DimensionError(f"feature has {feature.dimension} dimensions, model expects {model.dimension}")
    scaled = np.clip(scale_features(feature.bins, model.feature_min, model.feature_max), *SCORE_CLAMP)
    return float(scaled @ model.weights + model.bias)


def score_all(model: LinearModel, features: Sequence[FeatureVector]) -> List[float]:
    return [score(model, feature) for feature in features]
