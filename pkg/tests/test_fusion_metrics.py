import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import DimensionError, MetricError, NormalizationError
from src.core.fusion_metrics import (
    apcer_bpcer,
    bpcer_at_apcer,
    candidate_thresholds,
    d_eer,
    det_curve,
    minmax_normalize,
    score_range,
    sum_rule_fuse,
)
from src.models.image_models import PresentationLabel
from src.models.score_models import ScoreSet
from tests.oracles import brute_force_bpcer_at, brute_force_eer, brute_force_rates

BONA_FIDE = PresentationLabel.BONA_FIDE
ATTACK = PresentationLabel.ATTACK


def score_set(attacks, bona_fide):
    scores = list(attacks) + list(bona_fide)
    labels = [ATTACK] * len(attacks) + [BONA_FIDE] * len(bona_fide)
    return ScoreSet.from_lists(scores, labels, [f"p{i}" for i in range(len(scores))])


def as_pairs(scores: ScoreSet):
    return [(entry.score, entry.label.value) for entry in scores.entries]


def random_set(rng, n_attack, n_bona_fide, levels=None):
    """Scores on a coarse grid when `levels` is given, so that ties are frequent."""
    if levels:
        draw = lambda n: (rng.integers(0, levels, n) / levels).tolist()  # noqa: E731
    else:
        draw = lambda n: rng.random(n).tolist()  # noqa: E731
    return score_set(draw(n_attack), draw(n_bona_fide))


def test_minmax_endpoints_and_clamp():
    assert minmax_normalize([2.0, 4.0], (2.0, 4.0)) == [0.0, 1.0]
    assert minmax_normalize([5.0, -1.0, 3.0], (2.0, 4.0)) == [1.0, 0.0, 0.5]


def test_minmax_degenerate_statistics():
    with pytest.raises(NormalizationError):
        minmax_normalize([3.0], (3.0, 3.0))


def test_score_range_needs_scores():
    assert score_range([0.2, -1.5, 0.7]) == (-1.5, 0.7)
    with pytest.raises(NormalizationError):
        score_range([])


def test_sum_rule_examples():
    assert sum_rule_fuse([[0.3, 0.9, 0.0]]) == [0.3, 0.9, 0.0]
    assert sum_rule_fuse([[0.0, 1.0], [1.0, 0.0]]) == [0.5, 0.5]


def test_sum_rule_six_classifiers_by_hand():
    lists = [
        [0.10, 0.20, 0.30, 0.40],
        [0.50, 0.60, 0.70, 0.80],
        [0.90, 1.00, 0.00, 0.10],
        [0.20, 0.30, 0.40, 0.50],
        [0.60, 0.70, 0.80, 0.90],
        [0.00, 0.10, 0.20, 0.30],
    ]
    expected = [2.30 / 6, 2.90 / 6, 2.40 / 6, 3.00 / 6]
    np.testing.assert_allclose(sum_rule_fuse(lists), expected, rtol=1e-12)


def test_sum_rule_length_mismatch():
    with pytest.raises(DimensionError):
        sum_rule_fuse([[0.1, 0.2], [0.3]])
    with pytest.raises(DimensionError):
        sum_rule_fuse([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5), min_size=1, max_size=6))
def test_sum_rule_stays_within_inputs(lists):
    fused = sum_rule_fuse(lists)
    stacked = np.asarray(lists)
    assert np.all(fused >= stacked.min(axis=0))
    assert np.all(fused <= stacked.max(axis=0))


def test_rates_examples():
    assert apcer_bpcer(score_set([0.1] * 4, [0.9] * 4), 0.5) == (0.0, 0.0)
    assert apcer_bpcer(score_set([0.5] * 3, [0.5] * 3), 0.5) == (1.0, 0.0)


def test_rates_match_counting(rng):
    for _ in range(50):
        scores = random_set(rng, 4, 4, levels=6)
        for threshold in candidate_thresholds(scores) + [-1.0, 2.0]:
            assert apcer_bpcer(scores, threshold) == brute_force_rates(as_pairs(scores), threshold)


def test_eer_of_separated_and_identical_sets():
    eer, threshold = d_eer(score_set([0.1, 0.2, 0.3], [0.7, 0.8, 0.9]))
    assert eer == 0.0 and 0.3 < threshold <= 0.7
    values = [0.1, 0.2, 0.2, 0.4, 0.6, 0.9]
    eer, _ = d_eer(score_set(values, values))
    assert abs(eer - 0.5) <= 1.0 / (2 * len(values))


def test_eer_hand_built_set():
    scores = score_set([0.1, 0.4, 0.35, 0.8], [0.9, 0.3, 0.7, 0.6])
    assert d_eer(scores) == brute_force_eer(as_pairs(scores))
    assert d_eer(scores) == (0.25, 0.6)


def test_metrics_match_exhaustive_sweep(rng):
    for trial in range(50):
        scores = random_set(rng, int(rng.integers(1, 12)), int(rng.integers(1, 12)), levels=8 if trial % 2 else None)
        pairs = as_pairs(scores)
        assert d_eer(scores) == brute_force_eer(pairs)
        for target in (0.05, 0.10):
            assert bpcer_at_apcer(scores, target) == brute_force_bpcer_at(pairs, target)


def test_eer_gap_is_within_class_granularity(rng):
    for _ in range(30):
        scores = random_set(rng, int(rng.integers(2, 15)), int(rng.integers(2, 15)))
        _, threshold = d_eer(scores)
        apcer, bpcer = apcer_bpcer(scores, threshold)
        assert abs(apcer - bpcer) <= 1.0 / min(len(scores.attacks), len(scores.bona_fide)) + 1e-12


def test_bpcer_at_apcer_examples():
    assert bpcer_at_apcer(score_set([0.1, 0.2], [0.8, 0.9]), 0.05) == 0.0
    assert bpcer_at_apcer(score_set([0.5] * 4, [0.5] * 4), 0.05) == 1.0


def test_det_endpoints_and_consistency(rng):
    scores = random_set(rng, 10, 10, levels=7)
    curve = det_curve(scores)
    assert (curve.points[0].apcer, curve.points[0].bpcer) == (1.0, 0.0)
    assert (curve.points[-1].apcer, curve.points[-1].bpcer) == (0.0, 1.0)
    assert curve.thresholds == sorted(curve.thresholds)
    for point in curve.points:
        assert apcer_bpcer(scores, point.threshold) == (point.apcer, point.bpcer)


def test_det_touches_origin_when_separated():
    curve = det_curve(score_set([0.1, 0.2], [0.6, 0.7]))
    assert any(point.apcer == 0.0 and point.bpcer == 0.0 for point in curve.points)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 20), min_size=1, max_size=10),
    st.lists(st.integers(0, 20), min_size=1, max_size=10),
)
def test_metrics_ignore_increasing_transforms(attacks, bona_fide):
    original = score_set([float(a) for a in attacks], [float(b) for b in bona_fide])
    transformed = score_set([3.0 * a**3 + a for a in attacks], [3.0 * b**3 + b for b in bona_fide])
    assert d_eer(original)[0] == d_eer(transformed)[0]
    for target in (0.05, 0.10):
        assert bpcer_at_apcer(original, target) == bpcer_at_apcer(transformed, target)
    before = [(p.apcer, p.bpcer) for p in det_curve(original).points]
    after = [(p.apcer, p.bpcer) for p in det_curve(transformed).points]
    assert before == after


def test_single_class_is_rejected():
    only_attacks = score_set([0.1, 0.2], [])
    for metric in (d_eer, det_curve):
        with pytest.raises(MetricError):
            metric(only_attacks)
    with pytest.raises(MetricError):
        apcer_bpcer(only_attacks, 0.5)
    with pytest.raises(MetricError):
        bpcer_at_apcer(score_set([], [0.4]), 0.05)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_score_set_from_lists_rejects_ragged_columns(n_scores, n_labels, n_ids):
    scores = [0.1 * i for i in range(n_scores)]
    labels = [ATTACK] * n_labels
    ids = [f"p{i}" for i in range(n_ids)]
    if n_scores == n_labels == n_ids:
        assert len(ScoreSet.from_lists(scores, labels, ids).entries) == n_scores
    else:
        with pytest.raises(DimensionError):
            ScoreSet.from_lists(scores, labels, ids)
