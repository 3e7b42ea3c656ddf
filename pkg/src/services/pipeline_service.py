"""Train, evaluate and plot: the PAD pipeline from manifest to report.

Proposed mode decomposes every capture and trains one classifier per map
(normal, diffuse) and illumination; baseline mode describes the raw captures
and trains one classifier per illumination. Scores are written to disk before
any metric is computed, and the report is always computed from those files.
"""

import csv
import io
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from src.config.settings import PipelineConfig
from src.core.classifier import score_all, train
from src.core.decomposition import decompose
from src.core.descriptors import extract, learn_bsif_filters, sample_patches
from src.core.errors import DimensionError, ModelFormatError, NormalizationError, UsageError
from src.core.fusion_metrics import (
    bpcer_at_apcer,
    d_eer,
    det_curve,
    minmax_normalize,
    score_range,
    sum_rule_fuse,
)
from src.models.classifier_models import LinearModel
from src.models.dataset_models import ILLUMINATIONS, Manifest, ManifestEntry
from src.models.feature_models import DescriptorKind, FeatureVector, FilterBank, SourceKind
from src.models.image_models import GrayImage, NormalMap, PresentationLabel, ScalarMap
from src.models.report_models import EvalReport, MetricRow, ModelSummary, TrainReport
from src.models.score_models import DetCurve, ScoreSet
from src.services.dataset_service import group_by_illumination, read_entry, subject_disjoint_split
from src.storage.bundle_manager import ModelBundle, load_filter_bank
from src.storage.decomposition_cache import DecompositionCache
from src.storage.image_store import read_image, write_normal_map, write_scalar_map
from src.storage.manifest_store import save_manifest
from src.storage.score_store import plot_det_curves, read_scores, write_det, write_scores

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
EntryFeatures = Dict[SourceKind, FeatureVector]

SPLIT_TRAIN_FILE = "split_train.csv"
SPLIT_TEST_FILE = "split_test.csv"
REPORT_TEXT_FILE = "report.txt"
REPORT_JSON_FILE = "report.json"
SCORE_PREFIX = "scores_"
FUSED_PREFIX = "fused_"
APCER_TARGETS = (0.05, 0.10)


def model_name(source: SourceKind, illumination: int) -> str:
    return f"{source.value}_i{illumination}"


def parse_model_name(name: str) -> Tuple[SourceKind, int]:
    source, _, illumination = name.rpartition("_i")
    try:
        return SourceKind(source), int(illumination)
    except ValueError as exc:
        raise ModelFormatError(f"not a classifier name: {name}") from exc


def sources_for(config: PipelineConfig) -> Tuple[SourceKind, ...]:
    if config.use_decomposition:
        return (SourceKind.NORMAL_MAP, SourceKind.DIFFUSE_MAP)
    return (SourceKind.RAW,)


def decomposed_maps(
    image: GrayImage, config: PipelineConfig, cache: Optional[DecompositionCache] = None
) -> Tuple[NormalMap, ScalarMap]:
    if cache is not None:
        cached = cache.get(image)
        if cached is not None:
            return cached
    result = decompose(image, config.solver)
    maps = (result.normal_map, result.diffuse)
    if cache is not None:
        cache.put(image, maps)
    return maps


def describe_image(
    image: GrayImage,
    config: PipelineConfig,
    bank: Optional[FilterBank],
    cache: Optional[DecompositionCache] = None,
) -> EntryFeatures:
    kind = config.descriptor.kind
    if not config.use_decomposition:
        return {SourceKind.RAW: extract(image, kind, bank)}
    normal_map, diffuse = decomposed_maps(image, config, cache)
    return {
        SourceKind.NORMAL_MAP: extract(normal_map, kind, bank),
        SourceKind.DIFFUSE_MAP: extract(diffuse, kind, bank),
    }


def _describe_entry(
    entry: ManifestEntry,
    root: Path,
    config: PipelineConfig,
    bank: Optional[FilterBank],
    cache_dir: Optional[Path],
) -> EntryFeatures:
    logger.debug("describing %s", entry.image_id)
    cache = None if cache_dir is None else DecompositionCache(cache_dir, config.solver)
    return describe_image(read_entry(entry, root), config, bank, cache)


def describe_entries(
    entries: Sequence[ManifestEntry],
    root: PathLike,
    config: PipelineConfig,
    bank: Optional[FilterBank],
    workers: int = 1,
    cache_dir: Optional[PathLike] = None,
) -> List[EntryFeatures]:
    """Features of every entry, in entry order whatever the worker count.

    With ``cache_dir`` set, decomposed maps are reused across runs and descriptors.
    """
    task = partial(
        _describe_entry,
        root=Path(root),
        config=config,
        bank=bank,
        cache_dir=None if cache_dir is None else Path(cache_dir),
    )
    if workers <= 1:
        return [task(entry) for entry in entries]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, entries, chunksize=max(1, len(entries) // (4 * workers))))


def resolve_filter_bank(
    config: PipelineConfig, entries: Sequence[ManifestEntry], root: PathLike
) -> Optional[FilterBank]:
    """Load the configured BSIF bank, or learn one from bona fide reference-illumination captures."""
    descriptor = config.descriptor
    if descriptor.kind is not DescriptorKind.BSIF:
        return None
    if descriptor.bsif_filter_path is not None:
        bank = load_filter_bank(descriptor.bsif_filter_path)
        logger.info("loaded %d BSIF filters of side %d from %s", bank.k, bank.s, descriptor.bsif_filter_path)
        return bank
    sources = [
        entry
        for entry in entries
        if entry.label is PresentationLabel.BONA_FIDE and entry.illumination == ILLUMINATIONS[0]
    ]
    images = [read_entry(entry, root) for entry in sources]
    patches = sample_patches(images, descriptor.bsif_size, descriptor.bsif_patches, seed=config.train.seed)
    bank = learn_bsif_filters(patches, descriptor.bsif_filters, seed=config.train.seed)
    logger.info(
        "learned %d BSIF filters from %d patches of %d images (converged=%s after %d iterations)",
        bank.k,
        len(patches),
        len(images),
        bank.converged,
        bank.iterations,
    )
    return bank


def _summarize(name: str, model: LinearModel) -> ModelSummary:
    meta = model.meta
    assert meta.illumination is not None and meta.score_min is not None and meta.score_max is not None
    return ModelSummary(
        name=name,
        source_kind=meta.source_kind,
        illumination=meta.illumination,
        n_bona_fide=meta.n_bona_fide,
        n_attack=meta.n_attack,
        epochs_run=meta.epochs_run,
        primal_objective=meta.primal_objective,
        dual_objective=meta.dual_objective,
        score_min=meta.score_min,
        score_max=meta.score_max,
    )


class PadPipeline:
    """Runs training and evaluation for one pipeline configuration."""

    def __init__(self, config: PipelineConfig, workers: int = 1, cache_dir: Optional[PathLike] = None):
        self.config = config
        self.workers = workers
        self.cache_dir = None if cache_dir is None else Path(cache_dir)

    def _features(
        self, entries: Sequence[ManifestEntry], root: PathLike, bank: Optional[FilterBank]
    ) -> Dict[str, EntryFeatures]:
        described = describe_entries(entries, root, self.config, bank, self.workers, self.cache_dir)
        return {entry.image_id: features for entry, features in zip(entries, described)}

    def train(self, manifest: Manifest, root: PathLike, bundle_dir: PathLike) -> TrainReport:
        """Train every classifier of the configured mode and write a model bundle.

        The bundle is assembled in a sibling staging directory and moved into
        place only when complete, so a failed run leaves nothing behind.
        """
        target = Path(bundle_dir)
        staging = target.with_name(f".{target.name}.partial")
        if staging.exists():
            shutil.rmtree(staging)
        try:
            report = self._train_into(ModelBundle(staging), manifest, Path(root))
            if target.exists():
                shutil.rmtree(target)
            staging.rename(target)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        logger.info("model bundle written to %s", target)
        return report

    def _train_into(self, bundle: ModelBundle, manifest: Manifest, root: Path) -> TrainReport:
        config = self.config
        bundle.create()
        train_set, test_set = subject_disjoint_split(manifest, config.split)
        save_manifest(train_set, bundle.path(SPLIT_TRAIN_FILE))
        save_manifest(test_set, bundle.path(SPLIT_TEST_FILE))

        bank = resolve_filter_bank(config, train_set.entries, root)
        if bank is not None:
            bundle.save_filter_bank(bank)

        features = self._features(train_set.entries, root, bank)
        summaries = []
        for illumination, group in group_by_illumination(train_set.entries).items():
            labels = [entry.label for entry in group]
            for source in sources_for(config):
                name = model_name(source, illumination)
                vectors = [features[entry.image_id][source] for entry in group]
                model = train(vectors, labels, config.train, illumination=illumination)
                model = self._with_score_range(name, model, vectors)
                bundle.save_model(name, model)
                summaries.append(_summarize(name, model))
                logger.info(
                    "%s: %d bona fide + %d attack, primal objective %.6f",
                    name,
                    model.meta.n_bona_fide,
                    model.meta.n_attack,
                    model.meta.primal_objective,
                )

        bundle.save_config(config)
        report = TrainReport(
            mode=config.mode,
            descriptor_kind=config.descriptor.kind,
            train_subjects=len(train_set.subjects),
            test_subjects=len(test_set.subjects),
            bsif_filters_learned=None if bank is None else config.descriptor.bsif_filter_path is None,
            models=summaries,
        )
        bundle.save_report(report)
        return report

    @staticmethod
    def _with_score_range(name: str, model: LinearModel, vectors: Sequence[FeatureVector]) -> LinearModel:
        low, high = score_range(score_all(model, vectors))
        if not high > low:
            raise NormalizationError(f"{name}: all training scores equal {low}, cannot normalise for fusion")
        return model.with_meta(model.meta.model_copy(update={"score_min": low, "score_max": high}))

    def evaluate(self, bundle: ModelBundle, manifest: Manifest, root: PathLike, out_dir: PathLike) -> EvalReport:
        """Score the test partition with every bundled classifier, fuse, and report.

        Score files left in ``out_dir`` by an earlier run are removed first.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config = self.config
        _, test_set = subject_disjoint_split(manifest, config.split)
        bank = bundle.get_filter_bank() if config.descriptor.kind is DescriptorKind.BSIF else None
        if config.descriptor.kind is DescriptorKind.BSIF and bank is None:
            raise ModelFormatError(f"{bundle.directory}: BSIF bundle has no filter bank")

        names = bundle.model_names()
        if not names:
            raise ModelFormatError(f"{bundle.directory}: no classifiers found")
        features = self._features(test_set.entries, root, bank)
        groups = group_by_illumination(test_set.entries)
        for stale in out.glob(f"{SCORE_PREFIX}*.csv"):
            stale.unlink()

        written: List[Path] = []
        per_model: Dict[str, ScoreSet] = {}
        models: Dict[str, LinearModel] = {}
        for name in names:
            model = bundle.get_model(name)
            source, illumination = parse_model_name(name)
            group = groups.get(illumination, [])
            scores = ScoreSet.from_lists(
                score_all(model, [features[entry.image_id][source] for entry in group]),
                [entry.label for entry in group],
                [entry.sample_id for entry in group],
            )
            written.append(out / f"{SCORE_PREFIX}{name}.csv")
            write_scores(scores, written[-1])
            per_model[name] = scores
            models[name] = model

        for fusion, members in fusion_groups(names).items():
            fused = fuse_score_sets([per_model[name] for name in members], [models[name] for name in members])
            written.append(out / f"{SCORE_PREFIX}{FUSED_PREFIX}{fusion}.csv")
            write_scores(fused, written[-1])

        report = report_from_score_files(written, config)
        write_report(report, out)
        return report


def fusion_groups(names: Iterable[str]) -> Dict[str, List[str]]:
    """``all`` fuses every classifier; with more than one map, each map is also fused on its own."""
    ordered = sorted(names)
    groups: Dict[str, List[str]] = {"all": ordered}
    by_source: Dict[str, List[str]] = {}
    for name in ordered:
        source, _ = parse_model_name(name)
        by_source.setdefault(source.value, []).append(name)
    if len(by_source) > 1:
        groups.update(sorted(by_source.items()))
    return groups


def fuse_score_sets(score_sets: Sequence[ScoreSet], models: Sequence[LinearModel]) -> ScoreSet:
    """Min-max normalise each set with its classifier's training scores, then average per sample."""
    reference = score_sets[0]
    order = [entry.sample_id for entry in reference.entries]
    normalized = []
    for scores, model in zip(score_sets, models):
        if model.meta.score_min is None or model.meta.score_max is None:
            raise ModelFormatError("model has no training score statistics for normalisation")
        by_sample = {entry.sample_id: entry.score for entry in scores.entries}
        if len(by_sample) != len(scores.entries) or set(by_sample) != set(order):
            raise DimensionError("score sets to fuse do not cover the same samples")
        normalized.append(
            minmax_normalize([by_sample[sample] for sample in order], (model.meta.score_min, model.meta.score_max))
        )
    fused = sum_rule_fuse(normalized)
    return ScoreSet.from_lists(fused, [entry.label for entry in reference.entries], order)


def metric_row(name: str, scores: ScoreSet) -> MetricRow:
    eer, threshold = d_eer(scores)
    five, ten = (bpcer_at_apcer(scores, target) for target in APCER_TARGETS)
    return MetricRow(
        name=name,
        n_bona_fide=len(scores.bona_fide),
        n_attack=len(scores.attacks),
        d_eer=eer,
        eer_threshold=threshold,
        bpcer_at_apcer_5=five,
        bpcer_at_apcer_10=ten,
    )


def report_from_score_files(score_paths: Sequence[PathLike], config: PipelineConfig) -> EvalReport:
    """Recompute every metric from the given score files, named ``scores_<classifier>.csv``."""
    per_illumination: Dict[int, List[MetricRow]] = {}
    fused: List[MetricRow] = []
    for path in sorted(Path(p) for p in score_paths):
        name = path.stem[len(SCORE_PREFIX) :]
        row = metric_row(name, read_scores(path))
        if name.startswith(FUSED_PREFIX):
            fused.append(row.model_copy(update={"name": name[len(FUSED_PREFIX) :]}))
        else:
            _, illumination = parse_model_name(name)
            per_illumination.setdefault(illumination, []).append(row)
    if not per_illumination:
        raise UsageError("no per-illumination score files to report on")
    return EvalReport(
        mode=config.mode,
        descriptor_kind=config.descriptor.kind,
        per_illumination=dict(sorted(per_illumination.items())),
        fused=fused,
    )


def _percent(value: float) -> str:
    return f"{100.0 * value:.2f}"


def format_report(report: EvalReport) -> str:
    descriptor = report.descriptor_kind.value.upper()
    lines = [f"Descriptor {descriptor}, mode {report.mode.value}; error rates in %", ""]
    illuminations = list(report.per_illumination)
    sources = sorted({row.name.rpartition("_i")[0] for rows in report.per_illumination.values() for row in rows})

    header = f"{'classifier':<12}" + "".join(f"| I{i} D-EER  BPCER@5  BPCER@10 " for i in illuminations)
    lines += ["Per illumination", header, "-" * len(header)]
    for source in sources:
        cells = []
        for illumination in illuminations:
            match = [row for row in report.per_illumination[illumination] if row.name == f"{source}_i{illumination}"]
            if match:
                row = match[0]
                cells.append(
                    f"| {_percent(row.d_eer):>8} {_percent(row.bpcer_at_apcer_5):>8} {_percent(row.bpcer_at_apcer_10):>9} "
                )
            else:
                cells.append(f"| {'-':>8} {'-':>8} {'-':>9} ")
        lines.append(f"{descriptor + ' ' + source:<12}" + "".join(cells))

    fused_header = f"{'fusion':<12}| {'D-EER':>8} {'BPCER@5':>8} {'BPCER@10':>9}"
    lines += ["", "Sum-rule fusion", fused_header, "-" * len(fused_header)]
    for row in report.fused:
        lines.append(
            f"{row.name:<12}| {_percent(row.d_eer):>8} {_percent(row.bpcer_at_apcer_5):>8} "
            f"{_percent(row.bpcer_at_apcer_10):>9}"
        )
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir: PathLike) -> None:
    out = Path(out_dir)
    (out / REPORT_TEXT_FILE).write_text(format_report(report), encoding="utf-8")
    (out / REPORT_JSON_FILE).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


def export_det(score_paths: Sequence[PathLike], out_dir: PathLike) -> Dict[str, DetCurve]:
    """DET table per score file plus one combined plot."""
    out = Path(out_dir)
    curves: Dict[str, DetCurve] = {}
    for score_path in score_paths:
        path = Path(score_path)
        curve = det_curve(read_scores(path))
        write_det(curve, out / f"det_{path.stem}.csv")
        curves[path.stem] = curve
    plot_det_curves(curves, out / "det.svg")
    logger.info("wrote %d DET tables and det.svg to %s", len(curves), out)
    return curves


def decompose_to_dumps(image_paths: Mapping[str, PathLike], config: PipelineConfig, out_dir: PathLike) -> None:
    """Decompose each image and write its maps and lighting coefficients."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for image_id, path in image_paths.items():
        result = decompose(read_image(path), config.solver)
        write_normal_map(result.normal_map, out / f"{image_id}_normal.pfm")
        write_scalar_map(result.albedo, out / f"{image_id}_albedo.pgm")
        write_scalar_map(result.shading, out / f"{image_id}_shading.pgm")
        write_scalar_map(result.diffuse, out / f"{image_id}_diffuse.pgm")
        lighting = " ".join(repr(float(v)) for v in result.lighting.l)
        (out / f"{image_id}_lighting.txt").write_text(lighting + "\n", encoding="utf-8")
        logger.info(
            "%s: %d iterations, residual rmse %.4f", image_id, result.iterations, result.residual_rmse
        )


def format_feature_table(entries: Sequence[ManifestEntry], features: Sequence[EntryFeatures]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    width = max((vector.dimension for row in features for vector in row.values()), default=0)
    writer.writerow(["sample_id", "label", "illumination", "source"] + [f"f{i}" for i in range(width)])
    for entry, row in zip(entries, features):
        for source, vector in row.items():
            writer.writerow(
                [entry.sample_id, entry.label.value, entry.illumination, source.value]
                + [repr(float(v)) for v in vector.bins]
            )
    return buffer.getvalue()


def extract_feature_table(
    manifest: Manifest,
    root: PathLike,
    config: PipelineConfig,
    out_path: PathLike,
    workers: int = 1,
    cache_dir: Optional[PathLike] = None,
) -> int:
    """Describe every manifest entry and write one CSV row per entry and map; returns the row count."""
    bank = resolve_filter_bank(config, manifest.entries, root)
    features = describe_entries(manifest.entries, root, config, bank, workers, cache_dir)
    target = Path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_feature_table(manifest.entries, features), encoding="utf-8")
    rows = sum(len(row) for row in features)
    logger.info("wrote %d feature rows to %s", rows, target)
    return rows

