import numpy as np
import pytest

from src.config.settings import DescriptorConfig, PipelineConfig, PipelineMode, SolverConfig, SplitConfig
from src.core.errors import ImageFormatError, ModelFormatError, ScoreFileError
from src.core.fusion_metrics import det_curve
from src.models.classifier_models import LinearModel, TrainMeta
from src.models.feature_models import DescriptorKind, FilterBank, SourceKind
from src.models.image_models import GrayImage, NormalMap, PresentationLabel, ScalarMap, from_bytes
from src.models.score_models import ScoreSet
from src.storage.bundle_manager import ModelBundle, format_linear_model, parse_filter_bank, parse_linear_model
from src.storage.decomposition_cache import DecompositionCache
from src.storage.image_store import read_image, write_image, write_normal_map, write_pfm
from src.storage.score_store import format_det, plot_det_curves, read_scores, write_scores


def test_pgm_round_trip_at_capture_size(tmp_path, rng):
    image = from_bytes(rng.integers(0, 256, 744 * 480, dtype=np.uint8).tobytes(), 744, 480)
    write_image(image, tmp_path / "capture.pgm")
    loaded = read_image(tmp_path / "capture.pgm")
    assert loaded.shape == (480, 744)
    np.testing.assert_array_equal(loaded.pixels, image.pixels)


def test_pgm_header_comments_are_skipped(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# scanner 3\n2 1\n255\n\x00\xff")
    np.testing.assert_array_equal(read_image(tmp_path / "c.pgm").pixels, [[0.0, 1.0]])


@pytest.mark.parametrize(
    "payload",
    [b"P5\n4 4\n255\n" + bytes(10), b"P2\n1 1\n255\n0", b"P5\n1 1\n65535\n\x00\x00", b"P5\n4"],
)
def test_malformed_pgm(tmp_path, payload):
    (tmp_path / "bad.pgm").write_bytes(payload)
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "bad.pgm")


def test_missing_image(tmp_path):
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "absent.pgm")


def read_pfm(path):
    header, width_height, scale, payload = path.read_bytes().split(b"\n", 3)
    width, height = (int(token) for token in width_height.split())
    assert float(scale) < 0
    shape = (height, width, 3) if header == b"PF" else (height, width)
    return np.flipud(np.frombuffer(payload, dtype="<f4").reshape(shape)).astype(np.float64)


def test_pfm_keeps_row_order(tmp_path):
    values = np.arange(12, dtype=np.float64).reshape(3, 4) / 8.0
    write_pfm(values, tmp_path / "map.pfm")
    np.testing.assert_array_equal(read_pfm(tmp_path / "map.pfm"), values)


def test_normal_map_pfm(tmp_path):
    normals = NormalMap.flat(5, 7)
    write_normal_map(normals, tmp_path / "n.pfm")
    np.testing.assert_array_equal(read_pfm(tmp_path / "n.pfm"), normals.normals)


def test_written_pgm_quantises_to_byte_steps(tmp_path):
    write_image(GrayImage(np.array([[0.5, 0.999]])), tmp_path / "q.pgm")
    assert (tmp_path / "q.pgm").read_bytes().endswith(bytes([128, 255]))


def sample_model(rng, dimension=59):
    meta = TrainMeta(
        descriptor_kind=DescriptorKind.LBP,
        source_kind=SourceKind.DIFFUSE_MAP,
        illumination=2,
        n_bona_fide=72,
        n_attack=72,
        score_min=-1.25,
        score_max=2.5,
    )
    low = rng.random(dimension) * 0.1
    return LinearModel(rng.normal(size=dimension), float(rng.normal()), low, low + rng.random(dimension), meta)


def test_linear_model_round_trip(rng):
    model = sample_model(rng)
    loaded = parse_linear_model(format_linear_model(model))
    np.testing.assert_allclose(loaded.weights, model.weights, rtol=0, atol=1e-12)
    np.testing.assert_allclose(loaded.feature_min, model.feature_min, rtol=0, atol=1e-12)
    np.testing.assert_allclose(loaded.feature_max, model.feature_max, rtol=0, atol=1e-12)
    assert loaded.bias == pytest.approx(model.bias, abs=1e-12)
    assert loaded.meta == model.meta


@pytest.mark.parametrize(
    "text",
    ["", "LINSVM 2\n0 0\n1 1\n0.5 0.5\n", "LINSVM 3\n0 0\n1 1\n0.5 0.5\n0.1\n# meta {}\n", "MODEL 2\n0 0\n1 1\n1 1\n0\n"],
)
def test_malformed_linear_model(text):
    with pytest.raises(ModelFormatError):
        parse_linear_model(text)


def test_filter_bank_round_trip(tmp_path, rng):
    filters = rng.normal(size=(4, 5, 5))
    bank = FilterBank(filters - filters.mean(axis=(1, 2), keepdims=True))
    bundle = ModelBundle(tmp_path / "bundle")
    bundle.create()
    assert bundle.get_filter_bank() is None
    bundle.save_filter_bank(bank)
    loaded = bundle.get_filter_bank()
    assert loaded is not None
    np.testing.assert_allclose(loaded.filters, bank.filters, rtol=0, atol=1e-12)


def test_filter_bank_coefficient_count():
    with pytest.raises(ModelFormatError):
        parse_filter_bank("BSIF 2 3\n0 0 0\n")


def test_bundle_models_and_config(tmp_path, rng):
    bundle = ModelBundle(tmp_path)
    bundle.create()
    bundle.save_model("diffuse_i2", sample_model(rng))
    bundle.save_model("normal_i1", sample_model(rng, dimension=177))
    assert bundle.model_names() == ["diffuse_i2", "normal_i1"]
    assert bundle.get_model("normal_i1").dimension == 177

    config = PipelineConfig(
        mode=PipelineMode.BASELINE,
        descriptor=DescriptorConfig(kind=DescriptorKind.BSIF, bsif_filters=6),
        split=SplitConfig(n_train_subjects=4, n_test_subjects=3, seed=11),
    )
    bundle.save_config(config)
    assert bundle.load_config() == config


def test_config_snapshot_keeps_commas_in_paths(tmp_path):
    config = PipelineConfig(
        descriptor=DescriptorConfig(kind=DescriptorKind.BSIF, bsif_filter_path=tmp_path / "run 3, rerun" / "bank.txt")
    )
    snapshot = config.to_snapshot()
    assert snapshot["synth.vein_count"] == "3,6"
    assert PipelineConfig.from_snapshot(snapshot) == config

    bundle = ModelBundle(tmp_path / "bundle")
    bundle.create()
    bundle.save_config(config)
    assert bundle.load_config().descriptor.bsif_filter_path == tmp_path / "run 3, rerun" / "bank.txt"


def test_config_snapshot_empty_optional_is_none():
    snapshot = PipelineConfig().to_snapshot()
    assert snapshot["descriptor.bsif_filter_path"] == ""
    assert PipelineConfig.from_snapshot(snapshot).descriptor.bsif_filter_path is None


def decomposed_pair(rng, shape=(6, 9)):
    raw = rng.normal(size=shape + (3,))
    raw[..., 2] = np.abs(raw[..., 2]) + 0.1
    normals = NormalMap(raw / np.linalg.norm(raw, axis=2, keepdims=True))
    return normals, ScalarMap(rng.random(shape))


def test_decomposition_cache_round_trip_is_exact(tmp_path, rng):
    image = GrayImage(rng.random((6, 9)))
    cache = DecompositionCache(tmp_path, SolverConfig())
    assert cache.get(image) is None
    normals, diffuse = decomposed_pair(rng)
    cache.put(image, (normals, diffuse))
    cached = cache.get(image)
    assert cached is not None
    np.testing.assert_array_equal(cached[0].normals, normals.normals)
    np.testing.assert_array_equal(cached[1].values, diffuse.values)
    assert [path.name for path in cache.directory.iterdir()] == [cache.path_for(image).name]


def test_decomposition_cache_keys_on_solver_and_pixels(tmp_path, rng):
    image = GrayImage(rng.random((6, 9)))
    DecompositionCache(tmp_path, SolverConfig()).put(image, decomposed_pair(rng))
    assert DecompositionCache(tmp_path, SolverConfig(smoothness_weight=0.2)).get(image) is None
    nudged = GrayImage(np.clip(image.pixels + np.eye(6, 9) * 1e-3, 0.0, 1.0))
    assert DecompositionCache(tmp_path, SolverConfig()).get(nudged) is None
    assert DecompositionCache(tmp_path, SolverConfig()).get(image) is not None


@pytest.mark.parametrize("payload", [b"", b"not a zip archive"])
def test_unreadable_cache_entry_is_a_miss(tmp_path, rng, payload):
    image = GrayImage(rng.random((6, 9)))
    cache = DecompositionCache(tmp_path, SolverConfig())
    cache.directory.mkdir(parents=True)
    cache.path_for(image).write_bytes(payload)
    assert cache.get(image) is None


def test_cache_entry_of_another_shape_is_a_miss(tmp_path, rng):
    image = GrayImage(rng.random((6, 9)))
    cache = DecompositionCache(tmp_path, SolverConfig())
    cache.directory.mkdir(parents=True)
    normals, diffuse = decomposed_pair(rng, shape=(4, 4))
    np.savez(cache.path_for(image), normals=normals.normals, diffuse=diffuse.values)
    assert cache.get(image) is None


def test_bundle_missing_model(tmp_path):
    with pytest.raises(ModelFormatError):
        ModelBundle(tmp_path).get_model("raw_i1")


def sample_scores():
    return ScoreSet.from_lists(
        [0.25, -1.0, 0.1 + 0.2],
        [PresentationLabel.BONA_FIDE, PresentationLabel.ATTACK, PresentationLabel.ATTACK],
        ["S001-s1-bonafide", "S001-s1-attack", "S002-s1-attack"],
    )


def test_score_file_round_trip_is_exact(tmp_path):
    scores = sample_scores()
    write_scores(scores, tmp_path / "scores.csv")
    assert read_scores(tmp_path / "scores.csv") == scores


@pytest.mark.parametrize(
    "text",
    [
        "",
        "id,label,score\nS001,bonafide,0.5\n",
        "sample_id,label,score\nS001,genuine,0.5\n",
        "sample_id,label,score\nS001,bonafide,nan\n",
        "sample_id,label,score\nS001,bonafide\n",
    ],
)
def test_malformed_score_file(tmp_path, text):
    (tmp_path / "scores.csv").write_text(text)
    with pytest.raises(ScoreFileError):
        read_scores(tmp_path / "scores.csv")


def test_det_table_format():
    table = format_det(det_curve(sample_scores()))
    lines = table.splitlines()
    assert lines[0] == "threshold,apcer,bpcer"
    assert lines[1] == "-1.000000,1.000000,0.000000"
    assert lines[-1].endswith(",0.000000,1.000000")


def test_det_plot_is_reproducible(tmp_path):
    curves = {"fused": det_curve(sample_scores())}
    plot_det_curves(curves, tmp_path / "a.svg")
    plot_det_curves(curves, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert b"<svg" in (tmp_path / "a.svg").read_bytes()
