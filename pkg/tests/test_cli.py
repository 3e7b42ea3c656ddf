import json

import pytest

from src.main import main
from src.services.pipeline_service import format_report, report_from_score_files
from src.storage.bundle_manager import ModelBundle
from src.storage.score_store import read_scores

SYNTH_ARGS = ["--subjects", "10", "--width", "64", "--height", "48", "--seed", "7", "-q"]
SPLIT_ARGS = ["--train-subjects", "6", "--test-subjects", "4", "--seed", "3", "-q"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    assert main(["synth", "--out", str(out)] + SYNTH_ARGS) == 0
    return out


@pytest.fixture(scope="module")
def proposed_run(dataset, tmp_path_factory):
    work = tmp_path_factory.mktemp("proposed")
    manifest = str(dataset / "manifest.csv")
    assert main(["train", "--manifest", manifest, "--out", str(work / "bundle")] + SPLIT_ARGS) == 0
    assert main(["eval", "--manifest", manifest, "--bundle", str(work / "bundle"), "--out", str(work / "eval"), "-q"]) == 0
    return work


def test_synth_is_reproducible(dataset, tmp_path):
    assert main(["synth", "--out", str(tmp_path)] + SYNTH_ARGS) == 0
    for path in sorted(dataset.rglob("*.pgm")):
        assert (tmp_path / path.relative_to(dataset)).read_bytes() == path.read_bytes()
    assert (tmp_path / "manifest.csv").read_text() == (dataset / "manifest.csv").read_text()


def test_missing_required_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["synth", "--subjects", "2"])
    assert excinfo.value.code == 2


def test_invalid_worker_count(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--workers", "0", "-q"]) == 2


def test_invalid_configuration_value(dataset, tmp_path):
    manifest = str(dataset / "manifest.csv")
    assert main(["train", "--manifest", manifest, "--out", str(tmp_path / "b"), "--svm-c", "-1", "-q"]) == 2


def test_train_writes_six_classifiers(proposed_run):
    bundle = ModelBundle(proposed_run / "bundle")
    assert bundle.model_names() == [f"{source}_i{i}" for source in ("diffuse", "normal") for i in (1, 2, 3)]
    report = json.loads(bundle.path("train_report.json").read_text())
    assert report["train_subjects"] == 6 and report["test_subjects"] == 4
    assert all(model["n_bona_fide"] == 12 and model["n_attack"] == 12 for model in report["models"])
    assert bundle.path("split_train.csv").exists() and bundle.path("config.txt").exists()
    assert not list(proposed_run.glob(".*.partial"))


def test_eval_report_is_recomputable(proposed_run):
    out = proposed_run / "eval"
    names = sorted(path.stem for path in out.glob("scores_*.csv"))
    assert names == [
        "scores_diffuse_i1",
        "scores_diffuse_i2",
        "scores_diffuse_i3",
        "scores_fused_all",
        "scores_fused_diffuse",
        "scores_fused_normal",
        "scores_normal_i1",
        "scores_normal_i2",
        "scores_normal_i3",
    ]
    config = ModelBundle(proposed_run / "bundle").load_config()
    report = report_from_score_files(sorted(out.glob("scores_*.csv")), config)
    assert (out / "report.txt").read_text() == format_report(report)
    assert [row.name for row in report.fused] == ["all", "diffuse", "normal"]
    assert all(row.n_bona_fide == 8 and row.n_attack == 8 for row in report.fused)


def test_fused_scores_are_normalised(proposed_run):
    fused = read_scores(proposed_run / "eval" / "scores_fused_all.csv")
    assert all(0.0 <= entry.score <= 1.0 for entry in fused.entries)
    assert len({entry.sample_id for entry in fused.entries}) == 16


def test_fused_classifier_detects_prints(proposed_run):
    report = json.loads((proposed_run / "eval" / "report.json").read_text())
    fused_all = next(row for row in report["fused"] if row["name"] == "all")
    assert fused_all["d_eer"] <= 0.25


def test_baseline_trains_three_classifiers(dataset, tmp_path):
    manifest = str(dataset / "manifest.csv")
    args = ["train", "--manifest", manifest, "--out", str(tmp_path / "bundle"), "--mode", "baseline"]
    assert main(args + SPLIT_ARGS) == 0
    assert ModelBundle(tmp_path / "bundle").model_names() == ["raw_i1", "raw_i2", "raw_i3"]
    assert main(["eval", "--manifest", manifest, "--bundle", str(tmp_path / "bundle"), "--out", str(tmp_path / "eval"), "-q"]) == 0
    assert sorted(path.name for path in (tmp_path / "eval").glob("scores_fused_*.csv")) == ["scores_fused_all.csv"]


def test_second_eval_into_same_directory_reports_only_its_own_scores(dataset, proposed_run, tmp_path):
    manifest = str(dataset / "manifest.csv")
    out = tmp_path / "eval"
    proposed_eval = ["eval", "--manifest", manifest, "--bundle", str(proposed_run / "bundle"), "--out", str(out), "-q"]
    assert main(proposed_eval) == 0
    baseline_train = ["train", "--manifest", manifest, "--out", str(tmp_path / "baseline"), "--mode", "baseline"]
    assert main(baseline_train + SPLIT_ARGS) == 0
    assert main(["eval", "--manifest", manifest, "--bundle", str(tmp_path / "baseline"), "--out", str(out), "-q"]) == 0

    report = json.loads((out / "report.json").read_text())
    assert report["mode"] == "baseline"
    assert [row["name"] for row in report["fused"]] == ["all"]
    names = {row["name"] for rows in report["per_illumination"].values() for row in rows}
    assert names == {"raw_i1", "raw_i2", "raw_i3"}
    assert sorted(path.name for path in out.glob("scores_*.csv")) == [
        "scores_fused_all.csv",
        "scores_raw_i1.csv",
        "scores_raw_i2.csv",
        "scores_raw_i3.csv",
    ]


def test_cached_decomposition_reproduces_the_bundle(dataset, proposed_run, tmp_path):
    manifest = str(dataset / "manifest.csv")
    cache = tmp_path / "cache"
    for run in ("cold", "warm"):
        args = ["train", "--manifest", manifest, "--out", str(tmp_path / run), "--cache-dir", str(cache)]
        assert main(args + SPLIT_ARGS) == 0
    assert len(list(cache.rglob("*.npz"))) == 6 * 2 * 3 * 2
    for path in sorted((proposed_run / "bundle").glob("*.txt")):
        assert (tmp_path / "cold" / path.name).read_bytes() == path.read_bytes()
        assert (tmp_path / "warm" / path.name).read_bytes() == path.read_bytes()


def test_det_command(proposed_run, tmp_path):
    scores = [str(proposed_run / "eval" / name) for name in ("scores_fused_all.csv", "scores_normal_i1.csv")]
    assert main(["det"] + scores + ["--out", str(tmp_path), "-q"]) == 0
    assert (tmp_path / "det_scores_fused_all.csv").read_text().startswith("threshold,apcer,bpcer\n")
    assert (tmp_path / "det_scores_normal_i1.csv").exists()
    assert (tmp_path / "det.svg").exists()


def test_decompose_command_dumps_maps(dataset, tmp_path):
    image = dataset / "S001" / "bonafide_s1_i1.pgm"
    assert main(["decompose", str(image), "--out", str(tmp_path), "-q"]) == 0
    suffixes = ["_normal.pfm", "_albedo.pgm", "_shading.pgm", "_diffuse.pgm", "_lighting.txt"]
    for suffix in suffixes:
        assert (tmp_path / f"bonafide_s1_i1{suffix}").exists()
    assert len((tmp_path / "bonafide_s1_i1_lighting.txt").read_text().split()) == 9


def test_extract_command_writes_one_row_per_entry(dataset, tmp_path):
    out = tmp_path / "features.csv"
    assert main(["extract", "--manifest", str(dataset / "manifest.csv"), "--out", str(out), "--mode", "baseline", "-q"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 120
    assert len(lines[0].split(",")) == 4 + 59


def test_exit_codes_for_data_errors(dataset, tmp_path):
    manifest = str(dataset / "manifest.csv")
    assert main(["eval", "--manifest", manifest, "--bundle", str(tmp_path / "none"), "--out", str(tmp_path), "-q"]) == 3
    too_many = ["--train-subjects", "8", "--test-subjects", "8", "-q"]
    assert main(["train", "--manifest", manifest, "--out", str(tmp_path / "b")] + too_many) == 3
    assert not (tmp_path / "b").exists()
    (tmp_path / "empty.csv").write_text("")
    assert main(["det", str(tmp_path / "empty.csv"), "--out", str(tmp_path), "-q"]) == 3


def test_single_class_scores_are_a_compute_error(tmp_path):
    (tmp_path / "scores.csv").write_text("sample_id,label,score\nS001-s1-attack,attack,0.2\n")
    assert main(["det", str(tmp_path / "scores.csv"), "--out", str(tmp_path), "-q"]) == 4


def test_decompose_rejects_images_sharing_a_name(dataset, tmp_path):
    first = dataset / "S001" / "bonafide_s1_i1.pgm"
    second = dataset / "S002" / "bonafide_s1_i1.pgm"
    assert main(["decompose", str(first), str(second), "--out", str(tmp_path / "maps"), "-q"]) == 2
    assert not (tmp_path / "maps").exists()
