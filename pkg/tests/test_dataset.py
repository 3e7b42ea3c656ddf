import numpy as np
import pytest

from src.config.settings import SplitConfig
from src.core.decomposition import decompose
from src.core.errors import InsufficientSubjectsError, ManifestInvariantError, ManifestParseError
from src.models.dataset_models import ILLUMINATIONS, SESSIONS, Manifest, ManifestEntry
from src.models.image_models import NormalMap, PresentationLabel
from src.services.dataset_service import group_by_illumination, read_entry, subject_disjoint_split
from src.services.synth_service import MANIFEST_NAME, synth_generate
from src.storage.manifest_store import format_manifest, load_manifest, parse_manifest


def full_manifest(n_subjects=78):
    entries = [
        ManifestEntry(
            subject_id=f"S{s:03d}",
            session=session,
            illumination=illumination,
            label=label,
            path=f"S{s:03d}/{label.value}_s{session}_i{illumination}.pgm",
        )
        for s in range(1, n_subjects + 1)
        for session in SESSIONS
        for illumination in ILLUMINATIONS
        for label in PresentationLabel
    ]
    return Manifest(tuple(entries))


def test_full_manifest_counts():
    manifest = parse_manifest(format_manifest(full_manifest()))
    assert manifest.counts() == {"entries": 936, "subjects": 78, "bonafide": 468, "attack": 468}


def test_empty_manifest_file(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text("")
    with pytest.raises(ManifestParseError):
        load_manifest(path)


def test_manifest_with_bad_header():
    with pytest.raises(ManifestParseError):
        parse_manifest("subject,session\nS001,1\n")


def test_manifest_row_with_bad_session():
    text = format_manifest(full_manifest(1)).replace("S001,1,1,attack", "S001,3,1,attack", 1)
    with pytest.raises(ManifestParseError, match=":2:"):
        parse_manifest(text)


def test_duplicate_key_names_the_key():
    text = format_manifest(full_manifest(1))
    duplicate = text.splitlines()[1]
    with pytest.raises(ManifestInvariantError, match="subject=S001, session=1, illumination=1"):
        parse_manifest(text + duplicate + "\n")


def test_incomplete_subject_grid():
    entries = full_manifest(2).entries[:-1]
    with pytest.raises(ManifestInvariantError, match="S002"):
        Manifest(entries)


def test_subject_disjoint_split_sizes():
    train, test = subject_disjoint_split(full_manifest(), SplitConfig())
    assert len(train) == 432 and len(test) == 504
    assert not set(train.subjects) & set(test.subjects)
    for illumination in ILLUMINATIONS:
        for label in PresentationLabel:
            assert sum(1 for e in train.for_illumination(illumination) if e.label is label) == 72
            assert sum(1 for e in test.for_illumination(illumination) if e.label is label) == 84


def test_split_is_seeded():
    manifest = full_manifest()
    first, _ = subject_disjoint_split(manifest, SplitConfig(seed=5))
    again, _ = subject_disjoint_split(manifest, SplitConfig(seed=5))
    other, _ = subject_disjoint_split(manifest, SplitConfig(seed=6))
    assert first.subjects == again.subjects
    assert first.subjects != other.subjects


def test_split_needs_enough_subjects():
    with pytest.raises(InsufficientSubjectsError):
        subject_disjoint_split(full_manifest(10), SplitConfig(n_train_subjects=6, n_test_subjects=5))


def test_group_by_illumination_keeps_order():
    manifest = full_manifest(2)
    groups = group_by_illumination(manifest.entries)
    assert list(groups) == [1, 2, 3]
    assert groups[2] == manifest.for_illumination(2)


def test_sample_ids_are_shared_across_illuminations():
    groups = group_by_illumination(full_manifest(3).entries)
    assert [e.sample_id for e in groups[1]] == [e.sample_id for e in groups[3]]
    assert groups[1][0].image_id.endswith("-i1")


def test_synth_layout(tmp_path, small_synth):
    manifest = synth_generate(small_synth, tmp_path)
    assert manifest.counts() == {"entries": 120, "subjects": 10, "bonafide": 60, "attack": 60}
    assert len(list(tmp_path.rglob("*.pgm"))) == 120
    assert load_manifest(tmp_path / MANIFEST_NAME).entries == manifest.entries
    image = read_entry(manifest.entries[0], tmp_path)
    assert image.shape == (small_synth.height, small_synth.width)


def test_synth_is_byte_deterministic(tmp_path, small_synth):
    synth_generate(small_synth, tmp_path / "a")
    synth_generate(small_synth, tmp_path / "b", workers=3)
    first = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    second = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert first == second
    for relative in first:
        assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()


def test_artefacts_decompose_flatter(tmp_path, small_synth):
    manifest = synth_generate(small_synth, tmp_path)
    flat = NormalMap.flat(small_synth.height, small_synth.width)
    flatter = 0
    for subject in manifest.subjects:
        deviation = {}
        for entry in manifest.entries:
            if entry.subject_id == subject and entry.session == 1 and entry.illumination == 1:
                normals = decompose(read_entry(entry, tmp_path)).normal_map
                deviation[entry.label] = float(np.mean(normals.angular_deviation(flat)))
        flatter += deviation[PresentationLabel.ATTACK] < deviation[PresentationLabel.BONA_FIDE]
    assert flatter >= 9
