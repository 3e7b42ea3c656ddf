"""Manifest tables: ``subject_id,session,illumination,label,path``."""

import csv
import io
import logging
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from src.core.errors import ManifestParseError
from src.models.dataset_models import Manifest, ManifestEntry

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("subject_id", "session", "illumination", "label", "path")


def parse_manifest(text: str, source: str = "<manifest>") -> Manifest:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ManifestParseError(f"{source}: empty manifest")
    header = tuple(cell.strip() for cell in rows[0])
    if header != MANIFEST_COLUMNS:
        raise ManifestParseError(f"{source}: expected header {','.join(MANIFEST_COLUMNS)}, got {','.join(header)}")
    if len(rows) == 1:
        raise ManifestParseError(f"{source}: manifest has no entries")
    entries = []
    for line_number, row in enumerate(rows[1:], start=2):
        if len(row) != len(MANIFEST_COLUMNS):
            raise ManifestParseError(f"{source}:{line_number}: expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}")
        try:
            entries.append(ManifestEntry(**dict(zip(MANIFEST_COLUMNS, (cell.strip() for cell in row)))))
        except ValidationError as exc:
            raise ManifestParseError(f"{source}:{line_number}: {exc.errors()[0]['msg']}") from exc
    return Manifest(tuple(entries))


def load_manifest(path: Union[str, Path]) -> Manifest:
    """Parse and validate a manifest file, logging its counts."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestParseError(f"cannot read manifest {path}: {exc}") from exc
    manifest = parse_manifest(text, str(path))
    counts = manifest.counts()
    logger.info(
        "manifest %s: %d entries, %d subjects, %d bona fide, %d attack",
        path,
        counts["entries"],
        counts["subjects"],
        counts["bonafide"],
        counts["attack"],
    )
    return manifest


def format_manifest(manifest: Manifest) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for entry in manifest.entries:
        writer.writerow([entry.subject_id, entry.session, entry.illumination, entry.label.value, entry.path])
    return buffer.getvalue()


def save_manifest(manifest: Manifest, path: Union[str, Path]) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_manifest(manifest), encoding="utf-8")
