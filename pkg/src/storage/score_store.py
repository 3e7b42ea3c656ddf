"""Score tables, DET tables and DET plots."""

import csv
import io
from pathlib import Path
from typing import Mapping, Union

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "fvpad-det"
import matplotlib.pyplot as plt  # noqa: E402
from pydantic import ValidationError  # noqa: E402

from src.core.errors import ScoreFileError  # noqa: E402
from src.models.score_models import DetCurve, ScoreEntry, ScoreSet  # noqa: E402

PathLike = Union[str, Path]

SCORE_COLUMNS = ("sample_id", "label", "score")
DET_COLUMNS = ("threshold", "apcer", "bpcer")
PLOT_FLOOR = 1e-3


def format_scores(scores: ScoreSet) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SCORE_COLUMNS)
    for entry in scores.entries:
        writer.writerow([entry.sample_id, entry.label.value, repr(entry.score)])
    return buffer.getvalue()


def write_scores(scores: ScoreSet, path: PathLike) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_scores(scores), encoding="utf-8")


def read_scores(path: PathLike) -> ScoreSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScoreFileError(f"cannot read score file {path}: {exc}") from exc
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if not rows or tuple(cell.strip() for cell in rows[0]) != SCORE_COLUMNS:
        raise ScoreFileError(f"{path}: expected header {','.join(SCORE_COLUMNS)}")
    entries = []
    for line_number, row in enumerate(rows[1:], start=2):
        if len(row) != len(SCORE_COLUMNS):
            raise ScoreFileError(f"{path}:{line_number}: expected 3 fields, got {len(row)}")
        sample_id, label, score = (cell.strip() for cell in row)
        try:
            entries.append(ScoreEntry(sample_id=sample_id, label=label, score=float(score)))
        except (ValueError, ValidationError) as exc:
            raise ScoreFileError(f"{path}:{line_number}: {exc}") from exc
    return ScoreSet(entries=tuple(entries))


def format_det(curve: DetCurve) -> str:
    lines = [",".join(DET_COLUMNS)]
    lines.extend(f"{p.threshold:.6f},{p.apcer:.6f},{p.bpcer:.6f}" for p in curve.points)
    return "\n".join(lines) + "\n"


def write_det(curve: DetCurve, path: PathLike) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_det(curve), encoding="utf-8")


def plot_det_curves(curves: Mapping[str, DetCurve], path: PathLike) -> None:
    """Draw BPCER against APCER on log axes; zero rates are drawn at the axis floor."""
    figure, axes = plt.subplots(figsize=(6, 6))
    for name, curve in curves.items():
        apcer = [max(p.apcer, PLOT_FLOOR) for p in curve.points]
        bpcer = [max(p.bpcer, PLOT_FLOOR) for p in curve.points]
        axes.plot(apcer, bpcer, drawstyle="steps-post", label=name)
    axes.set_xscale("log")
    axes.set_yscale("log")
    axes.set_xlim(PLOT_FLOOR, 1.0)
    axes.set_ylim(PLOT_FLOOR, 1.0)
    axes.set_xlabel("APCER")
    axes.set_ylabel("BPCER")
    axes.set_title("Detection error trade-off")
    axes.grid(True, which="both", linestyle=":")
    axes.legend(loc="upper right", fontsize="small")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(target, format="svg", metadata={"Date": None})
    plt.close(figure)
