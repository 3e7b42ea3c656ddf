"""Model bundle directory: classifiers, BSIF filter bank, config snapshot and training report."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from src.config.settings import PipelineConfig
from src.core.errors import ModelFormatError
from src.models.classifier_models import LinearModel, TrainMeta
from src.models.feature_models import FilterBank

logger = logging.getLogger(__name__)

MODEL_SUFFIX = ".linsvm"
FILTER_BANK_FILE = "bsif_filters.txt"
CONFIG_FILE = "config.txt"
REPORT_FILE = "train_report.json"


def _row(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def format_linear_model(model: LinearModel) -> str:
    lines = [
        f"LINSVM {model.dimension}",
        _row(model.feature_min),
        _row(model.feature_max),
        _row(model.weights),
        repr(float(model.bias)),
        f"# meta {model.meta.model_dump_json()}",
    ]
    return "\n".join(lines) + "\n"


def parse_linear_model(text: str, source: str = "<model>") -> LinearModel:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    meta_lines = [line for line in lines if line.startswith("#")]
    body = [line for line in lines if not line.startswith("#")]
    if len(body) != 5:
        raise ModelFormatError(f"{source}: expected header, 3 vector rows and a bias, got {len(body)} lines")
    header = body[0].split()
    if len(header) != 2 or header[0] != "LINSVM":
        raise ModelFormatError(f"{source}: missing 'LINSVM dim' header")
    try:
        dimension = int(header[1])
        minimum, maximum, weights = (np.array([float(v) for v in row.split()]) for row in body[1:4])
        bias = float(body[4])
    except ValueError as exc:
        raise ModelFormatError(f"{source}: malformed number: {exc}") from exc
    if not (minimum.size == maximum.size == weights.size == dimension):
        raise ModelFormatError(f"{source}: vector rows do not have {dimension} entries")
    meta_json = next((line[len("# meta ") :] for line in meta_lines if line.startswith("# meta ")), None)
    if meta_json is None:
        raise ModelFormatError(f"{source}: missing '# meta' line")
    try:
        meta = TrainMeta.model_validate_json(meta_json)
    except ValidationError as exc:
        raise ModelFormatError(f"{source}: malformed meta: {exc}") from exc
    return LinearModel(weights, bias, minimum, maximum, meta)


def format_filter_bank(bank: FilterBank) -> str:
    lines = [f"BSIF {bank.k} {bank.s}"]
    lines.extend(_row(flt.ravel()) for flt in bank.filters)
    return "\n".join(lines) + "\n"


def parse_filter_bank(text: str, source: str = "<filters>") -> FilterBank:
    tokens = text.split()
    if len(tokens) < 3 or tokens[0] != "BSIF":
        raise ModelFormatError(f"{source}: missing 'BSIF k s' header")
    try:
        k, s = int(tokens[1]), int(tokens[2])
        values = np.array([float(v) for v in tokens[3:]])
    except ValueError as exc:
        raise ModelFormatError(f"{source}: malformed number: {exc}") from exc
    if values.size != k * s * s:
        raise ModelFormatError(f"{source}: expected {k * s * s} coefficients, got {values.size}")
    return FilterBank(values.reshape(k, s, s))


def load_filter_bank(path: Union[str, Path]) -> FilterBank:
    try:
        return parse_filter_bank(Path(path).read_text(encoding="utf-8"), str(path))
    except OSError as exc:
        raise ModelFormatError(f"cannot read filter bank {path}: {exc}") from exc


class ModelBundle:
    """Directory holding everything ``eval`` needs from a training run."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def create(self) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)

    def _read(self, name: str) -> str:
        path = self.directory / name
        try:
            return path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ModelFormatError(f"cannot read {path}: {exc}") from exc

    def save_model(self, name: str, model: LinearModel) -> None:
        (self.directory / f"{name}{MODEL_SUFFIX}").write_text(format_linear_model(model), encoding="utf-8")

    def get_model(self, name: str) -> LinearModel:
        filename = f"{name}{MODEL_SUFFIX}"
        return parse_linear_model(self._read(filename), str(self.directory / filename))

    def model_names(self) -> List[str]:
        return sorted(path.name[: -len(MODEL_SUFFIX)] for path in self.directory.glob(f"*{MODEL_SUFFIX}"))

    def save_filter_bank(self, bank: FilterBank) -> None:
        (self.directory / FILTER_BANK_FILE).write_text(format_filter_bank(bank), encoding="utf-8")

    def get_filter_bank(self) -> Optional[FilterBank]:
        path = self.directory / FILTER_BANK_FILE
        if not path.exists():
            return None
        return parse_filter_bank(self._read(FILTER_BANK_FILE), str(path))

    def save_config(self, config: PipelineConfig) -> None:
        lines = [f"{key}={value}" for key, value in config.to_snapshot().items()]
        (self.directory / CONFIG_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def load_config(self) -> PipelineConfig:
        flat: Dict[str, str] = {}
        for line_number, line in enumerate(self._read(CONFIG_FILE).splitlines(), start=1):
            if not line.strip():
                continue
            key, separator, value = line.partition("=")
            if not separator:
                raise ModelFormatError(f"{CONFIG_FILE}:{line_number}: expected key=value")
            flat[key.strip()] = value.strip()
        try:
            return PipelineConfig.from_snapshot(flat)
        except ValidationError as exc:
            raise ModelFormatError(f"{CONFIG_FILE}: invalid configuration: {exc}") from exc

    def save_report(self, report: BaseModel) -> None:
        (self.directory / REPORT_FILE).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def path(self, name: str) -> Path:
        return self.directory / name
