"""Dataset manifest models."""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.errors import ManifestInvariantError
from src.models.image_models import PresentationLabel

SESSIONS = (1, 2)
ILLUMINATIONS = (1, 2, 3)

EntryKey = Tuple[str, int, int, PresentationLabel]


class ManifestEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    subject_id: str = Field(min_length=1)
    session: int
    illumination: int
    label: PresentationLabel
    path: str = Field(min_length=1)

    @field_validator("session")
    @classmethod
    def _session_in_range(cls, value: int) -> int:
        if value not in SESSIONS:
            raise ValueError(f"session must be one of {SESSIONS}, got {value}")
        return value

    @field_validator("illumination")
    @classmethod
    def _illumination_in_range(cls, value: int) -> int:
        if value not in ILLUMINATIONS:
            raise ValueError(f"illumination must be one of {ILLUMINATIONS}, got {value}")
        return value

    @property
    def key(self) -> EntryKey:
        return (self.subject_id, self.session, self.illumination, self.label)

    @property
    def sample_id(self) -> str:
        """Identifier shared by the illuminations of one presentation."""
        return f"{self.subject_id}-s{self.session}-{self.label.value}"

    @property
    def image_id(self) -> str:
        return f"{self.sample_id}-i{self.illumination}"


@dataclass(frozen=True)
class Manifest:
    """Validated list of captures: unique keys and complete per-subject grids."""

    entries: Tuple[ManifestEntry, ...]

    def __post_init__(self) -> None:
        entries = tuple(sorted(self.entries, key=_sort_key))
        object.__setattr__(self, "entries", entries)
        seen: Dict[EntryKey, ManifestEntry] = {}
        for entry in entries:
            if entry.key in seen:
                raise ManifestInvariantError(f"duplicate manifest key {_format_key(entry.key)}")
            seen[entry.key] = entry
        grid = {(s, i) for s in SESSIONS for i in ILLUMINATIONS}
        present: Dict[Tuple[str, PresentationLabel], set] = {}
        for subject, session, illumination, label in seen:
            present.setdefault((subject, label), set()).add((session, illumination))
        for (subject, label), cells in sorted(present.items(), key=lambda item: (item[0][0], item[0][1].value)):
            missing = sorted(grid - cells)
            if missing:
                raise ManifestInvariantError(
                    f"subject {subject} ({label.value}) is missing session/illumination cells {missing}"
                )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def subjects(self) -> List[str]:
        return sorted({entry.subject_id for entry in self.entries})

    def counts(self) -> Dict[str, int]:
        labels = Counter(entry.label for entry in self.entries)
        return {
            "entries": len(self.entries),
            "subjects": len(self.subjects),
            PresentationLabel.BONA_FIDE.value: labels[PresentationLabel.BONA_FIDE],
            PresentationLabel.ATTACK.value: labels[PresentationLabel.ATTACK],
        }

    def for_subjects(self, subjects: Iterable[str]) -> "Manifest":
        wanted = set(subjects)
        return Manifest(tuple(entry for entry in self.entries if entry.subject_id in wanted))

    def for_illumination(self, illumination: int) -> List[ManifestEntry]:
        return [entry for entry in self.entries if entry.illumination == illumination]


def _sort_key(entry: ManifestEntry) -> Tuple[str, int, int, str]:
    return (entry.subject_id, entry.session, entry.illumination, entry.label.value)


def _format_key(key: EntryKey) -> str:
    subject, session, illumination, label = key
    return f"(subject={subject}, session={session}, illumination={illumination}, label={label.value})"
