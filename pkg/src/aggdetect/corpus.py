"""Loading, validation, persistence, and accounting for labeled comment corpora.

Corpora are collections of social-media comments labeled with one of three
aggression classes (NAG, OAG, CAG) in one of three languages (en, bn, hi).
Files are UTF-8 delimiter-separated values with a header row; a column map
absorbs naming variations between distributions.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

__all__ = [
    "Label",
    "Language",
    "Provenance",
    "Split",
    "LabeledComment",
    "Corpus",
    "LabelDistribution",
    "CorpusError",
    "ColumnMap",
    "load_corpus",
    "save_corpus",
    "distribution",
    "split_train_validation",
    "concat_corpora",
    "write_manifest",
]


class Label(str, Enum):
    NAG = "NAG"
    OAG = "OAG"
    CAG = "CAG"


class Language(str, Enum):
    EN = "en"
    BN = "bn"
    HI = "hi"


class Provenance(str, Enum):
    RAW = "raw"
    NOISE_AUG = "noise_aug"
    TRANSLATED = "translated"


class Split(str, Enum):
    TRAINING = "training"
    TESTING = "testing"


MIXED = "mixed"


class CorpusError(Exception):
    """Raised for malformed corpus files or invariant violations."""


@dataclass(frozen=True)
class LabeledComment:
    """One comment with its aggression label, language, and provenance."""

    id: str
    text: str
    label: Label
    language: Language
    provenance: Provenance = Provenance.RAW
    source_id: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"comment {self.id!r}: text is empty after trimming")
        if (self.provenance is Provenance.RAW) != (self.source_id is None):
            raise CorpusError(
                f"comment {self.id!r}: provenance {self.provenance.value!r} "
                f"inconsistent with source_id {self.source_id!r}"
            )


@dataclass(frozen=True)
class Corpus:
    """An ordered, split-tagged, immutable collection of labeled comments."""

    comments: tuple[LabeledComment, ...]
    split: Split
    language_tag: Language | str  # a Language, or MIXED

    def __post_init__(self):
        object.__setattr__(self, "comments", tuple(self.comments))
        seen = set()
        for c in self.comments:
            if c.id in seen:
                raise CorpusError(f"duplicate comment id {c.id!r}")
            seen.add(c.id)
            if self.language_tag != MIXED and c.language != self.language_tag:
                raise CorpusError(
                    f"comment {c.id!r} language {c.language.value!r} does not match "
                    f"corpus language tag {self.language_tag!r}"
                )

    def __len__(self):
        return len(self.comments)

    def __iter__(self):
        return iter(self.comments)

    def ids(self) -> set[str]:
        return {c.id for c in self.comments}

    def with_comments(self, comments) -> "Corpus":
        return Corpus(tuple(comments), self.split, self.language_tag)


@dataclass(frozen=True)
class LabelDistribution:
    count_nag: int
    count_oag: int
    count_cag: int
    total: int

    def __post_init__(self):
        counts = (self.count_nag, self.count_oag, self.count_cag)
        if any(c < 0 for c in counts):
            raise CorpusError("label counts must be non-negative")
        if self.total != sum(counts):
            raise CorpusError(
                f"total {self.total} != sum of per-label counts {sum(counts)}"
            )

    @classmethod
    def from_counts(cls, nag: int, oag: int, cag: int) -> "LabelDistribution":
        return cls(nag, oag, cag, nag + oag + cag)

    def count(self, label: Label) -> int:
        return {
            Label.NAG: self.count_nag,
            Label.OAG: self.count_oag,
            Label.CAG: self.count_cag,
        }[label]

    def as_dict(self) -> dict[str, int]:
        return {
            "NAG": self.count_nag,
            "OAG": self.count_oag,
            "CAG": self.count_cag,
            "total": self.total,
        }

    def __add__(self, other: "LabelDistribution") -> "LabelDistribution":
        return LabelDistribution.from_counts(
            self.count_nag + other.count_nag,
            self.count_oag + other.count_oag,
            self.count_cag + other.count_cag,
        )


@dataclass(frozen=True)
class ColumnMap:
    """Names of the id, text, and label columns in a delimited file."""

    id: str = "id"
    text: str = "text"
    label: str = "label"


# Optional columns written by save_corpus and honored on load when present.
_LANGUAGE_COL = "language"
_PROVENANCE_COL = "provenance"
_SOURCE_ID_COL = "source_id"


def load_corpus(
    path: str | Path,
    language: Language,
    split: Split,
    column_map: ColumnMap = ColumnMap(),
    delimiter: str = ",",
) -> Corpus:
    """Load a delimited UTF-8 file into a Corpus, preserving row order.

    Rows become raw-provenance comments unless the file carries explicit
    language/provenance/source_id columns (as written by save_corpus).
    Unknown labels, malformed rows, and duplicate ids are hard errors.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    comments: list[LabeledComment] = []
    mixed = False
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: file is empty (no header row)") from None
        col = {name: i for i, name in enumerate(header)}
        for role, name in (
            ("id", column_map.id),
            ("text", column_map.text),
            ("label", column_map.label),
        ):
            if name not in col:
                raise CorpusError(f"{path}: missing {role} column {name!r} in header")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise CorpusError(
                    f"{path}:{line}: expected {len(header)} columns, got {len(row)}"
                )
            raw_label = row[col[column_map.label]].strip()
            try:
                label = Label(raw_label)
            except ValueError:
                raise CorpusError(
                    f"{path}:{line}: unknown label {raw_label!r}"
                ) from None
            row_language = language
            if _LANGUAGE_COL in col and row[col[_LANGUAGE_COL]].strip():
                row_language = Language(row[col[_LANGUAGE_COL]].strip())
                if row_language != language:
                    mixed = True
            provenance = Provenance.RAW
            if _PROVENANCE_COL in col and row[col[_PROVENANCE_COL]].strip():
                provenance = Provenance(row[col[_PROVENANCE_COL]].strip())
            source_id = None
            if _SOURCE_ID_COL in col and row[col[_SOURCE_ID_COL]].strip():
                source_id = row[col[_SOURCE_ID_COL]].strip()
            comment_id = row[col[column_map.id]].strip()
            text = row[col[column_map.text]].strip()
            if not text:
                raise CorpusError(f"{path}:{line}: empty text for id {comment_id!r}")
            try:
                comments.append(
                    LabeledComment(
                        id=comment_id,
                        text=text,
                        label=label,
                        language=row_language,
                        provenance=provenance,
                        source_id=source_id,
                    )
                )
            except CorpusError as exc:
                raise CorpusError(f"{path}:{line}: {exc}") from None
    try:
        return Corpus(tuple(comments), split, MIXED if mixed else language)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


def save_corpus(corpus: Corpus, path: str | Path, delimiter: str = ",") -> None:
    """Persist a corpus so load_corpus round-trips every field losslessly."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter=delimiter)
            writer.writerow(
                ["id", "text", "label", _LANGUAGE_COL, _PROVENANCE_COL, _SOURCE_ID_COL]
            )
            for c in corpus:
                writer.writerow(
                    [
                        c.id,
                        c.text,
                        c.label.value,
                        c.language.value,
                        c.provenance.value,
                        c.source_id or "",
                    ]
                )
    except OSError as exc:
        raise CorpusError(f"cannot write corpus to {path}: {exc}") from exc


def distribution(corpus: Corpus) -> LabelDistribution:
    """Per-label membership counts."""
    counts = {Label.NAG: 0, Label.OAG: 0, Label.CAG: 0}
    for c in corpus:
        counts[c.label] += 1
    return LabelDistribution.from_counts(
        counts[Label.NAG], counts[Label.OAG], counts[Label.CAG]
    )


def split_train_validation(
    corpus: Corpus, validation_fraction: float = 0.1, seed: int = 0
) -> tuple[Corpus, Corpus]:
    """Deterministic stratified partition into (train, validation).

    Per-label validation share is within one comment of the requested
    fraction; original comment order is preserved inside each part.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise CorpusError(
            f"validation_fraction must be in (0, 1), got {validation_fraction}"
        )
    if len(corpus) == 0:
        raise CorpusError("cannot split an empty corpus")
    rng = random.Random(seed)
    val_ids: set[str] = set()
    by_label: dict[Label, list[LabeledComment]] = {l: [] for l in Label}
    for c in corpus:
        by_label[c.label].append(c)
    for label in Label:
        members = by_label[label]
        if not members:
            continue
        n_val = round(len(members) * validation_fraction)
        picked = rng.sample(range(len(members)), n_val)
        val_ids.update(members[i].id for i in picked)
    if not val_ids or len(val_ids) == len(corpus):
        raise CorpusError(
            f"corpus of size {len(corpus)} too small to stratify at "
            f"fraction {validation_fraction}"
        )
    train = [c for c in corpus if c.id not in val_ids]
    val = [c for c in corpus if c.id in val_ids]
    return corpus.with_comments(train), corpus.with_comments(val)


def concat_corpora(corpora: list[Corpus], split: Split) -> Corpus:
    """Concatenate corpora in order; language tag becomes mixed when they differ."""
    comments: list[LabeledComment] = []
    tags = set()
    for c in corpora:
        comments.extend(c.comments)
        tags.add(c.language_tag)
    tag = tags.pop() if len(tags) == 1 else MIXED
    return Corpus(tuple(comments), split, tag)


def write_manifest(
    corpus: Corpus,
    path: str | Path,
    source_files: list[str] | None = None,
    seed: int | None = None,
    extra: dict | None = None,
) -> dict:
    """Write a JSON manifest recording counts, seed lineage, and source files."""
    dist = distribution(corpus)
    manifest = {
        "split": corpus.split.value,
        "language_tag": (
            corpus.language_tag.value
            if isinstance(corpus.language_tag, Language)
            else corpus.language_tag
        ),
        "distribution": dist.as_dict(),
        "provenance_counts": {
            p.value: sum(1 for c in corpus if c.provenance is p) for p in Provenance
        },
        "source_files": source_files or [],
        "seed": seed,
    }
    if extra:
        manifest.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return manifest
