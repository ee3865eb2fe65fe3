"""Data model, loaders and imbalance statistics for the three polarization subtasks.

Files are either CSV with a header row or JSONL with one object per post.
Every file carries ``id`` and ``text``; ``lang`` is optional and otherwise
taken from the id prefix (``eng_891d...`` -> ``eng``).  Label columns are
matched case-insensitively against the canonical label names and are always
returned in canonical order.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import statistics
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "LANGUAGES",
    "MANIFEST_EXCLUDED",
    "REFERENCE_COUNTS",
    "REFERENCE_TOTALS",
    "Subtask",
    "Post",
    "LabelMatrix",
    "Dataset",
    "StatsReport",
    "Mismatch",
    "CorpusError",
    "MissingColumn",
    "MalformedLabel",
    "DuplicateId",
    "UnknownLanguage",
    "NoGoldLabels",
    "load_dataset",
    "load_label_matrix",
    "write_dataset",
    "write_label_matrix",
    "dataset_stats",
    "reference_counts",
    "validate_against_reference",
    "infer_subtask",
]

LANGUAGES = (
    "amh", "arb", "ben", "mya", "zho", "eng", "deu", "hau", "hin", "ita", "khm",
    "nep", "ori", "fas", "pol", "pan", "rus", "spa", "swa", "tel", "tur", "urd",
)
MANIFEST_EXCLUDED = frozenset({"ita", "pol", "rus", "mya"})

# (train, dev, test, total) per language.
REFERENCE_COUNTS: dict[str, tuple[int, int, int, int]] = {
    "amh": (3332, 166, 1501, 4999),
    "arb": (3380, 169, 1521, 5070),
    "ben": (3333, 166, 1501, 5000),
    "mya": (2889, 144, 1301, 4334),
    "zho": (4280, 214, 1927, 6421),
    "eng": (3222, 160, 1452, 4834),
    "deu": (3180, 159, 1432, 4771),
    "hau": (3651, 182, 1644, 5477),
    "hin": (2744, 137, 1236, 4117),
    "ita": (3334, 166, 1538, 5038),
    "khm": (6640, 332, 2988, 9960),
    "nep": (2005, 100, 903, 3008),
    "ori": (2368, 118, 1066, 3552),
    "fas": (3295, 164, 1484, 4943),
    "pol": (2391, 119, 1077, 3587),
    "pan": (1700, 100, 809, 2609),
    "rus": (3348, 167, 1508, 5023),
    "spa": (3305, 165, 1488, 4958),
    "swa": (6991, 349, 3147, 10487),
    "tel": (2366, 118, 1066, 3550),
    "tur": (2364, 115, 1093, 3572),
    "urd": (3563, 177, 1606, 5346),
}
# Published column totals.  These do not equal the sums of the rows above.
REFERENCE_TOTALS = {"train": 67736, "dev": 3744, "test": 33782, "total": 105262}

TOTAL_KEY = "__total__"
_ABSENT = {"", "--", "---"}


class Subtask(str, enum.Enum):
    DETECT = "detect"
    TYPE = "type"
    MANIFEST = "manifest"

    @property
    def labels(self) -> tuple[str, ...]:
        return _LABELS[self]

    @property
    def n_labels(self) -> int:
        return len(_LABELS[self])

    @classmethod
    def parse(cls, value: "str | Subtask") -> "Subtask":
        if isinstance(value, Subtask):
            return value
        key = str(value).strip().lower()
        aliases = {"1": cls.DETECT, "2": cls.TYPE, "3": cls.MANIFEST,
                   "subtask1": cls.DETECT, "subtask2": cls.TYPE, "subtask3": cls.MANIFEST}
        if key in aliases:
            return aliases[key]
        return cls(key)


_LABELS = {
    Subtask.DETECT: ("Polarization",),
    Subtask.TYPE: ("Political", "Racial/Ethnic", "Religious", "Gender/Sexual", "Other"),
    Subtask.MANIFEST: ("Stereotype", "Vilification", "Dehumanization",
                       "Extreme_Language", "Lack_of_Empathy", "Invalidation"),
}


class CorpusError(ValueError):
    """Base class for data errors raised while loading or validating files."""


class MissingColumn(CorpusError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class MalformedLabel(CorpusError):
    def __init__(self, row: int, value):
        super().__init__(f"row {row}: label value {value!r} is not 0/1")
        self.row = row
        self.value = value


class DuplicateId(CorpusError):
    def __init__(self, post_id: str):
        super().__init__(f"duplicate id {post_id!r}")
        self.id = post_id


class UnknownLanguage(CorpusError):
    def __init__(self, code: str, detail: str = ""):
        msg = f"unknown language code {code!r}"
        super().__init__(msg + (f" ({detail})" if detail else ""))
        self.code = code


class NoGoldLabels(CorpusError):
    pass


@dataclass(frozen=True)
class Post:
    id: str
    lang: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"post {self.id!r} has empty text")
        prefix = self.id.split("_", 1)[0] if "_" in self.id else None
        if prefix in LANGUAGES and prefix != self.lang:
            raise ValueError(f"id {self.id!r} does not match language {self.lang!r}")


@dataclass(frozen=True)
class LabelMatrix:
    """Binary labels for one subtask; rows follow ``ids``, columns the canonical labels."""

    subtask: Subtask
    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.shape != (len(self.ids), self.subtask.n_labels):
            raise ValueError(
                f"label matrix shape {values.shape} does not match "
                f"({len(self.ids)}, {self.subtask.n_labels})"
            )
        if values.size and not np.isin(values, (0, 1)).all():
            raise ValueError("label matrix entries must be 0 or 1")
        values = values.astype(np.int8)
        values.setflags(write=False)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", values)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.subtask.labels

    def __len__(self) -> int:
        return len(self.ids)

    def align(self, ids: Sequence[str]) -> "LabelMatrix":
        """Reorder (or subset) rows to follow ``ids``."""
        index = {i: k for k, i in enumerate(self.ids)}
        missing = [i for i in ids if i not in index]
        if missing:
            raise KeyError(f"ids not present: {missing[:5]}")
        rows = [index[i] for i in ids]
        return LabelMatrix(self.subtask, tuple(ids), self.values[rows])


@dataclass(frozen=True)
class Dataset:
    subtask: Subtask
    posts: tuple[Post, ...]
    gold: LabelMatrix | None = None
    partition: str = "train"
    dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "posts", tuple(self.posts))
        if self.partition not in ("train", "dev", "test", "merged"):
            raise ValueError(f"unknown partition {self.partition!r}")
        if self.gold is not None:
            if self.gold.subtask != self.subtask:
                raise ValueError("gold labels belong to a different subtask")
            if self.gold.ids != self.ids:
                raise ValueError("gold ids do not follow post order")

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.posts)

    @property
    def texts(self) -> list[str]:
        return [p.text for p in self.posts]

    @property
    def langs(self) -> list[str]:
        return [p.lang for p in self.posts]

    def __len__(self) -> int:
        return len(self.posts)

    def subset(self, indices: Iterable[int], partition: str | None = None) -> "Dataset":
        indices = list(indices)
        posts = [self.posts[i] for i in indices]
        gold = None
        if self.gold is not None:
            gold = LabelMatrix(self.subtask, tuple(p.id for p in posts), self.gold.values[indices])
        return Dataset(self.subtask, tuple(posts), gold, partition or self.partition)

    @classmethod
    def concat(cls, parts: Sequence["Dataset"], partition: str = "merged") -> "Dataset":
        """Concatenate datasets of the same subtask (e.g. train + dev)."""
        if not parts:
            raise ValueError("nothing to concatenate")
        subtask = parts[0].subtask
        if any(p.subtask != subtask for p in parts):
            raise ValueError("cannot concatenate datasets of different subtasks")
        posts = [post for p in parts for post in p.posts]
        seen: set[str] = set()
        for post in posts:
            if post.id in seen:
                raise DuplicateId(post.id)
            seen.add(post.id)
        gold = None
        if all(p.gold is not None for p in parts):
            gold = LabelMatrix(subtask, tuple(p.id for p in posts),
                               np.vstack([p.gold.values for p in parts]))
        return cls(subtask, tuple(posts), gold, partition, sum(p.dropped for p in parts))


# ---------------------------------------------------------------------------
# loading

def _detect_format(path: Path, fmt: str | None) -> str:
    if fmt:
        fmt = fmt.lower()
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unsupported format {fmt!r}")
        return fmt
    return "jsonl" if path.suffix.lower() in (".jsonl", ".json", ".ndjson") else "csv"


def _read_records(path: Path, fmt: str) -> tuple[list[str], list[dict]]:
    if fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            records = list(reader)
            columns = list(reader.fieldnames or [])
        return columns, records
    records = []
    columns: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}: JSONL line is not an object")
            for key in rec:
                if key not in columns:
                    columns.append(key)
            records.append(rec)
    return columns, records


def _resolve_columns(columns: Sequence[str], names: Sequence[str]) -> dict[str, str | None]:
    lookup = {c.strip().lower(): c for c in columns}
    return {name: lookup.get(name.lower()) for name in names}


def _parse_cell(value, row: int) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool):
        raise MalformedLabel(row, value)
    if isinstance(value, int):
        if value in (0, 1):
            return value
        raise MalformedLabel(row, value)
    if isinstance(value, str):
        s = value.strip()
        if s in _ABSENT:
            return None
        if s in ("0", "1"):
            return int(s)
    raise MalformedLabel(row, value)


def infer_subtask(columns: Iterable[str]) -> Subtask:
    """Guess the subtask from the label columns a file carries."""
    lowered = {c.strip().lower() for c in columns}
    for subtask in (Subtask.MANIFEST, Subtask.TYPE, Subtask.DETECT):
        if all(label.lower() in lowered for label in subtask.labels):
            return subtask
    raise MissingColumn("label columns for any subtask")


def _lang_of(post_id: str, lang: str | None, row: int) -> str:
    prefix = post_id.split("_", 1)[0] if "_" in post_id else None
    if lang:
        lang = lang.strip()
        if lang not in LANGUAGES:
            raise UnknownLanguage(lang, f"row {row}")
        if prefix is not None and prefix in LANGUAGES and prefix != lang:
            raise CorpusError(f"row {row}: id {post_id!r} does not match lang {lang!r}")
        return lang
    if prefix is None or prefix not in LANGUAGES:
        raise UnknownLanguage(prefix or post_id, f"row {row}")
    return prefix


def load_dataset(
    path: str | Path,
    subtask: Subtask | str | None = None,
    format: str | None = None,
    partition: str = "train",
) -> Dataset:
    """Load posts (and gold labels if present) from a CSV or JSONL file.

    Rows with missing or whitespace-only text are dropped and counted in
    ``Dataset.dropped``.  Label cells must be 0/1; ``--`` or an empty cell
    marks an unlabeled row.  A file is either fully labeled or fully
    unlabeled, otherwise :class:`MalformedLabel` is raised.
    """
    path = Path(path)
    fmt = _detect_format(path, format)
    columns, records = _read_records(path, fmt)
    cols = _resolve_columns(columns, ["id", "text", "lang"])
    for required in ("id", "text"):
        if cols[required] is None:
            raise MissingColumn(required)
    if subtask is None:
        subtask = infer_subtask(columns)
    subtask = Subtask.parse(subtask)
    label_cols = _resolve_columns(columns, subtask.labels)
    present = [name for name, col in label_cols.items() if col is not None]
    if present and len(present) != len(label_cols):
        missing = next(name for name, col in label_cols.items() if col is None)
        raise MissingColumn(missing)

    posts: list[Post] = []
    rows: list[tuple[int, list[int | None]]] = []
    seen: set[str] = set()
    dropped = 0
    for n, rec in enumerate(records, start=1):
        post_id = str(rec.get(cols["id"]) or "").strip()
        text = rec.get(cols["text"])
        if text is None or not str(text).strip():
            dropped += 1
            continue
        if not post_id:
            raise CorpusError(f"row {n}: empty id")
        if post_id in seen:
            raise DuplicateId(post_id)
        seen.add(post_id)
        lang = _lang_of(post_id, rec.get(cols["lang"]) if cols["lang"] else None, n)
        if subtask is Subtask.MANIFEST and lang in MANIFEST_EXCLUDED:
            raise UnknownLanguage(lang, f"row {n}: not covered by the manifestation subtask")
        posts.append(Post(post_id, lang, unicodedata.normalize("NFC", str(text))))
        if present:
            rows.append((n, [_parse_cell(rec.get(label_cols[name]), n) for name in subtask.labels]))

    gold = None
    if present and rows:
        first_labelled = None
        for n, row in rows:
            absent = [v is None for v in row]
            if any(absent) and not all(absent):
                raise MalformedLabel(n, "--")
            if first_labelled is None:
                first_labelled = not absent[0]
            elif first_labelled == absent[0]:
                raise MalformedLabel(n, "--" if absent[0] else row)
        if first_labelled:
            gold = LabelMatrix(subtask, tuple(p.id for p in posts),
                               np.array([r for _, r in rows], dtype=np.int8))
    return Dataset(subtask, tuple(posts), gold, partition, dropped)


def load_label_matrix(
    path: str | Path, subtask: Subtask | str | None = None, format: str | None = None
) -> LabelMatrix:
    """Load an ``id`` + label-columns file (the submission schema)."""
    path = Path(path)
    fmt = _detect_format(path, format)
    columns, records = _read_records(path, fmt)
    id_col = _resolve_columns(columns, ["id"])["id"]
    if id_col is None:
        raise MissingColumn("id")
    subtask = Subtask.parse(subtask) if subtask is not None else infer_subtask(columns)
    label_cols = _resolve_columns(columns, subtask.labels)
    for name, col in label_cols.items():
        if col is None:
            raise MissingColumn(name)
    ids: list[str] = []
    rows = []
    seen: set[str] = set()
    for n, rec in enumerate(records, start=1):
        post_id = str(rec[id_col]).strip()
        if post_id in seen:
            raise DuplicateId(post_id)
        seen.add(post_id)
        row = [_parse_cell(rec.get(label_cols[name]), n) for name in subtask.labels]
        if any(v is None for v in row):
            raise MalformedLabel(n, "--")
        ids.append(post_id)
        rows.append(row)
    values = np.array(rows, dtype=np.int8).reshape(len(rows), subtask.n_labels)
    return LabelMatrix(subtask, tuple(ids), values)


# ---------------------------------------------------------------------------
# writing

def _write_rows(path: Path, fmt: str, header: list[str], rows: Iterable[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        path.write_text(buf.getvalue(), encoding="utf-8", newline="")
    else:
        lines = [json.dumps(dict(zip(header, r)), ensure_ascii=False) for r in rows]
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_dataset(d: Dataset, path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = _detect_format(path, format)
    header = ["id", "lang", "text"]
    if d.gold is not None:
        header += list(d.subtask.labels)
    rows = []
    for k, p in enumerate(d.posts):
        row = [p.id, p.lang, p.text]
        if d.gold is not None:
            row += [int(v) for v in d.gold.values[k]]
        rows.append(row)
    _write_rows(path, fmt, header, rows)


def write_label_matrix(m: LabelMatrix, path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = _detect_format(path, format)
    rows = [[i] + [int(v) for v in m.values[k]] for k, i in enumerate(m.ids)]
    _write_rows(path, fmt, ["id"] + list(m.labels), rows)


# ---------------------------------------------------------------------------
# statistics

@dataclass
class StatsReport:
    subtask: Subtask
    labels: tuple[str, ...]
    languages: tuple[str, ...]
    n_rows: dict[str, int]
    positives: dict[str, dict[str, int]]
    rates: dict[str, dict[str, float]]
    summary: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.n_rows.values())

    def to_rows(self) -> list[dict]:
        return [
            {"lang": lang, "label": label, "n_rows": self.n_rows[lang],
             "n_positive": self.positives[lang][label],
             "positive_rate": self.rates[lang][label]}
            for lang in self.languages
            for label in self.labels
        ]

    def to_csv(self, path: str | Path) -> None:
        header = ["lang", "label", "n_rows", "n_positive", "positive_rate"]
        rows = [[r[h] if h != "positive_rate" else repr(r[h]) for h in header]
                for r in self.to_rows()]
        _write_rows(Path(path), "csv", header, rows)

    def to_dict(self) -> dict:
        return {
            "subtask": self.subtask.value,
            "labels": list(self.labels),
            "total": self.total,
            "languages": {
                lang: {"n_rows": self.n_rows[lang], "positives": self.positives[lang],
                       "rates": self.rates[lang]}
                for lang in self.languages
            },
            "summary": self.summary,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def dataset_stats(d: Dataset) -> StatsReport:
    """Per-language row counts, per-label positive counts/rates and min/median/max rates."""
    if d.gold is None:
        raise NoGoldLabels("dataset has no gold labels")
    langs = np.array(d.langs)
    languages = tuple(sorted(set(d.langs)))
    labels = d.subtask.labels
    n_rows, positives, rates = {}, {}, {}
    for lang in languages:
        mask = langs == lang
        counts = d.gold.values[mask].sum(axis=0)
        n = int(mask.sum())
        n_rows[lang] = n
        positives[lang] = {lab: int(c) for lab, c in zip(labels, counts)}
        rates[lang] = {lab: int(c) / n for lab, c in zip(labels, counts)}
    summary = {}
    for lab in labels:
        per_lang = [rates[lang][lab] for lang in languages]
        summary[lab] = {
            "min": min(per_lang),
            "median": statistics.median(per_lang),
            "max": max(per_lang),
            "pooled": int(d.gold.values[:, labels.index(lab)].sum()) / len(d),
        }
    return StatsReport(d.subtask, labels, languages, n_rows, positives, rates, summary)


# ---------------------------------------------------------------------------
# reference validation

@dataclass(frozen=True)
class Mismatch:
    key: str
    expected: int | None
    observed: int


def reference_counts(partition: str) -> dict[str, int]:
    """Per-language reference counts for a partition, plus the published total."""
    column = {"train": 0, "dev": 1, "test": 2, "total": 3}
    if partition == "merged":
        counts = {lang: v[0] + v[1] for lang, v in REFERENCE_COUNTS.items()}
        counts[TOTAL_KEY] = REFERENCE_TOTALS["train"] + REFERENCE_TOTALS["dev"]
        return counts
    k = column[partition]
    counts = {lang: v[k] for lang, v in REFERENCE_COUNTS.items()}
    counts[TOTAL_KEY] = REFERENCE_TOTALS[partition]
    return counts


def validate_against_reference(d: Dataset, expected_counts: Mapping[str, int]) -> list[Mismatch]:
    """Compare per-language row counts (and ``__total__`` if given) against a table.

    Languages observed in the data but absent from the table are reported
    with ``expected=None``.
    """
    observed: dict[str, int] = {}
    for lang in d.langs:
        observed[lang] = observed.get(lang, 0) + 1
    out = []
    for key, exp in expected_counts.items():
        if key == TOTAL_KEY:
            got = len(d)
        else:
            got = observed.get(key, 0)
        if got != exp:
            out.append(Mismatch(key, exp, got))
    for lang, got in sorted(observed.items()):
        if lang not in expected_counts:
            out.append(Mismatch(lang, None, got))
    return out
