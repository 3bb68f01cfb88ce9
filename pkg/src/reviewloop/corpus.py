"""Corpus rows, the label taxonomy, and JSONL reading/writing.

A corpus row is one JSON object per line:

    {"id": "...", "text": "...", "aspects": ["..."]?, "sentiment": ["..."]?,
     "split": "train"|"validation"?}

Rows carrying an "aspects" or "sentiment" field are labeled (empty lists are
legal labels); rows without either field are unlabeled. "split" defaults to
"train".
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import IngestError, TaxonomyError

ASPECT_CLASSES = (
    "Internet usage",
    "Global Management",
    "Loyalty",
    "Contract",
    "Financial",
    "Accessibility",
    "Reception",
    "Empathy",
    "Information provided",
    "Processing time",
    "Visibility",
    "Expert",
    "Repairing",
)

SENTIMENT_CLASSES = ("Positive", "Negative")

TASKS = ("aspect", "sentiment")


@dataclass(frozen=True)
class Taxonomy:
    aspects: tuple[str, ...] = ASPECT_CLASSES
    sentiment: tuple[str, ...] = SENTIMENT_CLASSES

    def classes(self, task: str) -> tuple[str, ...]:
        if task == "aspect":
            return self.aspects
        if task == "sentiment":
            return self.sentiment
        raise ValueError(f"unknown task {task!r}")

    def to_dict(self) -> dict:
        return {"aspects": list(self.aspects), "sentiment": list(self.sentiment)}

    @classmethod
    def from_dict(cls, d: dict) -> "Taxonomy":
        return cls(aspects=tuple(d["aspects"]), sentiment=tuple(d["sentiment"]))


@dataclass(frozen=True)
class CorpusRow:
    doc_id: str
    text: str
    aspects: tuple[str, ...] | None
    sentiment: tuple[str, ...] | None
    split: str = "train"

    @property
    def has_labels(self) -> bool:
        return self.aspects is not None or self.sentiment is not None

    def to_dict(self) -> dict:
        d: dict = {"id": self.doc_id, "text": self.text}
        if self.aspects is not None:
            d["aspects"] = list(self.aspects)
        if self.sentiment is not None:
            d["sentiment"] = list(self.sentiment)
        if self.split != "train":
            d["split"] = self.split
        return d


def _check_labels(names, allowed: tuple[str, ...], kind: str) -> tuple[str, ...]:
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise TaxonomyError(f"{kind} labels must be a list of strings, got {names!r}")
    for n in names:
        if n not in allowed:
            raise TaxonomyError(f"unknown {kind} label {n!r}")
    return tuple(names)


def parse_row(obj: dict, taxonomy: Taxonomy, line_no: int) -> CorpusRow:
    if not isinstance(obj, dict):
        raise IngestError(line_no, "row is not a JSON object")
    doc_id = obj.get("id")
    text = obj.get("text")
    if not isinstance(doc_id, str) or not doc_id:
        raise IngestError(line_no, "missing or invalid 'id'")
    if not isinstance(text, str) or not text.strip():
        raise IngestError(line_no, "missing or empty 'text'")
    split = obj.get("split", "train")
    if split not in ("train", "validation"):
        raise IngestError(line_no, f"invalid split {split!r}")
    unknown = set(obj) - {"id", "text", "aspects", "sentiment", "split"}
    if unknown:
        raise IngestError(line_no, f"unknown fields {sorted(unknown)}")

    aspects = sentiment = None
    if "aspects" in obj:
        aspects = _check_labels(obj["aspects"], taxonomy.aspects, "aspect")
    if "sentiment" in obj:
        sentiment = _check_labels(obj["sentiment"], taxonomy.sentiment, "sentiment")
    if split == "validation" and aspects is None and sentiment is None:
        raise IngestError(line_no, "validation rows must carry labels")
    return CorpusRow(doc_id=doc_id, text=text, aspects=aspects,
                     sentiment=sentiment, split=split)


def read_corpus(path, taxonomy: Taxonomy | None = None) -> list[CorpusRow]:
    """Parse a JSONL corpus file; duplicate ids are rejected."""
    taxonomy = taxonomy or Taxonomy()
    rows = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(line_no, f"invalid JSON: {exc.msg}") from None
            row = parse_row(obj, taxonomy, line_no)
            if row.doc_id in seen:
                raise IngestError(line_no, f"duplicate id {row.doc_id!r}")
            seen.add(row.doc_id)
            rows.append(row)
    return rows


def write_corpus(rows: list[CorpusRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_dict(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")
