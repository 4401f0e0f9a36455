"""Per-tag dictionaries mapping a correct form to erroneous forms observed in its place."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import AnnotatedSentence, ErrorTag, FormatError

logger = logging.getLogger(__name__)


def normalize_key(form: str) -> str:
    return " ".join(form.split()).lower()


@dataclass
class ErrorDictionary:
    tag: ErrorTag
    entries: dict[str, Counter] = field(default_factory=dict)

    def add(self, correct: str, erroneous: str, count: int = 1) -> bool:
        """Record ``erroneous`` as a replacement for ``correct``; False if the pair is rejected."""
        key = normalize_key(correct)
        value = " ".join(erroneous.split())
        if not key or not value or normalize_key(value) == key:
            return False
        self.entries.setdefault(key, Counter())[value] += count
        return True

    def lookup(self, surface_form: str) -> list[tuple[str, int]]:
        variants = self.entries.get(normalize_key(surface_form))
        if not variants:
            return []
        return sorted(variants.items(), key=lambda kv: (-kv[1], kv[0]))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def max_key_words(self) -> int:
        return max((len(k.split()) for k in self.entries), default=0)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "entries": {k: self.lookup(k) for k in sorted(self.entries)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorDictionary":
        d = cls(ErrorTag.parse(data["tag"]))
        for key, variants in data["entries"].items():
            for form, count in variants:
                if not d.add(key, form, int(count)):
                    raise FormatError(f"invalid entry {key!r} -> {form!r}", field="entries")
        return d


def lookup(dictionary: ErrorDictionary, surface_form: str) -> list[tuple[str, int]]:
    return dictionary.lookup(surface_form)


def build_dictionary(
    corpus: Iterable[AnnotatedSentence], tag: ErrorTag | str, stats: Counter | None = None
) -> ErrorDictionary:
    """Collect ``correction -> span surface`` pairs for every ``tag`` span with a correction."""
    tag = ErrorTag.parse(tag) if isinstance(tag, str) else tag
    stats = stats if stats is not None else Counter()
    d = ErrorDictionary(tag)
    for s in corpus:
        for sp in s.spans:
            if sp.tag != tag:
                continue
            if sp.correction is None:
                stats["no_correction"] += 1
                continue
            if d.add(sp.correction, sp.surface(s.text)):
                stats["pairs"] += 1
            else:
                stats["self_mapping"] += 1
    return d


def merge_suggestions(dictionary: ErrorDictionary, suggestions_file, stats: Counter | None = None) -> ErrorDictionary:
    """Union ``dictionary`` with rows of a ``tag correct erroneous [count]`` TSV.

    Rows for other tags are ignored. Returns a new dictionary.
    """
    stats = stats if stats is not None else Counter()
    merged = ErrorDictionary(dictionary.tag, {k: Counter(v) for k, v in dictionary.entries.items()})
    for lineno, tag, correct, wrong, count in read_suggestions(suggestions_file):
        if tag != dictionary.tag:
            continue
        if merged.add(correct, wrong, count):
            stats["merged"] += 1
        else:
            stats["self_mapping"] += 1
            logger.warning("suggestions line %d: dropped self-mapping %r -> %r", lineno, correct, wrong)
    return merged


def read_suggestions(path) -> list[tuple[int, ErrorTag, str, str, int]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) not in (3, 4):
                raise FormatError(f"line {lineno}: expected 3 or 4 tab-separated columns, got {len(cols)}")
            if not ErrorTag.is_valid(cols[0]):
                raise FormatError(f"line {lineno}: unknown tag {cols[0]!r}")
            if not cols[1].strip() or not cols[2].strip():
                raise FormatError(f"line {lineno}: empty form")
            count = 1
            if len(cols) == 4:
                try:
                    count = int(cols[3])
                except ValueError:
                    raise FormatError(f"line {lineno}: count must be an integer, got {cols[3]!r}") from None
                if count < 1:
                    raise FormatError(f"line {lineno}: count must be positive")
            rows.append((lineno, ErrorTag(cols[0]), cols[1], cols[2], count))
    return rows


def write_dictionaries(dictionaries: Iterable[ErrorDictionary], path) -> None:
    payload = {"dictionaries": [d.to_dict() for d in dictionaries]}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


def read_dictionaries(path) -> list[ErrorDictionary]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return [ErrorDictionary.from_dict(d) for d in payload["dictionaries"]]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a dictionary file ({exc})") from None
