"""Annotated-sentence data model, JSONL I/O, filtering, splitting and statistics."""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .tokenize import tokenize

SOURCES = ("realec", "ppo", "rule", "llm")
SPLITS = ("train", "test")


class ErrorTag(str, Enum):
    COPYING_EXPRESSION = "CopyingExpression"
    SYNONYMS = "Synonyms"
    TENSE_SEMANTICS = "TenseSemantics"
    TRANSLITERATION = "Transliteration"
    WORD_FORM_TRANSMISSION = "WordFormTransmission"

    @classmethod
    def parse(cls, label: str) -> "ErrorTag":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown error tag {label!r}") from None

    @classmethod
    def is_valid(cls, label: str) -> bool:
        return label in cls._value2member_map_

    def __str__(self) -> str:
        return self.value


class FormatError(ValueError):
    """A corpus record or input line does not follow its schema."""

    def __init__(self, message: str, index: int | None = None, field: str | None = None):
        where = []
        if index is not None:
            where.append(f"record {index}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.index = index
        self.field = field


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int
    tag: ErrorTag
    correction: str | None = None

    def __post_init__(self):
        if not isinstance(self.tag, ErrorTag):
            object.__setattr__(self, "tag", ErrorTag.parse(self.tag))

    def surface(self, text: str) -> str:
        return text[self.start : self.end]

    def shifted(self, delta: int) -> "Span":
        return replace(self, start=self.start + delta, end=self.end + delta)


@dataclass(frozen=True)
class AnnotatedSentence:
    id: str
    text: str
    spans: tuple[Span, ...] = ()
    source: str = "realec"
    split: str | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        spans = tuple(sorted(self.spans, key=lambda s: (s.start, s.end, s.tag.value)))
        seen = set()
        for s in spans:
            if not (0 <= s.start < s.end <= len(self.text)):
                raise ValueError(f"span {s.start}:{s.end} out of bounds for text of length {len(self.text)}")
            key = (s.start, s.end, s.tag)
            if key in seen:
                raise ValueError(f"duplicate span {s.start}:{s.end} {s.tag.value}")
            seen.add(key)
        object.__setattr__(self, "spans", spans)

    def with_spans(self, spans: Iterable[Span]) -> "AnnotatedSentence":
        return replace(self, spans=tuple(spans))


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[AnnotatedSentence, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        ids = Counter(s.id for s in self.sentences)
        dup = [i for i, c in ids.items() if c > 1]
        if dup:
            raise ValueError(f"duplicate sentence ids: {', '.join(sorted(dup)[:5])}")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[AnnotatedSentence]:
        return iter(self.sentences)

    def by_id(self) -> dict[str, AnnotatedSentence]:
        return {s.id: s for s in self.sentences}

    def derive(self, sentences: Iterable[AnnotatedSentence], **provenance) -> "Corpus":
        """New corpus with this corpus's provenance extended by ``provenance``."""
        return Corpus(tuple(sentences), {**self.provenance, **provenance})


# ---------------------------------------------------------------------------
# JSONL


def sentence_to_record(s: AnnotatedSentence) -> dict:
    return {
        "id": s.id,
        "text": s.text,
        "source": s.source,
        "split": s.split,
        "spans": [
            {"start": sp.start, "end": sp.end, "tag": sp.tag.value, "correction": sp.correction}
            for sp in s.spans
        ],
    }


def dumps_sentence(s: AnnotatedSentence) -> str:
    return json.dumps(sentence_to_record(s), ensure_ascii=False)


def _require(rec: dict, key: str, types, index: int, nullable=False):
    if key not in rec:
        raise FormatError("missing", index, key)
    value = rec[key]
    if value is None and nullable:
        return None
    if not isinstance(value, types) or isinstance(value, bool):
        raise FormatError(f"expected {getattr(types, '__name__', types)}, got {type(value).__name__}", index, key)
    return value


def record_to_sentence(rec, index: int) -> AnnotatedSentence:
    if not isinstance(rec, dict):
        raise FormatError("record is not a JSON object", index)
    sid = _require(rec, "id", str, index)
    text = _require(rec, "text", str, index)
    source = _require(rec, "source", str, index)
    if source not in SOURCES:
        raise FormatError(f"unknown source {source!r}", index, "source")
    split = _require(rec, "split", str, index, nullable=True)
    if split is not None and split not in SPLITS:
        raise FormatError(f"unknown split {split!r}", index, "split")
    raw_spans = _require(rec, "spans", list, index)
    spans = []
    for k, sp in enumerate(raw_spans):
        fname = f"spans[{k}]"
        if not isinstance(sp, dict):
            raise FormatError("span is not an object", index, fname)
        start = _require(sp, "start", int, index)
        end = _require(sp, "end", int, index)
        tag = _require(sp, "tag", str, index)
        corr = _require(sp, "correction", str, index, nullable=True)
        if not ErrorTag.is_valid(tag):
            raise FormatError(f"unknown tag label {tag!r}", index, f"{fname}.tag")
        if not (0 <= start < end <= len(text)):
            raise FormatError(f"invalid offsets {start}:{end} for text of length {len(text)}", index, fname)
        spans.append(Span(start, end, ErrorTag(tag), corr))
    try:
        return AnnotatedSentence(sid, text, tuple(spans), source, split)
    except ValueError as exc:
        raise FormatError(str(exc), index, "spans") from None


def _provenance_path(path: Path) -> Path:
    return path.with_name(path.name + ".provenance.json")


def write_corpus(corpus: Corpus, path, provenance: bool = True) -> None:
    """Write one canonical JSON record per line; provenance goes to a sidecar file."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in corpus.sentences:
            fh.write(dumps_sentence(s))
            fh.write("\n")
    if provenance and corpus.provenance:
        _provenance_path(path).write_text(
            json.dumps(corpus.provenance, ensure_ascii=False, indent=2, sort_keys=True, default=str) + "\n",
            encoding="utf-8",
        )


def iter_records(lines: Iterable[str]) -> Iterator[AnnotatedSentence]:
    for index, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", index) from None
        yield record_to_sentence(rec, index)


def read_corpus(path) -> Corpus:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        sentences = list(iter_records(fh))
    try:
        corpus = Corpus(tuple(sentences))
    except ValueError as exc:
        raise FormatError(str(exc), field="id") from None
    side = _provenance_path(path)
    if side.exists():
        object.__setattr__(corpus, "provenance", json.loads(side.read_text(encoding="utf-8")))
    return corpus


# ---------------------------------------------------------------------------
# Filtering, splitting, statistics


def filter_min_tokens(corpus: Corpus, min_tokens: int = 5) -> Corpus:
    kept = [s for s in corpus if len(tokenize(s.text)) >= min_tokens]
    return corpus.derive(kept)


def split_size(n: int, ratio: float) -> int:
    """floor(n * ratio), computed on the decimal value of ``ratio`` to avoid float drift."""
    return math.floor(n * Fraction(str(ratio)))


def split_corpus(corpus: Corpus, train_ratio: float = 0.8, seed: int = 42) -> tuple[Corpus, Corpus]:
    if not 0 < train_ratio < 1:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    order = list(corpus.sentences)
    random.Random(seed).shuffle(order)
    k = split_size(len(order), train_ratio)
    train = [replace(s, split="train") for s in order[:k]]
    test = [replace(s, split="test") for s in order[k:]]
    prov = {"split": {"train_ratio": train_ratio, "seed": seed}}
    return corpus.derive(train, **prov), corpus.derive(test, **prov)


@dataclass
class CorpusStats:
    """Span and sentence counts keyed by (tag, source, split)."""

    spans: Counter = field(default_factory=Counter)
    sentences_with_tag: Counter = field(default_factory=Counter)
    sentences: Counter = field(default_factory=Counter)

    @property
    def total_spans(self) -> int:
        return sum(self.spans.values())

    @property
    def total_sentences(self) -> int:
        return sum(self.sentences.values())

    def by(self, *axes: str) -> Counter:
        """Marginalize the span table onto a subset of ``("tag", "source", "split")``."""
        idx = [("tag", "source", "split").index(a) for a in axes]
        out = Counter()
        for key, n in self.spans.items():
            out[tuple(key[i] for i in idx)] += n
        return out

    def rows(self) -> list[dict]:
        out = []
        for tag in ErrorTag:
            for source in SOURCES:
                for split in (*SPLITS, None):
                    key = (tag.value, source, split)
                    out.append(
                        {
                            "tag": tag.value,
                            "source": source,
                            "split": split,
                            "spans": self.spans[key],
                            "sentences": self.sentences_with_tag[key],
                        }
                    )
        return out

    def to_dict(self) -> dict:
        return {
            "total_spans": self.total_spans,
            "total_sentences": self.total_sentences,
            "spans_by_tag": {t.value: self.by("tag")[(t.value,)] for t in ErrorTag},
            "sentences_by_source_split": [
                {"source": src, "split": sp, "sentences": n} for (src, sp), n in sorted(
                    self.sentences.items(), key=lambda kv: (kv[0][0], kv[0][1] or "")
                )
            ],
            "rows": [r for r in self.rows() if r["spans"] or r["sentences"]],
        }

    def format_table(self) -> str:
        table = self.by("tag", "source")
        header = ["tag", *SOURCES, "total"]
        lines = [header]
        for tag in ErrorTag:
            counts = [table[(tag.value, src)] for src in SOURCES]
            lines.append([tag.value, *map(str, counts), str(sum(counts))])
        col = [sum(table[(t.value, src)] for t in ErrorTag) for src in SOURCES]
        lines.append(["total", *map(str, col), str(sum(col))])
        widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
        text = "\n".join(
            "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in lines
        )
        return f"{text}\nsentences: {self.total_sentences}"


def corpus_stats(corpus: Corpus | Sequence[AnnotatedSentence]) -> CorpusStats:
    stats = CorpusStats()
    for s in corpus:
        stats.sentences[(s.source, s.split)] += 1
        tags = set()
        for sp in s.spans:
            stats.spans[(sp.tag.value, s.source, s.split)] += 1
            tags.add(sp.tag.value)
        for t in tags:
            stats.sentences_with_tag[(t, s.source, s.split)] += 1
    return stats
