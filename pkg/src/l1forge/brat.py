"""Import of BRAT standoff (``.txt`` + ``.ann``) essays into annotated sentences."""

from __future__ import annotations

import bisect
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import AnnotatedSentence, ErrorTag, FormatError, Span

logger = logging.getLogger(__name__)

ABBREVIATIONS = frozenset(
    """
    etc e.g i.e vs cf approx mr mrs ms dr prof st no fig jan feb mar apr jun jul aug sep sept oct
    nov dec inc ltd co
    """.split()
)

_BOUNDARY = re.compile(r"[.!?]+(?=\s+[A-Z\dЀ-Я])")
_T_LINE = re.compile(r"^(T\d+)\t(\S+) (\d+) (\d+)\t(.*)$")
_NOTE_LINE = re.compile(r"^(#\d+)\tAnnotatorNotes (T\d+)\t(.*)$")


@dataclass
class _TextBound:
    id: str
    label: str
    start: int
    end: int
    surface: str
    correction: str | None = None


def segment(text: str) -> list[tuple[int, int]]:
    """Sentence character ranges, stripped of surrounding whitespace.

    Boundaries: line breaks, and ``.``/``!``/``?`` followed by whitespace and an
    uppercase letter or digit, unless the preceding word is a known abbreviation.
    """
    cuts = []
    for m in _BOUNDARY.finditer(text):
        word = re.search(r"(\S+)$", text[: m.start()])
        prev = word.group(1).lower().lstrip("(\"'") if word else ""
        if m.group() == "." and prev in ABBREVIATIONS:
            continue
        cuts.append(m.end())
    for m in re.finditer(r"\n", text):
        cuts.append(m.start())
    ranges = []
    pos = 0
    for cut in sorted(set(cuts)) + [len(text)]:
        chunk = text[pos:cut]
        lead = len(chunk) - len(chunk.lstrip())
        trail = len(chunk.rstrip())
        if trail > lead:
            ranges.append((pos + lead, pos + trail))
        pos = cut
    return ranges


def parse_ann(annotation_text: str) -> list[_TextBound]:
    bounds: dict[str, _TextBound] = {}
    notes: list[tuple[int, str, str]] = []
    for lineno, line in enumerate(annotation_text.splitlines(), 1):
        if not line.strip():
            continue
        kind = line[0]
        if kind == "T":
            m = _T_LINE.match(line)
            if not m:
                raise FormatError(f"line {lineno}: malformed text-bound annotation: {line!r}")
            tid, label, start, end, surface = m.groups()
            if tid in bounds:
                raise FormatError(f"line {lineno}: duplicate annotation id {tid}")
            bounds[tid] = _TextBound(tid, label, int(start), int(end), surface)
        elif kind == "#":
            m = _NOTE_LINE.match(line)
            if m:
                notes.append((lineno, m.group(2), m.group(3)))
            elif not re.match(r"^#\d+\t", line):
                raise FormatError(f"line {lineno}: malformed note: {line!r}")
        elif kind in "ARENM*":
            continue
        else:
            raise FormatError(f"line {lineno}: unrecognized annotation line: {line!r}")
    for lineno, tid, text in notes:
        if tid not in bounds:
            raise FormatError(f"line {lineno}: note refers to unknown annotation {tid}")
        bounds[tid].correction = text
    return list(bounds.values())


def import_brat(
    document_text: str,
    annotation_text: str,
    doc_id: str = "doc",
    stats: Counter | None = None,
) -> list[AnnotatedSentence]:
    """Segment a document and attach its in-scope spans to the sentences they fall in.

    Spans with labels outside the five-tag scheme are dropped and counted in
    ``stats["dropped_tag"]``; exact duplicate spans in ``stats["duplicate_span"]``.
    """
    stats = stats if stats is not None else Counter()
    ranges = segment(document_text)
    per_sentence: list[list[Span]] = [[] for _ in ranges]
    starts = [r[0] for r in ranges]
    dropped = 0
    for tb in parse_ann(annotation_text):
        if not (0 <= tb.start < tb.end <= len(document_text)):
            raise FormatError(f"span {tb.id} offsets {tb.start}:{tb.end} out of document bounds")
        actual = document_text[tb.start : tb.end]
        if actual.replace("\n", " ") != tb.surface.replace("\n", " "):
            raise FormatError(f"span {tb.id}: recorded surface {tb.surface!r} != document text {actual!r}")
        if not ErrorTag.is_valid(tb.label):
            dropped += 1
            stats["dropped_tag"] += 1
            stats[f"dropped_tag:{tb.label}"] += 1
            continue
        k = _find_sentence(starts, tb.start)
        if k is None or not (ranges[k][0] <= tb.start and tb.end <= ranges[k][1]):
            raise FormatError(f"span {tb.id} crosses a sentence boundary")
        off = ranges[k][0]
        span = Span(tb.start - off, tb.end - off, ErrorTag(tb.label), tb.correction)
        if any((s.start, s.end, s.tag) == (span.start, span.end, span.tag) for s in per_sentence[k]):
            stats["duplicate_span"] += 1
            continue
        per_sentence[k].append(span)
        stats["spans"] += 1
    if dropped:
        logger.warning("%s: dropped %d spans with out-of-scope tags", doc_id, dropped)
    return [
        AnnotatedSentence(f"{doc_id}:{k}", document_text[a:b], tuple(spans), "realec", None)
        for k, ((a, b), spans) in enumerate(zip(ranges, per_sentence))
    ]


def _find_sentence(starts: list[int], pos: int) -> int | None:
    k = bisect.bisect_right(starts, pos) - 1
    return k if k >= 0 else None


def import_brat_dir(directory, stats: Counter | None = None) -> list[AnnotatedSentence]:
    """Import every ``name.txt``/``name.ann`` pair in ``directory`` (sorted by name)."""
    directory = Path(directory)
    out = []
    for txt in sorted(directory.glob("*.txt")):
        ann = txt.with_suffix(".ann")
        ann_text = ann.read_text(encoding="utf-8") if ann.exists() else ""
        out.extend(import_brat(txt.read_text(encoding="utf-8"), ann_text, txt.stem, stats))
    return out
