"""Whitespace tokenizer with punctuation peeling and a lexicon-based coarse tagger."""

from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass

from .morphology import VerbTable, default_verb_table

COARSE_POS = ("noun", "verb-past", "verb-base", "verb-3sg", "pronoun", "number", "year", "punct", "other")

PRONOUNS = frozenset(
    """
    i you he she it we they me him us them myself yourself himself herself itself ourselves
    themselves everyone everybody someone somebody anyone anybody nobody something anything
    nothing everything
    """.split()
)

DETERMINERS = frozenset(
    """
    the a an this that these those my your his its our their some any no every each all both
    many much few several most more less such another other
    """.split()
)

FUNCTION_WORDS = frozenset(
    """
    of in on at by for with from to into onto over under between among during about after before
    since until till than as and but or nor so yet while whereas because although though if when
    where whether not also very then there here however only just even still too almost nearly
    approximately around up down out off again what how why which who whom whose been being will
    would shall should can could may might must per via within without across along through
    throughout towards toward against despite above below beyond next last first second third
    same different high low big small large new old good bad main major significant considerable
    steady sharp slight dramatic gradual overall previous following further young elderly total
    average urban rural public private female male social local national global international
    economic
    """.split()
)

NUMBER_WORDS = frozenset(
    """
    zero one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen
    sixteen seventeen eighteen nineteen twenty thirty forty fifty sixty seventy eighty ninety
    hundred thousand million billion half quarter
    """.split()
)

ADJECTIVE_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "ic", "ical")

PAST_AUX = frozenset("was were had did".split())
THIRD_AUX = frozenset("is has does".split())
BASE_AUX = frozenset("am are be have do".split())

_NUMBER_RE = re.compile(r"^\d[\d,.]*(st|nd|rd|th|s)?$")
_WORD_RE = re.compile(r"^[^\W\d_]+(?:['’-][^\W\d_]+)*$")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int
    coarse_pos: str = "other"


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def _split(text: str) -> list[tuple[int, int]]:
    pieces = []
    for m in re.finditer(r"\S+", text):
        start, end = m.span()
        lead = []
        while start < end and _is_punct(text[start]):
            lead.append((start, start + 1))
            start += 1
        trail = []
        while end > start and _is_punct(text[end - 1]):
            trail.append((end - 1, end))
            end -= 1
        pieces.extend(lead)
        if start < end:
            pieces.append((start, end))
        pieces.extend(reversed(trail))
    return pieces


def _tag(surface: str, prev: str | None, verbs: VerbTable) -> str:
    w = surface.lower()
    if all(_is_punct(c) for c in surface):
        return "punct"
    if len(w) == 4 and w.isdigit() and 1000 <= int(w) <= 2099:
        return "year"
    if _NUMBER_RE.match(w) or w in NUMBER_WORDS:
        return "number"
    if w in PRONOUNS:
        return "pronoun"
    if not _WORD_RE.match(surface):
        return "other"
    if w in DETERMINERS or w in FUNCTION_WORDS:
        return "other"
    if prev is not None and prev in DETERMINERS:
        return "noun"
    if w in PAST_AUX:
        return "verb-past"
    if w in THIRD_AUX:
        return "verb-3sg"
    if w in BASE_AUX:
        return "verb-base"
    if w in verbs.past_to_base:
        return "verb-past"
    if w in verbs.third_person_forms:
        return "verb-3sg"
    if w in verbs.bases:
        return "verb-base"
    if verbs.is_past(w):
        return "verb-past"
    if w.endswith("s") and (w[:-1] in verbs.regular or (w.endswith("es") and w[:-2] in verbs.regular)):
        return "verb-3sg"
    if w.endswith("ly") or w.endswith(ADJECTIVE_SUFFIXES):
        return "other"
    return "noun"


def tokenize(text: str, verbs: VerbTable | None = None) -> list[Token]:
    """Split on whitespace, peel edge punctuation into one-character tokens, tag each token."""
    verbs = verbs or default_verb_table()
    tokens = []
    prev = None
    for start, end in _split(text):
        surface = text[start:end]
        pos = _tag(surface, prev, verbs)
        tokens.append(Token(surface, start, end, pos))
        prev = surface.lower()
    return tokens


def read_pretagged(path) -> dict[str, list[Token]]:
    """Read ``sent_id token start end coarse_pos`` TSV rows grouped by sentence id."""
    out: dict[str, list[Token]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            sent_id, surface, start, end, pos = row
            if pos not in COARSE_POS:
                raise ValueError(f"{path}:{lineno}: unknown coarse_pos {pos!r}")
            try:
                tok = Token(surface, int(start), int(end), pos)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: offsets must be integers") from None
            out.setdefault(sent_id, []).append(tok)
    return out


def check_tokens(text: str, tokens: list[Token]) -> None:
    """Raise if ``tokens`` do not match ``text`` (used for pre-tagged input)."""
    last = 0
    for tok in tokens:
        if not (last <= tok.start < tok.end <= len(text)) or text[tok.start : tok.end] != tok.surface:
            raise ValueError(f"token {tok.surface!r} at {tok.start}:{tok.end} does not match the sentence")
        last = tok.end
