"""Rule-based error injection: dictionary replacement, tense shift, transliteration."""

from __future__ import annotations

import os
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import AnnotatedSentence, Corpus, ErrorTag, Span
from .dictionary import ErrorDictionary, normalize_key
from .morphology import VerbTable, default_verb_table, to_present_simple
from .tokenize import Token, tokenize
from .translit import default_table, transliterate

CLAUSE_PUNCT = frozenset(",;:.!?")
CLAUSE_CONJ = frozenset("and but or while whereas".split())
AUXILIARIES = frozenset(
    """
    am is are was were be been being has have had do does did will would shall should can could
    may might must to
    """.split()
)
PLURAL_PRONOUNS = frozenset("we they you".split())
SINGULAR_IN_S = frozenset(
    """
    news analysis basis crisis thesis emphasis series species means physics economics mathematics
    politics statistics gas bus class glass process success business access address progress
    status census bonus campus virus focus plus
    """.split()
)
IRREGULAR_PLURALS = frozenset("people children men women police data media teeth feet mice cattle".split())


def sentence_rng(seed: int, index: int) -> random.Random:
    """Per-sentence generator: seed xor sentence index."""
    return random.Random(seed ^ index)


def _match_case(original: str, replacement: str) -> str:
    if original[:1].isupper() and replacement[:1].islower():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _overlaps(sentence: AnnotatedSentence, start: int, end: int) -> bool:
    return any(sp.start < end and start < sp.end for sp in sentence.spans)


def replace_region(
    sentence: AnnotatedSentence, start: int, end: int, new_text: str, tag: ErrorTag, correction: str
) -> AnnotatedSentence:
    """Substitute ``text[start:end]`` and record the substitution as a new span."""
    if _overlaps(sentence, start, end):
        raise ValueError(f"region {start}:{end} overlaps an existing span")
    delta = len(new_text) - (end - start)
    text = sentence.text[:start] + new_text + sentence.text[end:]
    spans = [sp if sp.end <= start else sp.shifted(delta) for sp in sentence.spans]
    spans.append(Span(start, start + len(new_text), tag, correction))
    return replace(sentence, text=text, spans=tuple(spans))


# ---------------------------------------------------------------------------
# Dictionary replacement


def dictionary_sites(
    sentence: AnnotatedSentence, dictionary: ErrorDictionary, tokens: Sequence[Token] | None = None
) -> list[tuple[int, int]]:
    """Character ranges matching dictionary keys, scanned left to right, longest key first."""
    tokens = tokens if tokens is not None else tokenize(sentence.text)
    text = sentence.text
    longest = dictionary.max_key_words
    sites = []
    i = 0
    while i < len(tokens):
        for n in range(min(longest, len(tokens) - i), 0, -1):
            start, end = tokens[i].start, tokens[i + n - 1].end
            if normalize_key(text[start:end]) in dictionary.entries and not _overlaps(sentence, start, end):
                sites.append((start, end))
                i += n
                break
        else:
            i += 1
    return sites


def inject_dictionary(
    sentence: AnnotatedSentence,
    dictionary: ErrorDictionary | Sequence[ErrorDictionary],
    rng: random.Random,
    tokens: Sequence[Token] | None = None,
) -> AnnotatedSentence | None:
    """Replace one dictionary key occurrence by an erroneous variant.

    Given several dictionaries, the site is drawn uniformly over the sites of all
    of them and tagged with the tag of the dictionary it came from.
    """
    dictionaries = [dictionary] if isinstance(dictionary, ErrorDictionary) else list(dictionary)
    tokens = tokens if tokens is not None else tokenize(sentence.text)
    candidates = [(s, e, d) for d in dictionaries for s, e in dictionary_sites(sentence, d, tokens)]
    if not candidates:
        return None
    start, end, d = candidates[rng.randrange(len(candidates))]
    original = sentence.text[start:end]
    variants = d.lookup(original)
    forms = [f for f, _ in variants]
    weights = [c for _, c in variants]
    wrong = rng.choices(forms, weights=weights)[0]
    return replace_region(sentence, start, end, _match_case(original, wrong), d.tag, original)


# ---------------------------------------------------------------------------
# Tense shift


def clause_ids(tokens: Sequence[Token]) -> list[int | None]:
    """Clause index per token; boundary tokens get ``None``."""
    out = []
    clause = 0
    for tok in tokens:
        if tok.surface in CLAUSE_PUNCT or tok.surface.lower() in CLAUSE_CONJ:
            out.append(None)
            clause += 1
        else:
            out.append(clause)
    return out


def _governed_by_of(tokens: Sequence[Token], i: int) -> bool:
    j = i - 1
    steps = 0
    while j >= 0 and steps < 3 and tokens[j].coarse_pos in ("other", "number") and tokens[j].surface.lower() != "of":
        j -= 1
        steps += 1
    return j >= 0 and tokens[j].surface.lower() == "of"


def subject_number(tokens: Sequence[Token], verb_index: int) -> str:
    """``singular``, ``plural`` or ``first`` from the nearest preceding noun or pronoun.

    Nouns inside an ``of`` phrase ("the share of people") are skipped.
    """
    for j in range(verb_index - 1, -1, -1):
        tok = tokens[j]
        w = tok.surface.lower()
        if tok.coarse_pos == "pronoun":
            if w in PLURAL_PRONOUNS:
                return "plural"
            return "first" if w == "i" else "singular"
        if tok.coarse_pos == "noun":
            if _governed_by_of(tokens, j):
                continue
            if w in IRREGULAR_PLURALS:
                return "plural"
            if w.endswith("s") and not w.endswith(("ss", "us", "is")) and w not in SINGULAR_IN_S:
                return "plural"
            return "singular"
    return "singular"


def tense_candidates(
    sentence: AnnotatedSentence, tokens: Sequence[Token], verbs: VerbTable
) -> list[tuple[int, list[int]]]:
    """For each year token, the nearest eligible past verbs in its clause."""
    clauses = clause_ids(tokens)
    out = []
    for y, tok in enumerate(tokens):
        if tok.coarse_pos != "year" or clauses[y] is None:
            continue
        eligible = []
        for v, vt in enumerate(tokens):
            if vt.coarse_pos != "verb-past" or clauses[v] != clauses[y]:
                continue
            if v > 0 and tokens[v - 1].surface.lower() in AUXILIARIES:
                continue
            if _overlaps(sentence, vt.start, vt.end) or not verbs.is_past(vt.surface):
                continue
            new = to_present_simple(vt.surface, subject_number(tokens, v), verbs)
            if new.lower() == vt.surface.lower():
                continue
            eligible.append(v)
        if eligible:
            best = min(abs(v - y) for v in eligible)
            out.append((y, [v for v in eligible if abs(v - y) == best]))
    return out


def inject_tense(
    sentence: AnnotatedSentence,
    rng: random.Random,
    tokens: Sequence[Token] | None = None,
    verbs: VerbTable | None = None,
) -> AnnotatedSentence | None:
    """Shift the past verb nearest to a year (same clause) into the present simple."""
    verbs = verbs or default_verb_table()
    tokens = tokens if tokens is not None else tokenize(sentence.text, verbs)
    candidates = tense_candidates(sentence, tokens, verbs)
    if not candidates:
        return None
    _, nearest = candidates[rng.randrange(len(candidates))]
    v = nearest[rng.randrange(len(nearest))]
    tok = tokens[v]
    new = to_present_simple(tok.surface, subject_number(tokens, v), verbs)
    return replace_region(sentence, tok.start, tok.end, new, ErrorTag.TENSE_SEMANTICS, tok.surface)


# ---------------------------------------------------------------------------
# Transliteration


def inject_transliteration(
    sentence: AnnotatedSentence,
    lexicon: Mapping[str, str],
    table: Mapping[str, str] | None,
    rng: random.Random,
    tokens: Sequence[Token] | None = None,
) -> AnnotatedSentence | None:
    """Replace one lexicon noun by the romanized form of its Russian equivalent."""
    table = table if table is not None else default_table()
    tokens = tokens if tokens is not None else tokenize(sentence.text)
    sites = []
    for tok in tokens:
        if tok.coarse_pos != "noun" or _overlaps(sentence, tok.start, tok.end):
            continue
        russian = lexicon.get(tok.surface.lower())
        if not russian:
            continue
        latin = _match_case(tok.surface, transliterate(russian, table))
        if latin and latin.lower() != tok.surface.lower():
            sites.append((tok, latin))
    if not sites:
        return None
    tok, latin = sites[rng.randrange(len(sites))]
    return replace_region(sentence, tok.start, tok.end, latin, ErrorTag.TRANSLITERATION, tok.surface)


# ---------------------------------------------------------------------------
# Sentence-initial word sampling


@dataclass(frozen=True)
class FirstWordTable:
    entries: tuple[tuple[str, int], ...]

    def probabilities(self) -> dict[str, float]:
        total = sum(f for _, f in self.entries)
        return {w: f / total for w, f in self.entries}


def build_first_word_table(sentences: Iterable[AnnotatedSentence | str]) -> FirstWordTable:
    counts = Counter()
    for s in sentences:
        text = s if isinstance(s, str) else s.text
        words = [t for t in tokenize(text) if t.coarse_pos != "punct"]
        if words:
            counts[words[0].surface] += 1
    if not counts:
        raise ValueError("cannot build a first-word table from an empty corpus")
    return FirstWordTable(tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))))


def sample_first_word(table: FirstWordTable, rng: random.Random) -> str:
    if not table.entries:
        raise ValueError("first-word table is empty")
    words = [w for w, _ in table.entries]
    return rng.choices(words, weights=[f for _, f in table.entries])[0]


# ---------------------------------------------------------------------------
# Batch driver


def inject_corpus(
    corpus: Corpus,
    injector: Callable[[AnnotatedSentence, random.Random], AnnotatedSentence | None],
    seed: int,
    threads: int | None = None,
    stats: Counter | None = None,
    **provenance,
) -> Corpus:
    """Apply ``injector`` to every sentence with its own generator; keep the sentences it fired on."""
    stats = stats if stats is not None else Counter()
    threads = threads or int(os.environ.get("L1FORGE_THREADS", "1") or 1)

    def one(item):
        i, s = item
        return injector(s, sentence_rng(seed, i))

    items = list(enumerate(corpus.sentences))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    fired = [replace(r, source="rule") for r in results if r is not None]
    stats["input"] += len(items)
    stats["fired"] += len(fired)
    return corpus.derive(fired, inject={"seed": seed, **provenance})
