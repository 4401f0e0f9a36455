"""English verb tables and past -> present simple rewriting."""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

VOWELS = set("aeiou")

# Words ending in -ed that are not past-tense verbs.
ED_STOPLIST = frozenset(
    """
    bed red wed shed fed led bred need seed speed feed breed bleed weed greed deed
    indeed exceed proceed succeed hundred sacred naked wicked kindred hatred rugged
    ragged beloved aged based alleged skilled talented gifted unemployed retired
    advanced detailed limited varied
    """.split()
)

# Doubled final consonants that belong to the base form.
KEEP_DOUBLE = frozenset("add odd ebb egg err purr butt inn".split())

# -ll verbs whose base keeps the double l despite several syllables.
KEEP_LL = frozenset("install recall fulfill enroll instill appall forestall befall".split())


@dataclass
class VerbTable:
    """Irregular forms plus a lexicon of regular base forms."""

    past_to_base: dict[str, str] = field(default_factory=dict)
    third_person: dict[str, str] = field(default_factory=dict)
    regular: frozenset[str] = frozenset()

    @property
    def bases(self) -> set[str]:
        return set(self.third_person) | set(self.regular)

    @property
    def third_person_forms(self) -> set[str]:
        return set(self.third_person.values())

    def is_past(self, word: str) -> bool:
        w = word.lower()
        if w in self.past_to_base:
            return True
        return _looks_regular_past(w)

    def base_of(self, past: str) -> str:
        w = past.lower()
        if w in self.past_to_base:
            return self.past_to_base[w]
        if not _looks_regular_past(w):
            raise ValueError(f"not a recognizable past-tense form: {past!r}")
        return _regular_base(w, self.regular)

    def third_person_of(self, base: str) -> str:
        b = base.lower()
        if b in self.third_person:
            return self.third_person[b]
        return third_person_singular(b)


def _looks_regular_past(w: str) -> bool:
    return len(w) >= 4 and w.isalpha() and w.endswith("ed") and w not in ED_STOPLIST


def _vowel_groups(s: str) -> int:
    return len(re.findall(r"[aeiouy]+", s))


def _needs_e(stem: str) -> bool:
    """Guess whether a stripped -ed stem lost a silent final e."""
    if not stem:
        return False
    last = stem[-1]
    if last in "vcuz":
        return True
    if last == "s":
        if stem.endswith("ss"):
            return False
        return not stem.endswith(("cus", "bus"))
    if stem.endswith(("ang", "eng", "dg", "rg", "ag")):
        return True
    if last == "l" and len(stem) > 1 and stem[-2] not in VOWELS and stem[-2] not in "lr":
        return True
    if len(stem) < 2 or last in "wxyh":
        return False
    pre = stem[-2]
    before = stem[-3] if len(stem) > 2 else ""
    if pre not in VOWELS or before in VOWELS:
        if stem.endswith(("uat", "iat")):
            return True
        return False
    # consonant-vowel-consonant ending
    if _vowel_groups(stem) == 1:
        return True
    if stem.endswith(("at", "ut", "ot", "in")):
        return True
    if last in "dkmb":
        return True
    if last == "r" and pre != "e":
        return True
    return False


def _regular_base(w: str, lexicon: frozenset[str]) -> str:
    if w.endswith("ied") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("eed"):
        return w[:-1]
    stem = w[:-2]
    doubled = len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in VOWELS
    undoubled = stem[:-1] if doubled else None
    for cand in (undoubled, stem, stem + "e"):
        if cand and cand in lexicon:
            return cand
    if doubled:
        letter = stem[-1]
        if stem in KEEP_DOUBLE or stem in KEEP_LL or letter in "sfz":
            return stem
        if letter == "l" and _vowel_groups(undoubled) < 2:
            return stem
        return undoubled
    return stem + "e" if _needs_e(stem) else stem


def third_person_singular(base: str) -> str:
    if base.endswith(("s", "x", "z", "ch", "sh", "o")):
        return base + "es"
    if len(base) > 1 and base.endswith("y") and base[-2] not in VOWELS:
        return base[:-1] + "ies"
    return base + "s"


def _match_case(template: str, word: str) -> str:
    if template[:1].isupper() and not template.isupper():
        return word[:1].upper() + word[1:]
    if template.isupper() and len(template) > 1:
        return word.upper()
    return word


def to_present_simple(verb: str, subject_number: str = "singular", table: VerbTable | None = None) -> str:
    """Rewrite a past-tense verb to the present simple.

    ``subject_number`` is ``"singular"`` (third person), ``"plural"`` or ``"first"``
    (first person singular, which only differs for *be*).
    """
    if subject_number not in ("singular", "plural", "first"):
        raise ValueError(f"unknown subject number {subject_number!r}")
    table = table or default_verb_table()
    base = table.base_of(verb)
    if base == "be":
        form = {"singular": "is", "plural": "are", "first": "am"}[subject_number]
    elif subject_number == "singular":
        form = table.third_person_of(base)
    else:
        form = base
    return _match_case(verb, form)


def _read_rows(path) -> list[list[str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 3 or not all(c.strip() for c in cols):
                raise ValueError(f"{path}:{lineno}: expected base<TAB>past<TAB>third_person_singular")
            rows.append([c.strip().lower() for c in cols])
    return rows


def load_verb_table(irregular_path: str | Path | None = None) -> VerbTable:
    """Load an irregular-verb TSV (``base past third_person_singular``).

    The bundled regular-verb lexicon is always attached.
    """
    data = resources.files("l1forge") / "data"
    if irregular_path is None:
        irregular_path = data / "irregular_verbs.tsv"
    table = VerbTable()
    for base, past, third in _read_rows(irregular_path):
        table.past_to_base.setdefault(past, base)
        table.third_person.setdefault(base, third)
    words = (data / "regular_verbs.txt").read_text(encoding="utf-8")
    table.regular = frozenset(
        w for line in words.splitlines() if not line.startswith("#") for w in line.split()
    )
    return table


@functools.lru_cache(maxsize=1)
def default_verb_table() -> VerbTable:
    return load_verb_table()
