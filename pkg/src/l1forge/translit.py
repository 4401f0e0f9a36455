"""Russian Cyrillic -> Latin transliteration and the English -> Russian noun lexicon."""

from __future__ import annotations

import unicodedata
from importlib import resources

# Passport-style romanization, lowercase; uppercase forms are derived.
LOWER = {
    "а": "a", "б": "b", "в": "v", "г": "g", "д": "d", "е": "e", "ё": "e", "ж": "zh",
    "з": "z", "и": "i", "й": "i", "к": "k", "л": "l", "м": "m", "н": "n", "о": "o",
    "п": "p", "р": "r", "с": "s", "т": "t", "у": "u", "ф": "f", "х": "kh", "ц": "ts",
    "ч": "ch", "ш": "sh", "щ": "shch", "ъ": "", "ы": "y", "ь": "", "э": "e", "ю": "yu",
    "я": "ya",
}  # fmt: skip

# Non-Russian Cyrillic letters that may turn up in learner text.
EXTRA = {"і": "i", "ї": "yi", "є": "ye", "ґ": "g", "ў": "u", "ј": "j", "љ": "lj", "њ": "nj", "џ": "dz"}


def default_table() -> dict[str, str]:
    table = {}
    for cyr, lat in {**LOWER, **EXTRA}.items():
        table[cyr] = lat
        table[cyr.upper()] = lat[:1].upper() + lat[1:]
    return table


def is_cyrillic(ch: str) -> bool:
    return "CYRILLIC" in unicodedata.name(ch, "")


def transliterate(text: str, table: dict[str, str] | None = None) -> str:
    """Letterwise romanization; characters outside the table pass through, other Cyrillic is dropped."""
    table = table if table is not None else default_table()
    out = []
    for ch in text:
        if ch in table:
            out.append(table[ch])
        elif is_cyrillic(ch):
            continue
        else:
            out.append(ch)
    return "".join(out)


def load_table(path) -> dict[str, str]:
    """Override table: ``cyrillic latin`` TSV merged over the default table."""
    table = default_table()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2 or len(cols[0]) != 1 or not is_cyrillic(cols[0]):
                raise ValueError(f"{path}:{lineno}: expected <cyrillic letter>\\t<latin>")
            if any(is_cyrillic(c) for c in cols[1]):
                raise ValueError(f"{path}:{lineno}: replacement must not contain Cyrillic")
            table[cols[0]] = cols[1]
    return table


def load_lexicon(path=None) -> dict[str, str]:
    """``english_noun russian_noun`` TSV; defaults to the bundled lexicon."""
    if path is None:
        path = resources.files("l1forge") / "data" / "noun_lexicon.tsv"
    lexicon = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0].strip():
                raise ValueError(f"{path}:{lineno}: expected <english>\\t<russian>")
            if not any(is_cyrillic(c) for c in cols[1]):
                raise ValueError(f"{path}:{lineno}: Russian form has no Cyrillic letters")
            lexicon[cols[0].strip().lower()] = cols[1].strip()
    return lexicon
