"""Regenerate the bundled fixtures under src/l1forge/data/fixtures.

Every expected count in manifest.json comes from this script's own bookkeeping
while it builds the documents, never from running the package's importer or
scorer, so the tests can use the manifest as an independent oracle.

    python3 scripts/make_fixtures.py [--out DIR] [--seed N]
"""

from __future__ import annotations

import argparse
import json
import random
import re
from collections import Counter, defaultdict
from pathlib import Path

TAGS = ["CopyingExpression", "Synonyms", "TenseSemantics", "Transliteration", "WordFormTransmission"]
OUT_OF_SCOPE = ["Spelling", "Articles", "Punctuation"]

# (correction, erroneous surface, frames); "{e}" marks the error slot, never sentence-initial.
ERRORS = {
    "CopyingExpression": [
        ("everyone", "every of us", ["A big bath was prepared for {e}.", "The teacher gave a task to {e} in the class.",
                                     "It is important for {e} to protect nature."]),
        ("make a decision", "accept a decision", ["It is hard to {e} about the future career.",
                                                   "Young people should {e} on their own."]),
        ("take part", "take participation", ["Many students {e} in sports competitions.",
                                             "I want to {e} in this project next year."]),
        ("pay attention", "give attention", ["The government should {e} to this problem.",
                                             "Parents must {e} to the health of children."]),
    ],
    "Synonyms": [
        ("covered", "overcame", ["The distance can be {e} by the train.",
                                 "The tourists {e} twenty kilometres in one day."]),
        ("earn", "win", ["Young specialists {e} less money than older workers.",
                         "It is difficult to {e} enough money in a small town."]),
        ("learn", "study", ["Children {e} a lot from their parents.", "We {e} new things every day at school."]),
        ("say", "tell", ["Some people {e} that money is the main thing in life."]),
    ],
    "TenseSemantics": [
        ("decreased", "decreases", ["In 1999 the share {e}.", "In 2005 the number of visitors {e} slightly."]),
        ("rose", "rises", ["In 2010 the price of oil {e} dramatically."]),
        ("fell", "falls", ["In 1995 the level of unemployment {e} to five percent."]),
        ("grew", "grows", ["The population of the city {e} rapidly in 1980."]),
    ],
    "Transliteration": [
        ("cashier", "cassa", ["And often a lot of money comes to the {e}."]),
        ("hostel", "obshchezhitie", ["Many students live in a {e} during their studies."]),
        ("exam", "ekzamen", ["The final {e} was very difficult for me."]),
        ("notebook", "tetrad", ["Every pupil has a {e} for homework."]),
    ],
    "WordFormTransmission": [
        ("billion", "billions", ["The primary cost was $5 {e}."]),
        ("information", "informations", ["The chart gives {e} about the use of energy."]),
        ("advice", "advices", ["My friends gave me many useful {e}."]),
        ("knowledge", "knowledges", ["Students get new {e} at the university."]),
    ],
}

# Sentences that must appear verbatim in the imported corpus.
PINNED_SENTENCES = [
    ("CopyingExpression", 0, 0),
    ("Synonyms", 0, 0),
    ("TenseSemantics", 0, 0),
    ("Transliteration", 0, 0),
    ("WordFormTransmission", 0, 0),
]

# Two in-scope errors per sentence, as segment lists.
DOUBLE_ERRORS = [
    ["The chart gives ", ("informations", "WordFormTransmission", "information"),
     " about the number of students who ", ("take participation", "CopyingExpression", "take part"), " in sports."],
    ["In 2003 the number of tourists ", ("grows", "TenseSemantics", "grew"), " and many of them lived in a ",
     ("obshchezhitie", "Transliteration", "hostel"), "."],
    ["Workers ", ("win", "Synonyms", "earn"), " more money when they have special ",
     ("knowledges", "WordFormTransmission", "knowledge"), "."],
]

OUT_OF_SCOPE_SENTENCES = [
    ["Many people ", ("recieve", "Spelling", "receive"), " good education in big cities."],
    ["I think that ", ("the", "Articles", None), " nature must be protected by the state."],
    ["Moreover", (" ", "Punctuation", ", "), "the cost of living grows every year in our country."],
]

FILLERS = [
    "This topic is very important in modern society.",
    "There are several reasons for this situation.",
    "Let us consider both points of view.",
    "The graph shows changes in the consumption of energy.",
    "Many experts agree with this opinion.",
    "On the other hand, some people disagree with it.",
    "This problem can be solved in several ways.",
    "The table below presents data about three countries.",
]

SHORT = ["I agree.", "It depends.", "To sum up.", "Why not?"]


def _segments_from_frame(frame: str, correct: str, wrong: str, tag: str, pinned: bool = False) -> list:
    head, tail = frame.split("{e}")
    return [head, (wrong, tag, correct, pinned), tail]


def build_essays(rng: random.Random, n_docs: int = 8):
    """Return {doc: [paragraph [sentence segments]]}."""
    frames = [(tag, c, w, f) for tag in TAGS for c, w, fs in ERRORS[tag] for f in fs]
    docs = {}
    pinned = [_segments_from_frame(ERRORS[t][i][2][j], ERRORS[t][i][0], ERRORS[t][i][1], t, True)
              for t, i, j in PINNED_SENTENCES]
    for d in range(n_docs):
        sentences = []
        if d == 0:
            sentences.extend(pinned)
        picks = rng.sample(frames, 7)
        sentences.extend(_segments_from_frame(f, c, w, t) for t, c, w, f in picks)
        sentences.append(DOUBLE_ERRORS[d % len(DOUBLE_ERRORS)])
        if d % 2 == 0:
            sentences.append(OUT_OF_SCOPE_SENTENCES[(d // 2) % len(OUT_OF_SCOPE_SENTENCES)])
        sentences.extend([f] for f in rng.sample(FILLERS, 2))
        sentences.append([SHORT[d % len(SHORT)]])
        rng.shuffle(sentences)
        cut = len(sentences) // 2
        docs[f"essay{d + 1:02d}"] = [sentences[:cut], sentences[cut:]]
    return docs


def render_essay(doc: str, paragraphs, rng: random.Random, book: dict):
    """Document text, .ann text and per-sentence gold records; updates ``book`` counters."""
    text = ""
    ann_lines = []
    gold = []
    t_id = 0
    note_id = 0
    k = 0
    for p, paragraph in enumerate(paragraphs):
        if p:
            text += "\n"
        for s, segments in enumerate(paragraph):
            if s:
                text += " "
            sent_start = len(text)
            spans = []
            for seg in segments:
                if isinstance(seg, str):
                    text += seg
                    continue
                surface, tag, correction, pinned = seg if len(seg) == 4 else (*seg, False)
                start = len(text)
                text += surface
                t_id += 1
                ann_lines.append(f"T{t_id}\t{tag} {start} {start + len(surface)}\t{surface}")
                # One in-scope span in eight carries no correction note; pinned sentences always do.
                keep_note = correction is not None and (pinned or not (tag in TAGS and rng.random() < 0.125))
                if keep_note:
                    note_id += 1
                    ann_lines.append(f"#{note_id}\tAnnotatorNotes T{t_id}\t{correction}")
                if tag in TAGS:
                    spans.append(
                        {"start": start - sent_start, "end": start - sent_start + len(surface), "tag": tag,
                         "correction": correction if keep_note else None}
                    )
                    if keep_note:
                        book["dictionary"][tag][correction][surface] += 1
                    else:
                        book["no_correction"][tag] += 1
                else:
                    book["dropped"][tag] += 1
            sentence = text[sent_start:]
            is_short = len(segments) == 1 and segments[0] in SHORT
            gold.append({"id": f"{doc}:{k}", "text": sentence, "spans": spans, "short": is_short})
            k += 1
    # All T-lines first, then the notes.
    t_lines = [ln for ln in ann_lines if ln.startswith("T")]
    n_lines = [ln for ln in ann_lines if ln.startswith("#")]
    return text + "\n", "\n".join(t_lines + n_lines) + "\n", gold


def make_predictions(gold_sentences, rng: random.Random):
    """Perturb gold spans and record the expected per-tag TP/FP/FN for both matching modes."""
    expected = {m: {t: Counter() for t in TAGS} for m in ("strict", "overlap")}
    records = []
    for g in gold_sentences:
        if g["short"]:
            continue
        text = g["text"]
        pred = []
        taken = {(sp["start"], sp["end"], sp["tag"]) for sp in g["spans"]}
        for sp in g["spans"]:
            tag = sp["tag"]
            r = rng.random()
            if r < 0.55:
                pred.append((sp["start"], sp["end"], tag))
                for m in expected:
                    expected[m][tag]["tp"] += 1
            elif r < 0.70:
                for m in expected:
                    expected[m][tag]["fn"] += 1
            elif r < 0.85 and sp["start"] > 0:
                pred.append((sp["start"] - 1, sp["end"], tag))
                expected["strict"][tag]["fp"] += 1
                expected["strict"][tag]["fn"] += 1
                expected["overlap"][tag]["tp"] += 1
            else:
                other = rng.choice([t for t in TAGS if t != tag and (sp["start"], sp["end"], t) not in taken])
                pred.append((sp["start"], sp["end"], other))
                for m in expected:
                    expected[m][tag]["fn"] += 1
                    expected[m][other]["fp"] += 1
        if rng.random() < 0.25:
            first_end = text.index(" ")
            clash = any(s < first_end for s, _, _ in pred) or any(sp["start"] < first_end for sp in g["spans"])
            if not clash:
                tag = rng.choice(TAGS)
                pred.append((0, first_end, tag))
                for m in expected:
                    expected[m][tag]["fp"] += 1
        records.append(
            {
                "id": g["id"],
                "text": text,
                "source": "realec",
                "split": None,
                "spans": [{"start": s, "end": e, "tag": t, "correction": None} for s, e, t in sorted(pred)],
            }
        )
    return records, {m: {t: dict(c) for t, c in per.items()} for m, per in expected.items()}


# ---------------------------------------------------------------------------
# Clean corpus


YEAR_NOUNS = ["share", "number of cars", "price of bread", "level of crime", "rate of inflation", "income",
              "population", "amount of waste", "percentage of smokers", "demand for housing"]
PLURAL_NOUNS = ["prices", "sales", "exports", "wages", "profits", "rents", "imports", "costs"]
PAST_VERBS = ["decreased", "increased", "fell", "rose", "grew", "dropped", "declined", "doubled", "peaked", "improved"]
ADVERBS = ["sharply", "slightly", "steadily", "considerably", "dramatically", "gradually"]
PLACES = ["in Europe", "in the capital", "in rural areas", "across the country", "in most regions"]

LEX_PREDICATES = ["was closed on Sunday", "is next to the station", "was very busy yesterday",
                  "opens early in the morning", "needs some repairs", "looks quite modern",
                  "was mentioned in the report", "became popular last summer"]

OPENERS = ["In my view", "As a rule", "Nowadays", "Of course", "Today", "Usually", "In many countries",
           "As far as I know", "Surprisingly", "In general", "In fact", "Clearly", "Sometimes"]

GEN_SUBJECTS = ["Many people", "Most students", "Some teachers", "Young families", "Local shops", "Our neighbours",
                "Small companies", "City residents", "Older workers", "Foreign visitors"]
GEN_VERBS = ["prefer", "need", "support", "discuss", "choose", "visit", "avoid", "recommend"]
GEN_OBJECTS = ["public transport", "healthy food", "online courses", "new technologies", "local products",
               "quiet places", "green parks", "cheap flights", "long holidays", "modern museums"]
GEN_ADJUNCTS = ["in big cities", "every weekend", "for practical reasons", "during the winter", "after work",
                "without any doubt", "in their free time", "more and more often"]

# Clean frames for suggestion keys that have no frame in ERRORS.
EXTRA_KEY_FRAMES = {"money": ["People spend too much money on clothes.", "Not everything can be bought with money."]}

SHORT_SUBJECTS = ["Prices", "Sales", "Costs", "People", "Students", "Rents", "Exports", "Imports", "Wages", "Profits"]
SHORT_VERBS = ["fell", "rose", "grew", "changed", "varied", "doubled"]


def _unique(rng, make, n, seen, attempts=100_000):
    out = []
    while len(out) < n:
        attempts -= 1
        if attempts < 0:
            raise RuntimeError(f"template space exhausted after {len(out)} of {n} sentences")
        s = make(rng)
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def build_clean(rng: random.Random, lexicon_nouns: list[str], suggestion_keys: list[str]):
    seen = set()
    groups = {}
    # Short sentences: "<Subj> <verb>." is three tokens, "<Subj> <verb> again." four.
    short = [f"{s} {v}." for s in SHORT_SUBJECTS for v in SHORT_VERBS[:4]]
    short += [f"{s} {v} again." for s in SHORT_SUBJECTS[:5] for v in SHORT_VERBS[4:]]
    seen.update(short)
    groups["short"] = short

    def year_sentence(r):
        y = r.randint(1960, 2019)
        k = r.randrange(5)
        if k == 0:
            return f"In {y} the {r.choice(YEAR_NOUNS)} {r.choice(PAST_VERBS)} {r.choice(ADVERBS)}."
        if k == 1:
            return f"The {r.choice(YEAR_NOUNS)} {r.choice(PAST_VERBS)} {r.choice(ADVERBS)} in {y}."
        if k == 2:
            return f"In {y} {r.choice(PLURAL_NOUNS)} {r.choice(PAST_VERBS)} {r.choice(ADVERBS)} {r.choice(PLACES)}."
        if k == 3:
            return f"Between {y - 10} and {y} the {r.choice(YEAR_NOUNS)} {r.choice(PAST_VERBS)} {r.choice(ADVERBS)}."
        return f"In {y}, the {r.choice(YEAR_NOUNS)} {r.choice(PAST_VERBS)} {r.choice(ADVERBS)}."

    seen.add("In 1999 the share decreased.")
    groups["year"] = ["In 1999 the share decreased."] + _unique(rng, year_sentence, 299, seen)
    groups["lexicon"] = _unique(
        rng, lambda r: f"The {r.choice(lexicon_nouns)} {r.choice(LEX_PREDICATES)}.", 150, seen
    )

    frames = [f.replace("{e}", c) for t in TAGS for c, _, fs in ERRORS[t] for f in fs if t != "TenseSemantics"]
    frames += [f for k in suggestion_keys for f in EXTRA_KEY_FRAMES[k]]

    def key_sentence(r):
        f = r.choice(frames)
        return f"{r.choice(OPENERS)}, {f[0].lower()}{f[1:]}"

    groups["dictionary"] = _unique(rng, key_sentence, 250, seen)
    groups["generic"] = _unique(
        rng,
        lambda r: f"{r.choice(GEN_SUBJECTS)} {r.choice(GEN_VERBS)} {r.choice(GEN_OBJECTS)} {r.choice(GEN_ADJUNCTS)}.",
        1000 - sum(len(g) for g in groups.values()),
        seen,
    )
    texts = [(name, t) for name, g in groups.items() for t in g]
    rng.shuffle(texts)
    records = [
        {"id": f"clean-{i:04d}", "text": t, "source": "ppo", "split": None, "spans": []}
        for i, (_, t) in enumerate(texts)
    ]
    counts = {name: len(g) for name, g in groups.items()}
    short_ids = sorted(r["id"] for r, (name, _) in zip(records, texts) if name == "short")
    return records, counts, short_ids


# ---------------------------------------------------------------------------
# Learner-like corpus


_MARK = re.compile(r"\[([^|\]]+)\|([^|\]]+)\|([^\]]+)\]")


def build_learner(bank: Path):
    """Hand-written learner-style sentences; ``[wrong|Tag|correct]`` becomes a span."""
    records = []
    for line in bank.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        text = ""
        spans = []
        pos = 0
        for m in _MARK.finditer(line):
            text += line[pos : m.start()]
            wrong, tag, correct = m.groups()
            assert tag in TAGS, tag
            spans.append({"start": len(text), "end": len(text) + len(wrong), "tag": tag, "correction": correct})
            text += wrong
            pos = m.end()
        text += line[pos:]
        records.append(
            {"id": f"learner-{len(records):03d}", "text": text, "source": "realec", "split": None, "spans": spans}
        )
    return records


# ---------------------------------------------------------------------------


SUGGESTIONS = [
    ("Synonyms", "covered", "passed", 2),
    ("Synonyms", "earn", "gain", 1),
    ("CopyingExpression", "everyone", "all of us", 1),
    ("CopyingExpression", "pay attention", "turn attention", 3),
    ("Transliteration", "cashier", "kassa", 1),
    ("WordFormTransmission", "money", "moneys", 1),
]


def write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src/l1forge/data/fixtures")
    ap.add_argument("--seed", type=int, default=20240701)
    args = ap.parse_args(argv)
    rng = random.Random(args.seed)
    out = args.out
    (out / "realec").mkdir(parents=True, exist_ok=True)
    for old in (out / "realec").glob("*"):
        old.unlink()

    book = {
        "dictionary": {t: defaultdict(Counter) for t in TAGS},
        "no_correction": Counter(),
        "dropped": Counter(),
    }
    gold = []
    for doc, paragraphs in build_essays(rng).items():
        txt, ann, sentences = render_essay(doc, paragraphs, rng, book)
        (out / "realec" / f"{doc}.txt").write_text(txt, encoding="utf-8")
        (out / "realec" / f"{doc}.ann").write_text(ann, encoding="utf-8")
        gold.extend(sentences)

    kept = [g for g in gold if not g["short"]]
    spans = Counter(sp["tag"] for g in kept for sp in g["spans"])
    with_tag = Counter(t for g in kept for t in {sp["tag"] for sp in g["spans"]})
    predictions, expected = make_predictions(gold, rng)
    write_jsonl(out / "predictions.jsonl", predictions)

    with open(out / "suggestions.tsv", "w", encoding="utf-8") as fh:
        fh.write("# tag\tcorrect\terroneous\tcount\n")
        for tag, c, w, n in SUGGESTIONS:
            fh.write(f"{tag}\t{c}\t{w}\t{n}\n" if n != 1 else f"{tag}\t{c}\t{w}\n")

    lexicon_path = Path(__file__).resolve().parents[1] / "src" / "l1forge" / "data" / "noun_lexicon.tsv"
    lexicon_nouns = sorted(
        ln.split("\t")[0] for ln in lexicon_path.read_text(encoding="utf-8").splitlines()
        if ln.strip() and not ln.startswith("#") and " " not in ln.split("\t")[0]
    )
    clean, clean_counts, short_ids = build_clean(rng, lexicon_nouns, sorted({c for _, c, _, _ in SUGGESTIONS} - {
        c for t in TAGS for c, _, _ in ERRORS[t]}))
    write_jsonl(out / "clean.jsonl", clean)
    learner = build_learner(Path(__file__).with_name("learner_bank.txt"))
    write_jsonl(out / "learner.jsonl", learner)

    manifest = {
        "realec": {
            "documents": len(list((out / "realec").glob("*.txt"))),
            "sentences": len(gold),
            "short_sentences": len(gold) - len(kept),
            "sentences_after_filter": len(kept),
            "spans_per_tag": {t: spans[t] for t in TAGS},
            "sentences_per_tag": {t: with_tag[t] for t in TAGS},
            "dropped_tags": dict(sorted(book["dropped"].items())),
            "spans_without_correction": {t: book["no_correction"][t] for t in TAGS},
            "dictionary": {
                t: {c: dict(sorted(v.items())) for c, v in sorted(book["dictionary"][t].items())} for t in TAGS
            },
        },
        "predictions": {"expected": expected},
        "suggestions": [list(row) for row in SUGGESTIONS],
        "clean": {"sentences": len(clean), "groups": clean_counts, "short_ids": short_ids},
        "learner": {"sentences": len(learner)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote fixtures to {out}")


if __name__ == "__main__":
    main()
