"""Acceptance criteria, one test per criterion.

Each test is tagged with ``@pytest.mark.criterion``; the terminal summary prints a
PASS/FAIL line for every criterion (see conftest.py).
"""

import hashlib
import itertools
import json
import random
import time
from collections import Counter
from fractions import Fraction

import pytest

from helpers import check_injection, has_year
from l1forge.brat import import_brat_dir
from l1forge.cli import run
from l1forge.corpus import (
    AnnotatedSentence,
    Corpus,
    ErrorTag,
    Span,
    filter_min_tokens,
    read_corpus,
    split_corpus,
    split_size,
)
from l1forge.dictionary import build_dictionary, merge_suggestions
from l1forge.injectors import inject_corpus, inject_dictionary, inject_tense, inject_transliteration
from l1forge.llm import (
    GenerationJob,
    dedup_near_duplicates,
    generate_batch,
    parse_annotated_output,
    render_markup,
)
from l1forge.metrics import ngram_novelty, pairwise_kappa, self_bleu, span_f1
from l1forge.mock_server import MockChatServer
from l1forge.translit import load_lexicon

CE, SY, TS, TR, WF = (
    ErrorTag.COPYING_EXPRESSION,
    ErrorTag.SYNONYMS,
    ErrorTag.TENSE_SEMANTICS,
    ErrorTag.TRANSLITERATION,
    ErrorTag.WORD_FORM_TRANSMISSION,
)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# ---------------------------------------------------------------------------
# 1


FILLER = "Students wrote essays about the graphs and tables in the exam room."

# (gold spans, predicted spans) per sentence, spans as (start, end, tag)
HAND_SET = [
    ([(4, 12, CE)], [(4, 12, CE)]),
    ([(13, 17, SY)], []),
    ([], [(0, 3, TS)]),
    ([(4, 12, TR)], [(4, 13, TR)]),
    ([(4, 12, WF)], [(4, 12, CE)]),
    ([(0, 3, TS), (20, 25, TS)], [(0, 3, TS), (21, 25, TS)]),
    ([(5, 9, SY)], [(5, 9, SY)]),
    ([(5, 9, CE), (30, 40, WF)], [(5, 9, CE), (30, 40, WF)]),
    ([(10, 15, TR)], [(10, 15, TR), (20, 22, TR)]),
    ([(10, 15, TS)], [(10, 15, TS)]),
    ([(0, 3, CE)], []),
    ([(8, 14, SY)], [(8, 14, TR)]),
    ([(8, 14, WF)], [(8, 14, WF)]),
    ([], []),
    ([(2, 6, TS), (2, 6, SY)], [(2, 6, TS), (2, 6, SY)]),
    ([(30, 35, CE)], [(30, 35, CE)]),
    ([(12, 20, TR)], [(12, 20, TR)]),
    ([(40, 45, WF)], [(41, 45, WF)]),
    ([(1, 4, SY)], [(1, 4, SY), (6, 9, SY)]),
    ([(25, 30, TS)], [(25, 30, TS)]),
]
# counted by hand from HAND_SET: tag -> (TP, FP, FN)
HAND_COUNTS = {CE: (3, 1, 1), SY: (3, 1, 2), TS: (4, 2, 1), TR: (2, 3, 1), WF: (2, 1, 2)}


def hand_corpora():
    gold, pred = [], []
    for i, (g, p) in enumerate(HAND_SET):
        gold.append(AnnotatedSentence(f"h{i:02d}", FILLER, tuple(Span(a, b, t) for a, b, t in g)))
        pred.append(AnnotatedSentence(f"h{i:02d}", FILLER, tuple(Span(a, b, t) for a, b, t in p)))
    return Corpus(tuple(gold)), Corpus(tuple(pred))


def hand_prf(tp, fp, fn):
    p = Fraction(100 * tp, tp + fp)
    r = Fraction(100 * tp, tp + fn)
    return p, r, 2 * p * r / (p + r)


@pytest.mark.criterion(1, "span-F1 oracle equivalence")
def test_criterion_1_span_f1():
    with Timer() as t:
        gold, pred = hand_corpora()
        report = span_f1(gold, pred, "strict")
        for tag, (tp, fp, fn) in HAND_COUNTS.items():
            score = report.per_tag[tag.value]
            assert (score.tp, score.fp, score.fn) == (tp, fp, fn), tag
            p, r, f = hand_prf(tp, fp, fn)
            assert (score.precision, score.recall, score.f1) == (float(p), float(r), float(f)), tag
        macro = sum(hand_prf(*c)[2] for c in HAND_COUNTS.values()) / 5
        assert report.macro_f1 == float(macro)

        perfect = span_f1(gold, gold)
        for tag in ErrorTag:
            s = perfect.per_tag[tag.value]
            assert (s.precision, s.recall, s.f1) == (100.0, 100.0, 100.0)

        swapped = span_f1(pred, gold)
        for tag in ErrorTag:
            a, b = report.per_tag[tag.value], swapped.per_tag[tag.value]
            assert (a.precision, a.recall) == (b.recall, b.precision)
    assert t.elapsed < 1.0


# ---------------------------------------------------------------------------
# 2


def brute_kappa(a, b):
    """Kappa from the full contingency table, in exact arithmetic."""
    n = len(a)
    labels = sorted(set(a) | set(b))
    table = {(x, y): 0 for x in labels for y in labels}
    for x, y in zip(a, b):
        table[(x, y)] += 1
    p_o = Fraction(sum(table[(x, x)] for x in labels), n)
    rows = {x: sum(table[(x, y)] for y in labels) for x in labels}
    cols = {y: sum(table[(x, y)] for x in labels) for y in labels}
    p_e = sum(Fraction(rows[x] * cols[x], n * n) for x in labels)
    return (p_o - p_e) / (1 - p_e)


@pytest.mark.criterion(2, "Cohen's kappa")
def test_criterion_2_kappa():
    with Timer() as t:
        same = pairwise_kappa([list("xyxzy"), list("xyxzy")])
        assert same.kappa[0][1] == 1.0
        zero = pairwise_kappa([list("xxyy"), list("xyxy")])
        assert abs(zero.kappa[0][1] - 0.0) <= 1e-9

        rng = random.Random(2024)
        labels = ["NoError", *(t.value for t in ErrorTag)]
        truth = [rng.choice(labels) for _ in range(500)]
        annotators = {}
        for name, noise in zip(("A1", "A2", "A3", "A4"), (0.1, 0.2, 0.25, 0.35)):
            annotators[name] = [rng.choice(labels) if rng.random() < noise else x for x in truth]
        report = pairwise_kappa(annotators)
        assert len(report.kappa) == 4 and all(len(row) == 4 for row in report.kappa)
        names = list(annotators)
        for i, j in itertools.combinations(range(4), 2):
            expected = float(brute_kappa(annotators[names[i]], annotators[names[j]]))
            assert abs(report.kappa[i][j] - expected) <= 1e-9
            assert report.kappa[i][j] == report.kappa[j][i]
        assert all(report.kappa[i][i] == 1.0 for i in range(4))
        assert len(set(report.pairs().values())) == 6
        json.dumps(report.to_dict())
        report.format_table()
    assert t.elapsed < 1.0


# ---------------------------------------------------------------------------
# 3


@pytest.mark.criterion(3, "diversity metrics")
def test_criterion_3_diversity(fixtures):
    with Timer() as t:
        learner = read_corpus(fixtures / "learner.jsonl")
        clean = read_corpus(fixtures / "clean.jsonl")
        assert ngram_novelty(learner, learner) == 0.0
        assert ngram_novelty(clean, clean) == 0.0
        assert ngram_novelty(["alpha beta gamma delta"], ["one two three four"]) == 1.0
        assert abs(self_bleu(["The share of people decreased in 1999."] * 7) - 100) <= 1e-6
        assert len(learner) == 200
        assert 5 <= self_bleu(learner) <= 40
    assert t.elapsed < 5.0


# ---------------------------------------------------------------------------
# 4


def numbered(n):
    return Corpus(tuple(AnnotatedSentence(f"s{i}", "x", ()) for i in range(n)))


@pytest.mark.criterion(4, "split protocol")
def test_criterion_4_split():
    with Timer() as t:
        for n in (10, 100, 6086):
            corpus = numbered(n)
            train, test = split_corpus(corpus, 0.8, seed=7)
            k = (8 * n) // 10
            assert (len(train), len(test)) == (k, n - k)
            again, _ = split_corpus(corpus, 0.8, seed=7)
            assert [s.id for s in again] == [s.id for s in train]
        rng = random.Random(99)
        for _ in range(1000):
            n = rng.randint(0, 120)
            ratio = rng.choice([0.5, 0.7, 0.8, 0.9, rng.uniform(0.05, 0.95)])
            seed = rng.randrange(2**31)
            corpus = numbered(n)
            train, test = split_corpus(corpus, ratio, seed)
            a, b = {s.id for s in train}, {s.id for s in test}
            assert not a & b
            assert a | b == {s.id for s in corpus}
            assert len(train) == split_size(n, ratio) == int(Fraction(n) * Fraction(str(ratio)))
    assert t.elapsed < 5.0


# ---------------------------------------------------------------------------
# 5


@pytest.mark.criterion(5, "injector contract suite")
def test_criterion_5_injectors(fixtures, manifest):
    with Timer() as t:
        clean = read_corpus(fixtures / "clean.jsonl")
        assert len(clean) == 1000
        realec = import_brat_dir(fixtures / "realec")
        dictionaries = [
            merge_suggestions(build_dictionary(realec, tag), fixtures / "suggestions.tsv") for tag in ErrorTag
        ]
        dictionaries = [d for d in dictionaries if len(d)]
        lexicon = load_lexicon()
        methods = {
            "dict": lambda s, rng: inject_dictionary(s, dictionaries, rng),
            "tense": inject_tense,
            "translit": lambda s, rng: inject_transliteration(s, lexicon, None, rng),
        }
        by_id = clean.by_id()
        for name, injector in methods.items():
            out = inject_corpus(clean, injector, seed=11, method=name)
            assert len(out) > 0, name
            for s in out:
                check_injection(by_id[s.id], s)
            replay = inject_corpus(clean, injector, seed=11, method=name)
            assert [json.dumps(vars(x), default=str) for x in replay] == [json.dumps(vars(x), default=str) for x in out]
            if name == "tense":
                assert all(has_year(by_id[s.id].text) for s in out)
                assert len(out) >= manifest["clean"]["groups"]["year"] // 2

        ex4 = inject_tense(AnnotatedSentence("ex4", "In 1999 the share decreased.", ()), random.Random(0))
        assert ex4.text == "In 1999 the share decreases."
        assert ex4.spans == (Span(18, 27, TS, "decreased"),)

        kept = filter_min_tokens(clean, 5)
        dropped = sorted(set(by_id) - {s.id for s in kept})
        assert dropped == manifest["clean"]["short_ids"]
    assert t.elapsed < 10.0


# ---------------------------------------------------------------------------
# 6


@pytest.mark.criterion(6, "dictionary construction")
def test_criterion_6_dictionary(fixtures, manifest):
    with Timer() as t:
        realec = import_brat_dir(fixtures / "realec")
        texts = [s.text for s in realec]
        assert any("The distance can be overcame by the train" in x for x in texts)
        assert any("every of us" in x for x in texts)
        syn = build_dictionary(realec, SY)
        ce = build_dictionary(realec, CE)
        assert syn.lookup("covered")[0][0] == "overcame"
        assert "every of us" in dict(ce.lookup("everyone"))

        expected = manifest["realec"]["dictionary"]
        built = {tag: build_dictionary(realec, tag) for tag in ErrorTag}
        for tag, d in built.items():
            assert {k: dict(v) for k, v in d.entries.items()} == expected[tag.value]

        rng = random.Random(6)
        for _ in range(5):
            shuffled = list(realec)
            rng.shuffle(shuffled)
            for tag, d in built.items():
                assert build_dictionary(shuffled, tag).entries == d.entries

        for tag, d in built.items():
            union = {k: Counter(v) for k, v in expected[tag.value].items()}
            for row_tag, correct, wrong, count in manifest["suggestions"]:
                if row_tag == tag.value:
                    union.setdefault(correct, Counter())[wrong] += count
            merged = merge_suggestions(d, fixtures / "suggestions.tsv")
            assert merged.entries == union
        assert [f for f, _ in merge_suggestions(syn, fixtures / "suggestions.tsv").lookup("covered")] == [
            "overcame",
            "passed",
        ]
    assert t.elapsed < 1.0


# ---------------------------------------------------------------------------
# 7

INSTRUCTION = (
    "Here are some sentences with L1-motivated mistakes. Find the mistakes in these sentences and generate new "
    "contexts with different meanings, while retaining the mistakes from the original sentences."
)


@pytest.mark.criterion(7, "LLM pipeline against the mock server")
def test_criterion_7_llm(fixtures):
    with Timer() as t:
        learner = read_corpus(fixtures / "learner.jsonl")
        example_texts = {s.text for s in learner}
        with MockChatServer(delay=0.02) as server:
            job = GenerationJob(server.url, "mock", target_total=80, max_in_flight=4, backoff=0.0, seed=7)
            assert server.url.startswith("http://127.0.0.1:")
            out = generate_batch(job, learner)
        assert len(server.requests) == 8 and len(out) == 80
        by_hash = {}
        for body in server.requests:
            assert body["temperature"] == 1.0
            prompt = body["messages"][0]["content"]
            numbered = [ln.split(". ", 1)[1] for ln in prompt.splitlines() if ln.split(". ", 1)[0].isdigit()]
            assert len(numbered) == 10 and set(numbered) <= example_texts
            by_hash[hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]] = prompt
        records = out.provenance["gen"]["requests"]
        templates = [by_hash[r["prompt_sha256"]].split("\n\n", 1)[0] for r in records]
        assert templates[0] == INSTRUCTION and templates[4] == INSTRUCTION
        assert len(set(templates)) == 4 and templates[:4] == templates[4:]
        assert [r["paraphrase"] for r in records] == [0, 1, 2, 3, 0, 1, 2, 3]
        assert 1 < server.max_in_flight <= 4

        wellformed = [
            'The share <err tag="TenseSemantics" corr="decreased">decreases</err> in 1999.',
            'Money comes to the <err tag="Transliteration" corr="cashier">kassa</err>.',
            '<err tag="CopyingExpression" corr="everyone">Every of us</err> took a '
            '<err tag="Synonyms" corr="bath">bathroom</err>.',
        ]
        for markup in wellformed:
            parsed = parse_annotated_output(markup)
            assert render_markup(parsed) == markup
            assert "<" not in parsed.text

        base = list(out.sentences[:20])
        dupes = [AnnotatedSentence(f"dup{i}", s.text, (), "llm") for i, s in enumerate(base[:5])]
        mixed = Corpus(tuple(base[:10] + dupes + base[10:]))
        once = dedup_near_duplicates(mixed)
        assert not {s.id for s in once} & {d.id for d in dupes}
        assert dedup_near_duplicates(once).sentences == once.sentences
    assert t.elapsed < 10.0


# ---------------------------------------------------------------------------
# 8


@pytest.mark.criterion(8, "CLI end-to-end pipeline")
def test_criterion_8_end_to_end(fixtures, manifest, tmp_path, capsys):
    w = tmp_path
    f = str(fixtures)

    def ok(*argv):
        assert run([str(a) for a in argv]) == 0, argv
        return capsys.readouterr().out

    with Timer() as t:
        ok("import", "--dir", f"{f}/realec", "--out", w / "realec.jsonl")
        ok("filter", "--in", w / "realec.jsonl", "--out", w / "realec.f.jsonl")
        ok("filter", "--in", f"{f}/clean.jsonl", "--out", w / "clean.f.jsonl")
        ok("build-dict", "--in", w / "realec.f.jsonl", "--suggestions", f"{f}/suggestions.tsv", "--out", w / "dict.json")
        for method in ("dict", "tense", "translit"):
            ok("inject", "--method", method, "--in", w / "clean.f.jsonl", "--dict", w / "dict.json",
               "--seed", 3, "--out", w / f"aug.{method}.jsonl")  # fmt: skip
        ok("split", "--in", w / "realec.f.jsonl", "--seed", 7, "--out-train", w / "train.jsonl", "--out-test", w / "test.jsonl")
        aug = [w / f"aug.{m}.jsonl" for m in ("dict", "tense", "translit")]
        stats = json.loads(
            ok("stats", "--in", w / "train.jsonl", "--in", w / "test.jsonl", *sum((["--in", p] for p in aug), []),
               "--format", "json")  # fmt: skip
        )
        report = json.loads(
            ok("eval", "--gold", w / "realec.jsonl", "--pred", f"{f}/predictions.jsonl", "--mode", "strict", "--format", "json")
        )
        overlap = json.loads(
            ok("eval", "--gold", w / "realec.jsonl", "--pred", f"{f}/predictions.jsonl", "--mode", "overlap", "--format", "json")
        )

        # every intermediate corpus validates on re-read
        corpora = {p.name: read_corpus(p) for p in sorted(w.glob("*.jsonl"))}
        m = manifest["realec"]
        assert len(corpora["realec.jsonl"]) == m["sentences"]
        assert len(corpora["realec.f.jsonl"]) == m["sentences_after_filter"]
        assert len(corpora["clean.f.jsonl"]) == manifest["clean"]["sentences"] - len(manifest["clean"]["short_ids"])
        n = m["sentences_after_filter"]
        assert (len(corpora["train.jsonl"]), len(corpora["test.jsonl"])) == (int(0.8 * n), n - int(0.8 * n))

        realec_rows = Counter()
        rule_rows = Counter()
        for row in stats["rows"]:
            target = realec_rows if row["source"] == "realec" else rule_rows
            target[row["tag"]] += row["spans"]
        assert dict(realec_rows) == {k: v for k, v in m["spans_per_tag"].items() if v}
        fired = {p.name: len(corpora[p.name]) for p in aug}
        assert all(fired.values())
        span_tags = Counter()
        for p in aug:
            for s in corpora[p.name]:
                assert len(s.spans) == 1 and s.source == "rule"
                span_tags[s.spans[0].tag.value] += 1
        assert rule_rows == span_tags
        assert {s.spans[0].tag for s in corpora["aug.tense.jsonl"]} == {TS}
        assert {s.spans[0].tag for s in corpora["aug.translit.jsonl"]} == {TR}
        assert stats["total_sentences"] == n + sum(fired.values())

        for mode, rep in (("strict", report), ("overlap", overlap)):
            expected = manifest["predictions"]["expected"][mode]
            got = {tag: {k: v[k] for k in ("tp", "fp", "fn")} for tag, v in rep["per_tag"].items()}
            assert got == expected
    assert t.elapsed < 30.0
