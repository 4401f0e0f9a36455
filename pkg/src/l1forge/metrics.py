"""Span-level scoring, inter-annotator agreement and generation-diversity metrics."""

from __future__ import annotations

import bisect
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

from .corpus import AnnotatedSentence, Corpus, ErrorTag, Span
from .tokenize import tokenize

MODES = ("strict", "overlap")

# ---------------------------------------------------------------------------
# Span F1


@dataclass
class TagScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return float(Fraction(100 * self.tp, self.tp + self.fp)) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return float(Fraction(100 * self.tp, self.tp + self.fn)) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        # 2PR/(P+R) == 2TP/(2TP+FP+FN)
        return float(self._f1()) if self.tp else 0.0

    def _f1(self) -> Fraction:
        return Fraction(200 * self.tp, 2 * self.tp + self.fp + self.fn) if self.tp else Fraction(0)


@dataclass
class EvalReport:
    mode: str
    per_tag: dict[str, TagScore] = field(default_factory=dict)

    @property
    def macro_tags(self) -> list[str]:
        """Tags entering the macro average: those with at least one gold span."""
        return [t for t, s in self.per_tag.items() if s.tp + s.fn > 0]

    @property
    def macro_f1(self) -> float:
        tags = self.macro_tags
        if not tags:
            return 0.0
        return float(sum((self.per_tag[t]._f1() for t in tags), Fraction(0)) / len(tags))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "per_tag": {
                t: {
                    "tp": s.tp,
                    "fp": s.fp,
                    "fn": s.fn,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                }
                for t, s in self.per_tag.items()
            },
            "macro_f1": self.macro_f1,
            "macro_tags": self.macro_tags,
        }

    def format_table(self) -> str:
        rows = [["tag", "TP", "FP", "FN", "P", "R", "F1"]]
        for t, s in self.per_tag.items():
            rows.append([t, str(s.tp), str(s.fp), str(s.fn), f"{s.precision:.2f}", f"{s.recall:.2f}", f"{s.f1:.2f}"])
        rows.append(["macro", "", "", "", "", "", f"{self.macro_f1:.2f}"])
        return f"mode: {self.mode}\n" + _aligned(rows)


def _aligned(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in rows
    )


def _overlap(a: Span, b: Span) -> int:
    return min(a.end, b.end) - max(a.start, b.start)


def match_spans(gold: Sequence[Span], pred: Sequence[Span], mode: str = "strict") -> list[tuple[int, int]]:
    """One-to-one (gold index, pred index) matches between same-tag spans.

    Exact matches are paired first. In overlap mode the remaining spans are then
    matched by augmenting paths, visiting gold spans by ascending start, so the
    result is a maximum matching that contains every exact pair's gold span.
    """
    if mode not in MODES:
        raise ValueError(f"unknown matching mode {mode!r}")
    g_order = sorted(range(len(gold)), key=lambda i: (gold[i].start, gold[i].end))
    p_order = sorted(range(len(pred)), key=lambda j: (pred[j].start, pred[j].end))
    exact = {(p.start, p.end, p.tag): j for j, p in enumerate(pred)}
    g2p: dict[int, int] = {}
    p2g: dict[int, int] = {}
    for i in g_order:
        g = gold[i]
        j = exact.get((g.start, g.end, g.tag))
        if j is not None and j not in p2g:
            g2p[i], p2g[j] = j, i
    if mode == "overlap":
        adj = {
            i: [j for j in p_order if pred[j].tag == gold[i].tag and _overlap(gold[i], pred[j]) > 0] for i in g_order
        }

        def augment(i: int, seen: set[int]) -> bool:
            for j in adj[i]:
                if j in seen:
                    continue
                seen.add(j)
                if j not in p2g or augment(p2g[j], seen):
                    g2p[i], p2g[j] = j, i
                    return True
            return False

        for i in g_order:
            if i not in g2p:
                augment(i, set())
    return sorted(g2p.items())


def span_f1(gold: Corpus | Iterable[AnnotatedSentence], pred: Corpus | Iterable[AnnotatedSentence], mode: str = "strict") -> EvalReport:
    """Per-tag precision/recall/F1 (percent) of predicted spans against gold spans.

    Sentences are aligned by id; gold sentences without a prediction count as
    predicting nothing.
    """
    if mode not in MODES:
        raise ValueError(f"unknown matching mode {mode!r}")
    gold_by_id = {s.id: s for s in gold}
    pred_by_id = {s.id: s for s in pred}
    missing = [i for i in pred_by_id if i not in gold_by_id]
    if missing:
        raise ValueError(f"predicted sentence ids absent from gold: {', '.join(missing[:5])}")
    report = EvalReport(mode, {t.value: TagScore() for t in ErrorTag})
    for sid, g in gold_by_id.items():
        p = pred_by_id.get(sid)
        p_spans = p.spans if p is not None else ()
        pairs = match_spans(g.spans, p_spans, mode)
        matched_g = {i for i, _ in pairs}
        matched_p = {j for _, j in pairs}
        for i, sp in enumerate(g.spans):
            score = report.per_tag[sp.tag.value]
            if i in matched_g:
                score.tp += 1
            else:
                score.fn += 1
        for j, sp in enumerate(p_spans):
            if j not in matched_p:
                report.per_tag[sp.tag.value].fp += 1
    return report


# ---------------------------------------------------------------------------
# Agreement


def kappa_terms(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> tuple[float, float]:
    """Observed and chance agreement ``(p_o, p_e)``."""
    if len(labels_a) != len(labels_b):
        raise ValueError(f"label sequences differ in length: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise ValueError("label sequences are empty")
    agree = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    ca, cb = Counter(labels_a), Counter(labels_b)
    chance = sum(ca[k] * cb[k] for k in ca)
    return agree / n, chance / (n * n)


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    p_o, p_e = kappa_terms(labels_a, labels_b)
    if p_e == 1:
        raise ValueError("kappa is undefined: both annotators use one and the same label throughout")
    return (p_o - p_e) / (1 - p_e)


@dataclass
class AgreementReport:
    annotators: list[str]
    kappa: list[list[float | None]]
    observed: list[list[float]]
    expected: list[list[float]]

    def pairs(self) -> dict[tuple[str, str], float]:
        n = len(self.annotators)
        return {
            (self.annotators[i], self.annotators[j]): self.kappa[i][j]
            for i in range(n)
            for j in range(i + 1, n)
        }

    def to_dict(self) -> dict:
        return {
            "annotators": self.annotators,
            "kappa": self.kappa,
            "observed": self.observed,
            "expected": self.expected,
            "pairs": [{"a": a, "b": b, "kappa": k} for (a, b), k in self.pairs().items()],
        }

    def format_table(self) -> str:
        rows = [["", *self.annotators]]
        for name, row in zip(self.annotators, self.kappa):
            rows.append([name, *("-" if k is None else f"{k:.3f}" for k in row)])
        return _aligned(rows)


def pairwise_kappa(annotations: Mapping[str, Sequence[Hashable]] | Sequence[Sequence[Hashable]]) -> AgreementReport:
    if isinstance(annotations, Mapping):
        names = list(annotations)
        seqs = [list(annotations[n]) for n in names]
    else:
        seqs = [list(a) for a in annotations]
        names = [f"A{i + 1}" for i in range(len(seqs))]
    if len(seqs) < 2:
        raise ValueError("need at least two annotators")
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise ValueError(f"annotators labelled different numbers of items: {sorted(lengths)}")
    n = len(seqs)
    kappa: list[list[float | None]] = [[None] * n for _ in range(n)]
    obs = [[0.0] * n for _ in range(n)]
    exp = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            p_o, p_e = kappa_terms(seqs[i], seqs[j])
            obs[i][j] = obs[j][i] = p_o
            exp[i][j] = exp[j][i] = p_e
            if i == j:
                kappa[i][i] = 1.0 if p_e < 1 else None
            else:
                kappa[i][j] = kappa[j][i] = cohen_kappa(seqs[i], seqs[j])
    return AgreementReport(names, kappa, obs, exp)


NO_ERROR = "NoError"


def sentence_label(sentence: AnnotatedSentence, exact_sets: bool = False) -> str:
    """Agreement unit label: the alphabetically first tag, or the full sorted tag set."""
    tags = sorted({sp.tag.value for sp in sentence.spans})
    if not tags:
        return NO_ERROR
    return "+".join(tags) if exact_sets else tags[0]


def annotator_labels(corpora: Mapping[str, Corpus], exact_sets: bool = False) -> dict[str, list[str]]:
    """Align annotator corpora on the first corpus's sentence ids and label each sentence."""
    names = list(corpora)
    ids = [s.id for s in corpora[names[0]]]
    out = {}
    for name in names:
        by_id = corpora[name].by_id()
        if set(by_id) != set(ids):
            raise ValueError(f"annotator {name!r} does not cover the same sentence ids")
        out[name] = [sentence_label(by_id[i], exact_sets) for i in ids]
    return out


# ---------------------------------------------------------------------------
# Diversity


def bleu_tokens(text: str) -> list[str]:
    return [t.surface.lower() for t in tokenize(text)]


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _texts(corpus) -> list[str]:
    return [s if isinstance(s, str) else s.text for s in corpus]


def self_bleu(corpus: Corpus | Sequence[AnnotatedSentence | str], max_n: int = 4) -> float:
    """Mean BLEU (0-100) of each sentence against all other sentences as references.

    Modified n-gram precision clips each count by its maximum over references;
    a zero precision is add-one smoothed to 1/(c+1); n-gram orders longer than
    the hypothesis are left out of the geometric mean. The brevity penalty uses
    the closest reference length (shorter on ties).
    """
    docs = [bleu_tokens(t) for t in _texts(corpus)]
    if len(docs) < 2:
        raise ValueError("Self-BLEU needs at least two sentences")
    counts = [[_ngrams(d, n) for n in range(1, max_n + 1)] for d in docs]
    # Top two counts per n-gram over the corpus, so "max over all others" is O(1).
    top: list[dict[tuple, tuple[int, int, int]]] = []
    for k in range(max_n):
        best: dict[tuple, tuple[int, int, int]] = {}
        for idx, c in enumerate(counts):
            for g, m in c[k].items():
                first, owner, second = best.get(g, (0, -1, 0))
                if m > first:
                    best[g] = (m, idx, first)
                elif m > second:
                    best[g] = (first, owner, m)
        top.append(best)
    lengths = sorted(len(d) for d in docs)

    def closest_ref_len(idx: int) -> int:
        own = len(docs[idx])
        lo = bisect.bisect_left(lengths, own)
        hi = bisect.bisect_right(lengths, own)
        if hi - lo > 1:
            return own
        cands = [lengths[i] for i in (lo - 1, hi) if 0 <= i < len(lengths)]
        return min(cands, key=lambda r: (abs(r - own), r))

    total = 0.0
    for idx, d in enumerate(docs):
        c = len(d)
        if c == 0:
            continue
        logs = []
        for k in range(max_n):
            hyp = counts[idx][k]
            denom = sum(hyp.values())
            if denom == 0:
                continue
            clipped = 0
            for g, m in hyp.items():
                first, owner, second = top[k][g]
                ref_max = second if owner == idx else first
                clipped += min(m, ref_max)
            p = clipped / denom if clipped else 1 / (denom + 1)
            logs.append(math.log(p))
        r = closest_ref_len(idx)
        bp = 1.0 if c > r else math.exp(1 - r / c)
        total += bp * math.exp(sum(logs) / len(logs))
    return 100 * total / len(docs)


def novelty_tokens(text: str) -> list[str]:
    return [t.surface.lower() for t in tokenize(text) if t.coarse_pos != "punct"]


def ngram_set(corpus, n: int = 3) -> set[tuple[str, ...]]:
    out = set()
    for text in _texts(corpus):
        out.update(_ngrams(novelty_tokens(text), n))
    return out


def ngram_novelty(generated, source, n: int = 3) -> float:
    """Fraction of distinct generated n-grams that never occur in ``source``."""
    gen = ngram_set(generated, n)
    if not gen:
        raise ValueError(f"no {n}-grams in the generated corpus")
    src = ngram_set(source, n)
    return len(gen - src) / len(gen)


def downsample(corpus: Corpus, size: int, seed: int) -> Corpus:
    """Seeded sample of ``size`` sentences (corpus order kept); no-op when already small enough."""
    if len(corpus) <= size:
        return corpus
    keep = set(random.Random(seed).sample(range(len(corpus)), size))
    return corpus.derive([s for i, s in enumerate(corpus.sentences) if i in keep])
