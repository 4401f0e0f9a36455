"""Prompted generation and annotation of interference errors through a chat-completions endpoint."""

from __future__ import annotations

import csv
import hashlib
import html
import logging
import os
import random
import re
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import httpx

from .brat import segment
from .corpus import AnnotatedSentence, Corpus, ErrorTag, FormatError, Span
from .translit import is_cyrillic

logger = logging.getLogger(__name__)

API_KEY_ENV = "L1FORGE_API_KEY"

GENERATION_PROMPTS = (
    "Here are some sentences with L1-motivated mistakes. Find the mistakes in these sentences and "
    "generate new contexts with different meanings, while retaining the mistakes from the original sentences.",
    "The sentences below contain mistakes caused by the writer's native language. Identify each mistake, "
    "then write new sentences on different topics that repeat the same mistakes.",
    "Below are learner sentences with errors that come from first-language interference. Spot the errors "
    "and compose new sentences with other meanings in which the same errors are kept.",
    "These example sentences include mistakes motivated by the author's first language. Locate the mistakes "
    "and produce fresh sentences about something else that still contain exactly those mistakes.",
)

GENERATION_FORMAT = "Write one new sentence per line, without numbering or comments."

ANNOTATION_PROMPT = (
    "Here are sentences that contain mistakes.\n"
    "Some mistakes are caused by interference with the Russian language.\n"
    "Find and highlight such mistakes. Classify the mistakes according to the Instructions.\n"
    "The following sentences are provided as examples."
)

MARKUP_INSTRUCTION = (
    'Mark every such mistake inline as <err tag="TAG" corr="CORRECTION">mistaken words</err>, where TAG is '
    "one of {tags} and CORRECTION is the corrected wording. Leave the rest of the sentence unchanged and "
    "return each sentence on its own line in the given order."
)

DEFAULT_INSTRUCTIONS = """\
CopyingExpression: a word-for-word rendering of a Russian expression or collocation ("every of us" for "everyone").
Synonyms: a wrong English word chosen among several that share one Russian translation ("overcame the distance" for "covered the distance").
TenseSemantics: an English tense licensed by Russian usage but wrong in English, e.g. present simple for past data ("In 1999 the share decreases").
Transliteration: a Russian word written in Latin letters ("the cassa" for "the cashier").
WordFormTransmission: a Russian grammatical category carried into the English form ("$5 billions" for "$5 billion")."""


class TransportError(RuntimeError):
    """The endpoint could not be reached after retries; ``partial`` holds what was collected."""

    def __init__(self, message: str, partial: Corpus | None = None):
        super().__init__(message)
        self.partial = partial if partial is not None else Corpus()


class MarkupError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"at character {position}: {message}")
        self.position = position


# ---------------------------------------------------------------------------
# Prompts


def _numbered(sentences: Sequence[str]) -> str:
    return "\n".join(f"{i}. {s}" for i, s in enumerate(sentences, 1))


def build_generation_prompt(
    example_sentences: Sequence[str],
    paraphrase_index: int = 0,
    paraphrase_count: int = 4,
    examples_per_prompt: int = 10,
) -> str:
    if not 0 <= paraphrase_index < paraphrase_count:
        raise ValueError(f"paraphrase index {paraphrase_index} outside [0, {paraphrase_count})")
    if paraphrase_count > len(GENERATION_PROMPTS):
        raise ValueError(f"only {len(GENERATION_PROMPTS)} prompt versions are bundled")
    if len(example_sentences) != examples_per_prompt:
        raise ValueError(f"expected {examples_per_prompt} example sentences, got {len(example_sentences)}")
    return f"{GENERATION_PROMPTS[paraphrase_index]}\n\n{_numbered(example_sentences)}\n\n{GENERATION_FORMAT}"


def build_annotation_prompt(instructions: str, sentences: Sequence[str]) -> str:
    if not instructions or not instructions.strip():
        raise ValueError("annotation instructions must not be empty")
    markup = MARKUP_INSTRUCTION.format(tags=", ".join(t.value for t in ErrorTag))
    return f"{ANNOTATION_PROMPT}\n\nInstructions:\n{instructions.strip()}\n\n{markup}\n\n{_numbered(sentences)}"


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Client


class ChatClient:
    """Minimal OpenAI-compatible ``/chat/completions`` client with exponential-backoff retries."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 1.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._http = httpx.Client(timeout=timeout, headers=headers)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def complete(self, prompt: str, temperature: float = 1.0) -> str:
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}], "temperature": temperature}
        url = f"{self.endpoint}/chat/completions"
        last = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post(url, json=body)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise TransportError(f"malformed chat-completions response from {url}") from None
        raise TransportError(f"{url} failed after {self.max_retries + 1} attempts ({last})")


# ---------------------------------------------------------------------------
# Generation


@dataclass
class GenerationJob:
    endpoint: str
    model_name: str
    target_total: int
    temperature: float = 1.0
    examples_per_prompt: int = 10
    paraphrase_count: int = 4
    seed: int = 42
    max_in_flight: int = 4
    max_retries: int = 3
    backoff: float = 1.0
    max_requests: int | None = None

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.examples_per_prompt < 1:
            raise ValueError("examples_per_prompt must be at least 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if self.target_total < 0:
            raise ValueError("target_total must be non-negative")


_NUMBERING = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*")


def split_candidates(reply: str) -> list[str]:
    """One candidate per non-empty line; a single-line reply is run through the sentence splitter."""
    lines = []
    for line in reply.splitlines():
        line = _NUMBERING.sub("", line).strip().strip('"“”').strip()
        if not line or line.endswith(":"):
            continue
        lines.append(line)
    if len(lines) == 1:
        return [lines[0][a:b] for a, b in segment(lines[0])]
    return lines


def plan_request(job: GenerationJob, source: Sequence[AnnotatedSentence], index: int) -> dict:
    rng = random.Random(f"{job.seed}:{index}")
    examples = rng.sample(list(source), job.examples_per_prompt)
    paraphrase = index % job.paraphrase_count
    prompt = build_generation_prompt(
        [s.text for s in examples], paraphrase, job.paraphrase_count, job.examples_per_prompt
    )
    return {
        "index": index,
        "paraphrase": paraphrase,
        "example_ids": [s.id for s in examples],
        "prompt": prompt,
        "prompt_sha256": prompt_hash(prompt),
    }


def generate_batch(
    job: GenerationJob,
    source_corpus: Corpus,
    client: ChatClient | None = None,
    stats: Counter | None = None,
) -> Corpus:
    """Request generations until ``job.target_total`` candidate sentences are collected.

    Requests go out in rounds of ``job.max_in_flight`` concurrent calls; results are
    assembled in request order, so the output depends only on the seed and replies.
    """
    stats = stats if stats is not None else Counter()
    if job.target_total == 0:
        return Corpus((), {"gen": {"requests": []}})
    if len(source_corpus) < job.examples_per_prompt:
        raise ValueError(
            f"source corpus has {len(source_corpus)} sentences; {job.examples_per_prompt} are needed per prompt"
        )
    own_client = client is None
    if client is None:
        client = ChatClient(job.endpoint, job.model_name, max_retries=job.max_retries, backoff=job.backoff)
    max_requests = job.max_requests or max(10, 10 * job.target_total)
    sentences: list[AnnotatedSentence] = []
    records: list[dict] = []
    index = 0

    def result(items):
        return Corpus(
            tuple(items),
            {
                "gen": {
                    "model": job.model_name,
                    "endpoint": job.endpoint,
                    "temperature": job.temperature,
                    "seed": job.seed,
                    "requests": records,
                }
            },
        )

    try:
        with ThreadPoolExecutor(max_workers=job.max_in_flight) as pool:
            while len(sentences) < job.target_total and index < max_requests:
                batch = [
                    plan_request(job, source_corpus.sentences, i)
                    for i in range(index, min(index + job.max_in_flight, max_requests))
                ]
                index += len(batch)
                futures = [pool.submit(client.complete, r["prompt"], job.temperature) for r in batch]
                for req, fut in zip(batch, futures):
                    try:
                        reply = fut.result()
                    except TransportError as exc:
                        raise TransportError(str(exc), result(sentences[: job.target_total])) from exc
                    cands = split_candidates(reply)
                    stats["requests"] += 1
                    if not cands:
                        stats["empty_reply"] += 1
                    ids = []
                    for k, text in enumerate(cands):
                        if len(sentences) >= job.target_total:
                            stats["surplus"] += 1
                            continue
                        sid = f"gen-{job.seed}-{req['index']:05d}-{k:02d}"
                        sentences.append(AnnotatedSentence(sid, text, (), "llm", None))
                        ids.append(sid)
                    records.append(
                        {
                            "index": req["index"],
                            "paraphrase": req["paraphrase"],
                            "prompt_sha256": req["prompt_sha256"],
                            "example_ids": req["example_ids"],
                            "candidate_ids": ids,
                        }
                    )
    finally:
        if own_client:
            client.close()
    if len(sentences) < job.target_total:
        logger.warning("stopped after %d requests with %d of %d candidates", index, len(sentences), job.target_total)
    return result(sentences)


# ---------------------------------------------------------------------------
# Annotation markup

_OPEN = re.compile(r"<err\b([^<>]*)>")
_CLOSE = re.compile(r"</err\s*>")
_ATTR = re.compile(r'(\w+)\s*=\s*"([^"]*)"')


def parse_annotated_output(
    model_text: str,
    sentence_id: str = "llm",
    source: str = "llm",
    stats: Counter | None = None,
) -> AnnotatedSentence:
    """Strip ``<err tag=".." corr="..">..</err>`` markup into spans over the plain text."""
    stats = stats if stats is not None else Counter()
    plain: list[str] = []
    length = 0
    spans: list[Span] = []
    pos = 0
    open_at: tuple[int, int, dict] | None = None
    while pos < len(model_text):
        m_open = _OPEN.search(model_text, pos)
        m_close = _CLOSE.search(model_text, pos)
        nxt = min((m for m in (m_open, m_close) if m), key=lambda m: m.start(), default=None)
        if nxt is None:
            break
        chunk = model_text[pos : nxt.start()]
        plain.append(chunk)
        length += len(chunk)
        if nxt is m_open:
            if open_at is not None:
                raise MarkupError("nested <err> element", nxt.start())
            open_at = (nxt.start(), length, dict(_ATTR.findall(nxt.group(1))))
        else:
            if open_at is None:
                raise MarkupError("</err> without matching <err>", nxt.start())
            _, start, attrs = open_at
            open_at = None
            tag = html.unescape(attrs.get("tag", ""))
            corr = attrs.get("corr")
            if not ErrorTag.is_valid(tag):
                stats["unknown_tag"] += 1
                logger.warning("dropping span with unknown tag %r", tag)
            elif length == start:
                stats["empty_span"] += 1
            else:
                spans.append(Span(start, length, ErrorTag(tag), None if corr is None else html.unescape(corr)))
        pos = nxt.end()
    if open_at is not None:
        raise MarkupError("<err> element is never closed", open_at[0])
    plain.append(model_text[pos:])
    text = "".join(plain)
    unique = {(s.start, s.end, s.tag): s for s in spans}
    stats["spans"] += len(unique)
    return AnnotatedSentence(sentence_id, text, tuple(unique.values()), source, None)


def render_markup(sentence: AnnotatedSentence) -> str:
    """Inverse of :func:`parse_annotated_output` for sentences with non-overlapping spans."""
    out = []
    pos = 0
    for sp in sentence.spans:
        if sp.start < pos:
            raise ValueError("overlapping spans cannot be rendered as inline markup")
        out.append(sentence.text[pos : sp.start])
        attrs = f'tag="{sp.tag.value}"'
        if sp.correction is not None:
            attrs += f' corr="{html.escape(sp.correction, quote=True)}"'
        out.append(f"<err {attrs}>{sentence.text[sp.start:sp.end]}</err>")
        pos = sp.end
    out.append(sentence.text[pos:])
    return "".join(out)


def annotate_corpus(
    corpus: Corpus,
    client: ChatClient,
    instructions: str = DEFAULT_INSTRUCTIONS,
    temperature: float = 1.0,
    max_in_flight: int = 4,
    stats: Counter | None = None,
) -> Corpus:
    """Ask the model to mark up each sentence and parse its reply into spans.

    Replies whose markup-stripped text differs from the input keep the input text
    unannotated; unparseable replies are counted and the sentence is kept without spans.
    """
    stats = stats if stats is not None else Counter()
    prompts = [build_annotation_prompt(instructions, [s.text]) for s in corpus]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        replies = list(pool.map(lambda p: client.complete(p, temperature), prompts))
    out = []
    for s, reply in zip(corpus, replies):
        line = next((ln for ln in (_NUMBERING.sub("", x).strip() for x in reply.splitlines()) if ln), "")
        try:
            parsed = parse_annotated_output(line, s.id, s.source, stats)
        except MarkupError as exc:
            stats["markup_error"] += 1
            logger.warning("%s: %s", s.id, exc)
            out.append(s.with_spans(()))
            continue
        if parsed.text.strip() != s.text.strip():
            stats["text_changed"] += 1
            out.append(s.with_spans(()))
            continue
        shift = (len(s.text) - len(s.text.lstrip())) - (len(parsed.text) - len(parsed.text.lstrip()))
        try:
            out.append(s.with_spans(sp.shifted(shift) for sp in parsed.spans))
        except ValueError:
            stats["span_outside_text"] += 1
            out.append(s.with_spans(()))
            continue
        stats["annotated"] += bool(parsed.spans)
    return corpus.derive(out, annotate={"model": client.model, "prompt_sha256": prompt_hash(ANNOTATION_PROMPT)})


# ---------------------------------------------------------------------------
# Near-duplicate filtering


def char_trigrams(text: str) -> frozenset[str]:
    t = " ".join(text.lower().split())
    if len(t) < 3:
        return frozenset([t])
    return frozenset(t[i : i + 3] for i in range(len(t) - 2))


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def dedup_near_duplicates(corpus: Corpus, threshold: float = 0.9, stats: Counter | None = None) -> Corpus:
    """Greedy scan: drop a sentence whose trigram Jaccard with any kept sentence reaches ``threshold``."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    stats = stats if stats is not None else Counter()
    kept: list[AnnotatedSentence] = []
    kept_grams: list[frozenset] = []
    index: dict[str, list[int]] = {}
    dropped = []
    for s in corpus:
        grams = char_trigrams(s.text)
        shared = Counter(k for g in grams for k in index.get(g, ()))
        dup = None
        for k, inter in shared.items():
            if inter / (len(grams) + len(kept_grams[k]) - inter) >= threshold:
                dup = k
                break
        if dup is not None:
            dropped.append({"id": s.id, "similar_to": kept[dup].id})
            continue
        for g in grams:
            index.setdefault(g, []).append(len(kept))
        kept.append(s)
        kept_grams.append(grams)
    stats["dropped"] += len(dropped)
    return corpus.derive(kept, dedup={"threshold": threshold, "dropped": dropped})


# ---------------------------------------------------------------------------
# Expert review sheets

VERDICTS = ("accept", "reject", "unreviewed")


@dataclass(frozen=True)
class ReviewRow:
    id: str
    text: str
    tag: str
    verdict: str = "unreviewed"


@dataclass
class ReviewSheet:
    rows: list[ReviewRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)


def claimed_tag(sentence: AnnotatedSentence) -> str:
    return ",".join(sorted({sp.tag.value for sp in sentence.spans}))


def export_review_sheet(corpus: Corpus, path=None) -> ReviewSheet:
    sheet = ReviewSheet([ReviewRow(s.id, s.text, claimed_tag(s)) for s in corpus])
    if path is not None:
        write_review_sheet(sheet, path)
    return sheet


def write_review_sheet(sheet: ReviewSheet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["id", "text", "tag", "verdict"])
        for r in sheet.rows:
            w.writerow([r.id, r.text, r.tag, r.verdict])


def read_review_sheet(path) -> ReviewSheet:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != ["id", "text", "tag", "verdict"]:
            raise FormatError(f"{path}: expected header id<TAB>text<TAB>tag<TAB>verdict")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}: line {lineno}: expected 4 columns, got {len(row)}")
            verdict = row[3].strip().lower() or "unreviewed"
            if verdict not in VERDICTS:
                raise FormatError(f"{path}: line {lineno}: verdict must be one of {', '.join(VERDICTS)}")
            rows.append(ReviewRow(row[0], row[1], row[2], verdict))
    return ReviewSheet(rows)


def apply_review(corpus: Corpus, sheet: ReviewSheet, keep_unreviewed: bool = False) -> Corpus:
    """Drop rejected sentences. Unreviewed rows are an error unless ``keep_unreviewed``."""
    ids = {s.id for s in corpus}
    verdicts = {}
    for r in sheet.rows:
        if r.id not in ids:
            raise ValueError(f"review sheet mentions unknown sentence id {r.id!r}")
        verdicts[r.id] = r.verdict
    pending = [s.id for s in corpus if verdicts.get(s.id, "unreviewed") == "unreviewed"]
    if pending and not keep_unreviewed:
        raise ValueError(f"{len(pending)} sentences are unreviewed (first: {pending[0]!r})")
    kept = [s for s in corpus if verdicts.get(s.id, "unreviewed") != "reject"]
    counts = Counter(verdicts.get(s.id, "unreviewed") for s in corpus)
    return corpus.derive(kept, review=dict(counts))


# ---------------------------------------------------------------------------
# Translation through the chat endpoint


class ChatTranslationLexicon:
    """Mapping-like English -> Russian noun lookup backed by a chat endpoint (cached).

    Stands in for a translation API when no bundled lexicon entry exists.
    """

    PROMPT = "Translate the English noun \"{word}\" into Russian. Answer with the Russian word only."

    def __init__(self, client: ChatClient, fallback: dict[str, str] | None = None):
        self.client = client
        self.cache: dict[str, str | None] = dict(fallback or {})
        self._lock = threading.Lock()

    def get(self, word: str, default=None):
        word = word.lower()
        with self._lock:
            if word in self.cache:
                return self.cache[word] or default
        reply = self.client.complete(self.PROMPT.format(word=word), temperature=0.0).strip()
        value = reply.split()[0].strip(".,;:!?\"'") if reply else ""
        value = value if any(is_cyrillic(c) for c in value) else None
        with self._lock:
            self.cache[word] = value
        return value or default
