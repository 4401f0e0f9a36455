import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from l1forge.corpus import AnnotatedSentence, Corpus, ErrorTag, FormatError, Span, read_corpus
from l1forge.llm import (
    ANNOTATION_PROMPT,
    API_KEY_ENV,
    GENERATION_PROMPTS,
    ChatClient,
    ChatTranslationLexicon,
    GenerationJob,
    MarkupError,
    ReviewRow,
    ReviewSheet,
    TransportError,
    annotate_corpus,
    apply_review,
    build_annotation_prompt,
    build_generation_prompt,
    char_trigrams,
    dedup_near_duplicates,
    export_review_sheet,
    generate_batch,
    jaccard,
    parse_annotated_output,
    read_review_sheet,
    render_markup,
    split_candidates,
)
from l1forge.mock_server import MockChatServer

EXAMPLES = [f"Example sentence number {i}." for i in range(10)]
INSTRUCTION = (
    "Here are some sentences with L1-motivated mistakes. Find the mistakes in these sentences and generate new "
    "contexts with different meanings, while retaining the mistakes from the original sentences."
)


@pytest.fixture(scope="module")
def learner(fixtures):
    return read_corpus(fixtures / "learner.jsonl")


def job_for(server, **kw):
    kw.setdefault("target_total", 20)
    kw.setdefault("backoff", 0.0)
    return GenerationJob(server.url, "mock-model", **kw)


# ---------------------------------------------------------------------------
# prompts


def test_generation_prompt_structure():
    prompt = build_generation_prompt(EXAMPLES, 0)
    assert prompt.startswith(INSTRUCTION)
    for i, e in enumerate(EXAMPLES, 1):
        assert prompt.count(e) == 1 and f"{i}. {e}" in prompt
    assert build_generation_prompt(EXAMPLES, 0) == prompt
    assert len({build_generation_prompt(EXAMPLES, k) for k in range(4)}) == 4


def test_generation_prompt_bounds():
    with pytest.raises(ValueError):
        build_generation_prompt(EXAMPLES, 4, paraphrase_count=4)
    with pytest.raises(ValueError):
        build_generation_prompt(EXAMPLES, -1)
    with pytest.raises(ValueError):
        build_generation_prompt(EXAMPLES[:9], 0)
    with pytest.raises(ValueError):
        build_generation_prompt(EXAMPLES, 0, paraphrase_count=len(GENERATION_PROMPTS) + 1)


def test_annotation_prompt():
    prompt = build_annotation_prompt("Tag errors.", ["The share decreases in 1999."])
    assert prompt.startswith(ANNOTATION_PROMPT)
    assert prompt.count("The share decreases in 1999.") == 1
    assert '<err tag="TAG" corr="CORRECTION">' in prompt
    assert all(t.value in prompt for t in ErrorTag)
    assert prompt == build_annotation_prompt("Tag errors.", ["The share decreases in 1999."])
    with pytest.raises(ValueError):
        build_annotation_prompt("  ", ["x"])


# ---------------------------------------------------------------------------
# markup


def test_parse_example():
    s = parse_annotated_output('The share <err tag="TenseSemantics" corr="decreased">decreases</err> in 1999.')
    assert s.text == "The share decreases in 1999."
    assert s.spans == (Span(10, 19, ErrorTag.TENSE_SEMANTICS, "decreased"),)
    assert s.source == "llm"


def test_parse_plain_and_unknown_tags(caplog):
    assert parse_annotated_output("No markup here.").spans == ()
    stats = Counter()
    s = parse_annotated_output('A <err tag="Spelling" corr="b">c</err> d <err tag="Synonyms">e</err>', stats=stats)
    assert s.text == "A c d e"
    assert s.spans == (Span(6, 7, ErrorTag.SYNONYMS, None),)
    assert stats["unknown_tag"] == 1 and "Spelling" in caplog.text


@pytest.mark.parametrize(
    "text,position",
    [
        ('The <err tag="Synonyms">share', 4),
        ("The share</err>.", 9),
        ('<err tag="Synonyms">a <err tag="Synonyms">b</err></err>', 22),
    ],
)
def test_parse_unbalanced(text, position):
    with pytest.raises(MarkupError) as info:
        parse_annotated_output(text)
    assert info.value.position == position


def test_parse_unescapes_attributes():
    s = parse_annotated_output('x <err tag="CopyingExpression" corr="&quot;a&quot; &amp; b">y</err>')
    assert s.spans[0].correction == '"a" & b'


plain_chunks = st.text(alphabet=st.characters(blacklist_characters="<>", blacklist_categories=("Cs",)), max_size=8)


@st.composite
def marked_up(draw):
    parts = []
    for _ in range(draw(st.integers(0, 4))):
        parts.append(draw(plain_chunks))
        tag = draw(st.sampled_from(list(ErrorTag))).value
        corr = draw(st.one_of(st.none(), st.text(alphabet='ab "&<>', min_size=1, max_size=5)))
        inner = draw(plain_chunks.filter(bool))
        parts.append((tag, corr, inner))
    parts.append(draw(plain_chunks))
    text, spans, pos = [], [], 0
    for p in parts:
        if isinstance(p, str):
            text.append(p)
            pos += len(p)
        else:
            tag, corr, inner = p
            spans.append(Span(pos, pos + len(inner), ErrorTag(tag), corr))
            text.append(inner)
            pos += len(inner)
    return AnnotatedSentence("llm", "".join(text), tuple(spans), "llm")


@given(marked_up())
def test_markup_round_trip(sentence):
    rendered = render_markup(sentence)
    parsed = parse_annotated_output(rendered)
    assert parsed == sentence
    assert render_markup(parsed) == rendered


# ---------------------------------------------------------------------------
# candidate splitting and dedup


def test_split_candidates():
    assert split_candidates("1. First one.\n2) Second one.\n\n- Third.") == ["First one.", "Second one.", "Third."]
    assert split_candidates("Here are new sentences:\nA b.\nC d.") == ["A b.", "C d."]
    assert split_candidates("One sentence. Another one here.") == ["One sentence.", "Another one here."]
    assert split_candidates("   ") == []


def test_dedup_examples():
    c = Corpus(tuple(AnnotatedSentence(f"s{i}", t, ()) for i, t in enumerate(["Same text here.", "Same text here.", "xyz qrs"])))
    stats = Counter()
    out = dedup_near_duplicates(c, stats=stats)
    assert [s.id for s in out] == ["s0", "s2"]
    assert stats["dropped"] == 1
    assert out.provenance["dedup"]["dropped"] == [{"id": "s1", "similar_to": "s0"}]
    assert jaccard(char_trigrams("abcd"), char_trigrams("wxyz")) == 0.0
    with pytest.raises(ValueError):
        dedup_near_duplicates(c, threshold=0)


near_texts = st.lists(
    st.lists(st.sampled_from("the cat dog sat ran on mat rug a big".split()), min_size=1, max_size=8).map(" ".join),
    max_size=12,
)


@given(near_texts, st.sampled_from([0.5, 0.7, 0.9, 1.0]))
def test_dedup_properties(texts, threshold):
    c = Corpus(tuple(AnnotatedSentence(f"s{i}", t, ()) for i, t in enumerate(texts)))
    out = dedup_near_duplicates(c, threshold)
    kept = [char_trigrams(s.text) for s in out]
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            assert jaccard(kept[i], kept[j]) < threshold
    assert dedup_near_duplicates(out, threshold).sentences == out.sentences
    # every dropped sentence really resembles an earlier kept one
    kept_ids = {s.id for s in out}
    for s in c:
        if s.id not in kept_ids:
            assert any(jaccard(char_trigrams(s.text), k) >= threshold for k in kept)


# ---------------------------------------------------------------------------
# generation against the mock server


def test_generate_batch_requests(learner):
    with MockChatServer() as server:
        out = generate_batch(job_for(server, target_total=35), learner)
    assert len(out) == 35
    assert len(server.requests) == 4
    for k, body in enumerate(server.requests):
        assert body["temperature"] == 1.0 and body["model"] == "mock-model"
        prompt = body["messages"][0]["content"]
        numbered = [line for line in prompt.splitlines() if line.split(". ", 1)[0].isdigit()]
        assert len(numbered) == 10
    paraphrases = [r["paraphrase"] for r in out.provenance["gen"]["requests"]]
    assert paraphrases == [0, 1, 2, 3]
    assert {s.source for s in out} == {"llm"}
    rec = out.provenance["gen"]["requests"][0]
    assert len(rec["example_ids"]) == 10 and len(rec["prompt_sha256"]) == 16
    by_id = learner.by_id()
    assert [s.text for s in out][:10] == [by_id[i].text for i in rec["example_ids"]]


def test_generate_batch_is_deterministic(learner):
    with MockChatServer() as server:
        a = generate_batch(job_for(server, seed=3), learner)
        b = generate_batch(job_for(server, seed=3), learner)
        c = generate_batch(job_for(server, seed=4), learner)
    assert a.sentences == b.sentences and a.provenance == b.provenance
    assert a.sentences != c.sentences


def test_generate_batch_target_zero_makes_no_requests(learner):
    with MockChatServer() as server:
        out = generate_batch(job_for(server, target_total=0), learner)
    assert len(out) == 0 and server.requests == []


def test_generate_batch_respects_in_flight_bound(learner):
    with MockChatServer(delay=0.05) as server:
        out = generate_batch(job_for(server, target_total=120, max_in_flight=3), learner)
    assert len(out) == 120
    assert 1 < server.max_in_flight <= 3


def test_generate_batch_retries_then_succeeds(learner):
    with MockChatServer(fail_first=2, fail_status=429) as server:
        out = generate_batch(job_for(server, max_in_flight=1, max_retries=3), learner)
    assert len(out) == 20 and len(server.requests) == 4


def test_generate_batch_transport_error_keeps_partial(learner):
    with MockChatServer(fail_after=2) as server:
        with pytest.raises(TransportError) as info:
            generate_batch(job_for(server, target_total=50, max_in_flight=1, max_retries=1), learner)
    assert len(info.value.partial) == 20
    assert {s.source for s in info.value.partial} == {"llm"}


def test_echo_of_fixed_sentence_collapses_under_dedup(learner):
    with MockChatServer(responder=lambda body: "The cassa is closed.\nThe cassa is closed.") as server:
        out = generate_batch(job_for(server, target_total=8), learner)
    assert {s.text for s in out} == {"The cassa is closed."} and len(out) == 8
    assert len(dedup_near_duplicates(out)) == 1


def test_empty_replies_are_counted(learner):
    stats = Counter()
    with MockChatServer(responder=lambda body: "") as server:
        out = generate_batch(job_for(server, target_total=5, max_requests=6), learner, stats=stats)
    assert len(out) == 0 and stats["empty_reply"] == 6


def test_source_too_small():
    with pytest.raises(ValueError, match="10 are needed"):
        generate_batch(
            GenerationJob("http://127.0.0.1:9", "m", target_total=1),
            Corpus((AnnotatedSentence("a", "x", ()),)),
        )


def test_job_validation():
    with pytest.raises(ValueError):
        GenerationJob("u", "m", 1, temperature=0)
    with pytest.raises(ValueError):
        GenerationJob("u", "m", 1, examples_per_prompt=0)


def test_client_auth_header_and_client_errors(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "sekret")
    with MockChatServer() as server, ChatClient(server.url, "m", backoff=0) as client:
        client.complete("1. hello")
    assert server.headers[0]["Authorization"] == "Bearer sekret"
    monkeypatch.delenv(API_KEY_ENV)
    with MockChatServer(fail_first=1, fail_status=400) as server, ChatClient(server.url, "m", backoff=0) as client:
        with pytest.raises(TransportError, match="HTTP 400"):
            client.complete("x")
    assert len(server.requests) == 1 and "Authorization" not in server.headers[0]


def test_client_unreachable_endpoint():
    with MockChatServer() as server:
        url = server.url
    with ChatClient(url, "m", max_retries=1, backoff=0, timeout=2) as client:
        with pytest.raises(TransportError, match="2 attempts"):
            client.complete("x")


# ---------------------------------------------------------------------------
# annotation


def markup_responder(body):
    prompt = body["messages"][0]["content"]
    sentence = prompt.splitlines()[-1].split(". ", 1)[1]
    return "1. " + sentence.replace("decreases", '<err tag="TenseSemantics" corr="decreased">decreases</err>')


def test_annotate_corpus():
    corpus = Corpus(
        (
            AnnotatedSentence("a", "The share decreases in 1999.", (), "llm"),
            AnnotatedSentence("b", "Nothing to mark.", (), "llm"),
        )
    )
    stats = Counter()
    with MockChatServer(responder=markup_responder) as server, ChatClient(server.url, "m", backoff=0) as client:
        out = annotate_corpus(corpus, client, stats=stats)
    assert out.sentences[0].spans == (Span(10, 19, ErrorTag.TENSE_SEMANTICS, "decreased"),)
    assert out.sentences[1].spans == ()
    assert stats["annotated"] == 1
    assert out.provenance["annotate"]["model"] == "m"


def test_annotate_corpus_rejects_changed_text_and_bad_markup():
    corpus = Corpus((AnnotatedSentence("a", "Original text.", (), "llm"), AnnotatedSentence("b", "Other.", (), "llm")))

    def responder(body):
        if "Original" in body["messages"][0]["content"]:
            return 'Rewritten <err tag="Synonyms">text</err>.'
        return '<err tag="Synonyms">Other.'

    stats = Counter()
    with MockChatServer(responder=responder) as server, ChatClient(server.url, "m", backoff=0) as client:
        out = annotate_corpus(corpus, client, stats=stats)
    assert [s.spans for s in out] == [(), ()]
    assert stats["text_changed"] == 1 and stats["markup_error"] == 1


def test_translation_lexicon_caches():
    with MockChatServer(responder=lambda body: "касса.") as server, ChatClient(server.url, "m", backoff=0) as client:
        lex = ChatTranslationLexicon(client, {"money": "деньги"})
        assert lex.get("money") == "деньги"
        assert lex.get("Cashier") == "касса"
        assert lex.get("cashier") == "касса"
    assert len(server.requests) == 1 and server.requests[0]["temperature"] == 0.0


# ---------------------------------------------------------------------------
# review


def forty():
    return Corpus(tuple(AnnotatedSentence(f"g{i:02d}", f"Sentence {i}.", (), "llm") for i in range(40)))


def test_review_38_of_40(tmp_path):
    corpus = forty()
    path = tmp_path / "review.tsv"
    sheet = export_review_sheet(corpus, path)
    assert len(sheet) == 40 and {r.verdict for r in sheet.rows} == {"unreviewed"}
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id\ttext\ttag\tverdict"
    edited = [lines[0]] + [
        line.rsplit("\t", 1)[0] + ("\treject" if i in (5, 17) else "\taccept") for i, line in enumerate(lines[1:])
    ]
    path.write_text("\n".join(edited) + "\n", encoding="utf-8")
    out = apply_review(corpus, read_review_sheet(path))
    assert len(out) == 38
    assert "g05" not in out.by_id() and "g17" not in out.by_id()
    assert out.provenance["review"] == {"accept": 38, "reject": 2}


def test_review_errors(tmp_path):
    corpus = forty()
    with pytest.raises(ValueError, match="40 sentences are unreviewed"):
        apply_review(corpus, export_review_sheet(corpus))
    assert len(apply_review(corpus, export_review_sheet(corpus), keep_unreviewed=True)) == 40
    with pytest.raises(ValueError, match="unknown sentence id"):
        apply_review(corpus, ReviewSheet([ReviewRow("nope", "x", "")]))
    assert len(apply_review(Corpus(), ReviewSheet())) == 0
    path = tmp_path / "bad.tsv"
    path.write_text("id\ttext\ttag\tverdict\ng00\tx\t\tmaybe\n", encoding="utf-8")
    with pytest.raises(FormatError, match="line 2"):
        read_review_sheet(path)
    path.write_text("wrong header\n", encoding="utf-8")
    with pytest.raises(FormatError, match="header"):
        read_review_sheet(path)
