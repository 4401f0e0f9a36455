import json
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from l1forge.corpus import AnnotatedSentence, ErrorTag, Span

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(str(resources.files("l1forge") / "data" / "fixtures"))
TAGS = list(ErrorTag)


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((FIXTURES / "manifest.json").read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Strategies shared by the property tests

WORDS = st.sampled_from(
    "the a share price rose fell in of and students money cashier bank year data people rates went".split()
)
tags = st.sampled_from(TAGS)


@st.composite
def sentence_texts(draw, min_words=1, max_words=12):
    words = draw(st.lists(WORDS, min_size=min_words, max_size=max_words))
    return " ".join(words) + draw(st.sampled_from([".", "!", "?", ""]))


@st.composite
def spans_for(draw, text, max_spans=4):
    out = {}
    n = len(text)
    if n == 0:
        return ()
    for _ in range(draw(st.integers(0, max_spans))):
        start = draw(st.integers(0, n - 1))
        end = draw(st.integers(start + 1, min(n, start + 12)))
        tag = draw(tags)
        corr = draw(st.one_of(st.none(), st.text("abcxyz ", min_size=1, max_size=6)))
        out[(start, end, tag)] = Span(start, end, tag, corr)
    return tuple(out.values())


@st.composite
def annotated_sentences(draw, sid="s0", source="realec"):
    text = draw(sentence_texts())
    return AnnotatedSentence(sid, text, draw(spans_for(text)), source, draw(st.sampled_from([None, "train", "test"])))


@st.composite
def corpora_sentences(draw, min_size=0, max_size=12):
    n = draw(st.integers(min_size, max_size))
    return [draw(annotated_sentences(sid=f"s{i}", source=draw(st.sampled_from(["realec", "ppo", "rule", "llm"]))))
            for i in range(n)]


# ---------------------------------------------------------------------------
# Acceptance summary: one line per criterion at the end of the run


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    results = item.config._acceptance
    prev = results.get(number, (title, True, 0.0))
    results[number] = (title, prev[1] and report.passed, prev[2] + (report.duration if report.when == "call" else 0))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, duration = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({duration:.2f} s)")
