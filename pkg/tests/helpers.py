"""Shared oracles for the test modules."""

import re

from l1forge.corpus import AnnotatedSentence

# Independent of the tokenizer: a standalone four-digit number in 1000..2099.
YEAR_RE = re.compile(r"(?<![\w.,])(1\d{3}|20\d{2})(?![\w]|[.,]\d)")


def has_year(text: str) -> bool:
    return YEAR_RE.search(text) is not None


def check_injection(before: AnnotatedSentence, after: AnnotatedSentence, tag=None) -> None:
    """Assert the single-edit contract: one new span, untouched context, exact reversal."""
    new = set(after.spans) - _shifted_old(before, after)
    assert len(after.spans) == len(before.spans) + 1
    assert len(new) == 1
    (span,) = new
    if tag is not None:
        assert span.tag == tag
    assert 0 <= span.start < span.end <= len(after.text)
    for sp in after.spans:
        assert 0 <= sp.start < sp.end <= len(after.text)
    # Text outside the span is untouched, and substituting the correction restores the input.
    assert after.text[: span.start] == before.text[: span.start]
    assert after.text[span.end :] == before.text[len(before.text) - (len(after.text) - span.end) :]
    restored = after.text[: span.start] + span.correction + after.text[span.end :]
    assert restored == before.text
    assert after.text != before.text


def _shifted_old(before, after):
    delta = len(after.text) - len(before.text)
    out = set()
    for sp in before.spans:
        out.add(sp)
        out.add(type(sp)(sp.start + delta, sp.end + delta, sp.tag, sp.correction))
    return out
