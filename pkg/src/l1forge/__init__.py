"""Toolkit for learner-English corpora annotated with L1-interference error spans."""

from .corpus import (
    AnnotatedSentence,
    Corpus,
    CorpusStats,
    ErrorTag,
    FormatError,
    Span,
    corpus_stats,
    filter_min_tokens,
    read_corpus,
    split_corpus,
    write_corpus,
)
from .dictionary import ErrorDictionary, build_dictionary, lookup, merge_suggestions
from .injectors import inject_dictionary, inject_tense, inject_transliteration, sample_first_word
from .metrics import cohen_kappa, ngram_novelty, pairwise_kappa, self_bleu, span_f1

__all__ = [
    "AnnotatedSentence",
    "Corpus",
    "CorpusStats",
    "ErrorDictionary",
    "ErrorTag",
    "FormatError",
    "Span",
    "build_dictionary",
    "cohen_kappa",
    "corpus_stats",
    "filter_min_tokens",
    "inject_dictionary",
    "inject_tense",
    "inject_transliteration",
    "lookup",
    "merge_suggestions",
    "ngram_novelty",
    "pairwise_kappa",
    "read_corpus",
    "sample_first_word",
    "self_bleu",
    "span_f1",
    "split_corpus",
    "write_corpus",
]
