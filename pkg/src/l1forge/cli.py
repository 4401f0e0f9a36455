"""``l1forge`` command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 transport error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

from . import brat, corpus as cmod, dictionary as dmod, injectors, llm, metrics
from .corpus import Corpus, ErrorTag, FormatError, read_corpus, write_corpus
from .morphology import load_verb_table
from .tokenize import check_tokens, read_pretagged
from .translit import load_lexicon, load_table

logger = logging.getLogger("l1forge")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3


@dataclass
class RunConfig:
    subcommand: str
    seed: int = 42
    params: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        params = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}
        params.pop("func", None)
        params.pop("command", None)
        seed = params.pop("seed", 42)
        return cls(args.command, seed, params)


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so ``run`` can map usage errors to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _report(obj, fmt: str, out: Path | None = None) -> None:
    if fmt == "json":
        _emit(json.dumps(obj.to_dict(), ensure_ascii=False, indent=2, sort_keys=False), out)
    else:
        _emit(obj.format_table(), out)


def _warn_stats(name: str, stats: Counter) -> None:
    for key in sorted(stats):
        logger.info("%s: %s=%d", name, key, stats[key])


# ---------------------------------------------------------------------------
# Subcommands


def cmd_import(args, cfg: RunConfig) -> int:
    stats = Counter()
    sentences = []
    if args.dir:
        sentences.extend(brat.import_brat_dir(args.dir, stats))
    if len(args.txt) != len(args.ann):
        raise _UsageError("--txt and --ann must be given the same number of times")
    for txt, ann in zip(args.txt, args.ann):
        sentences.extend(
            brat.import_brat(
                Path(txt).read_text(encoding="utf-8"), Path(ann).read_text(encoding="utf-8"), Path(txt).stem, stats
            )
        )
    if not args.dir and not args.txt:
        raise _UsageError("import needs --dir or --txt/--ann pairs")
    out = Corpus(tuple(sentences), {"import": {"stats": dict(sorted(stats.items()))}, "run": asdict(cfg)})
    write_corpus(out, args.out)
    _warn_stats("import", stats)
    return EXIT_OK


def cmd_filter(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    kept = cmod.filter_min_tokens(c, args.min_tokens)
    logger.info("filter: kept %d of %d sentences", len(kept), len(c))
    write_corpus(kept.derive(kept.sentences, filter={"min_tokens": args.min_tokens, "dropped": len(c) - len(kept)}), args.out)
    return EXIT_OK


def cmd_build_dict(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    tags = [ErrorTag.parse(t) for t in args.tag] if args.tag else list(ErrorTag)
    out = []
    for tag in tags:
        stats = Counter()
        d = dmod.build_dictionary(c, tag, stats)
        if args.suggestions:
            d = dmod.merge_suggestions(d, args.suggestions, stats)
        _warn_stats(f"build-dict {tag.value}", stats)
        out.append(d)
    dmod.write_dictionaries(out, args.out)
    return EXIT_OK


def _pretagged_injector(inject, pretagged):
    def run_one(sentence, rng):
        tokens = pretagged.get(sentence.id)
        if tokens is not None:
            check_tokens(sentence.text, tokens)
        return inject(sentence, rng=rng, tokens=tokens)

    return run_one


def cmd_inject(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    if args.method == "dict":
        if not args.dict:
            raise _UsageError("--method dict needs --dict")
        dicts = [d for d in dmod.read_dictionaries(args.dict) if len(d)]
        if args.tag:
            wanted = {ErrorTag.parse(t) for t in args.tag}
            dicts = [d for d in dicts if d.tag in wanted]
        if not dicts:
            raise ValueError(f"{args.dict}: no non-empty dictionaries to inject from")
        inject = partial(injectors.inject_dictionary, dictionary=dicts)
    elif args.method == "tense":
        verbs = load_verb_table(args.irregular) if args.irregular else None
        inject = partial(injectors.inject_tense, verbs=verbs)
    else:
        lexicon = load_lexicon(args.lexicon)
        table = load_table(args.table) if args.table else None
        inject = partial(injectors.inject_transliteration, lexicon=lexicon, table=table)
    pretagged = read_pretagged(args.pretagged) if args.pretagged else {}
    stats = Counter()
    out = injectors.inject_corpus(
        c, _pretagged_injector(inject, pretagged), args.seed, stats=stats, method=args.method
    )
    write_corpus(out.derive(out.sentences, run=asdict(cfg)), args.out)
    logger.info("inject %s: fired on %d of %d sentences", args.method, stats["fired"], stats["input"])
    return EXIT_OK


def cmd_gen(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    job = llm.GenerationJob(
        endpoint=args.endpoint,
        model_name=args.model,
        target_total=args.target,
        temperature=args.temperature,
        examples_per_prompt=args.examples,
        paraphrase_count=args.paraphrases,
        seed=args.seed,
        max_in_flight=args.max_in_flight,
        max_retries=args.retries,
        backoff=args.backoff,
    )
    stats = Counter()
    try:
        out = llm.generate_batch(job, c, stats=stats)
    except llm.TransportError as exc:
        if exc.partial is not None and args.partial:
            write_corpus(exc.partial.derive(exc.partial.sentences, run=asdict(cfg)), args.partial)
        raise
    write_corpus(out.derive(out.sentences, run=asdict(cfg)), args.out)
    _warn_stats("gen", stats)
    return EXIT_OK


def cmd_annotate(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    instructions = Path(args.instructions).read_text(encoding="utf-8") if args.instructions else llm.DEFAULT_INSTRUCTIONS
    stats = Counter()
    with llm.ChatClient(args.endpoint, args.model, max_retries=args.retries, backoff=args.backoff) as client:
        out = llm.annotate_corpus(c, client, instructions, args.temperature, args.max_in_flight, stats)
    write_corpus(out.derive(out.sentences, run=asdict(cfg)), args.out)
    _warn_stats("annotate", stats)
    return EXIT_OK


def cmd_dedup(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    stats = Counter()
    out = llm.dedup_near_duplicates(c, args.threshold, stats)
    write_corpus(out, args.out)
    logger.info("dedup: kept %d of %d sentences", len(out), len(c))
    return EXIT_OK


def cmd_review_export(args, cfg: RunConfig) -> int:
    llm.export_review_sheet(read_corpus(args.inp), args.out)
    return EXIT_OK


def cmd_review_apply(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    sheet = llm.read_review_sheet(args.sheet)
    write_corpus(llm.apply_review(c, sheet, args.keep_unreviewed), args.out)
    return EXIT_OK


def cmd_split(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    train, test = cmod.split_corpus(c, args.ratio, args.seed)
    write_corpus(train.derive(train.sentences, run=asdict(cfg)), args.out_train)
    write_corpus(test.derive(test.sentences, run=asdict(cfg)), args.out_test)
    logger.info("split: %d train, %d test", len(train), len(test))
    return EXIT_OK


def cmd_stats(args, cfg: RunConfig) -> int:
    sentences = []
    for path in args.inp:
        sentences.extend(read_corpus(path).sentences)
    _report(cmod.corpus_stats(sentences), args.format, args.out)
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    report = metrics.span_f1(read_corpus(args.gold), read_corpus(args.pred), args.mode)
    _report(report, args.format, args.out)
    return EXIT_OK


def cmd_iaa(args, cfg: RunConfig) -> int:
    corpora = {}
    for spec in args.annotator:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).stem, spec
        if name in corpora:
            raise _UsageError(f"duplicate annotator name {name!r}")
        corpora[name] = read_corpus(path)
    if len(corpora) < 2:
        raise _UsageError("iaa needs at least two --annotator files")
    labels = metrics.annotator_labels(corpora, args.exact_sets)
    _report(metrics.pairwise_kappa(labels), args.format, args.out)
    return EXIT_OK


@dataclass
class _DiversityReport:
    rows: dict

    def to_dict(self):
        return self.rows

    def format_table(self):
        width = max(len(k) for k in self.rows)
        return "\n".join(
            f"{k.ljust(width)}  {f'{v:.4f}' if isinstance(v, float) else v}" for k, v in self.rows.items()
        )


def cmd_diversity(args, cfg: RunConfig) -> int:
    c = read_corpus(args.inp)
    if args.downsample:
        c = metrics.downsample(c, args.downsample, args.seed)
    rows = {"sentences": len(c), "self_bleu": metrics.self_bleu(c, args.max_n)}
    if args.source:
        rows[f"novelty_{args.n}gram"] = metrics.ngram_novelty(c, read_corpus(args.source), args.n)
    _report(_DiversityReport(rows), args.format, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="l1forge", description="Learner-English L1-interference corpus toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress counters to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    def seed(sp):
        sp.add_argument("--seed", type=int, default=42)

    def fmt(sp):
        sp.add_argument("--format", choices=("json", "table"), default="table")
        sp.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")

    def llm_flags(sp):
        sp.add_argument("--endpoint", required=True)
        sp.add_argument("--model", required=True)
        sp.add_argument("--temperature", type=float, default=1.0)
        sp.add_argument("--max-in-flight", type=int, default=4)
        sp.add_argument("--retries", type=int, default=3)
        sp.add_argument("--backoff", type=float, default=1.0)

    sp = add("import", cmd_import, "import BRAT .txt/.ann pairs into a JSONL corpus")
    sp.add_argument("--dir", type=Path)
    sp.add_argument("--txt", action="append", default=[])
    sp.add_argument("--ann", action="append", default=[])
    sp.add_argument("--out", type=Path, required=True)

    sp = add("filter", cmd_filter, "drop sentences shorter than --min-tokens tokens")
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--min-tokens", type=int, default=5)
    sp.add_argument("--out", type=Path, required=True)

    sp = add("build-dict", cmd_build_dict, "build per-tag error dictionaries from an annotated corpus")
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--tag", action="append", default=[], help="repeatable; default: all tags")
    sp.add_argument("--suggestions", type=Path)
    sp.add_argument("--out", type=Path, required=True)

    sp = add("inject", cmd_inject, "inject one error per sentence into a clean corpus")
    sp.add_argument("--method", choices=("dict", "tense", "translit"), required=True)
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--dict", type=Path, help="dictionary JSON from build-dict")
    sp.add_argument("--tag", action="append", default=[], help="restrict --method dict to these tags")
    sp.add_argument("--lexicon", type=Path, help="english<TAB>russian noun lexicon")
    sp.add_argument("--table", type=Path, help="transliteration table overrides")
    sp.add_argument("--irregular", type=Path, help="irregular verb table")
    sp.add_argument("--pretagged", type=Path, help="pre-tagged token TSV")
    seed(sp)

    sp = add("gen", cmd_gen, "generate learner-like sentences through a chat-completions endpoint")
    llm_flags(sp)
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--target", type=int, required=True)
    sp.add_argument("--examples", type=int, default=10)
    sp.add_argument("--paraphrases", type=int, default=4)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--partial", type=Path, help="where to save candidates collected before a transport failure")
    seed(sp)

    sp = add("annotate", cmd_annotate, "annotate sentences with error spans through a chat-completions endpoint")
    llm_flags(sp)
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--instructions", type=Path)
    sp.add_argument("--out", type=Path, required=True)

    sp = add("dedup", cmd_dedup, "drop near-duplicate sentences")
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--threshold", type=float, default=0.9)
    sp.add_argument("--out", type=Path, required=True)

    sp = add("review-export", cmd_review_export, "write a TSV review sheet")
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--out", type=Path, required=True)

    sp = add("review-apply", cmd_review_apply, "drop sentences rejected in a review sheet")
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--sheet", type=Path, required=True)
    sp.add_argument("--keep-unreviewed", action="store_true")
    sp.add_argument("--out", type=Path, required=True)

    sp = add("split", cmd_split, "seeded train/test split")
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--ratio", type=float, default=0.8)
    sp.add_argument("--out-train", type=Path, required=True)
    sp.add_argument("--out-test", type=Path, required=True)
    seed(sp)

    sp = add("stats", cmd_stats, "span and sentence counts per tag, source and split")
    sp.add_argument("--in", dest="inp", type=Path, action="append", required=True)
    fmt(sp)

    sp = add("eval", cmd_eval, "per-tag span precision, recall and F1")
    sp.add_argument("--gold", type=Path, required=True)
    sp.add_argument("--pred", type=Path, required=True)
    sp.add_argument("--mode", choices=("strict", "overlap"), default="strict")
    fmt(sp)

    sp = add("iaa", cmd_iaa, "pairwise Cohen's kappa between annotators")
    sp.add_argument("--annotator", action="append", default=[], help="NAME=path.jsonl or path.jsonl; repeatable")
    sp.add_argument("--exact-sets", action="store_true", help="label sentences by their full tag set")
    fmt(sp)

    sp = add("diversity", cmd_diversity, "Self-BLEU and n-gram novelty")
    sp.add_argument("--in", dest="inp", type=Path, required=True)
    sp.add_argument("--source", type=Path, help="reference corpus for n-gram novelty")
    sp.add_argument("--max-n", type=int, default=4)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--downsample", type=int)
    seed(sp)
    fmt(sp)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    cfg = RunConfig.from_args(args)
    try:
        return args.func(args, cfg)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"l1forge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except llm.TransportError as exc:
        print(f"l1forge: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (FormatError, ValueError, OSError, KeyError) as exc:
        print(f"l1forge: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
