"""Run the whole augmentation pipeline on the bundled fixtures and print the accounting.

The LLM steps talk to the in-process mock server unless --endpoint is given, in
which case the key is read from L1FORGE_API_KEY.

    python3 scripts/run_pipeline.py [--work DIR] [--seed N] [--target N] [--endpoint URL --model NAME]
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from contextlib import ExitStack, redirect_stdout
from importlib import resources
from io import StringIO
from pathlib import Path

from l1forge.cli import run
from l1forge.corpus import read_corpus
from l1forge.mock_server import MockChatServer

FIXTURES = Path(str(resources.files("l1forge") / "data" / "fixtures"))


def step(*argv) -> str:
    buf = StringIO()
    with redirect_stdout(buf):
        code = run([str(a) for a in argv])
    if code:
        sys.exit(f"step failed with exit code {code}: l1forge {' '.join(map(str, argv))}")
    return buf.getvalue()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", type=Path, help="output directory (default: a temporary one)")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--target", type=int, default=40, help="number of LLM generations to request")
    ap.add_argument("--endpoint")
    ap.add_argument("--model", default="mock")
    args = ap.parse_args()

    with ExitStack() as stack:
        w = args.work or Path(stack.enter_context(tempfile.TemporaryDirectory()))
        w.mkdir(parents=True, exist_ok=True)
        endpoint = args.endpoint or stack.enter_context(MockChatServer()).url
        llm_flags = ["--endpoint", endpoint, "--model", args.model, "--seed", args.seed]

        step("import", "--dir", FIXTURES / "realec", "--out", w / "realec.jsonl")
        step("filter", "--in", w / "realec.jsonl", "--out", w / "realec.f.jsonl")
        step("filter", "--in", FIXTURES / "clean.jsonl", "--out", w / "clean.f.jsonl")
        step("build-dict", "--in", w / "realec.f.jsonl", "--suggestions", FIXTURES / "suggestions.tsv",
             "--out", w / "dict.json")  # fmt: skip
        for method in ("dict", "tense", "translit"):
            step("inject", "--method", method, "--in", w / "clean.f.jsonl", "--dict", w / "dict.json",
                 "--seed", args.seed, "--out", w / f"rule.{method}.jsonl")  # fmt: skip
        step("gen", *llm_flags, "--in", w / "realec.f.jsonl", "--target", args.target, "--out", w / "gen.jsonl")
        step("dedup", "--in", w / "gen.jsonl", "--out", w / "gen.dedup.jsonl")
        step("annotate", *llm_flags[:4], "--in", w / "gen.dedup.jsonl", "--out", w / "llm.jsonl")
        step("split", "--in", w / "realec.f.jsonl", "--seed", args.seed,
             "--out-train", w / "train.jsonl", "--out-test", w / "test.jsonl")  # fmt: skip

        parts = ["train", "test", "rule.dict", "rule.tense", "rule.translit", "llm"]
        for name in ["realec", "realec.f", "clean.f", *parts[2:], "gen", "gen.dedup", "train", "test"]:
            print(f"{name:<14} {len(read_corpus(w / f'{name}.jsonl')):>6} sentences")
        print()
        print(step("stats", *sum((["--in", w / f"{p}.jsonl"] for p in parts), []), "--format", "table"))
        print(step("diversity", "--in", w / "rule.translit.jsonl", "--source", w / "test.jsonl", "--seed", args.seed))
        report = json.loads(
            step("eval", "--gold", w / "realec.jsonl", "--pred", FIXTURES / "predictions.jsonl", "--format", "json")
        )
        print(f"baseline predictions, strict macro F1: {report['macro_f1']:.2f}")
        if args.work:
            print(f"outputs in {w}")


if __name__ == "__main__":
    main()
