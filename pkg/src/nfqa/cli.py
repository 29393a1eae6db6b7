"""Command-line entry point.

Subcommands: index (build the BM25 index), ask (answer one question),
eval (rank candidates over a dataset and aggregate MRR/MPR), build-dataset
(curate a benchmark file from source QA files), serve (HTTP API).

Exit codes map to the error taxonomy: 0 success, 2 input, 3 parse,
4 transport, 5 config, 1 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataset as ds
from .config import AppConfig
from .core import ConfigError, NfqaError, NfqType, Question
from .evaluate import run_eval
from .retrieve import Bm25Params, build_index

log = logging.getLogger(__name__)

METHOD_CHOICES = ("llm", "rag", "typed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build a BM25 index from a JSONL corpus")
    p_index.add_argument("corpus", help="JSONL corpus of {id, title, text} objects")
    p_index.add_argument("--out", required=True, help="index output directory")
    p_index.add_argument("--k1", type=float, default=0.9)
    p_index.add_argument("--b", type=float, default=0.4)
    p_index.set_defaults(func=cmd_index)

    p_ask = sub.add_parser("ask", help="answer a single question")
    p_ask.add_argument("question")
    p_ask.add_argument("--config", required=True)
    p_ask.add_argument("--method", choices=METHOD_CHOICES, default="typed")
    p_ask.add_argument("--type", dest="nfq_type", choices=[t.value for t in NfqType],
                       help="preset question type, skipping classification")
    p_ask.add_argument("--trace", metavar="PATH", help="also write the step trace as JSON")
    p_ask.set_defaults(func=cmd_ask)

    p_eval = sub.add_parser("eval", help="evaluate a method over a dataset file")
    p_eval.add_argument("dataset")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--method", choices=METHOD_CHOICES, default="typed")
    p_eval.add_argument("--out", help="write the results JSON here")
    p_eval.set_defaults(func=cmd_eval)

    p_build = sub.add_parser("build-dataset", help="curate a benchmark file from source QA files")
    p_build.add_argument("sources", nargs="+", metavar="TAG=PATH",
                         help="source files; bare paths take their stem as tag")
    p_build.add_argument("--config", required=True)
    p_build.add_argument("--out", required=True)
    p_build.set_defaults(func=cmd_build_dataset)

    p_serve = sub.add_parser("serve", help="serve the answering API over HTTP")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--bind", default="127.0.0.1:8080")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def cmd_index(args) -> int:
    index = build_index(args.corpus, Bm25Params(k1=args.k1, b=args.b), out_dir=args.out)
    print(f"docs={index.doc_count} avg_len={index.avg_doc_len:.2f}")
    return 0


def _load_config(path: str) -> AppConfig:
    config = AppConfig.load(path)
    level = str(config.section("logging").get("level", "info")).upper()
    logging.getLogger().setLevel(getattr(logging, level, logging.INFO))
    return config


def _make_question(text: str, type_label) -> Question:
    return Question(
        id="cli",
        text=text,
        nfq_type=NfqType.parse(type_label) if type_label else None,
    )


def cmd_ask(args) -> int:
    config = _load_config(args.config)
    pipeline = config.build_pipeline(need_index=args.method != "llm")
    question = _make_question(args.question, args.nfq_type)
    if args.method == "llm":
        answer = pipeline.answer_llm_only(question)
    elif args.method == "rag":
        answer = pipeline.answer_vanilla_rag(question)
    else:
        answer = pipeline.answer(question)
    print(answer.text)
    if args.trace:
        Path(args.trace).write_text(
            json.dumps([s.to_dict() for s in answer.trace], indent=2), encoding="utf-8"
        )
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    if config.scorer_matches_generator():
        log.warning("scorer and generator share a model/endpoint; rankings may be self-biased")
    pipeline = config.build_pipeline(need_index=args.method != "llm")
    answer_fn = {
        "llm": lambda q: pipeline.answer_llm_only(q).text,
        "rag": lambda q: pipeline.answer_vanilla_rag(q).text,
        "typed": lambda q: pipeline.answer(q).text,
    }[args.method]
    report = run_eval(args.dataset, args.method, answer_fn, config.build_role("scorer"))
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    print(report.table())
    if report.warning_count:
        print(f"warning: {report.warning_count} case(s) failed and were excluded", file=sys.stderr)
    return 0


def _parse_source_arg(arg: str) -> tuple[str, str]:
    if "=" in arg:
        tag, path = arg.split("=", 1)
        return tag, path
    return Path(arg).stem.upper(), arg


def cmd_build_dataset(args) -> int:
    config = _load_config(args.config)
    classifier = config.build_classifier()
    writers = config.build_roles("reference_writer")
    strong_role = "reference_strong" if config.has_role("reference_strong") else "annotator"
    strong = config.build_role(strong_role)
    annotator = config.build_role("annotator")
    include_rewrite = bool(config.section("dataset").get("include_rewrite", True))

    typed_records = []
    for source_arg in args.sources:
        tag, path = _parse_source_arg(source_arg)
        typed_records.extend(ds.filter_nfq(ds.read_source_records(path, tag), classifier))

    records, failures = ds.build_dataset(
        typed_records, writers, strong, annotator, include_rewrite=include_rewrite
    )
    ds.write_dataset(records, args.out)
    if not records:
        print("warning: no records survived filtering", file=sys.stderr)
        return 0
    if failures:
        print(f"warning: {failures} record(s) failed and were skipped", file=sys.stderr)
    print(ds.compute_stats(args.out).markdown_table())
    return 0


def cmd_serve(args) -> int:
    from .server import make_server

    config = _load_config(args.config)
    host, _, port = args.bind.rpartition(":")
    try:
        server = make_server(config, host or "127.0.0.1", int(port))
    except ValueError:
        raise ConfigError(f"bad bind address: {args.bind!r}") from None
    print(f"listening on {args.bind}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NfqaError as err:
        print(f"error[{type(err).__name__}]: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
