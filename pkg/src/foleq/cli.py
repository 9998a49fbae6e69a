"""Command-line front end.

Subcommands:
  parse       print the syntax tree and canonical rendering of one formula
  score       score a single pair or a corpus file
  serve       run the line-delimited JSON scoring service
  train-demo  run the small policy-optimization demonstration

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
unparseable input).  Diagnostics go to stderr; results go to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys

from .corpus import corpus_le, load_pairs
from .equivalence import le_score
from .service import ServiceConfig, serve, serve_socket
from .sgrpo import TrainDemoConfig, Hyperparams, default_demo_config, train_demo, write_trace
from .syntax import CapExceeded, ParseError, canonicalize, parse, render

USAGE_ERROR = 1
DATA_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="foleq", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    p_parse = sub.add_parser("parse", help="parse one formula and print its tree")
    p_parse.add_argument("formula")
    p_parse.add_argument(
        "--input-mode",
        choices=("precedence", "fully-parenthesized"),
        default="precedence",
        help="how to read under-parenthesized input",
    )

    p_score = sub.add_parser("score", help="score a pair or a corpus")
    p_score.add_argument("prediction", nargs="?")
    p_score.add_argument("reference", nargs="?")
    p_score.add_argument("--pred-file", help="predictions file, or combined pairs file")
    p_score.add_argument("--ref-file", help="references file aligned line-by-line with --pred-file")
    p_score.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl",
                         help="combined pairs file format when --ref-file is absent")
    p_score.add_argument("--mode", choices=("original", "optimized"))
    p_score.add_argument("--threshold", type=float)
    p_score.add_argument("--chunk-size", type=int)
    p_score.add_argument("--max-atoms", type=int)
    p_score.add_argument("--config", help="flat JSON config file")
    p_score.add_argument("--out", help="write per-pair results as JSON lines")

    p_serve = sub.add_parser("serve", help="run the scoring service")
    transport = p_serve.add_mutually_exclusive_group(required=True)
    transport.add_argument("--stdio", action="store_true")
    transport.add_argument("--socket", metavar="PATH")
    p_serve.add_argument("--config", help="flat JSON config file")

    p_demo = sub.add_parser("train-demo", help="run the toy training loop")
    p_demo.add_argument("--config", help="JSON config (iterations, learning_rate, seed, ...)")
    p_demo.add_argument("--trace", help="write per-iteration records as JSON lines")
    p_demo.add_argument("--iterations", type=int)
    p_demo.add_argument("--learning-rate", type=float)
    p_demo.add_argument("--seed", type=int)

    return top


def _load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    return raw


def _service_config(args) -> ServiceConfig:
    mapping = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for flag in ("mode", "threshold", "max_atoms", "chunk_size"):
        value = getattr(args, flag, None)
        if value is not None:
            mapping[flag] = value
    return ServiceConfig.from_mapping(mapping)


def _cmd_parse(args) -> int:
    try:
        tree = parse(args.formula, mode=args.input_mode)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return DATA_ERROR
    print(repr(tree))
    print(render(canonicalize(tree)))
    return 0


def _score_single(args, config: ServiceConfig) -> int:
    mode = args.mode or config.mode
    try:
        report = le_score(args.prediction, args.reference, mode=mode, config=config.le)
    except (ParseError, CapExceeded, ValueError) as exc:
        try:
            parse(args.reference)
        except ParseError:
            print(f"unparseable reference: {exc}", file=sys.stderr)
            return DATA_ERROR
        print(f"warning: unparseable prediction, scoring 0: {exc}", file=sys.stderr)
        print(json.dumps({"score": 0.0, "mode": mode}, ensure_ascii=False))
        return 0
    print(json.dumps(report.to_dict(), ensure_ascii=False))
    return 0


def _read_aligned(pred_path: str, ref_path: str):
    from .corpus import EvalPair

    with open(pred_path, "r", encoding="utf-8") as handle:
        preds = [line.rstrip("\n") for line in handle]
    with open(ref_path, "r", encoding="utf-8") as handle:
        refs = [line.rstrip("\n") for line in handle]
    if len(preds) != len(refs):
        raise ValueError(
            f"line counts differ: {len(preds)} predictions vs {len(refs)} references"
        )
    return [EvalPair(str(i), p, r) for i, (p, r) in enumerate(zip(preds, refs))]


def _cmd_score(args) -> int:
    try:
        config = _service_config(args)
    except (OSError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return DATA_ERROR

    if args.prediction is not None and args.reference is not None and not args.pred_file:
        return _score_single(args, config)
    if not args.pred_file:
        print("score needs either two formulas or --pred-file", file=sys.stderr)
        return USAGE_ERROR
    if args.prediction is not None:
        print("give either positional formulas or files, not both", file=sys.stderr)
        return USAGE_ERROR

    try:
        if args.ref_file:
            pairs = _read_aligned(args.pred_file, args.ref_file)
            load_failures: list = []
        else:
            pairs, load_failures = load_pairs(args.pred_file, fmt=args.format)
    except (OSError, ValueError) as exc:
        print(f"cannot read pairs: {exc}", file=sys.stderr)
        return DATA_ERROR
    if not pairs:
        print("no valid pairs found", file=sys.stderr)
        return DATA_ERROR

    mode = args.mode or config.mode
    report = corpus_le(pairs, mode=mode, config=config.le, bleu_config=config.bleu)
    for lineno, message in load_failures:
        print(f"warning: line {lineno}: {message}", file=sys.stderr)
    summary = {
        "pairs": len(pairs),
        "mean_le": report.mean_le,
        "bleu": report.bleu,
        "failures": len(report.failures) + len(load_failures),
    }
    print(json.dumps(summary, ensure_ascii=False))
    if args.out:
        errors = dict(report.failures)
        with open(args.out, "w", encoding="utf-8") as handle:
            for pair, item in zip(pairs, report.per_pair):
                record: dict = {"id": pair.id}
                if item is None:
                    record["score"] = 0.0
                    record["error"] = errors.get(pair.id, "failed to score")
                else:
                    record.update(item.to_dict())
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return 0


def _cmd_serve(args) -> int:
    try:
        config = _service_config(args)
    except (OSError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return DATA_ERROR
    if args.stdio:
        serve(sys.stdin, sys.stdout, config)
    else:
        serve_socket(args.socket, config)
    return 0


def _cmd_train_demo(args) -> int:
    raw: dict = {}
    if args.config:
        try:
            raw = _load_config_file(args.config)
        except (OSError, ValueError) as exc:
            print(f"bad config: {exc}", file=sys.stderr)
            return DATA_ERROR
    if args.iterations is not None:
        raw["iterations"] = args.iterations
    if args.learning_rate is not None:
        raw["learning_rate"] = args.learning_rate
    if args.seed is not None:
        raw["seed"] = args.seed

    try:
        config = _demo_config_from_mapping(raw)
    except (ValueError, TypeError) as exc:
        print(f"bad demo config: {exc}", file=sys.stderr)
        return DATA_ERROR

    trace = train_demo(config)
    if args.trace:
        write_trace(trace, args.trace)
    first, last = trace[0], trace[-1]
    print(json.dumps({
        "iterations": len(trace),
        "first_mean_reward": first["mean_reward"],
        "final_mean_reward": last["mean_reward"],
        "final_objective": last["objective"],
    }))
    return 0


def _demo_config_from_mapping(raw: dict) -> TrainDemoConfig:
    known = {"iterations", "learning_rate", "seed", "vocab", "references", "group_size"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown keys: {sorted(unknown)}")
    base = default_demo_config(
        iterations=int(raw.get("iterations", 500)),
        learning_rate=float(raw.get("learning_rate", 0.5)),
        seed=int(raw.get("seed", 0)),
    )
    if "vocab" not in raw and "references" not in raw and "group_size" not in raw:
        return base
    hp = base.hp
    if "group_size" in raw:
        hp = Hyperparams(
            group_size=int(raw["group_size"]),
            learning_rate=hp.learning_rate,
            seed=hp.seed,
        )
    return TrainDemoConfig(
        vocab=tuple(raw.get("vocab", base.vocab)),
        references=tuple(raw.get("references", base.references)),
        iterations=base.iterations,
        hp=hp,
    )


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit status 2 for usage problems; fold that into the
        # documented usage-error code and keep --help's success status
        return 0 if exc.code == 0 else USAGE_ERROR
    handlers = {
        "parse": _cmd_parse,
        "score": _cmd_score,
        "serve": _cmd_serve,
        "train-demo": _cmd_train_demo,
    }
    return handlers[args.command](args)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
