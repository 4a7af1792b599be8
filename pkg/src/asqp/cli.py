"""Batch command line: stats, encode, decode, train, predict, eval, gradcheck.

Exit codes: 0 success, 1 validation error (bad flags, bad files, failed
gradcheck bound), 2 internal error. All outputs are deterministic for fixed
inputs and seeds; --timing prints per-phase wall clock to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import contextmanager

from . import __doc__ as _pkg_doc
from .codec import (
    SENTIMENT_LABELS,
    CategoryGrid,
    SampleEncoding,
    TagMatrix,
    decode_encoding,
    encode_sample,
)
from .core import PER_CHARACTER, SPACE_PUNCT, CategoryVocab, Span, TagSchema, tokenize
from .data import (
    Corpus,
    Sample,
    StatsReport,
    compute_stats,
    load_jsonl,
    load_legacy,
    sample_to_record,
    split,
)
from .errors import AsqpError
from .eval import corpus_breakdown, corpus_error_analysis, corpus_prf
from .gradcheck import gradcheck_suite
from .model import (
    FileBacked,
    HashedFrozen,
    TrainableTable,
    build_token_vocab,
    load_checkpoint,
    predict,
    provider_from_params,
    save_checkpoint,
)
from .train import TrainConfig, evaluate_checkpoint, train


class CliError(AsqpError):
    """Bad usage or bad inputs; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want code 1
        raise CliError(message)


@contextmanager
def _phase(name: str, enabled: bool):
    started = time.perf_counter()
    yield
    if enabled:
        print(f"[timing] {name}: {time.perf_counter() - started:.3f}s", file=sys.stderr)


def _language_mode(lang: str) -> str:
    return PER_CHARACTER if lang == "zh" else SPACE_PUNCT


def _load_corpus(path: str, fmt: str, lang: str, lenient: bool) -> Corpus:
    mode = _language_mode(lang)
    alignment = "lenient" if lenient else "strict"
    try:
        if fmt == "legacy":
            return load_legacy(path, mode, alignment)
        return load_jsonl(path, mode, alignment)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    except AsqpError as exc:
        raise CliError(f"{path}: {exc}") from None


def _add_corpus_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=["jsonl", "legacy"], default="jsonl")
    parser.add_argument("--lang", choices=["en", "zh"], default="en")
    parser.add_argument("--lenient", action="store_true",
                        help="snap misaligned char spans outward instead of failing")


def build_parser() -> _Parser:
    parser = _Parser(prog="asqp", description=_pkg_doc)
    parser.add_argument("--timing", action="store_true", help="print per-phase wall clock")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_parser(name: str, help: str):
        sub = commands.add_parser(name, help=help)
        # accepted on either side of the subcommand; SUPPRESS keeps the
        # top-level value when the flag is absent here
        sub.add_argument("--timing", action="store_true", default=argparse.SUPPRESS,
                         help=argparse.SUPPRESS)
        return sub

    p = add_parser("stats", "corpus statistics table")
    p.add_argument("corpus")
    _add_corpus_flags(p)
    p.add_argument("--json", dest="json_out", help="also write the report as JSON")

    p = add_parser("encode", "dump debug encodings for every sample")
    p.add_argument("corpus")
    _add_corpus_flags(p)
    p.add_argument("--schema", choices=["standard", "variant1", "variant2"], default="standard")
    p.add_argument("--out", help="output path (default stdout)")

    p = add_parser("decode", "decode debug encodings back to quads")
    p.add_argument("encodings", help="file produced by the encode command")
    p.add_argument("--out", help="output path (default stdout)")

    p = add_parser("train", "fit the scorer with early stopping")
    p.add_argument("corpus")
    _add_corpus_flags(p)
    p.add_argument("--dev", help="dev corpus path (same format); default: split the corpus")
    p.add_argument("--split-ratios", default="0.7,0.15,0.15")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--schema", choices=["standard", "variant1", "variant2"], default="standard")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--patience", type=int, default=4)
    p.add_argument("--neg-rate", type=float, default=0.4)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--pair-dim", type=int, default=400)
    p.add_argument("--tag-threshold", type=float, default=0.5)
    p.add_argument("--cat-threshold", type=float, default=0.5)
    p.add_argument("--embeddings", help="embedding container; selects the file-backed provider")
    p.add_argument("--provider", choices=["trainable", "hashed"], default="trainable",
                   help="embedding source when --embeddings is not given")
    p.add_argument("--allow-conflicts", action="store_true",
                   help="train on lossy encodings instead of failing")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="write per-epoch history JSONL")

    p = add_parser("predict", "write predictions in the gold JSONL format")
    p.add_argument("corpus", help="JSONL with text (quads optional/ignored)")
    _add_corpus_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", help="embedding container for file-backed checkpoints")
    p.add_argument("--tag-threshold", type=float, default=0.5)
    p.add_argument("--cat-threshold", type=float, default=0.5)
    p.add_argument("--out", help="output path (default stdout)")

    p = add_parser("eval", "strict-match scores, breakdown, error typology")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    _add_corpus_flags(p)
    p.add_argument("--out", help="write the full report JSON here")

    p = add_parser("gradcheck", "finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds to sweep")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = {
            "stats": _cmd_stats,
            "encode": _cmd_encode,
            "decode": _cmd_decode,
            "train": _cmd_train,
            "predict": _cmd_predict,
            "eval": _cmd_eval,
            "gradcheck": _cmd_gradcheck,
        }[args.command]
        return handler(args)
    except AsqpError as exc:
        print(f"asqp: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - anything else is an internal error
        print(f"asqp: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def _write_lines(path: str | None, lines: list[str]) -> None:
    text = "\n".join(lines) + ("\n" if lines else "")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# stats


def _stats_table(report: StatsReport) -> list[str]:
    rows = [
        ("samples", f"{report.n_samples}"),
        ("words / sample", f"{report.words_per_sample:.2f}"),
        ("categories", f"{report.n_categories}"),
        ("quadruples", f"{report.n_quads}"),
        ("quads / sample", f"{report.quads_per_sample:.2f}"),
        ("EA&EO", f"{report.implicitness['EA&EO']}"),
        ("EA&IO", f"{report.implicitness['EA&IO']}"),
        ("IA&EO", f"{report.implicitness['IA&EO']}"),
        ("IA&IO", f"{report.implicitness['IA&IO']}"),
        ("POS", f"{report.sentiments['POS']}"),
        ("NEU", f"{report.sentiments['NEU']}"),
        ("NEG", f"{report.sentiments['NEG']}"),
        ("words / aspect", f"{report.words_per_aspect:.2f}"),
        ("words / opinion", f"{report.words_per_opinion:.2f}"),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [f"{name:<{width}}  {value}" for name, value in rows]
    if report.density:
        lines.append("")
        lines.append("quads/sample  ratio")
        for k, ratio in report.density.items():
            lines.append(f"{k:>12}  {ratio:.4f}")
    return lines


def _cmd_stats(args) -> int:
    with _phase("load", args.timing):
        corpus = _load_corpus(args.corpus, args.format, args.lang, args.lenient)
    with _phase("stats", args.timing):
        report = compute_stats(corpus)
    _write_lines(None, _stats_table(report))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# encode / decode


def _runs_json(grid: CategoryGrid) -> list[list]:
    return [
        [label, None if span is None else [span.start, span.end]]
        for label, span in grid.runs()
    ]


def _cmd_encode(args) -> int:
    corpus = _load_corpus(args.corpus, args.format, args.lang, args.lenient)
    schema = TagSchema.for_variant(args.schema, corpus.vocab)
    lines = [
        json.dumps(
            {
                "categories": list(corpus.vocab.names),
                "schema": args.schema,
                "language_mode": corpus.language_mode,
            },
            ensure_ascii=False,
        )
    ]
    with _phase("encode", args.timing):
        for sample in corpus.samples:
            encoding = encode_sample(sample, schema, corpus.vocab)
            record = {
                "text": sample.sentence.raw_text,
                "cells": [list(cell) for cell in encoding.tag_matrix.sorted_cells()],
                "category_runs": _runs_json(encoding.category_grid),
            }
            if encoding.sentiment_grid is not None:
                record["sentiment_runs"] = _runs_json(encoding.sentiment_grid)
            lines.append(json.dumps(record, ensure_ascii=False))
    _write_lines(args.out, lines)
    return 0


def _grid_from_runs(runs: list[list], n_tokens: int, labels: tuple[str, ...]) -> CategoryGrid:
    grid = CategoryGrid.empty(n_tokens, labels)
    for label, span in runs:
        if span is None:
            grid.values[0, labels.index(label)] = 1.0
        else:
            grid.mark_span(label, Span(span[0], span[1]))
    return grid


def _cmd_decode(args) -> int:
    try:
        with open(args.encodings, encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    if not lines:
        raise CliError(f"{args.encodings}: empty encodings file")
    header = json.loads(lines[0])
    if "categories" not in header:
        raise CliError(f"{args.encodings}: first line is not an encode header")
    vocab = CategoryVocab(header["categories"])
    schema = TagSchema.for_variant(header["schema"], vocab)
    out: list[str] = []
    with _phase("decode", args.timing):
        for line in lines[1:]:
            record = json.loads(line)
            sentence = tokenize(record["text"], header["language_mode"])
            matrix = TagMatrix(len(sentence), schema)
            for row, col, tags in record["cells"]:
                for tag in tags:
                    matrix.add(row, col, tag)
            grid = _grid_from_runs(record.get("category_runs", []), len(sentence), vocab.names)
            sent_grid = None
            if "sentiment_runs" in record:
                sent_grid = _grid_from_runs(
                    record["sentiment_runs"], len(sentence), SENTIMENT_LABELS
                )
            quads = decode_encoding(
                SampleEncoding(matrix, grid, sent_grid), schema, vocab
            )
            out.append(
                json.dumps(sample_to_record(Sample(sentence, tuple(quads))), ensure_ascii=False)
            )
    _write_lines(args.out, out)
    return 0


# ---------------------------------------------------------------------------
# train / predict / eval / gradcheck


def _cmd_train(args) -> int:
    with _phase("load", args.timing):
        corpus = _load_corpus(args.corpus, args.format, args.lang, args.lenient)
        if args.dev:
            train_corpus = corpus
            dev_corpus = _load_corpus(args.dev, args.format, args.lang, args.lenient)
        else:
            try:
                ratios = tuple(float(x) for x in args.split_ratios.split(","))
            except ValueError:
                raise CliError(f"bad --split-ratios {args.split_ratios!r}") from None
            if len(ratios) != 3:
                raise CliError("--split-ratios needs three comma-separated numbers")
            try:
                train_corpus, dev_corpus, _ = split(corpus, ratios, args.split_seed)
            except ValueError as exc:
                raise CliError(str(exc)) from None

    config = TrainConfig(
        epochs_max=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        patience=args.patience,
        neg_rate=args.neg_rate,
        alpha=args.alpha,
        beta=args.beta,
        seed=args.seed,
        schema_variant=args.schema,
        embed_dim=args.embed_dim,
        pair_dim=args.pair_dim,
        tag_threshold=args.tag_threshold,
        cat_threshold=args.cat_threshold,
        allow_conflicts=args.allow_conflicts,
    )
    if args.embeddings:
        provider = FileBacked(args.embeddings)
    elif args.provider == "hashed":
        provider = HashedFrozen(args.embed_dim, args.seed)
    else:
        provider = TrainableTable(build_token_vocab(train_corpus), args.embed_dim)

    with _phase("train", args.timing):
        params, history = train(train_corpus, dev_corpus, config, provider)
    save_checkpoint(params, args.out)
    if args.history:
        with open(args.history, "w", encoding="utf-8") as fh:
            fh.write(history.to_jsonl())
    with _phase("eval", args.timing):
        dev_metrics = evaluate_checkpoint(
            params, dev_corpus, provider, args.tag_threshold, args.cat_threshold
        )
    print(
        f"best epoch {history.best_epoch} ({history.stop_reason}); "
        f"dev P={dev_metrics.precision:.4f} R={dev_metrics.recall:.4f} F1={dev_metrics.f1:.4f}"
    )
    return 0


def _cmd_predict(args) -> int:
    with _phase("load", args.timing):
        corpus = _load_corpus(args.corpus, args.format, args.lang, args.lenient)
        try:
            params = load_checkpoint(args.checkpoint)
        except FileNotFoundError as exc:
            raise CliError(str(exc)) from None
        provider = provider_from_params(params, args.embeddings)
    # categories come from the checkpoint: the input may be unlabeled text
    vocab = CategoryVocab(params.category_vocab)
    schema = TagSchema.for_variant(params.schema_variant, vocab)
    lines = []
    with _phase("predict", args.timing):
        for sample in corpus.samples:
            quads = predict(
                sample.sentence, params, provider, schema, vocab,
                args.tag_threshold, args.cat_threshold,
            )
            lines.append(
                json.dumps(sample_to_record(Sample(sample.sentence, tuple(quads))),
                           ensure_ascii=False)
            )
    _write_lines(args.out, lines)
    return 0


def _metrics_line(name: str, m) -> str:
    return (
        f"{name:<8} P={m.precision:.4f} R={m.recall:.4f} F1={m.f1:.4f} "
        f"(tp={m.tp} pred={m.n_pred} gold={m.n_gold})"
    )


def _cmd_eval(args) -> int:
    with _phase("load", args.timing):
        pred_corpus = _load_corpus(args.pred, args.format, args.lang, args.lenient)
        gold_corpus = _load_corpus(args.gold, args.format, args.lang, args.lenient)
    if len(pred_corpus) != len(gold_corpus):
        raise CliError(
            f"sample count mismatch: {len(pred_corpus)} predictions vs {len(gold_corpus)} gold"
        )
    for i, (p, g) in enumerate(zip(pred_corpus.samples, gold_corpus.samples)):
        if p.sentence.raw_text != g.sentence.raw_text:
            raise CliError(f"sample {i}: prediction and gold texts differ")
    pred_lists = [list(s.gold) for s in pred_corpus.samples]
    gold_lists = [list(s.gold) for s in gold_corpus.samples]
    with _phase("score", args.timing):
        overall = corpus_prf(pred_lists, gold_lists)
        breakdown = corpus_breakdown(pred_lists, gold_lists)
        errors = corpus_error_analysis(pred_lists, gold_lists)
    print(_metrics_line("overall", overall))
    for cls, metrics in breakdown.per_class.items():
        print(_metrics_line(cls, metrics))
    percentages = errors.percentages()
    for error_type, count in errors.counts.items():
        print(f"error {error_type:<9} {count:>6}  {percentages[error_type]:6.2f}%")
    if args.out:
        payload = {
            "overall": overall.to_json(),
            "breakdown": breakdown.to_json(),
            "errors": errors.to_json(),
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    return 0


GRADCHECK_BOUND = 1e-4


def _cmd_gradcheck(args) -> int:
    with _phase("gradcheck", args.timing):
        worst = gradcheck_suite(args.seed, args.seeds)
    print(f"max relative error: {worst:.3e} over {args.seeds} seeds (bound {GRADCHECK_BOUND:.0e})")
    return 0 if worst < GRADCHECK_BOUND else 1


if __name__ == "__main__":
    sys.exit(main())
