"""Command-line interface wiring ingestion, embeddings, training and evaluation.

Exit codes: 0 ok, 2 usage, 3 input validation, 4 numeric failure.  The
CITESUMM_LOG environment variable ({error, info, debug}) controls logging.
All outputs are written atomically (temp file + rename).  A --config file
holds "key = value" lines supplying defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .corpus import (
    Corpus,
    build_citation_graph,
    corpus_manifest,
    parse_corpus,
    tokenize,
)
from .embed import (
    EmbeddingTable,
    ProjectionAdapter,
    corpus_document_reps,
    fit_tfidf,
    load_embeddings,
    write_embeddings,
)
from .errors import (
    CitesummError,
    ConfigError,
    FormatError,
    NumericError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .evalkit import corpus_report, link_prediction_report, oracle_labels
from .gss import GssSummarizer, save_checkpoint
from .mus import MusSummarizer

logger = logging.getLogger("citesumm.cli")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


def _setup_logging() -> None:
    level_name = os.environ.get("CITESUMM_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise ConfigError(f"CITESUMM_LOG must be one of {sorted(levels)}, got {level_name!r}")
    logging.basicConfig(level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".citesumm-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_via(path: str, writer) -> None:
    """Run ``writer(tmp_path)`` then rename the result into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".citesumm-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_corpus(path: str, mode: str) -> Corpus:
    if not os.path.exists(path):
        raise ValidationError(f"corpus file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, mode=mode)


def _load_table(path: str) -> EmbeddingTable:
    if not os.path.exists(path):
        raise ValidationError(f"embedding file not found: {path}")
    return load_embeddings(path)


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        _atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _parse_config_file(path: str) -> dict:
    """Flat "key = value" lines; '#' starts a comment."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip().strip("\"'")
            if value.lower() in ("true", "false"):
                values[key] = value.lower() == "true"
            else:
                try:
                    values[key] = int(value)
                except ValueError:
                    try:
                        values[key] = float(value)
                    except ValueError:
                        values[key] = value
    return values


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    _emit(args, corpus_manifest(corpus))


def cmd_embed_tfidf(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    table = fit_tfidf(corpus, hash_dim=args.dim).build_table(corpus)
    _atomic_write_via(args.out, lambda tmp: write_embeddings(table, tmp))
    logger.info("wrote %d vectors (dim %d) to %s", len(table), table.dim, args.out)


def cmd_embed_load(args) -> None:
    table = _load_table(args.path)
    _emit(args, {"dim": table.dim, "rows": len(table)})


def cmd_adapt(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    table = _load_table(args.embeddings)
    graph = build_citation_graph(corpus)
    adapter = ProjectionAdapter(
        learning_rate=args.learning_rate, steps=args.steps,
        negatives_per_positive=args.negatives, init_noise=args.init_noise,
        seed=args.seed,
    ).fit(table, graph)
    projected = adapter.transform(table)
    _atomic_write_via(args.out, lambda tmp: write_embeddings(projected, tmp))
    if args.log:
        lines = "".join(json.dumps({"step": i, "loss": loss}) + "\n"
                        for i, loss in enumerate(adapter.loss_trajectory_))
        _atomic_write_text(args.log, lines)
    logger.info("adapter loss %.6f -> %.6f over %d triplets",
                adapter.loss_trajectory_[0], adapter.loss_trajectory_[-1],
                adapter.n_triplets_)


def _write_summaries(path: str, records: list[dict]) -> None:
    text = "".join(json.dumps(record) + "\n" for record in records)
    _atomic_write_text(path, text)


def cmd_mus_run(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    graph = build_citation_graph(corpus)
    if args.adapted and not args.no_adapter:
        table = _load_table(args.adapted)
    else:
        table = _load_table(args.embeddings)
    lambda1 = args.lambda2 if args.no_position else args.lambda1
    mu = ((0.0 if args.no_sentence else args.mu1),
          (0.0 if args.no_section else args.mu2),
          (0.0 if args.no_document else args.mu3))
    model = MusSummarizer(
        lambda1=lambda1, lambda2=args.lambda2, mu=mu,
        neighbor_scope=args.neighbor_scope, normalization=args.normalization,
        selection_mode=args.selection, k=args.k, max_words=args.max_words,
        max_tokens=args.max_tokens,
    ).fit(corpus, table, graph)

    ids = corpus.ids()
    if args.selection == "match_reference":
        skipped = [pid for pid in ids if not corpus[pid].abstract]
        if skipped:
            logger.warning("skipping %d papers without abstracts "
                           "(match_reference selection)", len(skipped))
        ids = [pid for pid in ids if corpus[pid].abstract]

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        records = list(pool.map(model.summarize, ids))
    _write_summaries(args.out, records)
    logger.info("wrote %d summaries to %s", len(records), args.out)


def cmd_gss_train(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    table = _load_table(args.embeddings)
    graph = build_citation_graph(corpus)
    labels = None
    if args.labels:
        labels = {}
        with open(args.labels, encoding="utf-8") as fh:
            for line in fh:
                record = json.loads(line)
                labels[record["paper_id"]] = np.asarray(record["labels"], dtype=np.int64)
    model = GssSummarizer(
        hidden_dim=args.hidden_dim, sage_layers=args.sage_layers, hops=args.hops,
        heads=args.heads, fusion_samples=args.fusion_samples,
        negatives_per_positive=args.negatives,
        alpha=0.0 if args.no_multi else args.alpha,
        learning_rate=args.learning_rate, epochs=args.epochs,
        batch_size=args.batch_size, seed=args.seed, max_tokens=args.max_tokens,
        no_encoder=args.no_encoder, no_gated=args.no_gated, no_fusion=args.no_fusion,
    ).fit(corpus, table, graph, labels=labels)
    _atomic_write_via(args.out, lambda tmp: save_checkpoint(model.params_, model.config_, tmp))
    if args.log:
        lines = "".join(json.dumps(row) + "\n" for row in model.log_)
        _atomic_write_text(args.log, lines)
    logger.info("best epoch %d; checkpoint at %s", model.best_epoch_, args.out)


def cmd_gss_run(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    table = _load_table(args.embeddings)
    graph = build_citation_graph(corpus)
    overrides = {}
    if args.no_encoder:
        overrides["no_encoder"] = True
    if args.no_gated:
        overrides["no_gated"] = True
    if args.no_fusion:
        overrides["no_fusion"] = True
    if not os.path.exists(args.checkpoint):
        raise ValidationError(f"checkpoint not found: {args.checkpoint}")
    model = GssSummarizer.from_checkpoint(args.checkpoint, corpus, table, graph,
                                          selection_mode=args.selection, k=args.k,
                                          **overrides)
    ids = corpus.ids()
    if args.selection == "match_reference":
        skipped = [pid for pid in ids if not corpus[pid].abstract]
        if skipped:
            logger.warning("skipping %d papers without abstracts "
                           "(match_reference selection)", len(skipped))
        ids = [pid for pid in ids if corpus[pid].abstract]
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        records = list(pool.map(model.summarize, ids))
    _write_summaries(args.out, records)


def cmd_eval_rouge(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    if not os.path.exists(args.summaries):
        raise ValidationError(f"summaries file not found: {args.summaries}")
    summaries = {}
    with open(args.summaries, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid summary JSON ({exc.msg})", line_no) from exc
            summaries[record["paper_id"]] = tokenize(" ".join(record["sentences"]))
    _emit(args, corpus_report(summaries, corpus.papers))


def cmd_eval_linkpred(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    graph = build_citation_graph(corpus)
    if args.split == "all":
        edges = list(graph.edges())
    else:
        edges = [(u, v) for u, v in graph.edges() if corpus[u].split == args.split]
    if args.checkpoint:
        table = _load_table(args.embeddings)
        model = GssSummarizer.from_checkpoint(args.checkpoint, corpus, table, graph)
        reps = model.document_reps()
        target_reps = None
    else:
        table = _load_table(args.embeddings)
        reps, target_reps = corpus_document_reps(table, corpus)
    report = link_prediction_report(reps, edges, rng_seed=args.seed, runs=args.runs,
                                    negatives_per_positive=args.negatives,
                                    forbidden_edges=set(graph.edges()),
                                    target_reps=target_reps)
    report["edges"] = len(edges)
    report["split"] = args.split
    _emit(args, report)


def cmd_oracle(args) -> None:
    corpus = _load_corpus(args.corpus, args.mode)
    lines = []
    skipped = 0
    for paper in corpus:
        if not paper.abstract:
            skipped += 1
            continue
        labels = oracle_labels(paper, cap=args.cap)
        lines.append(json.dumps({"paper_id": paper.id,
                                 "labels": labels.y_prime.tolist()}))
    if skipped:
        logger.warning("skipped %d papers without abstracts", skipped)
    text = "".join(line + "\n" for line in lines)
    if args.out:
        _atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citesumm",
        description="Citation-graph-aware extractive summarization toolkit.")
    parser.add_argument("--version", action="version", version=f"citesumm {__version__}")
    parser.add_argument("--config", help="key = value file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--mode", choices=["inductive", "transductive"],
                       default="transductive", help="citation graph split handling")

    p = sub.add_parser("ingest", help="validate a corpus and report counts")
    p.add_argument("corpus")
    p.add_argument("--out", help="write the manifest JSON here (default: stdout)")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p_embed = sub.add_parser("embed", help="build or inspect sentence embeddings")
    embed_sub = p_embed.add_subparsers(dest="embed_command", required=True)
    p = embed_sub.add_parser("tfidf", help="hashed tf-idf embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dim", type=int, default=256, help="hash width (power of two)")
    p.add_argument("--out", required=True, help="output SEB1 file")
    common(p)
    p.set_defaults(func=cmd_embed_tfidf)
    p = embed_sub.add_parser("load", help="validate a SEB1 file")
    p.add_argument("path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed_load)

    p = sub.add_parser("adapt", help="train the contrastive projection adapter")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="projected SEB1 output")
    p.add_argument("--log", help="loss trajectory JSONL")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--init-noise", type=float, default=1e-3)
    p.add_argument("--seed", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_adapt)

    p_mus = sub.add_parser("mus", help="unsupervised multi-granularity summarizer")
    mus_sub = p_mus.add_subparsers(dest="mus_command", required=True)
    p = mus_sub.add_parser("run", help="score and extract sentences")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True, help="raw SEB1 embeddings")
    p.add_argument("--adapted", help="adapter-projected SEB1 (used unless --no-adapter)")
    p.add_argument("--out", required=True, help="summaries JSONL")
    p.add_argument("--lambda1", type=float, default=0.9)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--mu1", type=float, default=0.4)
    p.add_argument("--mu2", type=float, default=0.1)
    p.add_argument("--mu3", type=float, default=0.5)
    p.add_argument("--neighbor-scope", choices=["cited", "citing", "both"], default="cited")
    p.add_argument("--normalization", choices=["minmax", "none"], default="minmax")
    p.add_argument("--selection", choices=["match_reference", "fixed_k"],
                   default="match_reference")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--max-words", type=int, default=None)
    p.add_argument("--max-tokens", type=int, default=500)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-position", action="store_true",
                   help="equalize the boundary weights (lambda1 = lambda2)")
    p.add_argument("--no-sentence", action="store_true", help="zero the sentence-level weight")
    p.add_argument("--no-section", action="store_true", help="zero the section-level weight")
    p.add_argument("--no-document", action="store_true", help="zero the document-level weight")
    p.add_argument("--no-adapter", action="store_true", help="ignore --adapted embeddings")
    common(p)
    p.set_defaults(func=cmd_mus_run)

    p_gss = sub.add_parser("gss", help="supervised graph summarizer")
    gss_sub = p_gss.add_subparsers(dest="gss_command", required=True)
    p = gss_sub.add_parser("train", help="train and write a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--labels", help="oracle labels JSONL (default: computed)")
    p.add_argument("--log", help="training log JSONL")
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--sage-layers", type=int, default=2)
    p.add_argument("--hops", type=int, default=3)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--fusion-samples", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--max-tokens", type=int, default=500)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--no-encoder", action="store_true",
                   help="use plain sentence averages as document representations")
    p.add_argument("--no-gated", action="store_true", help="skip the gated sentence encoder")
    p.add_argument("--no-fusion", action="store_true", help="skip graph information fusion")
    p.add_argument("--no-multi", action="store_true", help="drop the link-prediction task")
    common(p)
    p.set_defaults(func=cmd_gss_train)

    p = gss_sub.add_parser("run", help="summarize with a trained checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="summaries JSONL")
    p.add_argument("--selection", choices=["match_reference", "fixed_k"],
                   default="match_reference")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-encoder", action="store_true")
    p.add_argument("--no-gated", action="store_true")
    p.add_argument("--no-fusion", action="store_true")
    common(p)
    p.set_defaults(func=cmd_gss_run)

    p_eval = sub.add_parser("eval", help="evaluation reports")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)
    p = eval_sub.add_parser("rouge", help="summary quality against abstracts")
    p.add_argument("summaries")
    p.add_argument("corpus")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_eval_rouge)
    p = eval_sub.add_parser("linkpred", help="link prediction accuracy")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", help="score with graph-encoder document reps")
    p.add_argument("--split", choices=["train", "validation", "test", "all"], default="test")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_eval_linkpred)

    p = sub.add_parser("oracle", help="greedy oracle extraction labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="labels JSONL (default: stdout)")
    p.add_argument("--cap", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_oracle)

    return parser


def _apply_config(args, argv, config: dict) -> None:
    """Overlay config values onto flags the user did not pass explicitly."""
    given = set()
    for token in argv:
        if token.startswith("--"):
            given.add(token[2:].split("=", 1)[0].replace("-", "_"))
    for key, value in config.items():
        if key not in given and hasattr(args, key):
            setattr(args, key, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        _setup_logging()
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(args, argv, _parse_config_file(args.config))
        args.func(args)
        return EXIT_OK
    except (ParseError, ValidationError, ConfigError, FormatError) as exc:
        print(f"citesumm: error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, ShapeError) as exc:
        print(f"citesumm: error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
