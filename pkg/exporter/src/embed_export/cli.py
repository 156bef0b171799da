"""Export CLI: encode every body and abstract sentence of a corpus and write
a SEB1 embedding file, optionally finetuning the encoder on the citation
graph (link-prediction objective) first.

Exit codes: 0 ok, 2 usage, 3 input validation, 4 numeric/encoder failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile

import numpy as np

from .corpus import CorpusError, read_corpus, sentence_census
from .encoders import EncoderError, HashedNgramEncoder, build_encoder
from .finetune import finetune_hashed
from .seb1 import write_seb1

logger = logging.getLogger("embed_export")

EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


def export(args) -> None:
    if not os.path.exists(args.corpus):
        raise CorpusError(f"corpus file not found: {args.corpus}")
    parent = os.path.dirname(os.path.abspath(args.out))
    if not os.path.isdir(parent):
        raise CorpusError(f"output directory does not exist: {parent}")
    if args.batch_size < 1:
        raise CorpusError(f"batch size must be >= 1, got {args.batch_size}")

    papers = read_corpus(args.corpus)
    encoder = build_encoder(args.encoder, dim=args.dim, seed=args.seed,
                            pooling=args.pooling)

    if args.finetune_epochs > 0:
        if not isinstance(encoder, HashedNgramEncoder):
            raise EncoderError(
                "finetuning is implemented for the hashed encoder; "
                "finetune transformer weights offline and pass the saved name")
        losses = finetune_hashed(encoder, papers, epochs=args.finetune_epochs,
                                 negatives=args.negatives,
                                 learning_rate=args.learning_rate, seed=args.seed,
                                 max_tokens=args.max_sentence_tokens)
        if losses:
            logger.info("finetune loss %.4f -> %.4f", losses[0], losses[-1])

    census = sentence_census(papers)
    keys = [key for key, _ in census]
    texts = [text for _, text in census]
    vectors = encoder.encode(texts, batch_size=args.batch_size,
                             max_tokens=args.max_sentence_tokens)
    if not np.all(np.isfinite(vectors)):
        raise EncoderError("encoder produced non-finite vectors")
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    vectors = vectors / np.where(norms == 0.0, 1.0, norms)

    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".embed-export-")
    os.close(fd)
    try:
        write_seb1(tmp, keys, vectors)
        os.replace(tmp, args.out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("wrote %d vectors (dim %d) to %s", len(keys), vectors.shape[1], args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Encode corpus sentences and write a SEB1 embedding file.")
    parser.add_argument("--corpus", required=True, help="corpus JSONL path")
    parser.add_argument("--out", required=True, help="output SEB1 path")
    parser.add_argument("--encoder", default="hashed",
                        help="'hashed' or a Hugging Face model name")
    parser.add_argument("--dim", type=int, default=256,
                        help="feature width for the hashed encoder")
    parser.add_argument("--pooling", choices=["mean", "first"], default="mean",
                        help="sentence pooling for transformer encoders")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--max-sentence-tokens", type=int, default=None)
    parser.add_argument("--finetune-epochs", type=int, default=0)
    parser.add_argument("--negatives", type=int, default=5)
    parser.add_argument("--learning-rate", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=getattr(logging,
                                      os.environ.get("CITESUMM_LOG", "error").upper(),
                                      logging.ERROR))
    try:
        args = build_parser().parse_args(argv)
        export(args)
        return 0
    except CorpusError as exc:
        print(f"embed-export: error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EncoderError as exc:
        print(f"embed-export: error: encoder: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
