"""Offline sentence-embedding exporter for the citesumm toolkit."""

from .corpus import Paper, read_corpus, sentence_census
from .encoders import HashedNgramEncoder, TransformerEncoder, build_encoder
from .finetune import finetune_hashed, sample_triplets
from .seb1 import read_seb1, write_seb1

__version__ = "0.1.0"
