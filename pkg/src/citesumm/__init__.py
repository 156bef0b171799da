"""Citation-graph-aware extractive summarization toolkit."""

from .corpus import (
    CitationGraph,
    Corpus,
    Paper,
    Section,
    Sentence,
    build_citation_graph,
    corpus_manifest,
    parse_corpus,
    tokenize,
    truncate_document,
)
from .embed import (
    EmbeddingTable,
    ProjectionAdapter,
    TfidfSentenceEmbedder,
    document_rep,
    load_embeddings,
    raw_cosine,
    sample_training_triplets,
    sim01,
    triplet_loss,
    write_embeddings,
)
from .evalkit import (
    GoldLabels,
    RougeScore,
    corpus_report,
    lead_baseline,
    link_prediction_accuracy,
    link_prediction_report,
    oracle_labels,
    rouge_l,
    rouge_n,
)
from .mus import (
    CentralityScores,
    MusConfig,
    MusSummarizer,
    SelectionPolicy,
    boundary_score,
    combine_centrality,
    document_centrality,
    extract,
    section_centrality,
    sentence_centrality,
)

__version__ = "0.1.0"

from .datasets import SyntheticCorpus, make_clustered_corpus  # noqa: E402
from .gss import (  # noqa: E402
    GssConfig,
    GssOutput,
    GssSummarizer,
    load_checkpoint,
    save_checkpoint,
)
