"""Unsupervised summarization by multi-granularity, position-aware centrality.

Three cosine-based centrality scores are computed per body sentence —
against section-mates, against section representations, and against the
representations of neighboring papers in the citation graph — then combined
as a weighted sum and used to rank sentences for extraction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import CitationGraph, Corpus, build_citation_graph, truncate_document
from .embed import EmbeddingTable, document_rep, raw_cosine
from .errors import ValidationError

logger = logging.getLogger("citesumm.mus")

NEIGHBOR_SCOPES = ("cited", "citing", "both")
NORMALIZATIONS = ("minmax", "none")
SELECTION_MODES = ("match_reference", "fixed_k")


@dataclass(frozen=True)
class SelectionPolicy:
    """How many sentences to extract: the reference abstract's sentence count
    (match_reference) or a fixed k, optionally limited by a word budget."""

    mode: str = "match_reference"
    k: int = 3
    max_words: int | None = None

    def __post_init__(self):
        if self.mode not in SELECTION_MODES:
            raise ValidationError(f"selection mode must be one of {SELECTION_MODES}, got {self.mode!r}")
        if self.mode == "fixed_k" and self.k < 1:
            raise ValidationError(f"fixed_k selection requires k >= 1, got {self.k}")
        if self.max_words is not None and self.max_words < 1:
            raise ValidationError(f"max_words must be >= 1, got {self.max_words}")


@dataclass(frozen=True)
class MusConfig:
    lambda1: float = 0.9
    lambda2: float = 1.0
    mu: tuple[float, float, float] = (0.4, 0.1, 0.5)
    neighbor_scope: str = "cited"
    normalization: str = "minmax"
    selection: SelectionPolicy = field(default_factory=SelectionPolicy)

    def __post_init__(self):
        if self.lambda1 > self.lambda2:
            raise ValidationError(f"lambda1 must not exceed lambda2 ({self.lambda1} > {self.lambda2})")
        if any(m < 0 for m in self.mu) or len(self.mu) != 3:
            raise ValidationError(f"mu must be three non-negative weights, got {self.mu}")
        if self.neighbor_scope not in NEIGHBOR_SCOPES:
            raise ValidationError(f"neighbor_scope must be one of {NEIGHBOR_SCOPES}")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"normalization must be one of {NORMALIZATIONS}")


@dataclass
class CentralityScores:
    """Per-sentence centrality at each granularity plus the combined score,
    aligned with body sentence order after truncation."""

    a_sen: np.ndarray
    a_sec: np.ndarray
    a_doc: np.ndarray
    combined: np.ndarray


def boundary_score(loc: int, n: int) -> int:
    """min(loc, n - loc) for a 0-based position among n items."""
    if not 0 <= loc < n:
        raise ValidationError(f"loc {loc} out of range for {n} items")
    return min(loc, n - loc)


def sentence_edge_weight(s_i: np.ndarray, s_j: np.ndarray, b_i: int, b_j: int,
                         config: MusConfig) -> float:
    """Position-aware directed edge weight between two section-mates:
    lambda1 * cos when the source is closer to the boundary, else lambda2 * cos."""
    lam = config.lambda1 if b_i < b_j else config.lambda2
    return lam * raw_cosine(s_i, s_j)


def sentence_centrality(vectors: np.ndarray, config: MusConfig) -> np.ndarray:
    """Sum of outgoing edge weights within one section (no self-edges).

    ``vectors`` stacks the section's sentence vectors in position order; a
    singleton section scores 0.
    """
    n = vectors.shape[0]
    scores = np.zeros(n)
    if n < 2:
        return scores
    b = [boundary_score(i, n) for i in range(n)]
    for i in range(n):
        total = 0.0
        for j in range(n):
            if j == i:
                continue
            total += sentence_edge_weight(vectors[i], vectors[j], b[i], b[j], config)
        scores[i] = total
    return scores


def section_rep(vectors: np.ndarray) -> np.ndarray:
    """Average pooling of a section's sentence vectors."""
    if vectors.shape[0] == 0:
        raise ValidationError("section_rep: empty section")
    return vectors.mean(axis=0)


def section_edge_weight(s_i: np.ndarray, o_r: np.ndarray, b_hat_k: int, b_hat_r: int,
                        config: MusConfig) -> float:
    lam = config.lambda1 if b_hat_k < b_hat_r else config.lambda2
    return lam * raw_cosine(s_i, o_r)


def section_centrality(section_vectors: list[np.ndarray], config: MusConfig) -> np.ndarray:
    """Sum of sentence-to-section edge weights over every section of the
    document (the sentence's own section included), with the position branch
    decided by section-level boundary scores."""
    n_sec = len(section_vectors)
    if n_sec == 0:
        raise ValidationError("section_centrality: document has no sections")
    reps = [section_rep(v) for v in section_vectors]
    b_hat = [boundary_score(k, n_sec) for k in range(n_sec)]
    scores: list[float] = []
    for k, vectors in enumerate(section_vectors):
        for i in range(vectors.shape[0]):
            total = 0.0
            for r in range(n_sec):
                total += section_edge_weight(vectors[i], reps[r], b_hat[k], b_hat[r], config)
            scores.append(total)
    return np.array(scores)


def document_centrality(sentence_vectors: np.ndarray,
                        neighbor_reps: list[np.ndarray]) -> np.ndarray:
    """Sum of cosines between each sentence and each neighbor-paper
    representation; all zeros when there are no neighbors."""
    n = sentence_vectors.shape[0]
    scores = np.zeros(n)
    for rep in neighbor_reps:
        for i in range(n):
            scores[i] += raw_cosine(sentence_vectors[i], rep)
    return scores


def minmax_scale(x: np.ndarray) -> np.ndarray:
    """Scale to [0, 1] within the document; constant vectors map to zeros."""
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def combine_centrality(a_sen: np.ndarray, a_sec: np.ndarray, a_doc: np.ndarray,
                       config: MusConfig) -> np.ndarray:
    """mu-weighted sum of the granularity scores, each min-max scaled first
    unless normalization is "none"."""
    if not (len(a_sen) == len(a_sec) == len(a_doc)):
        raise ValidationError("granularity score vectors have mismatched lengths")
    if config.normalization == "minmax":
        a_sen, a_sec, a_doc = minmax_scale(a_sen), minmax_scale(a_sec), minmax_scale(a_doc)
    m1, m2, m3 = config.mu
    return m1 * a_sen + m2 * a_sec + m3 * a_doc


def extract(scores: np.ndarray, policy: SelectionPolicy,
            abstract_len: int | None = None,
            sentence_word_counts: list[int] | None = None) -> list[int]:
    """Top-k sentence indices by score, ties broken by earlier position,
    returned in document order.

    k is the reference abstract length in match_reference mode.  An optional
    word budget keeps selected sentences greedily in score order.
    """
    n = len(scores)
    if policy.mode == "match_reference":
        if not abstract_len:
            raise ValidationError(
                "match_reference selection needs a non-empty reference abstract; use fixed_k")
        k = abstract_len
    else:
        k = policy.k
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    chosen = order[: min(k, n)]
    if policy.max_words is not None:
        if sentence_word_counts is None:
            raise ValidationError("max_words budget requires sentence word counts")
        budget = policy.max_words
        kept = []
        for i in chosen:
            if sentence_word_counts[i] <= budget:
                kept.append(i)
                budget -= sentence_word_counts[i]
        chosen = kept
    return sorted(chosen)


def neighbor_ids(paper_id: str, graph: CitationGraph, scope: str) -> list[str]:
    if scope == "cited":
        return list(graph.out_edges[paper_id])
    if scope == "citing":
        return list(graph.in_edges[paper_id])
    ids = list(graph.out_edges[paper_id])
    seen = set(ids)
    ids.extend(p for p in graph.in_edges[paper_id] if p not in seen)
    return ids


class MusSummarizer(BaseEstimator):
    """Scores and extracts sentences with multi-granularity centrality.

    fit() binds the corpus, its citation graph and an embedding table (and
    precomputes neighbor-paper representations from abstract vectors, falling
    back to body vectors for abstract-less papers); predict() returns the
    selected sentence indices per paper.
    """

    def __init__(self, lambda1: float = 0.9, lambda2: float = 1.0,
                 mu: tuple[float, float, float] = (0.4, 0.1, 0.5),
                 neighbor_scope: str = "cited", normalization: str = "minmax",
                 selection_mode: str = "match_reference", k: int = 3,
                 max_words: int | None = None, max_tokens: int = 500):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.mu = mu
        self.neighbor_scope = neighbor_scope
        self.normalization = normalization
        self.selection_mode = selection_mode
        self.k = k
        self.max_words = max_words
        self.max_tokens = max_tokens

    def _config(self) -> MusConfig:
        policy = SelectionPolicy(mode=self.selection_mode, k=self.k, max_words=self.max_words)
        return MusConfig(lambda1=self.lambda1, lambda2=self.lambda2, mu=tuple(self.mu),
                         neighbor_scope=self.neighbor_scope, normalization=self.normalization,
                         selection=policy)

    def fit(self, corpus: Corpus, table: EmbeddingTable,
            graph: CitationGraph | None = None) -> "MusSummarizer":
        config = self._config()  # validates parameters
        for paper in corpus:
            if not table.covers(paper):
                raise ValidationError(f"embedding table does not cover paper {paper.id!r}")
        self.config_ = config
        self.corpus_ = corpus
        self.table_ = table
        self.graph_ = graph if graph is not None else build_citation_graph(corpus)
        self.truncated_ = {p.id: (truncate_document(p, self.max_tokens)
                                  if self.max_tokens is not None else p)
                           for p in corpus}
        reps = {}
        for paper in corpus:
            vecs = table.abstract_vectors(paper) if paper.abstract else table.body_vectors(paper)
            reps[paper.id] = document_rep(vecs)
        self.paper_reps_ = reps
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "corpus_"):
            raise NotFittedError("MusSummarizer is not fitted; call fit first")

    def score_paper(self, paper_id: str) -> CentralityScores:
        """All centrality scores for one (truncated) paper."""
        self._check_fitted()
        paper = self.truncated_[paper_id]
        config = self.config_
        section_stacks = self.table_.section_vectors(paper)
        a_sen = np.concatenate([sentence_centrality(stack, config) for stack in section_stacks])
        a_sec = section_centrality(section_stacks, config)
        neighbors = neighbor_ids(paper_id, self.graph_, config.neighbor_scope)
        neighbor_reps = [self.paper_reps_[n] for n in neighbors]
        all_vectors = np.concatenate(section_stacks, axis=0)
        a_doc = document_centrality(all_vectors, neighbor_reps)
        combined = combine_centrality(a_sen, a_sec, a_doc, config)
        return CentralityScores(a_sen=a_sen, a_sec=a_sec, a_doc=a_doc, combined=combined)

    def predict(self, paper_id: str) -> list[int]:
        """Selected sentence indices (document order) for one paper."""
        scores = self.score_paper(paper_id)
        paper = self.truncated_[paper_id]
        counts = [len(s) for s in paper.body_sentences()]
        return extract(scores.combined, self.config_.selection,
                       abstract_len=len(paper.abstract), sentence_word_counts=counts)

    def summarize(self, paper_id: str) -> dict:
        """One summary record in the output JSONL schema."""
        scores = self.score_paper(paper_id)
        paper = self.truncated_[paper_id]
        sentences = paper.body_sentences()
        counts = [len(s) for s in sentences]
        selected = extract(scores.combined, self.config_.selection,
                           abstract_len=len(paper.abstract), sentence_word_counts=counts)
        return {
            "paper_id": paper_id,
            "selected": selected,
            "sentences": [sentences[i].text for i in selected],
            "scores": {
                "a_sen": scores.a_sen.tolist(),
                "a_sec": scores.a_sec.tolist(),
                "a_doc": scores.a_doc.tolist(),
                "c": scores.combined.tolist(),
            },
        }
