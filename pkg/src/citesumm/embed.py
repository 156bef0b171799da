"""Sentence/document vectors: pluggable backends and the contrastive adapter.

The on-disk interchange format is "SEB1": magic ``SEB1``, u32 LE version (=1),
u32 LE dim, u64 LE row count, then per row a u32 LE key length, the UTF-8 key,
and dim little-endian f32 values.  Keys follow the grammar
``<paper_id>:s:<section_idx>:<sent_idx>`` (body) and ``<paper_id>:a:<sent_idx>``
(abstract).
"""

from __future__ import annotations

import logging
import struct
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import diffmath as dm
from .corpus import CitationGraph, Corpus, Paper, Sentence
from .errors import ConfigError, FormatError, NumericError, ValidationError

logger = logging.getLogger("citesumm.embed")

SEB1_MAGIC = b"SEB1"
SEB1_VERSION = 1
SIM_EPS = 1e-6


def body_key(paper_id: str, section_idx: int, sent_idx: int) -> str:
    return f"{paper_id}:s:{section_idx}:{sent_idx}"


def abstract_key(paper_id: str, sent_idx: int) -> str:
    return f"{paper_id}:a:{sent_idx}"


def sentence_keys(paper: Paper) -> list[tuple[str, Sentence]]:
    """All (key, sentence) pairs of a paper: body first, then abstract."""
    pairs = [
        (body_key(paper.id, sec.index, i), s)
        for sec in paper.sections
        for i, s in enumerate(sec.sentences)
    ]
    pairs.extend((abstract_key(paper.id, i), s) for i, s in enumerate(paper.abstract))
    return pairs


def parse_key(key: str) -> tuple[str, str, int, int]:
    """Split a sentence key into (paper_id, kind, section_idx, sent_idx).

    kind is "s" or "a"; section_idx is -1 for abstract keys.  Body keys are
    tried first so paper ids containing colons parse correctly.
    """
    parts = key.rsplit(":", 3)
    if len(parts) == 4 and parts[1] == "s" and parts[2].isdigit() and parts[3].isdigit():
        return parts[0], "s", int(parts[2]), int(parts[3])
    parts = key.rsplit(":", 2)
    if len(parts) == 3 and parts[1] == "a" and parts[2].isdigit():
        return parts[0], "a", -1, int(parts[2])
    raise ValidationError(f"malformed sentence key {key!r}")


class EmbeddingTable:
    """Fixed-width vectors keyed by sentence key; immutable once built."""

    def __init__(self, dim: int, rows: dict[str, np.ndarray] | None = None):
        if dim < 1:
            raise ValidationError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self._rows: dict[str, np.ndarray] = {}
        if rows:
            for key, vec in rows.items():
                self.put(key, vec)

    def put(self, key: str, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValidationError(f"vector for {key!r} has shape {vec.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"vector for {key!r} has non-finite components")
        self._rows[key] = vec

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key: str) -> bool:
        return key in self._rows

    def __getitem__(self, key: str) -> np.ndarray:
        return self._rows[key]

    def get(self, key: str) -> np.ndarray | None:
        return self._rows.get(key)

    def keys(self) -> list[str]:
        return list(self._rows)

    def body_vectors(self, paper: Paper) -> list[np.ndarray]:
        """Body sentence vectors in document order (sections, then position)."""
        vecs = []
        for sec in paper.sections:
            for i in range(len(sec.sentences)):
                vecs.append(self[body_key(paper.id, sec.index, i)])
        return vecs

    def section_vectors(self, paper: Paper) -> list[np.ndarray]:
        """Per-section stacks of body sentence vectors (as one matrix each)."""
        stacks = []
        for sec in paper.sections:
            stacks.append(np.stack([self[body_key(paper.id, sec.index, i)]
                                    for i in range(len(sec.sentences))]))
        return stacks

    def abstract_vectors(self, paper: Paper) -> list[np.ndarray]:
        return [self[abstract_key(paper.id, i)] for i in range(len(paper.abstract))]

    def covers(self, paper: Paper) -> bool:
        return all(key in self._rows for key, _ in sentence_keys(paper))

    def save(self, path: str) -> None:
        write_embeddings(self, path)

    @classmethod
    def load(cls, path: str) -> "EmbeddingTable":
        return load_embeddings(path)


def write_embeddings(table: EmbeddingTable, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(SEB1_MAGIC)
        fh.write(struct.pack("<IIQ", SEB1_VERSION, table.dim, len(table)))
        for key in table.keys():
            encoded = key.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(table[key].astype("<f4").tobytes())


def load_embeddings(path: str) -> EmbeddingTable:
    """Read and validate a SEB1 file (magic, version, finiteness, unique keys)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20:
        raise FormatError(f"{path}: truncated header")
    if data[:4] != SEB1_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != SEB1_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise FormatError(f"{path}: invalid dim {dim}")
    table = EmbeddingTable(dim=dim)
    offset = 20
    row_bytes = 4 * dim
    for _ in range(count):
        if offset + 4 > len(data):
            raise FormatError(f"{path}: truncated row header")
        (key_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + key_len + row_bytes > len(data):
            raise FormatError(f"{path}: truncated row")
        key = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += row_bytes
        if key in table:
            raise FormatError(f"{path}: duplicate key {key!r}")
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"{path}: non-finite vector for key {key!r}")
        table.put(key, vec)
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return table


# ---------------------------------------------------------------------------
# Built-in hashed tf-idf backend


class TfidfSentenceEmbedder(BaseEstimator):
    """Hashed tf-idf sentence vectors; hash_dim must be a power of two.

    Each sentence counts as one "document" for the idf statistics, computed
    over all body and abstract sentences of the fitted corpus.  Weights use
    the smoothed idf ln((1 + n) / (1 + df)) + 1 and rows are L2-normalized
    (all-zero rows stay zero).
    """

    def __init__(self, hash_dim: int = 256):
        self.hash_dim = hash_dim

    @staticmethod
    def _bucket(token: str, mask: int) -> int:
        return zlib.crc32(token.encode("utf-8")) & mask

    def fit(self, corpus: Corpus, y=None) -> "TfidfSentenceEmbedder":
        if self.hash_dim < 2 or self.hash_dim & (self.hash_dim - 1):
            raise ConfigError(f"hash_dim must be a power of two >= 2, got {self.hash_dim}")
        if len(corpus) == 0:
            raise ValidationError("cannot fit tf-idf on an empty corpus")
        mask = self.hash_dim - 1
        doc_freq: Counter[int] = Counter()
        n_docs = 0
        for paper in corpus:
            for _, sentence in sentence_keys(paper):
                n_docs += 1
                doc_freq.update({self._bucket(t, mask) for t in sentence.tokens})
        self.doc_freq_ = dict(doc_freq)
        self.n_docs_ = n_docs
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "doc_freq_"):
            raise NotFittedError("TfidfSentenceEmbedder is not fitted; call fit first")

    def embed_sentence(self, sentence: Sentence | str) -> np.ndarray:
        self._check_fitted()
        tokens = sentence.tokens if isinstance(sentence, Sentence) else Sentence.from_text(sentence).tokens
        mask = self.hash_dim - 1
        vec = np.zeros(self.hash_dim)
        for bucket, tf in Counter(self._bucket(t, mask) for t in tokens).items():
            df = self.doc_freq_.get(bucket, 0)
            if df == 0:
                continue  # out-of-vocabulary buckets carry no weight
            idf = np.log((1.0 + self.n_docs_) / (1.0 + df)) + 1.0
            vec[bucket] += tf * idf
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def transform(self, sentences) -> np.ndarray:
        return np.stack([self.embed_sentence(s) for s in sentences])

    def build_table(self, corpus: Corpus) -> EmbeddingTable:
        self._check_fitted()
        table = EmbeddingTable(dim=self.hash_dim)
        for paper in corpus:
            for key, sentence in sentence_keys(paper):
                table.put(key, self.embed_sentence(sentence))
        return table


def fit_tfidf(corpus: Corpus, hash_dim: int = 256) -> TfidfSentenceEmbedder:
    return TfidfSentenceEmbedder(hash_dim=hash_dim).fit(corpus)


# ---------------------------------------------------------------------------
# Similarity and the contrastive objective


def raw_cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Plain cosine; zero vectors have similarity 0 with anything."""
    if u.shape != v.shape:
        raise ValidationError(f"cosine: shapes {u.shape} and {v.shape} differ")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def sim01(u: np.ndarray, v: np.ndarray, eps: float = SIM_EPS) -> float:
    """Cosine mapped to [eps, 1 - eps] via (1 + cos) / 2."""
    return float(np.clip((1.0 + raw_cosine(u, v)) / 2.0, eps, 1.0 - eps))


def triplet_loss(d: np.ndarray, d_pos: np.ndarray, d_neg: np.ndarray) -> float:
    """-log sim01(d, d+) - log(1 - sim01(d, d-)); finite by clamping."""
    return float(-np.log(sim01(d, d_pos)) - np.log(1.0 - sim01(d, d_neg)))


def document_rep(sentence_vectors) -> np.ndarray:
    """Componentwise mean of sentence vectors."""
    vectors = list(sentence_vectors)
    if not vectors:
        raise ValidationError("document_rep: no sentence vectors")
    return np.mean(np.stack(vectors), axis=0)


def corpus_document_reps(table: EmbeddingTable, corpus: Corpus) -> tuple[dict, dict]:
    """Per-paper (citing-side, cited-side) document representations.

    The citing side averages body sentence vectors; the cited side averages
    abstract vectors, falling back to the body mean when a paper has no
    abstract.  This mirrors the contrastive objective's geometry.
    """
    query_reps = {}
    target_reps = {}
    for paper in corpus:
        body = document_rep(table.body_vectors(paper))
        query_reps[paper.id] = body
        abstract = table.abstract_vectors(paper)
        target_reps[paper.id] = document_rep(abstract) if abstract else body
    return query_reps, target_reps


def sample_training_triplets(graph: CitationGraph, rng_seed: int,
                             negatives_per_positive: int = 5) -> list[tuple[str, str, str]]:
    """(query, positive, negative) ids: one positive per directed edge,
    negatives drawn uniformly from the query's non-neighbors.

    Edges whose query has no valid negative (n != q and n not in out(q))
    are skipped with a warning.  Deterministic given the seed.
    """
    nodes = graph.nodes
    if len(nodes) < 3 or graph.n_edges == 0:
        raise ValidationError("triplet sampling needs >= 3 nodes and >= 1 edge")
    rng = np.random.default_rng(rng_seed)
    triplets: list[tuple[str, str, str]] = []
    skipped = 0
    for q in nodes:
        targets = graph.out_edges[q]
        if not targets:
            continue
        blocked = set(targets) | {q}
        candidates = [n for n in nodes if n not in blocked]
        if not candidates:
            skipped += len(targets)
            continue
        for p in targets:
            draws = rng.integers(0, len(candidates), size=negatives_per_positive)
            triplets.extend((q, p, candidates[int(i)]) for i in draws)
    if skipped:
        logger.warning("skipped %d edges with no valid negative", skipped)
    return triplets


# ---------------------------------------------------------------------------
# Contrastive projection adapter


def paper_rep_vectors(table: EmbeddingTable, graph: CitationGraph) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Per-paper body-mean and abstract-mean matrices, derived from table keys.

    Papers without abstract rows fall back to the body mean for their
    abstract-side representation.  Raises if a graph node has no body rows.
    """
    body_rows: dict[str, list[np.ndarray]] = {pid: [] for pid in graph.nodes}
    abstract_rows: dict[str, list[np.ndarray]] = {pid: [] for pid in graph.nodes}
    for key in table.keys():
        pid, kind, _, _ = parse_key(key)
        if pid not in body_rows:
            continue
        if kind == "s":
            body_rows[pid].append(table[key])
        else:
            abstract_rows[pid].append(table[key])
    body_means = []
    abstract_means = []
    for pid in graph.nodes:
        if not body_rows[pid]:
            raise ValidationError(f"table has no body vectors for paper {pid!r}")
        body = document_rep(body_rows[pid])
        body_means.append(body)
        abstract_means.append(document_rep(abstract_rows[pid]) if abstract_rows[pid] else body)
    return np.stack(body_means), np.stack(abstract_means), graph.nodes


def _triplet_loss_graph(W: dm.Tensor, body: np.ndarray, abstract: np.ndarray,
                        idx_q: np.ndarray, idx_p: np.ndarray, idx_n: np.ndarray,
                        eps: float = SIM_EPS) -> dm.Tensor:
    """Mean contrastive loss over all triplets as one recorded computation.

    Projection and averaging commute (both linear), so paper representations
    are projected per-paper means.  Rows project as v @ W, matching
    :meth:`ProjectionAdapter.transform`.
    """
    proj_body = dm.matmul(dm.constant(body), W)        # rows: projected query reps
    proj_abs = dm.matmul(dm.constant(abstract), W)     # rows: projected abstract reps

    q = dm.take_rows(proj_body, idx_q)
    p = dm.take_rows(proj_abs, idx_p)
    n = dm.take_rows(proj_abs, idx_n)

    def rowwise_sim01(a: dm.Tensor, b: dm.Tensor) -> dm.Tensor:
        num = dm.sum_(dm.mul(a, b), axis=1)
        den = dm.mul(dm.sqrt(dm.sum_(dm.mul(a, a), axis=1)),
                     dm.sqrt(dm.sum_(dm.mul(b, b), axis=1)))
        cos = dm.div(num, dm.clip(den, 1e-30, np.inf))
        return dm.clip(dm.scale(dm.shift(cos, 1.0), 0.5), eps, 1.0 - eps)

    s_pos = rowwise_sim01(q, p)
    s_neg = rowwise_sim01(q, n)
    losses = dm.sub(dm.scale(dm.log(s_pos), -1.0), dm.log(dm.one_minus(s_neg)))
    return dm.mean(losses)


class ProjectionAdapter(BaseEstimator):
    """Learned linear projection of fixed embeddings, trained on the
    link-prediction contrastive objective over citation triplets.

    Full-batch gradient descent over a triplet sample drawn once per fit
    (so the loss trajectory is comparable across steps); W starts at the
    identity plus small seeded noise.
    """

    def __init__(self, learning_rate: float = 0.05, steps: int = 200,
                 negatives_per_positive: int = 5, init_noise: float = 0.01,
                 seed: int = 0):
        self.learning_rate = learning_rate
        self.steps = steps
        self.negatives_per_positive = negatives_per_positive
        self.init_noise = init_noise
        self.seed = seed

    def fit(self, table: EmbeddingTable, graph: CitationGraph) -> "ProjectionAdapter":
        body, abstract, nodes = paper_rep_vectors(table, graph)
        node_index = {pid: i for i, pid in enumerate(nodes)}
        triplets = sample_training_triplets(graph, self.seed, self.negatives_per_positive)
        if not triplets:
            raise ValidationError("no training triplets could be sampled")
        idx_q = np.array([node_index[q] for q, _, _ in triplets], dtype=np.intp)
        idx_p = np.array([node_index[p] for _, p, _ in triplets], dtype=np.intp)
        idx_n = np.array([node_index[n] for _, _, n in triplets], dtype=np.intp)

        rng = np.random.default_rng(self.seed)
        dim = table.dim
        params = dm.ParamStore()
        W = params.add("W", np.eye(dim) + self.init_noise * rng.standard_normal((dim, dim)))

        trajectory: list[float] = []
        for _ in range(self.steps):
            params.zero_grad()
            with dm.record() as tape:
                loss = _triplet_loss_graph(W, body, abstract, idx_q, idx_p, idx_n)
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericError("adapter training diverged (try a lower learning rate)")
            trajectory.append(value)
            tape.backward(loss)
            W.value = W.value - self.learning_rate * W.grad
        with dm.record():
            trajectory.append(float(_triplet_loss_graph(W, body, abstract, idx_q, idx_p, idx_n).value))

        self.W_ = W.value.copy()
        self.loss_trajectory_ = trajectory
        self.n_triplets_ = len(triplets)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "W_"):
            raise NotFittedError("ProjectionAdapter is not fitted; call fit first")

    def transform(self, table: EmbeddingTable) -> EmbeddingTable:
        """Project every row of the table through the learned matrix."""
        self._check_fitted()
        if self.W_.shape[0] != table.dim:
            raise ValidationError(
                f"adapter was trained for dim {self.W_.shape[0]}, table has dim {table.dim}")
        projected = EmbeddingTable(dim=table.dim)
        for key in table.keys():
            projected.put(key, table[key] @ self.W_)
        return projected


def train_adapter(table: EmbeddingTable, graph: CitationGraph,
                  **config) -> ProjectionAdapter:
    return ProjectionAdapter(**config).fit(table, graph)
