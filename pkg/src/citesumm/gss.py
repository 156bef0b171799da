"""Supervised graph summarization at desk scale.

A neighborhood-aggregation graph encoder contextualizes every paper's
document vector over the citation graph; a gated recurrent sentence encoder
polishes sentence vectors under the document representation across several
hops; multi-head attention over sampled cited-paper representations fuses
graph information into each sentence; a logistic classifier scores
sentences.  Training is multi-task: binary cross-entropy on oracle
extraction labels plus the contrastive link-prediction loss over document
representations.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import diffmath as dm
from .corpus import CitationGraph, Corpus, Paper, build_citation_graph, truncate_document
from .embed import SIM_EPS, EmbeddingTable, document_rep
from .errors import FormatError, NumericError, ValidationError
from .evalkit import link_prediction_accuracy, oracle_labels, rouge_l
from .mus import SelectionPolicy, extract

logger = logging.getLogger("citesumm.gss")

GSSP_MAGIC = b"GSSP"
GSSP_VERSION = 1
PROB_EPS = 1e-12


@dataclass(frozen=True)
class GssConfig:
    hidden_dim: int = 32
    sage_layers: int = 2
    hops: int = 3
    heads: int = 4
    fusion_samples: int = 5
    negatives_per_positive: int = 5
    alpha: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 16
    seed: int = 0
    max_tokens: int = 500
    no_encoder: bool = False
    no_gated: bool = False
    no_fusion: bool = False

    def __post_init__(self):
        if self.hidden_dim < 1 or self.hidden_dim % self.heads:
            raise ValidationError(
                f"hidden_dim ({self.hidden_dim}) must be a positive multiple of heads ({self.heads})")
        if self.hops < 1:
            raise ValidationError(f"hops must be >= 1, got {self.hops}")
        if self.fusion_samples < 1:
            raise ValidationError(f"fusion_samples must be >= 1, got {self.fusion_samples}")
        if self.sage_layers < 1:
            raise ValidationError(f"sage_layers must be >= 1, got {self.sage_layers}")


def init_params(config: GssConfig, rng: np.random.Generator) -> dm.ParamStore:
    """All learnable tensors; matrices are stored in right-multiplication
    layout (rows act as input features)."""
    h = config.hidden_dim
    dh = h // config.heads
    params = dm.ParamStore()

    def mat(name, rows, cols):
        params.add(name, rng.normal(0.0, 1.0 / np.sqrt(rows), size=(rows, cols)))

    def vec(name, n):
        params.add(name, np.zeros(n))

    if not config.no_encoder:
        for layer in range(config.sage_layers):
            mat(f"sage.{layer}.W_v", 2 * h, h)
    if not config.no_gated:
        mat("gate.W_a", 3 * h, h)
        vec("gate.b_a", h)
        mat("gate.W_b", h, h)
        vec("gate.b_b", h)
        mat("cell.W_r", 2 * h, h)
        vec("cell.b_r", h)
        mat("cell.W_c", 2 * h, h)
        vec("cell.b_c", h)
        mat("upd.W_z", 2 * h, h)
        vec("upd.b_z", h)
        mat("upd.W_r", 2 * h, h)
        vec("upd.b_r", h)
        mat("upd.W_c", 2 * h, h)
        vec("upd.b_c", h)
    if not config.no_fusion:
        for head in range(config.heads):
            mat(f"fusion.head{head}.W_q", h, dh)
            mat(f"fusion.head{head}.W_k", h, dh)
            mat(f"fusion.head{head}.W_v", h, dh)
        mat("fusion.W_out", h, h)
    mat_w = rng.normal(0.0, 1.0 / np.sqrt(h), size=h)
    params.add("clf.w", mat_w)
    params.add("clf.b", 0.0)
    return params


def mean_aggregation_matrix(graph: CitationGraph, node_index: dict[str, int]) -> np.ndarray:
    """Row i averages the representations of paper i's cited papers
    (zero row for papers without citations)."""
    n = len(node_index)
    A = np.zeros((n, n))
    for pid, i in node_index.items():
        targets = graph.out_edges[pid]
        if not targets:
            continue
        w = 1.0 / len(targets)
        for t in targets:
            A[i, node_index[t]] += w
    return A


def sage_forward(node_reps: np.ndarray, agg_matrix: np.ndarray,
                 params: dm.ParamStore, layers: int) -> dm.Tensor:
    """Neighborhood aggregation: concat self with the neighbor mean,
    transform, squash, and L2-normalize, repeated ``layers`` times.

    The nonlinearity is tanh: a positive-orthant squashing (sigmoid) would
    force all document cosines positive and break the fixed-threshold link
    prediction rule.
    """
    A = dm.constant(agg_matrix)
    D = dm.constant(node_reps)
    for layer in range(layers):
        aggregated = dm.matmul(A, D)
        combined = dm.concat_cols([D, aggregated])
        D = dm.l2_normalize_rows(dm.tanh(dm.matmul(combined, params[f"sage.{layer}.W_v"])))
    return D


def reading_gate(sentence_matrix: dm.Tensor, state_matrix: dm.Tensor,
                 d_hat: dm.Tensor, params: dm.ParamStore) -> dm.Tensor:
    """Softmax (per hidden coordinate, across sentences) over a two-layer
    transform of [s * h; s; d_hat]."""
    t_s = sentence_matrix.shape[0]
    features = dm.concat_cols([
        dm.mul(sentence_matrix, state_matrix),
        sentence_matrix,
        dm.tile_row(d_hat, t_s),
    ])
    hidden = dm.tanh(dm.add_rowvec(dm.matmul(features, params["gate.W_a"]), params["gate.b_a"]))
    scores = dm.add_rowvec(dm.matmul(hidden, params["gate.W_b"]), params["gate.b_b"])
    return dm.softmax(scores, axis=0)


def _gru_candidate(s_i: dm.Tensor, h: dm.Tensor, params: dm.ParamStore) -> dm.Tensor:
    joint = dm.concat([s_i, h])
    reset = dm.sigmoid(dm.add(dm.matmul(joint, params["cell.W_r"]), params["cell.b_r"]))
    gated = dm.concat([s_i, dm.mul(reset, h)])
    return dm.tanh(dm.add(dm.matmul(gated, params["cell.W_c"]), params["cell.b_c"]))


def gated_pass(sentence_tensors: list[dm.Tensor], d_hat: dm.Tensor,
               params: dm.ParamStore, h_init: dm.Tensor,
               gate_states: list[dm.Tensor] | None = None,
               gate_override: dm.Tensor | None = None) -> list[dm.Tensor]:
    """One left-to-right recurrence; returns the state after reading each
    sentence.

    The gate softmax needs every sentence's score before any state update,
    so gate inputs are the per-sentence states of the previous hop
    (``gate_states``, defaulting to ``h_init`` everywhere); the candidate and
    the convex combination use the live recurrent state.
    """
    t_s = len(sentence_tensors)
    if gate_states is None:
        gate_states = [h_init] * t_s
    S = dm.stack_rows(sentence_tensors)
    if gate_override is not None:
        gates = gate_override
    else:
        gates = reading_gate(S, dm.stack_rows(gate_states), d_hat, params)
    h = h_init
    states = []
    for i in range(t_s):
        g_i = dm.row(gates, i)
        candidate = _gru_candidate(sentence_tensors[i], h, params)
        h = dm.add(dm.mul(g_i, candidate), dm.mul(dm.one_minus(g_i), h))
        states.append(h)
    return states


def _gru_update(x: dm.Tensor, state: dm.Tensor, params: dm.ParamStore) -> dm.Tensor:
    joint = dm.concat([x, state])
    z = dm.sigmoid(dm.add(dm.matmul(joint, params["upd.W_z"]), params["upd.b_z"]))
    r = dm.sigmoid(dm.add(dm.matmul(joint, params["upd.W_r"]), params["upd.b_r"]))
    cand_in = dm.concat([x, dm.mul(r, state)])
    candidate = dm.tanh(dm.add(dm.matmul(cand_in, params["upd.W_c"]), params["upd.b_c"]))
    return dm.add(dm.mul(z, candidate), dm.mul(dm.one_minus(z), state))


def gated_encode(sentence_vectors: np.ndarray, d_hat0: dm.Tensor,
                 params: dm.ParamStore, hops: int) -> tuple[list[dm.Tensor], dm.Tensor]:
    """Multi-hop gated reading; the document representation is refreshed from
    each hop's final state, and sentence outputs get a residual connection."""
    t_s = sentence_vectors.shape[0]
    sentence_tensors = [dm.constant(sentence_vectors[i]) for i in range(t_s)]
    h_init = dm.constant(np.zeros(sentence_vectors.shape[1]))
    gate_states: list[dm.Tensor] | None = None
    d_hat = d_hat0
    states = [h_init] * t_s
    for _ in range(hops):
        states = gated_pass(sentence_tensors, d_hat, params, h_init, gate_states=gate_states)
        d_hat = _gru_update(states[-1], d_hat, params)
        gate_states = states
    s_final = [dm.add(states[i], sentence_tensors[i]) for i in range(t_s)]
    return s_final, d_hat


def fusion(s_final: list[dm.Tensor], neighbor_reps: list[dm.Tensor],
           params: dm.ParamStore, heads: int,
           attention_out: list[dm.Tensor] | None = None) -> dm.Tensor:
    """Scaled dot-product multi-head attention: queries are sentence
    representations, keys and values are sampled cited-paper representations.

    Pass ``attention_out`` to collect the per-head attention matrices
    (sentences x keys, rows summing to 1).
    """
    queries = dm.stack_rows(s_final)
    keys = dm.stack_rows(neighbor_reps)
    dh = queries.shape[1] // heads
    head_outputs = []
    for head in range(heads):
        Q = dm.matmul(queries, params[f"fusion.head{head}.W_q"])
        K = dm.matmul(keys, params[f"fusion.head{head}.W_k"])
        V = dm.matmul(keys, params[f"fusion.head{head}.W_v"])
        scores = dm.scale(dm.matmul(Q, dm.transpose(K)), 1.0 / np.sqrt(dh))
        attention = dm.softmax(scores, axis=1)
        if attention_out is not None:
            attention_out.append(attention)
        head_outputs.append(dm.matmul(attention, V))
    return dm.matmul(dm.concat_cols(head_outputs), params["fusion.W_out"])


def classify(fused: dm.Tensor, params: dm.ParamStore) -> dm.Tensor:
    logits = dm.add_scalar(dm.matmul(fused, params["clf.w"]), params["clf.b"])
    return dm.sigmoid(logits)


def binary_cross_entropy(y: dm.Tensor, labels: np.ndarray) -> dm.Tensor:
    """Mean BCE with clamped probabilities so saturated sigmoids stay finite."""
    pos = dm.constant(np.asarray(labels, dtype=np.float64))
    neg = dm.constant(1.0 - np.asarray(labels, dtype=np.float64))
    y_safe = dm.clip(y, PROB_EPS, 1.0 - PROB_EPS)
    terms = dm.add(dm.mul(pos, dm.log(y_safe)), dm.mul(neg, dm.log(dm.one_minus(y_safe))))
    return dm.scale(dm.mean(terms), -1.0)


def triplet_loss_rows(rows: dm.Tensor, idx_q: np.ndarray, idx_p: np.ndarray,
                      idx_n: np.ndarray, eps: float = SIM_EPS) -> dm.Tensor:
    """Mean contrastive loss over triplets of rows of a representation matrix."""
    q = dm.take_rows(rows, idx_q)
    p = dm.take_rows(rows, idx_p)
    n = dm.take_rows(rows, idx_n)

    def rowwise_sim01(a, b):
        num = dm.sum_(dm.mul(a, b), axis=1)
        den = dm.mul(dm.sqrt(dm.sum_(dm.mul(a, a), axis=1)),
                     dm.sqrt(dm.sum_(dm.mul(b, b), axis=1)))
        cos = dm.div(num, dm.clip(den, 1e-30, np.inf))
        return dm.clip(dm.scale(dm.shift(cos, 1.0), 0.5), eps, 1.0 - eps)

    s_pos = rowwise_sim01(q, p)
    s_neg = rowwise_sim01(q, n)
    losses = dm.sub(dm.scale(dm.log(s_pos), -1.0), dm.log(dm.one_minus(s_neg)))
    return dm.mean(losses)


@dataclass
class GssOutput:
    """Per-sentence extraction probabilities plus the intermediate
    representations of one paper's forward pass."""

    scores: np.ndarray
    d_hat: np.ndarray
    s_final: np.ndarray


class _Forward:
    """Shared forward machinery over a fixed corpus/table binding."""

    def __init__(self, corpus: Corpus, table: EmbeddingTable, graph: CitationGraph,
                 config: GssConfig):
        self.config = config
        self.graph = graph
        self.node_ids = corpus.ids()
        self.node_index = {pid: i for i, pid in enumerate(self.node_ids)}
        self.papers = {pid: truncate_document(corpus[pid], config.max_tokens)
                       for pid in self.node_ids}
        for pid in self.node_ids:
            if not table.covers(corpus[pid]):
                raise ValidationError(f"embedding table does not cover paper {pid!r}")
        if table.dim != config.hidden_dim:
            raise ValidationError(
                f"embedding dim {table.dim} must equal hidden_dim {config.hidden_dim} "
                f"(re-embed with a matching width)")
        self.sentence_vectors = {pid: np.stack(table.body_vectors(self.papers[pid]))
                                 for pid in self.node_ids}
        self.node_reps = np.stack([self.sentence_vectors[pid].mean(axis=0)
                                   for pid in self.node_ids])
        self.agg_matrix = mean_aggregation_matrix(graph, self.node_index)

    def document_matrix(self, params: dm.ParamStore) -> dm.Tensor:
        if self.config.no_encoder:
            return dm.constant(self.node_reps)
        return sage_forward(self.node_reps, self.agg_matrix, params,
                            self.config.sage_layers)

    def sample_fusion_neighbors(self, pid: str, rng: np.random.Generator) -> list[int]:
        cited = self.graph.out_edges[pid]
        m = self.config.fusion_samples
        if not cited:
            return [self.node_index[pid]]  # self-representation as the single key
        draws = rng.integers(0, len(cited), size=m)
        return [self.node_index[cited[int(i)]] for i in draws]

    def paper_scores(self, pid: str, params: dm.ParamStore, d_matrix: dm.Tensor,
                     rng: np.random.Generator) -> dm.Tensor:
        config = self.config
        vectors = self.sentence_vectors[pid]
        d_hat = dm.row(d_matrix, self.node_index[pid])
        if config.no_gated:
            s_final = [dm.constant(vectors[i]) for i in range(vectors.shape[0])]
        else:
            s_final, _ = gated_encode(vectors, d_hat, params, config.hops)
        if config.no_fusion:
            fused = dm.stack_rows(s_final)
        else:
            neighbor_idx = self.sample_fusion_neighbors(pid, rng)
            neighbors = [dm.row(d_matrix, i) for i in neighbor_idx]
            fused = fusion(s_final, neighbors, params, config.heads)
        return classify(fused, params)


def total_loss(forward: _Forward, params: dm.ParamStore, batch_ids: list[str],
               labels: dict[str, np.ndarray], triplets: np.ndarray | None,
               rng: np.random.Generator, alpha: float) -> dm.Tensor:
    """Mean per-paper cross-entropy plus alpha times the mean link loss."""
    d_matrix = forward.document_matrix(params)
    ce_terms = []
    for pid in batch_ids:
        y = forward.paper_scores(pid, params, d_matrix, rng)
        ce_terms.append(binary_cross_entropy(y, labels[pid]))
    loss = ce_terms[0]
    for term in ce_terms[1:]:
        loss = dm.add(loss, term)
    loss = dm.scale(loss, 1.0 / len(ce_terms))
    if alpha != 0.0 and triplets is not None and len(triplets):
        link = triplet_loss_rows(d_matrix, triplets[:, 0], triplets[:, 1], triplets[:, 2])
        loss = dm.add(loss, dm.scale(link, alpha))
    return loss


def _sample_epoch_triplets(graph: CitationGraph, node_index: dict[str, int],
                           train_ids: set[str], negatives: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Per-epoch (query, positive, negative) node indices from train-split
    edges, with negatives uniform over the query's train-split non-neighbors."""
    train_list = [pid for pid in node_index if pid in train_ids]
    triplets = []
    for q in train_list:
        targets = [t for t in graph.out_edges[q] if t in train_ids]
        if not targets:
            continue
        blocked = set(graph.out_edges[q]) | {q}
        candidates = [n for n in train_list if n not in blocked]
        if not candidates:
            continue
        for p in targets:
            draws = rng.integers(0, len(candidates), size=negatives)
            triplets.extend((node_index[q], node_index[p], node_index[candidates[int(i)]])
                            for i in draws)
    return np.array(triplets, dtype=np.intp).reshape(-1, 3)


class GssSummarizer(BaseEstimator):
    """Trainable supervised extractor with the architecture above.

    fit() computes oracle labels on the train split, optimizes the
    multi-task loss with Adam, tracks validation summary quality per epoch,
    and keeps the best checkpoint.  predict() scores sentences and applies
    the shared selection policy.
    """

    def __init__(self, hidden_dim: int = 32, sage_layers: int = 2, hops: int = 3,
                 heads: int = 4, fusion_samples: int = 5,
                 negatives_per_positive: int = 5, alpha: float = 1.0,
                 learning_rate: float = 1e-3, epochs: int = 10, batch_size: int = 16,
                 seed: int = 0, max_tokens: int = 500, no_encoder: bool = False,
                 no_gated: bool = False, no_fusion: bool = False,
                 selection_mode: str = "match_reference", k: int = 3):
        self.hidden_dim = hidden_dim
        self.sage_layers = sage_layers
        self.hops = hops
        self.heads = heads
        self.fusion_samples = fusion_samples
        self.negatives_per_positive = negatives_per_positive
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.max_tokens = max_tokens
        self.no_encoder = no_encoder
        self.no_gated = no_gated
        self.no_fusion = no_fusion
        self.selection_mode = selection_mode
        self.k = k

    def _config(self) -> GssConfig:
        return GssConfig(
            hidden_dim=self.hidden_dim, sage_layers=self.sage_layers, hops=self.hops,
            heads=self.heads, fusion_samples=self.fusion_samples,
            negatives_per_positive=self.negatives_per_positive, alpha=self.alpha,
            learning_rate=self.learning_rate, epochs=self.epochs,
            batch_size=self.batch_size, seed=self.seed, max_tokens=self.max_tokens,
            no_encoder=self.no_encoder, no_gated=self.no_gated, no_fusion=self.no_fusion)

    def fit(self, corpus: Corpus, table: EmbeddingTable,
            graph: CitationGraph | None = None,
            labels: dict[str, np.ndarray] | None = None) -> "GssSummarizer":
        config = self._config()
        graph = graph if graph is not None else build_citation_graph(corpus)
        forward = _Forward(corpus, table, graph, config)
        rng = np.random.default_rng(config.seed)
        params = init_params(config, rng)

        train_ids = [pid for pid in corpus.ids()
                     if corpus[pid].split == "train" and corpus[pid].abstract]
        if not train_ids:
            raise ValidationError("no labeled training papers (train split with abstracts)")
        if labels is None:
            labels = {pid: oracle_labels(forward.papers[pid]).y_prime for pid in train_ids}
        else:
            for pid in train_ids:
                if pid not in labels:
                    raise ValidationError(f"missing labels for training paper {pid!r}")
                if len(labels[pid]) != forward.papers[pid].n_body_sentences:
                    raise ValidationError(f"label length mismatch for paper {pid!r}")
        val_ids = [pid for pid in corpus.ids()
                   if corpus[pid].split == "validation" and corpus[pid].abstract]

        optimizer = dm.Adam(params, learning_rate=config.learning_rate)
        train_set = set(train_ids)
        best: tuple[float, int, dict[str, np.ndarray]] | None = None
        log: list[dict] = []
        diverged = False
        for epoch in range(config.epochs):
            order = [train_ids[int(i)] for i in rng.permutation(len(train_ids))]
            triplets = _sample_epoch_triplets(graph, forward.node_index, train_set,
                                              config.negatives_per_positive, rng)
            n_batches = max(1, int(np.ceil(len(order) / config.batch_size)))
            chunk = int(np.ceil(len(triplets) / n_batches)) if len(triplets) else 0
            epoch_losses = []
            try:
                for b in range(n_batches):
                    batch = order[b * config.batch_size: (b + 1) * config.batch_size]
                    if not batch:
                        continue
                    batch_triplets = (triplets[b * chunk: (b + 1) * chunk]
                                      if chunk else None)
                    params.zero_grad()
                    with dm.record() as tape:
                        loss = total_loss(forward, params, batch, labels,
                                          batch_triplets, rng, config.alpha)
                    epoch_losses.append(float(loss.value))
                    tape.backward(loss)
                    optimizer.step()
            except NumericError as exc:
                logger.warning("training diverged at epoch %d: %s", epoch, exc)
                diverged = True

            if diverged:
                log.append({"epoch": epoch, "train_loss": float("nan"),
                            "val_rgl": None, "link_acc": None})
                break
            train_loss = float(np.mean(epoch_losses)) if epoch_losses else float("nan")
            val_rgl = self._validation_rgl(forward, params, val_ids)
            link_acc = self._validation_link_accuracy(forward, params, corpus, graph,
                                                      config.seed + epoch)
            log.append({"epoch": epoch, "train_loss": train_loss,
                        "val_rgl": val_rgl, "link_acc": link_acc})
            # best checkpoint by validation summary quality; without a
            # validation split, keep the latest parameters
            if (best is None or val_rgl is None
                    or best[0] is None or val_rgl > best[0]):
                best = (val_rgl, epoch, {name: t.value.copy() for name, t in params.items()})

        if best is None:
            raise NumericError("training diverged before completing the first epoch")
        for name, tensor in params.items():
            tensor.value = best[2][name].copy()
        self.params_ = params
        self.config_ = config
        self.forward_ = forward
        self.log_ = log
        self.best_epoch_ = best[1]
        self.labels_ = labels
        return self

    def _validation_rgl(self, forward: _Forward, params: dm.ParamStore,
                        val_ids: list[str]) -> float | None:
        if not val_ids:
            return None
        scores = []
        for pid in val_ids:
            paper = forward.papers[pid]
            output = self._infer_scores(forward, params, pid)
            selected = extract(output, SelectionPolicy(), abstract_len=len(paper.abstract))
            body = paper.body_sentences()
            candidate = [t for i in selected for t in body[i].tokens]
            reference = [t for s in paper.abstract for t in s.tokens]
            scores.append(rouge_l(candidate, reference).f1)
        return float(np.mean(scores))

    def _validation_link_accuracy(self, forward: _Forward, params: dm.ParamStore,
                                  corpus: Corpus, graph: CitationGraph,
                                  seed: int) -> float | None:
        edges = [(u, v) for u, v in graph.edges() if corpus[u].split == "validation"]
        if not edges:
            return None
        reps = self._document_reps(forward, params)
        return link_prediction_accuracy(reps, edges, rng_seed=seed,
                                        forbidden_edges=set(graph.edges()))

    def _document_reps(self, forward: _Forward, params: dm.ParamStore) -> dict[str, np.ndarray]:
        with dm.record():
            matrix = forward.document_matrix(params).value
        return {pid: matrix[i] for pid, i in forward.node_index.items()}

    def _infer_scores(self, forward: _Forward, params: dm.ParamStore, pid: str) -> np.ndarray:
        rng = np.random.default_rng((self.seed, forward.node_index[pid]))
        with dm.record():
            d_matrix = forward.document_matrix(params)
            y = forward.paper_scores(pid, params, d_matrix, rng)
        return y.value.copy()

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError("GssSummarizer is not fitted; call fit first")

    @classmethod
    def from_checkpoint(cls, path: str, corpus: Corpus, table: EmbeddingTable,
                        graph: CitationGraph | None = None,
                        selection_mode: str = "match_reference", k: int = 3,
                        **overrides) -> "GssSummarizer":
        """Rebuild an inference-ready summarizer from a saved checkpoint.

        ``overrides`` may switch architecture ablations at inference time
        (no_gated, no_fusion, ...); parameters stay those of the checkpoint.
        """
        params, config = load_checkpoint(path)
        settings = {**asdict(config), **overrides}
        model = cls(selection_mode=selection_mode, k=k, **settings)
        graph = graph if graph is not None else build_citation_graph(corpus)
        model.params_ = params
        model.config_ = GssConfig(**settings)
        model.forward_ = _Forward(corpus, table, graph, model.config_)
        model.log_ = []
        model.best_epoch_ = -1
        return model

    def predict_scores(self, paper_id: str) -> np.ndarray:
        self._check_fitted()
        return self._infer_scores(self.forward_, self.params_, paper_id)

    def encode_paper(self, paper_id: str) -> GssOutput:
        """Scores plus intermediate representations for one paper."""
        self._check_fitted()
        forward = self.forward_
        config = self.config_
        rng = np.random.default_rng((self.seed, forward.node_index[paper_id]))
        with dm.record():
            d_matrix = forward.document_matrix(self.params_)
            d_hat = dm.row(d_matrix, forward.node_index[paper_id])
            vectors = forward.sentence_vectors[paper_id]
            if config.no_gated:
                s_final = [dm.constant(vectors[i]) for i in range(vectors.shape[0])]
            else:
                s_final, d_hat = gated_encode(vectors, d_hat, self.params_, config.hops)
            if config.no_fusion:
                fused = dm.stack_rows(s_final)
            else:
                neighbor_idx = forward.sample_fusion_neighbors(paper_id, rng)
                neighbors = [dm.row(d_matrix, i) for i in neighbor_idx]
                fused = fusion(s_final, neighbors, self.params_, config.heads)
            y = classify(fused, self.params_)
        return GssOutput(scores=y.value.copy(), d_hat=d_hat.value.copy(),
                         s_final=np.stack([s.value for s in s_final]))

    def predict(self, paper_id: str) -> list[int]:
        self._check_fitted()
        scores = self.predict_scores(paper_id)
        paper = self.forward_.papers[paper_id]
        policy = SelectionPolicy(mode=self.selection_mode, k=self.k)
        return extract(scores, policy, abstract_len=len(paper.abstract))

    def summarize(self, paper_id: str) -> dict:
        self._check_fitted()
        scores = self.predict_scores(paper_id)
        paper = self.forward_.papers[paper_id]
        policy = SelectionPolicy(mode=self.selection_mode, k=self.k)
        selected = extract(scores, policy, abstract_len=len(paper.abstract))
        sentences = paper.body_sentences()
        return {
            "paper_id": paper_id,
            "selected": selected,
            "sentences": [sentences[i].text for i in selected],
            "scores": {"y": scores.tolist()},
        }

    def document_reps(self) -> dict[str, np.ndarray]:
        """Graph-encoder document representations under the trained params."""
        self._check_fitted()
        return self._document_reps(self.forward_, self.params_)


# ---------------------------------------------------------------------------
# Checkpoint format


def save_checkpoint(params: dm.ParamStore, config: GssConfig, path: str) -> None:
    config_bytes = json.dumps(asdict(config), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(GSSP_MAGIC)
        fh.write(struct.pack("<I", GSSP_VERSION))
        fh.write(struct.pack("<I", len(config_bytes)))
        fh.write(config_bytes)
        names = sorted(params.names())
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            encoded = name.encode("utf-8")
            value = params[name].value
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", value.ndim))
            for extent in value.shape:
                fh.write(struct.pack("<Q", extent))
            fh.write(value.astype("<f8").tobytes())


def load_checkpoint(path: str) -> tuple[dm.ParamStore, GssConfig]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != GSSP_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != GSSP_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    (config_len,) = struct.unpack_from("<I", data, 8)
    offset = 12
    try:
        config = GssConfig(**json.loads(data[offset: offset + config_len]))
    except (json.JSONDecodeError, TypeError) as exc:
        raise FormatError(f"{path}: corrupt config block ({exc})") from exc
    offset += config_len
    (n_params,) = struct.unpack_from("<I", data, offset)
    offset += 4
    params = dm.ParamStore()
    for _ in range(n_params):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        name = data[offset: offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = []
        for _ in range(rank):
            (extent,) = struct.unpack_from("<Q", data, offset)
            shape.append(extent)
            offset += 8
        count = int(np.prod(shape)) if shape else 1
        value = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        params.add(name, value.copy())
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return params, config
