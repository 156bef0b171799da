"""Link-prediction finetuning before export.

Training instances are citation triplets from the train split: the citing
paper (represented by the average of its body sentence vectors), the cited
paper and a sampled non-cited paper (both represented by the average of
their abstract sentence vectors, falling back to the body average).  The
loss is -log s(d, d+) - log(1 - s(d, d-)) with the cosine mapped to
[eps, 1-eps] via (1 + cos) / 2.
"""

from __future__ import annotations

import logging

import numpy as np
import torch

from .corpus import Paper
from .encoders import HashedNgramEncoder

logger = logging.getLogger("embed_export.finetune")

SIM_EPS = 1e-6


def sample_triplets(papers: dict[str, Paper], negatives: int,
                    rng: np.random.Generator) -> list[tuple[str, str, str]]:
    """(query, cited, non-cited) ids over train-split edges."""
    train_ids = [pid for pid, p in papers.items() if p.split == "train"]
    train_set = set(train_ids)
    triplets = []
    for q in train_ids:
        targets = [t for t in papers[q].references if t in train_set]
        if not targets:
            continue
        blocked = set(papers[q].references) | {q}
        candidates = [n for n in train_ids if n not in blocked]
        if not candidates:
            continue
        for p in targets:
            draws = rng.integers(0, len(candidates), size=negatives)
            triplets.extend((q, p, candidates[int(i)]) for i in draws)
    return triplets


def sim01(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    cos = torch.nn.functional.cosine_similarity(a, b, dim=-1)
    return ((1.0 + cos) / 2.0).clamp(SIM_EPS, 1.0 - SIM_EPS)


def triplet_loss(query: torch.Tensor, positive: torch.Tensor,
                 negative: torch.Tensor) -> torch.Tensor:
    return (-torch.log(sim01(query, positive))
            - torch.log(1.0 - sim01(query, negative))).mean()


def finetune_hashed(encoder: HashedNgramEncoder, papers: dict[str, Paper],
                    epochs: int, negatives: int = 5, learning_rate: float = 0.1,
                    seed: int = 0, max_tokens: int | None = None) -> list[float]:
    """Train the encoder's linear head; returns the loss trajectory
    (pre-update loss per epoch plus one final evaluation).

    The head is linear, so paper representations are the head applied to
    per-paper feature means (projection and averaging commute).
    """
    if epochs < 1:
        return []
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)

    body_means = {}
    abstract_means = {}
    for pid, paper in papers.items():
        items = paper.sentence_items()  # body sentences first, then abstract
        n_body = sum(len(sec) for sec in paper.sections)
        body = np.stack([encoder.featurize(text, max_tokens) for _, text in items[:n_body]])
        body_means[pid] = body.mean(axis=0)
        abstract_items = items[n_body:]
        if abstract_items:
            abstract = np.stack([encoder.featurize(text, max_tokens)
                                 for _, text in abstract_items])
            abstract_means[pid] = abstract.mean(axis=0)
        else:
            abstract_means[pid] = body_means[pid]

    def batch_tensors(triplets):
        q = torch.from_numpy(np.stack([body_means[a] for a, _, _ in triplets])).double()
        p = torch.from_numpy(np.stack([abstract_means[b] for _, b, _ in triplets])).double()
        n = torch.from_numpy(np.stack([abstract_means[c] for _, _, c in triplets])).double()
        return q, p, n

    optimizer = torch.optim.Adam(encoder.trainable_parameters(), lr=learning_rate)
    losses: list[float] = []
    triplets: list[tuple[str, str, str]] = []
    for _ in range(epochs):
        triplets = sample_triplets(papers, negatives, rng)
        if not triplets:
            logger.warning("no training triplets; skipping finetune")
            return losses
        q, p, n = batch_tensors(triplets)
        optimizer.zero_grad()
        loss = triplet_loss(encoder.encode_tensor(q), encoder.encode_tensor(p),
                            encoder.encode_tensor(n))
        losses.append(float(loss.detach()))
        loss.backward()
        optimizer.step()
    with torch.no_grad():
        q, p, n = batch_tensors(triplets)
        losses.append(float(triplet_loss(encoder.encode_tensor(q),
                                         encoder.encode_tensor(p),
                                         encoder.encode_tensor(n))))
    return losses
