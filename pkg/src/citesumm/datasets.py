"""Seeded synthetic corpora with planted citation structure.

The generator plants vocabulary so that every signal the toolkit models is
separately recoverable:

* each paper owns unique "signature" tokens; its abstract consists of
  signature-only content sentences plus one generic sentence shared by all
  papers;
* citing papers repeat the cited papers' signature tokens inside body "key"
  sentences, so shared vocabulary exists exactly along (planted) citation
  edges;
* each key sentence embeds one abstract sentence verbatim but sits behind
  filler distractors that share an in-section pattern, so lead-biased and
  purely intra-document rankers prefer the wrong sentences;
* clusters never cite each other, and cluster topology is skewed: a founder
  hub plus well-cited anchor papers, which keeps contrastive training on the
  citation graph well-conditioned at desk scale;
* a set of "cold" papers have their reference lists emptied; their planted
  edges (onto anchor targets that keep several warm citers) form the held-out
  positives for link-prediction evaluation;
* token names are chosen collision-free under the built-in tf-idf hasher at
  ``hash_dim``, so unrelated papers have exactly zero feature overlap at that
  width.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, parse_corpus

SIGNATURE_SIZE = 6
FILLER_VOCAB = 40
TOPIC_VOCAB = 20
COMMON_WORDS = ("overall", "analysis", "context", "summary", "remarks")


def _collision_free(base_names: list[str], hash_dim: int) -> list[str]:
    """Rename tokens (counter suffixes) until all hash buckets are distinct."""
    mask = hash_dim - 1
    used: set[int] = set()
    out = []
    for name in base_names:
        candidate, i = name, 0
        while (zlib.crc32(candidate.encode("utf-8")) & mask) in used:
            i += 1
            candidate = f"{name}q{i}"
        used.add(zlib.crc32(candidate.encode("utf-8")) & mask)
        out.append(candidate)
    return out


@dataclass
class SyntheticCorpus:
    corpus: Corpus
    clusters: dict[str, int]
    held_out_edges: list[tuple[str, str]]
    planted_edges: list[tuple[str, str]] = field(default_factory=list)

    @property
    def planted_edge_set(self) -> set[tuple[str, str]]:
        return set(self.planted_edges)


def make_clustered_corpus(n_papers: int = 60, n_clusters: int = 2, seed: int = 0,
                          n_sections: int = 3, distractors_per_section: int = 2,
                          n_cold: int = 12, hash_dim: int = 512,
                          key_citation_tokens: int = 8,
                          min_warm_citers: int = 3) -> SyntheticCorpus:
    """Two-cluster (by default) citation corpus with planted shared vocabulary.

    Every paper cites its cluster founder plus up to two anchor papers and one
    other predecessor; ``n_cold`` papers keep empty reference lists and
    contribute their planted edges (onto anchors with at least
    ``min_warm_citers`` remaining citers) as held-out link-prediction
    positives.
    """
    if n_papers < 6 * n_clusters:
        raise ValueError(f"need at least {6 * n_clusters} papers for {n_clusters} clusters")
    rng = np.random.default_rng(seed)
    ids = [f"paper{i:03d}" for i in range(n_papers)]

    base = ([f"filler{i:02d}" for i in range(FILLER_VOCAB)]
            + [f"topic{c}w{i:02d}" for c in range(n_clusters) for i in range(TOPIC_VOCAB)]
            + [f"sig{pid}x{j}" for pid in ids for j in range(SIGNATURE_SIZE)]
            + list(COMMON_WORDS))
    tokens = _collision_free(base, hash_dim)
    filler = tokens[:FILLER_VOCAB]
    offset = FILLER_VOCAB
    topics = {c: tokens[offset + c * TOPIC_VOCAB: offset + (c + 1) * TOPIC_VOCAB]
              for c in range(n_clusters)}
    offset += n_clusters * TOPIC_VOCAB
    signatures = {pid: tokens[offset + i * SIGNATURE_SIZE: offset + (i + 1) * SIGNATURE_SIZE]
                  for i, pid in enumerate(ids)}
    common_sentence = " ".join(tokens[offset + n_papers * SIGNATURE_SIZE:]) + "."

    clusters = {pid: i % n_clusters for i, pid in enumerate(ids)}
    by_cluster: dict[int, list[str]] = {c: [] for c in range(n_clusters)}
    for pid in ids:
        by_cluster[clusters[pid]].append(pid)

    def sample(pool, k):
        take = min(k, len(pool))
        return [pool[int(i)] for i in rng.choice(len(pool), size=take, replace=False)]

    planted: dict[str, list[str]] = {pid: [] for pid in ids}
    founders = {c: members[0] for c, members in by_cluster.items()}
    anchors = {c: members[1:5] for c, members in by_cluster.items()}
    for c, members in by_cluster.items():
        for rank, pid in enumerate(members):
            if rank == 0:
                continue
            chosen = [founders[c]]
            anchor_pool = [a for a in anchors[c] if a in members[:rank]]
            chosen += sample(anchor_pool, min(2, len(anchor_pool)))
            others = [m for m in members[:rank] if m not in chosen]
            chosen += sample(others, min(1, len(others)))
            planted[pid] = chosen

    eligible = [pid for pid in ids if len(planted[pid]) >= 3]
    cold = set(sample(eligible, min(n_cold, len(eligible))))
    references = {pid: ([] if pid in cold else list(planted[pid])) for pid in ids}
    warm_citers: dict[str, int] = {}
    for pid in ids:
        for target in references[pid]:
            warm_citers[target] = warm_citers.get(target, 0) + 1
    founder_set = set(founders.values())
    held_out = [(pid, target) for pid in ids if pid in cold
                for target in planted[pid]
                if warm_citers.get(target, 0) >= min_warm_citers and target not in founder_set]

    split_pool = [ids[int(i)] for i in rng.permutation(n_papers)]
    n_val = n_test = int(round(0.15 * n_papers))
    split_of = {pid: "train" for pid in ids}
    for pid in split_pool[:n_val]:
        split_of[pid] = "validation"
    for pid in split_pool[n_val: n_val + n_test]:
        split_of[pid] = "test"

    records = []
    for pid in ids:
        c = clusters[pid]
        own_topic = sample(topics[c], 5)
        own_sig = signatures[pid]
        cited_sigs = [t for target in planted[pid] for t in signatures[target]]

        def cited_sample(k):
            return sample(cited_sigs, k) if cited_sigs else sample(own_sig, k)

        abstract = [" ".join(sample(own_sig, SIGNATURE_SIZE)) + "." for _ in range(n_sections)]
        sections = []
        for k in range(n_sections):
            pattern = sample(filler, 4)
            sentences = [" ".join(pattern + sample(filler, 3)) + "."
                         for _ in range(distractors_per_section)]
            key = (abstract[k].rstrip(".") + " "
                   + " ".join(cited_sample(key_citation_tokens) + sample(own_topic, 1)) + ".")
            key_pos = int(rng.integers(2, len(sentences) + 1))
            sentences.insert(key_pos, key)
            sections.append(sentences)
        abstract.append(common_sentence)

        records.append(json.dumps({
            "paper_id": pid,
            "abstract": abstract,
            "sections": sections,
            "references": references[pid],
            "split": split_of[pid],
        }))

    corpus = parse_corpus(records, mode="transductive")
    planted_edges = [(pid, target) for pid in ids for target in planted[pid]]
    return SyntheticCorpus(corpus=corpus, clusters=clusters,
                           held_out_edges=held_out, planted_edges=planted_edges)
