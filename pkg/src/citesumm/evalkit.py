"""Evaluation: ROUGE-1/2/L, greedy oracle labels, LEAD, link prediction.

ROUGE here uses the toolkit tokenizer with no stemming or stopword removal,
so scores are internally consistent but not identical to the official
Perl implementation.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Paper
from .embed import sim01
from .errors import ValidationError
from .mus import SelectionPolicy

logger = logging.getLogger("citesumm.evalkit")

CITATION_BUCKETS = ((0, 0), (1, 2), (3, 4), (5, 6), (7, 9), (10, None))


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
        return cls(precision=precision, recall=recall, f1=f1)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap; empty n-gram sets give zero scores."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    n_cand = sum(cand.values())
    n_ref = sum(ref.values())
    if n_cand == 0 or n_ref == 0:
        return RougeScore(0.0, 0.0, 0.0)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return RougeScore.from_pr(overlap / n_cand, overlap / n_ref)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length by dynamic programming."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    if not candidate or not reference:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(candidate, reference)
    return RougeScore.from_pr(lcs / len(candidate), lcs / len(reference))


@dataclass
class GoldLabels:
    """Binary extraction targets, aligned with body sentence order."""

    y_prime: np.ndarray

    @property
    def positives(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.y_prime)]


def oracle_labels(paper: Paper, cap: int | None = None) -> GoldLabels:
    """Greedy oracle: repeatedly add the body sentence that most improves the
    mean of ROUGE-1 and ROUGE-2 F1 against the abstract.

    Stops when no sentence improves the score or when ``cap`` sentences
    (default: abstract length + 2) are selected.  Ties prefer the earlier
    sentence.
    """
    if not paper.abstract:
        raise ValidationError(f"paper {paper.id!r} has no abstract to build oracle labels from")
    reference = [t for s in paper.abstract for t in s.tokens]
    sentences = [list(s.tokens) for s in paper.body_sentences()]
    if cap is None:
        cap = len(paper.abstract) + 2

    selected: list[int] = []
    best_score = 0.0
    while len(selected) < cap:
        best_gain_idx = -1
        best_candidate_score = best_score
        for i in range(len(sentences)):
            if i in selected:
                continue
            trial = sorted(selected + [i])
            tokens = [t for j in trial for t in sentences[j]]
            score = (rouge_n(tokens, reference, 1).f1 + rouge_n(tokens, reference, 2).f1) / 2.0
            if score > best_candidate_score:
                best_candidate_score = score
                best_gain_idx = i
        if best_gain_idx < 0:
            break
        selected.append(best_gain_idx)
        best_score = best_candidate_score

    labels = np.zeros(len(sentences), dtype=np.int64)
    labels[selected] = 1
    return GoldLabels(y_prime=labels)


def lead_baseline(paper: Paper, policy: SelectionPolicy) -> list[int]:
    """First L sentences, L given by the selection policy."""
    n = paper.n_body_sentences
    if policy.mode == "match_reference":
        if not paper.abstract:
            raise ValidationError(
                "match_reference selection needs a non-empty reference abstract; use fixed_k")
        k = len(paper.abstract)
    else:
        k = policy.k
    return list(range(min(k, n)))


def link_prediction_accuracy(reps: Mapping[str, np.ndarray],
                             edges: Sequence[tuple[str, str]],
                             rng_seed: int,
                             negatives_per_positive: int = 1,
                             nodes: Sequence[str] | None = None,
                             forbidden_edges: set[tuple[str, str]] | None = None,
                             target_reps: Mapping[str, np.ndarray] | None = None) -> float:
    """Accuracy of the threshold rule "edge iff sim01 > 0.5" over the given
    true edges plus sampled non-edges (same count per positive).

    Negatives (u, n) are drawn per true edge with n != u and (u, n) not in
    ``forbidden_edges`` (defaulting to the evaluated edge set).  ``reps``
    scores both sides of a pair; pass ``target_reps`` to score the cited
    side with different representations (the contrastive objective compares
    a citing document against reference-paper abstracts).
    """
    if not edges:
        raise ValidationError("link prediction needs at least one edge")
    trg = target_reps if target_reps is not None else reps
    node_list = list(nodes) if nodes is not None else sorted(trg)
    for u, v in edges:
        if u not in reps or v not in trg:
            raise ValidationError(f"missing representation for edge endpoint ({u!r}, {v!r})")
    forbidden = forbidden_edges if forbidden_edges is not None else set(edges)
    rng = np.random.default_rng(rng_seed)
    correct = 0
    total = 0
    for u, v in edges:
        if sim01(reps[u], trg[v]) > 0.5:
            correct += 1
        total += 1
        drawn = 0
        guard = 0
        while drawn < negatives_per_positive and guard < 1000:
            n = node_list[int(rng.integers(0, len(node_list)))]
            guard += 1
            if n == u or (u, n) in forbidden:
                continue
            if n not in trg:
                continue
            drawn += 1
            total += 1
            if sim01(reps[u], trg[n]) <= 0.5:
                correct += 1
    return correct / total


def link_prediction_report(reps: Mapping[str, np.ndarray],
                           edges: Sequence[tuple[str, str]],
                           rng_seed: int, runs: int = 10,
                           negatives_per_positive: int = 1,
                           nodes: Sequence[str] | None = None,
                           forbidden_edges: set[tuple[str, str]] | None = None,
                           target_reps: Mapping[str, np.ndarray] | None = None) -> dict:
    """Mean and standard deviation of the accuracy over repeated samplings."""
    accs = [link_prediction_accuracy(reps, edges, rng_seed + i, negatives_per_positive,
                                     nodes=nodes, forbidden_edges=forbidden_edges,
                                     target_reps=target_reps)
            for i in range(runs)]
    return {
        "accuracy_mean": float(np.mean(accs)),
        "accuracy_std": float(np.std(accs)),
        "runs": runs,
    }


def _bucket_label(count: int) -> str:
    for lo, hi in CITATION_BUCKETS:
        if hi is None:
            if count >= lo:
                return f"{lo}+"
        elif lo <= count <= hi:
            return f"{lo}-{hi}" if lo != hi else f"{lo}"
    return "?"


def corpus_report(summaries: Mapping[str, Sequence[str]],
                  papers: Mapping[str, Paper]) -> dict:
    """Macro-averaged ROUGE over papers plus per-paper and per-citation-bucket
    breakdowns.

    ``summaries`` maps paper id to candidate summary tokens; references are
    the papers' abstract tokens.
    """
    if not summaries:
        raise ValidationError("corpus_report: no summaries")
    per_paper = []
    for pid in summaries:
        if pid not in papers:
            raise ValidationError(f"summary for unknown paper {pid!r}")
        paper = papers[pid]
        if not paper.abstract:
            raise ValidationError(f"paper {pid!r} has no reference abstract")
        reference = [t for s in paper.abstract for t in s.tokens]
        candidate = list(summaries[pid])
        r1 = rouge_n(candidate, reference, 1)
        r2 = rouge_n(candidate, reference, 2)
        rl = rouge_l(candidate, reference)
        per_paper.append({
            "paper_id": pid,
            "n_cited": len(paper.references),
            "rg1": r1.f1,
            "rg2": r2.f1,
            "rgl": rl.f1,
            "rg1_pr": (r1.precision, r1.recall),
            "rg2_pr": (r2.precision, r2.recall),
            "rgl_pr": (rl.precision, rl.recall),
        })

    def aggregate(rows: list[dict]) -> dict:
        return {
            "rg1": {"p": float(np.mean([r["rg1_pr"][0] for r in rows])),
                    "r": float(np.mean([r["rg1_pr"][1] for r in rows])),
                    "f1": float(np.mean([r["rg1"] for r in rows]))},
            "rg2": {"p": float(np.mean([r["rg2_pr"][0] for r in rows])),
                    "r": float(np.mean([r["rg2_pr"][1] for r in rows])),
                    "f1": float(np.mean([r["rg2"] for r in rows]))},
            "rgl": {"p": float(np.mean([r["rgl_pr"][0] for r in rows])),
                    "r": float(np.mean([r["rgl_pr"][1] for r in rows])),
                    "f1": float(np.mean([r["rgl"] for r in rows]))},
            "n_papers": len(rows),
        }

    buckets: dict[str, list[dict]] = {}
    for row in per_paper:
        buckets.setdefault(_bucket_label(row["n_cited"]), []).append(row)
    report = aggregate(per_paper)
    report["by_citation_bucket"] = [
        {"bucket": label, **aggregate(rows)}
        for label, rows in sorted(buckets.items(), key=lambda kv: min(r["n_cited"] for r in kv[1]))
    ]
    report["per_paper"] = [
        {"paper_id": r["paper_id"], "rg1": r["rg1"], "rg2": r["rg2"], "rgl": r["rgl"]}
        for r in per_paper
    ]
    return report
