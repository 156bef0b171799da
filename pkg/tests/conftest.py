import json

import pytest

from citesumm.corpus import Corpus, parse_corpus


def record(pid, sections, abstract=(), references=(), split="train"):
    return {
        "paper_id": pid,
        "abstract": list(abstract),
        "sections": [list(sec) for sec in sections],
        "references": list(references),
        "split": split,
    }


def corpus_from_records(records, mode="transductive") -> Corpus:
    lines = [json.dumps(r) for r in records]
    return parse_corpus(lines, mode=mode)


@pytest.fixture
def demo_corpus() -> Corpus:
    """Three papers with one citation chain, all with abstracts."""
    return corpus_from_records([
        record("p1",
               sections=[["graphs model citation networks.",
                          "we rank sentences by centrality."],
                         ["experiments show gains on benchmarks."]],
               abstract=["centrality ranking improves summaries."],
               references=["p2"]),
        record("p2",
               sections=[["sentence embeddings capture meaning.",
                          "cosine similarity compares sentences."]],
               abstract=["embeddings enable similarity search."],
               references=["p3"],
               split="validation"),
        record("p3",
               sections=[["summaries compress documents.",
                          "extraction selects salient sentences."]],
               abstract=["extractive methods pick sentences verbatim."],
               split="test"),
    ])
