import json

import numpy as np
import pytest


def make_fixture_corpus(path, n_papers=20, n_clusters=2, seed=0):
    """Small clustered corpus with signature words planted along citation
    edges; later papers in each cluster form the test split."""
    rng = np.random.default_rng(seed)
    ids = [f"p{i:02d}" for i in range(n_papers)]
    clusters = {pid: i % n_clusters for i, pid in enumerate(ids)}
    sigs = {pid: [f"sig{pid}x{j}" for j in range(4)] for pid in ids}
    filler = [f"filler{i:02d}" for i in range(20)]
    by_cluster = {c: [pid for pid in ids if clusters[pid] == c] for c in range(n_clusters)}

    def sample(pool, k):
        k = min(k, len(pool))
        return [pool[int(i)] for i in rng.choice(len(pool), size=k, replace=False)]

    records = []
    for pid in ids:
        members = by_cluster[clusters[pid]]
        rank = members.index(pid)
        cited = sample(members[:rank], min(rank, int(rng.integers(1, 4)))) if rank else []
        cited_sigs = [t for c in cited for t in sigs[c]]
        abstract = [" ".join(sample(sigs[pid], 3)) + "." for _ in range(2)]
        sections = []
        for k in range(2):
            sentences = [" ".join(sample(filler, 5)) + "."]
            citation_words = sample(cited_sigs, 4) if cited_sigs else sample(sigs[pid], 2)
            sentences.append(abstract[k].rstrip(".") + " " + " ".join(citation_words) + ".")
            sections.append(sentences)
        split = "test" if rank >= len(members) - 3 else "train"
        records.append({"paper_id": pid, "abstract": abstract, "sections": sections,
                        "references": cited, "split": split})
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("fixture")
    return str(make_fixture_corpus(tmp / "corpus.jsonl"))
