import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from citesumm.corpus import (
    build_citation_graph,
    corpus_manifest,
    parse_corpus,
    tokenize,
    truncate_document,
    write_corpus,
)
from citesumm.errors import ParseError, ValidationError

from conftest import corpus_from_records, record


class TestTokenize:
    def test_lowercase_and_punctuation(self):
        assert tokenize("The Cat sat.") == ["the", "cat", "sat"]

    def test_empty(self):
        assert tokenize("") == []

    def test_hyphenated(self):
        assert tokenize("state-of-the-art!") == ["state", "of", "the", "art"]

    def test_underscore_is_punctuation(self):
        assert tokenize("foo_bar") == ["foo", "bar"]

    @given(st.text(max_size=80))
    def test_tokens_are_lowercase_words(self, text):
        for token in tokenize(text):
            assert token == token.lower()
            assert token
            assert not any(c.isspace() for c in token)


class TestParseCorpus:
    def test_minimal_line(self):
        corpus = parse_corpus(['{"paper_id":"p1","abstract":["a."],"sections":[["b."]],"references":[]}'])
        assert len(corpus) == 1
        assert build_citation_graph(corpus).n_edges == 0
        assert corpus["p1"].split == "train"

    def test_dangling_reference_dropped_and_counted(self):
        corpus = corpus_from_records([record("p1", [["body."]], references=["pX"])])
        assert corpus.dangling_references == 1
        assert corpus["p1"].references == ()

    def test_inductive_drops_cross_split_edges(self):
        corpus = corpus_from_records(
            [record("p1", [["a."]], references=["p2"], split="train"),
             record("p2", [["b."]], split="test")],
            mode="inductive")
        graph = build_citation_graph(corpus)
        assert graph.n_edges == 0
        assert graph.cross_split_dropped == 1
        # the reference list itself is untouched
        assert corpus["p1"].references == ("p2",)

    def test_transductive_keeps_cross_split_edges(self):
        corpus = corpus_from_records(
            [record("p1", [["a."]], references=["p2"], split="train"),
             record("p2", [["b."]], split="test")])
        assert build_citation_graph(corpus).n_edges == 1

    def test_self_reference_and_duplicates_cleaned(self):
        corpus = corpus_from_records(
            [record("p1", [["a."]], references=["p1", "p2", "p2"]),
             record("p2", [["b."]])])
        assert corpus["p1"].references == ("p2",)
        assert corpus.dangling_references == 0

    def test_duplicate_id_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            corpus_from_records([record("p1", [["a."]]), record("p1", [["b."]])])

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_corpus(['{"paper_id":"p1","sections":[["a."]]}', "{not json"])

    def test_whitespace_in_id_rejected(self):
        with pytest.raises(ParseError, match="whitespace"):
            parse_corpus(['{"paper_id":"p 1","sections":[["a."]]}'])

    def test_paper_without_body_rejected(self):
        with pytest.raises(ParseError, match="no body"):
            parse_corpus(['{"paper_id":"p1","sections":[]}'])

    def test_flat_sections_become_one_section(self):
        corpus = parse_corpus(['{"paper_id":"p1","sections":["a.","b."]}'])
        assert len(corpus["p1"].sections) == 1
        assert corpus["p1"].n_body_sentences == 2

    def test_unknown_keys_ignored(self):
        corpus = parse_corpus(['{"paper_id":"p1","sections":[["a."]],"venue":"x"}'])
        assert len(corpus) == 1

    def test_empty_token_sentences_dropped(self):
        corpus = parse_corpus(['{"paper_id":"p1","sections":[["...","real words."]]}'])
        assert corpus["p1"].n_body_sentences == 1


class TestCitationGraph:
    def test_single_edge(self):
        corpus = corpus_from_records([record("p1", [["a."]], references=["p2"]),
                                      record("p2", [["b."]])])
        graph = build_citation_graph(corpus)
        assert graph.out_edges["p1"] == ("p2",)
        assert graph.in_edges["p2"] == ("p1",)

    def test_empty_references(self):
        corpus = corpus_from_records([record("p1", [["a."]]), record("p2", [["b."]])])
        graph = build_citation_graph(corpus)
        assert graph.n_edges == 0

    def test_chain(self):
        corpus = corpus_from_records([record("p1", [["a."]], references=["p2"]),
                                      record("p2", [["b."]], references=["p3"]),
                                      record("p3", [["c."]])])
        graph = build_citation_graph(corpus)
        assert graph.in_edges["p3"] == ("p2",)
        assert graph.out_edges["p1"] == ("p2",)

    def test_transpose_property(self):
        import numpy as np
        rng = np.random.default_rng(7)
        records = []
        ids = [f"p{i}" for i in range(12)]
        for i, pid in enumerate(ids):
            refs = [ids[int(j)] for j in rng.choice(12, size=3, replace=False) if int(j) != i]
            records.append(record(pid, [["some body text."]], references=refs))
        graph = build_citation_graph(corpus_from_records(records))
        for u in graph.nodes:
            for v in graph.out_edges[u]:
                assert u in graph.in_edges[v]
        for v in graph.nodes:
            for u in graph.in_edges[v]:
                assert v in graph.out_edges[u]


def _paper_with_token_counts(counts, per_section=None):
    """Build a paper whose body sentences have exactly the given token counts."""
    sentences = [" ".join(f"w{i}t{j}" for j in range(c)) for i, c in enumerate(counts)]
    if per_section is None:
        sections = [sentences]
    else:
        sections, start = [], 0
        for size in per_section:
            sections.append(sentences[start : start + size])
            start += size
    return corpus_from_records([record("p", sections)])["p"]


class TestTruncate:
    def test_cumulative_rule(self):
        paper = _paper_with_token_counts([200, 200, 200])
        kept = truncate_document(paper, 500)
        assert kept.n_body_sentences == 2

    def test_keeps_at_least_first_sentence(self):
        paper = _paper_with_token_counts([600])
        kept = truncate_document(paper, 500)
        assert kept.n_body_sentences == 1

    def test_under_limit_unchanged(self):
        paper = _paper_with_token_counts([100, 100, 100, 100])
        assert truncate_document(paper, 500) == paper

    def test_trailing_sections_removed_and_reindexed(self):
        paper = _paper_with_token_counts([300, 300, 300], per_section=[1, 1, 1])
        kept = truncate_document(paper, 500)
        assert len(kept.sections) == 1
        assert [sec.index for sec in kept.sections] == [0]

    def test_abstract_untouched(self):
        corpus = corpus_from_records([record("p", [["one two three four five six"]],
                                             abstract=["kept abstract."])])
        kept = truncate_document(corpus["p"], 2)
        assert kept.abstract == corpus["p"].abstract

    def test_idempotent(self):
        paper = _paper_with_token_counts([120, 340, 77, 91], per_section=[2, 2])
        once = truncate_document(paper, 450)
        assert truncate_document(once, 450) == once

    def test_stops_at_first_overflow(self):
        # prefix semantics: a later small sentence does not sneak back in
        paper = _paper_with_token_counts([400, 200, 10])
        kept = truncate_document(paper, 500)
        assert kept.n_body_sentences == 1


class TestRoundTrip:
    def test_serialization_is_stable(self, demo_corpus):
        buf = io.StringIO()
        write_corpus(demo_corpus, buf)
        first = buf.getvalue()
        reparsed = parse_corpus(first.splitlines())
        buf2 = io.StringIO()
        write_corpus(reparsed, buf2)
        assert buf2.getvalue() == first

    def test_manifest_counts(self, demo_corpus):
        manifest = corpus_manifest(demo_corpus)
        assert manifest["papers"] == 3
        assert manifest["edges"] == 2
        assert manifest["splits"] == {"train": 1, "validation": 1, "test": 1}
        assert manifest["dangling_references"] == 0


class TestInductiveInvariant:
    def test_no_cross_split_edges_survive(self):
        import numpy as np
        rng = np.random.default_rng(3)
        ids = [f"p{i}" for i in range(30)]
        splits = ["train", "validation", "test"]
        records = []
        for i, pid in enumerate(ids):
            refs = [ids[int(j)] for j in rng.choice(30, size=4, replace=False) if int(j) != i]
            records.append(record(pid, [["body words here."]], references=refs,
                                  split=splits[int(rng.integers(0, 3))]))
        corpus = corpus_from_records(records, mode="inductive")
        graph = build_citation_graph(corpus)
        for u, v in graph.edges():
            assert corpus[u].split == corpus[v].split
