"""Corpus ingestion: papers, sections, sentences and the citation graph.

Input is line-delimited JSON, one paper per line:

    {"paper_id": str, "abstract": [str, ...], "sections": [[str, ...], ...],
     "references": [str, ...], "split": "train"|"validation"|"test"}

Unknown keys are ignored.  ``abstract``, ``references`` and ``split`` are
optional (defaulting to empty / empty / "train").  A flat list of strings in
``sections`` is tolerated and treated as a single section.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

from .errors import ParseError, ValidationError

logger = logging.getLogger("citesumm.corpus")

SPLITS = ("train", "validation", "test")
DEFAULT_MAX_TOKENS = 500

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation, dropping punctuation-only tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Sentence:
    """A sentence with its deterministically derived token sequence."""

    text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> "Sentence":
        return cls(text=text, tokens=tuple(tokenize(text)))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Section:
    index: int
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Paper:
    id: str
    abstract: tuple[Sentence, ...]
    sections: tuple[Section, ...]
    references: tuple[str, ...]
    split: str = "train"

    def body_sentences(self) -> list[Sentence]:
        return [s for sec in self.sections for s in sec.sentences]

    @property
    def n_body_sentences(self) -> int:
        return sum(len(sec.sentences) for sec in self.sections)

    def body_token_count(self) -> int:
        return sum(len(s) for s in self.body_sentences())


@dataclass
class CitationGraph:
    """Directed citation adjacency; ``in_edges`` is the exact transpose of ``out_edges``."""

    out_edges: dict[str, tuple[str, ...]]
    in_edges: dict[str, tuple[str, ...]]
    cross_split_dropped: int = 0

    @property
    def nodes(self) -> list[str]:
        return list(self.out_edges)

    @property
    def n_edges(self) -> int:
        return sum(len(v) for v in self.out_edges.values())

    def edges(self) -> Iterator[tuple[str, str]]:
        for u, targets in self.out_edges.items():
            for v in targets:
                yield (u, v)


@dataclass
class Corpus:
    """Immutable-after-construction collection of papers plus ingest tallies."""

    papers: dict[str, Paper]
    mode: str = "transductive"
    dangling_references: int = 0

    def __len__(self) -> int:
        return len(self.papers)

    def __iter__(self) -> Iterator[Paper]:
        return iter(self.papers.values())

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.papers

    def __getitem__(self, paper_id: str) -> Paper:
        return self.papers[paper_id]

    def ids(self) -> list[str]:
        return list(self.papers)

    def split_ids(self, split: str) -> list[str]:
        return [p.id for p in self if p.split == split]

    def truncated(self, max_tokens: int = DEFAULT_MAX_TOKENS) -> "Corpus":
        """Corpus with every paper body truncated to ``max_tokens`` tokens."""
        papers = {pid: truncate_document(p, max_tokens) for pid, p in self.papers.items()}
        return Corpus(papers=papers, mode=self.mode, dangling_references=self.dangling_references)


def _check_paper_id(value: object, line: int) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError("paper_id must be a non-empty string", line)
    if any(c.isspace() for c in value):
        raise ParseError(f"paper_id {value!r} contains whitespace", line)
    return value


def _sentences_from(texts: object, what: str, line: int) -> tuple[Sentence, ...]:
    if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
        raise ParseError(f"{what} must be a list of strings", line)
    # Sentences that tokenize to nothing carry no signal; drop them here.
    return tuple(s for s in map(Sentence.from_text, texts) if s.tokens)


def _parse_line(raw: str, line: int) -> Paper:
    try:
        record = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line) from exc
    if not isinstance(record, dict):
        raise ParseError("record must be a JSON object", line)

    pid = _check_paper_id(record.get("paper_id"), line)
    abstract = _sentences_from(record.get("abstract", []), "abstract", line)

    raw_sections = record.get("sections")
    if raw_sections is None:
        raise ParseError("missing sections", line)
    if isinstance(raw_sections, list) and all(isinstance(s, str) for s in raw_sections) and raw_sections:
        raw_sections = [raw_sections]  # flat body -> one section
    if not isinstance(raw_sections, list):
        raise ParseError("sections must be a list of sentence lists", line)
    sections = []
    for texts in raw_sections:
        sentences = _sentences_from(texts, "section", line)
        if sentences:
            sections.append(sentences)
    if not sections:
        raise ParseError(f"paper {pid!r} has no body sentences", line)
    section_objs = tuple(Section(index=i, sentences=s) for i, s in enumerate(sections))

    references = record.get("references", [])
    if not isinstance(references, list) or not all(isinstance(r, str) for r in references):
        raise ParseError("references must be a list of strings", line)

    split = record.get("split", "train")
    if split not in SPLITS:
        raise ParseError(f"split must be one of {SPLITS}, got {split!r}", line)

    return Paper(
        id=pid,
        abstract=abstract,
        sections=section_objs,
        references=tuple(references),
        split=split,
    )


def parse_corpus(stream: Iterable[str] | TextIO, mode: str = "transductive") -> Corpus:
    """Parse a JSONL corpus, validate ids, and clean reference lists.

    Self-references and duplicate references are removed; references to
    unknown papers are dropped and tallied (SSN-style corpora contain
    dangling citations).  ``mode`` is recorded on the corpus and controls
    whether :func:`build_citation_graph` keeps split-crossing edges.
    """
    if mode not in ("inductive", "transductive"):
        raise ValidationError(f"mode must be inductive or transductive, got {mode!r}")

    papers: dict[str, Paper] = {}
    for line_no, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        paper = _parse_line(raw, line_no)
        if paper.id in papers:
            raise ValidationError(f"duplicate paper_id {paper.id!r} (line {line_no})")
        papers[paper.id] = paper

    dangling = 0
    for pid, paper in papers.items():
        cleaned: list[str] = []
        seen: set[str] = set()
        for ref in paper.references:
            if ref == pid or ref in seen:
                continue
            if ref not in papers:
                dangling += 1
                continue
            seen.add(ref)
            cleaned.append(ref)
        if len(cleaned) != len(paper.references):
            papers[pid] = Paper(
                id=paper.id,
                abstract=paper.abstract,
                sections=paper.sections,
                references=tuple(cleaned),
                split=paper.split,
            )
    if dangling:
        logger.info("dropped %d dangling references", dangling)

    return Corpus(papers=papers, mode=mode, dangling_references=dangling)


def build_citation_graph(corpus: Corpus) -> CitationGraph:
    """Adjacency maps over the cleaned references.

    In inductive mode, edges whose endpoints live in different splits are
    excluded from both maps and tallied (the reference lists on the papers
    are left untouched).
    """
    out_edges: dict[str, list[str]] = {pid: [] for pid in corpus.ids()}
    in_edges: dict[str, list[str]] = {pid: [] for pid in corpus.ids()}
    cross_dropped = 0
    for paper in corpus:
        for ref in paper.references:
            if corpus.mode == "inductive" and corpus[ref].split != paper.split:
                cross_dropped += 1
                continue
            out_edges[paper.id].append(ref)
            in_edges[ref].append(paper.id)
    if cross_dropped:
        logger.info("inductive mode: excluded %d cross-split edges", cross_dropped)
    return CitationGraph(
        out_edges={k: tuple(v) for k, v in out_edges.items()},
        in_edges={k: tuple(v) for k, v in in_edges.items()},
        cross_split_dropped=cross_dropped,
    )


def truncate_document(paper: Paper, max_tokens: int = DEFAULT_MAX_TOKENS) -> Paper:
    """Keep body sentences in order while the cumulative token count fits.

    The first sentence is always kept, sections emptied by the cut are
    removed, and the abstract is untouched.
    """
    if max_tokens < 1:
        raise ValidationError(f"max_tokens must be >= 1, got {max_tokens}")
    kept_sections: list[Section] = []
    total = 0
    done = False
    for section in paper.sections:
        kept: list[Sentence] = []
        for sentence in section.sentences:
            first = total == 0
            if done or (total + len(sentence) > max_tokens and not first):
                done = True
                break
            kept.append(sentence)
            total += len(sentence)
        if kept:
            kept_sections.append(Section(index=len(kept_sections), sentences=tuple(kept)))
        if done:
            break
    return Paper(
        id=paper.id,
        abstract=paper.abstract,
        sections=tuple(kept_sections),
        references=paper.references,
        split=paper.split,
    )


def paper_to_record(paper: Paper) -> dict:
    return {
        "paper_id": paper.id,
        "abstract": [s.text for s in paper.abstract],
        "sections": [[s.text for s in sec.sentences] for sec in paper.sections],
        "references": list(paper.references),
        "split": paper.split,
    }


def write_corpus(corpus: Corpus, stream: TextIO) -> None:
    """Serialize back to JSONL with a canonical key order."""
    for paper in corpus:
        stream.write(json.dumps(paper_to_record(paper), ensure_ascii=False, separators=(",", ":")))
        stream.write("\n")


def corpus_manifest(corpus: Corpus, graph: CitationGraph | None = None) -> dict:
    """Summary counts reported by ``citesumm ingest``."""
    graph = graph if graph is not None else build_citation_graph(corpus)
    splits = {name: len(corpus.split_ids(name)) for name in SPLITS}
    return {
        "papers": len(corpus),
        "edges": graph.n_edges,
        "dangling_references": corpus.dangling_references,
        "cross_split_dropped": graph.cross_split_dropped,
        "splits": splits,
        "mode": corpus.mode,
    }
