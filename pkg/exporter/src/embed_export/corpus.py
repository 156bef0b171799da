"""Reader for the citesumm corpus JSONL schema.

Mirrors the schema contract exactly: sentences that tokenize to nothing are
not part of the sentence census, a flat list of strings in "sections" is one
section, "split" defaults to train, and reference lists are cleaned of
self-references, duplicates and unknown targets.  Sentence keys follow
``<paper_id>:s:<section>:<sentence>`` / ``<paper_id>:a:<sentence>``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
SPLITS = ("train", "validation", "test")


class CorpusError(ValueError):
    """Schema violation in the input corpus."""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Paper:
    id: str
    abstract: list[str]
    sections: list[list[str]]
    references: list[str]
    split: str

    def sentence_items(self) -> list[tuple[str, str]]:
        """(key, text) pairs: body sentences first, then abstract."""
        items = [(f"{self.id}:s:{si}:{i}", text)
                 for si, section in enumerate(self.sections)
                 for i, text in enumerate(section)]
        items.extend((f"{self.id}:a:{i}", text) for i, text in enumerate(self.abstract))
        return items


def _clean_sentences(texts, what: str, line: int) -> list[str]:
    if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
        raise CorpusError(f"line {line}: {what} must be a list of strings")
    return [t for t in texts if tokenize(t)]


def read_corpus(path: str) -> dict[str, Paper]:
    papers: dict[str, Paper] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            pid = record.get("paper_id")
            if not isinstance(pid, str) or not pid or any(c.isspace() for c in pid):
                raise CorpusError(f"line {line_no}: bad paper_id {pid!r}")
            if pid in papers:
                raise CorpusError(f"line {line_no}: duplicate paper_id {pid!r}")
            raw_sections = record.get("sections")
            if isinstance(raw_sections, list) and raw_sections and all(
                    isinstance(s, str) for s in raw_sections):
                raw_sections = [raw_sections]
            if not isinstance(raw_sections, list):
                raise CorpusError(f"line {line_no}: sections must be a list of sentence lists")
            sections = [s for s in
                        (_clean_sentences(sec, "section", line_no) for sec in raw_sections)
                        if s]
            if not sections:
                raise CorpusError(f"line {line_no}: paper {pid!r} has no body sentences")
            split = record.get("split", "train")
            if split not in SPLITS:
                raise CorpusError(f"line {line_no}: bad split {split!r}")
            references = record.get("references", [])
            if not isinstance(references, list) or not all(isinstance(r, str) for r in references):
                raise CorpusError(f"line {line_no}: references must be a list of strings")
            papers[pid] = Paper(
                id=pid,
                abstract=_clean_sentences(record.get("abstract", []), "abstract", line_no),
                sections=sections,
                references=list(references),
                split=split,
            )
    if not papers:
        raise CorpusError(f"{path}: empty corpus")
    for paper in papers.values():
        seen: set[str] = set()
        cleaned = []
        for ref in paper.references:
            if ref == paper.id or ref in seen or ref not in papers:
                continue
            seen.add(ref)
            cleaned.append(ref)
        paper.references = cleaned
    return papers


def sentence_census(papers: dict[str, Paper]) -> list[tuple[str, str]]:
    """All (key, text) pairs of the corpus in corpus order."""
    return [item for paper in papers.values() for item in paper.sentence_items()]
