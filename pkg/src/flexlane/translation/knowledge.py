"""Knowledge base loading, indexing, and retrieval.

Curated entries live one per file: a `scenario:` text block describing a
class of instructions, then an `autoir:` block holding the program that
class should produce. A monolithic manual can be ingested instead, in which
case entries are plain text chunks with no paired program (degraded mode,
retained as an evaluation baseline).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..autoir import AutoIRProgram, parse_autoir
from .text import DEFAULT_CHUNK_TOKENS, chunk_document, cosine, embed_text


class KnowledgeBaseError(Exception):
    pass


class DuplicateIdError(KnowledgeBaseError):
    pass


@dataclass(frozen=True)
class KnowledgeEntry:
    entry_id: str
    scenario_text: str
    program: AutoIRProgram | None = None


@dataclass(frozen=True)
class _IndexedEntry:
    entry: KnowledgeEntry
    vector: tuple[float, ...]


class KBIndex:
    """Exact (non-approximate) cosine index over entry scenario texts."""

    def __init__(self, indexed: list[_IndexedEntry]):
        self._indexed = indexed

    def __len__(self) -> int:
        return len(self._indexed)

    @property
    def entries(self) -> list[KnowledgeEntry]:
        return [item.entry for item in self._indexed]

    def retrieve(self, query_text: str, k: int) -> list[tuple[KnowledgeEntry, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        query = embed_text(query_text)
        scored = [
            (item.entry, cosine(query, item.vector))
            for item in self._indexed
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0].entry_id))
        return scored[:k]


def build_index(entries: list[KnowledgeEntry]) -> KBIndex:
    seen: set[str] = set()
    indexed: list[_IndexedEntry] = []
    for entry in entries:
        if entry.entry_id in seen:
            raise DuplicateIdError(f"duplicate entry id {entry.entry_id!r}")
        seen.add(entry.entry_id)
        indexed.append(_IndexedEntry(entry=entry, vector=embed_text(entry.scenario_text)))
    return KBIndex(indexed)


def retrieve(index: KBIndex, query_text: str, k: int) -> list[tuple[KnowledgeEntry, float]]:
    return index.retrieve(query_text, k)


def parse_entry_file(text: str, entry_id: str) -> KnowledgeEntry:
    """Parse one `.kb` document: `scenario:` block then `autoir:` block."""
    lines = text.splitlines()
    scenario_lines: list[str] = []
    autoir_lines: list[str] = []
    section = None
    for line in lines:
        lowered = line.strip().lower()
        if lowered == "scenario:":
            section = "scenario"
            continue
        if lowered == "autoir:":
            section = "autoir"
            continue
        if section == "scenario":
            scenario_lines.append(line.rstrip())
        elif section == "autoir":
            if line.strip():
                autoir_lines.append(line.strip())
    scenario = " ".join(part for part in (s.strip() for s in scenario_lines) if part)
    if not scenario:
        raise KnowledgeBaseError(f"entry {entry_id!r} has no scenario text")
    if not autoir_lines:
        raise KnowledgeBaseError(f"entry {entry_id!r} has no autoir block")
    program = parse_autoir("\n".join(autoir_lines))
    return KnowledgeEntry(entry_id=entry_id, scenario_text=scenario, program=program)


def load_knowledge_dir(directory: str | Path) -> list[KnowledgeEntry]:
    """Ingest every `.kb` file in a directory (sorted by name for stable ids)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise KnowledgeBaseError(f"{directory} is not a directory")
    entries = []
    for path in sorted(directory.glob("*.kb")):
        entries.append(parse_entry_file(path.read_text(encoding="utf-8"), path.stem))
    if not entries:
        raise KnowledgeBaseError(f"no .kb entries found under {directory}")
    return entries


def load_manual_chunks(path: str | Path,
                       max_tokens: int = DEFAULT_CHUNK_TOKENS) -> list[KnowledgeEntry]:
    """Degraded-mode ingestion: one unstructured document, chunked; entries
    carry no paired program."""
    text = Path(path).read_text(encoding="utf-8")
    chunks = chunk_document(text, max_tokens=max_tokens, source_id=Path(path).stem)
    return [
        KnowledgeEntry(entry_id=f"{chunk.source_id}_{chunk.ordinal:04d}",
                       scenario_text=chunk.text)
        for chunk in chunks
    ]
