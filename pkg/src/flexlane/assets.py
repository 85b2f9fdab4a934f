"""Loaders for the data files bundled with the package."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

from .rules import RuleBase, load_rule_base
from .translation.knowledge import (
    KBIndex,
    KnowledgeEntry,
    build_index,
    parse_entry_file,
)
from .translation.text import DEFAULT_CHUNK_TOKENS, chunk_document


def _data_root():
    return resources.files("flexlane.data")


def data_text(name: str) -> str:
    return _data_root().joinpath(name).read_text(encoding="utf-8")


def data_fs_path(name: str) -> Path:
    """Filesystem path of a bundled data file (source installs only)."""
    return Path(str(_data_root().joinpath(name)))


def shipped_rule_base() -> RuleBase:
    return load_rule_base(data_text("rules.json"))


def shipped_kb_entries() -> list[KnowledgeEntry]:
    kb_dir = _data_root().joinpath("kb")
    entries = []
    for item in sorted(kb_dir.iterdir(), key=lambda t: t.name):
        if item.name.endswith(".kb"):
            entries.append(parse_entry_file(item.read_text(encoding="utf-8"),
                                            item.name[: -len(".kb")]))
    return entries


@lru_cache(maxsize=1)
def shipped_kb_index() -> KBIndex:
    """Index over the curated knowledge base (cached; index is immutable)."""
    return build_index(shipped_kb_entries())


def shipped_manual_entries(max_tokens: int = DEFAULT_CHUNK_TOKENS) -> list[KnowledgeEntry]:
    """Degraded baseline: the monolithic manual as program-less chunks."""
    text = data_text("manual.txt")
    return [
        KnowledgeEntry(entry_id=f"manual_{chunk.ordinal:04d}", scenario_text=chunk.text)
        for chunk in chunk_document(text, max_tokens=max_tokens, source_id="manual")
    ]


def golden_dataset_path() -> Path:
    return data_fs_path("golden.jsonl")


def manual_path() -> Path:
    return data_fs_path("manual.txt")
