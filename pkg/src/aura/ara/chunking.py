"""Semantic-aware document chunking.

Sections that fit within ``s_target + o`` tokens are emitted whole. Longer
sections are split at sentence boundaries; when a chunk fills up, the last
``o`` tokens carry forward as overlap into the next chunk.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from aura.ara.tokenizer import tokenize

DEFAULT_TARGET = 512
DEFAULT_OVERLAP = 64

_SECTION_SPLIT = re.compile(r"\n\s*\n|\n(?=#)")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    token_count: int
    metadata: dict = field(default_factory=dict)


def extract_sections(text: str) -> list[str]:
    """Sections are blank-line separated blocks or header-led blocks."""
    return [s.strip() for s in _SECTION_SPLIT.split(text) if s.strip()]


def sentence_tokenize(section: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(section) if s.strip()]


def chunk_document(
    doc: Document,
    s_target: int = DEFAULT_TARGET,
    o: int = DEFAULT_OVERLAP,
) -> list[Chunk]:
    chunks: list[list[str]] = []
    for section in extract_sections(doc.text):
        section_tokens = tokenize(section)
        if len(section_tokens) <= s_target + o:
            chunks.append(section_tokens)
            continue
        current: list[str] = []
        for sent in sentence_tokenize(section):
            sent_tokens = tokenize(sent)
            if len(current) + len(sent_tokens) > s_target:
                if current:
                    chunks.append(current)
                overlap = current[-o:] if o > 0 else []
                current = overlap + sent_tokens if current else sent_tokens
            else:
                current = current + sent_tokens
        if current:
            chunks.append(current)
    return [
        Chunk(
            chunk_id=f"{doc.doc_id}#{i}",
            doc_id=doc.doc_id,
            text=" ".join(tokens),
            token_count=len(tokens),
            metadata=dict(doc.metadata),
        )
        for i, tokens in enumerate(chunks)
    ]
