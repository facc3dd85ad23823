"""Ranked lists and the TREC run format ``qid Q0 docid rank score tag``."""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass
from typing import Iterable, TextIO

log = logging.getLogger(__name__)


class RunFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RankedList:
    """Entries (doc_id, score) in rank order: scores non-increasing, ids unique."""

    query_id: str
    entries: tuple[tuple[str, float], ...]

    def __init__(self, query_id: str, entries: Iterable[tuple[str, float]]):
        entries = tuple((str(d), float(s)) for d, s in entries)
        ids = [d for d, _ in entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate doc ids in ranking for query {query_id!r}")
        if any(entries[i][1] < entries[i + 1][1] for i in range(len(entries) - 1)):
            raise ValueError(f"scores are not non-increasing for query {query_id!r}")
        object.__setattr__(self, "query_id", str(query_id))
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_scores(cls, query_id: str, scores: Iterable[tuple[str, float]],
                    k: int | None = None) -> "RankedList":
        """Sort by score descending, ties by ascending doc id, then truncate."""
        ordered = sorted(scores, key=lambda e: (-e[1], e[0]))
        if k is not None:
            ordered = ordered[:k]
        return cls(query_id, ordered)

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def format_run(rankings: Iterable[RankedList], tag: str = "tim") -> str:
    buf = io.StringIO()
    write_run(buf, rankings, tag)
    return buf.getvalue()


def write_run(out: TextIO | str | os.PathLike, rankings: Iterable[RankedList],
              tag: str = "tim") -> None:
    """Scores are written with ``repr`` so a reread reproduces them exactly."""
    if not isinstance(out, io.TextIOBase) and not hasattr(out, "write"):
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            write_run(fh, rankings, tag)
        return
    if not tag or any(c.isspace() for c in tag):
        raise ValueError("run tag must be a non-empty token")
    for rl in rankings:
        for rank, (doc_id, score) in enumerate(rl.entries, start=1):
            out.write(f"{rl.query_id} Q0 {doc_id} {rank} {score!r} {tag}\n")


def read_run(path: str | os.PathLike) -> dict[str, RankedList]:
    """Parse a run file; entries are re-sorted by (score desc, doc id asc)."""
    per_query: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise RunFormatError(f"{path}:{lineno}: expected 'qid Q0 docid rank score tag'")
            qid, _, doc_id, _, score, _ = parts
            try:
                value = float(score)
            except ValueError:
                raise RunFormatError(f"{path}:{lineno}: bad score {score!r}") from None
            docs = per_query.setdefault(qid, {})
            if doc_id in docs:
                log.warning("%s:%d: duplicate doc %s for query %s ignored", path, lineno, doc_id, qid)
                continue
            docs[doc_id] = value
    return {q: RankedList.from_scores(q, d.items()) for q, d in per_query.items()}
