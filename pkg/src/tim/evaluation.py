"""TREC-style ranking metrics: AP, reciprocal rank, P@k and NDCG@k."""

from __future__ import annotations

import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from tim.runs import RankedList, read_run

log = logging.getLogger(__name__)

DEFAULT_DEPTH = 1000
DEFAULT_METRICS = ("map", "mrr")


class QrelsFormatError(ValueError):
    pass


@dataclass
class Qrels:
    """Graded judgments; a document is relevant when its grade is >= 1."""

    judgments: dict[str, dict[str, int]] = field(default_factory=dict)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, int]]) -> "Qrels":
        q = cls()
        for qid, doc_id, grade in triples:
            q.add(qid, doc_id, grade)
        return q

    def add(self, qid: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise QrelsFormatError(f"negative grade for ({qid}, {doc_id})")
        docs = self.judgments.setdefault(str(qid), {})
        if doc_id in docs:
            raise QrelsFormatError(f"duplicate judgment for ({qid}, {doc_id})")
        docs[str(doc_id)] = int(grade)

    def relevant(self, qid: str) -> set[str]:
        return {d for d, g in self.judgments.get(qid, {}).items() if g >= 1}

    def grades(self, qid: str) -> dict[str, int]:
        return self.judgments.get(qid, {})

    @property
    def query_ids(self) -> list[str]:
        return sorted(self.judgments)


def read_qrels(path: str | os.PathLike) -> Qrels:
    """Parse ``qid iter docid grade`` lines."""
    q = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise QrelsFormatError(f"{path}:{lineno}: expected 'qid 0 docid grade'")
            try:
                q.add(parts[0], parts[2], int(parts[3]))
            except ValueError as exc:
                raise QrelsFormatError(f"{path}:{lineno}: {exc}") from None
    return q


def write_qrels(path: str | os.PathLike, qrels: Qrels) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in qrels.query_ids:
            for doc_id, grade in sorted(qrels.grades(qid).items()):
                fh.write(f"{qid} 0 {doc_id} {grade}\n")


def average_precision(ranking: RankedList, qrels: Qrels, depth: int = DEFAULT_DEPTH) -> float:
    """Mean of precision at each relevant rank; NaN when the query has no relevant docs."""
    rel = qrels.relevant(ranking.query_id)
    if not rel:
        return math.nan
    hits = 0
    total = 0.0
    for rank, doc_id in enumerate(ranking.doc_ids[:depth], start=1):
        if doc_id in rel:
            hits += 1
            total += hits / rank
    return total / len(rel)


def reciprocal_rank(ranking: RankedList, qrels: Qrels, depth: int = DEFAULT_DEPTH) -> float:
    rel = qrels.relevant(ranking.query_id)
    for rank, doc_id in enumerate(ranking.doc_ids[:depth], start=1):
        if doc_id in rel:
            return 1.0 / rank
    return 0.0


def precision_at_k(ranking: RankedList, qrels: Qrels, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = qrels.relevant(ranking.query_id)
    return sum(1 for d in ranking.doc_ids[:k] if d in rel) / k


def ndcg_at_k(ranking: RankedList, qrels: Qrels, k: int) -> float:
    """Gains 2^grade - 1 with a log2(rank + 1) discount, normalised by the ideal list."""
    if k < 1:
        raise ValueError("k must be >= 1")
    grades = qrels.grades(ranking.query_id)
    dcg = sum((2 ** grades.get(d, 0) - 1) / math.log2(r + 1)
              for r, d in enumerate(ranking.doc_ids[:k], start=1))
    ideal = sorted((g for g in grades.values() if g > 0), reverse=True)[:k]
    idcg = sum((2 ** g - 1) / math.log2(r + 1) for r, g in enumerate(ideal, start=1))
    return dcg / idcg if idcg > 0 else math.nan


_METRIC_RE = re.compile(r"^(map|mrr|p|ndcg)(?:@(\d+))?$", re.I)


def _parse_metric(name: str) -> tuple[str, int | None]:
    m = _METRIC_RE.match(name.strip())
    if not m:
        raise ValueError(f"unknown metric {name!r}")
    kind, k = m.group(1).lower(), m.group(2)
    if kind in ("p", "ndcg") and k is None:
        raise ValueError(f"metric {name!r} needs a cutoff, e.g. {kind}@10")
    return kind, int(k) if k else None


def expand_metrics(metrics: Iterable[str], k_values: Iterable[int] = ()) -> list[str]:
    """Canonical metric names; bare 'p'/'ndcg' are expanded over ``k_values``."""
    out = []
    for name in metrics:
        base = name.strip().lower()
        if base in ("p", "ndcg"):
            out.extend(f"{'P' if base == 'p' else 'ndcg'}@{k}" for k in k_values)
            continue
        kind, k = _parse_metric(base)
        out.append({"map": "map", "mrr": "mrr"}.get(kind) or f"{'P' if kind == 'p' else 'ndcg'}@{k}")
    return list(dict.fromkeys(out))


def _metric_value(name: str, ranking: RankedList, qrels: Qrels, depth: int) -> float:
    kind, k = _parse_metric(name)
    if kind == "map":
        return average_precision(ranking, qrels, depth)
    if kind == "mrr":
        return reciprocal_rank(ranking, qrels, depth)
    if kind == "p":
        return precision_at_k(ranking, qrels, k)
    return ndcg_at_k(ranking, qrels, k)


@dataclass
class MetricReport:
    metrics: list[str]
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]
    undefined: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def format(self) -> str:
        """trec_eval-like ``metric<TAB>qid<TAB>value`` lines, means under 'all'."""
        lines = []
        for qid in sorted(self.per_query):
            for m in self.metrics:
                lines.append(f"{m}\t{qid}\t{self.per_query[qid][m]:.4f}")
        for qid in self.undefined:
            lines.append(f"undefined\t{qid}\tno relevant documents")
        for m in self.metrics:
            lines.append(f"{m}\tall\t{self.means[m]:.4f}")
        return "\n".join(lines) + "\n"


def evaluate_run(run: Mapping[str, RankedList] | str | os.PathLike,
                 qrels: Qrels | str | os.PathLike,
                 metrics: Sequence[str] = DEFAULT_METRICS, k_values: Sequence[int] = (10,),
                 depth: int = DEFAULT_DEPTH) -> MetricReport:
    """Per-query and mean metrics.

    Means run over judged queries with at least one relevant document; such a
    query missing from the run scores 0 on every metric.  Run queries absent
    from the qrels are skipped with a warning.
    """
    if not isinstance(run, Mapping):
        run = read_run(run)
    if not isinstance(qrels, Qrels):
        qrels = read_qrels(qrels)
    names = expand_metrics(metrics, k_values)
    notes: list[str] = []
    for qid in sorted(run):
        if qid not in qrels.judgments:
            notes.append(f"query {qid} is not in the qrels; skipped")
    per_query: dict[str, dict[str, float]] = {}
    undefined: list[str] = []
    for qid in qrels.query_ids:
        if not qrels.relevant(qid):
            undefined.append(qid)
            continue
        ranking = run.get(qid)
        if ranking is None:
            notes.append(f"query {qid} has no results in the run; scored 0")
            ranking = RankedList(qid, ())
        else:
            # the run may come from elsewhere: enforce (score desc, doc id asc)
            ranking = RankedList.from_scores(qid, ranking.entries)
        per_query[qid] = {m: _metric_value(m, ranking, qrels, depth) for m in names}
    means = {m: (sum(v[m] for v in per_query.values()) / len(per_query)) if per_query else 0.0
             for m in names}
    for note in notes:
        log.warning(note)
    return MetricReport(names, per_query, means, undefined, notes)
