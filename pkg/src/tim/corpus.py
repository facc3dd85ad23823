"""Corpus ingestion, tokenization and the inverted index."""

from __future__ import annotations

import json
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

log = logging.getLogger(__name__)

INDEX_MAGIC = "tim-index"
INDEX_VERSION = 1

_SPLIT = re.compile(r"[^0-9a-z]+")

# A short general-purpose English list; pass your own set for anything serious.
ENGLISH_STOPWORDS = frozenset(
    """a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing down
    during each few for from further had has have having he her here hers herself
    him himself his how i if in into is it its itself just me more most my myself
    no nor not now of off on once only or other our ours ourselves out over own
    same she should so some such than that the their theirs them themselves then
    there these they this those through to too under until up very was we were
    what when where which while who whom why will with would you your yours
    yourself yourselves""".split()
)


class CorpusFormatError(ValueError):
    """Malformed or inconsistent corpus input; the message names the location."""


class EmptyCorpusError(ValueError):
    pass


def s_stem(token: str) -> str:
    """Harman's S-stemmer: strips common English plural endings only."""
    if len(token) > 3 and token.endswith("ies") and not token.endswith(("eies", "aies")):
        return token[:-3] + "y"
    if len(token) > 3 and token.endswith("es") and not token.endswith(("aes", "ees", "oes")):
        return token[:-1]
    if len(token) > 2 and token.endswith("s") and not token.endswith(("us", "ss")):
        return token[:-1]
    return token


def tokenize(text: str, stem: bool = False,
             stopwords: Iterable[str] | None = None) -> list[str]:
    """Lowercase, split on any non-alphanumeric character, drop empty tokens.

    >>> tokenize("The Quick-brown FOX")
    ['the', 'quick', 'brown', 'fox']
    """
    tokens = [t for t in _SPLIT.split(text.lower()) if t]
    if stopwords is not None:
        stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
        tokens = [t for t in tokens if t not in stop]
    if stem:
        tokens = [s_stem(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[str, ...]


# -- ingestion ---------------------------------------------------------------

def _read_jsonl(path: Path, analyze) -> Iterator[Document]:
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or not isinstance(rec.get("id"), str) \
                    or not isinstance(rec.get("text"), str):
                raise CorpusFormatError(
                    f"{path}:{lineno}: record needs string fields 'id' and 'text'"
                )
            doc_id = rec["id"]
            if doc_id in seen:
                raise CorpusFormatError(
                    f"{path}:{lineno}: duplicate doc id {doc_id!r} (first seen on line {seen[doc_id]})"
                )
            seen[doc_id] = lineno
            yield Document(doc_id, tuple(analyze(rec["text"])))


_DOC_RE = re.compile(r"<DOC>(.*?)</DOC>", re.S | re.I)
_DOCNO_RE = re.compile(r"<DOCNO>\s*(.*?)\s*</DOCNO>", re.S | re.I)
_TEXT_RE = re.compile(r"<TEXT>(.*?)</TEXT>", re.S | re.I)
_TAG_RE = re.compile(r"<[^>]+>")


def _read_trec_sgml(path: Path, analyze) -> Iterator[Document]:
    raw = Path(path).read_text(encoding="utf-8", errors="replace")
    seen: set[str] = set()
    for match in _DOC_RE.finditer(raw):
        body = match.group(1)
        offset = match.start()
        lineno = raw.count("\n", 0, offset) + 1
        docno = _DOCNO_RE.search(body)
        if docno is None or not docno.group(1):
            raise CorpusFormatError(f"{path}:{lineno}: <DOC> without <DOCNO> (offset {offset})")
        doc_id = docno.group(1)
        if doc_id in seen:
            raise CorpusFormatError(f"{path}:{lineno}: duplicate doc id {doc_id!r}")
        seen.add(doc_id)
        text = " ".join(_TAG_RE.sub(" ", t) for t in _TEXT_RE.findall(body))
        yield Document(doc_id, tuple(analyze(text)))


def ingest_corpus(path: str | os.PathLike, format: str = "jsonl", stem: bool = False,
                  stopwords: Iterable[str] | None = None) -> Iterator[Document]:
    """Yield documents in file order from a JSONL or TREC SGML file."""
    path = Path(path)
    stop = frozenset(stopwords) if stopwords is not None else None

    def analyze(text):
        return tokenize(text, stem=stem, stopwords=stop)

    if format == "jsonl":
        return _read_jsonl(path, analyze)
    if format in ("trec", "trec-sgml"):
        return _read_trec_sgml(path, analyze)
    raise CorpusFormatError(f"unknown corpus format {format!r}")


_TOP_RE = re.compile(r"<top>(.*?)</top>", re.S | re.I)
_NUM_RE = re.compile(r"<num>\s*(?:Number:)?\s*(\S+?)\s*(?:</num>|\n|<)", re.I)
_TITLE_RE = re.compile(r"<title>\s*(?:Topic:)?(.*?)(?:</title>|<(?!/title)\w+>|\Z)", re.S | re.I)


def read_topics(path: str | os.PathLike, stem: bool = False,
                stopwords: Iterable[str] | None = None) -> list[tuple[str, list[str]]]:
    """Read queries from a TREC topic file (title field only) or a TSV file.

    TSV lines are ``qid<TAB>query text``.  Returns (qid, tokens) pairs in file
    order.
    """
    raw = Path(path).read_text(encoding="utf-8", errors="replace")
    stop = frozenset(stopwords) if stopwords is not None else None
    topics: list[tuple[str, list[str]]] = []
    if re.search(r"<top>", raw, re.I):
        for match in _TOP_RE.finditer(raw):
            body = match.group(1)
            lineno = raw.count("\n", 0, match.start()) + 1
            num = _NUM_RE.search(body)
            title = _TITLE_RE.search(body)
            if num is None or title is None:
                raise CorpusFormatError(f"{path}:{lineno}: topic without <num> or <title>")
            topics.append((num.group(1), tokenize(title.group(1), stem=stem, stopwords=stop)))
        return topics
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        qid, sep, text = line.partition("\t")
        if not sep:
            raise CorpusFormatError(f"{path}:{lineno}: expected 'qid<TAB>query'")
        topics.append((qid.strip(), tokenize(text, stem=stem, stopwords=stop)))
    return topics


# -- index -------------------------------------------------------------------

@dataclass(frozen=True)
class TermStatistics:
    term: str
    df: int
    tf_histogram: dict[int, int]

    @property
    def n_docs(self) -> int:
        return sum(self.tf_histogram.values())


@dataclass(eq=False)
class InvertedIndex:
    """Term -> postings over document ordinals, plus collection statistics.

    Documents are numbered by ordinal in insertion order; ``doc_ids`` maps an
    ordinal back to its external id.  Each posting list is a pair of int
    arrays (ordinals ascending, term frequencies).
    """

    doc_ids: list[str]
    doc_lengths_array: np.ndarray
    _postings: dict[str, tuple[np.ndarray, np.ndarray]]
    collection_freq: dict[str, int]
    _ordinal: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._ordinal = {d: i for i, d in enumerate(self.doc_ids)}
        self.doc_lengths_array.setflags(write=False)
        for ords, tfs in self._postings.values():
            ords.setflags(write=False)
            tfs.setflags(write=False)

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    N = n_docs

    @property
    def total_tokens(self) -> int:
        return int(self.doc_lengths_array.sum())

    @property
    def avg_doc_length(self) -> float:
        return self.total_tokens / self.n_docs

    @property
    def doc_lengths(self) -> dict[str, int]:
        return dict(zip(self.doc_ids, self.doc_lengths_array.tolist()))

    @property
    def vocabulary(self) -> list[str]:
        return sorted(self._postings)

    def __contains__(self, term: str) -> bool:
        return term in self._postings

    def ordinal(self, doc_id: str) -> int:
        return self._ordinal[doc_id]

    def df(self, term: str) -> int:
        entry = self._postings.get(term)
        return 0 if entry is None else int(entry[0].shape[0])

    def posting_arrays(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        entry = self._postings.get(term)
        if entry is None:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        return entry

    def postings(self, term: str) -> list[tuple[str, int]]:
        ords, tfs = self.posting_arrays(term)
        return [(self.doc_ids[o], int(tf)) for o, tf in zip(ords.tolist(), tfs.tolist())]

    def doc_term_frequencies(self) -> dict[str, Counter]:
        """Reconstruct per-document tf multisets from the postings."""
        out = {d: Counter() for d in self.doc_ids}
        for term, (ords, tfs) in self._postings.items():
            for o, tf in zip(ords.tolist(), tfs.tolist()):
                out[self.doc_ids[o]][term] = tf
        return out

    # persistence --------------------------------------------------------

    def save(self, path: str | os.PathLike) -> None:
        """Write the documented text layout (see docs/index_format.md)."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    def dumps(self) -> str:
        lines = [f"{INDEX_MAGIC}\t{INDEX_VERSION}\t{self.n_docs}\t{len(self._postings)}"]
        for doc_id, length in zip(self.doc_ids, self.doc_lengths_array.tolist()):
            lines.append(f"{doc_id}\t{length}")
        vocab = self.vocabulary
        for term in vocab:
            ords, _ = self._postings[term]
            lines.append(f"{term}\t{ords.shape[0]}\t{self.collection_freq[term]}")
        for term in vocab:
            ords, tfs = self._postings[term]
            deltas = np.diff(ords, prepend=0).tolist()
            lines.append(" ".join(f"{d}:{tf}" for d, tf in zip(deltas, tfs.tolist())))
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path: str | os.PathLike) -> "InvertedIndex":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        try:
            magic, version, n_docs, n_terms = lines[0].split("\t")
            n_docs, n_terms = int(n_docs), int(n_terms)
        except ValueError:
            raise CorpusFormatError(f"{path}:1: not a {INDEX_MAGIC} file") from None
        if magic != INDEX_MAGIC or int(version) != INDEX_VERSION:
            raise CorpusFormatError(f"{path}:1: unsupported index header {lines[0]!r}")
        if len(lines) < 1 + n_docs + 2 * n_terms:
            raise CorpusFormatError(f"{path}: truncated index file")
        doc_ids, lengths = [], []
        for line in lines[1:1 + n_docs]:
            doc_id, length = line.rsplit("\t", 1)
            doc_ids.append(doc_id)
            lengths.append(int(length))
        dict_start = 1 + n_docs
        post_start = dict_start + n_terms
        postings, cf = {}, {}
        for j in range(n_terms):
            lineno = dict_start + j + 1
            term, df, cfreq = lines[dict_start + j].split("\t")
            pairs = [p.split(":") for p in lines[post_start + j].split(" ")]
            deltas = np.array([int(d) for d, _ in pairs], dtype=np.int64)
            tfs = np.array([int(t) for _, t in pairs], dtype=np.int64)
            if deltas.shape[0] != int(df) or int(tfs.sum()) != int(cfreq):
                raise CorpusFormatError(f"{path}:{lineno}: postings disagree with dictionary for {term!r}")
            postings[term] = (np.cumsum(deltas), tfs)
            cf[term] = int(cfreq)
        return cls(doc_ids, np.array(lengths, dtype=np.int64), postings, cf)


def build_index(docs: Iterable[Document]) -> InvertedIndex:
    """Build an in-memory inverted index; document ordinals follow input order."""
    doc_ids: list[str] = []
    lengths: list[int] = []
    seen: set[str] = set()
    acc: dict[str, tuple[list[int], list[int]]] = {}
    for doc in docs:
        if doc.doc_id in seen:
            raise CorpusFormatError(f"duplicate doc id {doc.doc_id!r}")
        if any(c in doc.doc_id for c in "\t\n\r"):
            raise CorpusFormatError(f"doc id {doc.doc_id!r} contains whitespace control characters")
        seen.add(doc.doc_id)
        ordinal = len(doc_ids)
        doc_ids.append(doc.doc_id)
        lengths.append(len(doc.tokens))
        for term, tf in Counter(doc.tokens).items():
            entry = acc.get(term)
            if entry is None:
                acc[term] = ([ordinal], [tf])
            else:
                entry[0].append(ordinal)
                entry[1].append(tf)
    if not doc_ids:
        raise EmptyCorpusError("cannot build an index from an empty corpus")
    empty_docs = sum(1 for n in lengths if n == 0)
    if empty_docs:
        log.warning("%d document(s) have no tokens", empty_docs)
    postings = {
        t: (np.array(o, dtype=np.int64), np.array(f, dtype=np.int64)) for t, (o, f) in acc.items()
    }
    cf = {t: int(f.sum()) for t, (_, f) in postings.items()}
    return InvertedIndex(doc_ids, np.array(lengths, dtype=np.int64), postings, cf)


def term_stats(index: InvertedIndex, term: str) -> TermStatistics:
    """tf histogram over all N documents; the zero bucket holds N - df."""
    _, tfs = index.posting_arrays(term)
    df = int(tfs.shape[0])
    hist = {0: index.n_docs - df}
    if df:
        values, counts = np.unique(tfs, return_counts=True)
        hist.update(zip(values.tolist(), counts.tolist()))
    return TermStatistics(term, df, dict(sorted(hist.items())))


def doc_tfs(index: InvertedIndex, doc_id: str, terms: Iterable[str]) -> dict[str, int]:
    """Term frequencies of ``terms`` in one document (absent terms omitted)."""
    o = index.ordinal(doc_id)
    out = {}
    for term in terms:
        ords, tfs = index.posting_arrays(term)
        pos = np.searchsorted(ords, o)
        if pos < ords.shape[0] and ords[pos] == o:
            out[term] = int(tfs[pos])
    return out
