"""Document ranking with per-term 2-Poisson eliteness, IDF and standard baselines.

Every scorer here is additive over query terms and is evaluated
term-at-a-time over posting lists, so only documents containing at least one
query term are ever scored.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from tim.core import DescriptionDistribution, PriorTable, PropertyVector, clamp_prior
from tim.corpus import InvertedIndex
from tim.mixture import TwoPoissonParams, log_eliteness_ratio
from tim.parallel import pmap
from tim.runs import RankedList

log = logging.getLogger(__name__)

MODELS = ("tim-em", "tim-gibbs", "idf", "bm25", "lm-jm", "dirichlet")


@dataclass(frozen=True)
class QueryRepresentation:
    """Query terms, taken as exactly the elite need properties (deduplicated)."""

    query_id: str
    elite_terms: tuple[str, ...]

    def __init__(self, query_id: str, terms: Iterable[str]):
        object.__setattr__(self, "query_id", str(query_id))
        object.__setattr__(self, "elite_terms", tuple(dict.fromkeys(terms)))

    def __len__(self) -> int:
        return len(self.elite_terms)


@dataclass(frozen=True)
class BaselineConfig:
    k1: float = 1.2
    b: float = 0.75
    lam: float = 0.1
    mu: float = 1000.0

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")
        if not self.mu > 0:
            raise ValueError("mu must be > 0")


@dataclass(frozen=True)
class CollectionStats:
    """The collection-level numbers the baselines need."""

    n_docs: int
    df: Mapping[str, int]
    cf: Mapping[str, int]
    total_tokens: int

    @property
    def avg_doc_length(self) -> float:
        return self.total_tokens / self.n_docs

    @classmethod
    def from_index(cls, index: InvertedIndex) -> "CollectionStats":
        return cls(index.n_docs, {t: index.df(t) for t in index.vocabulary},
                   dict(index.collection_freq), index.total_tokens)


# -- single-document scoring -----------------------------------------------------

def score_binary_strict(f_known: PropertyVector | Sequence[int],
                        item_desc: DescriptionDistribution, priors: PriorTable) -> float:
    """Product of description ratios at the known need vector (strict identity)."""
    f = PropertyVector(f_known)
    if f.dimension != item_desc.dimension or priors.item.shape[0] != f.dimension:
        raise ValueError("f_known, item_desc and priors must share one dimension")
    score = 1.0
    for fi, pd, pp in zip(f.values, item_desc.probs, priors.item):
        if fi:
            score *= pd / pp
        else:
            score *= (1.0 - pd) / clamp_prior(1.0 - pp)
    return score


def tim_term_score(params: TwoPoissonParams, tf, binarized: bool = False):
    """Per-term contribution shifted so that tf = 0 contributes exactly 0.

    With ``binarized`` the term is taken to be elite whenever it occurs, so a
    present term contributes log(1 / p_elite) and an absent one nothing.
    """
    tf = np.asarray(tf)
    if binarized:
        return np.where(tf > 0, -math.log(params.p_elite), 0.0)
    return log_eliteness_ratio(params, tf) - log_eliteness_ratio(params, 0)


def score_document_tim(params: Mapping[str, TwoPoissonParams], doc_tfs: Mapping[str, int],
                       query: QueryRepresentation, binarized: bool = False) -> float:
    score = 0.0
    for term in query.elite_terms:
        p = params.get(term)
        if p is None:
            log.debug("no fitted parameters for %r; term skipped", term)
            continue
        score += float(tim_term_score(p, doc_tfs.get(term, 0), binarized))
    return score


def _n_and_df(index_stats):
    if isinstance(index_stats, CollectionStats):
        return index_stats.n_docs, index_stats.df
    n, df = index_stats
    return n, df


def score_document_idf(index_stats, doc_terms: Iterable[str],
                       query: QueryRepresentation) -> float:
    """Sum of log(N / df) over query terms present in the document."""
    n, df = _n_and_df(index_stats)
    present = set(doc_terms)
    score = 0.0
    for term in query.elite_terms:
        d = df.get(term, 0)
        if term in present and d > 0:
            score += math.log(n / d)
    return score


def _bm25_idf(n: int, df):
    return np.log1p((n - df + 0.5) / (df + 0.5))


def score_document_baseline(model: str, config: BaselineConfig, stats: CollectionStats,
                            doc_tfs: Mapping[str, int], doc_length: int,
                            query: QueryRepresentation) -> float:
    """BM25 score, or the query log-likelihood under a smoothed document model.

    Query terms absent from the whole collection are skipped by every model.
    """
    if model not in ("bm25", "lm-jm", "dirichlet"):
        raise ValueError(f"unknown baseline model {model!r}")
    score = 0.0
    for term in query.elite_terms:
        cf = stats.cf.get(term, 0)
        if cf == 0:
            continue
        tf = doc_tfs.get(term, 0)
        if model == "bm25":
            if tf == 0:
                continue
            norm = config.k1 * (1.0 - config.b + config.b * doc_length / stats.avg_doc_length)
            score += float(_bm25_idf(stats.n_docs, stats.df[term])) * tf * (config.k1 + 1.0) / (tf + norm)
        elif model == "lm-jm":
            p_coll = cf / stats.total_tokens
            p_doc = tf / doc_length if doc_length else 0.0
            score += math.log((1.0 - config.lam) * p_doc + config.lam * p_coll)
        else:
            p_coll = cf / stats.total_tokens
            score += math.log((tf + config.mu * p_coll) / (doc_length + config.mu))
    return score


# -- term-at-a-time scorers --------------------------------------------------------

class Scorer:
    """Additive scorer: optional per-document base plus per-term contributions."""

    name = "scorer"

    def prepare(self, index: InvertedIndex, query: QueryRepresentation) -> list[str]:
        """Terms that take part in scoring for this query."""
        return [t for t in query.elite_terms if index.df(t) > 0]

    def term_contrib(self, index: InvertedIndex, term: str, ords: np.ndarray,
                     tfs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def base(self, index: InvertedIndex, terms: list[str], ords: np.ndarray) -> np.ndarray | float:
        return 0.0

    def score_matches(self, index: InvertedIndex,
                      query: QueryRepresentation) -> tuple[np.ndarray, np.ndarray]:
        terms = self.prepare(index, query)
        acc = np.zeros(index.n_docs)
        hit = np.zeros(index.n_docs, dtype=bool)
        for term in terms:
            ords, tfs = index.posting_arrays(term)
            acc[ords] += self.term_contrib(index, term, ords, tfs)
            hit[ords] = True
        ords = np.flatnonzero(hit)
        return ords, acc[ords] + self.base(index, terms, ords)


class TIMScorer(Scorer):
    def __init__(self, params: Mapping[str, TwoPoissonParams], binarized: bool = False,
                 name: str = "tim"):
        self.params = params
        self.binarized = binarized
        self.name = name

    def prepare(self, index, query):
        terms = []
        for t in super().prepare(index, query):
            if t in self.params:
                terms.append(t)
            else:
                log.warning("query %s: no fitted parameters for %r; term skipped", query.query_id, t)
        return terms

    def term_contrib(self, index, term, ords, tfs):
        return tim_term_score(self.params[term], tfs, self.binarized)


class IDFScorer(Scorer):
    name = "idf"

    def term_contrib(self, index, term, ords, tfs):
        return np.full(ords.shape[0], math.log(index.n_docs / index.df(term)))


class BM25Scorer(Scorer):
    name = "bm25"

    def __init__(self, config: BaselineConfig | None = None):
        self.config = config or BaselineConfig()

    def term_contrib(self, index, term, ords, tfs):
        c = self.config
        dl = index.doc_lengths_array[ords]
        norm = c.k1 * (1.0 - c.b + c.b * dl / index.avg_doc_length)
        return _bm25_idf(index.n_docs, index.df(term)) * tfs * (c.k1 + 1.0) / (tfs + norm)


class JelinekMercerScorer(Scorer):
    """Query log-likelihood with linear interpolation; lam weights the collection."""

    name = "lm-jm"

    def __init__(self, config: BaselineConfig | None = None):
        self.config = config or BaselineConfig()

    def _p_coll(self, index, term):
        return index.collection_freq[term] / index.total_tokens

    def term_contrib(self, index, term, ords, tfs):
        lam = self.config.lam
        pc = self._p_coll(index, term)
        dl = index.doc_lengths_array[ords]
        return np.log((1.0 - lam) * tfs / dl + lam * pc) - math.log(lam * pc)

    def base(self, index, terms, ords):
        return sum(math.log(self.config.lam * self._p_coll(index, t)) for t in terms)


class DirichletScorer(Scorer):
    name = "dirichlet"

    def __init__(self, config: BaselineConfig | None = None):
        self.config = config or BaselineConfig()

    def term_contrib(self, index, term, ords, tfs):
        mu_pc = self.config.mu * index.collection_freq[term] / index.total_tokens
        return np.log(tfs + mu_pc) - math.log(mu_pc)

    def base(self, index, terms, ords):
        mu = self.config.mu
        const = sum(math.log(mu * index.collection_freq[t] / index.total_tokens) for t in terms)
        dl = index.doc_lengths_array[ords]
        return const - len(terms) * np.log(dl + mu)


def make_scorer(model: str, params: Mapping[str, TwoPoissonParams] | None = None,
                config: BaselineConfig | None = None) -> Scorer:
    if model in ("tim-em", "tim-gibbs"):
        if params is None:
            raise ValueError(f"model {model!r} needs fitted term parameters")
        return TIMScorer(params, name=model)
    if model == "tim-binary":
        if params is None:
            raise ValueError("model 'tim-binary' needs term parameters")
        return TIMScorer(params, binarized=True, name=model)
    if model == "idf":
        return IDFScorer()
    if model == "bm25":
        return BM25Scorer(config)
    if model == "lm-jm":
        return JelinekMercerScorer(config)
    if model == "dirichlet":
        return DirichletScorer(config)
    raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")


def search(index: InvertedIndex, scorer: Scorer, query: QueryRepresentation,
           k: int = 1000) -> RankedList:
    """Top-k documents among those containing at least one query term."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not query.elite_terms:
        return RankedList(query.query_id, ())
    ords, scores = scorer.score_matches(index, query)
    ids = index.doc_ids
    return RankedList.from_scores(
        query.query_id, ((ids[o], s) for o, s in zip(ords.tolist(), scores.tolist())), k)


_WORKER: dict = {}


def _init_worker(index, scorer, k):
    _WORKER.update(index=index, scorer=scorer, k=k)


def _search_task(query):
    return search(_WORKER["index"], _WORKER["scorer"], query, _WORKER["k"])


def search_many(index: InvertedIndex, scorer: Scorer, queries: Sequence[QueryRepresentation],
                k: int = 1000, threads: int | None = None) -> list[RankedList]:
    """Run every query; results are in input order and independent of ``threads``."""
    return pmap(_search_task, list(queries), threads=threads,
                initializer=_init_worker, initargs=(index, scorer, k))
