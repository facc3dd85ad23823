"""Seeded synthetic data: 2-Poisson counts, term-eliteness corpora, block-structured ratings."""

from __future__ import annotations

import numpy as np

from tim.cf import RatingMatrix
from tim.corpus import Document


def sample_two_poisson(n: int, mu_elite: float, mu_nonelite: float, p_elite: float,
                       seed: int | np.random.Generator = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    elite = rng.random(n) < p_elite
    return np.where(elite, rng.poisson(mu_elite, n), rng.poisson(mu_nonelite, n))


def eliteness_corpus(n_docs: int, vocab_size: int = 2000, seed: int = 0,
                     ) -> tuple[list[Document], dict[str, tuple[float, float, float]]]:
    """Documents whose term counts follow a per-term 2-Poisson mixture.

    Term j gets an elite weight falling off Zipf-like with j, an elite mean
    in [1, 6) and a small non-elite mean.  Returns the documents and the
    generating (mu_elite, mu_nonelite, p_elite) per term.
    """
    rng = np.random.default_rng(seed)
    width = len(str(vocab_size - 1))
    terms = [f"w{j:0{width}d}" for j in range(vocab_size)]
    truth = {}
    per_doc: list[list[tuple[int, int]]] = [[] for _ in range(n_docs)]
    for j, term in enumerate(terms):
        p = min(0.3, 0.5 / (1.0 + j) ** 0.6)
        mu1 = rng.uniform(1.0, 6.0)
        mu0 = rng.uniform(0.005, 0.1)
        truth[term] = (mu1, mu0, p)
        tf = np.where(rng.random(n_docs) < p, rng.poisson(mu1, n_docs), rng.poisson(mu0, n_docs))
        for d in np.flatnonzero(tf).tolist():
            per_doc[d].append((j, int(tf[d])))
    docs = []
    for d, entries in enumerate(per_doc):
        tokens = [terms[j] for j, c in entries for _ in range(c)]
        if not tokens:
            tokens = [terms[0]]
        docs.append(Document(f"doc{d:06d}", tuple(tokens)))
    return docs, truth


def random_queries(vocabulary: list[str], n_queries: int, seed: int = 0,
                   min_len: int = 1, max_len: int = 4) -> list[tuple[str, list[str]]]:
    rng = np.random.default_rng(seed)
    out = []
    for q in range(n_queries):
        size = int(rng.integers(min_len, max_len + 1))
        terms = rng.choice(len(vocabulary), size=size, replace=False)
        out.append((f"q{q:03d}", [vocabulary[t] for t in sorted(terms.tolist())]))
    return out


def block_ratings(n_users: int = 200, n_items: int = 100, density: float = 0.2,
                  seed: int = 0) -> tuple[RatingMatrix, dict[str, int], dict[str, int]]:
    """Two user groups, each rating its own half of the items 4-5 and the other half 1-2."""
    rng = np.random.default_rng(seed)
    user_group = {f"u{u:04d}": int(u >= n_users // 2) for u in range(n_users)}
    item_group = {f"i{i:04d}": int(i >= n_items // 2) for i in range(n_items)}
    triples = []
    for u, gu in user_group.items():
        for i, gi in item_group.items():
            if rng.random() >= density:
                continue
            r = int(rng.integers(4, 6)) if gu == gi else int(rng.integers(1, 3))
            triples.append((u, i, r))
    return RatingMatrix.from_triples(triples), user_group, item_group
