"""Item ranking from a rating matrix by relevance propagation.

Users are described by their preference over kinds of items (one property
per item) and items by their appeal to kinds of users (one property per
user).  A known-relevant pair (u', i') supports the candidate pair (u, i)
when u has rated i' and u' has rated i; it contributes the eliteness log
ratio of r(u, i') under the 2-Poisson model of item i' plus that of r(u', i)
under the 2-Poisson model of user u'.
"""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from tim.mixture import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    MU_NONELITE_INIT,
    CountHistogram,
    FittedModel,
    GibbsConfig,
    TwoPoissonParams,
    fit_many,
    fit_property,
    log_eliteness_ratio,
)
from tim.runs import RankedList

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 4
DEFAULT_R_MAX = 5
USER_PREFIX = "user:"
ITEM_PREFIX = "item:"


class RatingFormatError(ValueError):
    pass


class ColdEntityError(KeyError):
    """The user or item has no ratings to fit a model on."""


class MissingModelError(KeyError):
    pass


class DuplicateRatingWarning(UserWarning):
    pass


@dataclass(eq=False)
class RatingMatrix:
    """Sparse (user, item) -> integer rating with per-user and per-item views."""

    ratings: dict[tuple[str, str], int]
    r_max: int = DEFAULT_R_MAX

    def __post_init__(self):
        self.by_user: dict[str, dict[str, int]] = {}
        self.by_item: dict[str, dict[str, int]] = {}
        for (u, i), r in self.ratings.items():
            if not 1 <= r <= self.r_max:
                raise RatingFormatError(f"rating {r} for ({u}, {i}) outside [1, {self.r_max}]")
            self.by_user.setdefault(u, {})[i] = r
            self.by_item.setdefault(i, {})[u] = r

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, int]],
                     r_max: int = DEFAULT_R_MAX) -> "RatingMatrix":
        return cls({(str(u), str(i)): int(r) for u, i, r in triples}, r_max)

    @property
    def users(self) -> list[str]:
        return sorted(self.by_user)

    @property
    def items(self) -> list[str]:
        return sorted(self.by_item)

    def rating(self, user: str, item: str) -> int | None:
        return self.ratings.get((user, item))

    def __len__(self) -> int:
        return len(self.ratings)


def load_ratings(path: str | os.PathLike, r_max: int = DEFAULT_R_MAX) -> RatingMatrix:
    """Read ``user<TAB>item<TAB>rating[<TAB>timestamp]`` lines.

    A repeated (user, item) keeps the last rating and emits a
    DuplicateRatingWarning.
    """
    ratings: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise RatingFormatError(f"{path}:{lineno}: expected 3 or 4 tab-separated fields")
            user, item, raw = parts[0], parts[1], parts[2]
            try:
                r = int(raw)
            except ValueError:
                raise RatingFormatError(f"{path}:{lineno}: rating {raw!r} is not an integer") from None
            if not 1 <= r <= r_max:
                raise RatingFormatError(f"{path}:{lineno}: rating {r} outside [1, {r_max}]")
            if (user, item) in ratings:
                warnings.warn(f"{path}:{lineno}: duplicate rating for ({user}, {item}); keeping last",
                              DuplicateRatingWarning, stacklevel=2)
            ratings[(user, item)] = r
    return RatingMatrix(ratings, r_max)


def build_relevant_pairs(matrix: RatingMatrix,
                         threshold: int = DEFAULT_THRESHOLD) -> frozenset[tuple[str, str]]:
    """Rated pairs with rating >= threshold."""
    if not 1 <= threshold <= matrix.r_max:
        raise ValueError(f"threshold {threshold} outside rating scale [1, {matrix.r_max}]")
    return frozenset(k for k, r in matrix.ratings.items() if r >= threshold)


# -- entity models ---------------------------------------------------------------

@dataclass(frozen=True)
class UserModel:
    """Mixture over the ratings a user has given."""
    user_id: str
    params: TwoPoissonParams


@dataclass(frozen=True)
class ItemModel:
    """Mixture over the ratings an item has received."""
    item_id: str
    params: TwoPoissonParams


def rating_init(ratings: Sequence[int], threshold: int = DEFAULT_THRESHOLD) -> TwoPoissonParams:
    """p = share of ratings >= threshold; means of the ratings above and below it."""
    if not ratings:
        raise ColdEntityError("no ratings")
    high = [r for r in ratings if r >= threshold]
    low = [r for r in ratings if r < threshold]
    mu_elite = sum(high) / len(high) if high else 1.0
    mu_nonelite = sum(low) / len(low) if low else MU_NONELITE_INIT
    return TwoPoissonParams.from_components(mu_elite, mu_nonelite, len(high) / len(ratings))


def _fit_ratings(pid: str, ratings: Sequence[int], threshold: int, method: str,
                 tol: float, max_iter: int, gibbs: GibbsConfig | None) -> FittedModel:
    hist = CountHistogram.from_samples(ratings)
    return fit_property(pid, hist, method, init=rating_init(ratings, threshold),
                        tol=tol, max_iter=max_iter, gibbs=gibbs)


def fit_user_model(matrix: RatingMatrix, user: str, threshold: int = DEFAULT_THRESHOLD,
                   method: str = "em", tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, gibbs: GibbsConfig | None = None) -> UserModel:
    ratings = list(matrix.by_user.get(user, {}).values())
    if not ratings:
        raise ColdEntityError(f"user {user!r} has no ratings")
    fm = _fit_ratings(USER_PREFIX + user, ratings, threshold, method, tol, max_iter, gibbs)
    return UserModel(user, fm.params)


def fit_item_model(matrix: RatingMatrix, item: str, threshold: int = DEFAULT_THRESHOLD,
                   method: str = "em", tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, gibbs: GibbsConfig | None = None) -> ItemModel:
    ratings = list(matrix.by_item.get(item, {}).values())
    if not ratings:
        raise ColdEntityError(f"item {item!r} has no ratings")
    fm = _fit_ratings(ITEM_PREFIX + item, ratings, threshold, method, tol, max_iter, gibbs)
    return ItemModel(item, fm.params)


def fit_all_models(matrix: RatingMatrix, threshold: int = DEFAULT_THRESHOLD, method: str = "em",
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   gibbs: GibbsConfig | None = None, threads: int | None = None
                   ) -> tuple[dict[str, UserModel], dict[str, ItemModel], dict[str, FittedModel]]:
    """Fit every user and item; the third value keys raw fits by prefixed id."""
    hists, inits = {}, {}
    for u, rs in matrix.by_user.items():
        hists[USER_PREFIX + u] = CountHistogram.from_samples(rs.values())
        inits[USER_PREFIX + u] = rating_init(list(rs.values()), threshold)
    for i, rs in matrix.by_item.items():
        hists[ITEM_PREFIX + i] = CountHistogram.from_samples(rs.values())
        inits[ITEM_PREFIX + i] = rating_init(list(rs.values()), threshold)
    fits = fit_many(hists, method=method, tol=tol, max_iter=max_iter, gibbs=gibbs,
                    threads=threads, inits=inits)
    users = {pid[len(USER_PREFIX):]: UserModel(pid[len(USER_PREFIX):], f.params)
             for pid, f in fits.items() if pid.startswith(USER_PREFIX)}
    items = {pid[len(ITEM_PREFIX):]: ItemModel(pid[len(ITEM_PREFIX):], f.params)
             for pid, f in fits.items() if pid.startswith(ITEM_PREFIX)}
    return users, items, fits


def models_from_fits(fits: Mapping[str, FittedModel]
                     ) -> tuple[dict[str, UserModel], dict[str, ItemModel]]:
    users, items = {}, {}
    for pid, f in fits.items():
        if pid.startswith(USER_PREFIX):
            uid = pid[len(USER_PREFIX):]
            users[uid] = UserModel(uid, f.params)
        elif pid.startswith(ITEM_PREFIX):
            iid = pid[len(ITEM_PREFIX):]
            items[iid] = ItemModel(iid, f.params)
    return users, items


# -- scoring ---------------------------------------------------------------------

def _ratio(params: TwoPoissonParams, r: int) -> float:
    return float(log_eliteness_ratio(params, r))


def score_pair(user: str, item: str, matrix: RatingMatrix, rel: Iterable[tuple[str, str]],
               user_models: Mapping[str, UserModel],
               item_models: Mapping[str, ItemModel]) -> float:
    """Log relevance score of (user, item), summed over supporting relevant pairs.

    Returns 0 when no relevant pair supports the candidate.
    """
    seen_by_user = matrix.by_user.get(user, {})
    raters_of_item = matrix.by_item.get(item, {})
    score = 0.0
    for u2, i2 in sorted(rel):
        if u2 == user or i2 == item:
            continue
        r_user = seen_by_user.get(i2)
        r_item = raters_of_item.get(u2)
        if r_user is None or r_item is None:
            continue
        try:
            im, um = item_models[i2], user_models[u2]
        except KeyError as exc:
            raise MissingModelError(f"no fitted model for {exc.args[0]!r}") from None
        score += _ratio(im.params, r_user) + _ratio(um.params, r_item)
    return score


class CFRanker:
    """Fitted models plus sparse matrices for ranking every candidate at once."""

    def __init__(self, matrix: RatingMatrix, threshold: int = DEFAULT_THRESHOLD,
                 user_models: Mapping[str, UserModel] | None = None,
                 item_models: Mapping[str, ItemModel] | None = None,
                 method: str = "em", tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, gibbs: GibbsConfig | None = None,
                 threads: int | None = None):
        self.matrix = matrix
        self.threshold = threshold
        self.rel = build_relevant_pairs(matrix, threshold)
        self.fits: dict[str, FittedModel] = {}
        if user_models is None or item_models is None:
            user_models, item_models, self.fits = fit_all_models(
                matrix, threshold, method, tol, max_iter, gibbs, threads)
        self.user_models = dict(user_models)
        self.item_models = dict(item_models)
        self._build()

    def _build(self):
        m = self.matrix
        self.user_ids = m.users
        self.item_ids = m.items
        self._urow = {u: k for k, u in enumerate(self.user_ids)}
        self._icol = {i: k for k, i in enumerate(self.item_ids)}
        missing = [u for u in self.user_ids if u not in self.user_models] + \
                  [i for i in self.item_ids if i not in self.item_models]
        if missing:
            raise MissingModelError(f"no fitted model for {missing[0]!r}")
        rows, cols, a_val, c_val, rel = [], [], [], [], []
        for (u, i), r in sorted(m.ratings.items()):
            rows.append(self._urow[u])
            cols.append(self._icol[i])
            a_val.append(_ratio(self.item_models[i].params, r))
            c_val.append(_ratio(self.user_models[u].params, r))
            rel.append(1.0 if r >= self.threshold else 0.0)
        shape = (len(self.user_ids), len(self.item_ids))

        def csr(vals):
            return sparse.csr_matrix((np.array(vals, dtype=float), (rows, cols)), shape=shape)

        self._O = csr(np.ones(len(rows)))
        self._A = csr(a_val)   # item-model ratio of r(u, i'), keyed by (u, i')
        self._C = csr(c_val)   # user-model ratio of r(u', i), keyed by (u', i)
        self._R = csr(rel)
        self._OT = self._O.T.tocsr()
        self._CT = self._C.T.tocsr()
        self._R_colsum = np.asarray(self._R.sum(axis=0)).ravel()
        self._CR_colsum = np.asarray(self._C.multiply(self._R).sum(axis=0)).ravel()

    def score_all(self, user: str) -> np.ndarray:
        """Scores for every item (column order of ``item_ids``) for one user."""
        if user not in self._urow:
            raise KeyError(f"unknown user {user!r}")
        row = self._urow[user]
        observed = self._O.getrow(row).toarray().ravel()
        a_u = self._A.getrow(row).toarray().ravel()
        va = self._R @ a_u
        vn = self._R @ observed
        va[row] = 0.0
        vn[row] = 0.0
        r_u = self._R.getrow(row).toarray().ravel()
        c_u = self._C.getrow(row).toarray().ravel()
        term1 = self._OT @ va - observed * a_u * (self._R_colsum - r_u)
        term2 = self._CT @ vn - observed * (self._CR_colsum - c_u * r_u)
        return term1 + term2

    def score(self, user: str, item: str) -> float:
        return float(self.score_all(user)[self._icol[item]])

    def rank_items_for_user(self, user: str, k: int = 10,
                            candidates: Iterable[str] | None = None) -> RankedList:
        """Top-k candidates, ties by ascending item id; default candidates are unrated items."""
        if user not in self._urow:
            raise KeyError(f"unknown user {user!r}")
        if k < 1:
            raise ValueError("k must be >= 1")
        scores = self.score_all(user)
        if candidates is None:
            rated = self.matrix.by_user[user]
            candidates = [i for i in self.item_ids if i not in rated]
        else:
            candidates = list(candidates)
            unknown = [i for i in candidates if i not in self._icol]
            if unknown:
                raise KeyError(f"unknown item {unknown[0]!r}")
        return RankedList.from_scores(
            user, ((i, float(scores[self._icol[i]])) for i in candidates), k)


def rank_items_for_user(user: str, matrix: RatingMatrix, k: int = 10,
                        candidates: Iterable[str] | None = None,
                        threshold: int = DEFAULT_THRESHOLD,
                        method: str = "em") -> RankedList:
    """One-off convenience wrapper; build a CFRanker to rank many users."""
    return CFRanker(matrix, threshold, method=method).rank_items_for_user(user, k, candidates)
