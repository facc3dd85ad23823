"""Hypothesis-level types and a brute-force relevance enumerator.

A need is described by a binary vector F over need properties and an item
by a binary vector E over item properties.  Seek matrices Y (need -> item)
and Z (item -> need) relate the two.  ``enumerate_relevance_probability``
evaluates the full product-form relevance sum by visiting every binary
assignment of E and F, with the seek-matrix entries summed out per entry.
It is exponential by design and serves as the reference for the closed-form
rankers on small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

PRIOR_EPS = 1e-9
MAX_ENUMERATION_DIM = 16
NORMALIZATION_TOL = 1e-9


class DimensionError(ValueError):
    """Arguments disagree on property counts or exceed the enumeration limit."""


class NormalizationError(ValueError):
    """A joint relevance table does not sum to one."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def clamp_prior(p: float) -> float:
    """Clamp a marginal probability into [PRIOR_EPS, 1 - PRIOR_EPS].

    Values outside [0, 1] are rejected rather than clamped.
    """
    p = float(p)
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise ValueError(f"prior {p!r} is not a probability")
    return min(max(p, PRIOR_EPS), 1.0 - PRIOR_EPS)


@dataclass(frozen=True)
class PropertyVector:
    """Binary description of a need (F) or an item (E)."""

    values: tuple[int, ...]

    def __init__(self, values: Sequence[int]):
        vals = tuple(int(v) for v in values)
        if any(v not in (0, 1) for v in vals):
            raise ValueError(f"property values must be 0/1, got {list(values)!r}")
        object.__setattr__(self, "values", vals)

    @property
    def dimension(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i: int) -> int:
        return self.values[i]


@dataclass(frozen=True, eq=False)
class SeekMatrix:
    """Binary relationship matrix: rows are source properties, columns targets.

    Y maps need properties to the item properties they seek, Z the reverse.
    The collaborative-filtering preference and appeal matrices are the same
    structure and are never materialised by the CF ranker.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.int8, copy=True)
        if arr.ndim != 2:
            raise DimensionError(f"seek matrix must be 2-D, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("seek matrix entries must be 0/1")
        object.__setattr__(self, "entries", _frozen(arr))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def identity(cls, n: int) -> "SeekMatrix":
        return cls(np.eye(n, dtype=np.int8))

    def __eq__(self, other):
        return isinstance(other, SeekMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes()))


@dataclass(frozen=True, eq=False)
class DescriptionDistribution:
    """Per-property probability that the property describes a given need or item."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float, copy=True).reshape(-1)
        if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("description probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", _frozen(arr))

    @property
    def dimension(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def known(cls, vector: PropertyVector | Sequence[int]) -> "DescriptionDistribution":
        """Degenerate distribution putting all mass on a known binary vector."""
        return cls(np.asarray(list(vector), dtype=float))


@dataclass(frozen=True, eq=False)
class PriorTable:
    """Marginals P(E_l = 1) over item properties and P(F_m = 1) over need properties.

    Stored clamped to [1e-9, 1 - 1e-9] so every ratio stays finite.
    """

    item: np.ndarray
    need: np.ndarray

    def __post_init__(self):
        for name in ("item", "need"):
            raw = np.array(getattr(self, name), dtype=float, copy=True).reshape(-1)
            arr = np.array([clamp_prior(p) for p in raw], dtype=float)
            object.__setattr__(self, name, _frozen(arr))


@dataclass(frozen=True, eq=False)
class JointRelevanceTable:
    """P(E_l, F_m, Y_lm, Z_ml | R=1) for every (item property l, need property m).

    ``tables`` has shape (|T|, |N|, 2, 2, 2, 2) indexed ``[l, m, e, f, y, z]``.
    """

    tables: np.ndarray
    prior_relevance: float = 1.0

    def __post_init__(self):
        arr = np.array(self.tables, dtype=float, copy=True)
        if arr.ndim != 6 or arr.shape[2:] != (2, 2, 2, 2):
            raise DimensionError(
                f"joint tables must have shape (T, N, 2, 2, 2, 2), got {arr.shape}"
            )
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise NormalizationError("joint table entries must be nonnegative")
        sums = arr.reshape(arr.shape[0], arr.shape[1], 16).sum(axis=2)
        bad = np.abs(sums - 1.0) > NORMALIZATION_TOL
        if bad.any():
            l, m = map(int, np.argwhere(bad)[0])
            raise NormalizationError(
                f"joint table for pair (l={l}, m={m}) sums to {sums[l, m]!r}, not 1"
            )
        if not 0.0 <= self.prior_relevance <= 1.0:
            raise ValueError("prior_relevance must be in [0, 1]")
        object.__setattr__(self, "tables", _frozen(arr))

    @property
    def item_dimension(self) -> int:
        return self.tables.shape[0]

    @property
    def need_dimension(self) -> int:
        return self.tables.shape[1]

    def marginal_ef(self) -> np.ndarray:
        """Joint mass with both seek-matrix entries summed out, shape (T, N, 2, 2)."""
        return self.tables.sum(axis=(4, 5))


def single_property_score(p_desc: float, p_prior: float) -> float:
    """Ratio of the description probability to the collection-wide marginal."""
    p_desc = float(p_desc)
    if not 0.0 <= p_desc <= 1.0:
        raise ValueError(f"description probability {p_desc!r} outside [0, 1]")
    return p_desc / clamp_prior(p_prior)


def strict_identity_joint(dimension: int, f_known: PropertyVector | Sequence[int],
                          prior_relevance: float = 1.0) -> JointRelevanceTable:
    """Joint table for the strict identity relation (N = T, Y = Z = I).

    Under strict identity a pair is relevant only when E equals F, and with
    the need vector known, every relevant configuration has E = F = f_known.
    Diagonal pairs put their mass on seek entries (1, 1); off-diagonal pairs
    on (0, 0).
    """
    if dimension < 1:
        raise DimensionError("strict identity needs at least one property")
    f = PropertyVector(f_known)
    if f.dimension != dimension:
        raise DimensionError(f"f_known has dimension {f.dimension}, expected {dimension}")
    tables = np.zeros((dimension, dimension, 2, 2, 2, 2))
    for l in range(dimension):
        for m in range(dimension):
            seek = 1 if l == m else 0
            tables[l, m, f[l], f[m], seek, seek] = 1.0
    return JointRelevanceTable(tables, prior_relevance)


def _binary_configs(n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0), dtype=np.intp)
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.intp)


def _description_factor(configs: np.ndarray, desc: np.ndarray, prior: np.ndarray) -> np.ndarray:
    # prod over properties of P(x_j | I) / P(x_j) for each binary config row
    p_given = np.where(configs == 1, desc, 1.0 - desc)
    p_marg = np.where(configs == 1, prior, 1.0 - prior)
    return np.prod(p_given / p_marg, axis=1)


def enumerate_relevance_probability(need: DescriptionDistribution,
                                    item: DescriptionDistribution,
                                    joint: JointRelevanceTable,
                                    priors: PriorTable) -> float:
    """Exact product-form relevance sum over all binary E and F.

    Each description ratio P(x|I)/P(x) enters once per property; the joint
    relevance factor is the product over all (l, m) pairs.  Seek-matrix
    entries are independent per entry, so they are summed out of each
    pair's table before the enumeration.  Returns an unnormalised score,
    rank-equivalent to the probability of relevance.
    """
    n_item, n_need = item.dimension, need.dimension
    if (joint.item_dimension, joint.need_dimension) != (n_item, n_need):
        raise DimensionError(
            f"joint table is {joint.item_dimension}x{joint.need_dimension}, "
            f"descriptions are {n_item}x{n_need}"
        )
    if priors.item.shape[0] != n_item or priors.need.shape[0] != n_need:
        raise DimensionError("prior table dimensions do not match descriptions")
    if n_item + n_need > MAX_ENUMERATION_DIM:
        raise DimensionError(
            f"|N| + |T| = {n_item + n_need} exceeds enumeration limit {MAX_ENUMERATION_DIM}"
        )

    e_cfg = _binary_configs(n_item)
    f_cfg = _binary_configs(n_need)
    e_weight = _description_factor(e_cfg, item.probs, priors.item)
    f_weight = _description_factor(f_cfg, need.probs, priors.need)

    ef = joint.marginal_ef()
    relevance = np.ones((e_cfg.shape[0], f_cfg.shape[0]))
    for l in range(n_item):
        for m in range(n_need):
            relevance *= ef[l, m][e_cfg[:, l][:, None], f_cfg[:, m][None, :]]

    total = e_weight @ relevance @ f_weight
    return float(joint.prior_relevance * total)
