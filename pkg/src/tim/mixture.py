"""Two-component Poisson mixtures over count histograms.

Each property (a term, a user or an item) gets its own mixture: counts follow
Poisson(mu_elite) where the property is elite and Poisson(mu_nonelite)
elsewhere, mixed with weight p_elite.  Fits run on histograms of distinct
count values so their cost does not grow with the number of observations.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np
from scipy.special import gammaln

from tim.corpus import TermStatistics

log = logging.getLogger(__name__)

P_MIN = 1e-6
P_MAX = 1.0 - 1e-6
MU_MIN = 1e-6
MU_NONELITE_INIT = 1e-3

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 100

MODEL_FILE_HEADER = "#property\tmu_elite\tmu_nonelite\tp_elite\tmethod\tloglik"


class EmptyHistogramError(ValueError):
    pass


def _clip_p(p: float) -> float:
    return min(max(float(p), P_MIN), P_MAX)


def _clip_mu(mu: float) -> float:
    return max(float(mu), MU_MIN)


@dataclass(frozen=True)
class TwoPoissonParams:
    """Elite mean, non-elite mean and elite mixing weight.

    Construct through :meth:`from_components` when the component order or
    range is not already guaranteed; it clamps and relabels so that
    ``mu_elite >= mu_nonelite``.
    """

    mu_elite: float
    mu_nonelite: float
    p_elite: float

    def __post_init__(self):
        if not (self.mu_elite >= self.mu_nonelite >= MU_MIN):
            raise ValueError(
                f"need mu_elite >= mu_nonelite >= {MU_MIN}, got "
                f"({self.mu_elite!r}, {self.mu_nonelite!r})"
            )
        if not P_MIN <= self.p_elite <= P_MAX:
            raise ValueError(f"p_elite {self.p_elite!r} outside [{P_MIN}, {P_MAX}]")

    @classmethod
    def from_components(cls, mu_a: float, mu_b: float, p_a: float) -> "TwoPoissonParams":
        mu_a, mu_b, p_a = _clip_mu(mu_a), _clip_mu(mu_b), _clip_p(p_a)
        if mu_a >= mu_b:
            return cls(mu_a, mu_b, p_a)
        return cls(mu_b, mu_a, _clip_p(1.0 - p_a))


@dataclass(frozen=True, eq=False)
class CountHistogram:
    """Distinct nonnegative count values and how many observations took each."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64).reshape(-1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if values.shape != weights.shape:
            raise ValueError("values and weights must have the same length")
        if np.any(values < 0) or np.any(weights < 0):
            raise ValueError("counts and weights must be nonnegative")
        keep = weights > 0
        values, weights = values[keep], weights[keep]
        order = np.argsort(values, kind="stable")
        values, weights = values[order], weights[order]
        if np.unique(values).shape[0] != values.shape[0]:
            raise ValueError("histogram values must be distinct")
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_mapping(cls, hist: Mapping[int, float]) -> "CountHistogram":
        items = sorted(hist.items())
        return cls(np.array([k for k, _ in items], dtype=np.int64),
                   np.array([w for _, w in items], dtype=float))

    @classmethod
    def from_samples(cls, samples: Iterable[int]) -> "CountHistogram":
        values, counts = np.unique(np.asarray(list(samples), dtype=np.int64), return_counts=True)
        return cls(values, counts.astype(float))

    @classmethod
    def from_term_stats(cls, stats: TermStatistics) -> "CountHistogram":
        return cls.from_mapping(stats.tf_histogram)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def mean(self) -> float:
        return float(self.values @ self.weights / self.total)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.values.tolist(), self.weights.tolist()))


# -- densities ---------------------------------------------------------------

def poisson_logpmf(k, mu):
    """log(e^-mu mu^k / k!), vectorised; mu floored at 1e-6."""
    k = np.asarray(k, dtype=float)
    mu = np.maximum(np.asarray(mu, dtype=float), MU_MIN)
    return k * np.log(mu) - mu - gammaln(k + 1.0)


def poisson_pmf(k: int, mu: float) -> float:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return float(np.exp(poisson_logpmf(k, mu)))


def _component_logs(params: TwoPoissonParams, counts):
    elite = math.log(params.p_elite) + poisson_logpmf(counts, params.mu_elite)
    nonelite = math.log1p(-params.p_elite) + poisson_logpmf(counts, params.mu_nonelite)
    return elite, nonelite


def log_eliteness_posterior(params: TwoPoissonParams, counts):
    elite, nonelite = _component_logs(params, counts)
    return elite - np.logaddexp(elite, nonelite)


def eliteness_posterior(params: TwoPoissonParams, count: int) -> float:
    """P(elite | count) by Bayes' rule over the two Poisson components."""
    return float(np.exp(log_eliteness_posterior(params, count)))


def log_eliteness_ratio(params: TwoPoissonParams, counts):
    """log P(elite | count) - log P(elite), the per-property log score.

    Equal to log( Pois(count; mu1) / (p Pois(count; mu1) + (1-p) Pois(count; mu0)) );
    the factorials cancel.
    """
    return log_eliteness_posterior(params, counts) - math.log(params.p_elite)


def log_likelihood(hist: CountHistogram, params: TwoPoissonParams) -> float:
    elite, nonelite = _component_logs(params, hist.values)
    return float(hist.weights @ np.logaddexp(elite, nonelite))


# -- initialisation ------------------------------------------------------------

def init_params(stats: TermStatistics | CountHistogram) -> TwoPoissonParams:
    """Collection-statistics initialisation.

    p is the fraction of documents containing the term, mu_nonelite a
    minuscule 1e-3, and mu_elite the mean tf over documents where the term
    occurs more than once (falling back to tf >= 1, then to 1.0).
    """
    if isinstance(stats, TermStatistics):
        hist = stats.tf_histogram
    else:
        hist = stats.as_dict()
    n = sum(hist.values())
    if n <= 0:
        raise EmptyHistogramError("cannot initialise from an empty histogram")
    df = sum(w for k, w in hist.items() if k >= 1)

    def mean_over(pred):
        num = sum(k * w for k, w in hist.items() if pred(k))
        den = sum(w for k, w in hist.items() if pred(k))
        return num / den if den else None

    mu_elite = mean_over(lambda k: k > 1)
    if mu_elite is None:
        mu_elite = mean_over(lambda k: k >= 1)
    if mu_elite is None:
        mu_elite = 1.0
    return TwoPoissonParams.from_components(mu_elite, MU_NONELITE_INIT, df / n)


# -- EM ------------------------------------------------------------------------

def em_fit(hist: CountHistogram, init: TwoPoissonParams | None = None,
           tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
           ) -> tuple[TwoPoissonParams, list[float]]:
    """Maximum-likelihood fit by EM; returns the params and the log-likelihood trace.

    The trace starts with the log-likelihood at ``init`` and gains one entry
    per iteration.  Iteration stops once the relative change drops below
    ``tol`` or after ``max_iter`` iterations.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    if hist.total <= 0:
        raise EmptyHistogramError("em_fit needs at least one observation")
    if init is None:
        init = init_params(hist)

    x, w = hist.values.astype(float), hist.weights
    total = hist.total
    if not np.any(x > 0):
        # both components collapse onto the mean floor; the elite weight is unidentifiable
        params = TwoPoissonParams(MU_MIN, MU_MIN, P_MIN)
        return params, [log_likelihood(hist, params)]

    log_fact = gammaln(x + 1.0)
    mu1, mu0, p = init.mu_elite, init.mu_nonelite, init.p_elite

    def comp_logs(mu1, mu0, p):
        l1 = math.log(p) + x * math.log(mu1) - mu1 - log_fact
        l0 = math.log1p(-p) + x * math.log(mu0) - mu0 - log_fact
        return l1, l0

    l1, l0 = comp_logs(mu1, mu0, p)
    norm = np.logaddexp(l1, l0)
    trace = [float(w @ norm)]
    for _ in range(max_iter):
        resp = np.exp(l1 - norm)
        w1 = w * resp
        n1 = float(w1.sum())
        n0 = total - n1
        p = _clip_p(n1 / total)
        mu1 = _clip_mu(float(w1 @ x) / n1) if n1 > 0 else MU_MIN
        mu0 = _clip_mu(float((w - w1) @ x) / n0) if n0 > 0 else MU_MIN
        l1, l0 = comp_logs(mu1, mu0, p)
        norm = np.logaddexp(l1, l0)
        ll = float(w @ norm)
        prev = trace[-1]
        trace.append(ll)
        if abs(ll - prev) <= tol * max(abs(prev), 1e-300):
            break
    return TwoPoissonParams.from_components(mu1, mu0, p), trace


# -- Gibbs ---------------------------------------------------------------------

@dataclass(frozen=True)
class GibbsConfig:
    """Conjugate priors and chain settings.

    Gamma priors are (shape, rate) pairs on the elite and non-elite means;
    the Beta prior (a, b) is on the elite weight.
    """

    elite_prior: tuple[float, float] = (1.0, 1.0)
    nonelite_prior: tuple[float, float] = (1.0, 1.0)
    weight_prior: tuple[float, float] = (1.0, 1.0)
    burn_in: int = 500
    samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name in ("elite_prior", "nonelite_prior", "weight_prior"):
            a, b = getattr(self, name)
            if not (a > 0 and b > 0):
                raise ValueError(f"{name} hyperparameters must be positive, got {(a, b)}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    def centered_on(self, init: TwoPoissonParams, rate: float = 1.0) -> "GibbsConfig":
        """Same config with the elite-mean prior centred on ``init.mu_elite``."""
        return replace(self, elite_prior=(init.mu_elite * rate, rate))

    def with_seed(self, seed: int) -> "GibbsConfig":
        return replace(self, seed=seed)


def property_seed(base_seed: int, property_id: str) -> int:
    """Stable per-property seed, independent of process and hash randomisation."""
    digest = hashlib.sha256(f"{base_seed}\0{property_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def gamma_posterior_draw(rng: np.random.Generator, prior: tuple[float, float],
                         count_sum: float, n_assigned: float, size=None):
    """Draw a Poisson mean from its Gamma posterior given assigned observations.

    With ``n_assigned == 0`` this samples the prior itself.
    """
    shape, rate = prior
    return rng.gamma(shape + count_sum, 1.0 / (rate + n_assigned), size=size)


def gibbs_fit(hist: CountHistogram, config: GibbsConfig | None = None,
              init: TwoPoissonParams | None = None) -> TwoPoissonParams:
    """Posterior-mean parameters from a conjugate Gibbs sampler.

    Observations sharing a count value are exchangeable, so each sweep draws
    the number of elite observations per distinct value from a binomial
    instead of one Bernoulli per observation.  Samples are relabelled to keep
    the elite mean on top before averaging.
    """
    config = config or GibbsConfig()
    if hist.total <= 0:
        raise EmptyHistogramError("gibbs_fit needs at least one observation")
    rng = np.random.default_rng(config.seed)
    if init is None:
        init = init_params(hist)

    x = hist.values.astype(float)
    n_x = np.rint(hist.weights).astype(np.int64)
    if not np.allclose(n_x, hist.weights):
        raise ValueError("gibbs_fit needs integer histogram weights")
    log_fact = gammaln(x + 1.0)
    alpha, beta = config.weight_prior

    mu1, mu0, p = init.mu_elite, init.mu_nonelite, init.p_elite
    acc = np.zeros(3)
    for it in range(config.burn_in + config.samples):
        l1 = math.log(p) + x * math.log(mu1) - mu1 - log_fact
        l0 = math.log1p(-p) + x * math.log(mu0) - mu0 - log_fact
        resp = np.exp(l1 - np.logaddexp(l1, l0))
        k1 = rng.binomial(n_x, resp)
        k0 = n_x - k1
        c1, c0 = float(k1.sum()), float(k0.sum())
        mu1 = max(gamma_posterior_draw(rng, config.elite_prior, float(k1 @ x), c1), MU_MIN)
        mu0 = max(gamma_posterior_draw(rng, config.nonelite_prior, float(k0 @ x), c0), MU_MIN)
        p = _clip_p(rng.beta(alpha + c1, beta + c0))
        if it >= config.burn_in:
            if mu1 >= mu0:
                acc += (mu1, mu0, p)
            else:
                acc += (mu0, mu1, 1.0 - p)
    mean = acc / config.samples
    return TwoPoissonParams.from_components(mean[0], mean[1], mean[2])


# -- batch fitting and the model file -------------------------------------------

@dataclass(frozen=True)
class FittedModel:
    property_id: str
    params: TwoPoissonParams
    method: str
    loglik: float


def fit_property(property_id: str, hist: CountHistogram, method: str = "em",
                 init: TwoPoissonParams | None = None, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER,
                 gibbs: GibbsConfig | None = None) -> FittedModel:
    """Fit one property; Gibbs chains are seeded from the property id."""
    if init is None:
        init = init_params(hist)
    if method == "em":
        params, trace = em_fit(hist, init, tol=tol, max_iter=max_iter)
        ll = trace[-1]
    elif method == "gibbs":
        base = gibbs or GibbsConfig()
        config = base.centered_on(init).with_seed(property_seed(base.seed, property_id))
        params = gibbs_fit(hist, config, init)
        ll = log_likelihood(hist, params)
    else:
        raise ValueError(f"unknown fit method {method!r}")
    return FittedModel(property_id, params, method, ll)


def _fit_task(args):
    property_id, mapping, method, init, tol, max_iter, gibbs = args
    return fit_property(property_id, CountHistogram.from_mapping(mapping), method,
                        init=init, tol=tol, max_iter=max_iter, gibbs=gibbs)


def fit_many(histograms: Mapping[str, CountHistogram | Mapping[int, float]],
             method: str = "em", tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_MAX_ITER, gibbs: GibbsConfig | None = None,
             threads: int | None = None,
             inits: Mapping[str, TwoPoissonParams] | None = None) -> dict[str, FittedModel]:
    """Fit every property independently; output does not depend on ``threads``.

    Properties without an entry in ``inits`` start from :func:`init_params`.
    """
    from tim.parallel import pmap

    tasks = []
    for pid in sorted(histograms):
        h = histograms[pid]
        mapping = h.as_dict() if isinstance(h, CountHistogram) else dict(h)
        init = inits.get(pid) if inits else None
        tasks.append((pid, mapping, method, init, tol, max_iter, gibbs))
    results = pmap(_fit_task, tasks, threads=threads)
    return {m.property_id: m for m in results}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_models(path: str | os.PathLike, models: Iterable[FittedModel]) -> None:
    """Tab-separated, one record per property, sorted by property id."""
    rows = sorted(models, key=lambda m: m.property_id)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MODEL_FILE_HEADER + "\n")
        for m in rows:
            if any(c in m.property_id for c in "\t\n\r"):
                raise ValueError(f"property id {m.property_id!r} contains a tab or newline")
            p = m.params
            fh.write("\t".join([m.property_id, _fmt(p.mu_elite), _fmt(p.mu_nonelite),
                                _fmt(p.p_elite), m.method, _fmt(m.loglik)]) + "\n")


def read_models(path: str | os.PathLike) -> dict[str, FittedModel]:
    out: dict[str, FittedModel] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 tab-separated fields")
            pid, mu1, mu0, p, method, ll = parts
            out[pid] = FittedModel(pid, TwoPoissonParams(float(mu1), float(mu0), float(p)),
                                   method, float(ll))
    return out
