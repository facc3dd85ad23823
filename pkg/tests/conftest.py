import math
import itertools
from pathlib import Path

import numpy as np
import pytest

from tim.corpus import Document, build_index

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def tiny_index():
    return build_index([Document("d1", ("a", "a", "b")), Document("d2", ("b",))])


def naive_relevance(need_probs, item_probs, tables, need_prior, item_prior, prior_relevance=1.0):
    """Literal quadruple sum over E, F and every binary Y (N x T) and Z (T x N).

    Kept deliberately slow and free of any shortcut used by the library.
    """
    n_item, n_need = len(item_probs), len(need_probs)
    total = 0.0
    for E in itertools.product((0, 1), repeat=n_item):
        for F in itertools.product((0, 1), repeat=n_need):
            desc = 1.0
            for l in range(n_item):
                pe = item_probs[l] if E[l] else 1 - item_probs[l]
                pm = item_prior[l] if E[l] else 1 - item_prior[l]
                desc *= pe / pm
            for m in range(n_need):
                pf = need_probs[m] if F[m] else 1 - need_probs[m]
                pm = need_prior[m] if F[m] else 1 - need_prior[m]
                desc *= pf / pm
            for ybits in itertools.product((0, 1), repeat=n_need * n_item):
                Y = [ybits[m * n_item:(m + 1) * n_item] for m in range(n_need)]
                for zbits in itertools.product((0, 1), repeat=n_item * n_need):
                    Z = [zbits[l * n_need:(l + 1) * n_need] for l in range(n_item)]
                    joint = 1.0
                    for l in range(n_item):
                        for m in range(n_need):
                            joint *= tables[l][m][E[l]][F[m]][Y[m][l]][Z[l][m]]
                    total += joint * desc
    return prior_relevance * total


def random_joint(rng, n_item, n_need):
    t = rng.dirichlet(np.ones(16), size=(n_item, n_need))
    return t.reshape(n_item, n_need, 2, 2, 2, 2)


def _naive_log_ratio(mu1, mu0, p, r):
    # log of Pois(r; mu1) / (p Pois(r; mu1) + (1 - p) Pois(r; mu0)), straight from the pmf
    pois = lambda mu: math.exp(-mu) * mu ** r / math.factorial(r)
    return math.log(pois(mu1) / (p * pois(mu1) + (1 - p) * pois(mu0)))


def naive_cf_score(user, item, ratings, threshold, user_params, item_params):
    """Loop over every rated pair, keep the relevant supporting ones, add both log factors.

    ``ratings`` maps (user, item) -> rating; params map ids to (mu1, mu0, p).
    """
    total = 0.0
    for (u2, i2), r in ratings.items():
        if r < threshold or u2 == user or i2 == item:
            continue
        if (user, i2) not in ratings or (u2, item) not in ratings:
            continue
        total += _naive_log_ratio(*item_params[i2], ratings[(user, i2)])
        total += _naive_log_ratio(*user_params[u2], ratings[(u2, item)])
    return total
