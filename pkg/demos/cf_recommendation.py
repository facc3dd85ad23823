"""
Recommending items by relevance propagation
============================================

Each user gets a 2-Poisson model of the ratings they give and each item one
of the ratings it receives.  A known-relevant pair (u', i') supports the
candidate (u, i) when u rated i' and u' rated i; the two ratings are scored
under the item model of i' and the user model of u'.

The planted two-block matrix below is where that additive evidence runs
into trouble: with equal-sized groups, in-group and out-group candidates
collect the same mix of high- and low-rating factors, and the rating
histograms (1-2 versus 4-5) are under-dispersed, so the mixture fits
collapse toward a single Poisson.
"""

import numpy as np

from tim.cf import CFRanker, RatingMatrix
from tim.synthetic import block_ratings

matrix, user_group, item_group = block_ratings(200, 100, 0.2, seed=0)
ranker = CFRanker(matrix)

u = ranker.user_ids[0]
p = ranker.user_models[u].params
print(f"{len(matrix)} ratings; model of {u}: mu1={p.mu_elite:.2f} mu0={p.mu_nonelite:.2f} "
      f"p={p.p_elite:.2f}")
top = ranker.rank_items_for_user(u, k=10)
print("top-10 for", u, "(group", user_group[u], "):",
      " ".join(f"{i}[{item_group[i]}]" for i in top.doc_ids))

aucs = []
for user in ranker.user_ids:
    scores = dict(zip(ranker.item_ids, ranker.score_all(user)))
    unrated = [i for i in ranker.item_ids if i not in matrix.by_user[user]]
    own = np.array([scores[i] for i in unrated if item_group[i] == user_group[user]])
    other = np.array([scores[i] for i in unrated if item_group[i] != user_group[user]])
    aucs.append(np.mean(own[:, None] > other[None, :]))
print(f"mean in-group vs out-group AUC over users: {np.mean(aucs):.3f}")

# With one-sided evidence the propagation does what it should: here every
# rating is either missing or high, and a user's unrated in-group items are
# the only ones reachable through relevant pairs.
rng = np.random.default_rng(1)
triples = []
for uu in range(40):
    for ii in range(20):
        if (uu < 20) == (ii < 10) and rng.random() < 0.5:
            triples.append((f"u{uu:02d}", f"i{ii:02d}", int(rng.choice([1, 4, 5], p=[0.2, 0.4, 0.4]))))
one_sided = CFRanker(RatingMatrix.from_triples(triples))
ranked = one_sided.rank_items_for_user("u00", k=20)
print("one-sided blocks, u00:", " ".join(f"{i}:{s:.2f}" for i, s in ranked.entries[:8]))
