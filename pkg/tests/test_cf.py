import itertools
import warnings

import numpy as np
import pytest

from conftest import FIXTURES, naive_cf_score
from tim.cf import (
    CFRanker,
    ColdEntityError,
    DuplicateRatingWarning,
    ItemModel,
    MissingModelError,
    RatingFormatError,
    RatingMatrix,
    UserModel,
    build_relevant_pairs,
    fit_all_models,
    fit_user_model,
    load_ratings,
    rank_items_for_user,
    rating_init,
    score_pair,
)
from tim.mixture import TwoPoissonParams
from tim.synthetic import block_ratings


def _params(models):
    return {k: (m.params.mu_elite, m.params.mu_nonelite, m.params.p_elite)
            for k, m in models.items()}


def _hand_models(users, items):
    um = {u: UserModel(u, TwoPoissonParams(4.5, 1.5, 0.3 + 0.1 * k)) for k, u in enumerate(users)}
    im = {i: ItemModel(i, TwoPoissonParams(4.0 + 0.2 * k, 2.0, 0.6)) for k, i in enumerate(items)}
    return um, im


class TestLoad:
    def test_single(self, tmp_path):
        p = tmp_path / "r.tsv"
        p.write_text("u1\ti1\t5\n")
        m = load_ratings(p)
        assert m.ratings == {("u1", "i1"): 5}
        assert m.by_user == {"u1": {"i1": 5}} and m.by_item == {"i1": {"u1": 5}}

    def test_timestamps_ignored(self):
        m = load_ratings(FIXTURES / "ratings_small.tsv")
        assert len(m) == 6 and m.rating("u3", "i3") == 4 and m.rating("u3", "i1") is None

    def test_out_of_scale(self, tmp_path):
        p = tmp_path / "r.tsv"
        p.write_text("u1\ti1\t5\nu1\ti2\t9\n")
        with pytest.raises(RatingFormatError, match=r":2:"):
            load_ratings(p)

    @pytest.mark.parametrize("line", ["u1 i1 5", "u1\ti1\tfive", "u1\ti1"])
    def test_malformed(self, tmp_path, line):
        p = tmp_path / "r.tsv"
        p.write_text(line + "\n")
        with pytest.raises(RatingFormatError, match=r":1:"):
            load_ratings(p)

    def test_duplicate_last_wins(self, tmp_path):
        p = tmp_path / "r.tsv"
        p.write_text("u1\ti1\t2\nu1\ti1\t5\n")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            m = load_ratings(p)
        assert m.ratings == {("u1", "i1"): 5}
        assert sum(issubclass(w.category, DuplicateRatingWarning) for w in caught) == 1


class TestRelevantPairs:
    M = RatingMatrix.from_triples([("u1", "i1", 5), ("u1", "i2", 3), ("u2", "i1", 4)])

    def test_threshold(self):
        assert build_relevant_pairs(self.M, 4) == {("u1", "i1"), ("u2", "i1")}

    def test_threshold_one(self):
        assert build_relevant_pairs(self.M, 1) == set(self.M.ratings)

    @pytest.mark.parametrize("t", [0, 6])
    def test_out_of_scale(self, t):
        with pytest.raises(ValueError):
            build_relevant_pairs(self.M, t)


class TestModels:
    def test_init(self):
        p = rating_init([5, 5, 4, 1], 4)
        assert p.p_elite == pytest.approx(0.75)
        assert p.mu_elite == pytest.approx(14 / 3)
        assert p.mu_nonelite == 1.0

    def test_single_rating(self):
        m = RatingMatrix.from_triples([("u", "i", 3)])
        params = fit_user_model(m, "u").params
        assert params.mu_elite >= params.mu_nonelite > 0

    def test_cold(self):
        m = RatingMatrix.from_triples([("u", "i", 3)])
        with pytest.raises(ColdEntityError):
            fit_user_model(m, "nobody")

    def test_recovery(self):
        rng = np.random.default_rng(21)
        n = 3000
        elite = rng.random(n) < 0.4
        rs = np.where(elite, rng.poisson(20.0, n), rng.poisson(8.0, n))
        assert rs.min() >= 1  # the seed is chosen so every draw is a valid rating
        # one item per draw, so the single user sees every rating
        m = RatingMatrix.from_triples((("u", f"i{k}", int(r)) for k, r in enumerate(rs)),
                                      r_max=int(rs.max()))
        params = fit_user_model(m, "u", threshold=14).params
        for got, want in [(params.mu_elite, 20.0), (params.mu_nonelite, 8.0), (params.p_elite, 0.4)]:
            assert abs(got - want) <= 0.15 * want


class TestScorePair:
    def test_no_support_is_zero(self):
        m = RatingMatrix.from_triples([("u1", "i1", 5)])
        um, im = _hand_models(["u1"], ["i1"])
        assert score_pair("u1", "i2", m, build_relevant_pairs(m), um, im) == 0.0

    def test_two_by_two(self):
        triples = [("u1", "i2", 5), ("u2", "i1", 4), ("u2", "i2", 5)]
        m = RatingMatrix.from_triples(triples)
        um, im = _hand_models(["u1", "u2"], ["i1", "i2"])
        rel = {("u2", "i2")}
        want = naive_cf_score("u1", "i1", m.ratings, 5, _params(um), _params(im))
        assert want != 0.0
        assert score_pair("u1", "i1", m, rel, um, im) == pytest.approx(want, abs=1e-12)

    def test_own_pair_excluded(self):
        triples = [("u1", "i1", 5), ("u1", "i2", 5), ("u2", "i1", 4), ("u2", "i2", 5)]
        m = RatingMatrix.from_triples(triples)
        um, im = _hand_models(["u1", "u2"], ["i1", "i2"])
        with_own = score_pair("u1", "i1", m, {("u2", "i2"), ("u1", "i1")}, um, im)
        without = score_pair("u1", "i1", m, {("u2", "i2")}, um, im)
        assert with_own == without

    def test_missing_model(self):
        triples = [("u1", "i2", 5), ("u2", "i1", 4), ("u2", "i2", 5)]
        m = RatingMatrix.from_triples(triples)
        um, im = _hand_models(["u1", "u2"], ["i1"])
        with pytest.raises(MissingModelError):
            score_pair("u1", "i1", m, {("u2", "i2")}, um, im)

    def test_exhaustive_small_matrices(self):
        rng = np.random.default_rng(8)
        users, items = ["u1", "u2", "u3", "u4"], ["i1", "i2", "i3", "i4"]
        for _ in range(60):
            triples = [(u, i, int(rng.integers(1, 6))) for u in users for i in items
                       if rng.random() < 0.7]
            m = RatingMatrix.from_triples(triples)
            um, im = _hand_models(users, items)
            rel = build_relevant_pairs(m, 4)
            ranker = CFRanker(m, 4, um, im)
            for u, i in itertools.product(m.users, items):
                want = naive_cf_score(u, i, m.ratings, 4, _params(um), _params(im))
                assert score_pair(u, i, m, rel, um, im) == pytest.approx(want, abs=1e-9)
                if i in ranker.item_ids:
                    assert ranker.score(u, i) == pytest.approx(want, abs=1e-9)

    def test_adding_supporting_pair_never_lowers(self):
        base = [("u1", "i2", 5), ("u2", "i1", 5), ("u2", "i2", 5), ("u1", "i3", 5), ("u3", "i1", 5)]
        m = RatingMatrix.from_triples(base)
        um, im = _hand_models(["u1", "u2", "u3"], ["i1", "i2", "i3"])
        before = score_pair("u1", "i1", m, {("u2", "i2")}, um, im)
        m2 = RatingMatrix.from_triples(base + [("u3", "i3", 5)])
        new_terms = naive_cf_score("u1", "i1", {("u1", "i3"): 5, ("u3", "i1"): 5, ("u3", "i3"): 5},
                                   4, _params(um), _params(im))
        assert new_terms > 0
        after = score_pair("u1", "i1", m2, {("u2", "i2"), ("u3", "i3")}, um, im)
        assert after >= before
        assert after == pytest.approx(before + new_terms)


@pytest.fixture(scope="module")
def blocks():
    matrix, ug, ig = block_ratings(n_users=120, n_items=60, density=0.25, seed=2)
    return matrix, ug, ig, CFRanker(matrix)


class TestRanking:
    def test_balanced_blocks_tie(self):
        # two user groups and two item groups; every rating is 5 in-group and 1 across groups
        users, items = ["u", "a1", "a2", "b1", "b2"], ["x1", "x2", "xc", "y1", "y2", "yc"]
        group = {"u": 0, "a1": 0, "a2": 0, "b1": 1, "b2": 1,
                 "x1": 0, "x2": 0, "xc": 0, "y1": 1, "y2": 1, "yc": 1}
        triples = [(v, i, 5 if group[v] == group[i] else 1) for v in users for i in items
                   if not (v == "u" and i in ("xc", "yc"))]
        m = RatingMatrix.from_triples(triples)
        um = {v: UserModel(v, TwoPoissonParams(4.5, 1.5, 0.5)) for v in users}
        im = {i: ItemModel(i, TwoPoissonParams(4.5, 1.5, 0.5)) for i in items}
        ranker = CFRanker(m, 4, um, im)
        # per-pair evidence is additive, so with equal group sizes the in-group and
        # out-group candidates collect the same multiset of log factors
        assert ranker.score("u", "xc") == pytest.approx(ranker.score("u", "yc"), abs=1e-12)
        assert ranker.score("u", "xc") != 0.0

    def test_k_one_is_argmax(self, blocks):
        matrix, _, _, ranker = blocks
        u = ranker.user_ids[0]
        full = ranker.rank_items_for_user(u, k=1000)
        assert ranker.rank_items_for_user(u, k=1).entries == full.entries[:1]

    def test_rated_everything(self):
        m = RatingMatrix.from_triples([("u1", "i1", 5), ("u1", "i2", 4), ("u2", "i1", 3)])
        assert len(CFRanker(m).rank_items_for_user("u1")) == 0

    def test_unknown_user(self, blocks):
        with pytest.raises(KeyError):
            blocks[3].rank_items_for_user("nobody")

    def test_candidates(self, blocks):
        matrix, _, _, ranker = blocks
        u = ranker.user_ids[1]
        r = ranker.rank_items_for_user(u, k=5, candidates=["i0001", "i0002"])
        assert set(r.doc_ids) <= {"i0001", "i0002"}

    def test_relabelling_symmetry(self):
        matrix, _, _ = block_ratings(n_users=30, n_items=20, density=0.4, seed=5)
        # reverse the sort order of every id so ties would break differently if ids leaked in
        ren_u = {u: f"x{999 - k:03d}" for k, u in enumerate(matrix.users)}
        ren_i = {i: f"y{999 - k:03d}" for k, i in enumerate(matrix.items)}
        renamed = RatingMatrix.from_triples((ren_u[u], ren_i[i], r)
                                            for (u, i), r in matrix.ratings.items())
        a, b = CFRanker(matrix), CFRanker(renamed)
        for u in matrix.users:
            sa = a.score_all(u)
            sb = b.score_all(ren_u[u])
            for i in matrix.items:
                assert sa[a._icol[i]] == pytest.approx(sb[b._icol[ren_i[i]]], abs=1e-9)

    def test_deterministic_and_thread_independent(self):
        matrix, _, _ = block_ratings(n_users=20, n_items=10, density=0.5, seed=6)
        one = CFRanker(matrix, threads=1)
        two = CFRanker(matrix, threads=2)
        for u in matrix.users:
            assert one.rank_items_for_user(u).entries == two.rank_items_for_user(u).entries

    def test_wrapper(self):
        matrix, _, _ = block_ratings(n_users=10, n_items=8, density=0.6, seed=1)
        u = matrix.users[0]
        assert rank_items_for_user(u, matrix, k=3).entries == \
            CFRanker(matrix).rank_items_for_user(u, k=3).entries

    def test_fit_all_models_keys(self):
        matrix, _, _ = block_ratings(n_users=6, n_items=4, density=0.8, seed=1)
        users, items, fits = fit_all_models(matrix)
        assert set(users) == set(matrix.users) and set(items) == set(matrix.items)
        assert all(k.startswith(("user:", "item:")) for k in fits)
