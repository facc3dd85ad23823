import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES
from tim.evaluation import (
    Qrels,
    QrelsFormatError,
    average_precision,
    evaluate_run,
    expand_metrics,
    ndcg_at_k,
    precision_at_k,
    read_qrels,
    reciprocal_rank,
    write_qrels,
)
from tim.runs import RankedList, RunFormatError, format_run, read_run, write_run


def ranked(qid, ids):
    return RankedList(qid, [(d, float(len(ids) - k)) for k, d in enumerate(ids)])


QRELS = Qrels.from_triples([("q", "d1", 1), ("q", "d3", 1), ("q", "d2", 0)])


class TestAP:
    def test_example(self):
        assert average_precision(ranked("q", ["d1", "d2", "d3"]), QRELS) == pytest.approx(5 / 6)

    def test_perfect(self):
        assert average_precision(ranked("q", ["d1", "d3", "d2"]), QRELS) == 1.0

    def test_no_hits(self):
        assert average_precision(ranked("q", ["d2", "d9"]), QRELS) == 0.0

    def test_unretrieved_relevant_counts_as_miss(self):
        assert average_precision(ranked("q", ["d1"]), QRELS) == 0.5

    def test_undefined_without_relevant(self):
        q = Qrels.from_triples([("q", "d1", 0)])
        assert math.isnan(average_precision(ranked("q", ["d1"]), q))

    def test_depth(self):
        assert average_precision(ranked("q", ["d2", "d1", "d3"]), QRELS, depth=1) == 0.0


class TestRR:
    @pytest.mark.parametrize("ids, expected", [(["d2", "d1"], 0.5), (["d3"], 1.0), (["d2"], 0.0)])
    def test_examples(self, ids, expected):
        assert reciprocal_rank(ranked("q", ids), QRELS) == expected


class TestCutoffMetrics:
    def test_p_at_2(self):
        assert precision_at_k(ranked("q", ["d1", "d2", "d3"]), QRELS, 2) == 0.5

    def test_ndcg_ideal(self):
        q = Qrels.from_triples([("q", "a", 3), ("q", "b", 1), ("q", "c", 2)])
        assert ndcg_at_k(ranked("q", ["a", "c", "b"]), q, 3) == pytest.approx(1.0)

    def test_ndcg_single(self):
        q = Qrels.from_triples([("q", "a", 1)])
        assert ndcg_at_k(ranked("q", ["a"]), q, 1) == 1.0

    def test_ndcg_graded(self):
        q = Qrels.from_triples([("q", "a", 1), ("q", "b", 2)])
        dcg = 1.0 + 3.0 / math.log2(3)
        idcg = 3.0 + 1.0 / math.log2(3)
        assert ndcg_at_k(ranked("q", ["a", "b"]), q, 2) == pytest.approx(dcg / idcg, abs=1e-12)

    @pytest.mark.parametrize("fn", [precision_at_k, ndcg_at_k])
    def test_bad_k(self, fn):
        with pytest.raises(ValueError):
            fn(ranked("q", ["d1"]), QRELS, 0)


class TestExpand:
    def test_bare_names(self):
        assert expand_metrics(["map", "p", "ndcg@5"], [5, 10]) == ["map", "P@5", "P@10", "ndcg@5"]

    def test_unknown(self):
        with pytest.raises(ValueError):
            expand_metrics(["bpref"])


class TestEvaluateRun:
    def test_committed_fixture(self):
        rep = evaluate_run(FIXTURES / "eval_run.txt", FIXTURES / "eval_qrels.txt",
                           metrics=["map", "mrr", "p", "ndcg"], k_values=[2, 3])
        q1, q2 = rep.per_query["q1"], rep.per_query["q2"]
        assert q1["map"] == pytest.approx(5 / 6, abs=1e-12)
        assert q1["mrr"] == 1.0 and q2["mrr"] == 0.5
        assert q1["P@2"] == 0.5 and q2["P@2"] == 0.5
        assert q1["ndcg@3"] == pytest.approx(2.5 / (3.0 + 1.0 / math.log2(3)), abs=1e-12)
        assert q2["ndcg@3"] == pytest.approx(1.0 / math.log2(3), abs=1e-12)
        assert rep.means["map"] == pytest.approx((5 / 6 + 0.5) / 2, abs=1e-12)
        assert rep.means["mrr"] == 0.75
        assert rep.undefined == ["q3"]

    def test_map_mean(self):
        qrels = Qrels.from_triples([("a", "x", 1), ("b", "y", 1)])
        run = {"a": ranked("a", ["x"]), "b": ranked("b", ["z", "y"])}
        assert evaluate_run(run, qrels).means["map"] == 0.75

    def test_empty_run(self):
        rep = evaluate_run({}, QRELS, metrics=["map", "mrr", "p"], k_values=[5])
        assert all(v == 0.0 for v in rep.means.values())
        assert rep.warnings

    def test_unjudged_query_skipped(self):
        rep = evaluate_run({"zz": ranked("zz", ["d1"]), "q": ranked("q", ["d1"])}, QRELS)
        assert list(rep.per_query) == ["q"]
        assert any("zz" in w for w in rep.warnings)

    def test_resorts_run(self, tmp_path):
        # a run listed out of score order is re-sorted before scoring
        p = tmp_path / "r.txt"
        p.write_text("q Q0 d2 1 0.5 x\nq Q0 d1 2 0.9 x\nq Q0 d3 3 0.9 x\n")
        assert read_run(p)["q"].doc_ids == ["d1", "d3", "d2"]
        assert evaluate_run(p, QRELS).per_query["q"]["map"] == 1.0

    def test_deterministic(self):
        args = (FIXTURES / "eval_run.txt", FIXTURES / "eval_qrels.txt", ["map", "ndcg@3"])
        assert evaluate_run(*args).format() == evaluate_run(*args).format()

    def test_format(self):
        rep = evaluate_run(FIXTURES / "eval_run.txt", FIXTURES / "eval_qrels.txt")
        lines = rep.format().splitlines()
        assert lines[0] == "map\tq1\t0.8333"
        assert lines[-1] == "mrr\tall\t0.7500"


class TestFiles:
    def test_qrels_roundtrip(self, tmp_path):
        p = tmp_path / "q.txt"
        write_qrels(p, QRELS)
        assert read_qrels(p).judgments == QRELS.judgments

    def test_qrels_duplicate(self, tmp_path):
        p = tmp_path / "q.txt"
        p.write_text("q 0 d1 1\nq 0 d1 0\n")
        with pytest.raises(QrelsFormatError, match=":2:"):
            read_qrels(p)

    def test_run_roundtrip(self, tmp_path):
        rl = RankedList("q", [("d1", 1 / 3), ("d2", -2.5e-17)])
        p = tmp_path / "r.txt"
        write_run(p, [rl], tag="t")
        assert read_run(p)["q"] == rl
        assert format_run([rl], "t").splitlines()[0] == "q Q0 d1 1 0.3333333333333333 t"

    def test_run_bad_line(self, tmp_path):
        p = tmp_path / "r.txt"
        p.write_text("q Q0 d1 1 0.5\n")
        with pytest.raises(RunFormatError):
            read_run(p)

    def test_ranked_list_checks(self):
        with pytest.raises(ValueError):
            RankedList("q", [("a", 1.0), ("a", 0.5)])
        with pytest.raises(ValueError):
            RankedList("q", [("a", 0.5), ("b", 1.0)])


@given(st.permutations([f"d{k}" for k in range(8)]),
       st.sets(st.sampled_from([f"d{k}" for k in range(10)]), min_size=1),
       st.floats(0.01, 100))
@settings(max_examples=80, deadline=None)
def test_bounds_and_scale_invariance(order, relevant, scale):
    qrels = Qrels.from_triples(("q", d, 1) for d in sorted(relevant))
    base = RankedList("q", [(d, float(len(order) - k)) for k, d in enumerate(order)])
    scaled = RankedList("q", [(d, s * scale) for d, s in base.entries])
    for fn in (average_precision, reciprocal_rank):
        v = fn(base, qrels)
        assert 0.0 <= v <= 1.0 and v == fn(scaled, qrels)
    for k in (1, 5, 10):
        for fn in (precision_at_k, ndcg_at_k):
            v = fn(base, qrels, k)
            assert 0.0 <= v <= 1.0 + 1e-12 and v == fn(scaled, qrels, k)
