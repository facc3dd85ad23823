import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from tim.corpus import (
    CorpusFormatError,
    Document,
    EmptyCorpusError,
    InvertedIndex,
    build_index,
    doc_tfs,
    ingest_corpus,
    read_topics,
    s_stem,
    term_stats,
    tokenize,
)


class TestTokenize:
    def test_examples(self):
        assert tokenize("The Quick-brown FOX") == ["the", "quick", "brown", "fox"]
        assert tokenize("") == []
        assert tokenize("TREC-8 topics 401") == ["trec", "8", "topics", "401"]

    def test_flags(self):
        assert tokenize("The cats and the ponies", stopwords={"the", "and"}) == ["cats", "ponies"]
        assert tokenize("The cats and the ponies", stem=True) == ["the", "cat", "and", "the", "pony"]

    def test_s_stemmer(self):
        assert [s_stem(w) for w in ["queries", "glasses", "bus", "dogs", "is"]] == \
            ["query", "glasse", "bus", "dog", "is"]


class TestIngest:
    def test_jsonl(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id":"d1","text":"a b"}\n')
        assert list(ingest_corpus(p, "jsonl")) == [Document("d1", ("a", "b"))]

    def test_duplicate_names_line(self, tmp_path):
        p = tmp_path / "c.jsonl"
        lines = [json.dumps({"id": f"d{i}", "text": "x"}) for i in range(1, 7)]
        lines.append(json.dumps({"id": "d3", "text": "y"}))
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorpusFormatError, match=r":7: duplicate"):
            list(ingest_corpus(p))

    def test_malformed(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id":"d1","text":"a"}\n{"id": 5}\nnot json\n')
        with pytest.raises(CorpusFormatError, match=r":2:"):
            list(ingest_corpus(p))

    def test_unknown_format(self, tmp_path):
        with pytest.raises(CorpusFormatError):
            ingest_corpus(tmp_path / "x", "csv")

    def test_trec_sgml(self, fixtures_dir):
        docs = list(ingest_corpus(fixtures_dir / "docs.sgml", "trec-sgml"))
        assert [d.doc_id for d in docs] == ["FT911-1", "FT911-2"]
        assert docs[0].tokens == ("foreign", "minorities", "in", "germany")
        assert docs[1].tokens == ("second", "text", "continues", "here")

    def test_trec_sgml_missing_docno(self, tmp_path):
        p = tmp_path / "bad.sgml"
        p.write_text("<DOC>\n<TEXT>x</TEXT>\n</DOC>\n")
        with pytest.raises(CorpusFormatError, match=r":1:"):
            list(ingest_corpus(p, "trec"))

    def test_topics_title_only(self, fixtures_dir):
        topics = read_topics(fixtures_dir / "topics6.txt")
        assert topics == [("401", ["foreign", "minorities", "germany"]),
                          ("402", ["minorities", "rights"])]

    def test_topics_title_with_closing_tags(self, tmp_path):
        p = tmp_path / "t.xml"
        p.write_text("<top><num>301</num><title>foreign minorities</title><desc>x</desc></top>")
        assert read_topics(p) == [("301", ["foreign", "minorities"])]

    def test_topics_tsv(self, tmp_path):
        p = tmp_path / "q.tsv"
        p.write_text("q1\tForeign Minorities\nq2\train\n")
        assert read_topics(p) == [("q1", ["foreign", "minorities"]), ("q2", ["rain"])]


class TestIndex:
    def test_postings_and_stats(self, tiny_index):
        idx = tiny_index
        assert idx.postings("a") == [("d1", 2)]
        assert idx.postings("b") == [("d1", 1), ("d2", 1)]
        assert idx.N == 2
        assert idx.collection_freq["a"] == 2 and idx.df("a") == 1
        assert idx.doc_lengths == {"d1": 3, "d2": 1}

    def test_term_stats(self, tiny_index):
        s = term_stats(tiny_index, "a")
        assert (s.df, s.tf_histogram) == (1, {0: 1, 2: 1})
        unseen = term_stats(tiny_index, "zzz")
        assert (unseen.df, unseen.tf_histogram) == (0, {0: 2})
        assert sum(s.tf_histogram.values()) == 2

    def test_term_in_every_doc_has_empty_zero_bucket(self, tiny_index):
        assert term_stats(tiny_index, "b").tf_histogram == {0: 0, 1: 2}

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpusError):
            build_index([])

    def test_duplicate_ids(self):
        with pytest.raises(CorpusFormatError):
            build_index([Document("d", ("a",)), Document("d", ("b",))])

    def test_doc_tfs(self, tiny_index):
        assert doc_tfs(tiny_index, "d1", ["a", "b", "c"]) == {"a": 2, "b": 1}
        assert doc_tfs(tiny_index, "d2", ["a", "b"]) == {"b": 1}

    def test_save_load_roundtrip(self, tiny_index, tmp_path):
        p = tmp_path / "i.idx"
        tiny_index.save(p)
        again = InvertedIndex.load(p)
        assert again.dumps() == tiny_index.dumps()
        assert again.postings("b") == tiny_index.postings("b")
        assert again.doc_lengths == tiny_index.doc_lengths

    def test_file_layout(self, tiny_index):
        assert tiny_index.dumps() == (
            "tim-index\t1\t2\t2\n"
            "d1\t3\n"
            "d2\t1\n"
            "a\t1\t2\n"
            "b\t2\t2\n"
            "0:2\n"
            "0:1 1:1\n"
        )

    def test_load_rejects_garbage(self, tmp_path):
        p = tmp_path / "x"
        p.write_text("hello\n")
        with pytest.raises(CorpusFormatError):
            InvertedIndex.load(p)


docs_strategy = st.lists(
    st.lists(st.sampled_from(list("abcdefg")), min_size=1, max_size=12),
    min_size=1, max_size=15)


@given(docs_strategy)
@settings(max_examples=60, deadline=None)
def test_index_invariants_and_roundtrip(token_lists):
    docs = [Document(f"d{i}", tuple(t)) for i, t in enumerate(token_lists)]
    idx = build_index(docs)
    rebuilt = idx.doc_term_frequencies()
    for d in docs:
        assert rebuilt[d.doc_id] == Counter(d.tokens)
    for term in idx.vocabulary:
        post = idx.postings(term)
        assert len(post) <= idx.N
        assert sum(tf for _, tf in post) == idx.collection_freq[term]
        assert all(doc in idx.doc_lengths for doc, _ in post)
        stats = term_stats(idx, term)
        assert stats.tf_histogram[0] == idx.N - stats.df
        assert sum(stats.tf_histogram.values()) == idx.N
    # deterministic serialization
    assert build_index(docs).dumps() == idx.dumps()
