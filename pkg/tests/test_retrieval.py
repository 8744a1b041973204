"""BM25 scoring, segmentation, truncation-max dense scoring and search."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexforge.errors import EmptyCorpus, UnknownDoc, ZeroVector
from lexforge.retrieval import (
    Bm25Index,
    Bm25Params,
    SegmentConfig,
    bm25_score,
    dense_score,
    search,
    segment,
    segment_count,
    tokenize_char_bigrams,
    tokenize_whitespace,
)

from oracles import bm25_oracle, window_oracle


class TestTokenizers:
    def test_char_bigrams(self):
        assert tokenize_char_bigrams("abcd") == ["ab", "bc", "cd"]
        assert tokenize_char_bigrams("盗窃 财物") == ["盗窃", "窃财", "财物"]
        assert tokenize_char_bigrams("x") == ["x"]
        assert tokenize_char_bigrams("") == []

    def test_whitespace(self):
        assert tokenize_whitespace("The Quick fox") == ["the", "quick", "fox"]


class TestBm25:
    def test_single_doc_hand_value(self):
        # one doc, query term once, |d| = avgdl: score reduces to the idf,
        # ln(1 + 0.5/1.5) = ln(4/3)
        index = Bm25Index.build({"d1": "alpha beta gamma"}, "whitespace")
        score = bm25_score(["alpha"], "d1", index)
        assert score == pytest.approx(math.log(4 / 3), abs=1e-12)
        assert score == pytest.approx(0.28768, abs=1e-5)

    def test_absent_term_contributes_zero(self):
        index = Bm25Index.build({"d1": "alpha beta"}, "whitespace")
        assert bm25_score(["zeta"], "d1", index) == 0.0

    def test_k1_irrelevant_at_zero_tf(self):
        index = Bm25Index.build({"d1": "alpha"}, "whitespace")
        a = bm25_score(["missing"], "d1", index, Bm25Params(k1=1.2))
        b = bm25_score(["missing"], "d1", index, Bm25Params(k1=2.4))
        assert a == b == 0.0

    def test_five_doc_corpus_matches_formula(self):
        docs = {
            "d1": "the cat sat on the mat",
            "d2": "the dog chased the cat",
            "d3": "birds fly over the mat",
            "d4": "cat and dog and bird",
            "d5": "completely unrelated words here",
        }
        index = Bm25Index.build(docs, "whitespace")
        tokens = {d: tokenize_whitespace(t) for d, t in docs.items()}
        params = Bm25Params()
        for query in (["cat"], ["the", "cat"], ["dog", "mat", "bird"]):
            for doc_id in docs:
                expected = bm25_oracle(query, tokens, doc_id, params.k1, params.b)
                got = bm25_score(query, doc_id, index, params)
                assert got == pytest.approx(expected, abs=1e-9), (query, doc_id)

    def test_unknown_doc(self):
        index = Bm25Index.build({"d1": "x y"}, "whitespace")
        with pytest.raises(UnknownDoc):
            bm25_score(["x"], "ghost", index)

    def test_monotonic_in_tf(self):
        # same doc length, increasing tf of the query term
        docs = {
            "a": "q x x x", "b": "q q x x", "c": "q q q x",
        }
        index = Bm25Index.build(docs, "whitespace")
        scores = [bm25_score(["q"], d, index) for d in ("a", "b", "c")]
        assert scores[0] < scores[1] < scores[2]

    def test_idf_decreases_with_df(self):
        rare = Bm25Index.build({"a": "q x", "b": "y z", "c": "w v"}, "whitespace")
        common = Bm25Index.build({"a": "q x", "b": "q z", "c": "q v"}, "whitespace")
        assert rare.idf("q") > common.idf("q")

    def test_index_save_load(self, tmp_path):
        index = Bm25Index.build({"d1": "盗窃财物", "d2": "交通肇事"})
        path = tmp_path / "index.json"
        index.save(path)
        loaded = Bm25Index.load(path)
        assert loaded.term_freqs == index.term_freqs
        assert loaded.avgdl == index.avgdl
        assert bm25_score(["盗窃"], "d1", loaded) == bm25_score(["盗窃"], "d1", index)


class TestSegment:
    def test_ceiling_arithmetic(self):
        cfg = SegmentConfig(max_len=2048, stride=2048)
        segments = segment("x" * 5000, cfg)
        assert [len(s) for s in segments] == [2048, 2048, 904]

    def test_short_text_identity(self):
        cfg = SegmentConfig(max_len=2048)
        assert segment("abc", cfg) == ["abc"]

    def test_overlapping_windows(self):
        cfg = SegmentConfig(max_len=2048, stride=1024)
        assert len(segment("x" * 4096, cfg)) == 3
        assert segment_count(4096, cfg) == 3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            segment("", SegmentConfig())

    def test_stride_validation(self):
        with pytest.raises(ValueError):
            SegmentConfig(max_len=10, stride=11)
        with pytest.raises(ValueError):
            SegmentConfig(max_len=0)

    @given(st.integers(1, 500), st.integers(1, 80), st.integers(1, 80))
    @settings(max_examples=120, deadline=None)
    def test_window_enumeration_oracle(self, length, max_len, stride):
        if stride > max_len:
            stride = max_len
        cfg = SegmentConfig(max_len=max_len, stride=stride)
        text = "a" * length
        segments = segment(text, cfg)
        starts = window_oracle(length, max_len, stride)
        assert len(segments) == len(starts) == segment_count(length, cfg)
        for s, seg in zip(starts, segments):
            assert seg == text[s:s + max_len]

    @given(st.text(min_size=1, max_size=400), st.integers(1, 64))
    @settings(max_examples=80, deadline=None)
    def test_concatenation_invariance(self, text, max_len):
        cfg = SegmentConfig(max_len=max_len)  # stride defaults to max_len
        assert "".join(segment(text, cfg)) == text


class _StubEmbedder:
    """Maps each text to a fixed vector via a lookup; dim 3."""

    dim = 3

    def __init__(self, table):
        self.table = table

    def embed(self, texts):
        return np.array([self.table[t] for t in texts], dtype=float)


class TestDenseScore:
    def test_max_over_segments(self):
        cfg = SegmentConfig(max_len=2, stride=2)
        table = {
            "aa": [0.2, 1.0, 0.0], "bb": [0.9, 0.2, 0.0], "cc": [0.5, 0.5, 0.0],
        }
        embedder = _StubEmbedder(table)
        query = np.array([1.0, 0.0, 0.0])
        cosines = {t: np.dot(v, query) / np.linalg.norm(v)
                   for t, v in table.items()}
        score = dense_score(query, "aabbcc", embedder, cfg)
        assert score == pytest.approx(max(cosines.values()))

    def test_single_segment_equals_cosine(self):
        embedder = _StubEmbedder({"ab": [1.0, 1.0, 0.0]})
        query = np.array([1.0, 0.0, 0.0])
        score = dense_score(query, "ab", embedder, SegmentConfig(max_len=10))
        assert score == pytest.approx(1 / math.sqrt(2))

    def test_brute_force_oracle(self):
        from lexforge.training import ToyEmbedder
        rng = np.random.default_rng(8)
        embedder = ToyEmbedder(dim=12, hash_buckets=512, seed=3)
        alphabet = "某盗窃抢劫财物被告人驾驶车辆伤害现场证据一二三四五"
        for _ in range(40):
            length = int(rng.integers(20, 300))
            text = "".join(rng.choice(list(alphabet), size=length))
            query = "".join(rng.choice(list(alphabet), size=12))
            cfg = SegmentConfig(max_len=int(rng.integers(8, 64)),
                                stride=int(rng.integers(4, 8)))
            query_vec = embedder.embed([query])[0]
            got = dense_score(query_vec, text, embedder, cfg)
            best = -2.0
            for seg in segment(text, cfg):
                v = embedder.embed([seg])[0]
                best = max(best, float(np.dot(v, query_vec)
                                       / (np.linalg.norm(v) * np.linalg.norm(query_vec))))
            assert got == pytest.approx(best, abs=1e-12)

    def test_zero_query_rejected(self):
        embedder = _StubEmbedder({"ab": [1.0, 0.0, 0.0]})
        with pytest.raises(ZeroVector):
            dense_score(np.zeros(3), "ab", embedder, SegmentConfig())


class TestSearch:
    def _corpus(self, n=100):
        return {f"c{i:03d}": f"词{i} " + "公共文本" * 3 for i in range(n)}

    def test_pool_of_100_top_30(self):
        corpus = self._corpus(100)
        results = search("词5 公共", corpus, scorer="bm25", k=30)
        assert len(results) == 30
        scores = [s for _, s in results]
        assert scores == sorted(scores, reverse=True)

    def test_k_clamps_to_pool(self):
        corpus = self._corpus(4)
        assert len(search("词1", corpus, k=30)) == 4

    def test_tie_break_by_case_id(self):
        corpus = {"b": "same text", "a": "same text", "c": "same text"}
        results = search("same", corpus, scorer="bm25", k=3,
                         tokenizer_name="whitespace")
        assert [cid for cid, _ in results] == ["a", "b", "c"]

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            search("q", {}, k=1)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            search("q", {"a": "x"}, k=0)

    def test_deterministic_across_calls(self):
        corpus = self._corpus(50)
        a = search("词7 公共文本", corpus, k=20)
        b = search("词7 公共文本", corpus, k=20)
        assert a == b

    def test_dense_search(self):
        from lexforge.training import ToyEmbedder
        embedder = ToyEmbedder(dim=16, hash_buckets=1024, seed=0)
        corpus = {"c1": "被告人盗窃电动车", "c2": "被告人醉酒驾驶汽车",
                  "c3": "完全无关的内容文字"}
        results = search("盗窃电动车的案件", corpus, scorer="dense", k=3,
                         embedder=embedder)
        assert len(results) == 3
        assert results[0][0] == "c1"

    def test_dense_requires_embedder(self):
        with pytest.raises(ValueError):
            search("q", {"a": "x"}, scorer="dense", k=1)

    def test_prebuilt_index_reused(self):
        corpus = self._corpus(10)
        index = Bm25Index.build(corpus)
        direct = search("词3", corpus, k=5)
        via_index = search("词3", corpus, k=5, index=index)
        assert direct == via_index
