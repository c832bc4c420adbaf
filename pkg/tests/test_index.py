import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grounder.corpus import TableDocument
from grounder.encoder import encode, init_dual_encoder
from grounder.index import (
    DenseIndex,
    IndexError_,
    build_index,
    load_embedding_sidecar,
    load_index,
    model_fingerprint,
    save_index,
    search,
)

FP = "f" * 64


def title_corpus(titles):
    return [
        TableDocument(table_id=f"t{i}", page_title=title, headers=("h",), rows=())
        for i, title in enumerate(titles)
    ]


@pytest.fixture
def de():
    return init_dual_encoder(V=256, d=8, ngram_max=2, seed=5)


@pytest.fixture
def index(de):
    corpus = title_corpus(["apple orchard", "banana farm", "cherry grove", "date palm"])
    return build_index(de, corpus, FP)


class TestBuild:
    def test_rows_match_encoder_output(self, de, index):
        corpus = title_corpus(["apple orchard", "banana farm", "cherry grove", "date palm"])
        for i, t in enumerate(corpus):
            from grounder.corpus import linearize_table

            emb = encode(de.knowledge_encoder, linearize_table(t)).astype(np.float32)
            emb /= np.linalg.norm(emb)
            np.testing.assert_allclose(index.matrix[i], emb, atol=1e-6)

    def test_empty_corpus(self, de):
        with pytest.raises(IndexError_):
            build_index(de, [], FP)

    def test_unit_rows(self, index):
        np.testing.assert_allclose(np.linalg.norm(index.matrix, axis=1), 1.0, atol=1e-6)

    def test_sidecar_overrides(self, de):
        corpus = title_corpus(["apple", "banana"])
        emb = np.zeros(8)
        emb[3] = 2.0
        idx = build_index(de, corpus, FP, sidecar={"t1": emb / np.linalg.norm(emb)})
        expected = np.zeros(8, np.float32)
        expected[3] = 1.0
        np.testing.assert_allclose(idx.matrix[1], expected, atol=1e-7)

    def test_non_unit_rows_rejected(self):
        with pytest.raises(IndexError_, match="unit-norm"):
            DenseIndex(item_ids=("a",), matrix=np.array([[2.0, 0.0]], np.float32), fingerprint=FP)


class TestSearch:
    def test_exact_match_ranks_first(self, de, index):
        emb = encode(de.query_encoder, "x")
        # brute force instead of semantics: random-projection encoders carry
        # no meaning, so compare against a direct scan
        scores = index.matrix @ emb.astype(np.float32)
        best = int(np.argmax(scores))
        assert search(index, emb, 1).ids() == [index.item_ids[best]]

    def test_k_exceeds_n(self, index):
        emb = np.zeros(8)
        emb[0] = 1.0
        assert len(search(index, emb, 100)) == 4

    def test_bad_query_dim(self, index):
        with pytest.raises(IndexError_):
            search(index, np.ones(3), 1)

    def test_bad_k(self, index):
        with pytest.raises(ValueError):
            search(index, np.zeros(8), 0)

    def test_tie_breaks_to_insertion_order(self):
        row = np.zeros(4, np.float32)
        row[0] = 1.0
        matrix = np.tile(row, (3, 1))
        idx = DenseIndex(item_ids=("a", "b", "c"), matrix=matrix, fingerprint=FP)
        assert search(idx, row.astype(np.float64), 3).ids() == ["a", "b", "c"]


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_search_matches_brute_force_oracle(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    n = data.draw(st.integers(1, 12))
    d = 6
    M = rng.normal(size=(n, d))
    M /= np.linalg.norm(M, axis=1, keepdims=True)
    idx = DenseIndex(
        item_ids=tuple(f"t{i}" for i in range(n)),
        matrix=M.astype(np.float32),
        fingerprint=FP,
    )
    q = rng.normal(size=d)
    k = data.draw(st.integers(1, n + 2))
    got = search(idx, q, k)
    scores = idx.matrix @ q.astype(np.float32)
    order = sorted(range(n), key=lambda i: (-scores[i], i))[: min(k, n)]
    assert got.ids() == [f"t{i}" for i in order]
    for (_, score), i in zip(got, order):
        assert score == pytest.approx(float(scores[i]), abs=1e-9)


class TestPersistence:
    def test_round_trip(self, index, tmp_path):
        path = tmp_path / "index.bin"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.item_ids == index.item_ids
        assert loaded.fingerprint == FP
        np.testing.assert_array_equal(loaded.matrix, index.matrix)

    def test_fingerprint_check(self, index, tmp_path):
        path = tmp_path / "index.bin"
        save_index(index, path)
        with pytest.raises(IndexError_, match="fingerprint"):
            load_index(path, expected_fingerprint="0" * 64)
        loaded = load_index(path, expected_fingerprint="0" * 64, force=True)
        assert loaded.n == 4

    def test_matching_fingerprint_accepted(self, index, tmp_path):
        path = tmp_path / "index.bin"
        save_index(index, path)
        assert load_index(path, expected_fingerprint=FP).n == 4

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "index.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(IndexError_, match="magic"):
            load_index(path)

    def test_truncated(self, index, tmp_path):
        path = tmp_path / "index.bin"
        save_index(index, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(IndexError_, match="truncated"):
            load_index(path)

    def test_model_fingerprint_is_sha256(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"hello")
        import hashlib

        assert model_fingerprint(path) == hashlib.sha256(b"hello").hexdigest()


class TestSidecar:
    def test_load_and_normalize(self, tmp_path):
        path = tmp_path / "side.jsonl"
        path.write_text('{"id": "a", "embedding": [3.0, 4.0]}\n\n')
        out = load_embedding_sidecar(path, d=2)
        np.testing.assert_allclose(out["a"], [0.6, 0.8])

    def test_wrong_dim(self, tmp_path):
        path = tmp_path / "side.jsonl"
        path.write_text('{"id": "a", "embedding": [1.0]}\n')
        with pytest.raises(IndexError_, match="line 1"):
            load_embedding_sidecar(path, d=2)

    def test_zero_embedding(self, tmp_path):
        path = tmp_path / "side.jsonl"
        path.write_text('{"id": "a", "embedding": [0.0, 0.0]}\n')
        with pytest.raises(IndexError_, match="zero"):
            load_embedding_sidecar(path, d=2)
