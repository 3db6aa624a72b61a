"""Backend contracts: determinism, dimensions, tags, failure modes."""

import numpy as np
import pytest

from embed_exporter import (
    HashedNgramBackend,
    ModelLoadError,
    SentenceTransformerBackend,
    resolve_backend,
)

TEXTS = [
    "The weather is beautiful today.",
    "机器翻译不断进步。",
    "Une tasse de café serait agréable.",
    "a",
    "",
]


class TestHashedNgramBackend:
    def test_tag_and_dim(self):
        backend = HashedNgramBackend("hashed-ngram:64")
        assert backend.dim == 64
        assert backend.tag == "hashed-ngram:64@v1"

    def test_explicit_matching_revision(self):
        assert HashedNgramBackend("hashed-ngram:16", "v1").tag == "hashed-ngram:16@v1"

    @pytest.mark.parametrize("model_id", [
        "hashed-ngram:", "hashed-ngram:abc", "hashed-ngram:0",
        "hashed-ngram:-4", "hashed-ngram:99999",
    ])
    def test_bad_dimension(self, model_id):
        with pytest.raises(ModelLoadError):
            HashedNgramBackend(model_id)

    def test_unknown_revision(self):
        with pytest.raises(ModelLoadError):
            HashedNgramBackend("hashed-ngram:64", "v2")

    def test_deterministic_across_instances(self):
        a = HashedNgramBackend("hashed-ngram:128").encode(TEXTS)
        b = HashedNgramBackend("hashed-ngram:128").encode(TEXTS)
        assert np.array_equal(a, b)

    def test_identical_texts_identical_vectors(self):
        out = HashedNgramBackend("hashed-ngram:128").encode(["same text", "same text"])
        assert np.array_equal(out[0], out[1])

    def test_distinct_texts_differ(self):
        out = HashedNgramBackend("hashed-ngram:128").encode(["left text", "right text"])
        assert not np.array_equal(out[0], out[1])

    def test_unit_norm_nonempty(self):
        out = HashedNgramBackend("hashed-ngram:128").encode(TEXTS[:4])
        norms = np.linalg.norm(out, axis=1)
        assert np.max(np.abs(norms - 1.0)) <= 1e-12

    def test_empty_text_hashes_to_zero(self):
        out = HashedNgramBackend("hashed-ngram:128").encode([""])
        assert np.array_equal(out[0], np.zeros(128))

    def test_shape(self):
        out = HashedNgramBackend("hashed-ngram:32").encode(TEXTS)
        assert out.shape == (len(TEXTS), 32)

    def test_no_sequence_limit(self):
        backend = HashedNgramBackend("hashed-ngram:32")
        assert backend.exceeds_limit("x" * 100_000) is False


class TestResolveBackend:
    def test_hashed_scheme_dispatch(self):
        assert isinstance(resolve_backend("hashed-ngram:64"), HashedNgramBackend)

    def test_transformer_load_failure(self, monkeypatch):
        # A hub id that cannot exist fails offline (no connection) and
        # online (unknown repo); either way it must surface as
        # ModelLoadError, not a raw crash.
        monkeypatch.setenv("HF_HUB_OFFLINE", "1")
        monkeypatch.setenv("TRANSFORMERS_OFFLINE", "1")
        with pytest.raises(ModelLoadError):
            SentenceTransformerBackend(
                "no-such-org/no-such-embedding-model", revision="main")
