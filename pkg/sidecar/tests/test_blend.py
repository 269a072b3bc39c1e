import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdm_sidecar.prompts import (ENHANCED_WEIGHT, PromptSpec, blend_embeddings,
                                 embed_tokens, empty_embedding, token_embedding)


class TestPromptSpec:
    def test_default_weights_are_unit(self):
        p = PromptSpec(tokens=["a", "cat"])
        assert p.weights == [1.0, 1.0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="weights"):
            PromptSpec(tokens=["a", "b"], weights=[1.0])

    def test_nonpositive_weight(self):
        with pytest.raises(ValueError, match="positive"):
            PromptSpec(tokens=["a"], weights=[0.0])

    def test_enhanced_default_constant(self):
        assert ENHANCED_WEIGHT == pytest.approx(1.21)

    def test_from_dict_round_trip(self):
        p = PromptSpec.from_dict({"tokens": ["spiky", "horn"],
                                  "weights": [1.21, 1.0],
                                  "negative_prompt": ["smooth"],
                                  "cfg_scale": 50})
        assert p.cfg_scale == 50.0
        assert p.negative_prompt == ["smooth"]


class TestEmbeddings:
    def test_deterministic_across_calls(self):
        assert np.array_equal(token_embedding("horn"), token_embedding("horn"))

    def test_distinct_tokens_distinct_vectors(self):
        assert not np.array_equal(token_embedding("horn"), token_embedding("cat"))

    def test_empty_embedding_position_aligned(self):
        e0 = empty_embedding(3)
        assert e0.shape == embed_tokens(["a", "b", "c"]).shape
        assert np.array_equal(e0[0], e0[2])


class TestBlend:
    def test_identity_at_unit_weight(self):
        e = embed_tokens(["a", "b"])
        e0 = empty_embedding(2)
        assert np.array_equal(blend_embeddings(e, e0, [1.0, 1.0]), e)

    def test_empty_text_limit_at_zero(self):
        e = embed_tokens(["a", "b"])
        e0 = empty_embedding(2)
        assert np.array_equal(blend_embeddings(e, e0, [0.0, 0.0]), e0)

    def test_hand_case(self):
        out = blend_embeddings(np.array([[2.0, 4.0]]), np.zeros((1, 2)), [1.21])
        np.testing.assert_array_equal(out, [[2.42, 4.84]])

    def test_mixed_weights_act_per_token(self):
        e = embed_tokens(["a", "b"])
        e0 = empty_embedding(2)
        out = blend_embeddings(e, e0, [1.0, 0.0])
        assert np.array_equal(out[0], e[0])
        assert np.array_equal(out[1], e0[1])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shapes differ"):
            blend_embeddings(np.zeros((2, 4)), np.zeros((3, 4)), [1.0, 1.0])
        with pytest.raises(ValueError, match="weight vector"):
            blend_embeddings(np.zeros((2, 4)), np.zeros((2, 4)), [1.0])

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(1, 6), d=st.integers(1, 8),
           seed=st.integers(0, 2 ** 31 - 1),
           a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_linearity_in_s(self, n, d, seed, a, b):
        rng = np.random.default_rng(seed)
        e, e0 = rng.standard_normal((2, n, d))
        sa, sb = rng.standard_normal((2, n))
        lhs = blend_embeddings(e, e0, a * sa + b * sb)
        rhs = (a * (blend_embeddings(e, e0, sa) - e0)
               + b * (blend_embeddings(e, e0, sb) - e0) + e0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)
