"""Joint pmf estimation, DTM construction, and product-alphabet encoding.

Core claims:
    - estimate_joint counts, smooths, and normalizes exactly as specified
    - every DTM has top singular triple (1, sqrt(P_A), sqrt(P_B))
    - product distributions yield rank-one DTMs
    - the product encoding is a bijection
"""

import numpy as np
import pytest

from fairmaxcorr.errors import InputError
from fairmaxcorr.probability import (
    Dtm,
    JointPmf,
    ProductEncoding,
    build_dtm,
    estimate_joint,
    product_variable,
)

from conftest import random_joint


class TestJointPmf:
    def test_marginals_derived(self):
        j = JointPmf(np.array([[0.1, 0.2], [0.3, 0.4]]))
        np.testing.assert_allclose(j.marginal_a, [0.3, 0.7])
        np.testing.assert_allclose(j.marginal_b, [0.4, 0.6])
        assert j.card_a == j.card_b == 2

    def test_rejects_negative_entries(self):
        with pytest.raises(InputError):
            JointPmf(np.array([[0.6, -0.1], [0.3, 0.2]]))

    def test_rejects_wrong_total(self):
        with pytest.raises(InputError):
            JointPmf(np.array([[0.5, 0.2], [0.2, 0.2]]))

    def test_rejects_non_table(self):
        with pytest.raises(InputError):
            JointPmf(np.array([0.5, 0.5]))


class TestEstimateJoint:
    def test_direct_counting(self):
        j = estimate_joint([(0, 0), (1, 1)], 2, 2)
        np.testing.assert_allclose(j.probs, [[0.5, 0.0], [0.0, 0.5]])

    def test_smoothing_arithmetic(self):
        # (count + 1) / (1 + 4) for a single observed pair
        j = estimate_joint([(0, 0)], 2, 2, smoothing=1.0)
        np.testing.assert_allclose(j.probs, [[0.4, 0.2], [0.2, 0.2]])
        assert np.all(j.probs > 0)

    def test_law_of_large_numbers(self):
        rng = np.random.default_rng(0)
        pairs = rng.integers(0, 2, size=(100_000, 2))
        j = estimate_joint(pairs, 2, 2)
        np.testing.assert_allclose(j.probs, 0.25, atol=0.01)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        pairs = rng.integers(0, 3, size=(500, 2))
        j1 = estimate_joint(pairs, 3, 3, smoothing=0.5)
        j2 = estimate_joint(pairs[rng.permutation(500)], 3, 3, smoothing=0.5)
        np.testing.assert_array_equal(j1.probs, j2.probs)

    def test_input_errors(self):
        with pytest.raises(InputError):
            estimate_joint([], 2, 2)
        with pytest.raises(InputError):
            estimate_joint([(0, 2)], 2, 2)
        with pytest.raises(InputError):
            estimate_joint([(-1, 0)], 2, 2)
        with pytest.raises(InputError):
            estimate_joint([(0, 0)], 2, 2, smoothing=-0.1)


class TestBuildDtm:
    def test_uniform_independent(self):
        dtm = build_dtm(JointPmf(np.full((2, 2), 0.25)))
        np.testing.assert_allclose(dtm.matrix, 0.5)

    def test_perfect_correlation_is_identity(self):
        dtm = build_dtm(JointPmf(np.diag([0.5, 0.5])))
        np.testing.assert_allclose(dtm.matrix, np.eye(2), atol=1e-15)

    def test_entrywise_definition(self):
        dtm = build_dtm(JointPmf(np.array([[0.4, 0.1], [0.1, 0.4]])))
        np.testing.assert_allclose(dtm.matrix, [[0.8, 0.2], [0.2, 0.8]])

    def test_zero_marginal_rows_are_zero(self):
        j = JointPmf(np.array([[0.5, 0.0], [0.5, 0.0]]))
        dtm = build_dtm(j)
        np.testing.assert_array_equal(dtm.matrix[1], 0.0)
        # consistency B sqrt(P_A) = sqrt(P_B) still holds with zero cells
        np.testing.assert_allclose(dtm.matrix @ dtm.sqrt_marginal_a, dtm.sqrt_marginal_b)

    def test_top_singular_triple_random_joints(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            j = JointPmf(random_joint(rng))
            dtm = build_dtm(j)
            u, s, vt = np.linalg.svd(dtm.matrix)
            assert abs(s[0] - 1.0) < 1e-9
            sign = np.sign(vt[0] @ dtm.sqrt_marginal_a)
            np.testing.assert_allclose(sign * vt[0], dtm.sqrt_marginal_a, atol=1e-9)
            np.testing.assert_allclose(sign * u[:, 0], dtm.sqrt_marginal_b, atol=1e-9)

    def test_product_distribution_is_rank_one(self):
        rng = np.random.default_rng(3)
        pa = rng.dirichlet(np.ones(4))
        pb = rng.dirichlet(np.ones(3))
        dtm = build_dtm(JointPmf(np.outer(pa, pb)))
        s = np.linalg.svd(dtm.matrix, compute_uv=False)
        assert abs(s[0] - 1.0) < 1e-12
        assert np.all(np.abs(s[1:]) < 1e-12)

    def test_dtm_validation(self):
        with pytest.raises(InputError):
            Dtm(np.eye(2), np.array([0.5, 0.5]), np.array([1.0, 0.0]))


class TestProductVariable:
    def test_index_arithmetic(self):
        np.testing.assert_array_equal(product_variable([0, 1], [1, 0], 2, 2), [1, 2])
        np.testing.assert_array_equal(product_variable([0], [0], 2, 2), [0])

    def test_bijective_over_grid(self):
        d, y = np.meshgrid(np.arange(2), np.arange(3), indexing="ij")
        combined = product_variable(d.ravel(), y.ravel(), 2, 3)
        assert sorted(combined) == list(range(6))

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            product_variable([0, 1], [0], 2, 2)

    def test_encoding_roundtrip(self):
        enc = ProductEncoding(3, 4)
        for idx in range(enc.card):
            d, y = enc.decode(idx)
            assert enc.encode(d, y) == idx
        with pytest.raises(InputError):
            enc.encode(3, 0)
        with pytest.raises(InputError):
            enc.decode(12)
