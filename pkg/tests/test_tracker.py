import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svdcluster import Block
from svdcluster.tracker import (
    GramTracker,
    ResidualTracker,
    gram_append,
    gram_append_truncate,
    gram_sigma_tilde,
    gram_truncate,
    residual_append,
    residual_norm_of,
    residual_norms_sq,
    residual_top_mu,
)

from conftest import oracle_sv


def _b(name, a):
    return Block(name, a)


def _random_blocks(rng, m, count, maxcols=4):
    return [_b(f"b{i}", rng.standard_normal((m, int(rng.integers(1, maxcols + 1))))) for i in range(count)]


class TestResidualTracker:
    def test_first_block(self, rng):
        A = _b("a", rng.standard_normal((6, 3)))
        t = residual_append(ResidualTracker.empty(6), A)
        np.testing.assert_allclose(np.sqrt(t.mu_sq), oracle_sv(A.data), rtol=1e-12)
        assert t.rank == 3
        assert t.member_ids == ("a",)

    def test_block_in_span(self, rng):
        A1 = rng.standard_normal((8, 3))
        t1 = residual_append(ResidualTracker.empty(8), _b("a", A1))
        t2 = residual_append(t1, _b("b", A1 @ rng.standard_normal((3, 5))))
        np.testing.assert_array_equal(t2.mu_sq, t1.mu_sq)
        assert t2.rank == t1.rank
        assert t2.total_energy_sq > t1.total_energy_sq

    def test_partial_sums_three_blocks(self, rng):
        # sum_{j<=k} mu_j^2 <= sum_{j<=k} sigma_j^2 for every k
        blocks = _random_blocks(rng, 10, 3)
        t = ResidualTracker.empty(10)
        for b in blocks:
            t = residual_append(t, b)
        s = oracle_sv(np.hstack([b.data for b in blocks]))
        mu = residual_top_mu(t, len(s))
        assert np.all(np.cumsum(mu**2) <= np.cumsum(s**2) + 1e-9 * s[0] ** 2)

    def test_individual_values_can_exceed(self):
        # e1 then (1, 1): pooled residual values (1, 1), concatenation values (1.618, 0.618).
        # Only the partial sums are ordered, not the individual values.
        t = residual_append(ResidualTracker.empty(2), _b("a", np.array([[1.0], [0.0]])))
        t = residual_append(t, _b("b", np.array([[1.0], [1.0]])))
        np.testing.assert_allclose(residual_top_mu(t, 2), [1.0, 1.0], atol=1e-15)
        s = oracle_sv(np.array([[1.0, 1.0], [0.0, 1.0]]))
        np.testing.assert_allclose(s, [(1 + 5**0.5) / 2, (5**0.5 - 1) / 2], rtol=1e-14)
        assert residual_top_mu(t, 2)[1] > s[1]
        assert np.all(np.cumsum(residual_top_mu(t, 2) ** 2) <= np.cumsum(s**2) + 1e-14)

    def test_outside_energy(self, rng):
        A = rng.standard_normal((8, 3))
        t = residual_append(ResidualTracker.empty(8), _b("a", A))
        assert t.outside_sq <= 1e-25 * np.sum(A * A)
        B = rng.standard_normal((8, 2))
        t2 = residual_append(t, _b("b", B))
        assert t2.outside_sq == pytest.approx(np.sum((t.basis.T @ B) ** 2), rel=1e-12)
        assert t2.outside_sq + t2.mu_sq.sum() == pytest.approx(t2.total_energy_sq, rel=1e-12)

    def test_top_mu(self):
        t = ResidualTracker.empty(4)
        np.testing.assert_array_equal(residual_top_mu(t, 3), [0, 0, 0])
        t = residual_append(t, _b("a", np.diag([3.0, 1.0, 0.0, 0.0])[:, :2]))
        np.testing.assert_allclose(residual_top_mu(t, 3), [3, 1, 0])
        pooled = ResidualTracker(4, np.zeros((4, 0)), np.array([9.0, 4.0, 4.0, 1.0]))
        np.testing.assert_array_equal(residual_top_mu(pooled, 2), [3, 2])

    def test_full_basis_short_circuit(self, rng):
        t = residual_append(ResidualTracker.empty(3), _b("a", rng.standard_normal((3, 3))))
        assert t.rank == 3
        t2 = residual_append(t, _b("b", rng.standard_normal((3, 2))))
        assert t2.rank == 3 and len(t2.mu_sq) == 3

    def test_row_mismatch(self, rng):
        with pytest.raises(ValueError, match="row mismatch"):
            residual_append(ResidualTracker.empty(4), _b("a", rng.standard_normal((5, 1))))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), m=st.integers(2, 14), count=st.integers(1, 7))
    def test_invariants(self, seed, m, count):
        rng = np.random.default_rng(seed)
        blocks = _random_blocks(rng, m, count)
        t = ResidualTracker.empty(m)
        energy = 0.0
        prev = np.zeros(m)
        for b in blocks:
            t = residual_append(t, b)
            energy += b.energy_sq
            assert t.total_energy_sq == energy
            assert t.mu_sq.sum() <= t.total_energy_sq * (1 + 1e-9)
            assert np.abs(t.basis.T @ t.basis - np.eye(t.rank)).max(initial=0) <= 1e-10
            mu = residual_top_mu(t, m)
            assert np.all(mu >= prev - 1e-12 * max(mu[0], 1e-300))
            prev = mu
            M = np.hstack([bb.data for bb in blocks[: len(t.member_ids)]])
            s = oracle_sv(M)
            k = len(s)
            assert np.all(np.cumsum(mu[:k] ** 2) <= np.cumsum(s**2) + 1e-9 * s[0] ** 2)
            assert t.outside_sq + t.mu_sq.sum() == pytest.approx(t.total_energy_sq, rel=1e-9)


class TestGramTracker:
    def test_first_append_exact(self, rng):
        A = _b("a", rng.standard_normal((7, 3)))
        t = gram_append(GramTracker.empty(7, 2), A)
        G = A.data @ A.data.T
        assert np.linalg.norm(t.basis @ t.gram @ t.basis.T - G) <= 1e-9 * np.linalg.norm(G)
        np.testing.assert_allclose(gram_sigma_tilde(t)[:3], oracle_sv(A.data), rtol=1e-10)

    def test_two_blocks_untruncated(self, rng):
        blocks = _random_blocks(rng, 9, 2)
        t = GramTracker.empty(9, 1)
        for b in blocks:
            t = gram_append(t, b)
        M = np.hstack([b.data for b in blocks])
        assert np.linalg.norm(t.basis @ t.gram @ t.basis.T - M @ M.T) <= 1e-9 * np.sum(M * M)

    def test_block_in_span(self, rng):
        A = rng.standard_normal((8, 2))
        t1 = gram_append(GramTracker.empty(8, 4), _b("a", A))
        B = _b("b", A @ rng.standard_normal((2, 3)))
        t2 = gram_append(t1, B)
        assert t2.rank == t1.rank
        Y = t1.basis.T @ B.data
        np.testing.assert_allclose(t2.gram, t1.gram + Y @ Y.T, atol=1e-12 * np.abs(t2.gram).max())

    def test_truncate_noop(self, rng):
        t = gram_append(GramTracker.empty(6, 4), _b("a", rng.standard_normal((6, 2))))
        t2 = gram_truncate(t)
        np.testing.assert_allclose(gram_sigma_tilde(t2), gram_sigma_tilde(t), atol=1e-10)
        assert t2.discarded_energy == pytest.approx(0, abs=1e-20)

    def test_truncate_diag(self):
        t = GramTracker(3, np.eye(3), np.diag([9.0, 4.0, 1.0]), 2)
        t2 = gram_truncate(t)
        np.testing.assert_allclose(t2.gram, np.diag([9.0, 4.0]))
        assert t2.discarded_energy == pytest.approx(1.0)

    def test_outside_energy(self, rng):
        blocks = _random_blocks(rng, 10, 6)
        t = GramTracker.empty(10, 3)
        for b in blocks:
            t = gram_append_truncate(t, b)
            assert t.outside_sq + np.trace(t.gram) == pytest.approx(t.total_energy_sq, rel=1e-9)
        assert t.dropped_sq <= 1e-20 * t.total_energy_sq

    def test_truncation_optimal_in_subspace(self, rng):
        blocks = _random_blocks(rng, 10, 4)
        t = GramTracker.empty(10, 3)
        for b in blocks:
            t = gram_append(t, b)
        G = t.basis @ t.gram @ t.basis.T
        lam = np.linalg.eigvalsh(t.gram)[::-1]
        t2 = gram_truncate(t)
        G2 = t2.basis @ t2.gram @ t2.basis.T
        assert np.sum((G - G2) ** 2) == pytest.approx(np.sum(lam[3:] ** 2), rel=1e-9)
        assert t2.discarded_energy == pytest.approx(lam[3:].sum(), rel=1e-9)

    def test_truncated_run_measured(self, rng):
        # sigma-tilde tracks the truth from below-ish; measured, not asserted as a bound
        blocks = _random_blocks(rng, 12, 8, maxcols=3)
        t = GramTracker.empty(12, 4)
        for b in blocks:
            t = gram_append_truncate(t, b)
            assert t.rank <= 4
        s = oracle_sv(np.hstack([b.data for b in blocks]))
        gap = gram_sigma_tilde(t)[:4] - s[:4]
        assert np.all(np.isfinite(gap))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), m=st.integers(2, 14), count=st.integers(1, 7))
    def test_exact_factorization(self, seed, m, count):
        rng = np.random.default_rng(seed)
        blocks = _random_blocks(rng, m, count)
        t = GramTracker.empty(m, 1)
        for i, b in enumerate(blocks):
            t = gram_append(t, b)
            M = np.hstack([bb.data for bb in blocks[: i + 1]])
            assert np.linalg.norm(t.basis @ t.gram @ t.basis.T - M @ M.T) <= 1e-9 * np.sum(M * M)
            assert np.trace(t.gram) <= t.total_energy_sq * (1 + 1e-9)
        s = oracle_sv(np.hstack([b.data for b in blocks]))
        sig = gram_sigma_tilde(t)
        np.testing.assert_allclose(sig[: len(s)], s, atol=1e-8 * s[0])


class TestResidualNorm:
    def test_in_span(self, rng):
        A = rng.standard_normal((6, 2))
        t = residual_append(ResidualTracker.empty(6), _b("a", A))
        B = _b("b", A @ rng.standard_normal((2, 2)))
        assert residual_norm_of(t, B) <= 1e-10 * B.norm

    def test_empty(self, rng):
        B = _b("b", rng.standard_normal((6, 2)))
        assert residual_norm_of(GramTracker.empty(6, 2), B) == B.norm

    def test_pythagoras(self, rng):
        t = residual_append(ResidualTracker.empty(8), _b("a", rng.standard_normal((8, 3))))
        B = _b("b", rng.standard_normal((8, 4)))
        ref = math.sqrt(B.energy_sq - np.sum((t.basis.T @ B.data) ** 2))
        assert residual_norm_of(t, B) == pytest.approx(ref, rel=1e-9)

    def test_batched_matches_single(self, rng):
        t = residual_append(ResidualTracker.empty(9), _b("a", rng.standard_normal((9, 3))))
        cands = _random_blocks(rng, 9, 5)
        packed = np.asfortranarray(np.hstack([c.data for c in cands]))
        offsets = np.cumsum([0] + [c.cols for c in cands]).astype(np.int64)
        got = residual_norms_sq(t.basis, packed, offsets)
        want = [residual_norm_of(t, c) ** 2 for c in cands]
        np.testing.assert_allclose(got, want, rtol=1e-12)
