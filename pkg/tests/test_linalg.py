import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dssfn.linalg import (
    GramSystem,
    NotPositiveDefiniteError,
    SeededRng,
    ShapeError,
    as_matrix,
    cholesky,
    dump_matrix,
    format_matrix,
    frobenius_norm_sq,
    mat_mul,
    random_matrix,
    solve_spd,
    spectral_norm,
    transpose,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def triple_loop(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


class TestMatMul:
    def test_identity(self):
        a = np.arange(12.0).reshape(3, 4)
        assert np.array_equal(mat_mul(np.eye(3), a), a)

    def test_hand_checked(self):
        assert np.array_equal(mat_mul(np.array([[1.0, 2], [3, 4]]), np.array([[0.0], [1]])), [[2.0], [4.0]])

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(5, 4)), rng.normal(size=(4, 3))
        assert np.allclose(mat_mul(a, b), triple_loop(a, b), rtol=0, atol=1e-12)

    def test_mismatch_names_shapes(self):
        with pytest.raises(ShapeError, match="2x3 by 2x3"):
            mat_mul(np.ones((2, 3)), np.ones((2, 3)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_associative(self, m, n, p, q, seed):
        rng = np.random.default_rng(seed)
        a, b, c = rng.normal(size=(m, n)), rng.normal(size=(n, p)), rng.normal(size=(p, q))
        left = mat_mul(mat_mul(a, b), c)
        right = mat_mul(a, mat_mul(b, c))
        scale = np.abs(a).max() * np.abs(b).max() * np.abs(c).max() * n * p
        assert np.abs(left - right).max() <= 1e-9 * max(scale, 1.0)


class TestSolveSpd:
    def test_identity(self):
        b = np.arange(8.0).reshape(4, 2)
        assert np.array_equal(solve_spd(np.eye(4), b), b)

    def test_diagonal(self):
        assert np.allclose(solve_spd(2 * np.eye(2), np.array([[4.0], [6.0]])), [[2.0], [3.0]], rtol=0, atol=1e-15)

    def test_residual(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(6, 6))
        s = a @ a.T + np.eye(6)
        rhs = rng.normal(size=(6, 3))
        z = solve_spd(s, rhs)
        assert np.linalg.norm(s @ z - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_indefinite_reports_pivot(self):
        s = np.diag([1.0, 2.0, -1.0, 4.0])
        with pytest.raises(NotPositiveDefiniteError) as info:
            solve_spd(s, np.ones((4, 1)))
        assert info.value.pivot == 2

    def test_rejects_asymmetric(self):
        with pytest.raises(ShapeError, match="symmetric"):
            cholesky(np.array([[2.0, 1.0], [0.0, 2.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ShapeError):
            cholesky(np.ones((2, 3)))

    def test_rhs_mismatch(self):
        with pytest.raises(ShapeError):
            solve_spd(np.eye(3), np.ones((2, 1)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.0, 6.0))
    def test_recovers_x(self, n, seed, log_cond):
        # orthogonal similarity of a spectrum spanning at most 1e6
        rng = np.random.default_rng(seed)
        qm, _ = np.linalg.qr(rng.normal(size=(n, n)))
        s = qm @ np.diag(np.logspace(0, log_cond, n)) @ qm.T
        s = 0.5 * (s + s.T)
        x = rng.normal(size=(n, 2))
        z = solve_spd(s, mat_mul(s, x))
        assert np.linalg.norm(z - x) <= 1e-8 * np.linalg.norm(x)


class TestGramSystem:
    @pytest.mark.parametrize("d,j", [(4, 10), (10, 4)])
    @pytest.mark.parametrize("shift", [0.5, 3.0])
    def test_matches_direct(self, d, j, shift):
        rng = np.random.default_rng(d * 100 + j)
        y, t = rng.normal(size=(d, j)), rng.normal(size=(3, j))
        g = GramSystem(y, shift)
        assert g.dual == (j < d)
        direct = np.linalg.solve(y @ y.T + shift * np.eye(d), (t @ y.T).T).T
        assert np.allclose(g.ridge(t), direct, rtol=1e-10, atol=1e-12)
        b = rng.normal(size=(3, d))
        assert np.allclose(g.apply_inverse(b), np.linalg.solve(y @ y.T + shift * np.eye(d), b.T).T, rtol=1e-9, atol=1e-11)

    def test_tiny_shift_uses_primal(self):
        y = np.random.default_rng(1).normal(size=(8, 3))
        assert not GramSystem(y, 1e-12).dual

    def test_singular_without_shift(self):
        with pytest.raises(NotPositiveDefiniteError):
            GramSystem(np.ones((3, 2)), 0.0)

    def test_negative_shift(self):
        with pytest.raises(ValueError):
            GramSystem(np.ones((2, 2)), -1.0)


class TestFrobenius:
    def test_zero(self):
        assert frobenius_norm_sq(np.zeros((3, 2))) == 0.0

    def test_hand(self):
        assert frobenius_norm_sq(np.full((2, 2), 2.0)) == 16.0

    def test_entrywise_oracle(self):
        a = np.random.default_rng(5).normal(size=(7, 4))
        from fractions import Fraction

        # exact rational sum of the squared doubles, rounded once
        exact = sum(Fraction(float(v) * float(v)) for v in a.ravel())
        assert frobenius_norm_sq(a) == float(exact)

    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
    def test_transpose_exact(self, a):
        assert frobenius_norm_sq(a) == frobenius_norm_sq(transpose(a))
        assert frobenius_norm_sq(a) >= 0


class TestRandom:
    def test_same_seed_same_matrix(self):
        a = random_matrix(SeededRng(7), 4, 5, 0.3)
        b = random_matrix(SeededRng(7), 4, 5, 0.3)
        assert np.array_equal(a, b)

    def test_rejects_empty(self):
        with pytest.raises(ShapeError):
            random_matrix(SeededRng(0), 0, 3)

    def test_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            random_matrix(SeededRng(0), 2, 3, -1.0)

    def test_bounds_and_default_scale(self):
        r = random_matrix(SeededRng(1), 50, 16)
        assert np.all(np.abs(r) <= 0.25)

    def test_mean_lln(self):
        scale = 2.0
        r = random_matrix(SeededRng(11), 1000, 1000, scale)
        assert abs(r.mean()) <= 3 * scale / np.sqrt(1e6)

    @pytest.mark.parametrize("s", range(10))
    def test_distinct_seeds_differ(self, s):
        a = random_matrix(SeededRng(2 * s), 3, 3, 1.0)
        b = random_matrix(SeededRng(2 * s + 1), 3, 3, 1.0)
        assert not np.array_equal(a, b)

    def test_substreams_independent_and_reproducible(self):
        base = SeededRng(4)
        assert np.array_equal(base.substream(3).uniform(2, 2), SeededRng(4, (3,)).uniform(2, 2))
        assert not np.array_equal(base.substream(3).uniform(2, 2), base.substream(4).uniform(2, 2))

    def test_frozen_stream(self):
        # the generator is part of the reproducibility contract; a change here breaks old results
        first = SeededRng(0).uniform(1, 3)[0]
        assert first.tolist() == [0.2739233746429086, -0.4604265724722594, -0.9180529521276106]

    def test_bad_seed(self):
        with pytest.raises(ValueError):
            SeededRng(-1)


class TestMisc:
    def test_as_matrix(self):
        assert as_matrix([[1, 2]]).dtype == np.float64
        with pytest.raises(ShapeError):
            as_matrix([1, 2])
        with pytest.raises(ValueError):
            as_matrix([[np.nan]])

    def test_spectral_norm(self):
        assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0)

    def test_dump_round_trip(self):
        a = np.random.default_rng(2).normal(size=(3, 4))
        text = format_matrix(a)
        lines = text.splitlines()
        assert len(lines) == 3 and all("  " not in ln for ln in lines)
        back = np.array([[float(v) for v in ln.split(" ")] for ln in lines])
        assert np.array_equal(back, a)
        buf = io.StringIO()
        dump_matrix(np.array([[1.0, -0.5]]), buf)
        assert buf.getvalue() == "1.0 -0.5\n"
