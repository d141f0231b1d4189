import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pdhglp.linalg import MNorm, SparseMatrix, StepSizes, m_norm, opnorm_estimate

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False, width=32)


def dense_matrices(max_m=5, max_n=5):
    return st.integers(1, max_m).flatmap(
        lambda m: st.integers(1, max_n).flatmap(
            lambda n: arrays(np.float64, (m, n), elements=finite)
        )
    )


class TestSparseMatrix:
    def test_triplet_duplicates_sum(self):
        a = SparseMatrix.from_triplets(2, 2, [0, 0, 1], [1, 1, 0], [2.0, 3.0, 1.0])
        assert a.to_dense().tolist() == [[0.0, 5.0], [1.0, 0.0]]
        assert a.nnz == 2

    def test_index_bounds_checked(self):
        with pytest.raises(ValueError):
            SparseMatrix.from_triplets(2, 2, [2], [0], [1.0])
        with pytest.raises(ValueError):
            SparseMatrix.from_triplets(2, 2, [0], [-1], [1.0])

    def test_shape_validation_on_products(self):
        a = SparseMatrix.from_dense([[1.0, 2.0]])
        with pytest.raises(ValueError):
            a.matvec(np.ones(3))
        with pytest.raises(ValueError):
            a.rmatvec(np.ones(2))

    @given(dense_matrices())
    def test_adjoint_identity(self, arr):
        """y'(Ax) == (A'y)'x for every x, y."""
        a = SparseMatrix.from_dense(arr)
        rng = np.random.default_rng(0)
        x = rng.standard_normal(a.n_cols)
        y = rng.standard_normal(a.n_rows)
        lhs = float(y @ a.matvec(x))
        rhs = float(a.rmatvec(y) @ x)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    @given(dense_matrices())
    def test_dense_round_trip(self, arr):
        a = SparseMatrix.from_dense(arr)
        np.testing.assert_array_equal(a.to_dense(), arr)

    def test_take_columns(self):
        a = SparseMatrix.from_dense([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        sub = a.take_columns(np.array([2, 0]))
        assert sub.to_dense().tolist() == [[3.0, 1.0], [6.0, 4.0]]


class TestOperatorNorm:
    @given(dense_matrices(6, 6))
    def test_estimate_close_to_svd(self, arr):
        # Power iteration stops on successive change, so with a small
        # spectral gap it can sit a little below the true value; it must
        # never overestimate (beyond roundoff), and the shortfall must stay
        # far inside the 0.9^2 safety margin the step sizes rely on.
        a = SparseMatrix.from_dense(arr)
        true = float(np.linalg.svd(arr, compute_uv=False)[0]) if arr.size else 0.0
        est = opnorm_estimate(a)
        assert est.value <= true * (1.0 + 1e-9) + 1e-12
        assert est.value == pytest.approx(true, rel=5e-3, abs=1e-9)

    def test_invariant_subspace_start_is_escaped(self):
        # The all-ones start is a fixed direction of A'A here and
        # underestimates the norm; the second start must recover sqrt(2).
        a = SparseMatrix.from_dense([[1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
        est = opnorm_estimate(a)
        assert est.value == pytest.approx(np.sqrt(2.0), rel=1e-5)

    def test_zero_matrix(self):
        a = SparseMatrix.from_triplets(2, 2, [], [], [])
        assert opnorm_estimate(a).value == 0.0


class TestStepSizes:
    def test_for_matrix_keeps_m_positive_definite(self):
        a = SparseMatrix.from_dense([[3.0, 1.0], [1.0, 2.0]])
        steps = StepSizes.for_matrix(a, factor=0.9)
        sigma = opnorm_estimate(a).value
        assert steps.eta * steps.tau * sigma * sigma < 1.0

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            StepSizes(0.0, 1.0)
        with pytest.raises(ValueError):
            StepSizes(1.0, -1.0)
        with pytest.raises(ValueError):
            StepSizes(np.nan, 1.0)
        a = SparseMatrix.from_dense([[1.0]])
        with pytest.raises(ValueError):
            StepSizes.for_matrix(a, factor=1.0)

    def test_zero_matrix_rejected(self):
        a = SparseMatrix.from_triplets(1, 1, [], [], [])
        with pytest.raises(ValueError):
            StepSizes.for_matrix(a)


class TestMNorm:
    def test_rejects_indefinite_steps(self):
        a = SparseMatrix.from_dense([[1.0]])
        with pytest.raises(ValueError):
            MNorm(a, StepSizes(1.0, 1.0))

    @given(dense_matrices(5, 5), st.integers(0, 2**31 - 1))
    def test_positive_on_nonzero(self, arr, seed):
        a = SparseMatrix.from_dense(arr)
        sigma = opnorm_estimate(a).value
        if sigma == 0.0:
            steps = StepSizes(1.0, 1.0)
        else:
            steps = StepSizes.for_matrix(a, factor=0.9)
        mn = MNorm(a, steps)
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(a.n_cols)
        y = rng.standard_normal(a.n_rows)
        if np.all(x == 0.0) and np.all(y == 0.0):
            return
        val = mn(x, y)
        assert val > 0.0
        assert mn(np.zeros(a.n_cols), np.zeros(a.n_rows)) == 0.0

    def test_matches_explicit_quadratic_form(self):
        a = SparseMatrix.from_dense([[1.0, -1.0], [0.0, 2.0]])
        steps = StepSizes.for_matrix(a, factor=0.8)
        mn = MNorm(a, steps)
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.standard_normal(2)
            y = rng.standard_normal(2)
            explicit = (
                (x @ x) / steps.eta - 2.0 * float(y @ a.matvec(x)) + (y @ y) / steps.tau
            )
            assert mn.sq(x, y) == pytest.approx(explicit, rel=1e-12, abs=1e-12)

    def test_coupling_sign_flips_cross_term(self):
        a = SparseMatrix.from_dense([[1.0, -1.0], [0.0, 2.0]])
        steps = StepSizes.for_matrix(a, factor=0.8)
        plus = MNorm(a, steps, coupling_sign=1)
        minus = MNorm(a, steps, coupling_sign=-1)
        x = np.array([1.0, 2.0])
        y = np.array([-1.0, 0.5])
        cross = float(y @ a.matvec(x))
        assert plus.sq(x, y) - minus.sq(x, y) == pytest.approx(-4.0 * cross, rel=1e-12)

    def test_one_shot_helper(self):
        a = SparseMatrix.from_dense([[1.0]])
        steps = StepSizes(0.5, 0.5)
        assert m_norm(np.array([2.0]), np.array([0.0]), a, steps) == pytest.approx(
            np.sqrt(8.0)
        )
