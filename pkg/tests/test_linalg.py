import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdna.errors import DimensionMismatch, ZeroPivot
from cpdna.linalg import (SparseMatrix, add_diagonal, from_coo, from_dense,
                          gmres, identity, ilu0, ilu_apply,
                          read_matrix_market, spmv, write_matrix_market)

from conftest import dense_lu_nopivot, random_csr


class TestSparseMatrix:
    def test_from_coo_sums_duplicates(self):
        a = from_coo(2, 2, [0, 0, 1], [1, 1, 0], [2.0, 3.0, 1.0])
        assert a.nnz == 2
        assert a.to_dense().tolist() == [[0.0, 5.0], [1.0, 0.0]]

    def test_invariants(self, rng):
        a = random_csr(rng, 60)
        a.validate()
        assert a.row_ptr[0] == 0 and a.row_ptr[-1] == a.nnz
        for i in range(a.nrows):
            cols, _ = a.row(i)
            assert np.all(np.diff(cols) > 0)

    def test_diagonal(self):
        a = from_dense([[3.0, 1.0], [0.0, -2.0]])
        assert a.diagonal().tolist() == [3.0, -2.0]

    def test_add_diagonal_inserts_structurally(self):
        a = from_coo(2, 2, [0], [1], [5.0])
        b = add_diagonal(a, 2.5)
        assert b.to_dense().tolist() == [[2.5, 5.0], [0.0, 2.5]]


class TestSpmv:
    def test_identity(self, rng):
        x = rng.standard_normal(7)
        assert np.array_equal(spmv(identity(7), x), x)

    def test_hand_example(self):
        a = from_dense([[1.0, 2.0], [0.0, 3.0]])
        assert spmv(a, np.array([1.0, 1.0])).tolist() == [3.0, 3.0]

    def test_against_dense(self, rng):
        a = random_csr(rng, 200)
        x = rng.standard_normal(200)
        assert np.allclose(spmv(a, x), a.to_dense() @ x, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            spmv(identity(3), np.ones(4))

    def test_deterministic(self, rng):
        a = random_csr(rng, 120)
        x = rng.standard_normal(120)
        y1, y2 = spmv(a, x), spmv(a, x)
        assert np.array_equal(y1, y2)


class TestIlu0:
    def test_identity(self):
        f = ilu0(identity(5))
        assert np.allclose(f.matrix.to_dense(), np.eye(5))

    def test_tridiagonal_equals_dense_lu(self):
        n = 12
        dense = (np.diag(np.full(n, 4.0)) + np.diag(np.full(n - 1, -1.0), 1)
                 + np.diag(np.full(n - 1, -1.2), -1))
        a = from_dense(dense)
        f = ilu0(a)
        lower, upper = dense_lu_nopivot(dense)
        combined = lower - np.eye(n) + upper  # unit diagonal implicit
        assert np.allclose(f.matrix.to_dense(), combined, atol=1e-12)

    def test_zero_diagonal_raises(self):
        a = from_dense([[0.0, 1.0], [1.0, 1.0]])
        with pytest.raises(ZeroPivot) as exc:
            ilu0(a)
        assert exc.value.row == 0

    def test_missing_diagonal_raises(self):
        a = from_coo(2, 2, [0, 1], [1, 0], [1.0, 1.0])
        with pytest.raises(ZeroPivot):
            ilu0(a)

    def test_pattern_preserved(self, rng):
        a = random_csr(rng, 80)
        f = ilu0(a)
        assert np.array_equal(f.matrix.row_ptr, a.row_ptr)
        assert np.array_equal(f.matrix.col_idx, a.col_idx)


class TestIluApply:
    def test_identity_factors(self, rng):
        r = rng.standard_normal(6)
        assert np.allclose(ilu_apply(ilu0(identity(6)), r), r)

    def test_tridiagonal_solves_exactly(self, rng):
        n = 15
        dense = (np.diag(np.full(n, 5.0)) + np.diag(np.full(n - 1, 1.0), 1)
                 + np.diag(np.full(n - 1, -2.0), -1))
        f = ilu0(from_dense(dense))
        r = rng.standard_normal(n)
        z = ilu_apply(f, r)
        assert np.allclose(dense @ z, r, atol=1e-10)

    def test_linearity(self, rng):
        a = random_csr(rng, 40)
        f = ilu0(a)
        r1, r2 = rng.standard_normal(40), rng.standard_normal(40)
        lhs = ilu_apply(f, r1 + r2)
        rhs = ilu_apply(f, r1) + ilu_apply(f, r2)
        assert np.allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


class TestGmres:
    def test_identity_one_iteration(self, rng):
        b = rng.standard_normal(9)
        x, stats = gmres(identity(9), b)
        assert stats.converged and stats.iterations == 1
        assert np.allclose(x, b, atol=1e-12)

    def test_diagonal_componentwise(self):
        n = 50
        a = from_dense(np.diag(np.arange(1.0, n + 1)))
        b = np.ones(n)
        x, stats = gmres(a, b, tol=1e-12)
        assert stats.converged
        assert np.allclose(x, 1.0 / np.arange(1.0, n + 1), atol=1e-10)

    def test_residual_nonincreasing_within_cycle(self, rng):
        a = random_csr(rng, 90)
        b = rng.standard_normal(90)
        _, stats = gmres(a, b, restart=90, maxit=1, tol=1e-12)
        hist = np.array(stats.residual_history)
        assert np.all(np.diff(hist) <= 1e-14)

    def test_matches_dense_solve(self, rng):
        for n in (30, 120, 200):
            a = random_csr(rng, n)
            b = rng.standard_normal(n)
            x, stats = gmres(a, b, tol=1e-12, restart=n)
            ref = np.linalg.solve(a.to_dense(), b)
            assert stats.converged
            assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)

    def test_preconditioned_path(self, rng):
        a = random_csr(rng, 150)
        b = rng.standard_normal(150)
        f = ilu0(a)
        x, stats = gmres(a, b, precond=f, tol=1e-12)
        assert stats.converged
        assert np.allclose(a.to_dense() @ x, b, atol=1e-9)

    def test_final_residual_recomputed(self, rng):
        a = random_csr(rng, 60)
        b = rng.standard_normal(60)
        x, stats = gmres(a, b, tol=1e-10)
        true_res = np.linalg.norm(b - spmv(a, x)) / np.linalg.norm(b)
        assert abs(stats.final_residual - true_res) <= 1e-12 * max(true_res, 1e-30)

    def test_maxit_returns_best_iterate(self, rng):
        a = random_csr(rng, 80, diag_dominant=False)
        b = rng.standard_normal(80)
        x, stats = gmres(a, b, tol=1e-16, restart=5, maxit=2)
        assert not stats.converged
        assert stats.final_residual >= 0
        assert np.isfinite(x).all()

    def test_zero_rhs(self):
        x, stats = gmres(identity(4), np.zeros(4))
        assert stats.converged and np.array_equal(x, np.zeros(4))

    def test_determinism(self, rng):
        a = random_csr(rng, 100)
        b = rng.standard_normal(100)
        x1, s1 = gmres(a, b, tol=1e-10)
        x2, s2 = gmres(a, b, tol=1e-10)
        assert np.array_equal(x1, x2) and s1.iterations == s2.iterations

    def test_validation(self, rng):
        with pytest.raises(DimensionMismatch):
            gmres(identity(3), np.ones(4))
        with pytest.raises(ValueError):
            gmres(identity(3), np.ones(3), tol=-1.0)


class TestMatrixMarket:
    def test_roundtrip(self, tmp_path, rng):
        a = random_csr(rng, 25, density=0.1)
        path = tmp_path / "a.mtx"
        write_matrix_market(a, path)
        header = path.read_text().splitlines()[0]
        assert header == "%%MatrixMarket matrix coordinate real general"
        b = read_matrix_market(path)
        assert np.allclose(a.to_dense(), b.to_dense(), atol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 24), st.integers(0, 2 ** 31 - 1))
def test_gmres_property_random_systems(n, seed):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    x, stats = gmres(from_dense(dense), b, tol=1e-12, restart=n)
    assert stats.converged
    ref = np.linalg.solve(dense, b)
    assert np.linalg.norm(x - ref) <= 1e-8 * max(1.0, np.linalg.norm(ref))
