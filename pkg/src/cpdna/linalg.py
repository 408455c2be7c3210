"""Sparse CSR kernel and the iterative solver stack.

The hot loops (SpMV, ILU(0) factorization, triangular solves) are
compiled with numba; everything runs single-threaded with a fixed
summation order so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DimensionMismatch, ZeroPivot


# ---------------------------------------------------------------------------
# CSR container


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed sparse row matrix with sorted column indices per row."""

    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def validate(self):
        """Check the structural invariants; raises ValueError on violation."""
        rp, ci = self.row_ptr, self.col_idx
        if len(rp) != self.nrows + 1 or rp[0] != 0 or rp[-1] != len(ci):
            raise ValueError("row_ptr inconsistent with col_idx")
        if np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr not nondecreasing")
        for i in range(self.nrows):
            cols = ci[rp[i]:rp[i + 1]]
            if cols.size and (np.any(np.diff(cols) <= 0)
                              or cols[0] < 0 or cols[-1] >= self.ncols):
                raise ValueError(f"row {i}: columns not strictly increasing in range")
        return self

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols))
        for i in range(self.nrows):
            sl = slice(self.row_ptr[i], self.row_ptr[i + 1])
            out[i, self.col_idx[sl]] = self.values[sl]
        return out

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.nrows, self.ncols))
        for i in range(len(d)):
            sl = slice(self.row_ptr[i], self.row_ptr[i + 1])
            cols = self.col_idx[sl]
            j = np.searchsorted(cols, i)
            if j < cols.size and cols[j] == i:
                d[i] = self.values[self.row_ptr[i] + j]
        return d

    def row(self, i: int):
        sl = slice(self.row_ptr[i], self.row_ptr[i + 1])
        return self.col_idx[sl], self.values[sl]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)


def from_coo(nrows, ncols, rows, cols, vals) -> SparseMatrix:
    """Build CSR from triplets; duplicate entries are summed.

    Triplets are ordered by (row, col) with a stable sort, so the
    accumulation order, and hence the rounding, is deterministic.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if not (len(rows) == len(cols) == len(vals)):
        raise DimensionMismatch("triplet arrays differ in length")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        new = np.empty(len(rows), dtype=bool)
        new[0] = True
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new)
        summed = np.add.reduceat(vals, starts)
        rows, cols, vals = rows[starts], cols[starts], summed
    row_ptr = np.zeros(nrows + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return SparseMatrix(nrows, ncols, row_ptr, cols.astype(np.int32), vals)


def identity(n: int) -> SparseMatrix:
    return SparseMatrix(n, n, np.arange(n + 1, dtype=np.int64),
                        np.arange(n, dtype=np.int32), np.ones(n))


def from_dense(a: np.ndarray, drop_tol: float = 0.0) -> SparseMatrix:
    a = np.asarray(a, dtype=np.float64)
    rows, cols = np.nonzero(np.abs(a) > drop_tol)
    return from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])


def add_diagonal(a: SparseMatrix, shift: float) -> SparseMatrix:
    """Return a + shift*I, inserting missing diagonal entries structurally."""
    if a.nrows != a.ncols:
        raise DimensionMismatch("add_diagonal needs a square matrix")
    n = a.nrows
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(a.row_ptr))
    rows = np.concatenate([rows, np.arange(n, dtype=np.int64)])
    cols = np.concatenate([a.col_idx, np.arange(n, dtype=np.int64)])
    vals = np.concatenate([a.values, np.full(n, shift)])
    return from_coo(n, n, rows, cols, vals)


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _spmv_kernel(row_ptr, col_idx, values, x, y):
    for i in range(len(row_ptr) - 1):
        acc = 0.0
        for p in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[p] * x[col_idx[p]]
        y[i] = acc


@njit(cache=True)
def _ilu0_kernel(row_ptr, col_idx, values, diag_pos):
    # In-place IKJ ILU(0): for each row i, eliminate with the already
    # factored rows k < i present in i's pattern; updates stay on the
    # pattern (two-pointer merge exploits sorted column indices).
    n = len(row_ptr) - 1
    for i in range(n):
        if diag_pos[i] < 0:
            return i
        for pk in range(row_ptr[i], row_ptr[i + 1]):
            k = col_idx[pk]
            if k >= i:
                break
            piv = values[diag_pos[k]]
            if piv == 0.0:
                return k
            lik = values[pk] / piv
            values[pk] = lik
            p = pk + 1
            q = diag_pos[k] + 1
            qend = row_ptr[k + 1]
            while p < row_ptr[i + 1] and q < qend:
                cj = col_idx[p]
                ck = col_idx[q]
                if cj == ck:
                    values[p] -= lik * values[q]
                    p += 1
                    q += 1
                elif cj < ck:
                    p += 1
                else:
                    q += 1
        if values[diag_pos[i]] == 0.0:
            return i
    return -1


@njit(cache=True, fastmath=True)
def _ilu_solve_kernel(l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, inv_diag, r, z):
    # z = U^{-1} L^{-1} r on split factor storage; L has a unit diagonal.
    n = len(inv_diag)
    for i in range(n):
        acc = r[i]
        for p in range(l_ptr[i], l_ptr[i + 1]):
            acc -= l_val[p] * z[l_idx[p]]
        z[i] = acc
    for i in range(n - 1, -1, -1):
        acc = z[i]
        for p in range(u_ptr[i], u_ptr[i + 1]):
            acc -= u_val[p] * z[u_idx[p]]
        z[i] = acc * inv_diag[i]


def spmv(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """y = A x with a fixed (ascending column) summation order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.ncols,):
        raise DimensionMismatch(f"spmv: {a.shape} vs {x.shape}")
    y = np.empty(a.nrows)
    _spmv_kernel(a.row_ptr, a.col_idx, a.values, x, y)
    return y


# ---------------------------------------------------------------------------
# ILU(0)


@dataclass(frozen=True)
class IluFactors:
    """Combined L\\U factors stored on the sparsity pattern of A.

    The split triangular copies and inverted diagonal are a performance
    cache derived from the combined matrix, which remains the canonical
    representation.
    """

    matrix: SparseMatrix
    diag_pos: np.ndarray
    _split: tuple = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.nrows

    def split(self) -> tuple:
        if self._split is None:
            m = self.matrix
            lower = _split_tri(m, self.diag_pos, True)
            upper = _split_tri(m, self.diag_pos, False)
            inv_diag = 1.0 / m.values[self.diag_pos]
            object.__setattr__(self, "_split", (*lower, *upper, inv_diag))
        return self._split


def _split_tri(m: SparseMatrix, diag_pos, lower: bool):
    n = m.nrows
    ptr = np.zeros(n + 1, dtype=np.int64)
    if lower:
        counts = diag_pos - m.row_ptr[:-1]
    else:
        counts = m.row_ptr[1:] - diag_pos - 1
    np.cumsum(counts, out=ptr[1:])
    idx = np.empty(int(ptr[-1]), dtype=np.int32)
    val = np.empty(int(ptr[-1]))
    for i in range(n):
        if lower:
            sl = slice(m.row_ptr[i], diag_pos[i])
        else:
            sl = slice(diag_pos[i] + 1, m.row_ptr[i + 1])
        out = slice(ptr[i], ptr[i + 1])
        idx[out] = m.col_idx[sl]
        val[out] = m.values[sl]
    return ptr, idx, val


def _diag_positions(a: SparseMatrix) -> np.ndarray:
    pos = np.full(a.nrows, -1, dtype=np.int64)
    for i in range(a.nrows):
        sl = slice(a.row_ptr[i], a.row_ptr[i + 1])
        cols = a.col_idx[sl]
        j = np.searchsorted(cols, i)
        if j < cols.size and cols[j] == i:
            pos[i] = a.row_ptr[i] + j
    return pos


def ilu0(a: SparseMatrix) -> IluFactors:
    """Zero fill-in incomplete LU; raises ZeroPivot on a vanishing pivot."""
    if a.nrows != a.ncols:
        raise DimensionMismatch("ilu0 needs a square matrix")
    diag_pos = _diag_positions(a)
    vals = a.values.copy()
    bad = _ilu0_kernel(a.row_ptr, a.col_idx, vals, diag_pos)
    if bad >= 0:
        raise ZeroPivot(int(bad))
    fac = SparseMatrix(a.nrows, a.ncols, a.row_ptr, a.col_idx, vals)
    return IluFactors(fac, diag_pos)


def ilu_apply(f: IluFactors, r: np.ndarray) -> np.ndarray:
    """z = U^{-1} L^{-1} r by forward/backward substitution."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (f.n,):
        raise DimensionMismatch(f"ilu_apply: n={f.n} vs {r.shape}")
    z = np.empty(f.n)
    _ilu_solve_kernel(*f.split(), r, z)
    return z


# ---------------------------------------------------------------------------
# GMRES

REORTH_TOL = 1e-8


@dataclass
class SolveStats:
    iterations: int
    final_residual: float
    converged: bool
    residual_history: list = field(default_factory=list)


def _orthogonalize(w, basis, j):
    """Modified Gram-Schmidt of w against basis[:j+1], with one extra
    pass when the remaining overlap exceeds REORTH_TOL relative to w."""
    h = np.empty(j + 1)
    for i in range(j + 1):
        h[i] = basis[i] @ w
        w -= h[i] * basis[i]
    wnorm = np.linalg.norm(w)
    if j >= 0:
        c = basis[:j + 1] @ w
        if np.linalg.norm(c) > REORTH_TOL * max(wnorm, 1e-300):
            w -= basis[:j + 1].T @ c
            h += c
            wnorm = np.linalg.norm(w)
    return h, wnorm


def gmres(a: SparseMatrix, b: np.ndarray, precond: IluFactors | None = None,
          tol: float = 1e-10, restart: int = 60, maxit: int = 500,
          x0: np.ndarray | None = None):
    """Right-preconditioned restarted GMRES.

    Returns (x, SolveStats).  `maxit` counts restart cycles.  The
    residual history holds the relative true-system residual estimate
    per inner iteration (right preconditioning keeps it meaningful);
    on MaxIterations the best iterate found is returned with
    converged=False.
    """
    b = np.asarray(b, dtype=np.float64)
    if a.nrows != a.ncols or b.shape != (a.nrows,):
        raise DimensionMismatch(f"gmres: {a.shape} vs {b.shape}")
    if tol <= 0 or restart < 1:
        raise ValueError("tol must be > 0 and restart >= 1")
    n = a.nrows
    bnorm = np.linalg.norm(b)
    apply_p = (lambda v: ilu_apply(precond, v)) if precond is not None else (lambda v: v)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if bnorm == 0.0:
        return np.zeros(n), SolveStats(0, 0.0, True, [0.0])

    history: list[float] = []
    total_it = 0
    best_x, best_res = x.copy(), np.linalg.norm(b - spmv(a, x)) / bnorm
    m = min(restart, n)
    V = np.empty((m + 1, n))
    H = np.zeros((m + 1, m))

    for _cycle in range(maxit):
        r = b - spmv(a, x)
        beta = np.linalg.norm(r)
        if beta / bnorm <= tol:
            return x, SolveStats(total_it, beta / bnorm, True, history)
        V[0] = r / beta
        g = np.zeros(m + 1)
        g[0] = beta
        cs = np.zeros(m)
        sn = np.zeros(m)
        H[:] = 0.0
        jlast = -1
        breakdown = False
        for j in range(m):
            w = spmv(a, apply_p(V[j]))
            scale = np.linalg.norm(w)
            h, wnorm = _orthogonalize(w, V, j)
            H[:j + 1, j] = h
            H[j + 1, j] = wnorm
            happy = wnorm <= 1e-14 * max(scale, 1e-300)
            if not happy:
                V[j + 1] = w / wnorm
            # Givens update of the j-th column
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = (1.0, 0.0) if denom == 0.0 else (H[j, j] / denom,
                                                            H[j + 1, j] / denom)
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total_it += 1
            history.append(abs(g[j + 1]) / bnorm)
            jlast = j
            if happy:
                breakdown = True
                break
            if abs(g[j + 1]) / bnorm <= tol:
                break
        # assemble the iterate from the cycle
        k = jlast + 1
        y = np.zeros(k)
        for i in range(k - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
        x = x + apply_p(V[:k].T @ y)
        true_res = np.linalg.norm(b - spmv(a, x)) / bnorm
        if true_res < best_res:
            best_x, best_res = x.copy(), true_res
        if true_res <= tol or breakdown:
            return x, SolveStats(total_it, true_res, True, history)
    return best_x, SolveStats(total_it, best_res, False, history)


# ---------------------------------------------------------------------------
# Matrix Market I/O (coordinate, real, general)


def write_matrix_market(a: SparseMatrix, path):
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{a.nrows} {a.ncols} {a.nnz}\n")
        for i in range(a.nrows):
            for p in range(a.row_ptr[i], a.row_ptr[i + 1]):
                fh.write(f"{i + 1} {a.col_idx[p] + 1} {a.values[p]:.17g}\n")


def read_matrix_market(path) -> SparseMatrix:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket matrix coordinate real"):
            raise ValueError(f"unsupported MatrixMarket header: {header!r}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        nrows, ncols, nnz = (int(t) for t in line.split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for k in range(nnz):
            i, j, v = fh.readline().split()
            rows[k], cols[k], vals[k] = int(i) - 1, int(j) - 1, float(v)
    return from_coo(nrows, ncols, rows, cols, vals)
