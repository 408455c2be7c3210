import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_csr(rng, n, density=0.05, diag_dominant=True):
    """Random sparse test matrix with a guaranteed nonzero diagonal."""
    from cpdna.linalg import from_coo
    m = int(density * n * n)
    rows = rng.integers(0, n, m)
    cols = rng.integers(0, n, m)
    vals = rng.standard_normal(m)
    rows = np.concatenate([rows, np.arange(n)])
    cols = np.concatenate([cols, np.arange(n)])
    boost = float(density * n + 4.0) if diag_dominant else 1.0
    vals = np.concatenate([vals, np.full(n, boost)])
    return from_coo(n, n, rows, cols, vals)


def dense_lu_nopivot(a):
    """Doolittle LU without pivoting; independent oracle for ILU tests."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    lower = np.eye(n)
    upper = a.copy()
    for k in range(n - 1):
        for i in range(k + 1, n):
            lower[i, k] = upper[i, k] / upper[k, k]
            upper[i, k:] -= lower[i, k] * upper[k, k:]
            upper[i, k] = 0.0
    return lower, upper


def brute_force_mesh_cp(pts, mesh):
    """Exhaustive exact point-to-triangle scan, vectorized over triangles.

    Independent of the BVH path: plain numpy over every triangle using
    the barycentric region classification.
    """
    tris = mesh.vertices[mesh.triangles]
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, ac, bc = b - a, c - a, c - b
    out_cp = np.empty((len(pts), 3))
    out_d = np.empty(len(pts))
    out_tri = np.empty(len(pts), dtype=np.int64)
    for i, p in enumerate(pts):
        ap, bp, cp_ = p - a, p - b, p - c
        d1 = np.sum(ab * ap, 1)
        d2 = np.sum(ac * ap, 1)
        d3 = np.sum(ab * bp, 1)
        d4 = np.sum(ac * bp, 1)
        d5 = np.sum(ab * cp_, 1)
        d6 = np.sum(ac * cp_, 1)
        va = d3 * d6 - d5 * d4
        vb = d5 * d2 - d1 * d6
        vc = d1 * d4 - d3 * d2
        denom = np.where(va + vb + vc == 0, 1.0, va + vb + vc)
        q = a + (vb / denom)[:, None] * ab + (vc / denom)[:, None] * ac
        m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        t = np.where(m, (d4 - d3) / np.where((d4 - d3) + (d5 - d6) == 0, 1.0,
                                             (d4 - d3) + (d5 - d6)), 0.0)
        q[m] = (b + t[:, None] * bc)[m]
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t = np.where(m, d2 / np.where(d2 - d6 == 0, 1.0, d2 - d6), 0.0)
        q[m] = (a + t[:, None] * ac)[m]
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t = np.where(m, d1 / np.where(d1 - d3 == 0, 1.0, d1 - d3), 0.0)
        q[m] = (a + t[:, None] * ab)[m]
        m = (d6 >= 0) & (d5 <= d6)
        q[m] = c[m]
        m = (d3 >= 0) & (d4 <= d3)
        q[m] = b[m]
        m = (d1 <= 0) & (d2 <= 0)
        q[m] = a[m]
        dd = np.linalg.norm(p[None, :] - q, axis=1)
        j = int(np.argmin(dd))  # argmin returns the lowest tying index
        out_cp[i], out_d[i], out_tri[i] = q[j], dd[j], j
    return out_cp, out_d, out_tri
