"""Metric multidimensional scaling: classical (spectral) initialization
followed by SMACOF stress majorization.

The objective is the squared raw stress sum_{i<j} (|z_i - z_j| - D_ij)^2
with Euclidean distances on both sides.  All outputs are centered;
coordinates are only determined up to a rigid motion, so tests compare
distance matrices rather than raw coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, DimensionMismatch
from .shapedna import DissimilarityMatrix


@dataclass(frozen=True)
class Embedding:
    points: np.ndarray
    stress: float
    iterations: int
    converged: bool


def _as_matrix(d) -> np.ndarray:
    if isinstance(d, DissimilarityMatrix):
        d = d.matrix
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionMismatch(f"distance matrix must be square, got {d.shape}")
    return d


def _pairwise(z: np.ndarray) -> np.ndarray:
    diff = z[:, None, :] - z[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def stress(d, z: np.ndarray) -> float:
    """sum_{i<j} (|z_i - z_j| - D_ij)^2."""
    d = _as_matrix(d)
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != d.shape[0]:
        raise DimensionMismatch(f"{d.shape[0]} objects vs points {z.shape}")
    resid = _pairwise(z) - d
    iu = np.triu_indices(d.shape[0], k=1)
    return float(np.sum(resid[iu] ** 2))


def classical_mds(d, dim: int = 2) -> Embedding:
    """Double-center -D^2/2, embed with the top-dim eigenpairs.

    Exactly-embeddable distance matrices are recovered up to a rigid
    motion; negative eigenvalues are clamped to zero.
    """
    d = _as_matrix(d)
    n = d.shape[0]
    _check_dim(n, dim)
    if not np.any(d):
        raise DegenerateInput("all distances are zero")
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ (d ** 2) @ j
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    idx = np.argsort(evals, kind="stable")[::-1][:dim]
    lam = np.clip(evals[idx], 0.0, None)
    pts = evecs[:, idx] * np.sqrt(lam)[None, :]
    pts = pts - pts.mean(axis=0)
    return Embedding(points=pts, stress=stress(d, pts), iterations=0,
                     converged=True)


def _check_dim(n, dim):
    if dim not in (1, 2, 3):
        raise ValueError("embedding dimension must be 1, 2 or 3")
    if n < dim + 1:
        raise ValueError(f"need at least dim+1={dim + 1} objects, got {n}")


def smacof(d, dim: int = 2, init: Embedding | None = None, tol: float = 1e-9,
           maxit: int = 1000) -> Embedding:
    """Guttman-transform iterations from the classical-MDS start.

    Majorization makes the stress non-increasing; should floating-point
    noise ever produce an uphill step the previous iterate is kept, so
    the reported sequence is monotone by construction.  Stops when the
    relative stress decrease drops below tol.
    """
    d = _as_matrix(d)
    n = d.shape[0]
    _check_dim(n, dim)
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = (classical_mds(d, dim) if init is None else init).points.copy()
    if z.shape != (n, dim):
        raise DimensionMismatch(f"init points {z.shape} vs ({n}, {dim})")
    s_prev = stress(d, z)
    converged = False
    it = 0
    for it in range(1, maxit + 1):
        dist = np.maximum(_pairwise(z), 1e-12)
        b = -d / dist
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        z_new = (b @ z) / n
        z_new -= z_new.mean(axis=0)
        s_new = stress(d, z_new)
        if s_new > s_prev:
            # majorization cannot go uphill; this is fp noise at the fixed
            # point, so keep the better iterate and call it converged
            converged = (s_new - s_prev) <= 1e-12 * max(1.0, s_prev)
            break
        z = z_new
        dec = s_prev - s_new
        s_prev = s_new
        if dec <= tol * max(s_prev, 1e-300):
            converged = True
            break
    return Embedding(points=z, stress=s_prev, iterations=it, converged=converged)


def embedding_to_csv(emb: Embedding, labels: list) -> str:
    if len(labels) != len(emb.points):
        raise DimensionMismatch(f"{len(labels)} labels for {len(emb.points)} points")
    dim = emb.points.shape[1]
    cols = ["x", "y", "z"][:dim]
    lines = [f"# cpdna embedding dim={dim} iterations={emb.iterations} "
             f"converged={emb.converged}",
             "label," + ",".join(cols) + ",stress"]
    for lab, row in zip(labels, emb.points):
        coords = ",".join("%.17g" % c for c in row)
        lines.append(f"{lab},{coords},{'%.17g' % emb.stress}")
    return "\n".join(lines) + "\n"
