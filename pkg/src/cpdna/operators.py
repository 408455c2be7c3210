"""Discrete operators on a band: the centered Laplacian, Lagrange
extension matrices, and the penalized surface-Laplacian operator

    M = E1 L - gamma (I - E3).

Extension row i holds the tensor-product Lagrange weights that evaluate
a band function at the cached closest point of band point i.  For
homogeneous Dirichlet conditions the rows whose closest point lies on
the surface boundary are negated (odd reflection, first order);
Neumann and closed surfaces use the plain extension.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .band import MISSING, BandGrid
from .errors import StencilEscape
from .linalg import SparseMatrix, from_coo


@dataclass(frozen=True)
class DiscreteLB:
    M: SparseMatrix
    gamma: float
    dx: float
    bc: str
    band: BandGrid


def default_gamma(dx: float, dim: int) -> float:
    """Penalty matching the stiffness scale of the difference Laplacian."""
    return 2.0 * dim / dx ** 2


def _laplacian_slots(band: BandGrid):
    """Fixed-width row storage: slot 0 is the diagonal, then the 2*dim
    axis neighbors.  Missing neighbors keep MISSING (structural zero)."""
    n, dim, dx = band.n, band.dim, band.dx
    cols = np.empty((n, 2 * dim + 1), dtype=np.int64)
    vals = np.empty((n, 2 * dim + 1))
    cols[:, 0] = np.arange(n)
    vals[:, 0] = -2.0 * dim / dx ** 2
    cols[:, 1:] = band.neighbor_rows
    vals[:, 1:] = 1.0 / dx ** 2
    return cols, vals


def build_laplacian(band: BandGrid) -> SparseMatrix:
    """(2*dim+1)-point centered second-difference Laplacian, 1/dx^2 scaled."""
    cols, vals = _laplacian_slots(band)
    rows = np.repeat(np.arange(band.n, dtype=np.int64), cols.shape[1])
    cols_f, vals_f = cols.ravel(), vals.ravel()
    keep = cols_f != MISSING
    return from_coo(band.n, band.n, rows[keep], cols_f[keep], vals_f[keep])


def _lagrange_weights_1d(xi: np.ndarray, degree: int) -> np.ndarray:
    w = np.ones((len(xi), degree + 1))
    for j in range(degree + 1):
        for m in range(degree + 1):
            if m != j:
                w[:, j] *= (xi - m) / (j - m)
    return w


def _extension_stencil(band: BandGrid, degree: int):
    """Interpolation stencil (cols, weights) of each cached closest point."""
    s = (band.cp - band.origin) / band.dx
    base = np.floor(s).astype(np.int64) - (degree - 1) // 2
    xi = s - base
    per_axis = [_lagrange_weights_1d(xi[:, a], degree) for a in range(band.dim)]
    offsets = np.array(list(product(range(degree + 1), repeat=band.dim)),
                       dtype=np.int64)
    nodes = base[:, None, :] + offsets[None, :, :]
    cols = band.rows_of(nodes.reshape(-1, band.dim)).reshape(band.n, -1)
    if np.any(cols == MISSING):
        bad = int(np.count_nonzero(np.any(cols == MISSING, axis=1)))
        raise StencilEscape(
            f"{bad} extension rows reference grid points outside the band")
    weights = np.ones((band.n, len(offsets)))
    for a in range(band.dim):
        weights *= per_axis[a][:, offsets[:, a]]
    return cols, weights


def build_extension(band: BandGrid, degree: int, bc: str | None = None) -> SparseMatrix:
    """Closest-point extension matrix of the given Lagrange degree."""
    if degree not in (1, 3):
        raise ValueError("extension degree must be 1 or 3")
    bc = _resolve_bc(band, bc)
    cols, weights = _extension_stencil(band, degree)
    if bc == "dirichlet":
        weights = np.where(band.on_boundary[:, None], -weights, weights)
    rows = np.repeat(np.arange(band.n, dtype=np.int64), cols.shape[1])
    return from_coo(band.n, band.n, rows, cols.ravel(), weights.ravel())


def _resolve_bc(band: BandGrid, bc: str | None) -> str:
    bc = bc or band.field.bc
    if bc not in ("closed", "dirichlet", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if band.field.closed and bc != "closed":
        raise ValueError("closed surface: bc must be 'closed'")
    if not band.field.closed and bc == "closed":
        raise ValueError("surface has a boundary: bc must be dirichlet|neumann")
    return bc


def assemble_lb(band: BandGrid, bc: str | None = None,
                gamma: float | None = None) -> DiscreteLB:
    """Penalized surface Laplacian M = E1 L - gamma (I - E3) on the band.

    gamma=None picks 2*dim/dx^2.  The E1 L product only ever reads
    Laplacian rows whose difference stencil is complete; the bandwidth
    guarantees that, and it is asserted here.
    """
    bc = _resolve_bc(band, bc)
    if gamma is None:
        gamma = default_gamma(band.dx, band.dim)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    n, dim = band.n, band.dim
    lap_cols, lap_vals = _laplacian_slots(band)
    e1_cols, e1_w = _extension_stencil(band, 1)
    e3_cols, e3_w = _extension_stencil(band, 3)
    if bc == "dirichlet":
        flip = band.on_boundary[:, None]
        e1_w = np.where(flip, -e1_w, e1_w)
        e3_w = np.where(flip, -e3_w, e3_w)

    if np.any(lap_cols[e1_cols.ravel()] == MISSING):
        raise StencilEscape("extension selects a Laplacian row with an "
                            "incomplete difference stencil")

    rows_parts, cols_parts, vals_parts = [], [], []
    arange_n = np.arange(n, dtype=np.int64)
    width = lap_cols.shape[1]
    for slot in range(e1_cols.shape[1]):
        j = e1_cols[:, slot]
        rows_parts.append(np.repeat(arange_n, width))
        cols_parts.append(lap_cols[j].ravel())
        vals_parts.append((e1_w[:, slot:slot + 1] * lap_vals[j]).ravel())
    rows_parts.append(np.repeat(arange_n, e3_cols.shape[1]))
    cols_parts.append(e3_cols.ravel())
    vals_parts.append((gamma * e3_w).ravel())
    rows_parts.append(arange_n)
    cols_parts.append(arange_n)
    vals_parts.append(np.full(n, -gamma))

    m = from_coo(n, n, np.concatenate(rows_parts), np.concatenate(cols_parts),
                 np.concatenate(vals_parts))
    return DiscreteLB(M=m, gamma=float(gamma), dx=band.dx, bc=bc, band=band)
