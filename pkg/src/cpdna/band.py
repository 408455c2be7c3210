"""Narrow computational band of Cartesian grid points around a surface.

Grid points live at origin + ijk*dx where the origin is offset half a
cell from the surface's bounding-box center, so the center never lands
on a grid point and the surface avoids exact-tie interpolation cases.
The band holds every grid point within the bandwidth of the surface;
the bandwidth is the worst-case reach of a degree-p interpolation
stencil plus one difference-stencil step, which closes both stencils.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandTooLarge, EmptyBand
from .surfaces import ClosestPointField

DEFAULT_POINT_CAP = 5_000_000
MISSING = -1


def bandwidth_for(dx: float, dim: int, interp_degree: int) -> float:
    """Stencil-closure bandwidth: sqrt((dim-1)((p+1)/2)^2 + (1+(p+1)/2)^2)*dx
    with p = max(interp_degree, 3)."""
    p = max(interp_degree, 3)
    half = (p + 1) / 2.0
    return float(np.sqrt((dim - 1) * half ** 2 + (1.0 + half) ** 2) * dx)


@dataclass(frozen=True)
class BandGrid:
    field: ClosestPointField
    dx: float
    dim: int
    origin: np.ndarray          # physical location of grid index 0
    ijk: np.ndarray             # (n, dim) integer coordinates, lex sorted
    cp: np.ndarray              # (n, dim) cached closest points
    dist: np.ndarray            # (n,)
    on_boundary: np.ndarray     # (n,) bool
    bandwidth: float
    keys: np.ndarray = field(repr=False)      # packed ijk, ascending
    key_base: np.ndarray = field(repr=False)  # per-axis min ijk
    key_span: np.ndarray = field(repr=False)  # per-axis range size
    neighbor_rows: np.ndarray = field(repr=False)  # (n, 2*dim), MISSING outside

    @property
    def n(self) -> int:
        return len(self.ijk)

    def points(self) -> np.ndarray:
        return self.origin + self.ijk * self.dx

    def rows_of(self, ijk: np.ndarray) -> np.ndarray:
        """Band row index for each integer coordinate; MISSING if absent."""
        ijk = np.atleast_2d(ijk)
        shifted = ijk - self.key_base
        in_box = np.all((shifted >= 0) & (shifted < self.key_span), axis=1)
        keys = np.zeros(len(ijk), dtype=np.int64)
        for a in range(self.dim):
            keys = keys * self.key_span[a] + np.where(in_box, shifted[:, a], 0)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self.keys) - 1)
        found = in_box & (self.keys[pos] == keys)
        return np.where(found, pos, MISSING)

    def stats(self) -> dict:
        return {"band_n": self.n, "bandwidth": self.bandwidth, "dx": self.dx,
                "dim": self.dim}


def build_band(field: ClosestPointField, dx: float, interp_degree: int = 3,
               point_cap: int = DEFAULT_POINT_CAP) -> BandGrid:
    """Enumerate the bounding box, keep grid points within the bandwidth.

    Raises EmptyBand when dx exceeds the bounding-box diagonal (the grid
    cannot resolve the surface; for smaller dx the bandwidth formula
    guarantees a nonempty band) and BandTooLarge past the point cap.
    """
    if not dx > 0:
        raise ValueError("dx must be positive")
    if interp_degree not in (1, 3):
        raise ValueError("interp_degree must be 1 or 3")
    dim = field.dim
    bw = bandwidth_for(dx, dim, interp_degree)
    lo, hi = field.bbox[0], field.bbox[1]
    if dx > np.linalg.norm(hi - lo):
        raise EmptyBand(f"dx={dx} exceeds the bounding-box diagonal "
                        f"{np.linalg.norm(hi - lo):.6g}")
    center = 0.5 * (lo + hi)
    origin = center + 0.5 * dx

    ilo = np.floor((lo - bw - origin) / dx).astype(np.int64)
    ihi = np.ceil((hi + bw - origin) / dx).astype(np.int64)
    counts = ihi - ilo + 1
    ncand = int(np.prod(counts.astype(np.float64)))
    if ncand > 16 * point_cap:
        raise BandTooLarge(f"candidate grid has {ncand} points (cap {point_cap})")

    axes = [np.arange(ilo[a], ihi[a] + 1, dtype=np.int64) for a in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([m.ravel() for m in mesh], axis=1)

    kept_ijk, kept_cp, kept_dist, kept_bnd = [], [], [], []
    chunk = 200_000
    for start in range(0, len(cand), chunk):
        blk = cand[start:start + chunk]
        pts = origin + blk * dx
        cp, dist, bnd = field.query(pts)
        sel = dist <= bw
        kept_ijk.append(blk[sel])
        kept_cp.append(cp[sel])
        kept_dist.append(dist[sel])
        kept_bnd.append(bnd[sel])
    ijk = np.concatenate(kept_ijk)
    if len(ijk) == 0:
        raise EmptyBand("no grid point within the bandwidth")
    if len(ijk) > point_cap:
        raise BandTooLarge(f"band has {len(ijk)} points (cap {point_cap})")
    cp = np.concatenate(kept_cp)
    dist = np.concatenate(kept_dist)
    bnd = np.concatenate(kept_bnd)

    key_base = ijk.min(axis=0)
    key_span = ijk.max(axis=0) - key_base + 1
    shifted = ijk - key_base
    keys = np.zeros(len(ijk), dtype=np.int64)
    for a in range(dim):
        keys = keys * key_span[a] + shifted[:, a]
    order = np.argsort(keys, kind="stable")  # packed order == lex order
    ijk, cp, dist, bnd, keys = ijk[order], cp[order], dist[order], bnd[order], keys[order]

    grid = BandGrid(field=field, dx=dx, dim=dim, origin=origin, ijk=ijk,
                    cp=cp, dist=dist, on_boundary=bnd, bandwidth=bw,
                    keys=keys, key_base=key_base, key_span=key_span,
                    neighbor_rows=_neighbor_table(ijk, keys, key_base, key_span, dim))
    return grid


def _neighbor_table(ijk, keys, key_base, key_span, dim) -> np.ndarray:
    n = len(ijk)
    table = np.full((n, 2 * dim), MISSING, dtype=np.int64)
    for a in range(dim):
        for s, sign in enumerate((+1, -1)):
            nb = ijk.copy()
            nb[:, a] += sign
            shifted = nb - key_base
            in_box = np.all((shifted >= 0) & (shifted < key_span), axis=1)
            k = np.zeros(n, dtype=np.int64)
            for b in range(dim):
                k = k * key_span[b] + np.where(in_box, shifted[:, b], 0)
            pos = np.searchsorted(keys, k)
            pos = np.minimum(pos, n - 1)
            found = in_box & (keys[pos] == k)
            table[:, 2 * a + s] = np.where(found, pos, MISSING)
    return table


def neighbors(grid: BandGrid, row: int):
    """Axis neighbors of a band row: list of (axis, direction, row|None)."""
    if not 0 <= row < grid.n:
        raise IndexError(f"row {row} out of range")
    out = []
    for a in range(grid.dim):
        for s, sign in enumerate((+1, -1)):
            r = grid.neighbor_rows[row, 2 * a + s]
            out.append((a, sign, None if r == MISSING else int(r)))
    return out
