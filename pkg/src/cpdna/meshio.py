"""Triangle meshes as closest-point surfaces: OBJ ingestion, an AABB
tree over the triangles, and exact point-to-triangle queries.

Boundary edges (edges on exactly one triangle) make open meshes behave
like the analytic open surfaces: a query whose nearest point lies on a
boundary edge or vertex reports the boundary flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import IndexOutOfRange, ParseError

LEAF_SIZE = 8
DEGENERATE_AREA_FACTOR = 1e-14


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray     # (v, 3)
    triangles: np.ndarray    # (t, 3) int
    boundary_edges: np.ndarray  # (b, 2) int, each on exactly one triangle

    @property
    def closed(self) -> bool:
        return len(self.boundary_edges) == 0

    @property
    def bbox(self) -> np.ndarray:
        return np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])


@dataclass(frozen=True)
class MeshBvh:
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_left: np.ndarray    # -1 for leaves
    node_right: np.ndarray
    node_start: np.ndarray   # leaf range into tri_order
    node_count: np.ndarray
    tri_order: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_lo)


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    edges = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


def make_trimesh(vertices, triangles) -> TriMesh:
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        raise IndexOutOfRange(
            f"face references vertex outside 0..{len(vertices) - 1}")
    if len(triangles):
        tri = vertices[triangles]
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        diag2 = float(np.sum((vertices.max(axis=0) - vertices.min(axis=0)) ** 2))
        bad = np.flatnonzero(areas <= DEGENERATE_AREA_FACTOR * diag2)
        if bad.size:
            raise ValueError(f"{bad.size} degenerate triangles (first: {bad[0]})")
    return TriMesh(vertices=vertices, triangles=triangles,
                   boundary_edges=_boundary_edges(triangles))


# ---------------------------------------------------------------------------
# OBJ parsing


def parse_obj(source) -> TriMesh:
    """Wavefront OBJ subset: `v` and `f` records; faces fan-triangulated;
    1-based and negative (relative) indices; vn/vt/comments ignored."""
    if isinstance(source, bytes):
        source = source.decode()
    if hasattr(source, "read"):
        source = source.read()
    vertices: list = []
    faces: list = []
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        tag = tokens[0]
        if tag == "v":
            if len(tokens) < 4:
                raise ParseError(lineno, f"vertex needs 3 coordinates: {raw!r}")
            try:
                vertices.append([float(t) for t in tokens[1:4]])
            except ValueError:
                raise ParseError(lineno, f"bad vertex coordinate: {raw!r}") from None
        elif tag == "f":
            if len(tokens) < 4:
                raise ParseError(lineno, f"face needs at least 3 vertices: {raw!r}")
            idx = []
            for tok in tokens[1:]:
                head = tok.split("/", 1)[0]
                try:
                    i = int(head)
                except ValueError:
                    raise ParseError(lineno, f"bad face index {tok!r}") from None
                if i == 0:
                    raise ParseError(lineno, "face indices are 1-based; 0 invalid")
                if i < 0:
                    i = len(vertices) + i  # relative to vertices defined so far
                else:
                    i = i - 1
                if not 0 <= i < len(vertices):
                    raise IndexOutOfRange(
                        f"line {lineno}: face index {tok} outside defined vertices")
                idx.append(i)
            for a in range(1, len(idx) - 1):  # fan rule
                faces.append([idx[0], idx[a], idx[a + 1]])
        # vn / vt / o / g / s / usemtl / mtllib and friends are ignored
    return make_trimesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3))


def load_obj(path) -> TriMesh:
    with open(path) as fh:
        return parse_obj(fh)


# ---------------------------------------------------------------------------
# BVH build (deterministic median split on the longest centroid axis)


def build_bvh(mesh: TriMesh, leaf_size: int = LEAF_SIZE) -> MeshBvh:
    tri = mesh.vertices[mesh.triangles]
    if len(tri) == 0:
        raise ValueError("cannot build a BVH over an empty mesh")
    tlo, thi = tri.min(axis=1), tri.max(axis=1)
    centroid = tri.mean(axis=1)
    order = np.arange(len(tri), dtype=np.int64)

    node_lo, node_hi, node_left, node_right = [], [], [], []
    node_start, node_count = [], []

    def new_node(start, count):
        sel = order[start:start + count]
        node_lo.append(tlo[sel].min(axis=0))
        node_hi.append(thi[sel].max(axis=0))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(start)
        node_count.append(count)
        return len(node_lo) - 1

    stack = [(new_node(0, len(tri)), 0, len(tri))]
    while stack:
        node, start, count = stack.pop()
        if count <= leaf_size:
            continue
        sel = order[start:start + count]
        c = centroid[sel]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        perm = np.lexsort((sel, c[:, axis]))  # deterministic under ties
        order[start:start + count] = sel[perm]
        half = count // 2
        left = new_node(start, half)
        right = new_node(start + half, count - half)
        node_left[node], node_right[node] = left, right
        node_start[node], node_count[node] = -1, 0
        stack.append((left, start, half))
        stack.append((right, start + half, count - half))

    return MeshBvh(node_lo=np.array(node_lo), node_hi=np.array(node_hi),
                   node_left=np.array(node_left, dtype=np.int64),
                   node_right=np.array(node_right, dtype=np.int64),
                   node_start=np.array(node_start, dtype=np.int64),
                   node_count=np.array(node_count, dtype=np.int64),
                   tri_order=order)


# ---------------------------------------------------------------------------
# queries


@njit(cache=True)
def _tri_closest(tri, q, out):
    """Exact closest point on one triangle (vertex/edge/face regions)."""
    ax, ay, az = tri[0, 0], tri[0, 1], tri[0, 2]
    abx, aby, abz = tri[1, 0] - ax, tri[1, 1] - ay, tri[1, 2] - az
    acx, acy, acz = tri[2, 0] - ax, tri[2, 1] - ay, tri[2, 2] - az
    apx, apy, apz = q[0] - ax, q[1] - ay, q[2] - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        out[0], out[1], out[2] = ax, ay, az
        return
    bpx, bpy, bpz = q[0] - tri[1, 0], q[1] - tri[1, 1], q[2] - tri[1, 2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        out[0], out[1], out[2] = tri[1, 0], tri[1, 1], tri[1, 2]
        return
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        out[0], out[1], out[2] = ax + v * abx, ay + v * aby, az + v * abz
        return
    cpx, cpy, cpz = q[0] - tri[2, 0], q[1] - tri[2, 1], q[2] - tri[2, 2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        out[0], out[1], out[2] = tri[2, 0], tri[2, 1], tri[2, 2]
        return
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        out[0], out[1], out[2] = ax + w * acx, ay + w * acy, az + w * acz
        return
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[0] = tri[1, 0] + w * (tri[2, 0] - tri[1, 0])
        out[1] = tri[1, 1] + w * (tri[2, 1] - tri[1, 1])
        out[2] = tri[1, 2] + w * (tri[2, 2] - tri[1, 2])
        return
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    out[0] = ax + abx * v + acx * w
    out[1] = ay + aby * v + acy * w
    out[2] = az + abz * v + acz * w


@njit(cache=True)
def _bvh_query(node_lo, node_hi, node_left, node_right, node_start,
               node_count, tri_order, tris, pts, out_cp, out_d2, out_tri):
    stack = np.empty(128, dtype=np.int64)
    cand = np.empty(3)
    for qi in range(pts.shape[0]):
        q = pts[qi]
        best_d2 = np.inf
        best_tri = -1
        top = 0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            # squared distance from q to the node box
            dd = 0.0
            for a in range(3):
                lo_gap = node_lo[node, a] - q[a]
                hi_gap = q[a] - node_hi[node, a]
                if lo_gap > 0.0:
                    dd += lo_gap * lo_gap
                if hi_gap > 0.0:
                    dd += hi_gap * hi_gap
            if dd > best_d2:
                continue
            left = node_left[node]
            if left < 0:
                start = node_start[node]
                for p in range(start, start + node_count[node]):
                    t = tri_order[p]
                    _tri_closest(tris[t], q, cand)
                    d2 = ((cand[0] - q[0]) ** 2 + (cand[1] - q[1]) ** 2
                          + (cand[2] - q[2]) ** 2)
                    if d2 < best_d2 or (d2 == best_d2 and t < best_tri):
                        best_d2 = d2
                        best_tri = t
                        out_cp[qi, 0] = cand[0]
                        out_cp[qi, 1] = cand[1]
                        out_cp[qi, 2] = cand[2]
            else:
                stack[top] = left
                top += 1
                stack[top] = node_right[node]
                top += 1
        out_d2[qi] = best_d2
        out_tri[qi] = best_tri


def mesh_closest_points(pts: np.ndarray, mesh: TriMesh, bvh: MeshBvh):
    """Vectorized exact closest points; returns (cp, dist, triangle)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    tris = np.ascontiguousarray(mesh.vertices[mesh.triangles])
    cp = np.empty_like(pts)
    d2 = np.empty(len(pts))
    tri = np.empty(len(pts), dtype=np.int64)
    _bvh_query(bvh.node_lo, bvh.node_hi, bvh.node_left, bvh.node_right,
               bvh.node_start, bvh.node_count, bvh.tri_order, tris,
               pts, cp, d2, tri)
    return cp, np.sqrt(d2), tri


def _near_boundary(cp: np.ndarray, mesh: TriMesh, tol: float) -> np.ndarray:
    if mesh.closed:
        return np.zeros(len(cp), dtype=bool)
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    ab = b - a
    denom = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    out = np.zeros(len(cp), dtype=bool)
    chunk = max(1, 20_000_000 // max(len(a), 1))
    for s in range(0, len(cp), chunk):
        p = cp[s:s + chunk]
        t = np.clip(np.einsum("qed,ed->qe", p[:, None, :] - a[None, :, :], ab)
                    / denom[None, :], 0.0, 1.0)
        near = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d2 = np.sum((p[:, None, :] - near) ** 2, axis=2)
        out[s:s + chunk] = d2.min(axis=1) <= tol * tol
    return out


def cp_mesh(x, mesh: TriMesh, bvh: MeshBvh, boundary_tol: float | None = None):
    """Closest point on a triangle mesh with boundary flagging."""
    from .surfaces import BOUNDARY_TOL_FACTOR, CpResult
    if boundary_tol is None:
        bb = mesh.bbox
        boundary_tol = BOUNDARY_TOL_FACTOR * float(np.linalg.norm(bb[1] - bb[0]))
    cp, dist, _ = mesh_closest_points(np.asarray(x, dtype=np.float64)[None, :],
                                      mesh, bvh)
    bnd = _near_boundary(cp, mesh, boundary_tol)
    return CpResult(cp[0], float(dist[0]), bool(bnd[0]))


def mesh_base_field(params: dict):
    """Adapter used by the surface factory for kind == 'mesh'."""
    if "mesh" in params:
        mesh = params["mesh"]
    else:
        mesh = load_obj(params["path"])
    bvh = build_bvh(mesh)

    def query(pts, tol):
        cp, dist, _ = mesh_closest_points(pts, mesh, bvh)
        return cp, dist, _near_boundary(cp, mesh, tol)

    return query, 3, mesh.bbox, mesh.closed


# ---------------------------------------------------------------------------
# procedural meshes for experiments and tests


def icosphere(refinements: int = 3, radius: float = 1.0) -> TriMesh:
    """Icosahedron refined by midpoint subdivision, projected to radius."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v / np.linalg.norm(v) for v in verts]
    for _ in range(refinements):
        midpoint: dict = {}
        new_faces = []

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        for (i, j, k) in faces:
            a, b, c = mid(i, j), mid(j, k), mid(k, i)
            new_faces += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        faces = new_faces
    v = radius * np.array(verts)
    return make_trimesh(v, np.array(faces, dtype=np.int64))
