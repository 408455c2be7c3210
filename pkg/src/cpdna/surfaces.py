"""Closest-point functions for analytic and parametric surfaces.

Every surface is exposed as a ClosestPointField: a pure, immutable
object answering vectorized queries x -> (cp(x), |x - cp(x)|, boundary
flag).  Medial-axis queries (sphere center, torus axis, ...) return a
fixed documented representative so runs are deterministic; such points
never enter a narrow band at sane grid spacings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidTransform, IterationFailure

ORTHO_TOL = 1e-12
BOUNDARY_TOL_FACTOR = 1e-9
FOOTPOINT_TOL = 1e-12
FOOTPOINT_MAXIT = 100

CLOSED_KINDS = {"circle", "sphere", "torus", "ellipsoid"}
OPEN_KINDS = {"arc", "hemisphere"}
KINDS = CLOSED_KINDS | OPEN_KINDS | {"parametric", "mesh"}


@dataclass(frozen=True)
class CpResult:
    cp: np.ndarray
    dist: float
    on_boundary: bool


@dataclass(frozen=True)
class SurfaceSpec:
    """Declarative surface description: kind + parameters + transform."""

    kind: str
    params: dict
    bc: str = ""
    rotation: np.ndarray | None = None
    scale: float = 1.0
    translation: np.ndarray | None = None


@dataclass(frozen=True)
class ClosestPointField:
    spec: SurfaceSpec
    dim: int
    bbox: np.ndarray          # (2, dim) axis-aligned, contains the surface
    diameter: float
    closed: bool
    boundary_tol: float
    _query: object = field(repr=False)

    @property
    def bc(self) -> str:
        return self.spec.bc

    def query(self, pts: np.ndarray):
        """Vectorized closest points: returns (cp, dist, on_boundary)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return self._query(pts)

    def query_one(self, x) -> CpResult:
        cp, dist, bnd = self.query(np.asarray(x, dtype=np.float64)[None, :])
        return CpResult(cp[0], float(dist[0]), bool(bnd[0]))


# ---------------------------------------------------------------------------
# analytic closest points (vectorized kernels)


def _sphere_query(pts, radius, boundary_tol):
    nrm = np.linalg.norm(pts, axis=1)
    dirs = np.zeros_like(pts)
    ok = nrm > 0
    dirs[ok] = pts[ok] / nrm[ok, None]
    dirs[~ok, -1] = 1.0  # center tie-break: last-axis direction
    cp = radius * dirs
    dist = np.abs(nrm - radius)
    dist[~ok] = radius
    return cp, dist, np.zeros(len(pts), dtype=bool)


def _circle_query(pts, radius, boundary_tol):
    nrm = np.linalg.norm(pts, axis=1)
    dirs = np.zeros_like(pts)
    ok = nrm > 0
    dirs[ok] = pts[ok] / nrm[ok, None]
    dirs[~ok, 0] = 1.0  # center tie-break: +x
    cp = radius * dirs
    dist = np.abs(nrm - radius)
    dist[~ok] = radius
    return cp, dist, np.zeros(len(pts), dtype=bool)


def _arc_query(pts, radius, angle, boundary_tol):
    phi = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)
    inside = phi <= angle
    # outside the sector: snap to the endpoint with the smaller angular gap
    gap_hi = phi - angle
    gap_lo = 2.0 * np.pi - phi
    phi_cl = np.where(inside, phi, np.where(gap_hi <= gap_lo, angle, 0.0))
    cp = radius * np.stack([np.cos(phi_cl), np.sin(phi_cl)], axis=1)
    dist = np.linalg.norm(pts - cp, axis=1)
    e0 = radius * np.array([1.0, 0.0])
    e1 = radius * np.array([np.cos(angle), np.sin(angle)])
    bnd = (np.linalg.norm(cp - e0, axis=1) <= boundary_tol) \
        | (np.linalg.norm(cp - e1, axis=1) <= boundary_tol)
    return cp, dist, bnd


def _hemisphere_query(pts, radius, boundary_tol):
    # upper half z >= 0; below-rim queries project to the rim circle
    cp, dist, _ = _sphere_query(pts, radius, boundary_tol)
    bnd = np.abs(cp[:, 2]) <= boundary_tol
    below = cp[:, 2] < 0
    if np.any(below):
        q = pts[below, :2]
        qn = np.linalg.norm(q, axis=1)
        dirs = np.zeros_like(q)
        ok = qn > 0
        dirs[ok] = q[ok] / qn[ok, None]
        dirs[~ok, 0] = 1.0  # axis-below-rim tie-break: +x
        rim = np.zeros((len(q), 3))
        rim[:, :2] = radius * dirs
        cp[below] = rim
        dist[below] = np.linalg.norm(pts[below] - rim, axis=1)
        bnd[below] = True
    center = np.all(pts == 0.0, axis=1)
    if np.any(center):
        cp[center] = np.array([radius, 0.0, 0.0])
        dist[center] = radius
        bnd[center] = True
    return cp, dist, bnd


def _torus_query(pts, major, minor, boundary_tol):
    rho = np.linalg.norm(pts[:, :2], axis=1)
    ring_dir = np.zeros((len(pts), 2))
    ok = rho > 0
    ring_dir[ok] = pts[ok, :2] / rho[ok, None]
    ring_dir[~ok, 0] = 1.0  # axis tie-break: +x
    ring = np.concatenate([major * ring_dir, np.zeros((len(pts), 1))], axis=1)
    w = pts - ring
    wn = np.linalg.norm(w, axis=1)
    dirs = np.empty_like(w)
    deg = wn == 0.0  # on the tube center circle: go radially outward
    dirs[~deg] = w[~deg] / wn[~deg, None]
    if np.any(deg):
        dirs[deg, :2] = ring_dir[deg]
        dirs[deg, 2] = 0.0
    cp = ring + minor * dirs
    dist = np.abs(wn - minor)
    return cp, dist, np.zeros(len(pts), dtype=bool)


def _ellipsoid_query(pts, axes, boundary_tol):
    """Foot-point projection via the unique root of the Lagrange equation.

    Works in the positive octant (the ellipsoid is sign-symmetric) and
    substitutes s = t + min(a)^2 so the pole subtraction is exact; the
    root is found by Newton safeguarded with bisection.  Exact zero
    coordinates get a deterministic positive nudge, which doubles as the
    medial-axis tie-break.
    """
    axes = np.asarray(axes, dtype=np.float64)
    n = len(pts)
    signs = np.where(pts < 0.0, -1.0, 1.0)
    xa = np.abs(pts)
    xa = np.where(xa == 0.0, 1e-14 * axes, xa)
    a2 = axes ** 2
    amin2 = a2.min()
    ax = axes * xa
    slo = np.zeros(n)
    shi = np.linalg.norm(ax, axis=1) + amin2  # t = ||a x|| gives F <= 0
    s = shi.copy()
    active = np.ones(n, dtype=bool)
    for _ in range(FOOTPOINT_MAXIT):
        den = (a2 - amin2)[None, :] + s[active, None]
        terms = (ax[active] / den) ** 2
        f = terms.sum(axis=1) - 1.0
        fp = -2.0 * (terms / den).sum(axis=1)
        ia = np.flatnonzero(active)
        pos = f > 0
        slo[ia[pos]] = s[ia[pos]]
        shi[ia[~pos]] = s[ia[~pos]]
        done = (np.abs(f) <= FOOTPOINT_TOL) | \
               (shi[ia] - slo[ia] <= 4.0 * np.finfo(float).eps * np.abs(shi[ia]))
        active[ia[done]] = False
        if not np.any(active):
            break
        ia = np.flatnonzero(active)
        snew = s[ia] - f[~done] / fp[~done]
        bad = ~((snew > slo[ia]) & (snew < shi[ia]) & np.isfinite(snew))
        snew[bad] = 0.5 * (slo[ia[bad]] + shi[ia[bad]])
        s[ia] = snew
    if np.any(active):
        raise IterationFailure(
            f"ellipsoid foot point: {int(active.sum())} queries did not "
            f"converge in {FOOTPOINT_MAXIT} iterations")
    t = s - amin2
    p = a2[None, :] * xa / (a2[None, :] + t[:, None])
    p /= np.linalg.norm(p / axes[None, :], axis=1)[:, None]  # polish onto the surface
    cp = signs * p
    dist = np.linalg.norm(pts - cp, axis=1)
    return cp, dist, np.zeros(n, dtype=bool)


# ---------------------------------------------------------------------------
# parametric charts


@dataclass(frozen=True)
class ParametricChart:
    """Single-chart parametric surface with an optionally analytic jet.

    Axes are either 'free' (the formula is globally defined and
    periodic, so Newton never needs a constraint there) or clamped to
    the domain, in which case the clamped edge may be a true surface
    boundary.
    """

    name: str
    params: dict
    fn: object
    u_range: tuple
    v_range: tuple
    u_free: bool
    closed: bool
    v_lo_boundary: bool
    v_hi_boundary: bool
    jet: object = None
    seed_nu: int = 64
    seed_nv: int = 64


def _fd_jet(fn, u, v, hu, hv):
    x = fn(u, v)
    xup, xum = fn(u + hu, v), fn(u - hu, v)
    xvp, xvm = fn(u, v + hv), fn(u, v - hv)
    xu = (xup - xum) / (2 * hu)
    xv = (xvp - xvm) / (2 * hv)
    xuu = (xup - 2 * x + xum) / hu ** 2
    xvv = (xvp - 2 * x + xvm) / hv ** 2
    xpp = fn(u + hu, v + hv)
    xpm = fn(u + hu, v - hv)
    xmp = fn(u - hu, v + hv)
    xmm = fn(u - hu, v - hv)
    xuv = (xpp - xpm - xmp + xmm) / (4 * hu * hv)
    return x, xu, xv, xuu, xuv, xvv


def _chart_seeds(chart: ParametricChart):
    u0, u1 = chart.u_range
    v0, v1 = chart.v_range
    if chart.u_free:
        us = u0 + (u1 - u0) * np.arange(chart.seed_nu) / chart.seed_nu
    else:
        us = np.linspace(u0, u1, chart.seed_nu)
    vs = np.linspace(v0, v1, chart.seed_nv)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    return uu.ravel(), vv.ravel()


def _parametric_query_factory(chart: ParametricChart, boundary_tol):
    su, sv = _chart_seeds(chart)
    seed_pts = chart.fn(su, sv)
    tree = cKDTree(seed_pts)
    u0, u1 = chart.u_range
    v0, v1 = chart.v_range
    hu = 1e-5 * (u1 - u0)
    hv = 1e-5 * (v1 - v0)
    step_tol = 1e-13 * max(u1 - u0, v1 - v0)

    def jet(u, v):
        if chart.jet is not None:
            return chart.jet(u, v)
        return _fd_jet(chart.fn, u, v, hu, hv)

    def query(pts):
        n = len(pts)
        _, idx = tree.query(pts)
        u, v = su[idx].copy(), sv[idx].copy()
        g = 0.5 * np.sum((chart.fn(u, v) - pts) ** 2, axis=1)
        converged = np.zeros(n, dtype=bool)
        for _ in range(FOOTPOINT_MAXIT):
            act = np.flatnonzero(~converged)
            if act.size == 0:
                break
            x, xu, xv, xuu, xuv, xvv = jet(u[act], v[act])
            r = x - pts[act]
            gu = np.sum(r * xu, axis=1)
            gv = np.sum(r * xv, axis=1)
            huu = np.sum(xu * xu, axis=1) + np.sum(r * xuu, axis=1)
            huv = np.sum(xu * xv, axis=1) + np.sum(r * xuv, axis=1)
            hvv = np.sum(xv * xv, axis=1) + np.sum(r * xvv, axis=1)
            det = huu * hvv - huv ** 2
            du = np.where(det > 0, -(hvv * gu - huv * gv) / det, -gu)
            dv = np.where(det > 0, -(huu * gv - huv * gu) / det, -gv)
            descent = du * gu + dv * gv < 0
            du = np.where(descent, du, -gu)
            dv = np.where(descent, dv, -gv)
            # points pinned at a v-edge with an outward step: 1D Newton in u
            pinned = ((v[act] <= v0) & (dv < 0)) | ((v[act] >= v1) & (dv > 0))
            safe_huu = np.where(huu > 0, huu, 1.0)
            du = np.where(pinned, np.where(huu > 0, -gu / safe_huu, -gu), du)
            dv = np.where(pinned, 0.0, dv)
            step = np.ones(act.size)
            unew, vnew, gnew = u[act], v[act], g[act]
            pending = np.ones(act.size, dtype=bool)
            for _halve in range(40):
                trial_u = u[act] + step * du
                trial_v = np.clip(v[act] + step * dv, v0, v1)
                if not chart.u_free:
                    trial_u = np.clip(trial_u, u0, u1)
                gt = 0.5 * np.sum((chart.fn(trial_u, trial_v) - pts[act]) ** 2, axis=1)
                improved = pending & (gt <= g[act])
                unew = np.where(improved, trial_u, unew)
                vnew = np.where(improved, trial_v, vnew)
                gnew = np.where(improved, gt, gnew)
                pending &= ~improved
                if not np.any(pending):
                    break
                step *= 0.5
            moved = np.hypot(unew - u[act], vnew - v[act])
            u[act], v[act], g[act] = unew, vnew, gnew
            converged[act[(moved <= step_tol) | pending]] = True
        if not np.all(converged):
            raise IterationFailure(
                f"parametric closest point: {int((~converged).sum())} queries "
                f"did not converge in {FOOTPOINT_MAXIT} iterations")
        cp = chart.fn(u, v)
        dist = np.linalg.norm(pts - cp, axis=1)
        bnd = np.zeros(n, dtype=bool)
        if not chart.closed:
            _, _, xv = jet(u, v)[:3]
            vscale = np.linalg.norm(xv, axis=1)
            ptol = boundary_tol / np.maximum(vscale, 1e-300)
            if chart.v_lo_boundary:
                bnd |= v - v0 <= ptol
            if chart.v_hi_boundary:
                bnd |= v1 - v <= ptol
        return cp, dist, bnd

    return query


def mobius_chart(radius: float = 1.0, width: float = 1.0) -> ParametricChart:
    """Half-twist strip; the seam identification (u+2pi, v) = (u, -v) is
    built into the formula, so Newton walks it freely."""

    def fn(u, v):
        c = radius + v * np.cos(u / 2)
        return np.stack([c * np.cos(u), c * np.sin(u), v * np.sin(u / 2)], axis=-1)

    def jet(u, v):
        ch, sh = np.cos(u / 2), np.sin(u / 2)
        cu, su = np.cos(u), np.sin(u)
        c = radius + v * ch
        cu_v = -0.5 * v * sh
        x = np.stack([c * cu, c * su, v * sh], axis=-1)
        xu = np.stack([cu_v * cu - c * su, cu_v * su + c * cu, 0.5 * v * ch], axis=-1)
        xv = np.stack([ch * cu, ch * su, sh], axis=-1)
        c_uu = -0.25 * v * ch
        xuu = np.stack([c_uu * cu - 2 * cu_v * su - c * cu,
                        c_uu * su + 2 * cu_v * cu - c * su,
                        -0.25 * v * sh], axis=-1)
        xuv = np.stack([-0.5 * sh * cu - ch * su,
                        -0.5 * sh * su + ch * cu,
                        0.5 * ch], axis=-1)
        xvv = np.zeros_like(x)
        return x, xu, xv, xuu, xuv, xvv

    return ParametricChart(
        name="mobius", params={"radius": radius, "width": width},
        fn=fn, jet=jet, u_range=(0.0, 2.0 * np.pi), v_range=(-width / 2, width / 2),
        u_free=True, closed=False, v_lo_boundary=True, v_hi_boundary=True)


def sphere_patch_chart(radius: float, phi_lo: float = 0.0,
                       phi_hi: float = np.pi) -> ParametricChart:
    """Sphere in polar-angle range [phi_lo, phi_hi]: caps, rings, or the
    full (closed) sphere when the range covers the poles."""

    def fn(theta, phi):
        sp = np.sin(phi)
        return radius * np.stack([sp * np.cos(theta), sp * np.sin(theta),
                                  np.cos(phi)], axis=-1)

    closed = phi_lo <= 0.0 and phi_hi >= np.pi
    return ParametricChart(
        name="sphere_patch",
        params={"radius": radius, "phi_lo": phi_lo, "phi_hi": phi_hi},
        fn=fn, jet=None, u_range=(0.0, 2.0 * np.pi), v_range=(phi_lo, phi_hi),
        u_free=True, closed=closed,
        v_lo_boundary=phi_lo > 0.0, v_hi_boundary=phi_hi < np.pi)


_CHART_BUILDERS = {
    "mobius": lambda p: mobius_chart(p.get("radius", 1.0), p.get("width", 1.0)),
    "sphere_patch": lambda p: sphere_patch_chart(
        p["radius"], p.get("phi_lo", 0.0), p.get("phi_hi", np.pi)),
}


# ---------------------------------------------------------------------------
# spec -> field


def _base_field(spec: SurfaceSpec):
    """Returns (query, dim, bbox, closed) for the untransformed surface."""
    p = spec.params
    kind = spec.kind
    if kind == "circle":
        r = _positive(p["radius"], "radius")
        bbox = np.array([[-r, -r], [r, r]])
        return (lambda pts, tol: _circle_query(pts, r, tol)), 2, bbox, True
    if kind == "arc":
        r = _positive(p["radius"], "radius")
        ang = float(p["angle"])
        if not 0.0 < ang < 2.0 * np.pi:
            raise ValueError("arc angle must be in (0, 2*pi)")
        bbox = np.array([[-r, -r], [r, r]])
        return (lambda pts, tol: _arc_query(pts, r, ang, tol)), 2, bbox, False
    if kind == "sphere":
        r = _positive(p["radius"], "radius")
        bbox = np.array([[-r] * 3, [r] * 3])
        return (lambda pts, tol: _sphere_query(pts, r, tol)), 3, bbox, True
    if kind == "hemisphere":
        r = _positive(p["radius"], "radius")
        bbox = np.array([[-r, -r, 0.0], [r, r, r]])
        return (lambda pts, tol: _hemisphere_query(pts, r, tol)), 3, bbox, False
    if kind == "torus":
        rr = _positive(p["major_radius"], "major_radius")
        r = _positive(p["minor_radius"], "minor_radius")
        if not r < rr:
            raise ValueError("torus needs minor_radius < major_radius")
        bbox = np.array([[-rr - r, -rr - r, -r], [rr + r, rr + r, r]])
        return (lambda pts, tol: _torus_query(pts, rr, r, tol)), 3, bbox, True
    if kind == "ellipsoid":
        axes = np.array([_positive(p[k], k) for k in ("a", "b", "c")])
        bbox = np.array([-axes, axes])
        return (lambda pts, tol: _ellipsoid_query(pts, axes, tol)), 3, bbox, True
    if kind == "parametric":
        name = p["name"]
        if name not in _CHART_BUILDERS:
            raise ValueError(f"unknown parametric chart {name!r}")
        chart = _CHART_BUILDERS[name](p)
        su, sv = _chart_seeds(replace(chart, seed_nu=256, seed_nv=64))
        samples = chart.fn(su, sv)
        lo, hi = samples.min(axis=0), samples.max(axis=0)
        pad = 0.01 * np.linalg.norm(hi - lo)
        bbox = np.array([lo - pad, hi + pad])
        def make(chart=chart):
            cache = {}
            def q(pts, tol):
                if "f" not in cache:
                    cache["f"] = _parametric_query_factory(chart, tol)
                return cache["f"](pts)
            return q
        return make(), 3, bbox, chart.closed
    if kind == "mesh":
        from .meshio import mesh_base_field  # deferred: meshio imports this module
        return mesh_base_field(p)
    raise ValueError(f"unknown surface kind {spec.kind!r}")


def _positive(v, name) -> float:
    v = float(v)
    if not v > 0:
        raise ValueError(f"{name} must be strictly positive, got {v}")
    return v


def check_rotation(q: np.ndarray, dim: int):
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (dim, dim):
        raise InvalidTransform(f"rotation must be {dim}x{dim}, got {q.shape}")
    if np.max(np.abs(q.T @ q - np.eye(dim))) > ORTHO_TOL:
        raise InvalidTransform("rotation matrix fails the orthogonality check")
    return q


def make_field(spec: SurfaceSpec) -> ClosestPointField:
    base_query, dim, bbox, closed = _base_field(spec)
    bc = spec.bc or ("closed" if closed else "neumann")
    if closed and bc != "closed":
        raise ValueError(f"{spec.kind} has empty boundary; bc must be 'closed'")
    if not closed and bc not in ("dirichlet", "neumann"):
        raise ValueError(f"{spec.kind} has a boundary; bc must be dirichlet|neumann")
    spec = replace(spec, bc=bc)

    s = float(spec.scale)
    if not s > 0:
        raise ValueError("scale must be strictly positive")
    q = check_rotation(spec.rotation, dim) if spec.rotation is not None else None
    t = (np.zeros(dim) if spec.translation is None
         else np.asarray(spec.translation, dtype=np.float64))
    if t.shape != (dim,):
        raise ValueError(f"translation must have length {dim}")

    base_diam = float(np.linalg.norm(bbox[1] - bbox[0]))
    btol = BOUNDARY_TOL_FACTOR * base_diam
    identity_tf = s == 1.0 and q is None and not np.any(t)

    if identity_tf:
        out_bbox = bbox

        def query(pts):
            return base_query(pts, btol)
    else:
        qm = np.eye(dim) if q is None else q
        corners = np.array(np.meshgrid(*bbox.T, indexing="ij")).reshape(dim, -1).T
        tc = s * corners @ qm.T + t
        out_bbox = np.array([tc.min(axis=0), tc.max(axis=0)])

        def query(pts):
            local = ((pts - t) @ qm) / s
            cp0, d0, b0 = base_query(local, btol)
            return s * (cp0 @ qm.T) + t, s * d0, b0

    return ClosestPointField(spec=spec, dim=dim, bbox=out_bbox,
                             diameter=s * base_diam, closed=closed,
                             boundary_tol=s * btol, _query=query)


def transform_surface(spec: SurfaceSpec, rotation=None, scale: float = 1.0,
                      translation=None) -> SurfaceSpec:
    """Compose a rigid rotation + uniform scale + translation onto a spec.

    The transformed field satisfies cp'(x) = s Q cp(Q^T (x - t)/s) + t,
    and applying transform_surface twice composes the two maps.
    """
    dim = 2 if spec.kind in ("circle", "arc") else 3
    if not scale > 0:
        raise ValueError("scale must be strictly positive")
    q2 = (np.eye(dim) if rotation is None
          else check_rotation(np.asarray(rotation, dtype=np.float64), dim))
    t2 = (np.zeros(dim) if translation is None
          else np.asarray(translation, dtype=np.float64))
    q1 = np.eye(dim) if spec.rotation is None else np.asarray(spec.rotation)
    t1 = np.zeros(dim) if spec.translation is None else np.asarray(spec.translation)
    return replace(spec, rotation=q2 @ q1, scale=scale * spec.scale,
                   translation=scale * (q2 @ t1) + t2)


# ---------------------------------------------------------------------------
# scalar convenience wrappers


def _one(query, x, *args) -> CpResult:
    cp, d, b = query(np.asarray(x, dtype=np.float64)[None, :], *args)
    return CpResult(cp[0], float(d[0]), bool(b[0]))


def cp_sphere(x, radius: float, center=(0.0, 0.0, 0.0)) -> CpResult:
    c = np.asarray(center, dtype=np.float64)
    r = _one(_sphere_query, np.asarray(x, dtype=np.float64) - c, radius, 0.0)
    return CpResult(r.cp + c, r.dist, r.on_boundary)


def cp_circle(x, radius: float) -> CpResult:
    return _one(_circle_query, x, radius, 0.0)


def cp_arc(x, radius: float, angle: float, boundary_tol=None) -> CpResult:
    tol = boundary_tol if boundary_tol is not None else BOUNDARY_TOL_FACTOR * 2 * radius
    return _one(_arc_query, x, radius, angle, tol)


def cp_torus(x, major_radius: float, minor_radius: float) -> CpResult:
    return _one(_torus_query, x, major_radius, minor_radius, 0.0)


def cp_hemisphere(x, radius: float, boundary_tol=None) -> CpResult:
    tol = boundary_tol if boundary_tol is not None else BOUNDARY_TOL_FACTOR * 2 * radius
    return _one(_hemisphere_query, x, radius, tol)


def cp_ellipsoid(x, semi_axes) -> CpResult:
    return _one(_ellipsoid_query, x, np.asarray(semi_axes, dtype=np.float64), 0.0)


def cp_parametric(x, chart: ParametricChart, boundary_tol=None) -> CpResult:
    su, sv = _chart_seeds(chart)
    samples = chart.fn(su, sv)
    diam = float(np.linalg.norm(samples.max(axis=0) - samples.min(axis=0)))
    tol = boundary_tol if boundary_tol is not None else BOUNDARY_TOL_FACTOR * diam
    query = _parametric_query_factory(chart, tol)
    cp, d, b = query(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    return CpResult(cp[0], float(d[0]), bool(b[0]))


# ---------------------------------------------------------------------------
# JSON schema


def rotation_from_axis_angle(axis, angle: float, dim: int) -> np.ndarray:
    if dim == 2:
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c, -s], [s, c]])
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0:
        raise InvalidTransform("rotation axis must be nonzero")
    u = axis / n
    k = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def axis_angle_from_rotation(q: np.ndarray):
    q = np.asarray(q, dtype=np.float64)
    if q.shape == (2, 2):
        return [0.0, 0.0, 1.0], float(np.arctan2(q[1, 0], q[0, 0]))
    if abs(np.linalg.det(q) - 1.0) > 1e-9:
        raise InvalidTransform("only proper rotations can be serialized")
    angle = float(np.arccos(np.clip((np.trace(q) - 1) / 2, -1.0, 1.0)))
    if angle < 1e-12:
        return [0.0, 0.0, 1.0], 0.0
    if np.pi - angle < 1e-6:
        # near-pi: axis from the dominant column of Q + I
        m = q + np.eye(3)
        col = m[:, int(np.argmax(np.linalg.norm(m, axis=0)))]
        u = col / np.linalg.norm(col)
        return [float(c) for c in u], angle
    u = np.array([q[2, 1] - q[1, 2], q[0, 2] - q[2, 0], q[1, 0] - q[0, 1]])
    u /= 2 * np.sin(angle)
    return [float(c) for c in u], angle


def surface_to_json(spec: SurfaceSpec) -> dict:
    dim = 2 if spec.kind in ("circle", "arc") else 3
    axis, angle = ([0.0, 0.0, 1.0], 0.0)
    if spec.rotation is not None:
        axis, angle = axis_angle_from_rotation(spec.rotation)
    t = (np.zeros(dim) if spec.translation is None else spec.translation)
    return {"kind": spec.kind, "params": dict(spec.params), "bc": spec.bc,
            "rotation_axis": axis, "rotation_angle": angle,
            "scale": float(spec.scale), "translation": [float(c) for c in t]}


def surface_from_json(doc) -> SurfaceSpec:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    kind = doc["kind"]
    if kind not in KINDS:
        raise ValueError(f"unknown surface kind {kind!r}")
    dim = 2 if kind in ("circle", "arc") else 3
    angle = float(doc.get("rotation_angle", 0.0))
    rotation = None
    if angle != 0.0:
        rotation = rotation_from_axis_angle(doc.get("rotation_axis", [0, 0, 1]),
                                            angle, dim)
    translation = doc.get("translation")
    if translation is not None:
        translation = np.asarray(translation, dtype=np.float64)
    return SurfaceSpec(kind=kind, params=dict(doc.get("params", {})),
                       bc=doc.get("bc", ""), rotation=rotation,
                       scale=float(doc.get("scale", 1.0)),
                       translation=translation)


def load_surface(path) -> SurfaceSpec:
    with open(path) as fh:
        return surface_from_json(json.load(fh))
