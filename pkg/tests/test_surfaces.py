import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdna.errors import InvalidTransform
from cpdna.surfaces import (SurfaceSpec, cp_arc, cp_circle, cp_ellipsoid,
                            cp_hemisphere, cp_parametric, cp_sphere, cp_torus,
                            make_field, mobius_chart, rotation_from_axis_angle,
                            sphere_patch_chart, surface_from_json,
                            surface_to_json, transform_surface)

SQ2 = np.sqrt(2.0)


def torus_points(major, minor, nt, np_):
    t = np.linspace(0, 2 * np.pi, nt, endpoint=False)
    p = np.linspace(0, 2 * np.pi, np_, endpoint=False)
    tt, pp = np.meshgrid(t, p, indexing="ij")
    r = major + minor * np.cos(pp)
    return np.stack([r * np.cos(tt), r * np.sin(tt), minor * np.sin(pp)],
                    axis=-1).reshape(-1, 3)


def ellipsoid_points(axes, nt, np_):
    t = np.linspace(0, 2 * np.pi, nt, endpoint=False)
    p = np.linspace(0, np.pi, np_)
    tt, pp = np.meshgrid(t, p, indexing="ij")
    return np.stack([axes[0] * np.sin(pp) * np.cos(tt),
                     axes[1] * np.sin(pp) * np.sin(tt),
                     axes[2] * np.cos(pp)], axis=-1).reshape(-1, 3)


class TestSphere:
    def test_radial_projection(self):
        r = cp_sphere((2.0, 0.0, 0.0), 1.0)
        assert np.allclose(r.cp, [1, 0, 0]) and r.dist == pytest.approx(1.0)
        assert not r.on_boundary

    def test_point_on_surface(self):
        r = cp_sphere((0.0, 3.0, 4.0), 5.0)
        assert np.allclose(r.cp, [0, 3, 4]) and r.dist == pytest.approx(0.0)

    def test_center_tie_break(self):
        r = cp_sphere((0.0, 0.0, 0.0), 2.0)
        assert np.allclose(r.cp, [0, 0, 2]) and r.dist == pytest.approx(2.0)

    def test_off_center(self):
        r = cp_sphere((3.0, 1.0, 1.0), 1.0, center=(2.0, 1.0, 1.0))
        assert np.allclose(r.cp, [3, 1, 1])


class TestTorus:
    def test_in_plane(self):
        r = cp_torus((2.0, 0.0, 0.0), 1.0, 0.5)
        assert np.allclose(r.cp, [1.5, 0, 0]) and r.dist == pytest.approx(0.5)

    def test_on_tube(self):
        r = cp_torus((1.0, 0.0, 0.5), 1.0, 0.5)
        assert r.dist == pytest.approx(0.0, abs=1e-12)

    def test_against_dense_sampling(self):
        x = np.array([0.3, 0.4, 0.2])
        r = cp_torus(x, 1.0, 0.5)
        samples = torus_points(1.0, 0.5, 2000, 2000)
        d = np.linalg.norm(samples - x, axis=1)
        assert abs(r.dist - d.min()) < 1e-4
        assert np.linalg.norm(r.cp - samples[np.argmin(d)]) < 1e-3

    def test_axis_tie_break(self):
        r = cp_torus((0.0, 0.0, 0.0), 1.0, 0.5)
        assert np.allclose(r.cp, [0.5, 0, 0])


class TestHemisphere:
    def test_above_pole(self):
        r = cp_hemisphere((0.0, 0.0, 2.0), 1.0)
        assert np.allclose(r.cp, [0, 0, 1]) and not r.on_boundary

    def test_rim_projection(self):
        r = cp_hemisphere((2.0, 0.0, -1.0), 1.0)
        assert np.allclose(r.cp, [1, 0, 0])
        assert r.dist == pytest.approx(SQ2)
        assert r.on_boundary

    def test_axis_below_rim(self):
        r = cp_hemisphere((0.0, 0.0, -2.0), 1.0)
        assert np.allclose(r.cp, [1, 0, 0])
        assert r.dist == pytest.approx(np.sqrt(5.0))
        assert r.on_boundary


class TestEllipsoid:
    def test_on_axis(self):
        r = cp_ellipsoid((3.0, 0.0, 0.0), (2.0, 1.0, 1.0))
        assert np.allclose(r.cp, [2, 0, 0], atol=1e-12)
        assert r.dist == pytest.approx(1.0)

    def test_reduces_to_sphere(self):
        r = cp_ellipsoid((0.0, 2.0, 0.0), (1.0, 1.0, 1.0))
        assert np.allclose(r.cp, [0, 1, 0], atol=1e-12)

    def test_against_dense_sampling(self):
        axes = (2.0, 1.0, 0.5)
        x = np.array([1.0, 1.0, 1.0])
        r = cp_ellipsoid(x, axes)
        samples = ellipsoid_points(axes, 2000, 2000)
        d = np.linalg.norm(samples - x, axis=1)
        assert abs(r.dist - d.min()) < 1e-4

    def test_implicit_equation_holds(self, rng):
        axes = np.array([2.0, 1.0, 0.5])
        pts = rng.uniform(-3, 3, size=(500, 3))
        field = make_field(SurfaceSpec("ellipsoid", {"a": 2.0, "b": 1.0, "c": 0.5}))
        cp, dist, _ = field.query(pts)
        resid = np.abs(np.sum((cp / axes) ** 2, axis=1) - 1.0)
        assert resid.max() < 1e-10

    def test_interior_near_axis(self):
        # inside the evolute, close to the long axis: the nearest point
        # leaves the axis plane
        r = cp_ellipsoid((0.1, 0.0, 0.0), (2.0, 1.0, 0.5))
        assert r.dist < 0.55
        assert abs(r.cp[2]) > 0.4


class TestCircleArc:
    def test_circle_projection(self):
        r = cp_circle((0.0, 2.0), 1.0)
        assert np.allclose(r.cp, [0, 1]) and r.dist == pytest.approx(1.0)

    def test_circle_center_tie(self):
        r = cp_circle((0.0, 0.0), 1.0)
        assert np.allclose(r.cp, [1, 0])

    def test_arc_interior(self):
        r = cp_arc((0.0, 3.0), 2.0, np.pi)
        assert np.allclose(r.cp, [0, 2]) and not r.on_boundary

    def test_arc_endpoint(self):
        r = cp_arc((1.0, -1.0), 2.0, np.pi)
        assert np.allclose(r.cp, [2, 0])
        assert r.on_boundary

    def test_arc_wraparound_picks_nearer_endpoint(self):
        r = cp_arc((-1.0, -1.0), 2.0, np.pi)
        assert np.allclose(r.cp, [-2, 0])
        assert r.on_boundary


class TestParametric:
    def test_sphere_chart_matches_closed_form(self):
        chart = sphere_patch_chart(1.0)
        x = np.array([2.0, 0.5, 0.7])
        r = cp_parametric(x, chart)
        ref = cp_sphere(x, 1.0)
        assert np.linalg.norm(r.cp - ref.cp) < 1e-8
        assert abs(r.dist - ref.dist) < 1e-10

    def test_mobius_center_circle(self):
        chart = mobius_chart(1.0, 1.0)
        r = cp_parametric(np.array([1.0, 0.0, 0.0]), chart)
        assert r.dist < 1e-9

    def test_mobius_against_dense_sampling(self):
        chart = mobius_chart(1.0, 1.0)
        x = np.array([0.0, 0.0, 2.0])
        r = cp_parametric(x, chart)
        u = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
        v = np.linspace(-0.5, 0.5, 400)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        samples = chart.fn(uu.ravel(), vv.ravel())
        d = np.linalg.norm(samples - x, axis=1)
        assert abs(r.dist - d.min()) < 1e-4

    def test_mobius_edge_is_boundary(self):
        chart = mobius_chart(1.0, 1.0)
        r = cp_parametric(np.array([2.0, 0.0, 0.0]), chart)
        assert r.on_boundary  # nearest point sits on the strip edge

    def test_sphere_patch_ring_boundaries(self):
        chart = sphere_patch_chart(1.0, 0.4, np.pi - 0.4)
        r = cp_parametric(np.array([0.0, 0.0, 3.0]), chart)
        assert r.on_boundary
        assert r.cp[2] == pytest.approx(np.cos(0.4), abs=1e-8)


class TestTransforms:
    def test_identity(self, rng):
        spec = SurfaceSpec("torus", {"major_radius": 1.0, "minor_radius": 0.5})
        base = make_field(spec)
        moved = make_field(transform_surface(spec))
        pts = rng.uniform(-2, 2, size=(200, 3))
        cp0, d0, b0 = base.query(pts)
        cp1, d1, b1 = moved.query(pts)
        assert np.array_equal(cp0, cp1) and np.array_equal(d0, d1)

    def test_rotational_symmetry_of_sphere(self, rng):
        spec = SurfaceSpec("sphere", {"radius": 1.0})
        q = rotation_from_axis_angle([0, 0, 1], np.pi / 4, 3)
        rot = transform_surface(spec, rotation=q)
        pts = rng.uniform(-2, 2, size=(100, 3))
        cp0 = make_field(spec).query(pts)[0]
        cp1 = make_field(rot).query(pts)[0]
        assert np.allclose(cp0, cp1, atol=1e-12)

    def test_scaled_torus_hand_value(self):
        spec = SurfaceSpec("torus", {"major_radius": 1.0, "minor_radius": 0.5})
        big = transform_surface(spec, scale=2.0)
        r = make_field(big).query_one(np.array([4.0, 0.0, 0.0]))
        assert np.allclose(r.cp, [3, 0, 0]) and r.dist == pytest.approx(1.0)
        direct = cp_torus((4.0, 0.0, 0.0), 2.0, 1.0)
        assert np.allclose(r.cp, direct.cp)

    def test_transform_consistency(self, rng):
        # cp_{T(S)}(T(x)) == T(cp_S(x)) for the rigid map T(x) = Qx + t
        spec = SurfaceSpec("ellipsoid", {"a": 2.0, "b": 1.0, "c": 1.0})
        q = rotation_from_axis_angle([1, 2, 3], 0.7, 3)
        t = np.array([0.3, -0.2, 0.9])
        moved = transform_surface(spec, rotation=q, translation=t)
        pts = rng.uniform(-2, 2, size=(100, 3))
        cp0 = make_field(spec).query(pts)[0]
        cp1 = make_field(moved).query(pts @ q.T + t)[0]
        assert np.allclose(cp1, cp0 @ q.T + t, atol=1e-10)

    def test_composition(self):
        spec = SurfaceSpec("sphere", {"radius": 1.0})
        q1 = rotation_from_axis_angle([0, 0, 1], 0.3, 3)
        q2 = rotation_from_axis_angle([0, 1, 0], 0.5, 3)
        s = transform_surface(transform_surface(spec, rotation=q1, scale=2.0),
                              rotation=q2, translation=[1.0, 0.0, 0.0])
        assert np.allclose(s.rotation, q2 @ q1)
        assert s.scale == pytest.approx(2.0)

    def test_bad_rotation_rejected(self):
        spec = SurfaceSpec("sphere", {"radius": 1.0})
        with pytest.raises(InvalidTransform):
            transform_surface(spec, rotation=np.array([[1.0, 0.1, 0.0],
                                                       [0.0, 1.0, 0.0],
                                                       [0.0, 0.0, 1.0]]))


SURFACE_CASES = [
    (SurfaceSpec("sphere", {"radius": 1.3}),
     lambda n, r: _sphere_samples(n, r, 1.3)),
    (SurfaceSpec("torus", {"major_radius": 1.0, "minor_radius": 0.4}),
     lambda n, r: torus_points(1.0, 0.4, int(np.sqrt(n)), int(np.sqrt(n)))),
    (SurfaceSpec("ellipsoid", {"a": 2.0, "b": 1.0, "c": 0.7}),
     lambda n, r: ellipsoid_points((2.0, 1.0, 0.7), int(np.sqrt(n)),
                                   int(np.sqrt(n)))),
    (SurfaceSpec("hemisphere", {"radius": 1.0}, bc="neumann"),
     lambda n, r: _hemisphere_samples(n, r)),
]


def _sphere_samples(n, rng, radius):
    v = rng.standard_normal((n, 3))
    return radius * v / np.linalg.norm(v, axis=1)[:, None]


def _hemisphere_samples(n, rng):
    v = rng.standard_normal((n, 3))
    v[:, 2] = np.abs(v[:, 2])
    return v / np.linalg.norm(v, axis=1)[:, None]


@pytest.mark.parametrize("spec,sampler", SURFACE_CASES,
                         ids=[c[0].kind for c in SURFACE_CASES])
class TestFieldProperties:
    def test_cp_is_minimizer(self, spec, sampler, rng):
        field = make_field(spec)
        lo, hi = field.bbox
        pts = rng.uniform(lo, hi, size=(10_000, field.dim))
        cp, dist, _ = field.query(pts)
        on_surface = sampler(100, rng)
        for p in on_surface[:100]:
            d_to_p = np.linalg.norm(pts - p, axis=1)
            assert np.all(dist <= d_to_p + 1e-6)

    def test_idempotent(self, spec, sampler, rng):
        field = make_field(spec)
        lo, hi = field.bbox
        pts = rng.uniform(lo, hi, size=(2_000, field.dim))
        cp1, _, _ = field.query(pts)
        cp2, d2, _ = field.query(cp1)
        assert np.abs(d2).max() < 1e-10
        assert np.abs(cp2 - cp1).max() < 1e-10

    def test_closed_surfaces_have_no_boundary(self, spec, sampler, rng):
        field = make_field(spec)
        if not field.closed:
            pytest.skip("open surface")
        lo, hi = field.bbox
        pts = rng.uniform(lo, hi, size=(2_000, field.dim))
        assert not field.query(pts)[2].any()


class TestJsonSchema:
    def test_roundtrip(self):
        doc = {"kind": "torus",
               "params": {"major_radius": 1.0, "minor_radius": 0.5},
               "bc": "closed", "rotation_axis": [0.0, 0.0, 1.0],
               "rotation_angle": 0.7853981633974483, "scale": 2.0,
               "translation": [0.1, 0.2, 0.3]}
        spec = surface_from_json(json.dumps(doc))
        back = surface_to_json(spec)
        assert back["kind"] == "torus"
        assert back["rotation_angle"] == pytest.approx(np.pi / 4)
        assert np.allclose(back["rotation_axis"], [0, 0, 1])
        assert back["scale"] == 2.0
        spec2 = surface_from_json(back)
        assert np.allclose(spec2.rotation, spec.rotation)

    def test_validation(self):
        with pytest.raises(ValueError):
            make_field(surface_from_json({"kind": "sphere",
                                          "params": {"radius": -1.0}}))
        with pytest.raises(ValueError):
            make_field(surface_from_json({"kind": "nonagon", "params": {}}))
        with pytest.raises(ValueError):
            make_field(surface_from_json({"kind": "sphere",
                                          "params": {"radius": 1.0},
                                          "bc": "dirichlet"}))

    def test_open_surface_needs_open_bc(self):
        spec = surface_from_json({"kind": "hemisphere",
                                  "params": {"radius": 1.0}})
        assert make_field(spec).bc == "neumann"  # open default
        with pytest.raises(ValueError):
            make_field(SurfaceSpec("hemisphere", {"radius": 1.0}, bc="closed"))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-4, 4), st.floats(-4, 4), st.floats(-4, 4))
def test_sphere_cp_property(radius, x, y, z):
    r = cp_sphere((x, y, z), radius)
    assert abs(np.linalg.norm(r.cp) - radius) < 1e-10
    assert abs(r.dist - np.linalg.norm(np.array([x, y, z]) - r.cp)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_torus_cp_property(x, y, z):
    r = cp_torus((x, y, z), 1.0, 0.5)
    rho = np.hypot(r.cp[0], r.cp[1])
    tube = np.hypot(rho - 1.0, r.cp[2])
    assert abs(tube - 0.5) < 1e-10
