import numpy as np
import pytest

from cpdna.band import build_band
from cpdna.linalg import spmv
from cpdna.operators import (assemble_lb, build_extension, build_laplacian,
                             default_gamma)
from cpdna.surfaces import SurfaceSpec, make_field

SPHERE = SurfaceSpec("sphere", {"radius": 1.0})
CIRCLE = SurfaceSpec("circle", {"radius": 1.0})


@pytest.fixture(scope="module")
def sphere_band():
    return build_band(make_field(SPHERE), 0.25)


@pytest.fixture(scope="module")
def circle_band():
    return build_band(make_field(CIRCLE), 0.1)


class TestLaplacian:
    def test_constant_in_kernel_on_full_rows(self, sphere_band):
        lap = build_laplacian(sphere_band)
        full = np.all(sphere_band.neighbor_rows >= 0, axis=1)
        r = spmv(lap, np.ones(sphere_band.n))
        assert np.abs(r[full]).max() < 1e-9 * (6.0 / sphere_band.dx ** 2)

    def test_exact_on_quadratics(self, sphere_band):
        pts = sphere_band.points()
        v = pts[:, 0] ** 2
        full = np.all(sphere_band.neighbor_rows >= 0, axis=1)
        r = spmv(build_laplacian(sphere_band), v)
        assert np.abs(r[full] - 2.0).max() < 1e-9

    def test_second_order_on_sine(self):
        # planar band: measure the Taylor order of L on sin(x)
        errs = []
        for dx in (0.05, 0.025):
            band = build_band(make_field(CIRCLE), dx)
            pts = band.points()
            v = np.sin(pts[:, 0])
            full = np.all(band.neighbor_rows >= 0, axis=1)
            lap_v = spmv(build_laplacian(band), v)
            errs.append(np.abs(lap_v[full] + np.sin(pts[full, 0])).max())
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_row_sparsity(self, sphere_band):
        lap = build_laplacian(sphere_band)
        assert np.diff(lap.row_ptr).max() <= 2 * sphere_band.dim + 1


class TestExtension:
    def test_reproduces_constants(self, sphere_band):
        for degree in (1, 3):
            e = build_extension(sphere_band, degree)
            r = spmv(e, np.ones(sphere_band.n))
            assert np.abs(r - 1.0).max() < 1e-12

    def test_cubic_exactness(self, sphere_band):
        pts = sphere_band.points()
        q = lambda p: p[:, 0] ** 3 + 2.0 * p[:, 1] ** 2 * p[:, 2]
        e3 = build_extension(sphere_band, 3)
        assert np.abs(spmv(e3, q(pts)) - q(sphere_band.cp)).max() < 1e-10

    def test_weights_sum_to_one(self, sphere_band):
        for degree in (1, 3):
            e = build_extension(sphere_band, degree)
            sums = spmv(e, np.ones(sphere_band.n))
            assert np.abs(sums - 1.0).max() < 1e-12

    def test_dirichlet_rows_sum_to_minus_one(self):
        band = build_band(make_field(
            SurfaceSpec("hemisphere", {"radius": 1.0}, bc="dirichlet")), 0.2)
        e = build_extension(band, 1, bc="dirichlet")
        sums = spmv(e, np.ones(band.n))
        assert band.on_boundary.any()
        assert np.abs(sums[band.on_boundary] + 1.0).max() < 1e-12
        assert np.abs(sums[~band.on_boundary] - 1.0).max() < 1e-12

    def test_degree_validation(self, sphere_band):
        with pytest.raises(ValueError):
            build_extension(sphere_band, 2)


class TestAssemble:
    def test_kernel_contains_constants(self, sphere_band):
        lb = assemble_lb(sphere_band)
        r = spmv(lb.M, np.ones(sphere_band.n))
        assert np.abs(r).max() < 1e-9 * lb.gamma

    def test_gamma_default(self, sphere_band):
        lb = assemble_lb(sphere_band)
        assert lb.gamma == pytest.approx(default_gamma(0.25, 3))
        assert lb.gamma == pytest.approx(2 * 3 / 0.25 ** 2)

    def test_gamma_override_changes_operator(self, sphere_band):
        lb1 = assemble_lb(sphere_band)
        lb2 = assemble_lb(sphere_band, gamma=2 * lb1.gamma)
        r = spmv(lb2.M, np.ones(sphere_band.n))
        assert np.abs(r).max() < 1e-9 * lb2.gamma
        assert not np.array_equal(lb1.M.values, lb2.M.values)

    def test_sphere_eigenvalue_near_two(self, sphere_band):
        # validated against the l(l+1) spectrum: an eigenvalue of -M
        # approximates 2 at this resolution
        lb = assemble_lb(build_band(make_field(SPHERE), 0.2))
        w = np.linalg.eigvals(lb.M.to_dense())
        lam = np.sort(-w.real[np.abs(w.imag) < 1e-8])
        nearest = lam[np.argmin(np.abs(lam - 2.0))]
        assert abs(nearest - 2.0) / 2.0 < 0.1

    def test_row_sparsity_bound(self, sphere_band):
        lb = assemble_lb(sphere_band)
        p = 3
        bound = (2 * 3 + 1) * (p + 1) ** 3 + (p + 1) ** 3
        assert np.diff(lb.M.row_ptr).max() <= bound

    def test_bc_validation(self, sphere_band):
        with pytest.raises(ValueError):
            assemble_lb(sphere_band, bc="dirichlet")

    def test_dirichlet_neumann_differ_only_on_boundary_rows(self):
        hemi = SurfaceSpec("hemisphere", {"radius": 1.0}, bc="neumann")
        band = build_band(make_field(hemi), 0.25)
        mn = assemble_lb(band, bc="neumann").M
        md = assemble_lb(band, bc="dirichlet").M
        for i in range(band.n):
            rn = slice(mn.row_ptr[i], mn.row_ptr[i + 1])
            rd = slice(md.row_ptr[i], md.row_ptr[i + 1])
            same = (np.array_equal(mn.col_idx[rn], md.col_idx[rd])
                    and np.array_equal(mn.values[rn], md.values[rd]))
            assert same != bool(band.on_boundary[i])


def test_consistency_with_surface_laplacian():
    # u = z restricted to the sphere (a degree-1 harmonic): M u ~ -2 u
    # with second-order error on near-surface rows
    errs = []
    dxs = (0.4, 0.2, 0.1)
    for dx in dxs:
        band = build_band(make_field(SPHERE), dx)
        lb = assemble_lb(band)
        u = band.cp[:, 2]  # z(cp): the radial extension of the harmonic
        r = spmv(lb.M, u) + 2.0 * u
        near = band.dist <= dx / 2
        errs.append(np.abs(r[near]).max())
    slope = np.polyfit(np.log(dxs), np.log(errs), 1)[0]
    assert 1.5 <= slope <= 2.5
