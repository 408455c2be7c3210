import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdna.oracle import (circle_spectrum, hemisphere_spectrum,
                          interval_spectrum, sphere_spectrum)


class TestInterval:
    def test_dirichlet_values(self):
        assert interval_spectrum("dirichlet", 3).values.tolist() == [0.25, 1.0, 2.25]

    def test_neumann_values(self):
        assert interval_spectrum("neumann", 3).values.tolist() == [0.0, 0.25, 1.0]

    def test_dirichlet_has_no_zero(self):
        assert np.all(interval_spectrum("dirichlet", 30).values > 0)

    def test_bad_bc(self):
        with pytest.raises(ValueError):
            interval_spectrum("periodic", 3)


class TestCircle:
    def test_unit_values(self):
        assert circle_spectrum(1.0, 5).values.tolist() == [0.0, 1.0, 1.0, 4.0, 4.0]

    def test_radius_scaling(self):
        assert circle_spectrum(2.0, 3).values.tolist() == [0.0, 0.25, 0.25]

    def test_multiplicity_two(self):
        vals = circle_spectrum(1.0, 41).values
        nonzero = vals[1:]
        pairs = nonzero.reshape(-1, 2)
        assert np.all(pairs[:, 0] == pairs[:, 1])


class TestSphere:
    def test_unit_values(self):
        expected = [0.0] + [2.0] * 3 + [6.0] * 5 + [12.0]
        assert sphere_spectrum(1.0, 10).values.tolist() == expected

    def test_radius_scaling(self):
        assert sphere_spectrum(2.0, 4).values.tolist() == [0.0, 0.5, 0.5, 0.5]

    def test_level_multiplicities(self):
        vals = sphere_spectrum(1.0, 100).values
        for ell in range(5):
            assert np.count_nonzero(vals == ell * (ell + 1)) == 2 * ell + 1


class TestHemisphere:
    def test_neumann_values(self):
        assert hemisphere_spectrum("neumann", 1.0, 4).values.tolist() == [0.0, 2.0, 2.0, 6.0]

    def test_dirichlet_values(self):
        assert hemisphere_spectrum("dirichlet", 1.0, 4).values.tolist() == [2.0, 6.0, 6.0, 12.0]

    def test_dirichlet_has_no_zero(self):
        assert np.all(hemisphere_spectrum("dirichlet", 1.0, 50).values > 0)

    def test_parity_union_recovers_sphere(self):
        k = 60
        full = sphere_spectrum(1.0, k).values
        merged = np.sort(np.concatenate([
            hemisphere_spectrum("dirichlet", 1.0, k).values,
            hemisphere_spectrum("neumann", 1.0, k).values]))[:k]
        assert np.array_equal(full, merged)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(1, 60))
def test_oracles_sorted_and_scale(radius, k):
    for make in (lambda: circle_spectrum(radius, k),
                 lambda: sphere_spectrum(radius, k),
                 lambda: hemisphere_spectrum("neumann", radius, k)):
        vals = make().values
        assert len(vals) == k
        assert np.all(np.diff(vals) >= 0) and np.all(vals >= 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 8.0), st.floats(1.5, 4.0), st.integers(2, 50))
def test_radius_scaling_identity(radius, factor, k):
    base = sphere_spectrum(radius, k).values
    scaled = sphere_spectrum(radius * factor, k).values
    assert np.allclose(scaled * factor ** 2, base, rtol=1e-12)
