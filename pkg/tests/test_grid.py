import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from math import gamma, pi

from choquard_lab.errors import IncompatibleGrid, InvalidConfiguration
from choquard_lab.grid import (RadialField, apply_radial_laplacian,
                               derivative_values, gradient_seminorm, integrate,
                               kinetic_energy, make_grid)
from choquard_lab.profiles import gaussian, talenti


def ball_volume(N, R):
    return pi ** (N / 2) * R ** N / gamma(N / 2 + 1)


class TestMakeGrid:
    def test_unit_ball_volume(self):
        g = make_grid(3, 1.0, 200, 1.0)
        assert abs(integrate(g, np.ones(g.n)) - 4 * pi / 3) < 1e-8

    def test_ball_volume_dim4(self):
        g = make_grid(4, 2.0, 400, 2.0)
        assert abs(integrate(g, np.ones(g.n)) - ball_volume(4, 2.0)) < 1e-8

    def test_too_few_nodes_rejected(self):
        with pytest.raises(InvalidConfiguration):
            make_grid(3, 1.0, 8)

    def test_bad_radius_rejected(self):
        with pytest.raises(InvalidConfiguration):
            make_grid(3, -1.0, 100)
        with pytest.raises(InvalidConfiguration):
            make_grid(3, 0.0, 100)

    def test_low_dimension_rejected(self):
        with pytest.raises(InvalidConfiguration):
            make_grid(2, 1.0, 100)

    def test_nodes_increasing_weights_positive(self):
        g = make_grid(3, 50.0, 300, 2.5)
        assert np.all(np.diff(g.r) > 0)
        assert np.all(g.w > 0)
        # weight sum is the ball-volume moment
        assert np.isclose(g.w.sum(), g.r_max ** 3 / 3, rtol=1e-13)


class TestIntegrate:
    def test_zero_field(self):
        g = make_grid(3, 10.0, 100)
        assert integrate(g, np.zeros(g.n)) == 0.0

    def test_gaussian(self):
        g = make_grid(3, 9.0, 800, 2.0)
        val = integrate(g, np.exp(-g.r ** 2))
        assert abs(val - pi ** 1.5) < 1e-6

    def test_indicator_ball(self):
        g = make_grid(3, 8.0, 3000, 2.0)
        f = np.where(g.r <= 1.0, 1.0, 0.0)
        assert abs(integrate(g, f) - 4 * pi / 3) < 2e-2 * (4 * pi / 3)

    def test_grid_mismatch(self):
        g1 = make_grid(3, 10.0, 100)
        g2 = make_grid(3, 10.0, 128)
        f = RadialField.from_values(g2, np.ones(g2.n))
        with pytest.raises(IncompatibleGrid):
            integrate(g1, f)

    def test_linearity(self, rng):
        g = make_grid(3, 5.0, 200)
        f1 = rng.random(g.n)
        f2 = rng.random(g.n)
        a, b = 2.3, -0.7
        assert np.isclose(integrate(g, a * f1 + b * f2),
                          a * integrate(g, f1) + b * integrate(g, f2), rtol=1e-13)

    def test_monotone(self, rng):
        g = make_grid(3, 5.0, 200)
        f = rng.random(g.n)
        h = f + rng.random(g.n)
        assert integrate(g, f) <= integrate(g, h)

    @given(deg=st.integers(0, 2), coef=st.floats(-3, 3))
    @settings(max_examples=20, deadline=None)
    def test_polynomials_exact_to_rule_order(self, deg, coef):
        # quadratics are exact on the quadratic panels; the head cell and the
        # positivity-degraded panels near the origin carry negligible measure
        g = make_grid(3, 2.0, 400, 2.0)
        vals = coef * g.r ** deg
        exact = 4 * pi * coef * g.r_max ** (deg + 3) / (deg + 3)
        assert abs(4 * pi * np.dot(g.w, vals) - exact) <= 1e-10 * abs(exact) + 1e-14


class TestField:
    def test_interpolation_reproduces_nodes(self):
        g = make_grid(3, 10.0, 150)
        f = gaussian(g)
        assert np.allclose(f(g.r), f.values, rtol=0, atol=1e-14)

    def test_nonfinite_rejected(self):
        g = make_grid(3, 10.0, 100)
        vals = np.ones(g.n)
        vals[3] = np.nan
        with pytest.raises(InvalidConfiguration):
            RadialField.from_values(g, vals)

    def test_csv_round_trip(self):
        g = make_grid(3, 10.0, 100)
        f = gaussian(g, width=2.0)
        f2 = RadialField.from_csv(g, f.to_csv())
        assert np.array_equal(f2.values, f.values)
        assert f2.origin == f.origin

    def test_tail_flag(self):
        g = make_grid(3, 30.0, 200)
        assert gaussian(g).tail_flag
        slow = RadialField.from_values(g, 1.0 / (1.0 + g.r))
        assert not slow.tail_flag

    def test_grid_json_header(self):
        g = make_grid(3, 10.0, 100, 2.0)
        import json
        meta = json.loads(g.to_json())
        assert meta == {"N": 3, "r_max": 10.0, "n": 100, "grading": 2.0}


class TestLaplacian:
    def test_quadratic_gives_2N(self):
        for N in (3, 4, 5):
            g = make_grid(N, 10.0, 400, 2.0)
            f = RadialField.from_function(g, lambda r: r ** 2)
            lap = apply_radial_laplacian(g, f)
            assert np.max(np.abs(lap.values[:-1] - 2 * N)) < 1e-6

    def test_constants_are_harmonic(self):
        g = make_grid(3, 10.0, 200)
        f = RadialField.from_function(g, lambda r: 3.7 + 0.0 * r)
        lap = apply_radial_laplacian(g, f)
        assert np.max(np.abs(lap.values[:-1])) < 1e-9

    def test_talenti_residual(self):
        # -lap W = W^5 for the N=3 extremal profile
        g = make_grid(3, 30.0, 2000, 2.0)
        w = talenti(g)
        w_fd = RadialField.from_values(g, w.values, origin=w.origin)  # force FD path
        lap = apply_radial_laplacian(g, w_fd)
        resid = -lap.values - w.values ** 5
        assert np.max(np.abs(resid[:-2])) < 1e-4

    def test_too_small_grid(self):
        g = make_grid(3, 10.0, 16)
        f = gaussian(g)
        lap = apply_radial_laplacian(g, f)  # works at the minimum size
        assert lap.values.shape == (16,)


class TestKineticForms:
    def test_green_identity(self):
        g = make_grid(3, 20.0, 1500, 2.0)
        f = gaussian(g, width=1.5)
        h = gaussian(g, width=2.5)
        lap = apply_radial_laplacian(g, f)
        lhs = integrate(g, -lap.values * h.values)
        d1 = derivative_values(f)
        d2 = derivative_values(h)
        rhs = float(g.sphere_area * np.dot(g.w, d1 * d2))
        assert abs(lhs - rhs) < 1e-3 * abs(rhs)

    def test_stiffness_matches_quadrature_seminorm(self):
        g = make_grid(3, 20.0, 1500, 2.0)
        f = gaussian(g, width=1.5)
        a = kinetic_energy(g, f.values)
        b = gradient_seminorm(f)
        assert abs(a - b) < 2e-4 * abs(b)

    def test_gradient_seminorm_gaussian(self):
        # int_{R^3} |grad e^(-r^2)|^2 = 16 pi int r^4 e^(-2r^2) dr = 6 pi^(3/2) / 2^(5/2)
        g = make_grid(3, 12.0, 2000, 2.0)
        f = gaussian(g)
        exact = 6 * pi ** 1.5 / 2 ** 2.5
        assert np.isclose(gradient_seminorm(f), exact, rtol=1e-8)
