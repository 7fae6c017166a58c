"""Tests for optics module."""

import math

import numpy as np
import pytest

from pcf_sensor_sim.geometry import Point2, Vec2, unit
from pcf_sensor_sim.optics import (
    Medium,
    Ray2,
    fresnel_batch,
    fresnel_unpolarized,
    lambertian_directions,
    lambertian_scatter,
    reflect,
    refract,
)

INDEX_PAIRS = [
    (n1, n2)
    for n1 in (1.0, 1.2, 1.33, 1.41, 1.5)
    for n2 in (1.0, 1.41, 1.7, 2.4)
]


def _incident(theta):
    """Unit direction hitting a horizontal surface (normal (0, -1)) at ``theta``."""
    return Vec2(math.sin(theta), math.cos(theta))


DOWN = Vec2(0.0, -1.0)


class TestMediumAndRay:
    """Test suite for Medium and Ray2 validation."""

    def test_medium_rejects_index_below_one(self):
        """Refractive indices below 1 should be rejected."""
        with pytest.raises(ValueError):
            Medium(0.9)

    @pytest.mark.parametrize(
        "kwargs",
        [{"power": 1.5}, {"power": -0.1}, {"optical_path": -1.0}, {"direction": Vec2(1.0, 1.0)}],
    )
    def test_ray_invariants(self, kwargs):
        """Power, path and direction invariants should be enforced."""
        fields = {"origin": Point2(0.0, 0.0), "direction": Vec2(0.0, 1.0), **kwargs}
        with pytest.raises(ValueError):
            Ray2(**fields)

    def test_advanced_accumulates_optical_path(self):
        """Advancing should scale the path by the medium index and widen the beam."""
        ray = Ray2(Point2(0.0, 0.0), Vec2(0.0, 1.0), medium_index=1.41, spread=0.01)

        moved = ray.advanced(10.0)

        assert moved.origin == pytest.approx((0.0, 10.0))
        assert moved.optical_path == pytest.approx(14.1)
        assert moved.width == pytest.approx(0.1)


class TestReflect:
    """Test suite for reflect."""

    def test_normal_incidence_retroreflects(self):
        """(0, 1) off normal (0, -1) should come straight back."""
        assert reflect(Vec2(0.0, 1.0), DOWN) == pytest.approx((0.0, -1.0))

    def test_45_degree_mirror(self):
        """(1, 1)/sqrt2 should reflect to (1, -1)/sqrt2."""
        s = 1 / math.sqrt(2)

        assert reflect(Vec2(s, s), DOWN) == pytest.approx((s, -s))

    def test_involution(self):
        """Reflecting twice about the same normal should restore the vector."""
        rng = np.random.default_rng(3)
        for _ in range(100):
            v = unit(rng.uniform(0, 2 * math.pi))
            n = unit(rng.uniform(0, 2 * math.pi))
            assert reflect(reflect(v, n), n) == pytest.approx(tuple(v), abs=1e-12)


class TestRefract:
    """Test suite for refract."""

    def test_normal_incidence_unchanged(self):
        """At normal incidence the direction should not change."""
        assert refract(Vec2(0.0, 1.0), DOWN, 1.0, 1.41) == pytest.approx((0.0, 1.0))

    def test_total_internal_reflection(self):
        """60 degrees from PDMS into air is past the critical angle."""
        assert refract(_incident(math.radians(60)), DOWN, 1.41, 1.0) is None

    def test_snell_angle(self):
        """30 degrees from air into PDMS should bend to asin(sin30 / 1.41)."""
        t = refract(_incident(math.radians(30)), DOWN, 1.0, 1.41)

        assert math.asin(t.x) == pytest.approx(math.asin(0.5 / 1.41), abs=1e-12)
        assert 1.0 * math.sin(math.radians(30)) == pytest.approx(1.41 * t.x, abs=1e-12)

    def test_reciprocity(self):
        """Refracting back through the interface should recover the incident ray."""
        for n1, n2 in INDEX_PAIRS:
            for theta in np.linspace(0.0, 1.5, 31):
                v = _incident(theta)
                t = refract(v, DOWN, n1, n2)
                if t is None:
                    continue
                back = refract(Vec2(-t.x, -t.y), Vec2(0.0, 1.0), n2, n1)
                assert back is not None
                assert (-back.x, -back.y) == pytest.approx(tuple(v), abs=1e-9)


class TestFresnel:
    """Test suite for fresnel_unpolarized and fresnel_batch."""

    def test_index_matched(self):
        """Equal indices should transmit everything."""
        assert fresnel_unpolarized(0.7, 1.41, 1.41) == pytest.approx((0.0, 1.0), abs=1e-15)

    def test_normal_incidence(self):
        """Air to PDMS at normal incidence should reflect ((n-1)/(n+1))^2."""
        R, T = fresnel_unpolarized(1.0, 1.0, 1.41)

        assert R == pytest.approx(((1.41 - 1) / (1.41 + 1)) ** 2, abs=1e-15)
        assert R == pytest.approx(0.02894, abs=1e-5)

    def test_total_internal_reflection_is_exact(self):
        """Beyond the critical angle R should be exactly 1."""
        critical = math.asin(1.0 / 1.41)
        for theta in np.linspace(critical + 1e-6, math.pi / 2 - 1e-6, 50):
            R, T = fresnel_unpolarized(math.cos(theta), 1.41, 1.0)
            assert R == 1.0
            assert T == 0.0

    def test_energy_conservation(self):
        """R + T should be 1 for 1000 angles and 20 index pairs."""
        cosines = np.cos(np.linspace(0.0, math.pi / 2, 1001)[:-1])
        for n1, n2 in INDEX_PAIRS:
            for c in cosines:
                R, T = fresnel_unpolarized(float(c), n1, n2)
                assert 0.0 <= R <= 1.0
                assert R + T == pytest.approx(1.0, abs=1e-12)

    def test_monotone_for_external_reflection(self):
        """R should not decrease with incidence angle going into a denser medium."""
        theta = np.linspace(0.0, math.pi / 2 - 1e-6, 1000)
        for n2 in (1.2, 1.41, 1.7, 2.4):
            R, _ = fresnel_batch(np.cos(theta), 1.0, n2)
            assert np.all(np.diff(R) >= -1e-15)

    @pytest.mark.parametrize("cos_theta", [0.0, -0.5, 1.5])
    def test_rejects_out_of_range_cosine(self, cos_theta):
        """cos(theta) outside (0, 1] should raise."""
        with pytest.raises(ValueError):
            fresnel_unpolarized(cos_theta, 1.0, 1.41)


class TestLambertian:
    """Test suite for lambertian_directions and lambertian_scatter."""

    @pytest.mark.parametrize("fan", [1, 2, 7, 33, 64])
    def test_weights_sum_to_one(self, fan):
        """Cosine quadrature weights should sum to 1."""
        _, weights = lambertian_directions(fan)

        assert weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_black_target_scatters_nothing(self):
        """rho = 0 should return no rays."""
        assert lambertian_scatter(Point2(0.0, 5.0), DOWN, 0.4, 0.0, 16) == []

    def test_total_power(self):
        """Scattered power should equal incoming power times reflectivity."""
        rays = lambertian_scatter(Point2(0.0, 5.0), DOWN, 0.4, 0.85, 33)

        assert len(rays) == 33
        assert sum(r.power for r in rays) == pytest.approx(0.4 * 0.85, abs=1e-12)
        assert all(r.tagged for r in rays)

    def test_mean_direction_is_normal(self):
        """For M = 64 the power-weighted mean direction should be the normal."""
        rays = lambertian_scatter(Point2(0.0, 5.0), DOWN, 1.0, 0.5, 64)

        mx = sum(r.power * r.direction.x for r in rays)
        my = sum(r.power * r.direction.y for r in rays)
        norm = math.hypot(mx, my)
        assert (mx / norm, my / norm) == pytest.approx((0.0, -1.0), abs=1e-3)

    def test_rays_stay_on_normal_side(self):
        """Every scattered ray should leave on the normal's side of the surface."""
        rays = lambertian_scatter(Point2(0.0, 5.0), DOWN, 1.0, 1.0, 33)

        assert all(r.direction.dot(DOWN) > 0 for r in rays)

    def test_monte_carlo_mode_is_seeded(self):
        """The Monte Carlo mode should be reproducible and power-conserving."""
        first = lambertian_scatter(
            Point2(0.0, 5.0), DOWN, 1.0, 0.5, 500, rng=np.random.default_rng(5)
        )
        second = lambertian_scatter(
            Point2(0.0, 5.0), DOWN, 1.0, 0.5, 500, rng=np.random.default_rng(5)
        )

        assert [r.direction for r in first] == [r.direction for r in second]
        assert sum(r.power for r in first) == pytest.approx(0.5, abs=1e-12)
