"""Tests for the domain descriptors and analytic benchmark fields."""

import numpy as np
import pytest

from bsvem import (
    AnalyticField,
    DegenerateQueryError,
    ProjectionFailureError,
    UnknownExperimentError,
    experiment_fields,
    implicit_domain,
    unit_disc,
)


def _ellipse():
    return implicit_domain(
        levelset=lambda x, y: x * x / 4.0 + y * y - 1.0,
        gradient=lambda x, y: (x / 2.0, 2.0 * y),
        band=0.5,
        bounding_box=(-2.5, -1.5, 2.5, 1.5),
        name="ellipse",
    )


class TestUnitDisc:
    def test_signed_distance_center(self):
        dom = unit_disc()
        assert dom.signed_distance(0.0, 0.0) == pytest.approx(-1.0)

    def test_signed_distance_signs(self):
        dom = unit_disc()
        assert dom.signed_distance(0.5, 0.0) < 0.0
        assert dom.signed_distance(2.0, 0.0) == pytest.approx(1.0)
        assert dom.signed_distance(0.0, -1.0) == pytest.approx(0.0, abs=1e-15)

    def test_signed_distance_vectorized(self):
        dom = unit_disc()
        x = np.array([0.5, 2.0, 0.0])
        y = np.array([0.0, 0.0, -1.0])
        d = dom.signed_distance(x, y)
        assert np.allclose(d, [-0.5, 1.0, 0.0])

    def test_closest_point_is_radial(self):
        dom = unit_disc()
        ax, ay = dom.closest_point(2.0, 0.0)
        assert (ax, ay) == pytest.approx((1.0, 0.0))
        ax, ay = dom.closest_point(0.25, 0.25)
        r = np.hypot(0.25, 0.25)
        assert (ax, ay) == pytest.approx((0.25 / r, 0.25 / r))

    def test_closest_point_center_degenerate(self):
        dom = unit_disc()
        with pytest.raises(DegenerateQueryError):
            dom.closest_point(0.0, 0.0)

    def test_outward_normal_unit_and_radial(self):
        dom = unit_disc()
        rng = np.random.default_rng(7)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=64)
        rad = rng.uniform(0.3, 1.7, size=64)
        x, y = rad * np.cos(theta), rad * np.sin(theta)
        nx, ny = dom.outward_normal(x, y)
        assert np.allclose(np.hypot(nx, ny), 1.0, atol=1e-13)
        # on the unit circle the outward normal is the position vector
        bx, by = np.cos(theta), np.sin(theta)
        nnx, nny = dom.outward_normal(bx, by)
        assert np.allclose(nnx, bx, atol=1e-13)
        assert np.allclose(nny, by, atol=1e-13)

    def test_band_identities(self):
        # within the Fermi band: |signed_distance| equals the distance to
        # the closest point and the displacement is parallel to the normal
        dom = unit_disc()
        assert dom.fermi_halfwidth == pytest.approx(1.0)
        rng = np.random.default_rng(11)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=200)
        rad = rng.uniform(0.05, 1.95, size=200)
        x, y = rad * np.cos(theta), rad * np.sin(theta)
        d = dom.signed_distance(x, y)
        ax, ay = dom.closest_point(x, y)
        assert np.allclose(np.abs(d), np.hypot(x - ax, y - ay), atol=1e-13)
        nx, ny = dom.outward_normal(x, y)
        assert np.allclose(x - ax, d * nx, atol=1e-13)
        assert np.allclose(y - ay, d * ny, atol=1e-13)

    def test_projection_idempotent(self):
        dom = unit_disc()
        rng = np.random.default_rng(3)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=200)
        rad = rng.uniform(0.2, 1.8, size=200)
        ax, ay = dom.closest_point(rad * np.cos(theta), rad * np.sin(theta))
        bx, by = dom.closest_point(ax, ay)
        assert np.allclose(ax, bx, atol=1e-12)
        assert np.allclose(ay, by, atol=1e-12)

    def test_bounding_box(self):
        dom = unit_disc()
        assert dom.bounding_box == (-1.0, -1.0, 1.0, 1.0)


class TestImplicitDomain:
    def test_axis_projection(self):
        dom = _ellipse()
        ax, ay = dom.closest_point(4.0, 0.0)
        assert (ax, ay) == pytest.approx((2.0, 0.0), abs=1e-10)

    def test_disc_levelset_matches_unit_disc(self):
        dom = implicit_domain(
            levelset=lambda x, y: x * x + y * y - 1.0,
            gradient=lambda x, y: (2.0 * x, 2.0 * y),
            band=0.8,
            bounding_box=(-1.0, -1.0, 1.0, 1.0),
        )
        ax, ay = dom.closest_point(2.0, 2.0)
        s = np.sqrt(0.5)
        assert (ax, ay) == pytest.approx((s, s), abs=1e-10)
        assert dom.signed_distance(0.5, 0.0) == pytest.approx(-0.5, abs=1e-10)

    def test_projections_land_on_levelset(self):
        dom = _ellipse()
        phi = lambda x, y: x * x / 4.0 + y * y - 1.0
        rng = np.random.default_rng(5)
        # queries offset from the curve along its normal, inside the band
        theta = rng.uniform(0.0, 2.0 * np.pi, size=50)
        cx, cy = 2.0 * np.cos(theta), np.sin(theta)
        gx, gy = cx / 2.0, 2.0 * cy
        gn = np.hypot(gx, gy)
        off = rng.uniform(-0.25, 0.25, size=50)
        x, y = cx + off * gx / gn, cy + off * gy / gn
        ax, ay = dom.closest_point(x, y)
        assert np.all(np.abs(phi(ax, ay)) <= 1e-10)
        # the residual displacement is orthogonal to the curve tangent
        nx, ny = dom.outward_normal(ax, ay)
        dx, dy = x - ax, y - ay
        cross = dx * ny - dy * nx
        assert np.max(np.abs(cross)) <= 1e-9

    def test_far_query_raises(self):
        degenerate = implicit_domain(
            levelset=lambda x, y: x * x + y * y - 1.0,
            gradient=lambda x, y: (np.zeros_like(x), np.zeros_like(y)),
            band=0.5,
            bounding_box=(-1.0, -1.0, 1.0, 1.0),
        )
        with pytest.raises(ProjectionFailureError):
            degenerate.closest_point(1.5, 0.0)


class TestExperimentFields:
    def test_elliptic_fields(self):
        fields = experiment_fields("elliptic-xy", alpha=1.0, beta=2.0)
        s = np.sqrt(0.5)
        # v = (alpha + 2)/beta * x*y = 1.5*x*y
        assert fields["v"](s, s) == pytest.approx(0.75)
        assert fields["u"](s, s) == pytest.approx(0.5)
        assert fields["f"](0.3, 0.4) == pytest.approx(0.12)
        # g = (2 + 5*(alpha+2)/beta)*x*y = 9.5*x*y
        assert fields["g"](0.3, 0.4) / (0.3 * 0.4) == pytest.approx(9.5)

    def test_elliptic_robin_identity(self):
        # on the unit circle: dd(u)/dnu = 2*x*y, so du/dnu + alpha*u = beta*v
        rng = np.random.default_rng(17)
        alpha, beta = 1.3, 2.7
        fields = experiment_fields("elliptic-xy", alpha=alpha, beta=beta)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=200)
        x, y = np.cos(theta), np.sin(theta)
        residual = 2.0 * x * y + alpha * fields["u"](x, y) - beta * fields["v"](x, y)
        assert np.max(np.abs(residual)) <= 1e-12

    def test_elliptic_surface_identity(self):
        # on the unit circle: -lap_surface(v) = 4*v, du/dnu = 2*x*y, so
        # 4*v + v + 2*x*y - g = 0 for any alpha, beta
        rng = np.random.default_rng(19)
        alpha, beta = 1.3, 2.7
        fields = experiment_fields("elliptic-xy", alpha=alpha, beta=beta)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=200)
        x, y = np.cos(theta), np.sin(theta)
        v = fields["v"](x, y)
        residual = 4.0 * v + v + 2.0 * x * y - fields["g"](x, y)
        assert np.max(np.abs(residual)) <= 1e-12

    def test_elliptic_bad_parameters(self):
        with pytest.raises(ValueError):
            experiment_fields("elliptic-xy", alpha=0.0)
        with pytest.raises(ValueError):
            experiment_fields("elliptic-xy", beta=-1.0)

    def test_parabolic_fields(self):
        fields = experiment_fields("parabolic-xy")
        assert fields["u0"](0.5, 0.5) == pytest.approx(0.25)
        assert fields["v0"](0.5, 0.5) == pytest.approx(0.375)
        assert fields["u"](0.5, 0.5, t=1.0) == pytest.approx(0.25 * np.exp(-1.0))
        assert fields["v"](0.5, 0.5, t=2.0) == pytest.approx(0.375 * np.exp(-2.0))
        # initial data is the t=0 slice of the exact pair
        assert fields["u"](0.5, 0.5, t=0.0) == fields["u0"](0.5, 0.5)

    def test_unknown_experiment(self):
        with pytest.raises(UnknownExperimentError):
            experiment_fields("no-such-experiment")


class TestAnalyticField:
    def test_wraps_callable(self):
        f = AnalyticField(lambda x, y, t=0.0: x + y + t, name="affine")
        assert f(1.0, 2.0) == pytest.approx(3.0)
        assert f(1.0, 2.0, t=0.5) == pytest.approx(3.5)
        assert f.name == "affine"

    def test_stationary(self):
        f = AnalyticField.stationary(lambda x, y: x * y, name="xy")
        assert f(2.0, 3.0, t=9.9) == pytest.approx(6.0)
        x = np.array([1.0, 2.0])
        assert np.allclose(f(x, x), [1.0, 4.0])
