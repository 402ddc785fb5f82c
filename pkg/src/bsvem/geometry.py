"""Smooth domain descriptions and analytic fields.

A planar domain with smooth boundary curve is described by three vectorized
callables (signed distance, closest-point map, outward unit normal) plus the
half-width of the tubular neighbourhood of the curve in which the
closest-point map is single valued.  Meshes keep their boundary nodes exactly
on the curve, so all boundary geometry downstream is driven by these maps.

Sign convention: the signed distance is negative inside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GeometryError(Exception):
    """Base class for geometry failures."""


class DegenerateQueryError(GeometryError):
    """Closest-point query at a point where the map is not single valued."""


class ProjectionFailureError(GeometryError):
    """Newton projection onto the boundary curve failed to converge."""


class UnknownExperimentError(GeometryError):
    """Requested experiment preset does not exist."""


@dataclass(frozen=True)
class DomainDescriptor:
    """Bundle of boundary-geometry callables for one domain.

    Attributes
    ----------
    signed_distance : callable
        ``(x, y) -> d`` with ``d < 0`` inside, vectorized.
    closest_point : callable
        ``(x, y) -> (ax, ay)``, the closest boundary point, vectorized.
    outward_normal : callable
        ``(x, y) -> (nx, ny)``, unit outward normal at the closest boundary
        point of the query, vectorized.
    fermi_halfwidth : float
        Half-width of the band around the curve in which the closest-point
        map is guaranteed single valued (1/max curvature for a disc).
    bounding_box : tuple
        ``(xmin, ymin, xmax, ymax)`` covering the closed domain; used to
        place the background grid during mesh generation.
    name : str
        Short identifier used in reports and echoed configs.
    """

    signed_distance: Callable
    closest_point: Callable
    outward_normal: Callable
    fermi_halfwidth: float
    bounding_box: tuple
    name: str = "domain"


def unit_disc() -> DomainDescriptor:
    """Unit disc centered at the origin, boundary is the unit circle."""

    def signed_distance(x, y):
        return np.hypot(x, y) - 1.0

    def closest_point(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        # the center is equidistant from the whole circle
        if np.any(r < 1e-14):
            raise DegenerateQueryError(
                "closest_point query at the disc center is not single valued"
            )
        return x / r, y / r

    def outward_normal(x, y):
        ax, ay = closest_point(x, y)
        return ax, ay

    return DomainDescriptor(
        signed_distance=signed_distance,
        closest_point=closest_point,
        outward_normal=outward_normal,
        fermi_halfwidth=1.0,
        bounding_box=(-1.0, -1.0, 1.0, 1.0),
        name="disc",
    )


def implicit_domain(levelset, gradient, band, bounding_box, name="implicit"):
    """Domain given by a level set ``phi < 0`` with analytic gradient.

    Parameters
    ----------
    levelset : callable
        ``(x, y) -> phi``, negative inside, vectorized.
    gradient : callable
        ``(x, y) -> (gx, gy)``, gradient of the level set, vectorized.
    band : float
        Fermi half-width of the curve; projections are guaranteed only for
        queries within this band, farther queries are attempted and raise
        :class:`ProjectionFailureError` if the damped Newton iteration does
        not reach 1e-12 within 50 iterations.
    bounding_box : tuple
        ``(xmin, ymin, xmax, ymax)`` covering the domain.
    """

    def closest_point(x, y):
        return _project_to_levelset(levelset, gradient, x, y)

    def signed_distance(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ax, ay = closest_point(x, y)
        d = np.hypot(x - ax, y - ay)
        return np.where(np.asarray(levelset(x, y)) < 0.0, -d, d)

    def outward_normal(x, y):
        ax, ay = closest_point(x, y)
        gx, gy = gradient(ax, ay)
        gx = np.asarray(gx, dtype=float)
        gy = np.asarray(gy, dtype=float)
        norm = np.hypot(gx, gy)
        if np.any(norm < 1e-30):
            raise DegenerateQueryError("level-set gradient vanishes on the curve")
        # levelset is negative inside, so its gradient points outward
        return gx / norm, gy / norm

    return DomainDescriptor(
        signed_distance=signed_distance,
        closest_point=closest_point,
        outward_normal=outward_normal,
        fermi_halfwidth=float(band),
        bounding_box=tuple(bounding_box),
        name=name,
    )


def _project_to_levelset(levelset, gradient, qx, qy, max_iter=50, tol=1e-12):
    """Closest point on ``{phi = 0}`` by damped Newton / tangential descent.

    Alternates a damped Newton snap onto the curve along the gradient with a
    tangential slide toward the query point; the fixed point satisfies both
    ``phi(p) = 0`` and ``(q - p) || grad phi(p)``, which characterizes the
    closest point within the Fermi band.
    """
    scalar = np.isscalar(qx) or np.asarray(qx).ndim == 0
    qx = np.atleast_1d(np.asarray(qx, dtype=float))
    qy = np.atleast_1d(np.asarray(qy, dtype=float))
    px, py = qx.copy(), qy.copy()
    scale = np.maximum(1.0, np.hypot(qx, qy))
    slide = np.ones_like(px)

    for it in range(max_iter):
        # snap onto the curve: damped Newton along the gradient direction
        for _ in range(8):
            phi = np.asarray(levelset(px, py), dtype=float)
            gx, gy = gradient(px, py)
            gx = np.asarray(gx, dtype=float)
            gy = np.asarray(gy, dtype=float)
            g2 = gx * gx + gy * gy
            if np.any(g2 < 1e-30):
                raise ProjectionFailureError(
                    "level-set gradient vanishes during projection"
                )
            if np.all(np.abs(phi) <= tol * scale):
                break
            step = phi / g2
            nx, ny = px, py
            for _ in range(10):
                nx, ny = px - step * gx, py - step * gy
                worse = np.abs(np.asarray(levelset(nx, ny), dtype=float)) > np.abs(phi)
                if not np.any(worse):
                    break
                # halve the step where the residual got worse
                step = np.where(worse, 0.5 * step, step)
            px, py = nx, ny

        gx, gy = gradient(px, py)
        gx = np.asarray(gx, dtype=float)
        gy = np.asarray(gy, dtype=float)
        gn = np.hypot(gx, gy)
        tx, ty = -gy / gn, gx / gn
        s = (qx - px) * tx + (qy - py) * ty
        if np.all(np.abs(s) <= tol * scale):
            if scalar:
                return float(px[0]), float(py[0])
            return px, py
        if it > max_iter // 2:
            slide = np.full_like(slide, 0.5)
        px = px + slide * s * tx
        py = py + slide * s * ty

    raise ProjectionFailureError(
        "closest-point projection did not converge in %d iterations" % max_iter
    )


@dataclass(frozen=True)
class AnalyticField:
    """Scalar field ``value(x, y, t)`` with vectorized space arguments."""

    value: Callable
    name: str = ""

    def __call__(self, x, y, t=0.0):
        return self.value(x, y, t)

    @staticmethod
    def stationary(fn, name=""):
        """Wrap a time-independent ``fn(x, y)``."""
        return AnalyticField(lambda x, y, t=0.0: fn(x, y), name=name)


def experiment_fields(name, alpha=1.0, beta=2.0):
    """Exact solutions and data of the benchmark problems on the unit disc.

    ``"elliptic-xy"`` returns ``{u, v, f, g}`` for the coupled elliptic
    problem with Robin coupling parameters ``alpha, beta``:

        u = x*y,   v = (alpha + 2)/beta * x*y,
        f = x*y,   g = (2 + 5*(alpha + 2)/beta) * x*y.

    ``"parabolic-xy"`` returns ``{u, v, u0, v0}`` with

        u = exp(-t)*x*y,   v = 1.5*exp(-t)*x*y

    and the matching initial data.  Both rely on the unit-circle identities
    ``lap(x*y) = 0``, ``-lap_surface(x*y) = 4*x*y`` and ``d(x*y)/dnu = 2*x*y``.
    """
    if name == "elliptic-xy":
        if alpha <= 0.0 or beta <= 0.0:
            raise ValueError("Robin parameters alpha, beta must be positive")
        c = (alpha + 2.0) / beta
        return {
            "u": AnalyticField.stationary(lambda x, y: x * y, name="u"),
            "v": AnalyticField.stationary(lambda x, y: c * x * y, name="v"),
            "f": AnalyticField.stationary(lambda x, y: x * y, name="f"),
            "g": AnalyticField.stationary(
                lambda x, y: (2.0 + 5.0 * c) * x * y, name="g"
            ),
        }
    if name == "parabolic-xy":
        return {
            "u": AnalyticField(lambda x, y, t=0.0: np.exp(-t) * x * y, name="u"),
            "v": AnalyticField(lambda x, y, t=0.0: 1.5 * np.exp(-t) * x * y, name="v"),
            "u0": AnalyticField.stationary(lambda x, y: x * y, name="u0"),
            "v0": AnalyticField.stationary(lambda x, y: 1.5 * x * y, name="v0"),
        }
    raise UnknownExperimentError("unknown experiment preset: %r" % (name,))
