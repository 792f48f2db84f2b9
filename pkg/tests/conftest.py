"""Shared test helpers: random star-shaped cells and independent integrals."""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


def random_star_polygon(rng, n_min=3, n_max=8, small_edge=None, scale=None):
    """Random star-shaped polygon with vertices sorted by angle.

    Vertices sit at jittered radii on sorted angles around the origin, so the
    polygon is star-shaped with respect to the origin by construction. When
    small_edge is given, one edge is split at that relative position, creating
    an edge of length small_edge * (original edge length).
    """
    n = int(rng.integers(n_min, n_max + 1))
    gaps = rng.uniform(0.15, 1.0, size=n)
    angles = 2.0 * np.pi * np.cumsum(gaps) / np.sum(gaps)
    radii = rng.uniform(0.6, 1.25, size=n)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    if scale is None:
        scale = float(rng.uniform(0.05, 2.0))
    pts = pts * scale + rng.uniform(-1.0, 1.0, size=2)
    if small_edge is not None:
        i = int(rng.integers(0, n))
        a, b = pts[i], pts[(i + 1) % n]
        new = a + small_edge * (b - a)
        pts = np.insert(pts, i + 1, new, axis=0)
    return pts


def gauss01(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def integrate_monomial_over_polygon(points, center, h, alpha):
    """Exact integral of ((x-c)/h)^alpha over a polygon via the divergence
    theorem: the integrand is homogeneous of degree |alpha| about c, so
    int_D m = 1/(|a|+2) * sum_e int_e m (x-c).n ds, evaluated with 1D Gauss."""
    alpha = tuple(int(a) for a in alpha)
    deg = sum(alpha)
    t, w = gauss01(deg // 2 + 2)
    total = 0.0
    n = len(points)
    for i in range(n):
        p0, p1 = points[i], points[(i + 1) % n]
        d = p1 - p0
        length = np.hypot(*d)
        if length == 0.0:
            continue
        normal = np.array([d[1], -d[0]]) / length
        pts = p0[None, :] + t[:, None] * d[None, :]
        rel = (pts - center) / h
        vals = rel[:, 0] ** alpha[0] * rel[:, 1] ** alpha[1]
        xn = (pts - center) @ normal
        total += length * np.sum(w * vals * xn)
    return total / (deg + 2)


def integrate_monomial_over_box(lo, hi, center, h, alpha):
    """Closed form of ((x-c)/h)^alpha over an axis-aligned box."""
    val = 1.0
    for d, a in enumerate(alpha):
        a = int(a)
        prim = ((hi[d] - center[d]) ** (a + 1) - (lo[d] - center[d]) ** (a + 1))
        val *= prim / ((a + 1) * h**a)
    return val


def poly_area(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
