"""Curvature, signed distance and the mollified surface integral on simple shapes.

    python3 demos/geometry_kernels.py
"""

import numpy as np

from curvtopo.fields import mean_curvature
from curvtopo.grid import make_grid
from curvtopo.narrowband import fast_march, surface_integral


def curvature_of_paraboloid(n=128):
    g = make_grid(2, n)
    x, y = g.centers()
    r = np.hypot(x, y)
    kappa = mean_curvature(0.5 * r**2, g)
    sel = (r >= 5 * g.h) & (r <= 0.45)
    print(f"paraboloid n={n}: max relative error of kappa against 1/r = "
          f"{np.max(np.abs(kappa[sel] * r[sel] - 1)):.2e}, |kappa| <= {np.abs(kappa).max():.1f} (1/h = {n})")


def circle_perimeter():
    exact = 2 * np.pi * 0.25
    prev = None
    for n in (32, 64, 128, 256):
        g = make_grid(2, n)
        x, y = g.centers()
        band = fast_march(np.hypot(x, y) - 0.25, g)
        err = abs(surface_integral(1.0, band) - exact) / exact
        rate = "" if prev is None else f"  order {np.log2(prev / err):.2f}"
        print(f"circle n={n:4d}: perimeter relative error {err:.2e}{rate}")
        prev = err


def distance_accuracy(n=128):
    g = make_grid(2, n)
    x, y = g.centers()
    r = np.hypot(x, y)
    band = fast_march(r - 0.25, g)
    near = (band.in_x + band.in_y) > 0
    print(f"fast marching n={n}: max |b - (r - R)| / h over both shells = "
          f"{np.abs(band.b[near] - (r[near] - 0.25)).max() / g.h:.3f}")


if __name__ == "__main__":
    curvature_of_paraboloid()
    distance_accuracy()
    circle_perimeter()
