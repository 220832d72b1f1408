"""Independent high-precision oracles, used to freeze reference values.

These avoid the jet machinery entirely: the graph z = x**3 is a cylinder
over a plane curve, so every quantity reduces to arclength derivatives of
the curve's signed curvature k. With H = k, |A|^2 = k^2 and the trace-free
part equal to k/2 along the curve direction,

    I = k'''' + k^2 k'' - (k/2) (k')^2      (primes: d/ds).

Run as a script to print the frozen values.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 50


def _k(x):
    # signed curvature with the upward normal, h = -<f_xx, nu>
    return -6 * x / (1 + 9 * x ** 4) ** mp.mpf(1.5)


def _ds(fn):
    return lambda x: mp.diff(fn, x) / mp.sqrt(1 + 9 * x ** 4)


def cubic_graph_el(x) -> mp.mpf:
    x = mp.mpf(x)
    k1 = _ds(_k)
    k2 = _ds(k1)
    k3 = _ds(k2)
    k4 = _ds(k3)
    k = _k(x)
    return k4(x) + k ** 2 * k2(x) - k / 2 * k1(x) ** 2


def cubic_graph_fields(x) -> dict:
    x = mp.mpf(x)
    k1 = _ds(_k)
    return {"H": _k(x), "gradH_norm2": k1(x) ** 2, "A_norm2": _k(x) ** 2}


def paraboloid_energy(radius=1.0) -> float:
    """F for z = (u^2 + v^2)/4 over a disk, by radial Gauss quadrature.

    With w = 1 + r^2/4 the principal curvatures are 1/(2 w^1.5) and
    1/(2 w^0.5), so |H| = (1 + w) / (2 w^1.5) is radial and
    F = 2 pi * int (H')^2 / w * sqrt(w) r dr.
    """
    def H(r):
        w = 1 + r ** 2 / 4
        return (1 + w) / (2 * w ** mp.mpf(1.5))

    def integrand(r):
        w = 1 + r ** 2 / 4
        dH = mp.diff(H, r)
        return dH ** 2 / w * mp.sqrt(w) * r

    return 2 * mp.pi * mp.quad(integrand, [0, radius])


if __name__ == "__main__":
    print("I[u^3] at (0.3, 0):", mp.nstr(cubic_graph_el(0.3), 20))
    print("fields:", {k: mp.nstr(v, 20) for k, v in cubic_graph_fields(0.3).items()})
    print("F paraboloid disk:", mp.nstr(paraboloid_energy(), 20))
