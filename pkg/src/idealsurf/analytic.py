"""Closed-form parametric surfaces with exact curvature data.

Every quantity is computed in the chart from exact first and second
fundamental forms, with derivatives up to sixth order supplied by Taylor
jets. These values are the ground truth the discrete operators are checked
against.

Orientation: the unit normal is f_u x f_v normalised; the sphere and
cylinder charts are arranged so that this is the outward normal, and
h_ij = -<f_ij, nu>, which makes the sphere's H equal to +2/r.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .generators import disk_points, grid_faces, icosphere
from .jets import Jet
from .mesh import Mesh, make_mesh

JET_ORDER = 6


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ParametricSurface:
    """A named chart family over a rectangle (optionally periodic) or disk.

    ``domain`` is ``("rect", (u0, u1, v0, v1))`` or ``("disk", radius)``.
    Graph heights are polynomials given as ``[(coef, i, j), ...]`` meaning
    sum coef * u**i * v**j.
    """

    family: str
    params: dict = field(default_factory=dict)
    domain: tuple = ("rect", (-1.0, 1.0, -1.0, 1.0))
    periodic: tuple = (False, False)

    # -- families --------------------------------------------------------
    @classmethod
    def plane(cls, extent=(-1.0, 1.0, -1.0, 1.0)):
        return cls("plane", {}, ("rect", tuple(extent)))

    @classmethod
    def sphere(cls, r=1.0, theta=(0.0, np.pi)):
        return cls("sphere", {"r": float(r)},
                   ("rect", (theta[0], theta[1], 0.0, 2 * np.pi)), (False, True))

    @classmethod
    def cylinder(cls, r=1.0, height=(-1.0, 1.0), angle=None):
        if angle is None:
            return cls("cylinder", {"r": float(r)},
                       ("rect", (0.0, 2 * np.pi, height[0], height[1])),
                       (True, False))
        return cls("cylinder", {"r": float(r)},
                   ("rect", (angle[0], angle[1], height[0], height[1])))

    @classmethod
    def graph(cls, coeffs, extent=(-1.0, 1.0, -1.0, 1.0), disk=None):
        coeffs = tuple((float(c), int(i), int(j)) for c, i, j in coeffs)
        dom = ("disk", float(disk)) if disk is not None else ("rect", tuple(extent))
        return cls("graph", {"coeffs": coeffs}, dom)

    # -- chart -----------------------------------------------------------
    def chart(self, u, v):
        fam = self.family
        if fam == "plane":
            return (u, v, 0.0 * u)
        if fam == "sphere":
            r = self.params["r"]
            su = jets.sin(u)
            return (r * su * jets.cos(v), r * su * jets.sin(v), r * jets.cos(u))
        if fam == "cylinder":
            r = self.params["r"]
            return (r * jets.cos(u), r * jets.sin(u), v)
        if fam == "graph":
            return (u, v, self.height(u, v))
        raise ValueError(f"unknown surface family {fam!r}")

    def height(self, u, v):
        z = 0.0 * u
        for c, i, j in self.params["coeffs"]:
            z = z + c * (u ** i) * (v ** j)
        return z

    def contains(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        tol = 1e-12
        if self.domain[0] == "disk":
            return u ** 2 + v ** 2 <= self.domain[1] ** 2 * (1 + tol)
        u0, u1, v0, v1 = self.domain[1]
        ok_u = np.ones(u.shape, bool) if self.periodic[0] else \
            (u >= u0 - tol) & (u <= u1 + tol)
        ok_v = np.ones(v.shape, bool) if self.periodic[1] else \
            (v >= v0 - tol) & (v <= v1 + tol)
        return ok_u & ok_v

    def random_points(self, n: int, rng, margin: float = 0.0):
        """Uniform parameter samples, shrunk away from the domain edge."""
        if self.domain[0] == "disk":
            R = self.domain[1] * (1 - margin)
            t = rng.uniform(0, 2 * np.pi, n)
            s = R * np.sqrt(rng.uniform(0, 1, n))
            return s * np.cos(t), s * np.sin(t)
        u0, u1, v0, v1 = self.domain[1]
        du, dv = (u1 - u0) * margin, (v1 - v0) * margin
        return rng.uniform(u0 + du, u1 - du, n), rng.uniform(v0 + dv, v1 - dv, n)


@dataclass(frozen=True, eq=False)
class CurvatureSample:
    point: np.ndarray
    normal: np.ndarray
    H: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    A_norm2: np.ndarray
    A0_norm2: np.ndarray
    gradH: np.ndarray  # ambient tangent vector
    gradH_norm2: np.ndarray
    lapH: np.ndarray
    bilapH: np.ndarray
    contraction: np.ndarray
    el_residual: np.ndarray
    gradA_norm2: np.ndarray
    gradA0_norm2: np.ndarray
    hessH_norm2: np.ndarray
    simons: np.ndarray


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0])


def _geometry(surface: ParametricSurface, u, v, need_sixth: bool = True):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    u, v = np.broadcast_arrays(u, v)
    if not surface.contains(u, v).all():
        raise DomainError("sample point outside the surface domain")
    order = JET_ORDER if need_sixth else 4
    # extended precision: sixth derivatives of trigonometric charts lose
    # several digits to cancellation in double
    U = Jet.variable(u.astype(np.longdouble), 0, order)
    Vv = Jet.variable(v.astype(np.longdouble), 1, order)
    f = tuple(c if isinstance(c, Jet) else
              Jet.constant(c, order, u.shape, np.longdouble)
              for c in surface.chart(U, Vv))

    df = [tuple(c.d(a) for c in f) for a in range(2)]
    ddf = [[tuple(c.d(b) for c in df[a]) for b in range(2)] for a in range(2)]
    g = [[_dot(df[a], df[b]) for b in range(2)] for a in range(2)]
    det = g[0][0] * g[1][1] - g[0][1] * g[0][1]
    if np.any(det.value <= 1e-14 * (g[0][0].value + g[1][1].value) ** 2):
        raise DomainError("degenerate metric at sample point")
    idet = det.reciprocal()
    gi = [[g[1][1] * idet, -g[0][1] * idet], [-g[1][0] * idet, g[0][0] * idet]]
    sqrtg = det.sqrt()
    n = tuple(c / sqrtg for c in _cross(df[0], df[1]))
    h = [[-_dot(ddf[a][b], n) for b in range(2)] for a in range(2)]

    H = sum(gi[a][b] * h[a][b] for a in range(2) for b in range(2))

    def lap(F):
        dF = [F.d(0), F.d(1)]
        flux = [sqrtg * (gi[a][0] * dF[0] + gi[a][1] * dF[1]) for a in range(2)]
        return (flux[0].d(0) + flux[1].d(1)) / sqrtg

    lapH = lap(H)
    bilapH = lap(lapH) if need_sixth else None

    # tensor calculus below needs at most two derivatives of h
    lo = [[x.truncate(2) for x in row] for row in h]
    gi2 = [[x.truncate(2) for x in row] for row in gi]
    dg = [[[g[i][j].truncate(3).d(k) for k in range(2)] for j in range(2)]
          for i in range(2)]
    # Gam[k][i][j] = Christoffel symbol Gamma^k_ij
    Gam = [[[0.5 * sum(gi2[k][l] * (dg[j][l][i] + dg[i][l][j] - dg[i][j][l])
                       for l in range(2))
             for j in range(2)] for i in range(2)] for k in range(2)]
    # T[k][i][j] = nabla_k h_ij, kept as an order-1 jet
    T = [[[lo[i][j].d(k)
           - sum(Gam[m][k][i] * lo[m][j] + Gam[m][k][j] * lo[i][m] for m in range(2))
           for j in range(2)] for i in range(2)] for k in range(2)]

    def nn(l, k, i, j):
        out = T[k][i][j].d(l)
        for m in range(2):
            out = out - (Gam[m][l][k].value * T[m][i][j].value
                         + Gam[m][l][i].value * T[k][m][j].value
                         + Gam[m][l][j].value * T[k][i][m].value)
        return out

    # everything from here on is pointwise values (extended precision)
    v = lambda J: J.value  # noqa: E731
    G = [[v(x) for x in row] for row in g]
    Gi = [[v(x) for x in row] for row in gi]
    hv = [[v(x) for x in row] for row in h]
    Hl = v(H)
    dH = [H.d(0), H.d(1)]
    dHv = [v(x) for x in dH]
    Gm = [[[v(x) for x in row] for row in blk] for blk in Gam]
    Tv = [[[v(x) for x in row] for row in blk] for blk in T]
    R2 = range(2)

    def raise2(X):
        return [[sum(Gi[a][i] * Gi[b][j] * X[i][j] for i in R2 for j in R2)
                 for b in R2] for a in R2]

    def norm2(X):
        Xu = raise2(X)
        return sum(X[a][b] * Xu[a][b] for a in R2 for b in R2)

    def norm3(X):
        return sum(Gi[k][c] * Gi[i][a] * Gi[j][b] * X[k][i][j] * X[c][a][b]
                   for k in R2 for c in R2 for i in R2
                   for a in R2 for j in R2 for b in R2)

    A2 = norm2(hv)
    A0 = [[hv[a][b] - 0.5 * Hl * G[a][b] for b in R2] for a in R2]
    A0up = raise2(A0)
    T0 = [[[Tv[k][i][j] - 0.5 * dHv[k] * G[i][j] for j in R2] for i in R2]
          for k in R2]
    rough = [[sum(Gi[l][k] * v(nn(l, k, i, j)) for l in R2 for k in R2)
              for j in R2] for i in R2]
    hess = [[v(dH[i].d(j)) - sum(Gm[k][i][j] * dHv[k] for k in R2)
             for j in R2] for i in R2]
    hmix = [[sum(hv[i][m] * Gi[m][q] * hv[q][j] for m in R2 for q in R2)
             for j in R2] for i in R2]
    Rs = [[rough[i][j] - hess[i][j] - Hl * hmix[i][j] + A2 * hv[i][j]
           for j in R2] for i in R2]
    gup = [Gi[a][0] * dHv[0] + Gi[a][1] * dHv[1] for a in R2]
    contraction = sum(A0up[a][b] * dHv[a] * dHv[b] for a in R2 for b in R2)

    def f64(x):
        return np.asarray(x, dtype=float)

    Hv = f64(Hl)
    A0n2 = f64(norm2(A0))
    split = np.sqrt(np.maximum(A0n2, 0.0) / 2.0)
    out = dict(
        point=np.stack([f64(v(c)) for c in f], -1),
        normal=np.stack([f64(v(c)) for c in n], -1),
        H=Hv, kappa1=0.5 * Hv + split, kappa2=0.5 * Hv - split,
        A_norm2=f64(A2), A0_norm2=A0n2,
        gradH=np.stack([f64(gup[0] * v(df[0][c]) + gup[1] * v(df[1][c]))
                        for c in range(3)], -1),
        gradH_norm2=f64(dHv[0] * gup[0] + dHv[1] * gup[1]),
        lapH=f64(v(lapH)), contraction=f64(contraction),
        gradA_norm2=f64(norm3(Tv)), gradA0_norm2=f64(norm3(T0)),
        hessH_norm2=f64(norm2(hess)),
        simons=np.sqrt(np.maximum(f64(norm2(Rs)), 0.0)),
    )
    out["area_element"] = f64(v(sqrtg))
    if need_sixth:
        out["bilapH"] = f64(v(bilapH))
        out["el_residual"] = f64(v(bilapH) + A2 * v(lapH) - contraction)
    else:
        out["bilapH"] = np.full_like(Hv, np.nan)
        out["el_residual"] = np.full_like(Hv, np.nan)
    return out


def exact_curvature(surface: ParametricSurface, u, v) -> CurvatureSample:
    """All curvature quantities at chart points (scalars or arrays).

    Vectors (point, normal, gradH) have a trailing axis of length 3; scalar
    inputs give 0-d scalar fields and (3,) vectors.
    """
    geo = _geometry(surface, u, v)
    geo.pop("area_element")
    if np.ndim(u) == 0 and np.ndim(v) == 0:
        geo = {k: val[0] for k, val in geo.items()}
    return CurvatureSample(**geo)


def simons_residual_exact(surface: ParametricSurface, u, v) -> np.ndarray:
    """|Delta h_ij - nabla_i nabla_j H - H h_im h^m_j + |A|^2 h_ij| in the chart."""
    return _geometry(surface, u, v, need_sixth=False)["simons"]


# ------------------------------------------------------------ sampling

def sample_mesh(surface: ParametricSurface, resolution: int) -> Mesh:
    """Triangulate the chart domain; chart params are kept in ``extras["uv"]``.

    Rectangles get ``resolution`` cells per side (twice that around periodic
    directions), disks get ``resolution`` edges across the diameter.
    Periodic seams are glued and sphere poles collapsed. The full sphere is
    triangulated as a geodesic icosphere of comparable edge length instead,
    because the polar fans of the latitude-longitude grid spoil the cotan
    mean curvature.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if surface.family == "sphere" and _full_sphere(surface):
        return _sample_icosphere(surface, resolution)
    if surface.domain[0] == "disk":
        R = surface.domain[1]
        pts, faces = disk_points(max(1, resolution // 2), R)
        uv = pts
    else:
        uv, faces = _rect_sampling(surface, resolution)
    X = np.stack(surface.chart(uv[:, 0], uv[:, 1]), -1)
    X = X + np.zeros((len(uv), 3))
    mesh = make_mesh(X, faces)
    mesh.extras["uv"] = uv
    mesh.extras["surface"] = surface
    mesh.extras["resolution"] = int(resolution)
    return mesh


def _full_sphere(surface) -> bool:
    u0, u1 = surface.domain[1][:2]
    return np.isclose(u0, 0.0) and np.isclose(u1, np.pi)


def _sample_icosphere(surface, resolution):
    # icosphere level k has about 2.9 * 2^k edges across a great semicircle
    level = max(1, int(round(np.log2(resolution / 3.0))))
    r = surface.params["r"]
    mesh = icosphere(level, r)
    X = mesh.vertices
    theta = np.arccos(np.clip(X[:, 2] / r, -1.0, 1.0))
    phi = np.mod(np.arctan2(X[:, 1], X[:, 0]), 2 * np.pi)
    mesh.extras["uv"] = np.column_stack([theta, phi])
    mesh.extras["surface"] = surface
    mesh.extras["resolution"] = int(resolution)
    return mesh


def _rect_sampling(surface, resolution):
    u0, u1, v0, v1 = surface.domain[1]
    pu, pv = surface.periodic
    nu = resolution * (2 if pu else 1)
    nv = resolution * (2 if pv else 1)
    uu = np.linspace(u0, u1, nu + 1)
    vv = np.linspace(v0, v1, nv + 1)
    ids = -np.ones((nu + 1, nv + 1), dtype=np.int64)
    params = []
    sphere = surface.family == "sphere"
    for i in range(nu + 1):
        for j in range(nv + 1):
            if pu and i == nu:
                ids[i, j] = ids[0, j]
            elif pv and j == nv:
                ids[i, j] = ids[i, 0]
            elif sphere and j > 0 and (np.isclose(uu[i], 0.0) or
                                       np.isclose(uu[i], np.pi)):
                ids[i, j] = ids[i, 0]
            else:
                ids[i, j] = len(params)
                params.append((uu[i], vv[j]))
    return np.asarray(params), grid_faces(nu, nv, ids)


def chart_energy(surface: ParametricSurface, nodes: int = 64) -> float:
    """F = int |grad H|^2 dmu by tensor Gauss-Legendre quadrature in the chart
    (polar coordinates on disk domains)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    if surface.domain[0] == "disk":
        R = surface.domain[1]
        r = 0.5 * R * (x + 1)
        wr = 0.5 * R * w
        t = np.pi * (np.polynomial.legendre.leggauss(2 * nodes)[0] + 1)
        wt = np.pi * np.polynomial.legendre.leggauss(2 * nodes)[1]
        rr, tt = np.meshgrid(r, t, indexing="ij")
        u, v = rr * np.cos(tt), rr * np.sin(tt)
        W = (wr * r)[:, None] * wt[None, :]
    else:
        u0, u1, v0, v1 = surface.domain[1]
        uu = u0 + 0.5 * (u1 - u0) * (x + 1)
        vv = v0 + 0.5 * (v1 - v0) * (x + 1)
        u, v = np.meshgrid(uu, vv, indexing="ij")
        W = np.outer(w, w) * 0.25 * (u1 - u0) * (v1 - v0)
    geo = _geometry(surface, u.ravel(), v.ravel(), need_sixth=False)
    return float(np.sum(geo["gradH_norm2"] * geo["area_element"] * W.ravel()))


def exact_samples(mesh: Mesh) -> CurvatureSample:
    """Exact curvature at the chart parameters of a sampled mesh.

    Chart-degenerate points (sphere poles) are evaluated a hair inside the
    chart; every exact quantity there is constant anyway.
    """
    cached = mesh.extras.get("_exact")
    if cached is not None:
        return cached
    surface = mesh.extras["surface"]
    uv = mesh.extras["uv"].copy()
    if surface.family == "sphere":
        uv[:, 0] = np.clip(uv[:, 0], 1e-3, np.pi - 1e-3)
    out = exact_curvature(surface, uv[:, 0], uv[:, 1])
    mesh.extras["_exact"] = out
    return out
