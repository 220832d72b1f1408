"""Deterministic test meshes: grids, hexagonal-lattice disks, icospheres."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma, hyp2f1

from .mesh import Mesh, make_mesh


def single_triangle() -> Mesh:
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]])
    return make_mesh(v, [[0, 1, 2]])


def grid_faces(nu: int, nv: int, ids: np.ndarray | None = None) -> np.ndarray:
    """Faces of an nu x nv cell grid, every cell split along the same diagonal.

    ``ids`` maps (i, j) grid nodes to vertex indices, which lets callers glue
    periodic seams and collapse poles; faces that collapse are dropped.
    """
    if ids is None:
        ids = np.arange((nu + 1) * (nv + 1)).reshape(nv + 1, nu + 1).T
    i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    a = ids[i, j].ravel()
    b = ids[i + 1, j].ravel()
    c = ids[i + 1, j + 1].ravel()
    d = ids[i, j + 1].ravel()
    faces = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    ok = ((faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2])
          & (faces[:, 2] != faces[:, 0]))
    return faces[ok]


def grid_mesh(n: int, extent=(-1.0, 1.0, -1.0, 1.0), height=None) -> Mesh:
    """Regular triangulated rectangle; ``height(u, v)`` lifts it to a graph."""
    u0, u1, v0, v1 = extent
    u, v = np.meshgrid(np.linspace(u0, u1, n + 1), np.linspace(v0, v1, n + 1),
                       indexing="ij")
    u = u.T.ravel()
    v = v.T.ravel()
    z = np.zeros_like(u) if height is None else height(u, v)
    return make_mesh(np.stack([u, v, z], 1), grid_faces(n, n))


_SC_SCALE = gamma(5 / 6) / (gamma(7 / 6) * gamma(2 / 3))


def _disk_to_hexagon(w):
    """Conformal map of the unit disk onto the regular hexagon with vertices
    at the sixth roots of unity (Schwarz-Christoffel)."""
    return _SC_SCALE * w * hyp2f1(1 / 3, 1 / 6, 7 / 6, w ** 6)


def _hexagon_to_disk(z: np.ndarray) -> np.ndarray:
    """Inverse of the Schwarz-Christoffel map by damped Newton, for points
    strictly inside the hexagon."""
    w = z.astype(complex)
    for _ in range(100):
        wn = w - (_disk_to_hexagon(w) - z) * (1 - w ** 6) ** (1 / 3) / _SC_SCALE
        out = np.abs(wn) >= 1
        wn[out] = 0.5 * (w[out] + (1 - 1e-12) * wn[out] / np.abs(wn[out]))
        done = np.max(np.abs(wn - w), initial=0.0) < 1e-15
        w = wn
        if done:
            break
    return w


def _edge_angles(n: int) -> np.ndarray:
    """Angles on the circle of the points splitting a hexagon edge into n."""
    def arc(th, t):
        return abs(_disk_to_hexagon(np.exp(1j * th)) - 1) - t
    return np.array([0.0] + [brentq(arc, 0, np.pi / 3, args=(i / n,), xtol=1e-15)
                             for i in range(1, n)])


def disk_points(rings: int, radius: float = 1.0, layout: str = "conformal"):
    """Triangulated disk built from the hexagonal lattice.

    Ring k of the lattice (6k points on the hexagon of size k/rings) is
    carried onto the disk either by the conformal map of the hexagon onto
    the disk ("conformal", smooth inside, triangles stay close to
    equilateral) or by pushing each ring radially onto a circle ("radial").
    The radial layout has kinks along the six corner rays, where the cotan
    Laplacian is not consistent.
    """
    if rings < 1:
        raise ValueError("need at least one ring")
    if layout not in ("conformal", "radial"):
        raise ValueError("layout must be 'conformal' or 'radial'")
    corners = np.exp(1j * np.pi / 3 * np.arange(7))
    rings_z = []
    for k in range(1, rings + 1):
        j = np.arange(6 * k)
        s, t = j // k, (j % k) / k
        rings_z.append(k / rings * ((1 - t) * corners[s] + t * corners[s + 1]))
    if layout == "radial":
        mapped = [np.exp(1j * 2 * np.pi * np.arange(6 * k) / (6 * k)) * k / rings
                  for k in range(1, rings + 1)]
    else:
        inner = _hexagon_to_disk(np.concatenate(rings_z[:-1])) if rings > 1 else []
        th = _edge_angles(rings)
        rim = np.concatenate([np.exp(1j * (th + np.pi / 3 * s)) for s in range(6)])
        mapped = [np.asarray(inner), rim]
    w = np.concatenate([[0j]] + mapped) * radius
    pts = np.column_stack([w.real, w.imag])
    starts = [0] + [1 + 3 * k * (k - 1) for k in range(1, rings + 1)]

    faces = []
    for j in range(6):
        faces.append([0, 1 + j, 1 + (j + 1) % 6])
    for k in range(2, rings + 1):
        na, nb = 6 * (k - 1), 6 * k
        a0, b0 = starts[k - 1], starts[k]
        i = j = 0
        while i < na or j < nb:
            # zipper: advance the ring whose next point comes first in angle
            ta = (i + 1) / na
            tb = (j + 1) / nb
            if j < nb and (i >= na or tb <= ta + 1e-12):
                faces.append([a0 + i % na, b0 + j % nb, b0 + (j + 1) % nb])
                j += 1
            else:
                faces.append([a0 + i % na, b0 + j % nb, a0 + (i + 1) % na])
                i += 1
    return pts, np.asarray(faces, dtype=np.int64)


def disk_mesh(resolution: int, radius: float = 1.0, height=None) -> Mesh:
    """Disk with ``resolution`` edges across its diameter (resolution/2 rings)."""
    pts, faces = disk_points(max(1, resolution // 2), radius)
    z = np.zeros(len(pts)) if height is None else height(pts[:, 0], pts[:, 1])
    mesh = make_mesh(np.column_stack([pts, z]), faces)
    mesh.extras["resolution"] = int(resolution)
    return mesh


def bump(s):
    """C-infinity bump, 1 at s=0, vanishing with all derivatives at |s|>=1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def poly_bump(s, power: int = 4):
    """(1 - s^2)^power inside |s| < 1: C^(power-1), much gentler than ``bump``."""
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1, np.clip(1 - s ** 2, 0, None) ** power, 0.0)


BUMP_PROFILES = {"poly": poly_bump, "smooth": bump}


def perturbed_disk(resolution: int, amplitude: float = 0.01,
                   support: float = 0.85, radius: float = 1.0,
                   profile: str = "poly") -> Mesh:
    """Flat disk with an interior bump; exactly flat outside ``support * radius``.

    The default polynomial profile keeps int |A|^2 below 1e-2 at amplitude
    0.01; the C-infinity ``smooth`` profile has steeper shoulders and does not.
    """
    prof = BUMP_PROFILES[profile]

    def height(x, y):
        return amplitude * prof(np.hypot(x, y) / (support * radius))
    return disk_mesh(resolution, radius, height)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> Mesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
             [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
             [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]]
    faces = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
             [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
             [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
             [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    verts = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    return make_mesh(radius * np.asarray(verts), faces)
