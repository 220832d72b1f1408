"""Oriented triangle meshes with boundary.

Connectivity is built once from the face list; metric data (areas, normals,
boundary conormals, cotan weights) is attached by :func:`compute_metric`.
Both steps validate the invariants the curvature operators rely on.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist


class MeshError(ValueError):
    """Invalid mesh input. ``edge`` / ``face`` name the offending element."""

    def __init__(self, message: str, *, edge=None, face=None):
        super().__init__(message)
        self.edge = edge
        self.face = face


@dataclass(frozen=True, eq=False)
class Topology:
    """Halfedge tables. Halfedge ``3*f + k`` runs faces[f, k] -> faces[f, k+1]."""

    n_vertices: int
    faces: np.ndarray
    he_src: np.ndarray
    he_dst: np.ndarray
    twin: np.ndarray  # -1 on boundary halfedges
    boundary_loops: tuple
    boundary_vertices: np.ndarray
    edges: np.ndarray  # unique undirected edges (i < j)
    adjacency: sparse.csr_matrix

    @property
    def n_faces(self) -> int:
        return len(self.faces)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh plus (optionally) its metric data.

    ``conormal`` rows align with ``topology.boundary_vertices``.
    """

    vertices: np.ndarray
    topology: Topology
    face_normals: np.ndarray | None = None
    face_area: np.ndarray | None = None
    vertex_area: np.ndarray | None = None
    vertex_normals: np.ndarray | None = None
    conormal: np.ndarray | None = None
    cotan: sparse.csr_matrix | None = None
    corner_cot: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def faces(self) -> np.ndarray:
        return self.topology.faces

    @property
    def n_vertices(self) -> int:
        return self.topology.n_vertices

    @property
    def n_faces(self) -> int:
        return self.topology.n_faces

    @property
    def boundary_loops(self) -> tuple:
        return self.topology.boundary_loops

    @property
    def boundary_vertices(self) -> np.ndarray:
        return self.topology.boundary_vertices

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.topology.boundary_vertices] = True
        return mask

    @property
    def is_closed(self) -> bool:
        return len(self.topology.boundary_loops) == 0

    @property
    def has_metric(self) -> bool:
        return self.vertex_area is not None

    def diameter(self) -> float:
        """Largest distance between two vertices (over convex-hull vertices)."""
        if "_diameter" not in self.extras:
            self.extras["_diameter"] = _point_set_diameter(self.vertices)
        return self.extras["_diameter"]

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Same connectivity, new positions, metric recomputed.

        Public extras are carried over; caches (keys starting with "_") are not.
        """
        keep = {k: v for k, v in self.extras.items() if not k.startswith("_")}
        bare = Mesh(np.asarray(vertices, dtype=float), self.topology, extras=keep)
        return compute_metric(bare)


def _point_set_diameter(V: np.ndarray) -> float:
    if len(V) < 2:
        return 0.0
    try:
        pts = V[ConvexHull(V).vertices]
    except QhullError:
        # flat or degenerate: hull of the 2D projection onto the principal plane
        X = V - V.mean(axis=0)
        basis = np.linalg.svd(X, full_matrices=False)[2][:2]
        try:
            pts = V[ConvexHull(X @ basis.T).vertices]
        except QhullError:
            pts = V
    best = 0.0
    for i in range(0, len(pts), 1024):
        best = max(best, float(cdist(pts[i:i + 1024], pts).max()))
    return best


def build_topology(faces, n_vertices: int) -> Topology:
    faces = np.asarray(faces, dtype=np.int64)
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise MeshError("faces must be an (m, 3) array of vertex indices")
    if len(faces) == 0:
        raise MeshError("mesh has no faces")
    if faces.min() < 0 or faces.max() >= n_vertices:
        raise MeshError("face index out of range")
    repeated = ((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                | (faces[:, 2] == faces[:, 0]))
    if repeated.any():
        f = int(np.flatnonzero(repeated)[0])
        raise MeshError(f"face {f} repeats a vertex", face=f)

    m = len(faces)
    src = faces.reshape(-1)
    dst = faces[:, [1, 2, 0]].reshape(-1)

    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * n_vertices + hi
    order = np.argsort(key, kind="stable")
    skey = key[order]
    uniq, start, counts = np.unique(skey, return_index=True, return_counts=True)

    if counts.max() > 2:
        bad = int(np.argmax(counts > 2))
        e = (int(uniq[bad] // n_vertices), int(uniq[bad] % n_vertices))
        raise MeshError(f"non-manifold edge {e} shared by {counts[bad]} faces",
                        edge=e)

    twin = np.full(3 * m, -1, dtype=np.int64)
    pairs = start[counts == 2]
    h0 = order[pairs]
    h1 = order[pairs + 1]
    same_dir = src[h0] == src[h1]
    if same_dir.any():
        i = int(np.flatnonzero(same_dir)[0])
        e = (int(src[h0[i]]), int(dst[h0[i]]))
        raise MeshError(f"inconsistent winding across edge {e}", edge=e)
    twin[h0] = h1
    twin[h1] = h0

    edges = np.stack([uniq // n_vertices, uniq % n_vertices], axis=1)

    bnd = np.flatnonzero(twin < 0)
    loops = _boundary_loops(src, dst, bnd)
    bverts = (np.unique(np.concatenate(loops)) if loops
              else np.zeros(0, dtype=np.int64))

    ones = np.ones(len(edges))
    adj = sparse.coo_matrix((np.r_[ones, ones],
                             (np.r_[edges[:, 0], edges[:, 1]],
                              np.r_[edges[:, 1], edges[:, 0]])),
                            shape=(n_vertices, n_vertices)).tocsr()

    return Topology(n_vertices=n_vertices, faces=faces, he_src=src, he_dst=dst,
                    twin=twin, boundary_loops=tuple(loops),
                    boundary_vertices=bverts, edges=edges, adjacency=adj)


def _boundary_loops(src, dst, bnd) -> list:
    if len(bnd) == 0:
        return []
    outgoing = {}
    for h in bnd:
        s = int(src[h])
        if s in outgoing:
            raise MeshError(f"non-manifold boundary vertex {s}")
        outgoing[s] = int(h)
    loops = []
    seen = set()
    for h0 in bnd:
        h0 = int(h0)
        if h0 in seen:
            continue
        loop = []
        h = h0
        while h not in seen:
            seen.add(h)
            loop.append(int(src[h]))
            nxt = outgoing.get(int(dst[h]))
            if nxt is None:
                raise MeshError(f"open boundary chain at vertex {int(dst[h])}")
            h = nxt
        if h != h0:
            raise MeshError("boundary halfedges do not form simple loops")
        loops.append(np.asarray(loop, dtype=np.int64))
    loops.sort(key=lambda lp: int(lp.min()))
    return loops


def make_mesh(vertices, faces) -> Mesh:
    """Build connectivity and metric in one go."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must be an (n, 3) array")
    topo = build_topology(faces, len(vertices))
    return compute_metric(Mesh(vertices, topo))


def compute_metric(mesh: Mesh) -> Mesh:
    """Populate areas, normals, conormals and cotan weights."""
    V = mesh.vertices
    F = mesh.faces
    n = mesh.n_vertices

    p0, p1, p2 = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    # e_k is the edge opposite corner k
    e0 = p2 - p1
    e1 = p0 - p2
    e2 = p1 - p0
    cross = np.cross(e2, -e1)
    dbl = np.linalg.norm(cross, axis=1)
    scale = np.maximum.reduce([np.einsum("ij,ij->i", e, e) for e in (e0, e1, e2)])
    degenerate = dbl <= 1e-14 * scale
    if degenerate.any():
        f = int(np.flatnonzero(degenerate)[0])
        raise MeshError(f"degenerate (zero-area) face {f}", face=f)
    face_area = 0.5 * dbl
    face_normals = cross / dbl[:, None]

    # cot of the angle at corner k, between the two edges meeting there
    def _cot(a, b):
        return np.einsum("ij,ij->i", a, b) / dbl

    cot = np.stack([_cot(e2, -e1), _cot(e0, -e2), _cot(e1, -e0)], axis=1)

    # Mixed Voronoi areas: Voronoi cell on non-obtuse faces, barycentric
    # halves/quarters on obtuse ones.
    sq = np.stack([np.einsum("ij,ij->i", e, e) for e in (e0, e1, e2)], axis=1)
    obtuse = cot < 0
    any_obtuse = obtuse.any(axis=1)
    vor = np.empty((len(F), 3))
    # corner k gets (|e_{k+1}|^2 cot_{k+1} + |e_{k+2}|^2 cot_{k+2}) / 8
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        vor[:, k] = (sq[:, a] * cot[:, a] + sq[:, b] * cot[:, b]) / 8.0
    mixed = np.where(any_obtuse[:, None],
                     np.where(obtuse, 0.5, 0.25) * face_area[:, None], vor)
    vertex_area = np.bincount(F.reshape(-1), weights=mixed.reshape(-1),
                              minlength=n)

    vn = np.zeros((n, 3))
    for k in range(3):
        np.add.at(vn, F[:, k], cross)
    vlen = np.linalg.norm(vn, axis=1)
    isolated = vlen == 0
    vlen[isolated] = 1.0
    vertex_normals = vn / vlen[:, None]

    # cotan matrix K: K_ij = (cot a + cot b)/2, rows sum to zero
    rows = np.concatenate([F[:, 1], F[:, 2], F[:, 0]])
    cols = np.concatenate([F[:, 2], F[:, 0], F[:, 1]])
    w = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
    K = sparse.coo_matrix((np.r_[w, w], (np.r_[rows, cols], np.r_[cols, rows])),
                          shape=(n, n)).tocsr()
    K = K - sparse.diags(np.asarray(K.sum(axis=1)).ravel())
    K = K.tocsr()

    conormal = _conormals(V, mesh.topology, vertex_normals)

    return dataclasses.replace(
        mesh, face_normals=face_normals, face_area=face_area,
        vertex_area=vertex_area, vertex_normals=vertex_normals,
        conormal=conormal, cotan=K, corner_cot=cot)


def _conormals(V, topo: Topology, normals) -> np.ndarray:
    bverts = topo.boundary_vertices
    if len(bverts) == 0:
        return np.zeros((0, 3))
    pos = {int(v): i for i, v in enumerate(bverts)}
    tangent = np.zeros((len(bverts), 3))
    for loop in topo.boundary_loops:
        prev = np.roll(loop, 1)
        nxt = np.roll(loop, -1)
        a = V[loop] - V[prev]
        b = V[nxt] - V[loop]
        t = (a / np.linalg.norm(a, axis=1)[:, None]
             + b / np.linalg.norm(b, axis=1)[:, None])
        for v, tv in zip(loop, t):
            tangent[pos[int(v)]] = tv
    nu = normals[bverts]
    # Boundary halfedges keep the interior on their left, so t x nu points out.
    eta = np.cross(tangent, nu)
    return eta / np.linalg.norm(eta, axis=1)[:, None]


# ---------------------------------------------------------------- OBJ I/O

def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts = []
    faces = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
                verts.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshError(
                        f"line {lineno}: face {len(faces)} has {len(idx)} "
                        "vertices; only triangles are supported",
                        face=len(faces))
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    if not verts:
        raise MeshError(f"{path}: no vertices")
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=np.int64)


def load_mesh(path) -> Mesh:
    """Read a triangular OBJ file into a mesh with metric attached."""
    path = Path(path)
    if not path.is_file():
        raise MeshError(f"{path}: not a readable file")
    verts, faces = read_obj(path)
    return make_mesh(verts, faces)


def save_obj(mesh_or_vertices, path, faces=None) -> None:
    if isinstance(mesh_or_vertices, Mesh):
        verts, faces = mesh_or_vertices.vertices, mesh_or_vertices.faces
    else:
        verts = np.asarray(mesh_or_vertices)
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in verts]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    Path(path).write_text("\n".join(lines) + "\n")
