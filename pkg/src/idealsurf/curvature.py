"""Discrete curvature operators on triangle meshes.

Sign convention: with outward-wound faces the unit sphere has H = +2.
The shape tensor comes from a local polynomial height fit. H is either
its trace or the normal part of the cotan mean-curvature vector. The cotan
value is pointwise consistent only where every interior one-ring is nearly
symmetric (structured grids, subdivided icosahedra); on other
triangulations its O(1) errors make int |grad H|^2 fail to converge. The
default ``H_SOURCE = "auto"`` picks cotan on meshes passing that test and
the fit trace otherwise. With cotan H the fit only supplies the trace-free
part.

Shape tensors are stored as ambient 3x3 symmetric matrices tangent to the
vertex normal. That makes comparing tensors at neighbouring vertices a plain
subtraction followed by a tangential projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import Mesh, MeshError

FIT_RING = 2
BOUNDARY_FIT_RING = 3
H_SOURCES = ("auto", "fit", "cotan")
H_SOURCE = "auto"
SYMMETRY_TOL = 0.5


@dataclass(frozen=True, eq=False)
class CurvatureField:
    H: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    A: np.ndarray  # (n, 3, 3) ambient shape tensor
    A0: np.ndarray  # trace-free part
    A_norm2: np.ndarray
    A0_norm2: np.ndarray


@dataclass(frozen=True, eq=False)
class DerivedField:
    gradH: np.ndarray  # per-face tangent vectors
    gradH_norm2: np.ndarray  # per vertex
    gradH_vertex: np.ndarray  # per vertex, tangent-projected face average
    lapH: np.ndarray
    bilapH: np.ndarray
    contraction: np.ndarray  # (A0)^ij grad_i H grad_j H
    el_residual: np.ndarray
    weak_residual: np.ndarray  # H * I[f]
    interior: np.ndarray  # mask where el_residual is meaningful
    boundary: "BoundaryReport"


@dataclass(frozen=True, eq=False)
class BoundaryReport:
    vertices: np.ndarray
    A_norm: np.ndarray
    dH_deta: np.ndarray
    dlapH_deta: np.ndarray
    loop_max: list  # per loop: (max |A|, max |dH/deta|, max |dlapH/deta|)

    @property
    def empty(self) -> bool:
        return len(self.vertices) == 0

    def max(self) -> tuple[float, float, float]:
        if self.empty:
            return (0.0, 0.0, 0.0)
        return (float(np.max(self.A_norm)), float(np.max(np.abs(self.dH_deta))),
                float(np.max(np.abs(self.dlapH_deta))))


# ------------------------------------------------------------ linear operators

def _require_scalar(field) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.ndim != 1:
        raise TypeError("expected a scalar vertex field (one value per vertex)")
    return field


def laplace_beltrami(mesh: Mesh, field) -> np.ndarray:
    """Cotan Laplacian normalised by mixed vertex areas.

    Boundary rows keep only the faces that exist, which is the natural
    (Neumann) discretisation.
    """
    field = _require_scalar(field)
    if len(field) != mesh.n_vertices:
        raise ValueError("field length does not match vertex count")
    return (mesh.cotan @ field) / mesh.vertex_area


def mean_curvature_vector(mesh: Mesh) -> np.ndarray:
    """Cotan Laplacian of the embedding, i.e. the discrete Laplace of f."""
    return (mesh.cotan @ mesh.vertices) / mesh.vertex_area[:, None]


def face_gradient_matrix(mesh: Mesh) -> sparse.csr_matrix:
    """Sparse (3m, n) map from vertex values to per-face P1 gradients."""
    cached = mesh.extras.get("_grad")
    if cached is not None and cached[0] is mesh.vertices:
        return cached[1]
    V, F = mesh.vertices, mesh.faces
    m = len(F)
    nrm = mesh.face_normals
    dbl = 2.0 * mesh.face_area
    rows, cols, vals = [], [], []
    for k in range(3):
        a, b = F[:, (k + 1) % 3], F[:, (k + 2) % 3]
        g = np.cross(nrm, V[b] - V[a]) / dbl[:, None]
        for c in range(3):
            rows.append(3 * np.arange(m) + c)
            cols.append(F[:, k])
            vals.append(g[:, c])
    G = sparse.csr_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(3 * m, mesh.n_vertices))
    mesh.extras["_grad"] = (mesh.vertices, G)
    return G


def face_gradient(mesh: Mesh, field) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    G = face_gradient_matrix(mesh)
    if field.ndim == 1:
        return (G @ field).reshape(-1, 3)
    flat = field.reshape(len(field), -1)
    out = (G @ flat).reshape(mesh.n_faces, 3, -1)
    return out.reshape((mesh.n_faces, 3) + field.shape[1:])


def face_to_vertex(mesh: Mesh, values) -> np.ndarray:
    """Area-weighted average over incident faces."""
    values = np.asarray(values, dtype=float)
    F = mesh.faces
    w = mesh.face_area
    flat = values.reshape(len(values), -1) * w[:, None]
    out = np.zeros((mesh.n_vertices, flat.shape[1]))
    wsum = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(out, F[:, k], flat)
        np.add.at(wsum, F[:, k], w)
    wsum[wsum == 0] = 1.0
    out /= wsum[:, None]
    return out.reshape((mesh.n_vertices,) + values.shape[1:])


def tangent_projectors(normals: np.ndarray) -> np.ndarray:
    return np.eye(3)[None] - normals[:, :, None] * normals[:, None, :]


def gradient_field(mesh: Mesh, field) -> dict:
    """P1 gradient per face, |grad|^2 per vertex, and d/d(eta) on the boundary."""
    field = _require_scalar(field)
    g = face_gradient(mesh, field)
    norm2 = face_to_vertex(mesh, np.einsum("ij,ij->i", g, g))
    gv = face_to_vertex(mesh, g)
    nv = mesh.vertex_normals
    gv = gv - np.einsum("ij,ij->i", gv, nv)[:, None] * nv
    b = mesh.boundary_vertices
    d_eta = np.einsum("ij,ij->i", gv[b], mesh.conormal) if len(b) else np.zeros(0)
    return {"face": g, "norm2": norm2, "vertex": gv, "d_eta": d_eta}


# ------------------------------------------------------------ shape operator

def ring_neighbours(mesh: Mesh, rings: int) -> list:
    A = mesh.topology.adjacency
    R = A.copy()
    P = A.copy()
    for _ in range(rings - 1):
        P = P @ A
        R = R + P
    R = R.tocsr()
    R.setdiag(0)
    R.eliminate_zeros()
    return [R.indices[R.indptr[i]:R.indptr[i + 1]] for i in range(mesh.n_vertices)]


def ring_symmetry_defect(mesh: Mesh) -> np.ndarray:
    """How far each interior one-ring is from a symmetric star.

    With the k edge vectors in angular order as complex tangent coordinates
    z_i, two symmetries make the cotan Laplacian consistent: central
    symmetry (k even, z_i + z_(i+k/2) = 0) and a regular k-gon
    (z_i = c w^i, w = exp(2 pi i / k)). The defect is the smaller of the two
    residuals relative to mean |z_i|. Boundary vertices get nan.
    """
    out = np.full(mesh.n_vertices, np.nan)
    inner = np.flatnonzero(~mesh.boundary_mask)
    A = mesh.topology.adjacency.tocsr()
    val = np.diff(A.indptr)
    for k in np.unique(val[inner]):
        if k < 3:
            continue
        idx = inner[val[inner] == k]
        nb = np.stack([A.indices[A.indptr[i]:A.indptr[i] + k] for i in idx])
        d = mesh.vertices[nb] - mesh.vertices[idx][:, None, :]
        nu = mesh.vertex_normals[idx]
        e1 = d[:, 0] - np.einsum("ij,ij->i", d[:, 0], nu)[:, None] * nu
        e1 /= np.linalg.norm(e1, axis=1)[:, None]
        e2 = np.cross(nu, e1)
        z = np.einsum("ikj,ij->ik", d, e1) + 1j * np.einsum("ikj,ij->ik", d, e2)
        z = np.take_along_axis(z, np.argsort(np.angle(z), axis=1), axis=1)
        scale = np.abs(z).mean(axis=1)
        w = np.exp(2j * np.pi * np.arange(k) / k)
        c = (z / w).mean(axis=1)
        defect = np.abs(z - c[:, None] * w).max(axis=1) / scale
        if k % 2 == 0:
            h = k // 2
            central = np.abs(z[:, :h] + z[:, h:]).max(axis=1) / scale
            defect = np.minimum(defect, central)
        out[idx] = defect
    return out


def resolve_h_source(mesh: Mesh, h_source: str | None = None) -> str:
    h_source = H_SOURCE if h_source is None else h_source
    if h_source not in H_SOURCES:
        raise ValueError(f"h_source must be one of {H_SOURCES}")
    if h_source != "auto":
        return h_source
    cached = mesh.extras.get("_h_source")
    if cached is not None and cached[0] is mesh.vertices:
        return cached[1]
    d = ring_symmetry_defect(mesh)
    d = d[~mesh.boundary_mask]
    out = "cotan" if len(d) and np.all(d <= SYMMETRY_TOL) else "fit"
    mesh.extras["_h_source"] = (mesh.vertices, out)
    return out


def _padded(neigh: list, idx: np.ndarray):
    k = max((len(neigh[i]) for i in idx), default=0)
    out = np.zeros((len(idx), k), dtype=np.int64)
    mask = np.zeros((len(idx), k), dtype=bool)
    for r, i in enumerate(idx):
        nb = neigh[i]
        out[r, :len(nb)] = nb
        mask[r, :len(nb)] = True
    return out, mask


def _monomials(x, y, degree):
    cols = []
    for d in range(1, degree + 1):
        for j in range(d + 1):
            cols.append(x ** (d - j) * y ** j)
    return np.stack(cols, axis=-1)


def fit_shape_tensor(mesh: Mesh, idx: np.ndarray, rings: int,
                     degree: int = 3) -> np.ndarray:
    """Least-squares height-function fit around each vertex in ``idx``.

    Returns ambient 3x3 shape tensors projected onto the vertex tangent
    plane, sign chosen so that the outward-oriented sphere is positive.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) == 0:
        return np.zeros((0, 3, 3))
    V = mesh.vertices
    nu = mesh.vertex_normals[idx]
    nb, mask = _padded(ring_neighbours(mesh, rings), idx)
    d = V[nb] - V[idx][:, None, :]
    d[~mask] = 0.0

    first = d[:, 0, :]
    e1 = first - np.einsum("ij,ij->i", first, nu)[:, None] * nu
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(nu, e1)

    x = np.einsum("ikj,ij->ik", d, e1)
    y = np.einsum("ikj,ij->ik", d, e2)
    z = np.einsum("ikj,ij->ik", d, nu)
    h = np.sqrt(np.sum(x ** 2 + y ** 2, axis=1) / mask.sum(axis=1))[:, None]
    xs, ys, zs = x / h, y / h, z / h

    count = mask.sum(axis=1)
    need = {1: 2, 2: 5, 3: 9}
    deg = np.where(count >= need[degree] + 3, degree, 2)
    S = np.zeros((len(idx), 3, 3))
    for dg in np.unique(deg):
        sel = deg == dg
        X = _monomials(xs[sel], ys[sel], int(dg)) * mask[sel][..., None]
        w = mask[sel].astype(float)
        XtX = np.einsum("nki,nkj->nij", X, X)
        Xtz = np.einsum("nki,nk->ni", X, zs[sel] * w)
        c = np.linalg.solve(XtX, Xtz[..., None])[..., 0]
        hh = h[sel, 0]
        gx, gy = c[:, 0], c[:, 1]
        hxx = 2 * c[:, 2] / hh
        hxy = c[:, 3] / hh
        hyy = 2 * c[:, 4] / hh
        W = np.sqrt(1 + gx ** 2 + gy ** 2)
        II = -np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
        II /= W[:, None, None]
        n_ = nu[sel]
        J = np.stack([e1[sel] + gx[:, None] * n_, e2[sel] + gy[:, None] * n_], -1)
        Gi = np.linalg.inv(np.einsum("nai,naj->nij", J, J))
        Jp = np.einsum("nai,nij->naj", J, Gi)
        S[sel] = np.einsum("nai,nij,nbj->nab", Jp, II, Jp)
    P = tangent_projectors(nu)
    S = P @ S @ P
    return 0.5 * (S + np.swapaxes(S, 1, 2))


def discrete_curvature(mesh: Mesh, h_source: str | None = None) -> CurvatureField:
    """Curvature fields per vertex; ``h_source`` overrides H_SOURCE."""
    if not mesh.has_metric:
        raise MeshError("compute_metric must run before curvature")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.faces.ravel()] = True
    if not used.all():
        v = int(np.flatnonzero(~used)[0])
        raise MeshError(f"isolated vertex {v}")
    h_source = resolve_h_source(mesh, h_source)
    cached = mesh.extras.get("_curv")
    if cached is not None and cached[0] is mesh.vertices and cached[2] == h_source:
        return cached[1]

    nu = mesh.vertex_normals
    bmask = mesh.boundary_mask
    H = -np.einsum("ij,ij->i", mean_curvature_vector(mesh), nu)

    S = np.zeros((mesh.n_vertices, 3, 3))
    inner = np.flatnonzero(~bmask)
    outer = np.flatnonzero(bmask)
    S[inner] = fit_shape_tensor(mesh, inner, FIT_RING)
    S[outer] = fit_shape_tensor(mesh, outer, BOUNDARY_FIT_RING)

    P = tangent_projectors(nu)
    trace = np.trace(S, axis1=1, axis2=2)
    H = np.where(bmask | (h_source == "fit"), trace, H)
    S = S + (0.5 * (H - trace))[:, None, None] * P
    A0 = S - 0.5 * H[:, None, None] * P
    A_norm2 = np.einsum("nij,nij->n", S, S)
    A0_norm2 = np.einsum("nij,nij->n", A0, A0)
    split = np.sqrt(np.maximum(A0_norm2, 0.0) / 2.0)
    field = CurvatureField(H=H, kappa1=0.5 * H + split, kappa2=0.5 * H - split,
                           A=S, A0=A0, A_norm2=A_norm2, A0_norm2=A0_norm2)
    mesh.extras["_curv"] = (mesh.vertices, field, h_source)
    return field


# ------------------------------------------------------------ EL operator

def el_residual(mesh: Mesh, curv: CurvatureField | None = None) -> DerivedField:
    """I[f] = bilap H + |A|^2 lap H - (A0)^ij grad_i H grad_j H per vertex."""
    cached = mesh.extras.get("_derived")
    if curv is None and cached is not None and cached[0] is mesh.vertices \
            and cached[2] == resolve_h_source(mesh):
        return cached[1]
    fresh = curv is None
    curv = discrete_curvature(mesh) if curv is None else curv
    H = curv.H
    grad = gradient_field(mesh, H)
    lapH = laplace_beltrami(mesh, H)
    bilapH = laplace_beltrami(mesh, lapH)
    g = grad["vertex"]
    contraction = np.einsum("ni,nij,nj->n", g, curv.A0, g)
    I = bilapH + curv.A_norm2 * lapH - contraction
    interior = ~mesh.boundary_mask
    bnd = _boundary_report(mesh, curv, grad, lapH)
    out = DerivedField(gradH=grad["face"], gradH_norm2=grad["norm2"],
                       gradH_vertex=g, lapH=lapH, bilapH=bilapH,
                       contraction=contraction, el_residual=I,
                       weak_residual=H * I, interior=interior, boundary=bnd)
    if fresh:
        mesh.extras["_derived"] = (mesh.vertices, out, resolve_h_source(mesh))
    return out


def _boundary_report(mesh, curv, grad, lapH) -> BoundaryReport:
    b = mesh.boundary_vertices
    if len(b) == 0:
        z = np.zeros(0)
        return BoundaryReport(b, z, z, z, [])
    dlap = gradient_field(mesh, lapH)["d_eta"]
    A_norm = np.sqrt(curv.A_norm2[b])
    pos = {int(v): i for i, v in enumerate(b)}
    loop_max = []
    for loop in mesh.boundary_loops:
        sel = [pos[int(v)] for v in loop]
        loop_max.append((float(A_norm[sel].max()),
                         float(np.abs(grad["d_eta"][sel]).max()),
                         float(np.abs(dlap[sel]).max())))
    return BoundaryReport(b, A_norm, grad["d_eta"], dlap, loop_max)


def boundary_residuals(mesh: Mesh) -> BoundaryReport:
    """Flat boundary condition residuals (|A|, d_eta H, d_eta lap H)."""
    return el_residual(mesh).boundary


# ------------------------------------------------------------ Codazzi check

def _projected_tensor_gradient(mesh: Mesh, T: np.ndarray) -> np.ndarray:
    """Per-face squared norm of the tangentially projected gradient of T."""
    n = mesh.n_vertices
    X = face_gradient(mesh, T.reshape(n, 9)).reshape(mesh.n_faces, 3, 3, 3)
    P = tangent_projectors(mesh.face_normals)
    Y = np.einsum("fab,fkbc,fcd->fkad", P, X, P)
    return np.einsum("fkad,fkad->f", Y, Y)


def codazzi_quantities(mesh: Mesh) -> dict:
    """Per-vertex |grad H|, |grad A|, |grad A0| (first-derivative level only)."""
    curv = discrete_curvature(mesh)
    gH = face_gradient(mesh, curv.H)
    gH2 = face_to_vertex(mesh, np.einsum("ij,ij->i", gH, gH))
    gA2 = face_to_vertex(mesh, _projected_tensor_gradient(mesh, curv.A))
    gA02 = face_to_vertex(mesh, _projected_tensor_gradient(mesh, curv.A0))
    return {"gradH": np.sqrt(gH2), "gradA": np.sqrt(gA2), "gradA0": np.sqrt(gA02)}


# ------------------------------------------------------------ export

def field_to_csv(values, path) -> None:
    values = np.asarray(values, dtype=float)
    lines = ["vertex,value"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(values)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
