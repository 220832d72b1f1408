"""Numerical audit of the analytic estimates: cutoffs, the Michael-Simon
Sobolev inequality, the integral identity for int (lap H)^2 gamma^p, and the
chain of integral inequalities leading to the smallness estimate.

Volume integrals use vertex-area quadrature for pointwise products of vertex
fields and face-area quadrature (face mean of the vertex coefficient times
face gradients) wherever a gradient appears. Boundary integrals are
trapezoidal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import (codazzi_quantities, discrete_curvature, el_residual,
                        face_gradient, face_to_vertex, laplace_beltrami,
                        tangent_projectors)
from .energy import _boundary_weights
from .mesh import Mesh

# max |d/ds| of the quintic smoothstep profile on [1/2, 1]: 30/16 * 2
PROFILE_SLOPE = 3.75

SOBOLEV_CONSTANT = 32 * math.sqrt(3) / math.sqrt(math.pi)
SOBOLEV_CONSTANT_GENERIC = (4 ** 3 / math.sqrt(math.pi)) ** 2  # m = 2, squared form


def profile(s):
    """1 on [0, 1/2], 0 on [1, inf), quintic smoothstep between (C^2)."""
    s = np.asarray(s, dtype=float)
    t = np.clip(2 * s - 1, 0.0, 1.0)
    return 1.0 - t ** 3 * (10 - 15 * t + 6 * t ** 2)


@dataclass(frozen=True, eq=False)
class CutoffFunction:
    center: np.ndarray
    rho: float
    p: float
    values: np.ndarray
    c_gamma: float
    grad_max: float  # measured max per-face |grad gamma|
    hessian_ratio: float  # measured max |hess gamma| / (c_gamma (c_gamma + |A|))

    def power(self, q: float) -> np.ndarray:
        """gamma^q on the support [gamma > 0], zero elsewhere (also for q <= 0)."""
        out = np.zeros_like(self.values)
        pos = self.values > 0
        out[pos] = self.values[pos] ** q
        return out


def make_cutoff(mesh: Mesh, center=(0.0, 0.0, 0.0), rho: float = math.inf,
                p: float = 4.0) -> CutoffFunction:
    if not rho > 0:
        raise ValueError("rho must be positive")
    center = np.asarray(center, dtype=float)
    if math.isinf(rho):
        return CutoffFunction(center, rho, p, np.ones(mesh.n_vertices), 0.0, 0.0, 0.0)
    r = np.linalg.norm(mesh.vertices - center, axis=1)
    gamma = profile(r / rho)
    c_gamma = PROFILE_SLOPE / rho
    g = face_gradient(mesh, gamma)
    gmax = float(np.linalg.norm(g, axis=1).max()) if mesh.n_faces else 0.0
    # second derivative: face gradient of the vertex-averaged gradient
    gv = face_to_vertex(mesh, g)
    hess = face_gradient(mesh, gv)
    hn = np.linalg.norm(hess.reshape(mesh.n_faces, -1), axis=1)
    A = np.sqrt(discrete_curvature(mesh).A_norm2)
    A_face = A[mesh.faces].mean(axis=1)
    ratio = float(np.max(hn / (c_gamma * (c_gamma + A_face))))
    return CutoffFunction(center, float(rho), p, gamma, c_gamma, gmax, ratio)


@dataclass
class AuditRecord:
    lemma: str
    quantities: dict = field(default_factory=dict)  # symbol -> value
    identity_residual: float | None = None
    min_constant: float | None = None
    resolution: int | None = None
    smallness: float | None = None

    def to_dict(self) -> dict:
        out = {"lemma": self.lemma, "quantities": dict(self.quantities),
               "resolution": self.resolution}
        if self.identity_residual is not None:
            out["identity_residual"] = self.identity_residual
        if self.min_constant is not None:
            out["min_constant"] = self.min_constant
        if self.smallness is not None:
            out["smallness"] = self.smallness
        return out


# ------------------------------------------------------------ Sobolev

def ms_sobolev_check(mesh: Mesh, u, constant: float = SOBOLEV_CONSTANT) -> dict:
    """int u^2 <= c [int (|grad u| + |H||u|) + int_bdry |u|]^2, as a ratio."""
    u = np.abs(np.asarray(u, dtype=float))
    if u.shape != (mesh.n_vertices,):
        raise ValueError("u must have one value per vertex")
    H = discrete_curvature(mesh).H
    w = mesh.vertex_area
    lhs = float(w @ u ** 2)
    grad = np.linalg.norm(face_gradient(mesh, u), axis=1) @ mesh.face_area
    curv = float(w @ (np.abs(H) * u))
    bnd = 0.0
    if len(mesh.boundary_vertices):
        bnd = float(_boundary_weights(mesh) @ u[mesh.boundary_vertices])
    inner = float(grad) + curv + bnd
    rhs = constant * inner ** 2
    ratio = 0.0 if lhs == 0 else (math.inf if rhs == 0 else lhs / rhs)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio, "violated": ratio > 1,
            "constant": constant, "gradient_term": float(grad),
            "curvature_term": curv, "boundary_term": bnd,
            "ratio_generic_constant": 0.0 if lhs == 0 else
            (math.inf if inner == 0 else lhs / (SOBOLEV_CONSTANT_GENERIC * inner ** 2))}


# ------------------------------------------------------------ identity

def _face_mean(mesh: Mesh, values) -> np.ndarray:
    return np.asarray(values)[mesh.faces].mean(axis=1)


def _terms(mesh: Mesh, gamma: CutoffFunction) -> dict:
    curv = discrete_curvature(mesh)
    der = el_residual(mesh)
    H, a, lapH = curv.H, curv.A_norm2, der.lapH
    p = gamma.p
    gp = gamma.power(p)
    gp1 = gamma.power(p - 1)
    w = mesh.vertex_area
    area = mesh.face_area
    gH = der.gradH
    ga = face_gradient(mesh, a)
    glap = face_gradient(mesh, lapH)
    ggam = face_gradient(mesh, gamma.values)

    def fsum(coef, X, Y):
        return float(area @ (_face_mean(mesh, coef) * np.einsum("ij,ij->i", X, Y)))

    p_term = p * (fsum(H * gp1, glap, ggam) + fsum((H * a - lapH) * gp1, gH, ggam))
    return {
        "int (lap H)^2 g^p": float(w @ (lapH ** 2 * gp)),
        "int I H g^p": float(w @ (der.el_residual * H * gp)),
        "int |A|^2 |grad H|^2 g^p": fsum(a * gp, gH, gH),
        "int H grad H . grad |A|^2 g^p": fsum(H * gp, gH, ga),
        "int H A0(grad H, grad H) g^p": float(w @ (H * der.contraction * gp)),
        "p int [H grad lap H + (H|A|^2 - lap H) grad H] . grad g g^(p-1)": p_term,
    }


def weighted_identity(mesh: Mesh, gamma: CutoffFunction,
                      resolution: int | None = None) -> AuditRecord:
    q = _terms(mesh, gamma)
    keys = list(q)
    lhs = q[keys[0]]
    rhs = sum(q[k] for k in keys[1:])
    res = abs(lhs - rhs) / max(abs(lhs), 1e-30)
    if lhs == 0 and rhs == 0:
        res = 0.0
    return AuditRecord("weighted-identity", q, identity_residual=res,
                       resolution=_resolution(mesh, resolution))


# ------------------------------------------------------------ inequality chain

def _resolution(mesh, resolution):
    if resolution is not None:
        return int(resolution)
    return int(mesh.extras.get("resolution", mesh.n_vertices))


def _min_constant(lhs: float, scaled: list, fixed: float = 0.0) -> float:
    """Smallest c with lhs <= c * sum(scaled) + fixed."""
    need = lhs - fixed
    if need <= 0:
        return 0.0
    s = sum(scaled)
    return need / s if s > 0 else math.inf


def tensor_laplacian_norm2(mesh: Mesh, T: np.ndarray) -> np.ndarray:
    """|lap T|^2 per vertex for an ambient tensor field, tangentially projected;
    the composed-Laplacian stand-in for |grad^2 T|^2."""
    n = mesh.n_vertices
    L = np.stack([laplace_beltrami(mesh, T.reshape(n, 9)[:, k]) for k in range(9)], 1)
    P = tangent_projectors(mesh.vertex_normals)
    L = P @ L.reshape(n, 3, 3) @ P
    return np.einsum("nij,nij->n", L, L)


def estimate_chain(mesh: Mesh, gamma: CutoffFunction,
                   resolution: int | None = None) -> list:
    """Records "hessian-H", "hessian-H-umbilic", "hessian-A" and "absorbed",
    each with its integrals and the smallest constant that makes the
    inequality hold on this mesh."""
    curv = discrete_curvature(mesh)
    terms = _terms(mesh, gamma)
    cod = codazzi_quantities(mesh)
    w = mesh.vertex_area
    p = gamma.p
    gp, gp2, gp4 = gamma.power(p), gamma.power(p - 2), gamma.power(p - 4)
    cg = gamma.c_gamma
    a, a0 = curv.A_norm2, curv.A0_norm2
    lapH2 = terms["int (lap H)^2 g^p"]
    IH = terms["int I H g^p"]
    P = terms["p int [H grad lap H + (H|A|^2 - lap H) grad H] . grad g g^(p-1)"]

    def integ(x, weight):
        return float(w @ (x * weight))

    A2gradA2 = integ(a * cod["gradA"] ** 2, gp)
    gradA02 = cg ** 2 * integ(cod["gradA0"] ** 2, gp2)
    A06 = integ(a0 ** 3, gp)
    A02_c4 = cg ** 4 * integ(a0, gp4)
    A2_c4 = cg ** 4 * integ(a, gp4)
    A4A02 = integ(a ** 2 * a0, gp)
    hessA2 = integ(tensor_laplacian_norm2(mesh, curv.A), gp)
    support = gamma.values > 0
    smallness = float(w[support] @ a[support])
    res = _resolution(mesh, resolution)

    names = {
        "IH": "int I H g^p", "A2gradA2": "int |A|^2 |grad A|^2 g^p",
        "gradA02": "c_g^2 int |grad A0|^2 g^(p-2)", "A06": "int |A0|^6 g^p",
        "A02c4": "c_g^4 int |A0|^2 g^(p-4)", "A2c4": "c_g^4 int |A|^2 g^(p-4)",
        "P": "p int [H grad lap H + (H|A|^2 - lap H) grad H] . grad g g^(p-1)",
    }
    vals = {"IH": IH, "A2gradA2": A2gradA2, "gradA02": gradA02, "A06": A06,
            "A02c4": A02_c4, "A2c4": A2_c4, "P": P}
    records = []

    lhs42 = lapH2
    q = {"int |grad^2 H|^2 g^p [proxy (lap H)^2]": lhs42}
    q.update({names[k]: vals[k] for k in ("IH", "A2gradA2", "gradA02", "P")})
    records.append(AuditRecord("hessian-H", q, min_constant=_min_constant(
        lhs42, [IH, A2gradA2, gradA02], P), resolution=res, smallness=smallness))

    lhs43 = lapH2 + A4A02
    rhs_keys = ("IH", "A2gradA2", "A06", "gradA02", "A02c4")
    q = {"int (|grad^2 H|^2 + |A|^4 |A0|^2) g^p": lhs43}
    q.update({names[k]: vals[k] for k in rhs_keys + ("P",)})
    records.append(AuditRecord("hessian-H-umbilic", q, min_constant=_min_constant(
        lhs43, [vals[k] for k in rhs_keys], P), resolution=res, smallness=smallness))

    lhs44 = hessA2 + A2gradA2 + A4A02
    q = {"int (|grad^2 A|^2 + |A|^2 |grad A|^2 + |A|^4 |A0|^2) g^p": lhs44,
         "int |grad^2 A|^2 g^p [proxy |lap A|^2]": hessA2}
    q.update({names[k]: vals[k] for k in rhs_keys + ("P",)})
    records.append(AuditRecord("hessian-A", q, min_constant=_min_constant(
        lhs44, [vals[k] for k in rhs_keys], P), resolution=res, smallness=smallness))

    q = {"int (|grad^2 A|^2 + |A|^2 |grad A|^2 + |A|^4 |A0|^2) g^p": lhs44,
         names["IH"]: IH, names["A2c4"]: A2_c4,
         "int_[g>0] |A|^2": smallness}
    records.append(AuditRecord("absorbed", q, min_constant=_min_constant(
        lhs44, [IH, A2_c4]), resolution=res, smallness=smallness))
    return records
