"""The energy F = int |grad H|^2, curvature integrals, and its first variation.

The variation formula is stated for the normal convention in which the mean
curvature vector is +H times the normal. Meshes here carry the outward
normal (sphere H > 0), which is the opposite orientation, so the scalar
normal part entering the formula is phi_n = -<phi, nu_mesh>. H itself is
the same number in both conventions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import (discrete_curvature, el_residual, face_gradient,
                        gradient_field, laplace_beltrami)
from .generators import bump
from .mesh import Mesh, MeshError


@dataclass(frozen=True)
class EnergyReport:
    F: float
    A2: float
    A02: float
    area: float
    per_face: np.ndarray = field(repr=False, compare=False)

    def to_dict(self, per_face: bool = False) -> dict:
        out = {"F": self.F, "A2": self.A2, "A02": self.A02, "area": self.area}
        if per_face:
            out["per_face"] = self.per_face.tolist()
        return out


@dataclass(frozen=True, eq=False)
class VariationProbe:
    phi: np.ndarray  # (n, 3)
    epsilon: float
    compact: bool = False  # zero on the boundary and its one-ring

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[1] != 3:
            raise ValueError("probe phi must be an (n, 3) array")
        if not np.isfinite(phi).all():
            raise ValueError("probe phi must be finite")
        if not self.epsilon > 0:
            raise ValueError("probe epsilon must be positive")
        object.__setattr__(self, "phi", phi)

    def normal_part(self, mesh: Mesh) -> np.ndarray:
        return np.einsum("ij,ij->i", self.phi, mesh.vertex_normals)

    def scaled(self, a: float) -> "VariationProbe":
        return VariationProbe(a * self.phi, self.epsilon, self.compact)

    def __add__(self, other: "VariationProbe") -> "VariationProbe":
        return VariationProbe(self.phi + other.phi, self.epsilon,
                              self.compact and other.compact)


def energy(mesh: Mesh) -> EnergyReport:
    curv = discrete_curvature(mesh)
    g = face_gradient(mesh, curv.H)
    per_face = np.einsum("ij,ij->i", g, g) * mesh.face_area
    w = mesh.vertex_area
    return EnergyReport(F=float(per_face.sum()),
                        A2=float(w @ curv.A_norm2),
                        A02=float(w @ curv.A0_norm2),
                        area=float(mesh.face_area.sum()),
                        per_face=per_face)


def default_epsilon(mesh: Mesh) -> float:
    return 1e-4 * mesh.diameter()


def collar_mask(mesh: Mesh, rings: int) -> np.ndarray:
    """Boundary vertices plus ``rings`` rings of neighbours."""
    mask = mesh.boundary_mask.copy()
    adj = mesh.topology.adjacency
    for _ in range(rings):
        mask = mask | (adj @ mask.astype(float) > 0)
    return mask


def bump_probe(mesh: Mesh, center, radius: float, amplitude: float = 1.0,
               epsilon: float | None = None) -> VariationProbe:
    """Normal probe amplitude * bump(|x - center| / radius) * nu.

    Values on the boundary collar are zeroed; the probe reports itself as
    compactly supported only when that removed nothing.
    """
    r = np.linalg.norm(mesh.vertices - np.asarray(center, float), axis=1) / radius
    s = amplitude * bump(r)
    collar = collar_mask(mesh, 1)
    compact = not np.any(s[collar] != 0)
    s[collar] = 0.0
    eps = default_epsilon(mesh) if epsilon is None else epsilon
    return VariationProbe(s[:, None] * mesh.vertex_normals, eps, compact)


def random_probes(mesh: Mesh, count: int, seed: int = 0,
                  radius=(0.3, 0.5), clearance: float = 0.15) -> list:
    """Seeded bump probes whose support stays ``clearance`` inside the boundary.

    Radii are fractions of the mesh diameter's half-width scale (the largest
    bounding-box half extent); centres are drawn among vertices far enough
    from the boundary.
    """
    rng = np.random.default_rng(seed)
    V = mesh.vertices
    half = 0.5 * np.ptp(V, axis=0).max()
    bpts = V[mesh.boundary_vertices]
    if len(bpts):
        dist = np.min(np.linalg.norm(V[:, None, :] - bpts[None, :, :], axis=2), axis=1)
    else:
        dist = np.full(len(V), np.inf)
    probes = []
    for _ in range(count):
        rad = rng.uniform(*radius) * half
        ok = np.flatnonzero(dist >= rad + clearance * half)
        if len(ok) == 0:
            raise ValueError("mesh too small for the requested probe radius")
        c = V[rng.choice(ok)]
        probes.append(bump_probe(mesh, c, rad))
    return probes


def _boundary_weights(mesh: Mesh) -> np.ndarray:
    """Half the sum of adjacent boundary edge lengths, per boundary vertex."""
    b = mesh.boundary_vertices
    pos = {int(v): i for i, v in enumerate(b)}
    w = np.zeros(len(b))
    V = mesh.vertices
    for loop in mesh.boundary_loops:
        loop = np.asarray(loop)
        nxt = np.roll(loop, -1)
        L = np.linalg.norm(V[nxt] - V[loop], axis=1)
        for a, c, l in zip(loop, nxt, L):
            w[pos[int(a)]] += 0.5 * l
            w[pos[int(c)]] += 0.5 * l
    return w


def first_variation(mesh: Mesh, probe: VariationProbe) -> dict:
    """Discrete first variation of F: interior and boundary parts and their sum."""
    if len(probe.phi) != mesh.n_vertices:
        raise ValueError(f"probe has {len(probe.phi)} rows, mesh has "
                         f"{mesh.n_vertices} vertices")
    curv = discrete_curvature(mesh)
    der = el_residual(mesh)
    phi = -probe.normal_part(mesh)
    inner = ~mesh.boundary_mask
    w = mesh.vertex_area
    interior = float(-2.0 * np.sum((der.el_residual * phi * w)[inner]))

    boundary = 0.0
    b = mesh.boundary_vertices
    if len(b) and np.any(phi != 0):
        lap_phi = laplace_beltrami(mesh, phi)[b]
        dphi = gradient_field(mesh, phi)["d_eta"]
        dH = der.boundary.dH_deta
        dlapH = der.boundary.dlapH_deta
        integrand = ((lap_phi + curv.A_norm2[b] * phi[b]) * dH
                     + dlapH * phi[b] - der.lapH[b] * dphi)
        boundary = float(2.0 * np.sum(integrand * _boundary_weights(mesh)))
    return {"interior": interior, "boundary": boundary,
            "dF": interior + boundary}


def _energy_at(mesh: Mesh, vertices: np.ndarray, eps: float) -> float:
    try:
        moved = mesh.with_vertices(vertices)
    except MeshError as exc:
        raise MeshError(f"displacement degenerated the mesh ({exc}); "
                        f"try an epsilon smaller than {eps:g}") from exc
    return energy(moved).F


def finite_difference_variation(mesh: Mesh, probe: VariationProbe,
                                epsilon: float | None = None) -> float:
    """Central difference (F[f + eps phi] - F[f - eps phi]) / (2 eps)."""
    eps = probe.epsilon if epsilon is None else epsilon
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    if not np.any(probe.phi):
        return 0.0
    fp = _energy_at(mesh, mesh.vertices + eps * probe.phi, eps)
    fm = _energy_at(mesh, mesh.vertices - eps * probe.phi, eps)
    return (fp - fm) / (2 * eps)


def epsilon_sweep(mesh: Mesh, probe: VariationProbe,
                  factors=(1.0, 0.5, 0.25)) -> dict:
    """Finite differences at eps * factors; reports the max relative spread."""
    vals = [finite_difference_variation(mesh, probe, probe.epsilon * f)
            for f in factors]
    ref = max(abs(v) for v in vals)
    spread = (max(vals) - min(vals)) / ref if ref > 0 else 0.0
    return {"epsilons": [probe.epsilon * f for f in factors], "values": vals,
            "relative_spread": spread}
