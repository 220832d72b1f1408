"""L2 gradient flow of F with a clamped boundary collar.

Descent velocity is -I[f] along the outward mesh normal (the variation
formula gives dF = 2 int I <phi, nu_mesh>, so phi = -I nu_mesh is the
steepest descent direction). Near a plane the leading part of that velocity
is L^3 applied to the height, L the Laplace-Beltrami operator, so the
semi-implicit stepper solves

    (M - dt K M^-1 K M^-1 K) delta = dt M V

with K the cotan matrix and M the lumped mass: backward Euler on the
sixth-order linear part, forward Euler on the remainder. The boundary and
the next ``collar_rings`` rings of vertices are held fixed. The matrix is
symmetric positive definite and a planar mesh (V = 0) stays fixed exactly.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .curvature import boundary_residuals, discrete_curvature, el_residual
from .energy import collar_mask, energy
from .mesh import Mesh, MeshError, save_obj

STEPPERS = ("semi-implicit", "explicit")


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    dt: float | str = "auto"
    max_steps: int = 5000
    stop_F: float = 1e-10
    stop_A0: float = 1e-3
    boundary_mode: str = "clamp-collar"
    stepper: str = "semi-implicit"
    snapshot_every: int = 0
    bc_tol: float = 1e-6
    max_halvings: int = 8
    collar_rings: int = 2

    def __post_init__(self):
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError("dt must be positive or 'auto'")
        if not (self.stop_F > 0 and self.stop_A0 > 0):
            raise ValueError("stopping thresholds must be positive")
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}")
        if self.boundary_mode != "clamp-collar":
            raise ValueError("only the clamp-collar boundary mode is supported")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.collar_rings < 0:
            raise ValueError("collar_rings must be non-negative")


@dataclass
class FlowState:
    mesh: Mesh
    step: int = 0
    time: float = 0.0
    F_history: list = field(default_factory=list)
    A0sup_history: list = field(default_factory=list)
    smallness_history: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)

    @classmethod
    def start(cls, mesh: Mesh) -> "FlowState":
        st = cls(mesh)
        st._record()
        return st

    def _record(self) -> None:
        e = energy(self.mesh)
        self.F_history.append(e.F)
        self.smallness_history.append(e.A2)
        self.A0sup_history.append(interior_sup_A0(self.mesh))


@dataclass(frozen=True)
class FlowResult:
    state: FlowState
    verdict: str  # planar | not-converged | diverged
    reason: str
    diverged_step: int | None = None
    boundary: dict | None = None

    @property
    def monotone_fraction(self) -> float:
        F = np.asarray(self.state.F_history)
        if len(F) < 2:
            return 1.0
        return float(np.mean(np.diff(F) <= 0))


@dataclass(frozen=True)
class PlanarityVerdict:
    sup_A0: float
    plane_distance: float
    planar: bool


def interior_sup_A0(mesh: Mesh) -> float:
    curv = discrete_curvature(mesh)
    a0 = np.sqrt(curv.A0_norm2[~mesh.boundary_mask])
    return float(a0.max()) if len(a0) else 0.0


def planarity_test(mesh: Mesh, tol: float = 1e-3) -> PlanarityVerdict:
    """Two prongs: umbilicity (sup |A0|) and distance to the best-fit plane.

    The sphere passes the first and fails the second.
    """
    sup = interior_sup_A0(mesh)
    X = mesh.vertices - mesh.vertices.mean(axis=0)
    normal = np.linalg.svd(X, full_matrices=False)[2][-1]
    dist = float(np.abs(X @ normal).max() / mesh.diameter())
    return PlanarityVerdict(sup, dist, bool(sup <= tol and dist <= tol))


def descent_velocity(mesh: Mesh) -> np.ndarray:
    I = el_residual(mesh).el_residual
    return -I[:, None] * mesh.vertex_normals


def free_vertices(mesh: Mesh, collar_rings: int = 2) -> np.ndarray:
    """Vertices the flow may move: everything outside the clamped collar.

    With two rings clamped, every H value that reaches a free vertex's
    velocity is an interior cotan value, so the linearisation about a plane
    is a principal block of (M^-1 K)^3 and hence stable. One ring lets the
    boundary H estimate leak in and admits a growing mode.
    """
    if not len(mesh.boundary_vertices):
        return np.arange(mesh.n_vertices)
    return np.flatnonzero(~collar_mask(mesh, collar_rings))


def mean_edge_length(mesh: Mesh) -> float:
    e = mesh.topology.edges
    return float(np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]],
                                axis=1).mean())


def auto_dt(mesh: Mesh, stepper: str) -> float:
    """Default step: a fraction of the slowest sixth-order time scale for the
    semi-implicit stepper, a stable fraction of h^6 for the explicit one."""
    if stepper == "explicit":
        return 1e-3 * mean_edge_length(mesh) ** 6
    R = 0.5 * mesh.diameter()
    return 1e-4 * R ** 6


def _implicit_matrix(mesh: Mesh, free: np.ndarray, dt: float):
    K = mesh.cotan
    Minv = sparse.diags(1.0 / mesh.vertex_area)
    B = (K @ Minv @ K @ Minv @ K).tocsr()
    Aff = (sparse.diags(mesh.vertex_area) - dt * B)[free][:, free]
    return splu(Aff.tocsc())


def _inverted(before: Mesh, after: Mesh) -> bool:
    dots = np.einsum("ij,ij->i", before.face_normals, after.face_normals)
    return bool(np.any(dots <= 0))


def flow_step(state: FlowState, config: FlowConfig, dt: float | None = None) -> FlowState:
    """One step; returns a new state. Raises FlowError on face inversion."""
    mesh = state.mesh
    if dt is None:
        dt = auto_dt(mesh, config.stepper) if config.dt == "auto" else float(config.dt)
    free = free_vertices(mesh, config.collar_rings)
    V = descent_velocity(mesh)
    if not np.isfinite(V).all():
        raise FlowError("non-finite velocity")
    delta = np.zeros_like(mesh.vertices)
    if config.stepper == "explicit":
        delta[free] = dt * V[free]
    elif np.any(V[free]):
        try:
            lu = _implicit_matrix(mesh, free, dt)
        except RuntimeError as exc:
            raise FlowError(f"sparse solve failed: {exc}") from exc
        rhs = dt * mesh.vertex_area[free, None] * V[free]
        delta[free] = lu.solve(rhs)
        if not np.isfinite(delta).all():
            raise FlowError("sparse solve produced non-finite values")
    new_vertices = mesh.vertices + delta
    try:
        moved = mesh.with_vertices(new_vertices)
    except MeshError as exc:
        raise FlowError(f"step degenerated the mesh ({exc}); use a smaller dt") from exc
    if _inverted(mesh, moved):
        raise FlowError(f"face inversion at dt={dt:g}; use a smaller dt")
    out = replace(state, mesh=moved, step=state.step + 1, time=state.time + dt,
                  F_history=list(state.F_history),
                  A0sup_history=list(state.A0sup_history),
                  smallness_history=list(state.smallness_history),
                  dt_history=list(state.dt_history) + [dt])
    out._record()
    return out


def _converged(state: FlowState, config: FlowConfig) -> bool:
    return state.F_history[-1] <= config.stop_F and \
        state.A0sup_history[-1] <= config.stop_A0


def run_flow(mesh: Mesh, config: FlowConfig = FlowConfig(),
             snapshot_dir: str | None = None, history_csv: str | None = None,
             callback=None) -> FlowResult:
    """Flow until both stopping thresholds hold, max_steps, or failure."""
    bnd = boundary_residuals(mesh)
    diag = None
    if not bnd.empty:
        a, dh, dl = bnd.max()
        diag = {"max_A": a, "max_dH_deta": dh, "max_dlapH_deta": dl}
    state = FlowState.start(mesh)
    if diag is not None and max(diag.values()) > config.bc_tol:
        result = FlowResult(state, "not-converged",
                            "flat boundary conditions violated by the input",
                            boundary=diag)
        _write_history(result.state, history_csv)
        return result

    dt = auto_dt(mesh, config.stepper) if config.dt == "auto" else float(config.dt)
    _snapshot(state, snapshot_dir, config, force=True)
    verdict, reason, bad_step = "not-converged", "max_steps reached", None
    while True:
        if not all(math.isfinite(x) for x in (state.F_history[-1],
                                               state.A0sup_history[-1])):
            verdict, reason, bad_step = "diverged", "non-finite field", state.step
            break
        if _converged(state, config):
            verdict, reason = "planar", "stopping thresholds met"
            break
        if state.step >= config.max_steps:
            break
        if state.F_history[-1] > 1e8 * max(state.F_history[0], 1e-300):
            verdict, reason, bad_step = "diverged", "energy blow-up", state.step
            break
        for _ in range(config.max_halvings + 1):
            try:
                state = flow_step(state, config, dt)
                break
            except FlowError:
                dt *= 0.5
        else:
            verdict, reason, bad_step = ("diverged", "step failed after dt halving",
                                         state.step)
            break
        _snapshot(state, snapshot_dir, config)
        if callback is not None:
            callback(state)
    _snapshot(state, snapshot_dir, config, force=True)
    _write_history(state, history_csv)
    return FlowResult(state, verdict, reason, bad_step, diag)


def _snapshot(state: FlowState, directory, config: FlowConfig, force=False):
    if directory is None:
        return
    every = config.snapshot_every
    if force or (every > 0 and state.step % every == 0):
        os.makedirs(directory, exist_ok=True)
        save_obj(state.mesh, os.path.join(directory, f"step_{state.step:06d}.obj"))


def _write_history(state: FlowState, path) -> None:
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "F", "A2", "supA0"])
        for i, (F, A2, a0) in enumerate(zip(state.F_history, state.smallness_history,
                                            state.A0sup_history)):
            w.writerow([i, f"{F:.17g}", f"{A2:.17g}", f"{a0:.17g}"])
