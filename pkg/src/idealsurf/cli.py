"""Command-line entry point: ``idealsurf <subcommand> [options]``.

Exit codes: 0 success, 1 verdict failure (flow not planar, variation or
Sobolev check failed), 2 input error with a one-line diagnostic on stderr.
Reports are JSON with a schema version and the full run configuration, and
floats written with 17 significant digits so identical runs give identical
bytes.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .analytic import ParametricSurface, chart_energy, exact_samples, sample_mesh
from .audit import estimate_chain, make_cutoff, ms_sobolev_check, weighted_identity
from .curvature import discrete_curvature, el_residual, resolve_h_source
from .energy import (energy, finite_difference_variation, first_variation,
                     random_probes)
from .flow import FlowConfig, planarity_test, run_flow
from .generators import disk_mesh, perturbed_disk
from .mesh import Mesh, MeshError, load_mesh, save_obj

SCHEMA = 1
SUBCOMMANDS = ("analyze", "variation-check", "flow", "audit", "sample", "convergence")
SURFACES = ("plane", "sphere", "cylinder", "cubic-graph", "paraboloid", "disk",
            "perturbed-disk")
CONVERGENCE_TARGETS = ("energy", "el", "H")


class InputError(Exception):
    """Bad flags, files or configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    surface: str | None = None
    r: float = 1.0
    resolution: int = 32
    out: str | None = None
    seed: int = 0
    # flow
    dt: str = "auto"
    max_steps: int = 5000
    tol_a0: float = 1e-3
    stop_f: float = 1e-10
    snapshot_every: int = 0
    # audit
    rho: float = math.inf
    p: float = 4.0
    center: tuple = (0.0, 0.0, 0.0)
    # variation-check
    probes: int = 10
    tol: float = 0.05
    # convergence
    target: str = "energy"
    resolutions: tuple = (32, 64, 128)
    amplitude: float = 0.01

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise InputError(f"unknown subcommand {self.subcommand!r}")
        if (self.input is None) == (self.surface is None):
            raise InputError("give exactly one of --input or --surface")
        if self.surface is not None and self.surface not in SURFACES:
            raise InputError(f"unknown surface {self.surface!r}; "
                             f"choose from {', '.join(SURFACES)}")
        if self.input is not None and not os.path.isfile(self.input):
            raise InputError(f"cannot read {self.input}")
        if self.resolution < 2 or any(n < 2 for n in self.resolutions):
            raise InputError("resolution must be at least 2")
        if not self.r > 0:
            raise InputError("--r must be positive")
        if not self.rho > 0:
            raise InputError("--rho must be positive")
        if self.dt != "auto":
            try:
                ok = float(self.dt) > 0
            except ValueError:
                ok = False
            if not ok:
                raise InputError("--dt must be a positive number or 'auto'")
        if self.target not in CONVERGENCE_TARGETS:
            raise InputError(f"--target must be one of {CONVERGENCE_TARGETS}")
        if self.probes < 1 or self.max_steps < 0 or self.snapshot_every < 0:
            raise InputError("counts must be non-negative (probes positive)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        d["resolutions"] = list(self.resolutions)
        return d


# ------------------------------------------------------------ serialization

def _format(x, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {_format(v, indent, level + 1)}"
                 for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        items = [pad + _format(v, indent, level + 1) for v in x]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        text = f"{x:.17g}"
        return text if any(c in text for c in ".e") else text + ".0"
    if isinstance(x, np.ndarray):
        return _format(x.tolist(), indent, level)
    return _quote(str(x))


def _quote(s: str) -> str:
    return json.dumps(s)


def dumps_report(report: dict, indent: int = 2) -> str:
    return _format(report, indent, 0) + "\n"


def write_report(report: dict, path: str | None, config: RunConfig | None = None) -> str:
    """Wrap ``report`` with schema and config; write to ``path`` or stdout."""
    doc = {"schema": SCHEMA,
           "config": config.to_dict() if config is not None else {}}
    doc.update(report)
    text = dumps_report(doc)
    if path is None:
        sys.stdout.write(text)
        return text
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write report {path}: {exc.strerror}") from exc
    return text


# ------------------------------------------------------------ inputs

def surface_for(cfg: RunConfig) -> ParametricSurface | None:
    r = cfg.r
    return {
        "plane": lambda: ParametricSurface.plane(),
        "sphere": lambda: ParametricSurface.sphere(r),
        "cylinder": lambda: ParametricSurface.cylinder(r),
        "cubic-graph": lambda: ParametricSurface.graph([(1.0, 3, 0)]),
        "paraboloid": lambda: ParametricSurface.graph([(0.25, 2, 0), (0.25, 0, 2)],
                                                      disk=r),
    }.get(cfg.surface, lambda: None)()


def build_mesh(cfg: RunConfig, resolution: int | None = None) -> Mesh:
    n = cfg.resolution if resolution is None else resolution
    if cfg.input is not None:
        try:
            return load_mesh(cfg.input)
        except (OSError, MeshError, ValueError) as exc:
            raise InputError(f"cannot load {cfg.input}: {exc}") from exc
    if cfg.surface == "disk":
        return disk_mesh(n, cfg.r)
    if cfg.surface == "perturbed-disk":
        return perturbed_disk(n, amplitude=cfg.amplitude, radius=cfg.r)
    return sample_mesh(surface_for(cfg), n)


def _inner_region(mesh: Mesh) -> np.ndarray:
    """Chart points in the central half of the domain (all points if closed)."""
    surface = mesh.extras.get("surface")
    if surface is None or mesh.is_closed:
        return ~mesh.boundary_mask
    uv = mesh.extras["uv"]
    if surface.domain[0] == "disk":
        return np.hypot(uv[:, 0], uv[:, 1]) <= 0.5 * surface.domain[1]
    u0, u1, v0, v1 = surface.domain[1]
    cu, cv = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
    return (np.abs(uv[:, 0] - cu) <= 0.25 * (u1 - u0)) & \
        (np.abs(uv[:, 1] - cv) <= 0.25 * (v1 - v0))


# ------------------------------------------------------------ subcommands

def _mesh_info(mesh: Mesh) -> dict:
    return {"vertices": mesh.n_vertices, "faces": mesh.n_faces,
            "boundary_loops": len(mesh.boundary_loops),
            "diameter": mesh.diameter(), "h_source": resolve_h_source(mesh)}


def cmd_analyze(cfg: RunConfig) -> tuple[dict, int]:
    mesh = build_mesh(cfg)
    der = el_residual(mesh)
    curv = discrete_curvature(mesh)
    inner = ~mesh.boundary_mask
    w = mesh.vertex_area
    I = der.el_residual[inner]
    bnd = der.boundary.max()
    report = {
        "mesh": _mesh_info(mesh),
        "energy": energy(mesh).to_dict(),
        "H": {"min": float(curv.H.min()), "max": float(curv.H.max())},
        "el_residual": {"max_abs_interior": float(np.abs(I).max()) if len(I) else 0.0,
                        "l2_interior": float(np.sqrt(w[inner] @ I ** 2))},
        "boundary": {"max_A": bnd[0], "max_dH_deta": bnd[1], "max_dlapH_deta": bnd[2]},
    }
    if "surface" in mesh.extras:
        ex = exact_samples(mesh)
        sel = _inner_region(mesh)
        report["exact_error"] = {
            "H_max": float(np.abs(curv.H - ex.H)[sel].max()),
            "el_l2": float(np.sqrt(w[sel] @ (der.el_residual - ex.el_residual)[sel] ** 2)),
        }
    return report, 0


def cmd_variation(cfg: RunConfig) -> tuple[dict, int]:
    mesh = build_mesh(cfg)
    if not len(mesh.boundary_vertices) and mesh.n_vertices < 20:
        raise InputError("mesh too small for variation probes")
    try:
        probes = random_probes(mesh, cfg.probes, seed=cfg.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rows = []
    for i, pr in enumerate(probes):
        fv = first_variation(mesh, pr)
        fd = finite_difference_variation(mesh, pr)
        rel = abs(fv["dF"] - fd) / abs(fd) if fd != 0 else abs(fv["dF"])
        rows.append({"probe": i, "compact": pr.compact, "formula": fv["dF"],
                     "interior": fv["interior"], "boundary": fv["boundary"],
                     "finite_difference": fd, "relative_error": rel})
    a, b = probes[0], probes[-1]
    lhs = first_variation(mesh, a.scaled(2.0) + b.scaled(-0.5))["dF"]
    rhs = 2.0 * first_variation(mesh, a)["dF"] - 0.5 * first_variation(mesh, b)["dF"]
    lin = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    ok = all(r["relative_error"] <= cfg.tol for r in rows)
    return {"mesh": _mesh_info(mesh), "probes": rows, "linearity_error": lin,
            "tolerance": cfg.tol, "passed": ok}, 0 if ok else 1


def cmd_flow(cfg: RunConfig) -> tuple[dict, int]:
    mesh = build_mesh(cfg)
    dt = "auto" if cfg.dt == "auto" else float(cfg.dt)
    fc = FlowConfig(dt=dt, max_steps=cfg.max_steps, stop_A0=cfg.tol_a0,
                    stop_F=cfg.stop_f, snapshot_every=cfg.snapshot_every)
    snap = hist = None
    if cfg.out is not None:
        snap = os.path.join(cfg.out, "snapshots") if cfg.snapshot_every else None
        os.makedirs(cfg.out, exist_ok=True)
        hist = os.path.join(cfg.out, "history.csv")
    result = run_flow(mesh, fc, snapshot_dir=snap, history_csv=hist)
    st = result.state
    if cfg.out is not None:
        save_obj(st.mesh, os.path.join(cfg.out, "final.obj"))
    pv = planarity_test(st.mesh, cfg.tol_a0)
    report = {
        "mesh": _mesh_info(mesh),
        "verdict": result.verdict, "reason": result.reason,
        "diverged_step": result.diverged_step, "steps": st.step, "time": st.time,
        "F_initial": st.F_history[0], "F_final": st.F_history[-1],
        "A2_initial": st.smallness_history[0],
        "sup_A0_final": st.A0sup_history[-1],
        "monotone_fraction": result.monotone_fraction,
        "planarity": {"sup_A0": pv.sup_A0, "plane_distance": pv.plane_distance,
                      "planar": pv.planar},
        "boundary_check": result.boundary,
    }
    return report, 0 if result.verdict == "planar" else 1


def sobolev_fields(mesh: Mesh, gamma) -> dict:
    """Test functions for the Sobolev check: constants, shifted coordinates,
    the cutoff, H and H times the cutoff."""
    V = mesh.vertices
    H = discrete_curvature(mesh).H
    out = {"one": np.ones(mesh.n_vertices)}
    for k, name in enumerate("xyz"):
        out[name] = V[:, k] - V[:, k].min()
    out["gamma"] = gamma.values
    out["H"] = H
    out["H_gamma"] = H * gamma.values
    return out


def cmd_audit(cfg: RunConfig) -> tuple[dict, int]:
    mesh = build_mesh(cfg)
    gamma = make_cutoff(mesh, cfg.center, cfg.rho, cfg.p)
    sob = {name: ms_sobolev_check(mesh, u) for name, u in
           sobolev_fields(mesh, gamma).items()}
    ident = weighted_identity(mesh, gamma, cfg.resolution)
    chain = estimate_chain(mesh, gamma, cfg.resolution)
    records = {r.lemma: r.to_dict() for r in [ident] + chain}
    violated = sorted(k for k, v in sob.items() if v["violated"])
    report = {
        "mesh": _mesh_info(mesh),
        "cutoff": {"rho": gamma.rho, "p": gamma.p, "c_gamma": gamma.c_gamma,
                   "grad_max": gamma.grad_max, "hessian_ratio": gamma.hessian_ratio},
        "sobolev": sob, "sobolev_violations": violated,
        "records": records,
    }
    return report, 1 if violated else 0


EXACT_COLUMNS = ("H", "A_norm2", "A0_norm2", "gradH_norm2", "lapH", "bilapH",
                 "el_residual")


def cmd_sample(cfg: RunConfig) -> tuple[dict, int]:
    if cfg.input is not None:
        raise InputError("sample needs --surface, not --input")
    if cfg.out is None:
        raise InputError("sample needs --out")
    mesh = build_mesh(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    obj = os.path.join(cfg.out, "mesh.obj")
    save_obj(mesh, obj)
    report = {"mesh": _mesh_info(mesh), "obj": obj}
    if "surface" in mesh.extras:
        ex = exact_samples(mesh)
        path = os.path.join(cfg.out, "exact_fields.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("vertex", "u", "v") + EXACT_COLUMNS)
            uv = mesh.extras["uv"]
            cols = [getattr(ex, c) for c in EXACT_COLUMNS]
            for i in range(mesh.n_vertices):
                w.writerow([i, f"{uv[i, 0]:.17g}", f"{uv[i, 1]:.17g}"]
                           + [f"{c[i]:.17g}" for c in cols])
        report["exact_fields"] = path
    return report, 0


def observed_orders(h, err) -> list:
    out = []
    for i in range(len(err) - 1):
        if err[i] > 0 and err[i + 1] > 0:
            out.append(math.log(err[i] / err[i + 1]) / math.log(h[i] / h[i + 1]))
        else:
            out.append(math.nan)
    return out


def convergence_ladder(cfg: RunConfig) -> dict:
    if cfg.input is not None:
        raise InputError("convergence needs --surface")
    surface = surface_for(cfg)
    if surface is None:
        raise InputError(f"surface {cfg.surface!r} has no exact oracle")
    ref = chart_energy(surface) if cfg.target == "energy" else None
    rows = []
    for n in cfg.resolutions:
        mesh = build_mesh(cfg, n)
        e = mesh.topology.edges
        h = float(np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]],
                                 axis=1).mean())
        if cfg.target == "energy":
            val = energy(mesh).F
            err = abs(val - ref)
        else:
            ex = exact_samples(mesh)
            sel = _inner_region(mesh)
            w = mesh.vertex_area[sel]
            if cfg.target == "H":
                d = discrete_curvature(mesh).H - ex.H
            else:
                d = el_residual(mesh).el_residual - ex.el_residual
            val = None
            err = float(np.sqrt(w @ d[sel] ** 2))
        rows.append({"resolution": n, "vertices": mesh.n_vertices, "h": h,
                     "value": val, "error": err})
    orders = observed_orders([r["h"] for r in rows], [r["error"] for r in rows])
    errs = [r["error"] for r in rows]
    return {"target": cfg.target, "reference": ref, "ladder": rows,
            "observed_orders": orders,
            "monotone": all(b < a for a, b in zip(errs, errs[1:]))}


def cmd_convergence(cfg: RunConfig) -> tuple[dict, int]:
    report = convergence_ladder(cfg)
    return report, 0 if report["monotone"] else 1


COMMANDS = {"analyze": cmd_analyze, "variation-check": cmd_variation,
            "flow": cmd_flow, "audit": cmd_audit, "sample": cmd_sample,
            "convergence": cmd_convergence}


# ------------------------------------------------------------ argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _float_or_inf(s: str) -> float:
    try:
        return float(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="idealsurf", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="key = value file with [run]/[flow]/[audit] sections")
    ap.add_argument("--input", help="OBJ mesh")
    ap.add_argument("--surface", choices=SURFACES)
    ap.add_argument("--r", type=float, help="sphere/cylinder/disk radius")
    ap.add_argument("--resolution", type=int)
    ap.add_argument("--resolutions", type=int, nargs="+")
    ap.add_argument("--out", help="output directory (report.json goes there)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--dt", help="time step or 'auto'")
    ap.add_argument("--max-steps", type=int)
    ap.add_argument("--tol-a0", type=float)
    ap.add_argument("--stop-f", type=float)
    ap.add_argument("--snapshot-every", type=int)
    ap.add_argument("--rho", type=_float_or_inf)
    ap.add_argument("--p", type=float)
    ap.add_argument("--center", type=float, nargs=3)
    ap.add_argument("--probes", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--target", choices=CONVERGENCE_TARGETS)
    ap.add_argument("--amplitude", type=float)
    return ap


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            parts = raw.replace(",", " ").split()
            return tuple(int(x) if key == "resolutions" else float(x) for x in parts)
        return raw
    except ValueError as exc:
        raise InputError(f"config value for {key}: {raw!r} is not valid") from exc


def _read_config(path: str) -> dict:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise InputError(f"invalid config {path}: {str(exc).splitlines()[0]}") from exc
    out = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES or key == "subcommand":
                raise InputError(f"unknown config key {key!r} in [{section}]")
            out[key] = _coerce(key, raw)
    return out


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values = _read_config(ns.config) if ns.config else {}
    for key, val in vars(ns).items():
        if key in ("config", "subcommand") or val is None:
            continue
        values[key] = tuple(val) if isinstance(val, list) else val
    return RunConfig(subcommand=ns.subcommand, **values)


def _thread_limit():
    n = os.environ.get("IDEALSURF_THREADS")
    if not n:
        return None
    try:
        k = int(n)
    except ValueError as exc:
        raise InputError(f"IDEALSURF_THREADS must be an integer, got {n!r}") from exc
    if k < 1:
        raise InputError("IDEALSURF_THREADS must be at least 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=k)


def run_cli(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        limit = _thread_limit()
        try:
            report, code = COMMANDS[cfg.subcommand](cfg)
        finally:
            if limit is not None:
                limit.unregister()
        path = os.path.join(cfg.out, "report.json") if cfg.out else None
        write_report(report, path, cfg)
        return code
    except InputError as exc:
        print(f"idealsurf: error: {exc}", file=sys.stderr)
        return 2
    except (MeshError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"idealsurf: error: {msg}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
