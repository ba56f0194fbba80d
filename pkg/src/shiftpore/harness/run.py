"""Single-case pipeline and run-directory writer."""

from __future__ import annotations

import json
import logging
import os
import platform
import time
from dataclasses import dataclass, field, fields

import numpy as np
import scipy

from .. import __version__, assembly, fem, geometry, mesh, postproc, solver
from ..errors import ConfigurationError
from ..mesh import ShiftData, SplitMesh
from .cases import CaseSpec
from .config import dump_spec, spec_to_dict

log = logging.getLogger(__name__)


@dataclass
class Discretization:
    grid: mesh.StructuredQuadMesh
    curves: list
    surrogates: list
    split: SplitMesh
    shifts: list


def discretize(spec: CaseSpec) -> Discretization:
    """Geometry, grid, surrogates, split connectivity and shift data.

    Overlapping surrogates of different cracks are rejected by the split.
    """
    grid = mesh.build_grid(spec.n, spec.domain)
    curves = [geometry.make_crack(c.descriptor) for c in spec.cracks]
    surrogates = [mesh.select_surrogate(grid, cv, k) for k, cv in enumerate(curves)]
    split = mesh.split_along(grid, surrogates)
    shifts = [mesh.shift_data(sg, grid) for sg in surrogates]
    return Discretization(grid, curves, surrogates, split, shifts)


def controller_settings(spec: CaseSpec) -> solver.ControllerSettings:
    known = {f.name for f in fields(solver.ControllerSettings)}
    bad = set(spec.controller) - known
    if bad:
        raise ConfigurationError(f"unknown controller settings {sorted(bad)}")
    return solver.ControllerSettings(**spec.controller)


@dataclass
class ModeResult:
    mode: str
    system: solver.DAESystem
    state: solver.State
    snapshots: list
    stats: solver.RunStats
    grads: postproc.RecoveredGradients
    profiles: list
    lambda_profiles: list = field(default_factory=list)
    closure_max: float | None = None       # max over checked steps
    timings: dict = field(default_factory=dict)

    @property
    def dofmap(self) -> fem.DofMap:
        return self.system.dofmap

    def norms(self, eps_list) -> list[dict]:
        rows = []
        for pr in self.profiles + self.lambda_profiles:
            for e in eps_list:
                rows.append({"mode": self.mode, "crack": pr.crack_id, "kind": pr.kind, "eps": float(e),
                             "norm": postproc.trimmed_norm(pr, e)})
        return rows


def solve_mode(spec: CaseSpec, disc: Discretization, mode: str, recovery=None) -> ModeResult:
    laws = [c.law for c in spec.cracks]
    t0 = time.perf_counter()
    system = solver.build_system(disc.split, disc.shifts, laws, spec.material, list(spec.sources), mode,
                                 spec.with_hessian, spec.bcs)
    t_build = time.perf_counter() - t0
    state = solver.solve_initial(system)
    worst = [0.0]
    on_step = None
    if mode == "strong" and spec.check_closure_every_step:
        def on_step(st):
            r = solver.closure_residual(disc.split, system.dofmap, st, disc.shifts, laws)["max"]
            worst[0] = max(worst[0], r)

    state, snaps, stats = solver.run_transient(system, state, spec.t_end, controller_settings(spec),
                                               spec.snapshots, on_step)
    t_solve = time.perf_counter() - t0 - t_build
    t1 = time.perf_counter()
    recovery = recovery or postproc.GradientRecovery(disc.split)
    need_rate = any(c.law.has_viscosity for c in spec.cracks)
    grads = recovery(state.z, system.dofmap, state.zdot if need_rate else None)
    profiles = postproc.residual_profiles(disc.split, system.dofmap, state, grads, disc.shifts, laws,
                                          spec.material)
    lam_prof = []
    closure = None
    if mode == "strong":
        lam_prof = postproc.lambda_profiles(disc.split, system.dofmap, state, disc.shifts, laws)
        final = solver.closure_residual(disc.split, system.dofmap, state, disc.shifts, laws)["max"]
        closure = max(worst[0], final)
    timings = {"build": t_build, "solve": t_solve, "postprocess": time.perf_counter() - t1}
    return ModeResult(mode, system, state, snaps, stats, grads, profiles, lam_prof, closure, timings)


@dataclass
class CaseResult:
    spec: CaseSpec
    disc: Discretization
    modes: dict                 # mode -> ModeResult
    out_dir: str | None = None

    def norm_rows(self) -> list[dict]:
        h = self.disc.grid.h[0]
        rows = []
        for m in self.spec.modes:
            for r in self.modes[m].norms(self.spec.trim):
                rows.append(dict(r, n=self.spec.n, h=h))
        return rows


def solve_case(spec: CaseSpec) -> CaseResult:
    disc = discretize(spec)
    recovery = postproc.GradientRecovery(disc.split)
    modes = {m: solve_mode(spec, disc, m, recovery) for m in spec.modes}
    return CaseResult(spec, disc, modes)


def versions() -> dict:
    import matplotlib
    return {"shiftpore": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "matplotlib": matplotlib.__version__}


def _summary_lines(res: CaseResult) -> list[str]:
    sp = res.spec
    d = res.disc
    out = [f"case {sp.name}  n={sp.n}  h={d.grid.h[0]:.6g} km  t_end={sp.t_end:g} hr",
           f"split mesh: {d.split.n_nodes} nodes, {d.split.n_elements} elements, {d.split.n_cracks} crack(s)"]
    for c, sg in enumerate(d.surrogates):
        out.append(f"  crack {c}: length {sg.curve.length:.6g} km, {sg.n_facets} surrogate facets, "
                   f"boundary ends {tuple(map(bool, sg.end_on_boundary))}")
    for m in sp.modes:
        r = res.modes[m]
        p = r.state.z[: r.dofmap.n_p]
        st = r.stats
        out.append(f"[{m}] steps {st.accepted} accepted / {st.rejected} rejected, "
                   f"{st.factorizations} factorizations; build {r.timings['build']:.2f} s, "
                   f"solve {r.timings['solve']:.2f} s, post {r.timings['postprocess']:.2f} s")
        out.append(f"[{m}] max p {p.max():.6g} MPa, min p {p.min():.6g} MPa")
        if r.closure_max is not None:
            out.append(f"[{m}] max closure residual {r.closure_max:.3e}")
        for pr in r.profiles + r.lambda_profiles:
            norms = "  ".join(f"eps={e:g}: {postproc.trimmed_norm(pr, e):.6e}" for e in sp.trim)
            out.append(f"[{m}] crack {pr.crack_id} {pr.kind:<14s} {norms}")
    return out


def write_case(res: CaseResult, out_dir, figures: bool = True) -> str:
    """Write config, fields, profiles, norms, summary, figures and manifest."""
    from . import plots

    postproc.ensure_dir(out_dir)
    sp, d = res.spec, res.disc
    files = ["config.json"]
    dump_spec(sp, os.path.join(out_dir, "config.json"))
    proj = postproc.projected_coordinates(d.split, d.shifts)
    groups = {}
    recovery = None
    for m in sp.modes:
        r = res.modes[m]
        for tag, coords in (("", None), ("_projected", proj)):
            name = f"fields_{m}{tag}.vtk"
            postproc.write_vtk(os.path.join(out_dir, name), d.split, r.dofmap, r.state.z, r.grads, sp.material,
                               coords, f"{sp.name} n={sp.n} {m} t={r.state.t:g}")
            files.append(name)
        if sp.snapshots != "final":
            recovery = recovery or postproc.GradientRecovery(d.split)
            for k, snap in enumerate(r.snapshots):
                name = f"fields_{m}_{k:04d}.vtk"
                postproc.write_vtk(os.path.join(out_dir, name), d.split, r.dofmap, snap.z,
                                   recovery(snap.z, r.dofmap), sp.material, None,
                                   f"{sp.name} n={sp.n} {m} t={snap.t:.17g}")
                files.append(name)
        groups[m] = r.profiles + r.lambda_profiles
    postproc.write_profiles_csv(os.path.join(out_dir, "profiles.csv"), groups)
    postproc.write_norms_csv(os.path.join(out_dir, "norms.csv"), res.norm_rows())
    files += ["profiles.csv", "norms.csv", "summary.txt"]
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(_summary_lines(res)) + "\n")
    if figures:
        files += plots.case_figures(res, out_dir)
    manifest = {
        "spec": spec_to_dict(sp),
        "versions": versions(),
        "files": files + ["manifest.json"],
        "profiles": {m: [{"crack": p.crack_id, "kind": p.kind, "samples": int(p.s.size)} for p in groups[m]]
                     for m in sp.modes},
        "runs": {m: {"accepted": res.modes[m].stats.accepted, "rejected": res.modes[m].stats.rejected,
                     "factorizations": res.modes[m].stats.factorizations,
                     "timings": res.modes[m].timings, "closure_max": res.modes[m].closure_max}
                 for m in sp.modes},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    res.out_dir = out_dir
    return out_dir


def run_case(spec: CaseSpec, out_dir=None, figures: bool = True) -> CaseResult:
    res = solve_case(spec)
    if out_dir is not None:
        write_case(res, out_dir, figures)
    return res
