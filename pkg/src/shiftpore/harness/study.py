"""Mesh-convergence and tip-trimming studies."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import postproc
from ..errors import ConfigurationError, ShiftPoreError
from .cases import CaseSpec
from .config import dump_spec, spec_to_dict
from .run import CaseResult, solve_case, versions, write_case

log = logging.getLogger(__name__)

SELF_CONV_FIELDS = ("p", "u")


def loglog_slope(h, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(h)``; NaN if undefined."""
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    if h.size < 2 or np.any(v <= 0) or not np.all(np.isfinite(v)):
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(v), 1)[0])


@dataclass
class StudyReport:
    case: str
    levels: list                # n values that completed
    modes: tuple
    eps: tuple
    norms: list = field(default_factory=list)          # rows with NORM_COLUMNS
    self_convergence: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)         # "mode:n" -> seconds
    failures: list = field(default_factory=list)
    results: dict = field(default_factory=dict)        # n -> CaseResult (kept in memory)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def series(self, mode, kind, eps=0.0, crack=0):
        rows = sorted((r for r in self.norms if r["mode"] == mode and r["kind"] == kind
                       and r["eps"] == eps and r["crack"] == crack), key=lambda r: r["n"])
        return np.array([r["h"] for r in rows]), np.array([r["norm"] for r in rows])

    def slope(self, mode, kind, eps=0.0, crack=0) -> float:
        """Least-squares log-log slope over all completed levels."""
        return loglog_slope(*self.series(mode, kind, eps, crack))

    def pair_slopes(self, mode, kind, eps=0.0, crack=0) -> list:
        h, v = self.series(mode, kind, eps, crack)
        return [loglog_slope(h[i:i + 2], v[i:i + 2]) for i in range(len(h) - 1)]

    def slope_table(self) -> list[dict]:
        keys = sorted({(r["mode"], r["crack"], r["kind"], r["eps"]) for r in self.norms})
        return [{"mode": m, "crack": c, "kind": k, "eps": e, "slope": self.slope(m, k, e, c),
                 "pair_slopes": self.pair_slopes(m, k, e, c)} for m, c, k, e in keys]

    def self_conv(self, mode, fieldtag="p"):
        rows = [r for r in self.self_convergence if r["mode"] == mode and r["field"] == fieldtag]
        return [r["error"] for r in sorted(rows, key=lambda r: r["n_coarse"])]


def _check_levels(ns):
    ns = [int(n) for n in ns]
    if not ns:
        raise ConfigurationError("a study needs at least one mesh level")
    for a, b in zip(ns, ns[1:]):
        if not b > a or b % a:
            raise ConfigurationError(f"mesh levels must increase and divide each other, got {ns}")
    return ns


def convergence_study(template: CaseSpec, ns, eps=None, out_dir=None, level_dirs: bool = False,
                      figures: bool = True, keep_results: bool = True) -> StudyReport:
    """Run ``template`` at every ``n`` and tabulate trimmed residual norms.

    Adjacent levels in a 2:1 ratio also get self-convergence errors.  A level
    that fails stops the study; the report then lists the failure and holds
    the levels completed so far.
    """
    ns = _check_levels(ns)
    eps = tuple(template.trim if eps is None else eps)
    for e in eps:
        if not 0.0 <= e < 0.5:
            raise ConfigurationError(f"trim fractions must lie in [0, 0.5), got {e!r}")
    rep = StudyReport(template.name, [], template.modes, eps)
    prev: CaseResult | None = None
    for n in ns:
        spec = template.with_(n=n, trim=eps)
        t0 = time.perf_counter()
        try:
            res = solve_case(spec)
        except ShiftPoreError as exc:
            log.error("level n=%d failed: %s", n, exc)
            rep.failures.append({"n": n, "error": type(exc).__name__, "message": str(exc)})
            break
        for m, mr in res.modes.items():
            rep.timing[f"{m}:{n}"] = sum(mr.timings.values())
        log.info("level n=%d done in %.1f s", n, time.perf_counter() - t0)
        rep.levels.append(n)
        rep.norms.extend(res.norm_rows())
        if level_dirs and out_dir is not None:
            write_case(res, os.path.join(out_dir, f"n{n}"), figures)
        if prev is not None and n == 2 * prev.spec.n:
            M = postproc.mass_matrix(prev.disc.split)
            for m in template.modes:
                for tag in SELF_CONV_FIELDS:
                    e = postproc.self_convergence_error(
                        prev.modes[m].state.z, res.modes[m].state.z, prev.disc.split, res.disc.split,
                        prev.modes[m].dofmap, res.modes[m].dofmap, tag, M)
                    rep.self_convergence.append({"mode": m, "field": tag, "n_coarse": prev.spec.n,
                                                 "n_fine": n, "error": e})
        if keep_results:
            rep.results[n] = res
        prev = res
    if out_dir is not None:
        write_study(rep, template, out_dir, figures)
    return rep


def _slope_str(x) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.3f}"


def summary_lines(rep: StudyReport) -> list[str]:
    out = [f"study {rep.case}: levels {rep.levels}, modes {list(rep.modes)}, eps {list(rep.eps)}"]
    if rep.partial:
        out.append(f"PARTIAL: {rep.failures}")
    for row in rep.slope_table():
        h, v = rep.series(row["mode"], row["kind"], row["eps"], row["crack"])
        norms = " ".join(f"{x:.3e}" for x in v)
        out.append(f"{row['mode']:<6s} crack {row['crack']} {row['kind']:<14s} eps={row['eps']:<5g} "
                   f"slope {_slope_str(row['slope'])}  pairs [{', '.join(map(_slope_str, row['pair_slopes']))}]"
                   f"  norms {norms}")
    for r in rep.self_convergence:
        out.append(f"self-convergence {r['mode']:<6s} e_{r['field']} {r['n_coarse']}->{r['n_fine']}: "
                   f"{r['error']:.4e}")
    for k, t in sorted(rep.timing.items(), key=lambda kv: (kv[0].split(":")[0], int(kv[0].split(":")[1]))):
        out.append(f"time {k}: {t:.1f} s")
    return out


def write_study(rep: StudyReport, template: CaseSpec, out_dir, figures: bool = True) -> None:
    from . import plots

    postproc.ensure_dir(out_dir)
    dump_spec(template, os.path.join(out_dir, "config.json"))
    postproc.write_norms_csv(os.path.join(out_dir, "norms.csv"), sorted(
        rep.norms, key=lambda r: (r["mode"], r["crack"], r["n"], r["kind"], r["eps"])))
    with open(os.path.join(out_dir, "selfconv.csv"), "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "field", "n_coarse", "n_fine", "error"])
        for r in rep.self_convergence:
            w.writerow([r["mode"], r["field"], r["n_coarse"], r["n_fine"], f"{r['error']:.17g}"])
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary_lines(rep)) + "\n")
    files = ["config.json", "norms.csv", "selfconv.csv", "summary.txt"]
    if figures and rep.levels:
        files += plots.study_figures(rep, out_dir)
    manifest = {
        "spec": spec_to_dict(template),
        "levels": rep.levels,
        "eps": list(rep.eps),
        "partial": rep.partial,
        "failures": rep.failures,
        "timing": rep.timing,
        "versions": versions(),
        "files": files + ["manifest.json"],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
