"""Report figures written next to the tabular outputs."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

from ..postproc import KINDS  # noqa: E402

LABELS = {
    "rJ": r"$r^J$",
    "rJumpQ": r"$r^{[[q]]}$",
    "rJumpT_n": r"$r^{[[t]]}\cdot n$",
    "rJumpT_m": r"$r^{[[t]]}\cdot m$",
    "rConstT_n": r"$r^{T}\cdot n$",
    "rConstT_m": r"$r^{T}\cdot m$",
}


def _triangulation(split):
    q = split.quads
    tris = np.vstack([q[:, [0, 1, 2]], q[:, [0, 2, 3]]])
    return mtri.Triangulation(split.nodes[:, 0], split.nodes[:, 1], tris)


def pressure_figure(res, mode, path):
    d = res.disc
    r = res.modes[mode]
    p = r.state.z[: r.dofmap.n_p]
    fig, ax = plt.subplots(figsize=(5.2, 4.5))
    tc = ax.tripcolor(_triangulation(d.split), p, shading="gouraud", cmap="viridis")
    for cv in d.curves:
        ax.plot(cv.vertices[:, 0], cv.vertices[:, 1], "w-", lw=1.2)
    fig.colorbar(tc, ax=ax, label="p [MPa]")
    ax.set_aspect("equal")
    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_title(f"{res.spec.name} n={res.spec.n} {mode}, t={r.state.t:g} hr")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def profile_figure(res, mode, path):
    r = res.modes[mode]
    fig, axes = plt.subplots(3, 2, figsize=(9, 8), sharex=False)
    for ax, kind in zip(axes.ravel(), KINDS):
        for pr in r.profiles:
            if pr.kind == kind:
                ax.plot(pr.s, pr.value, ".-", ms=2, lw=0.6, label=f"crack {pr.crack_id}")
        ax.set_title(LABELS[kind])
        ax.set_xlabel("s [km]")
        ax.ticklabel_format(axis="y", style="sci", scilimits=(-2, 2))
    if res.disc.split.n_cracks > 1:
        axes[0, 0].legend(fontsize=7)
    fig.suptitle(f"{res.spec.name} n={res.spec.n} {mode}: interface residuals")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def case_figures(res, out_dir) -> list[str]:
    files = []
    for mode in res.spec.modes:
        for name, fn in ((f"pressure_{mode}.png", pressure_figure), (f"profiles_{mode}.png", profile_figure)):
            fn(res, mode, os.path.join(out_dir, name))
            files.append(name)
    return files


def convergence_figure(rep, path, crack=0):
    fig, axes = plt.subplots(3, 2, figsize=(9, 10))
    styles = {"weak": "o-", "strong": "s--"}
    for ax, kind in zip(axes.ravel(), KINDS):
        for mode in rep.modes:
            for e in rep.eps:
                h, v = rep.series(mode, kind, e, crack)
                if h.size and np.all(v > 0):
                    ax.loglog(h, v, styles.get(mode, "o-"), ms=4, label=f"{mode} eps={e:g}")
        h, v = rep.series(rep.modes[0], kind, rep.eps[0], crack)
        if h.size > 1 and np.all(v > 0):
            ax.loglog(h, v[0] * h / h[0], color="0.6", lw=1.5, label="O(h)")
        ax.set_title(LABELS[kind])
        ax.set_xlabel("h [km]")
    axes[0, 0].legend(fontsize=6)
    fig.suptitle(f"{rep.case}: residual norms")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def self_convergence_figure(rep, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, tag in zip(axes, ("p", "u")):
        for mode in rep.modes:
            rows = sorted((r for r in rep.self_convergence if r["mode"] == mode and r["field"] == tag),
                          key=lambda r: r["n_coarse"])
            if rows:
                h = np.array([1.0 / r["n_coarse"] for r in rows])
                ax.loglog(h, [r["error"] for r in rows], "o-", label=mode)
        ax.set_title(f"e_{tag}")
        ax.set_xlabel("h (coarse) [1/n]")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def study_figures(rep, out_dir) -> list[str]:
    files = ["convergence.png"]
    convergence_figure(rep, os.path.join(out_dir, "convergence.png"))
    if rep.self_convergence:
        self_convergence_figure(rep, os.path.join(out_dir, "selfconv.png"))
        files.append("selfconv.png")
    return files
