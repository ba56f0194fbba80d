"""Case specifications and the built-in benchmark catalogue."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ..errors import ConfigurationError, UsageError
from ..mesh import DEFAULT_DOMAIN
from ..physics import BENCHMARK_MATERIAL, InterfaceLaw, MaterialParams, SourceTerm

MODES = ("weak", "strong", "both")

BENCHMARK_BCS = {"pressure_sides": ["left", "right", "bottom", "top"],
                 "displacement_sides": ["left", "right"]}

# km^2 / hr
INJECTION_RATE = 1e-5
SOURCE_RADIUS = 0.1
WELDED = InterfaceLaw(T_n=0.0, k_n=1e8, k_t=1e8)


@dataclass(frozen=True)
class CrackSpec:
    descriptor: dict           # geometry.make_crack input
    law: InterfaceLaw


@dataclass(frozen=True)
class CaseSpec:
    name: str
    n: int
    cracks: tuple
    sources: tuple
    material: MaterialParams = BENCHMARK_MATERIAL
    domain: tuple = DEFAULT_DOMAIN
    bcs: dict = field(default_factory=lambda: dict(BENCHMARK_BCS))
    t_end: float = 354.0
    mode: str = "both"
    snapshots: str = "final"
    trim: tuple = (0.0,)
    with_hessian: bool = False
    check_closure_every_step: bool = False
    controller: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"n must be an integer >= 2, got {self.n!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"enforcement must be one of {MODES}, got {self.mode!r}")
        if not self.t_end > 0:
            raise ConfigurationError("t_end must be positive")
        for e in self.trim:
            if not 0.0 <= e < 0.5:
                raise ConfigurationError(f"trim fractions must lie in [0, 0.5), got {e!r}")
        if not self.cracks:
            raise ConfigurationError("a case needs at least one crack")

    @property
    def modes(self) -> tuple:
        return ("weak", "strong") if self.mode == "both" else (self.mode,)

    def with_(self, **kw) -> "CaseSpec":
        return replace(self, **kw)


def _single(name, descriptor, n, mode, **kw) -> CaseSpec:
    return CaseSpec(name=name, n=n, cracks=(CrackSpec(descriptor, WELDED),),
                    sources=(SourceTerm((-0.25, -0.25), SOURCE_RADIUS, INJECTION_RATE),), mode=mode, **kw)


ANGLE = math.atan(0.6)


def offset_case(n=20, mode="both", **kw) -> CaseSpec:
    # x = 15/640 lies 0.47 h from the nearest face column at n = 20 and never on one for n <= 320
    return _single("offset", {"kind": "segment", "center": [15.0 / 640.0, 0.0], "length": 1.0,
                              "angle": math.pi / 2}, n, mode, **kw)


def angled_boundary_case(n=20, mode="both", **kw) -> CaseSpec:
    return _single("angled_boundary", {"kind": "clipped_line", "center": [0.0, 0.0], "angle": ANGLE},
                   n, mode, **kw)


def angled_embedded_case(n=20, mode="both", **kw) -> CaseSpec:
    return _single("angled_embedded", {"kind": "segment", "center": [0.0, 0.0],
                                       "length": 0.5 * math.sqrt(1.36), "angle": ANGLE}, n, mode, **kw)


def multicrack_case(n=80, mode="both", **kw) -> CaseSpec:
    cracks = (
        CrackSpec({"kind": "arc_polyline", "center": [0.0, -0.15], "radius": 0.15, "span_deg": 200.0,
                   "n_seg": 8, "mid_angle_deg": 315.0}, WELDED),
        CrackSpec({"kind": "segment", "center": [-0.10, -0.05], "length": 0.25, "angle": 0.7},
                  InterfaceLaw(T_n=0.0, k_n=1e4, k_t=1e4)),
        CrackSpec({"kind": "sine_curve", "center": [-0.3, -0.04], "extent": 0.3, "amplitude": 0.03,
                   "n_seg": 64}, InterfaceLaw(T_n=5.0, k_n=1e8, k_t=1e8)),
        CrackSpec({"kind": "parabola_polyline", "center": [0.18, 0.2], "half_width": 0.14, "height": 0.1,
                   "n_seg": 8}, WELDED),
    )
    sources = (SourceTerm((-0.25, -0.25), SOURCE_RADIUS, -INJECTION_RATE),
               SourceTerm((-0.30, 0.25), SOURCE_RADIUS, INJECTION_RATE))
    kw.setdefault("t_end", 3000.0)
    return CaseSpec(name="multicrack", n=n, cracks=cracks, sources=sources, mode=mode, **kw)


BUILTIN = {
    "offset": offset_case,
    "angled_boundary": angled_boundary_case,
    "angled_embedded": angled_embedded_case,
    "multicrack": multicrack_case,
}


def builtin_case(name: str, n: int | None = None, mode: str = "both", **kw) -> CaseSpec:
    if name not in BUILTIN:
        raise UsageError(f"unknown case {name!r}; expected one of {sorted(BUILTIN)}")
    args = {} if n is None else {"n": n}
    return BUILTIN[name](mode=mode, **args, **kw)
