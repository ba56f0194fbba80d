"""JSON form of :class:`CaseSpec`.

Built-in cases serialize to the same schema, so a written ``config.json``
can be edited and fed back through ``--config``.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import jsonschema

from ..errors import ConfigurationError
from ..physics import InterfaceLaw, MaterialParams, SourceTerm
from .cases import CaseSpec, CrackSpec

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_SIDES = {"type": "array", "items": {"enum": ["left", "right", "bottom", "top"]}, "uniqueItems": True}

CASE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "shiftpore case",
    "type": "object",
    "required": ["name", "n", "cracks", "sources"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 2},
        "domain": {"type": "array", "items": _POINT, "minItems": 2, "maxItems": 2},
        "material": {
            "type": "object",
            "required": ["G", "nu", "alpha", "beta", "gamma"],
            "additionalProperties": False,
            "properties": {k: _NUM for k in ("G", "nu", "alpha", "beta", "gamma")},
        },
        "cracks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["geometry", "law"],
                "additionalProperties": False,
                "properties": {
                    "geometry": {"type": "object", "required": ["kind"],
                                 "properties": {"kind": {"type": "string"}}},
                    "law": {"type": "object", "additionalProperties": False,
                            "properties": {k: _NUM for k in ("T_n", "k_n", "k_t", "h_n", "h_t", "k_nt", "h_nt")}},
                },
            },
        },
        "sources": {
            "type": "array",
            "items": {"type": "object", "required": ["center", "R", "Q"], "additionalProperties": False,
                      "properties": {"center": _POINT, "R": _NUM, "Q": _NUM}},
        },
        "bcs": {"type": "object", "additionalProperties": False,
                "properties": {"pressure_sides": _SIDES, "displacement_sides": _SIDES}},
        "t_end": _NUM,
        "mode": {"enum": ["weak", "strong", "both"]},
        "snapshots": {"type": "string", "pattern": r"^(final|all|stride:[1-9][0-9]*)$"},
        "trim": {"type": "array", "items": _NUM},
        "with_hessian": {"type": "boolean"},
        "check_closure_every_step": {"type": "boolean"},
        "controller": {"type": "object"},
    },
}


def spec_to_dict(spec: CaseSpec) -> dict:
    return {
        "name": spec.name,
        "n": int(spec.n),
        "domain": [list(map(float, r)) for r in spec.domain],
        "material": asdict(spec.material),
        "cracks": [{"geometry": dict(c.descriptor), "law": asdict(c.law)} for c in spec.cracks],
        "sources": [{"center": list(map(float, s.center)), "R": s.R, "Q": s.Q} for s in spec.sources],
        "bcs": {k: list(v) for k, v in spec.bcs.items()},
        "t_end": float(spec.t_end),
        "mode": spec.mode,
        "snapshots": spec.snapshots,
        "trim": [float(e) for e in spec.trim],
        "with_hessian": bool(spec.with_hessian),
        "check_closure_every_step": bool(spec.check_closure_every_step),
        "controller": dict(spec.controller),
    }


def spec_from_dict(data: dict) -> CaseSpec:
    try:
        jsonschema.validate(data, CASE_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigurationError(f"invalid case config at {loc}: {exc.message}") from exc
    kw = {}
    if "domain" in data:
        kw["domain"] = tuple(tuple(r) for r in data["domain"])
    if "material" in data:
        kw["material"] = MaterialParams(**data["material"])
    if "bcs" in data:
        kw["bcs"] = {k: list(v) for k, v in data["bcs"].items()}
    if "trim" in data:
        kw["trim"] = tuple(data["trim"])
    for key in ("t_end", "mode", "snapshots", "with_hessian", "check_closure_every_step", "controller"):
        if key in data:
            kw[key] = data[key]
    cracks = tuple(CrackSpec(dict(c["geometry"]), InterfaceLaw(**c.get("law", {}))) for c in data["cracks"])
    sources = tuple(SourceTerm(tuple(s["center"]), s["R"], s["Q"]) for s in data["sources"])
    return CaseSpec(name=data["name"], n=data["n"], cracks=cracks, sources=sources, **kw)


def load_spec(path) -> CaseSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read case config {path}: {exc}") from exc
    return spec_from_dict(data)


def dump_spec(spec: CaseSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
