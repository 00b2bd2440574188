"""Linkage JSON serialization.

One document per linkage with fixed field order: vertices, edges (u, v,
length), collinear (a, b, c, r, s), marking (vertex, re, im), based_edge,
inputs, outputs, field, certified_ball, sym_order, placement, then the
optional trailing fields (coord_disks, wall_circles, expr, kind, closure,
report).  Reals carry 17 significant digits, so serialize -> load ->
serialize is byte-identical.
"""

from __future__ import annotations

import json
import math

from .compose import close_outputs
from .core import (
    CollinearConstraint,
    Edge,
    LinkageError,
    VertexId,
    assemble,
    format_real,
)
from .functional import BadCircle, ClosedFunctionalLinkage, FunctionalLinkage
from .placement import (
    AffineStep,
    CircleStep,
    FixedStep,
    InputStep,
    LineCircleStep,
    PlacementProgram,
)
from . import poly


def _num(x) -> str:
    if isinstance(x, bool):
        raise LinkageError("no booleans in the schema")
    if isinstance(x, int):
        return str(x)
    return format_real(x)


def _dump(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, float)):
        return _num(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dump(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_dump(v)}" for k, v in obj.items()) + "}"
    raise LinkageError(f"cannot serialize {type(obj)}")


def _pair(z: complex):
    return [z.real, z.imag]


def _step_doc(st):
    if isinstance(st, FixedStep):
        return ["fixed", st.v, st.at.real, st.at.imag]
    if isinstance(st, InputStep):
        return ["input", st.v, st.k]
    if isinstance(st, CircleStep):
        return ["circle", st.v, st.c1, st.r1, st.c2, st.r2, st.bit, 1 if st.flip else 0]
    if isinstance(st, LineCircleStep):
        return ["linecircle", st.v, st.a, st.b, st.c, st.r, st.bit, 1 if st.flip else 0]
    if isinstance(st, AffineStep):
        return ["affine", st.v, [[c, w] for c, w in st.terms], st.const.real, st.const.imag]
    raise LinkageError(f"unknown placement step {st!r}")


def _step_from(doc):
    kind = doc[0]
    if kind == "fixed":
        return FixedStep(int(doc[1]), complex(doc[2], doc[3]))
    if kind == "input":
        return InputStep(int(doc[1]), int(doc[2]))
    if kind == "circle":
        return CircleStep(int(doc[1]), int(doc[2]), float(doc[3]), int(doc[4]),
                          float(doc[5]), int(doc[6]), bool(doc[7]))
    if kind == "linecircle":
        return LineCircleStep(int(doc[1]), int(doc[2]), int(doc[3]), int(doc[4]),
                              float(doc[5]), int(doc[6]), bool(doc[7]))
    if kind == "affine":
        return AffineStep(int(doc[1]),
                          tuple((float(c), int(w)) for c, w in doc[2]),
                          complex(doc[3], doc[4]))
    raise LinkageError(f"unknown placement step kind {kind!r}")


def _document(f) -> dict:
    closed = isinstance(f, ClosedFunctionalLinkage)
    src = f.source if closed else f
    linkage = src.linkage
    doc = {
        "vertices": [[v.index, v.label] for v in linkage.vertices],
        "edges": [[e.u, e.v, e.length] for e in linkage.edges],
        "collinear": [[c.a, c.b, c.c, c.r, c.s] for c in linkage.collinear],
        "marking": [[w, z.real, z.imag] for w, z in linkage.marking],
        "based_edge": list(linkage.based_edge) if linkage.based_edge else None,
        "inputs": list(src.inputs),
        "outputs": list(src.outputs),
        "field": src.field_tag,
        "certified_ball": {
            "center": [_pair(c) for c in src.certified_ball.center],
            "radius": None if math.isinf(src.certified_ball.radius) else src.certified_ball.radius,
        },
        "sym_order": src.sym_order,
        "placement": {
            "bits": src.placement.n_bits,
            "steps": [_step_doc(st) for st in src.placement.steps],
        },
        "coord_disks": [
            [c.real, c.imag, None if math.isinf(r) else r] for c, r in src.coord_disks
        ],
        "wall_circles": [
            [list(b.coord) if isinstance(b.coord, tuple) else b.coord,
             b.center.real, b.center.imag, b.radius, b.kind]
            for b in src.wall_circles
        ],
        "expr": None if src.exprs is None else [poly.to_text(e) for e in src.exprs],
        "kind": str(src.params.get("kind", "block")) if src.params else "block",
    }
    if closed:
        doc["closure"] = {"targets": [_pair(t) for t in f.targets]}
        if f.seed_hint is not None:
            doc["closure"]["seed_hint"] = _pair(f.seed_hint)
    rep = getattr(src, "report", None)
    if rep is not None:
        doc["report"] = {
            "stages": [[s.kind, s.sym_bits] for s in rep.stages],
            "total_sym_order": rep.total_sym_order,
        }
    return doc


def dumps(f) -> str:
    """Serialize a functional or closed functional linkage (deterministic bytes)."""
    return _dump(_document(f)) + "\n"


def dump(f, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(f))


def loads(text: str):
    doc = json.loads(text)
    vertices = [VertexId(int(i), lbl) for i, lbl in doc["vertices"]]
    edges = [Edge(int(u), int(v), float(l)) for u, v, l in doc["edges"]]
    collinear = [
        CollinearConstraint(int(a), int(b), int(c), float(r), float(s))
        for a, b, c, r, s in doc["collinear"]
    ]
    marking = [(int(w), complex(re, im)) for w, re, im in doc["marking"]]
    based = tuple(doc["based_edge"]) if doc["based_edge"] else None
    linkage = assemble(vertices, edges, collinear, marking, based)
    steps = tuple(_step_from(s) for s in doc["placement"]["steps"])
    program = PlacementProgram(steps, int(doc["placement"]["bits"]))
    disks = tuple(
        (complex(re, im), math.inf if r is None else float(r))
        for re, im, r in doc["coord_disks"]
    )
    circles = tuple(
        BadCircle(tuple(c) if isinstance(c, list) else int(c),
                  complex(re, im), float(rad), str(kind))
        for c, re, im, rad, kind in doc["wall_circles"]
    )
    exprs = None
    if doc["expr"] is not None:
        exprs = tuple(poly.parse(t) for t in doc["expr"])
    report = None
    if "report" in doc:
        from .compiler import CompileReport, Stage
        from .functional import Ball

        report = CompileReport(
            stages=[Stage(kind, int(bits), ()) for kind, bits in doc["report"]["stages"]],
            total_sym_order=int(doc["report"]["total_sym_order"]),
            ball=Ball(tuple(c for c, _ in disks), min((r for _, r in disks), default=math.inf)),
        )
    f = FunctionalLinkage(
        linkage=linkage,
        inputs=tuple(int(v) for v in doc["inputs"]),
        outputs=tuple(int(v) for v in doc["outputs"]),
        field_tag=doc["field"],
        coord_disks=disks,
        placement=program,
        wall_circles=circles,
        exprs=exprs,
        params={"kind": doc.get("kind", "block")},
        report=report,
    )
    closure = doc.get("closure")
    if closure is not None:
        closed = close_outputs(f, [complex(re, im) for re, im in closure["targets"]])
        if "seed_hint" in closure:
            from dataclasses import replace

            closed = replace(closed, seed_hint=complex(*closure["seed_hint"]))
        return closed
    return f


def load(path):
    with open(path) as fh:
        return loads(fh.read())
