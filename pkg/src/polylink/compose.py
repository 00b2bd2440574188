"""Gluing linkages: fiber sums and how functionality survives them.

Composition glues one block's outputs onto another's inputs and multiplies
the symmetry groups; input identification restricts to a diagonal without
changing the symmetry group; output closing pins outputs to marked vertices
and turns a function into a membership constraint.  Certified regions
propagate through each operation as per-coordinate disks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    AbstractLinkage,
    CollinearConstraint,
    Edge,
    LinkageError,
    STRUCT_TOL,
    VertexId,
    assemble,
)
from .functional import ClosedFunctionalLinkage, Disk, FunctionalLinkage
from .placement import FixedStep, PlacementProgram
from .poly import PolyExpr, Var, substitute


class MarkingImageMismatch(LinkageError):
    pass


class RangeEscapesDomain(LinkageError):
    pass


class EmptySlice(LinkageError):
    pass


class UnknownTarget(LinkageError):
    pass


@dataclass(frozen=True)
class GlueMap:
    """Vertex identification map: pairs (vertex in first, vertex in second)."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        srcs = [p[0] for p in self.pairs]
        if len(srcs) != len(set(srcs)):
            raise LinkageError("glue map must be injective on sources")


def _relabel(vertices: list[VertexId]) -> list[VertexId]:
    seen: set[str] = set()
    out = []
    for i, v in enumerate(vertices):
        label = v.label
        if label is not None and label in seen:
            label = None
        if label is not None:
            seen.add(label)
        out.append(VertexId(i, label))
    return out


def _merge_graphs(
    a: AbstractLinkage,
    b: Optional[AbstractLinkage],
    pairs: Sequence[tuple[int, int]],
) -> tuple[AbstractLinkage, dict[int, int], dict[int, int]]:
    """Disjoint union (or one copy when b is None) with identifications."""
    if not pairs:
        raise LinkageError("glue map must be nonempty")
    img_a = dict(a.marking)
    img_b = dict(b.marking) if b is not None else img_a

    for va, vb in pairs:
        if b is None and va == vb:
            raise LinkageError(f"self-gluing vertex {va} to itself is a no-op")
        if va in img_a and vb in img_b:
            if abs(img_a[va] - img_b[vb]) > STRUCT_TOL:
                raise MarkingImageMismatch(
                    f"glued vertices {va}, {vb} carry images "
                    f"{img_a[va]} and {img_b[vb]}"
                )

    n_a = a.n_vertices()
    if b is None:
        # self fiber sum: the glue target survives
        root = list(range(n_a))

        def find(x):
            while root[x] != x:
                root[x] = root[root[x]]
                x = root[x]
            return x

        for va, vb in pairs:
            ra, rb = find(va), find(vb)
            if ra != rb:
                root[ra] = rb
        groups: dict[int, list[int]] = {}
        for v in range(n_a):
            groups.setdefault(find(v), []).append(v)
        map_a: dict[int, int] = {}
        vertices: list[VertexId] = []
        for rep in sorted(groups, key=lambda r: min(groups[r])):
            new_id = len(vertices)
            members = groups[rep]
            label = next((a.vertices[m].label for m in members if a.vertices[m].label), None)
            vertices.append(VertexId(new_id, label))
            for m in members:
                map_a[m] = new_id
        map_b = map_a
        edges_src = [(a, map_a)]
    else:
        map_a = {v.index: v.index for v in a.vertices}
        map_b = {}
        glued = dict((vb, va) for va, vb in pairs)
        nxt = n_a
        for v in b.vertices:
            if v.index in glued:
                map_b[v.index] = glued[v.index]
            else:
                map_b[v.index] = nxt
                nxt += 1
        vertices = list(a.vertices)
        for v in b.vertices:
            if v.index not in glued:
                vertices.append(VertexId(map_b[v.index], v.label))
        # a glued vertex inherits a label when the surviving one has none
        for va, vb in pairs:
            if vertices[va].label is None and b.vertices[vb].label is not None:
                vertices[va] = VertexId(va, b.vertices[vb].label)
        edges_src = [(a, map_a), (b, map_b)]

    edges: list[Edge] = []
    collinear: list[CollinearConstraint] = []
    for src, vmap in edges_src:
        for e in src.edges:
            u, v = vmap[e.u], vmap[e.v]
            if u == v:
                raise LinkageError("gluing created a self-loop")
            edges.append(Edge(u, v, e.length))
        for c in src.collinear:
            collinear.append(
                CollinearConstraint(vmap[c.a], vmap[c.b], vmap[c.c], c.r, c.s)
            )

    marking: list[tuple[int, complex]] = []
    mark_img: dict[int, complex] = {}
    for src, vmap in edges_src:
        for w, z in src.marking:
            nw = vmap[w]
            if nw in mark_img:
                if abs(mark_img[nw] - z) > STRUCT_TOL:
                    raise MarkingImageMismatch(
                        f"vertex {nw} inherits images {mark_img[nw]} and {z}"
                    )
                continue
            mark_img[nw] = z
            marking.append((nw, z))

    based = None
    if a.based_edge is not None:
        based = (map_a[a.based_edge[0]], map_a[a.based_edge[1]])
    elif b is not None and b.based_edge is not None:
        based = (map_b[b.based_edge[0]], map_b[b.based_edge[1]])

    merged = assemble(_relabel(vertices), edges, collinear, marking, based)
    return merged, map_a, map_b


def fiber_sum(a: AbstractLinkage, b: AbstractLinkage, glue: GlueMap) -> AbstractLinkage:
    """Disjoint union of two linkages with vertices identified along the glue map."""
    merged, _, _ = _merge_graphs(a, b, glue.pairs)
    return merged


def self_fiber_sum(a: AbstractLinkage, glue: GlueMap) -> AbstractLinkage:
    """Identify vertex pairs within one linkage."""
    merged, _, _ = _merge_graphs(a, None, glue.pairs)
    return merged


def _check_disk_containment(inner: Disk, outer: Disk, what: str) -> None:
    (ic, ir), (oc, orr) = inner, outer
    if math.isinf(orr):
        return
    if math.isinf(ir) or abs(ic - oc) + ir > orr * (1.0 + 1e-12) + 1e-12:
        raise RangeEscapesDomain(
            f"{what}: disk({ic}, {ir:g}) escapes certified disk({oc}, {orr:g}); "
            "expand the outer block's domain first"
        )


def compose_functional(
    a: FunctionalLinkage,
    b: FunctionalLinkage,
    glue: dict[int, int] | Sequence[tuple[int, int]],
    requested_disks: Optional[Sequence[Disk]] = None,
) -> FunctionalLinkage:
    """Feed b's outputs into a subset of a's inputs (composition h = f_a o g_b).

    ``glue`` maps input vertices of ``a`` to output vertices of ``b``; several
    inputs may consume the same output.  The certified range of each glued
    output must land inside the matching certified disk of ``a``, otherwise
    RangeEscapesDomain is raised.  Inputs of the result are b's inputs
    followed by a's unglued inputs; sym_order multiplies.
    """
    pairs = list(glue.items()) if isinstance(glue, dict) else list(glue)
    gdict = dict(pairs)
    if len(gdict) != len(pairs):
        raise LinkageError("glue map must be injective on sources")
    a_pos = {v: i for i, v in enumerate(a.inputs)}
    b_out = {q: j for j, q in enumerate(b.outputs)}
    for va, qb in pairs:
        if va not in a_pos:
            raise LinkageError(f"{va} is not an input vertex of the outer block")
        if qb not in b_out:
            raise LinkageError(f"{qb} is not an output vertex of the inner block")
    pairs.sort(key=lambda p: a_pos[p[0]])

    full = len(gdict) == len(a.inputs)
    if full:
        field_tag = b.field_tag
    else:
        if a.field_tag != b.field_tag:
            raise LinkageError("cannot mix real and complex blocks in a partial composition")
        field_tag = a.field_tag

    m_b = len(b.inputs)
    if requested_disks is not None:
        if len(requested_disks) != m_b + len(a.inputs) - len(pairs):
            raise LinkageError("requested disk count does not match composed arity")
        b_disks = tuple(requested_disks[:m_b])
        for want, have in zip(b_disks, b.coord_disks):
            _check_disk_containment(want, have, "requested input region")
        leftover = list(requested_disks[m_b:])
        kept_in = [v for v in a.inputs if v not in gdict]
        for want, v in zip(leftover, kept_in):
            _check_disk_containment(
                want, a.coord_disks[a_pos[v]], "requested input region"
            )
    else:
        b_disks = b.coord_disks
        leftover = [a.coord_disks[a_pos[v]] for v in a.inputs if v not in gdict]

    out_disks = b.range_disks(b_disks)
    for va, qb in pairs:
        _check_disk_containment(
            out_disks[b_out[qb]], a.coord_disks[a_pos[va]],
            f"range of inner output {qb}",
        )

    merged, map_a, map_b = _merge_graphs(a.linkage, b.linkage, pairs)

    kept = [v for v in a.inputs if v not in gdict]
    inputs = tuple(map_b[v] for v in b.inputs) + tuple(map_a[v] for v in kept)
    outputs = tuple(map_a[q] for q in a.outputs)
    input_map = {a_pos[v]: m_b + i for i, v in enumerate(kept)}

    prog = PlacementProgram(
        b.placement.remap(map_b).steps
        + a.placement.remap(
            map_a,
            bit_shift=b.placement.n_bits,
            input_map=input_map,
            drop_inputs=set(gdict),
        ).steps,
        a.placement.n_bits + b.placement.n_bits,
    )

    exprs = None
    if a.exprs is not None and b.exprs is not None:
        mapping: dict[int, PolyExpr] = {}
        for p, v in enumerate(a.inputs):
            if v in gdict:
                mapping[p] = b.exprs[b_out[gdict[v]]]
            else:
                mapping[p] = Var(input_map[p])
        exprs = tuple(substitute(e, mapping) for e in a.exprs)

    glued_positions = [(a_pos[va], b_out[qb]) for va, qb in pairs]
    kept_positions = [a_pos[v] for v in kept]

    def range_fn(disks):
        bpart = tuple(disks[:m_b])
        rest = list(disks[m_b:])
        outs = b.range_disks(bpart)
        a_disks: list[Disk] = [None] * len(a.inputs)
        for p, j in glued_positions:
            a_disks[p] = outs[j]
        for i, p in enumerate(kept_positions):
            a_disks[p] = rest[i]
        return a.range_disks(tuple(a_disks))

    return FunctionalLinkage(
        linkage=merged,
        inputs=inputs,
        outputs=outputs,
        field_tag=field_tag,
        coord_disks=tuple(b_disks) + tuple(leftover),
        placement=prog,
        wall_circles=(),
        exprs=exprs,
        range_fn=range_fn,
        params={"kind": "composition"},
        parallelograms=tuple(
            tuple(map_a[v] for v in quad) for quad in a.parallelograms
        )
        + tuple(tuple(map_b[v] for v in quad) for quad in b.parallelograms),
    )


def restrict_equal_inputs(a: FunctionalLinkage, v: int, w: int) -> FunctionalLinkage:
    """Identify two input vertices: restrict f to the hyperplane x_v = x_w.

    The symmetry group (and hence sym_order) is unchanged.  Requires the
    certified disks of the two coordinates to overlap, otherwise the
    diagonal slice of the certified region is empty.
    """
    if v == w or v not in a.inputs or w not in a.inputs:
        raise LinkageError("need two distinct input vertices")
    pv, pw = a.inputs.index(v), a.inputs.index(w)
    if pv > pw:
        v, w = w, v
        pv, pw = pw, pv
    (cv, rv), (cw, rw) = a.coord_disks[pv], a.coord_disks[pw]
    d = abs(cv - cw)
    if d >= rv + rw:
        raise EmptySlice(
            f"certified disks of the two inputs are {d:g} apart (radii {rv:g}, {rw:g})"
        )
    if math.isinf(rv):
        new_disk = (cw, rw)
    elif math.isinf(rw):
        new_disk = (cv, rv)
    elif d <= abs(rv - rw):
        new_disk = (cv, rv) if rv <= rw else (cw, rw)
    else:
        t = (d + rv - rw) / 2.0
        new_disk = (cv + (cw - cv) * (t / d), (rv + rw - d) / 2.0)

    merged, vmap, _ = _merge_graphs(a.linkage, None, [(w, v)])
    kept = [u for u in a.inputs if u != w]
    input_map = {}
    for i, u in enumerate(a.inputs):
        if u == w:
            continue
        input_map[i] = kept.index(u)

    prog = a.placement.remap(vmap, input_map=input_map, drop_inputs={w})

    exprs = None
    if a.exprs is not None:
        mapping = {i: Var(input_map[i]) for i in input_map}
        mapping[pw] = Var(input_map[pv])
        exprs = tuple(substitute(e, mapping) for e in a.exprs)

    disks = [a.coord_disks[i] for i, u in enumerate(a.inputs) if u != w]
    disks[input_map[pv]] = new_disk

    def range_fn(dsk):
        expanded = []
        for i, u in enumerate(a.inputs):
            if u == w:
                expanded.append(dsk[input_map[pv]])
            else:
                expanded.append(dsk[input_map[i]])
        return a.range_disks(tuple(expanded))

    return FunctionalLinkage(
        linkage=merged,
        inputs=tuple(vmap[u] for u in kept),
        outputs=tuple(vmap[q] for q in a.outputs),
        field_tag=a.field_tag,
        coord_disks=tuple(disks),
        placement=prog,
        wall_circles=(),
        exprs=exprs,
        range_fn=range_fn,
        params={"kind": "restriction"},
        parallelograms=tuple(tuple(vmap[u] for u in quad) for quad in a.parallelograms),
    )


def close_outputs(
    a: FunctionalLinkage, targets: Sequence[complex]
) -> ClosedFunctionalLinkage:
    """Glue each output to a marked vertex carrying the requested image.

    Admissible inputs of the closed linkage are exactly those where
    f(x) = targets; the input map restricted there remains a sym_order-fold
    covering.  Whether the admissible set is nonempty cannot be checked here
    and is verified downstream by actually finding realizations.
    """
    if len(targets) != len(a.outputs):
        raise LinkageError("one target per output required")
    image = list(a.linkage.marking)
    pairs = []
    for q, z in zip(a.outputs, targets):
        z = complex(z)
        hit = next((w for w, zw in image if abs(zw - z) <= STRUCT_TOL and w != q), None)
        if hit is None:
            if any(w == q and abs(zw - z) <= STRUCT_TOL for w, zw in image):
                continue  # output already pinned at the target
            raise UnknownTarget(f"no marked vertex carries the image {z}")
        pairs.append((q, hit))

    if not pairs:
        vmap = {v.index: v.index for v in a.linkage.vertices}
        merged = a.linkage
    else:
        merged, vmap, _ = _merge_graphs(a.linkage, None, pairs)
    return ClosedFunctionalLinkage(
        linkage=merged,
        inputs=tuple(vmap[v] for v in a.inputs),
        field_tag=a.field_tag,
        coord_disks=a.coord_disks,
        targets=tuple(complex(z) for z in targets),
        source=a,
        vmap=vmap,
        glued=tuple(pairs),
    )


def with_anchor(a: FunctionalLinkage, value: complex) -> FunctionalLinkage:
    """Adjoin an isolated marked vertex (used as a closing target)."""
    n = a.linkage.n_vertices()
    linkage = assemble(
        list(a.linkage.vertices) + [VertexId(n, None)],
        a.linkage.edges,
        a.linkage.collinear,
        list(a.linkage.marking) + [(n, complex(value))],
        a.linkage.based_edge,
    )
    prog = PlacementProgram(
        a.placement.steps + (FixedStep(n, complex(value)),), a.placement.n_bits
    )
    return a.with_(linkage=linkage, placement=prog)


def basify(linkage: AbstractLinkage) -> tuple[AbstractLinkage, int]:
    """Replace the marking by a based unit segment plus bracing.

    Adjoins the segment [v1 v2] pinned to 0 and 1.  Marked vertices whose
    image coincides with another pinned point are identified outright; a
    real-image vertex is pinned by a single collinearity constraint along
    the base line (the degenerate-triangle convention, which keeps the
    Jacobian full rank where edge braces would be tangential); a non-real
    vertex is braced by edges to v1, v2 and to every other non-real vertex.
    Returns the based linkage and the covering degree: 1 when every marked
    image is real, otherwise 2 (realizations come in conjugate pairs).
    """
    based, degree, _, _, _ = _basify_maps(linkage)
    return based, degree


def _basify_maps(linkage: AbstractLinkage):
    if not linkage.marking:
        raise LinkageError("basify needs a nonempty marking")
    n = linkage.n_vertices()
    vertices = list(linkage.vertices)
    labels = {v.label for v in vertices if v.label}
    v1 = n
    vertices.append(VertexId(v1, None if "v1" in labels else "v1"))
    v2 = n + 1
    vertices.append(VertexId(v2, None if "v2" in labels else "v2"))

    pinned: list[tuple[int, complex]] = [(v1, 0j), (v2, 1 + 0j)] + [
        (w, z) for w, z in linkage.marking
    ]

    parent = {w: w for w, _ in pinned}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    img = dict(pinned)
    items = [w for w, _ in pinned]
    for i, wa in enumerate(items):
        for wb in items[i + 1 :]:
            if abs(img[wa] - img[wb]) <= STRUCT_TOL:
                parent[find(wb)] = find(wa)

    vmap = {v.index: v.index for v in linkage.vertices}
    vmap[v1], vmap[v2] = v1, v2
    for w in items:
        vmap[w] = find(w)

    # compact the surviving ids
    survivors = sorted({vmap[v] for v in vmap})
    compact = {old: i for i, old in enumerate(survivors)}
    vmap = {v: compact[r] for v, r in vmap.items()}
    new_vertices = []
    for old in survivors:
        group = [v for v in range(n + 2) if v in parent and find(v) == old] or [old]
        label = next(
            (vertices[g].label for g in sorted(group) if vertices[g].label), None
        ) or vertices[old].label
        new_vertices.append(VertexId(compact[old], label))

    edges = []
    for e in linkage.edges:
        u, v = vmap[e.u], vmap[e.v]
        if u == v:
            raise LinkageError("basify identification created a self-loop")
        edges.append(Edge(u, v, e.length))
    collinear = [
        CollinearConstraint(vmap[c.a], vmap[c.b], vmap[c.c], c.r, c.s)
        for c in linkage.collinear
    ]

    nv1, nv2 = vmap[v1], vmap[v2]
    edges.append(Edge(nv1, nv2, 1.0))

    reps: dict[int, complex] = {}
    for w, z in pinned:
        reps.setdefault(vmap[w], z)
    complex_reps = []
    for w in sorted(reps):
        z = reps[w]
        if w in (nv1, nv2):
            continue
        if abs(z.imag) <= STRUCT_TOL:
            x = z.real
            if 0.0 < x < 1.0:
                collinear.append(CollinearConstraint(nv1, w, nv2, 1.0 - x, x))
            elif x > 1.0:
                collinear.append(CollinearConstraint(nv1, nv2, w, (x - 1.0) / x, 1.0 / x))
            else:  # x < 0
                collinear.append(
                    CollinearConstraint(w, nv1, nv2, 1.0 / (1.0 - x), -x / (1.0 - x))
                )
        else:
            edges.append(Edge(w, nv1, abs(z)))
            edges.append(Edge(w, nv2, abs(z - 1.0)))
            complex_reps.append((w, z))
    for i, (wa, za) in enumerate(complex_reps):
        for wb, zb in complex_reps[i + 1 :]:
            edges.append(Edge(wa, wb, abs(za - zb)))

    degree = 1 if all(abs(z.imag) <= STRUCT_TOL for _, z in linkage.marking) else 2
    based = assemble(
        _relabel(new_vertices),
        edges,
        collinear,
        [(nv1, 0j), (nv2, 1 + 0j)],
        (nv1, nv2),
    )
    return based, degree, vmap, nv1, nv2


def basify_functional(f: FunctionalLinkage) -> tuple[FunctionalLinkage, int]:
    """basify applied to a functional linkage, keeping the placement valid.

    Formerly marked vertices keep their pinning placement steps; with
    covering degree 1 (all real images) every realization agrees with them.
    """
    based, degree, vmap, nv1, nv2 = _basify_maps(f.linkage)
    prog = PlacementProgram(
        (FixedStep(nv1, 0j), FixedStep(nv2, 1 + 0j)) + f.placement.remap(vmap).steps,
        f.placement.n_bits,
    )
    out = f.with_(
        linkage=based,
        inputs=tuple(vmap[v] for v in f.inputs),
        outputs=tuple(vmap[q] for q in f.outputs),
        placement=prog,
        parallelograms=tuple(tuple(vmap[u] for u in quad) for quad in f.parallelograms),
    )
    return out, degree
