"""Linkage data model: metric graphs with pinned vertices, realizations, residuals.

A linkage is a graph with a positive length on every edge.  A realization
places each vertex in the plane (represented as a complex number) so that
every edge is drawn at its prescribed length.  Degenerate triangles (a hole
drilled in the middle of a bar) are stored as collinearity constraints
instead of two edge lengths; this is what keeps the constraint Jacobian
well conditioned at flat configurations.

All values are immutable after construction; every operation here is a pure
function, so residual evaluation is safe to fan out across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Global tolerances used across the package.
STRUCT_TOL = 1e-12     # structural equality (lengths, marked images)
CONSTRAINT_TOL = 1e-9  # a realization is accepted when max residual is below this
FUNCTIONAL_RTOL = 1e-6  # end-to-end relative error for compiled linkages


class LinkageError(Exception):
    """Base class for every error raised by this package."""


class SelfLoop(LinkageError):
    pass


class NonPositiveLength(LinkageError):
    pass


class DuplicateMarking(LinkageError):
    pass


class UnknownVertex(LinkageError):
    pass


class MissingVertexPosition(LinkageError):
    pass


@dataclass(frozen=True)
class VertexId:
    """A vertex: its index is the identity, the label is for humans."""

    index: int
    label: Optional[str] = None


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float


@dataclass(frozen=True)
class CollinearConstraint:
    """phi(b) = r*phi(a) + s*phi(c) with r + s = 1, both in (0, 1).

    Replaces the two short-edge equations of a degenerate triangle: b is a
    hole in the bar [ac] at distance s*len(ac) from a and r*len(ac) from c.
    """

    a: int
    b: int
    c: int
    r: float
    s: float


@dataclass(frozen=True)
class AbstractLinkage:
    """Metric graph with marked (pinned) vertices and an optional based edge."""

    vertices: tuple[VertexId, ...]
    edges: tuple[Edge, ...]
    collinear: tuple[CollinearConstraint, ...]
    marking: tuple[tuple[int, complex], ...] = ()
    based_edge: Optional[tuple[int, int]] = None

    def n_vertices(self) -> int:
        return len(self.vertices)

    def labels(self) -> dict[int, str]:
        return {v.index: v.label for v in self.vertices if v.label}

    def _arrays(self):
        """Cached index arrays for vectorized residual/Jacobian evaluation."""
        cached = self.__dict__.get("_arr")
        if cached is None:
            e_u = np.array([e.u for e in self.edges], dtype=np.intp)
            e_v = np.array([e.v for e in self.edges], dtype=np.intp)
            e_l = np.array([e.length for e in self.edges], dtype=float)
            c_a = np.array([c.a for c in self.collinear], dtype=np.intp)
            c_b = np.array([c.b for c in self.collinear], dtype=np.intp)
            c_c = np.array([c.c for c in self.collinear], dtype=np.intp)
            c_r = np.array([c.r for c in self.collinear], dtype=float)
            c_s = np.array([c.s for c in self.collinear], dtype=float)
            m_v = np.array([m[0] for m in self.marking], dtype=np.intp)
            m_z = np.array([m[1] for m in self.marking], dtype=complex)
            cached = (e_u, e_v, e_l, c_a, c_b, c_c, c_r, c_s, m_v, m_z)
            object.__setattr__(self, "_arr", cached)
        return cached

    def n_residual_rows(self) -> int:
        return len(self.edges) + 2 * len(self.collinear) + 2 * len(self.marking)


@dataclass(frozen=True)
class Realization:
    """Assignment of plane points (complex numbers) to all vertices."""

    positions: dict[int, complex]

    def as_array(self, linkage: AbstractLinkage) -> np.ndarray:
        try:
            return np.array(
                [self.positions[v.index] for v in linkage.vertices], dtype=complex
            )
        except KeyError as exc:
            raise MissingVertexPosition(f"vertex {exc.args[0]} has no position") from exc


def assemble(
    vertices: Sequence[VertexId],
    edges: Sequence[Edge],
    collinear: Sequence[CollinearConstraint] = (),
    marking: Sequence[tuple[int, complex]] = (),
    based_edge: Optional[tuple[int, int]] = None,
) -> AbstractLinkage:
    """Validate and freeze a linkage.

    Rejects self-loops, non-positive lengths, duplicate marked vertices and
    references to vertices that do not exist.
    """
    vertices = sorted(vertices, key=lambda v: v.index)
    ids = {v.index for v in vertices}
    if len(ids) != len(vertices):
        raise UnknownVertex("vertex indices must be unique")
    if vertices and (vertices[0].index != 0 or vertices[-1].index != len(vertices) - 1):
        raise UnknownVertex("vertex indices must cover 0..n-1")
    labels = [v.label for v in vertices if v.label is not None]
    if len(labels) != len(set(labels)):
        raise UnknownVertex("vertex labels must be unique when present")

    for e in edges:
        if e.u == e.v:
            raise SelfLoop(f"edge {e.u}-{e.v} connects a vertex to itself")
        if not (e.length > 0):
            raise NonPositiveLength(f"edge {e.u}-{e.v} has length {e.length}")
        if e.u not in ids or e.v not in ids:
            raise UnknownVertex(f"edge {e.u}-{e.v} references a missing vertex")

    for c in collinear:
        for w in (c.a, c.b, c.c):
            if w not in ids:
                raise UnknownVertex(f"collinear constraint references missing vertex {w}")
        if len({c.a, c.b, c.c}) != 3:
            raise UnknownVertex("collinear constraint vertices must be distinct")
        if not (0.0 < c.r < 1.0 and 0.0 < c.s < 1.0):
            raise NonPositiveLength("collinear weights must lie in (0, 1)")
        if abs(c.r + c.s - 1.0) > STRUCT_TOL:
            raise NonPositiveLength("collinear weights must sum to 1")

    seen = set()
    for w, _z in marking:
        if w not in ids:
            raise UnknownVertex(f"marked vertex {w} is not in the graph")
        if w in seen:
            raise DuplicateMarking(f"vertex {w} marked twice")
        seen.add(w)

    if based_edge is not None:
        bu, bv = based_edge
        if bu not in ids or bv not in ids:
            raise UnknownVertex("based edge references a missing vertex")
        if not any({e.u, e.v} == {bu, bv} for e in edges):
            raise UnknownVertex("based edge is not an edge of the graph")

    return AbstractLinkage(
        vertices=tuple(vertices),
        edges=tuple(edges),
        collinear=tuple(collinear),
        marking=tuple((w, complex(z)) for w, z in marking),
        based_edge=based_edge,
    )


def residual(linkage: AbstractLinkage, phi: Realization) -> tuple[float, np.ndarray]:
    """Constraint residual vector and its max absolute entry.

    Rows: per edge ``|phi(u)-phi(v)| - len``; per collinearity the two real
    components of ``phi(b) - r*phi(a) - s*phi(c)``; per marked vertex the two
    components of ``phi(w) - z``.  Edge rows use length, not squared length,
    so residual magnitudes stay comparable across edges whose lengths differ
    by large factors.
    """
    pos = phi.as_array(linkage)
    vec = residual_from_positions(linkage, pos)
    max_abs = float(np.max(np.abs(vec))) if vec.size else 0.0
    return max_abs, vec


def residual_from_positions(linkage: AbstractLinkage, pos: np.ndarray) -> np.ndarray:
    e_u, e_v, e_l, c_a, c_b, c_c, c_r, c_s, m_v, m_z = linkage._arrays()
    parts = []
    if e_u.size:
        parts.append(np.abs(pos[e_u] - pos[e_v]) - e_l)
    if c_a.size:
        dev = pos[c_b] - c_r * pos[c_a] - c_s * pos[c_c]
        parts.append(np.column_stack([dev.real, dev.imag]).ravel())
    if m_v.size:
        dev = pos[m_v] - m_z
        parts.append(np.column_stack([dev.real, dev.imag]).ravel())
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


@dataclass
class ValidationReport:
    """Report-only structural diagnostics; never rejects a linkage."""

    connected: bool
    component_count: int
    marked_component_ok: bool
    metric_violations: list[str] = field(default_factory=list)
    marking_conflicts: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return (
            self.connected
            and self.marked_component_ok
            and not self.metric_violations
            and not self.marking_conflicts
        )


def validate(linkage: AbstractLinkage) -> ValidationReport:
    """Connectivity, triangle-inequality flags and marking consistency.

    Triangle-inequality violations are allowed (a 1,1,3 triangle is a legal
    linkage with an empty realization set) and are only reported.
    """
    n = linkage.n_vertices()
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        parent[find(x)] = find(y)

    adj: dict[int, dict[int, float]] = {v.index: {} for v in linkage.vertices}
    for e in linkage.edges:
        union(e.u, e.v)
        adj[e.u][e.v] = e.length
        adj[e.v][e.u] = e.length
    for c in linkage.collinear:
        union(c.a, c.b)
        union(c.b, c.c)

    roots = {find(v.index) for v in linkage.vertices}
    component_count = len(roots)
    connected = component_count <= 1

    marked_roots = {find(w) for w, _ in linkage.marking}
    if linkage.based_edge:
        marked_roots.add(find(linkage.based_edge[0]))
    marked_component_ok = component_count <= 1 or (
        len(marked_roots) == component_count if marked_roots else False
    )

    violations = []
    idx = sorted(adj)
    for i in idx:
        for j in adj[i]:
            if j <= i:
                continue
            for k in adj[j]:
                if k <= j or k not in adj[i]:
                    continue
                a, b, c = adj[i][j], adj[j][k], adj[i][k]
                if a > b + c + STRUCT_TOL or b > a + c + STRUCT_TOL or c > a + b + STRUCT_TOL:
                    violations.append(
                        f"triangle {i}-{j}-{k} violates the metric "
                        f"({a:g}, {b:g}, {c:g}); realization set may be empty there"
                    )

    conflicts = []
    image = dict(linkage.marking)
    for e in linkage.edges:
        if e.u in image and e.v in image:
            d = abs(image[e.u] - image[e.v])
            if abs(d - e.length) > CONSTRAINT_TOL:
                conflicts.append(
                    f"edge {e.u}-{e.v} has length {e.length:g} but marked images "
                    f"are {d:g} apart"
                )
    if linkage.based_edge:
        bu, bv = linkage.based_edge
        if bu in image and bv in image:
            if abs(image[bu]) > CONSTRAINT_TOL:
                conflicts.append("based vertex v1 is not marked at the origin")

    notes = []
    if not connected:
        notes.append(f"{component_count} connected components")
    return ValidationReport(
        connected=connected,
        component_count=component_count,
        marked_component_ok=marked_component_ok,
        metric_violations=violations,
        marking_conflicts=conflicts,
        notes=notes,
    )


class LinkageBuilder:
    """Mutable accumulator used by the block constructors."""

    def __init__(self):
        self.vertices: list[VertexId] = []
        self.edges: list[Edge] = []
        self.collinear: list[CollinearConstraint] = []
        self.marking: list[tuple[int, complex]] = []
        self.based_edge: Optional[tuple[int, int]] = None

    def vertex(self, label: Optional[str] = None) -> int:
        idx = len(self.vertices)
        self.vertices.append(VertexId(idx, label))
        return idx

    def edge(self, u: int, v: int, length: float) -> None:
        self.edges.append(Edge(u, v, float(length)))

    def collinear_point(self, a: int, b: int, c: int, r: float, s: float) -> None:
        self.collinear.append(CollinearConstraint(a, b, c, float(r), float(s)))

    def mark(self, v: int, z: complex) -> None:
        self.marking.append((v, complex(z)))

    def midpoint(self, a: int, c: int, label: Optional[str] = None) -> int:
        b = self.vertex(label)
        self.collinear_point(a, b, c, 0.5, 0.5)
        return b

    def rigid_parallelogram(
        self,
        p: int,
        q: int,
        s: int,
        r: int,
        bar_len: float,
        strut_len: float,
        prefix: str = "",
        m_pq: Optional[int] = None,
        m_sr: Optional[int] = None,
    ) -> tuple[int, int]:
        """Rigidified parallelogram enforcing phi(p) - phi(q) = phi(s) - phi(r).

        Bars [pq] and [sr] (equal length, with midpoint holes m1, m2), struts
        [ps], [qr] and [m1 m2] of equal length.  The midpoint bracing kills
        the antiparallelogram and point-degenerate components.  Passing an
        existing midpoint reuses a bar shared with another parallelogram
        instead of duplicating it.
        """
        if m_pq is None:
            m_pq = self.midpoint(p, q, f"{prefix}m1" if prefix else None)
            self.edge(p, q, bar_len)
        if m_sr is None:
            m_sr = self.midpoint(s, r, f"{prefix}m2" if prefix else None)
            self.edge(s, r, bar_len)
        self.edge(p, s, strut_len)
        self.edge(q, r, strut_len)
        self.edge(m_pq, m_sr, strut_len)
        return m_pq, m_sr

    def build(self) -> AbstractLinkage:
        return assemble(
            self.vertices, self.edges, self.collinear, self.marking, self.based_edge
        )


def format_real(x: float) -> str:
    """Serialize a real with 17 significant digits (exact double round-trip)."""
    if x != x or math.isinf(x):
        raise ValueError("cannot serialize non-finite real")
    if x == 0.0:
        return "0"  # fold -0.0, which JSON would reload as integer zero
    return format(float(x), ".17g")
