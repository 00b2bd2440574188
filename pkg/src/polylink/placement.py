"""Closed-form placement programs.

Every functional block knows how to place its vertices one step at a time:
pin a marked vertex, copy an input value, intersect two circles (one Z/2
branch bit per intersection), intersect a line with a circle, or take a
real-affine combination of already placed points.  A composed linkage's
program is the concatenation of its blocks' programs, so the branch-bit
string enumerates exactly the sheets of the input covering.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import LinkageError

TANGENCY_TOL = 1e-12


class NoIntersection(LinkageError):
    pass


class PlacementDegenerate(LinkageError):
    pass


def circle_intersect(c1: complex, r1: float, c2: complex, r2: float, branch: int) -> complex:
    """Intersection of circles (c1, r1) and (c2, r2).

    branch 0 returns the point to the left of the directed line c1 -> c2,
    branch 1 the point to the right.  A tangential pair (within 1e-12)
    yields the single touching point regardless of branch; circles farther
    than that from touching raise NoIntersection.
    """
    c1, c2 = complex(c1), complex(c2)
    d = abs(c2 - c1)
    if d <= TANGENCY_TOL:
        raise NoIntersection("concentric circles")
    if d > r1 + r2 + TANGENCY_TOL:
        raise NoIntersection(f"circles are disjoint (gap {d - r1 - r2:g})")
    if d < abs(r1 - r2) - TANGENCY_TOL:
        raise NoIntersection(f"one circle nests inside the other (gap {abs(r1 - r2) - d:g})")
    u = (c2 - c1) / d
    alpha = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    h_sq = r1 * r1 - alpha * alpha
    if h_sq <= 0.0:
        return c1 + alpha * u  # tangential within tolerance
    h = cmath.sqrt(h_sq).real
    side = 1.0 if branch == 0 else -1.0
    return c1 + alpha * u + side * h * (1j * u)


def circle_tangency_gap(c1: complex, r1: float, c2: complex, r2: float) -> float:
    """Distance from tangency; used to detect degenerate placements."""
    d = abs(complex(c2) - complex(c1))
    return min(abs(d - (r1 + r2)), abs(d - abs(r1 - r2)))


def line_circle_intersect(
    a: complex, b: complex, c: complex, r: float, branch: int
) -> complex:
    """Intersection of the line through a, b with circle (c, r).

    branch 0 is the solution earlier along the direction a -> b.
    """
    a, b, c = complex(a), complex(b), complex(c)
    d = b - a
    dd = abs(d)
    if dd <= TANGENCY_TOL:
        raise NoIntersection("line endpoints coincide")
    u = d / dd
    # param t along the unit direction from a
    w = c - a
    t0 = (w * u.conjugate()).real
    h = abs(w - t0 * u)
    disc = r * r - h * h
    if disc < -TANGENCY_TOL * max(1.0, r * r):
        raise NoIntersection("line misses the circle")
    if disc <= 0.0:
        return a + t0 * u
    root = disc ** 0.5
    t = t0 - root if branch == 0 else t0 + root
    return a + t * u


def line_circle_tangency_gap(a: complex, b: complex, c: complex, r: float) -> float:
    d = complex(b) - complex(a)
    dd = abs(d)
    if dd <= TANGENCY_TOL:
        return 0.0
    u = d / dd
    w = complex(c) - complex(a)
    t0 = (w * u.conjugate()).real
    h = abs(w - t0 * u)
    return abs(r - h)


@dataclass(frozen=True)
class FixedStep:
    v: int
    at: complex


@dataclass(frozen=True)
class InputStep:
    v: int
    k: int


@dataclass(frozen=True)
class CircleStep:
    v: int
    c1: int
    r1: float
    c2: int
    r2: float
    bit: int
    flip: bool = False


@dataclass(frozen=True)
class LineCircleStep:
    v: int
    a: int
    b: int
    c: int
    r: float
    bit: int
    flip: bool = False


@dataclass(frozen=True)
class AffineStep:
    v: int
    terms: tuple[tuple[float, int], ...]
    const: complex = 0j



@dataclass(frozen=True)
class PlacementProgram:
    steps: tuple
    n_bits: int

    def remap(self, vmap: dict[int, int], bit_shift: int = 0,
              input_map: Optional[dict[int, int]] = None,
              drop_inputs: Optional[set] = None) -> "PlacementProgram":
        """Rewrite vertex ids, shift branch-bit indices, renumber input slots.

        Steps whose target vertex appears in ``drop_inputs`` are removed
        (used when an input is glued onto another block's output and is
        therefore already placed).
        """
        out = []
        seen_fixed = set()
        for st in self.steps:
            if isinstance(st, FixedStep):
                v = vmap[st.v]
                if v in seen_fixed:
                    continue
                seen_fixed.add(v)
                out.append(FixedStep(v, st.at))
            elif isinstance(st, InputStep):
                if drop_inputs and st.v in drop_inputs:
                    continue
                k = st.k if input_map is None else input_map[st.k]
                out.append(InputStep(vmap[st.v], k))
            elif isinstance(st, CircleStep):
                out.append(CircleStep(vmap[st.v], vmap[st.c1], st.r1,
                                      vmap[st.c2], st.r2, st.bit + bit_shift, st.flip))
            elif isinstance(st, LineCircleStep):
                out.append(LineCircleStep(vmap[st.v], vmap[st.a], vmap[st.b],
                                          vmap[st.c], st.r, st.bit + bit_shift, st.flip))
            elif isinstance(st, AffineStep):
                out.append(AffineStep(vmap[st.v],
                                      tuple((c, vmap[w]) for c, w in st.terms), st.const))
            else:
                raise LinkageError(f"unknown placement step {st!r}")
        return PlacementProgram(tuple(out), self.n_bits)


def run_program(
    program: PlacementProgram,
    inputs: Sequence[complex],
    bits: Sequence[int],
    strict: bool = True,
) -> dict[int, complex]:
    """Execute a placement program and return vertex positions.

    With ``strict`` a circle intersection within 1e-12 of tangency raises
    PlacementDegenerate: branch choice is numerically meaningless there.
    """
    if len(bits) != program.n_bits:
        raise PlacementDegenerate(
            f"branch vector has {len(bits)} bits, program needs {program.n_bits}"
        )
    pos: dict[int, complex] = {}
    for st in program.steps:
        if isinstance(st, FixedStep):
            if st.v in pos:
                continue  # vertices merged by fiber sums share one pin
            pos[st.v] = st.at
        elif isinstance(st, InputStep):
            pos[st.v] = complex(inputs[st.k])
        elif isinstance(st, CircleStep):
            c1, c2 = pos[st.c1], pos[st.c2]
            if strict and circle_tangency_gap(c1, st.r1, c2, st.r2) <= TANGENCY_TOL:
                raise PlacementDegenerate(
                    f"circle intersection for vertex {st.v} is tangential"
                )
            b = bits[st.bit] ^ (1 if st.flip else 0)
            pos[st.v] = circle_intersect(c1, st.r1, c2, st.r2, b)
        elif isinstance(st, LineCircleStep):
            a, bpt, c = pos[st.a], pos[st.b], pos[st.c]
            if strict and line_circle_tangency_gap(a, bpt, c, st.r) <= TANGENCY_TOL:
                raise PlacementDegenerate(
                    f"line-circle intersection for vertex {st.v} is tangential"
                )
            b = bits[st.bit] ^ (1 if st.flip else 0)
            pos[st.v] = line_circle_intersect(a, bpt, c, st.r, b)
        elif isinstance(st, AffineStep):
            z = complex(st.const)
            for coef, w in st.terms:
                z += coef * pos[w]
            pos[st.v] = z
        else:
            raise LinkageError(f"unknown placement step {st!r}")
    return pos
