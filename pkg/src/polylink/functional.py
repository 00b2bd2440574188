"""Functional linkages: linkages with inputs, outputs and a certified domain.

A FunctionalLinkage wraps an abstract linkage with ordered input/output
vertices, the field it computes over, a placement program whose Z/2 branch
bits enumerate the sheets of the input covering (sym_order = 2^bits), and a
certified ball: a region proven, by conservative clearance from every wall
and quasiwall circle, to lie where the covering is locally trivial.

Certification bookkeeping is done with one disk per input coordinate; the
reported Euclidean ball (common radius, per-coordinate centers) is always
contained in the product of those disks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .core import AbstractLinkage, LinkageError
from .placement import PlacementProgram
from .poly import PolyExpr, range_disk

CLEAR_MARGIN_FLOOR = 1e-6

REAL = "real"
COMPLEX = "complex"

Disk = tuple[complex, float]


class UncoverableBall(LinkageError):
    pass


class BallMeetsInversionCircle(LinkageError):
    pass


@dataclass(frozen=True)
class Ball:
    """Euclidean ball in R^m or C^m; radius may be inf (whole space)."""

    center: tuple[complex, ...]
    radius: float

    def contains(self, point: Sequence[complex], slack: float = 0.0) -> bool:
        if math.isinf(self.radius):
            return True
        d2 = sum(abs(complex(p) - c) ** 2 for p, c in zip(point, self.center))
        return d2 <= (self.radius + slack) ** 2

    @property
    def arity(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class DomainAnnulus:
    center: complex
    inner: float
    outer: float


@dataclass(frozen=True)
class BadCircle:
    """A wall or quasiwall circle in one input coordinate.

    ``coord`` is an input index, or a pair (i, j) meaning the circle lives
    in the difference coordinate x_i - x_j.
    """

    coord: object
    center: complex
    radius: float
    kind: str  # "wall" | "quasiwall"


def clearance_margin(radius: float) -> float:
    return max(CLEAR_MARGIN_FLOOR, radius / 100.0)


def disks_contain(disks: Sequence[Disk], values: Sequence[complex], slack: float = 0.0) -> bool:
    if len(values) != len(disks):
        return False
    for v, (c, r) in zip(values, disks):
        if math.isinf(r):
            continue
        if abs(complex(v) - c) > r + slack:
            return False
    return True


def disk_clears_circle(disk: Disk, circle_center: complex, circle_radius: float,
                       margin: float) -> bool:
    """True when the closed disk stays strictly on one side of the circle."""
    c, r = disk
    return abs(abs(c - circle_center) - circle_radius) > r + margin


def disk_inside_annulus(disk: Disk, center: complex, inner: float, outer: float,
                        margin: float) -> bool:
    c, r = disk
    d = abs(c - center)
    return d - r > inner + margin and d + r < outer - margin


@dataclass(frozen=True)
class FunctionalLinkage:
    linkage: AbstractLinkage
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    field_tag: str
    coord_disks: tuple[Disk, ...]
    placement: PlacementProgram
    wall_circles: tuple[BadCircle, ...] = ()
    exprs: Optional[tuple[PolyExpr, ...]] = None
    range_fn: Optional[Callable] = field(default=None, repr=False, compare=False)
    params: dict = field(default_factory=dict, compare=False)
    parallelograms: tuple[tuple[int, int, int, int], ...] = ()
    report: object = field(default=None, repr=False, compare=False)

    @property
    def sym_order(self) -> int:
        return 1 << self.placement.n_bits

    @property
    def certified_ball(self) -> Ball:
        radius = min((r for _, r in self.coord_disks), default=math.inf)
        return Ball(tuple(c for c, _ in self.coord_disks), radius)

    @property
    def arity(self) -> int:
        return len(self.inputs)

    def range_disks(self, disks: Optional[Sequence[Disk]] = None) -> tuple[Disk, ...]:
        """Disks containing each output over the given (or certified) input disks."""
        if disks is None:
            disks = self.coord_disks
        if self.range_fn is not None:
            return tuple(self.range_fn(tuple(disks)))
        if self.exprs is None:
            raise LinkageError("block has no range information")
        return tuple(range_disk(e, disks) for e in self.exprs)

    def contains_input(self, values: Sequence[complex], slack: float = 0.0) -> bool:
        """Membership in the certified region (the per-coordinate disks)."""
        if len(values) != len(self.inputs):
            return False
        if self.field_tag == REAL:
            if any(abs(complex(v).imag) > 1e-9 for v in values):
                return False
        return disks_contain(self.coord_disks, values, slack)

    def with_(self, **kw) -> "FunctionalLinkage":
        return replace(self, **kw)


@dataclass(frozen=True)
class ClosedFunctionalLinkage:
    """A functional linkage whose outputs were glued to marked vertices.

    It keeps the input map but loses the output map; what remains is the
    membership constraint f(x) = targets on admissible inputs.  The open
    source linkage is retained for seeding placements.
    """

    linkage: AbstractLinkage
    inputs: tuple[int, ...]
    field_tag: str
    coord_disks: tuple[Disk, ...]
    targets: tuple[complex, ...]
    source: FunctionalLinkage
    vmap: dict  # source vertex id -> closed vertex id
    glued: tuple[tuple[int, int], ...]  # (output vertex, marked vertex) in source ids
    seed_hint: Optional[complex] = None

    @property
    def sym_order(self) -> int:
        return self.source.sym_order

    @property
    def certified_ball(self) -> Ball:
        radius = min((r for _, r in self.coord_disks), default=math.inf)
        return Ball(tuple(c for c, _ in self.coord_disks), radius)

    def constraint_error(self, values: Sequence[complex]) -> float:
        """max_j |f_j(x) - target_j| evaluated on the defining expressions."""
        if self.source.exprs is None:
            raise LinkageError("closed linkage has no defining expressions")
        from .poly import evaluate

        return max(
            abs(evaluate(e, values) - t)
            for e, t in zip(self.source.exprs, self.targets)
        )


def ball_to_disks(ball: Ball) -> tuple[Disk, ...]:
    return tuple((c, ball.radius) for c in ball.center)


def disks_to_ball(disks: Sequence[Disk]) -> Ball:
    radius = min((r for _, r in disks), default=math.inf)
    return Ball(tuple(c for c, _ in disks), radius)
