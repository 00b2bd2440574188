"""Constructors for the elementary functional blocks.

Each constructor takes the ball the caller wants certified, searches block
parameters until the ball clears every wall and quasiwall circle by a
conservative margin, and returns a FunctionalLinkage with a closed-form
placement program.  Parameters never change the function a block computes,
only its usable domain, so different instances of the same block may carry
different edge lengths.

Blocks built here:

* translator       z -> z + b (input E) or z -> z - b (input F)
* pantograph       lambda*z, z/lambda, -z; the public constructor returns the
                   modified version (pantograph between two translators) so
                   any ball, including one containing 0, can be certified
* adder            z + w, modified the same way, germ movable anywhere
* inversor         t^2 / conj(z), the rigidified Peaucellier cell with a hook
* squarer          z^2 via 1/(conj(z)-1/2) - 1/(conj(z)+1/2) = 1/(conj(z)^2-1/4)
* multiplier       z*w = ((z+w)^2 - z^2 - w^2)/2
* straight line    the based inclusion R^m -> C^m
* conjugator       z -> conj(z): a rigidified rhombus riding two straight-line
                   tracks, shifted by translators
* constants        edgeless linkage whose outputs are pinned
"""

from __future__ import annotations

import math

from .core import LinkageBuilder, LinkageError
from .compose import compose_functional, restrict_equal_inputs
from .functional import (
    BadCircle,
    Ball,
    BallMeetsInversionCircle,
    COMPLEX,
    Disk,
    DomainAnnulus,
    FunctionalLinkage,
    REAL,
    UncoverableBall,
    ball_to_disks,
    clearance_margin,
    disk_clears_circle,
    disk_inside_annulus,
)
from .placement import (
    AffineStep,
    CircleStep,
    FixedStep,
    InputStep,
    LineCircleStep,
    PlacementProgram,
)
from .poly import Add, Conj, Const, Mul, Neg, Scale, Var

FWD = "fwd"
BWD = "bwd"
SCALE = "scale"
DIV = "div"
NEGATE = "negate"

SEARCH_ITERATIONS = 60

# Germ radius of the squarer around the origin; fixed by the inversion-circle
# clearances of its three internal inversors (inputs shifted by +-1/2 must
# stay away from |u| = 1, and 1/(conj(z)^2 - 1/4) away from it as well).
SQUARER_GERM_RADIUS = 0.15


def _as_disks(ball, m: int) -> tuple[Disk, ...]:
    if isinstance(ball, Ball):
        disks = ball_to_disks(ball)
    elif isinstance(ball, tuple) and len(ball) == 2 and not isinstance(ball[0], tuple):
        disks = ((complex(ball[0]), float(ball[1])),)
    else:
        disks = tuple((complex(c), float(r)) for c, r in ball)
    if len(disks) != m:
        raise LinkageError(f"expected a ball in {m} coordinate(s), got {len(disks)}")
    for _, r in disks:
        if not (r > 0):
            raise LinkageError("ball radius must be positive")
    return disks


def disk_ball(center: complex, radius: float) -> Ball:
    return Ball((complex(center),), float(radius))


# ---------------------------------------------------------------------------
# translator


def translator_annulus(s: float, t: float) -> DomainAnnulus:
    return DomainAnnulus(0j, s - t, s + t)


def _translator_circles(b: complex, s: float, t: float, offset: complex) -> tuple[BadCircle, ...]:
    beta = b / abs(b)
    return (
        BadCircle(0, offset, s - t, "wall"),
        BadCircle(0, offset, s + t, "wall"),
        BadCircle(0, offset + s * beta, t, "quasiwall"),
        BadCircle(0, offset - s * beta, t, "quasiwall"),
        BadCircle(0, offset + t * beta, s, "quasiwall"),
        BadCircle(0, offset - t * beta, s, "quasiwall"),
    )


def translator_block(
    b: complex, direction: str, s: float, t: float, disk: Disk, prefix: str = ""
) -> FunctionalLinkage:
    """Two chained rigidified parallelograms; no parameter search."""
    if abs(b) == 0:
        raise LinkageError("translation by zero has no linkage")
    if not s > t > 0:
        raise LinkageError("translator needs s > t > 0")
    lb = LinkageBuilder()
    A = lb.vertex(prefix + "A")
    B = lb.vertex(prefix + "B")
    C = lb.vertex(prefix + "C")
    D = lb.vertex(prefix + "D")
    E = lb.vertex(prefix + "E")
    F = lb.vertex(prefix + "F")
    m1, m2 = lb.rigid_parallelogram(A, B, C, D, abs(b), s, prefix=prefix + "p1.")
    _, m3 = lb.rigid_parallelogram(C, D, E, F, abs(b), t, prefix=prefix + "p2.", m_pq=m2)
    lb.mark(A, 0j)
    lb.mark(B, b)
    linkage = lb.build()

    steps = [FixedStep(A, 0j), FixedStep(B, complex(b))]
    if direction == FWD:
        steps += [InputStep(E, 0), AffineStep(F, ((1.0, E), (1.0, B), (-1.0, A)))]
        inputs, outputs = (E,), (F,)
        offset = 0j
        expr = Add(Var(0), Const(complex(b)))
    else:
        steps += [InputStep(F, 0), AffineStep(E, ((1.0, F), (-1.0, B), (1.0, A)))]
        inputs, outputs = (F,), (E,)
        offset = complex(b)
        expr = Add(Var(0), Const(-complex(b)))
    steps += [
        CircleStep(C, A, s, E, t, 0),
        AffineStep(D, ((1.0, C), (1.0, B), (-1.0, A))),
        AffineStep(m1, ((0.5, A), (0.5, B))),
        AffineStep(m2, ((0.5, C), (0.5, D))),
        AffineStep(m3, ((0.5, E), (0.5, F))),
    ]
    return FunctionalLinkage(
        linkage=linkage,
        inputs=inputs,
        outputs=outputs,
        field_tag=COMPLEX,
        coord_disks=(disk,),
        placement=PlacementProgram(tuple(steps), 1),
        wall_circles=_translator_circles(b, s, t, offset),
        exprs=(expr,),
        params={
            "kind": "translator_fwd" if direction == FWD else "translator_bwd",
            "b": complex(b),
            "s": s,
            "t": t,
        },
        parallelograms=((A, B, C, D), (C, D, E, F)),
    )


def make_translator(b: complex, direction: str, ball, prefix: str = "") -> FunctionalLinkage:
    """Translator certified on the requested ball.

    Fwd computes z + b with input E (its domain annulus is centered at 0, so
    a ball containing 0 is uncoverable); Bwd computes z - b with input F
    (annulus centered at b).  The search fixes the annulus gap from the
    ball's clearance of the bad point and doubles the arm length s until the
    ball clears all six wall/quasiwall circles.
    """
    b = complex(b)
    if abs(b) == 0:
        raise LinkageError("translation by zero has no linkage")
    if direction not in (FWD, BWD):
        raise LinkageError(f"unknown translator direction {direction!r}")
    (center, radius) = _as_disks(ball, 1)[0]
    margin = clearance_margin(radius)
    offset = 0j if direction == FWD else b
    c = center - offset
    if abs(c) <= radius + 2 * margin:
        raise UncoverableBall(
            "ball contains the translator's excluded point "
            f"({'0' if direction == FWD else 'b'}); it is outside every domain annulus"
        )
    beta = b / abs(b)
    m_min = abs(c) - radius
    disk = (center, radius)
    for frac in (2.0, 4.0, 8.0, 16.0):
        delta = m_min / frac
        s = 2.0 * max(abs(c) + radius, abs(b), 1.0)
        for _ in range(SEARCH_ITERATIONS):
            t = s - delta
            if t == s:
                break  # the gap fell below rounding; growing s further is noise
            ok = (
                t > 0
                and disk_inside_annulus((c, radius), 0j, s - t, s + t, margin)
                and all(
                    disk_clears_circle((c, radius), q, rho, margin)
                    for q, rho in (
                        (s * beta, t),
                        (-s * beta, t),
                        (t * beta, s),
                        (-t * beta, s),
                    )
                )
            )
            if ok:
                return translator_block(b, direction, s, t, disk, prefix)
            s *= 2.0
    raise UncoverableBall("translator parameter search exhausted")


# ---------------------------------------------------------------------------
# pantograph


def pantograph_block(
    mode: str, lam: float, s: float, t: float, disk: Disk, prefix: str = ""
) -> FunctionalLinkage:
    """The rigidified pantograph with one choice of marking and input/output.

    Geometry: bars [AB] (length s) and [BG] (length t) carry holes C and E at
    the 1/lambda points; BCDE closes into a rigidified parallelogram, forcing
    phi(D) - phi(A) = (phi(G) - phi(A))/lambda.
    """
    if mode == NEGATE:
        lam = 2.0
    if not lam > 1.0:
        raise LinkageError("pantograph ratio must exceed 1")
    if s <= 0 or t <= 0 or s == t:
        raise LinkageError("pantograph needs positive s != t")
    w_in = (lam - 1.0) / lam
    w_out = 1.0 / lam
    lb = LinkageBuilder()
    A = lb.vertex(prefix + "A")
    B = lb.vertex(prefix + "B")
    C = lb.vertex(prefix + "C")
    D = lb.vertex(prefix + "D")
    E = lb.vertex(prefix + "E")
    G = lb.vertex(prefix + "G")
    m1 = lb.vertex(prefix + "m1")
    m2 = lb.vertex(prefix + "m2")
    lb.edge(A, B, s)
    lb.edge(B, G, t)
    lb.edge(E, D, s * (lam - 1.0) / lam)
    lb.edge(C, D, t / lam)
    lb.edge(m1, m2, t / lam)
    lb.collinear_point(A, C, B, w_in, w_out)   # C on bar [AB]
    lb.collinear_point(B, E, G, w_in, w_out)   # E on bar [BG]
    lb.collinear_point(C, m1, B, 0.5, 0.5)
    lb.collinear_point(E, m2, D, 0.5, 0.5)

    if mode == SCALE:
        lb.mark(A, 0j)
        inputs, outputs = (D,), (G,)
        head = [FixedStep(A, 0j), InputStep(D, 0),
                AffineStep(G, ((lam, D), (-(lam - 1.0), A)))]
        expr = Scale(lam, Var(0))
        inner, outer = abs(s - t) / lam, (s + t) / lam
    elif mode == DIV:
        lb.mark(A, 0j)
        inputs, outputs = (G,), (D,)
        head = [FixedStep(A, 0j), InputStep(G, 0),
                AffineStep(D, ((w_out, G), (w_in, A)))]
        expr = Scale(1.0 / lam, Var(0))
        inner, outer = abs(s - t), s + t
    elif mode == NEGATE:
        lb.mark(D, 0j)
        inputs, outputs = (A,), (G,)
        head = [FixedStep(D, 0j), InputStep(A, 0),
                AffineStep(G, ((2.0, D), (-1.0, A)))]
        expr = Neg(Var(0))
        inner, outer = abs(s - t) / lam, (s + t) / lam
    else:
        raise LinkageError(f"unknown pantograph mode {mode!r}")

    steps = head + [
        CircleStep(B, A, s, G, t, 0),
        AffineStep(C, ((w_in, A), (w_out, B))),
        AffineStep(E, ((w_in, B), (w_out, G))),
        AffineStep(m1, ((0.5, C), (0.5, B))),
        AffineStep(m2, ((0.5, E), (0.5, D))),
    ]
    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=inputs,
        outputs=outputs,
        field_tag=COMPLEX,
        coord_disks=(disk,),
        placement=PlacementProgram(tuple(steps), 1),
        wall_circles=(
            BadCircle(0, 0j, inner, "wall"),
            BadCircle(0, 0j, outer, "wall"),
        ),
        exprs=(expr,),
        params={"kind": f"pantograph_{mode}", "lambda": lam, "s": s, "t": t},
        parallelograms=((C, B, D, E),),
    )


def _size_raw_pantograph(mode: str, lam: float, disk: Disk, prefix: str) -> FunctionalLinkage:
    center, radius = disk
    if abs(center) <= radius:
        raise UncoverableBall("raw pantograph domain is an annulus around 0")
    inner = (abs(center) - radius) / 2.0
    outer = 2.0 * (abs(center) + radius)
    dom_scale = lam if mode in (SCALE, NEGATE) else 1.0
    if mode == NEGATE:
        dom_scale = 2.0
    s = dom_scale * (outer + inner) / 2.0
    t = dom_scale * (outer - inner) / 2.0
    return pantograph_block(mode, lam, s, t, disk, prefix)


def make_pantograph(mode: str, lam, ball, prefix: str = "") -> FunctionalLinkage:
    """Modified pantograph: covers any requested ball, including around 0.

    Uses the identities lambda*z = lambda*(z+b) - lambda*b,
    z/lambda = (z+b)/lambda - b/lambda and -z = -(z+b) + b with a real b
    larger than the ball, so the raw pantograph only ever works away from
    the puncture at 0.  sym_order is 8 (one bit per translator, one for the
    pantograph itself).
    """
    if mode == NEGATE:
        lam = 2.0
    lam = float(lam)
    (center, radius) = _as_disks(ball, 1)[0]
    b = 2.0 * (abs(center) + radius) + 1.0
    t_in = make_translator(-b, BWD, disk_ball(center, radius), prefix=prefix + "ti.")
    mid = (center + b, radius)
    raw = _size_raw_pantograph(mode, lam, mid, prefix + "p.")
    if mode == SCALE:
        out_mid = (lam * mid[0], lam * mid[1])
        t_out = make_translator(-lam * b, FWD, disk_ball(*out_mid), prefix=prefix + "to.")
    elif mode == DIV:
        out_mid = (mid[0] / lam, mid[1] / lam)
        t_out = make_translator(-b / lam, FWD, disk_ball(*out_mid), prefix=prefix + "to.")
    else:
        out_mid = (-mid[0], mid[1])
        t_out = make_translator(b, FWD, disk_ball(*out_mid), prefix=prefix + "to.")
    inner = compose_functional(raw, t_in, {raw.inputs[0]: t_in.outputs[0]})
    whole = compose_functional(t_out, inner, {t_out.inputs[0]: inner.outputs[0]})
    if mode == SCALE:
        expr = Scale(lam, Var(0))
    elif mode == DIV:
        expr = Scale(1.0 / lam, Var(0))
    else:
        expr = Neg(Var(0))
    return whole.with_(
        exprs=(expr,),
        range_fn=None,
        params={"kind": f"pantograph_{mode}_modified", "lambda": lam, "b": b},
    )


# ---------------------------------------------------------------------------
# adder


def raw_adder_block(t: float, disks, prefix: str = "") -> FunctionalLinkage:
    """Pantograph with lambda = 2, s = 2t, inputs A and G, output D.

    Computes (z + w)/2 on the domain t <= |z - w| <= 3t; no fixed vertices.
    """
    d1, d2 = _as_disks(disks, 2)
    margin = clearance_margin(max(d1[1], d2[1]))
    diff = (d1[0] - d2[0], d1[1] + d2[1])
    if not disk_inside_annulus(diff, 0j, t, 3.0 * t, margin):
        raise UncoverableBall(
            f"|z - w| over the ball is not inside the adder annulus ({t:g}, {3 * t:g})"
        )
    lam, s = 2.0, 2.0 * t
    lb = LinkageBuilder()
    A = lb.vertex(prefix + "A")
    B = lb.vertex(prefix + "B")
    C = lb.vertex(prefix + "C")
    D = lb.vertex(prefix + "D")
    E = lb.vertex(prefix + "E")
    G = lb.vertex(prefix + "G")
    m1 = lb.vertex(prefix + "m1")
    m2 = lb.vertex(prefix + "m2")
    lb.edge(A, B, s)
    lb.edge(B, G, t)
    lb.edge(E, D, s / 2.0)
    lb.edge(C, D, t / 2.0)
    lb.edge(m1, m2, t / 2.0)
    lb.collinear_point(A, C, B, 0.5, 0.5)
    lb.collinear_point(B, E, G, 0.5, 0.5)
    lb.collinear_point(C, m1, B, 0.5, 0.5)
    lb.collinear_point(E, m2, D, 0.5, 0.5)
    steps = (
        InputStep(A, 0),
        InputStep(G, 1),
        AffineStep(D, ((0.5, A), (0.5, G))),
        CircleStep(B, A, s, G, t, 0),
        AffineStep(C, ((0.5, A), (0.5, B))),
        AffineStep(E, ((0.5, B), (0.5, G))),
        AffineStep(m1, ((0.5, C), (0.5, B))),
        AffineStep(m2, ((0.5, E), (0.5, D))),
    )
    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=(A, G),
        outputs=(D,),
        field_tag=COMPLEX,
        coord_disks=(d1, d2),
        placement=PlacementProgram(steps, 1),
        wall_circles=(
            BadCircle((0, 1), 0j, t, "wall"),
            BadCircle((0, 1), 0j, 3.0 * t, "wall"),
        ),
        exprs=(Scale(0.5, Add(Var(0), Var(1))),),
        params={"kind": "adder_raw", "t": t, "s": s},
        parallelograms=((C, B, D, E),),
    )


def make_adder(ball, prefix: str = "") -> FunctionalLinkage:
    """Full adder z + w certified on any requested ball in C^2.

    Splits (z + w)/2 = ((z + b) + (w - b))/2 with a real b that pushes the
    working difference to 2b-ish, well inside the raw adder's annulus, then
    doubles with a modified pantograph.
    """
    d1, d2 = _as_disks(ball, 2)
    (c1, r1), (c2, r2) = d1, d2
    big_r = max(r1, r2)
    v = c1 - c2
    tau = 3.0 * big_r + abs(v) + 1.0 + abs(c1) + abs(c2)
    b0 = tau - v.real / 2.0
    t_z = make_translator(-b0, BWD, disk_ball(c1, r1), prefix=prefix + "tz.")
    t_w = make_translator(b0, BWD, disk_ball(c2, r2), prefix=prefix + "tw.")
    q = raw_adder_block(tau, ((c1 + b0, r1), (c2 - b0, r2)), prefix=prefix + "q.")
    half = compose_functional(q, t_w, {q.inputs[1]: t_w.outputs[0]})
    half = compose_functional(half, t_z, {q.inputs[0]: t_z.outputs[0]})
    p2 = make_pantograph(
        SCALE, 2.0, disk_ball((c1 + c2) / 2.0, (r1 + r2) / 2.0), prefix=prefix + "p2."
    )
    whole = compose_functional(p2, half, {p2.inputs[0]: half.outputs[0]})
    return whole.with_(
        exprs=(Add(Var(0), Var(1)),),
        range_fn=None,
        params={"kind": "adder", "t": tau, "b": b0},
        coord_disks=(d1, d2),
    )


# ---------------------------------------------------------------------------
# inversor


def inversor_rho(a: float, r: float, eps: float) -> float:
    """Inner domain radius of the hooked Peaucellier cell."""
    if not (a > r > eps > 0):
        raise LinkageError("inversor needs a > r > eps > 0")
    return math.sqrt(a * a - eps * eps) - math.sqrt(r * r - eps * eps)


def inversion_disk(t: float, disk: Disk) -> Disk:
    """Exact image of a disk (not containing 0) under z -> t^2/conj(z)."""
    c, r = disk
    den = abs(c) ** 2 - r * r
    if den <= 0:
        raise LinkageError("disk contains the inversion center")
    return (t * t * c / den, t * t * r / den)


def inversor_block(t: float, a: float, eps: float, disk: Disk, prefix: str = "") -> FunctionalLinkage:
    """Rigidified Peaucellier cell with hook; computes t^2/conj(z).

    The square ABCD has side r = sqrt(a^2 - t^2); the hook E keeps A and C
    apart (|AE| - |CE| = 2*eps), which removes the collapsed components and
    makes the input map a 4-fold covering (Sym = Z2 x Z2).
    """
    if not a > t > 0:
        raise LinkageError("inversor arm must exceed the inversion radius")
    r = math.sqrt(a * a - t * t)
    if not (a > r):
        pass  # a > r automatic since t > 0
    if not (r > eps > 0):
        raise LinkageError("inversor needs r > eps > 0")
    hook_short = a + r
    hook_long = a + r + 2.0 * eps
    lb = LinkageBuilder()
    F = lb.vertex(prefix + "F")
    A = lb.vertex(prefix + "A")
    B = lb.vertex(prefix + "B")
    C = lb.vertex(prefix + "C")
    D = lb.vertex(prefix + "D")
    E = lb.vertex(prefix + "E")
    m1, m2 = lb.rigid_parallelogram(A, B, D, C, r, r, prefix=prefix + "sq.")
    lb.edge(F, A, a)
    lb.edge(F, C, a)
    lb.edge(A, E, hook_long)
    lb.edge(C, E, hook_short)
    lb.mark(F, 0j)
    rho = inversor_rho(a, r, eps)
    steps = (
        FixedStep(F, 0j),
        InputStep(B, 0),
        CircleStep(A, F, a, B, r, 0),
        CircleStep(C, F, a, B, r, 0, flip=True),
        AffineStep(D, ((1.0, A), (1.0, C), (-1.0, B))),
        CircleStep(E, A, hook_long, C, hook_short, 1),
        AffineStep(m1, ((0.5, A), (0.5, B))),
        AffineStep(m2, ((0.5, D), (0.5, C))),
    )

    def range_fn(disks):
        return (inversion_disk(t, disks[0]),)

    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=(B,),
        outputs=(D,),
        field_tag=COMPLEX,
        coord_disks=(disk,),
        placement=PlacementProgram(steps, 2),
        wall_circles=(
            BadCircle(0, 0j, rho, "wall"),
            BadCircle(0, 0j, t * t / rho, "wall"),
            BadCircle(0, 0j, t, "quasiwall"),
        ),
        exprs=None,
        range_fn=range_fn,
        params={"kind": "inversor", "t": t, "a": a, "r": r, "eps": eps, "rho": rho},
        parallelograms=((A, B, D, C),),
    )


def make_inversor(t: float, ball, prefix: str = "") -> FunctionalLinkage:
    """Inversor certified on the requested ball.

    The inversion circle |z| = t is a quasiwall that no parameter choice can
    move, so a ball touching it is rejected outright; everything else is
    reachable by growing the arm length a (the domain annulus
    [rho, t^2/rho] widens on both sides as a grows).
    """
    t = float(t)
    if not t > 0:
        raise LinkageError("inversion radius must be positive")
    (center, radius) = _as_disks(ball, 1)[0]
    margin = clearance_margin(radius)
    if not disk_clears_circle((center, radius), 0j, t, margin):
        raise BallMeetsInversionCircle(
            f"ball touches the immovable quasiwall |z| = {t:g}"
        )
    if abs(center) <= radius:
        raise UncoverableBall("ball contains 0, which inversion excludes")
    eps = t / 100.0
    a = 2.0 * t
    for _ in range(SEARCH_ITERATIONS):
        r = math.sqrt(a * a - t * t)
        if r > eps:
            rho = inversor_rho(a, r, eps)
            if disk_inside_annulus((center, radius), 0j, rho, t * t / rho, margin):
                return inversor_block(t, a, eps, (center, radius), prefix)
        a *= 2.0
    raise UncoverableBall("inversor parameter search exhausted")


# ---------------------------------------------------------------------------
# squarer and multiplier


def _square_disk(disk: Disk) -> Disk:
    c, r = disk
    return (c * c, 2.0 * abs(c) * r + r * r)


def _squarer_germ(prefix: str = "") -> FunctionalLinkage:
    """Squarer for the germ at 0, certified on B_0.15(0)."""
    r0 = SQUARER_GERM_RADIUS
    d0 = disk_ball(0j, r0)
    t_m = make_translator(0.5, BWD, d0, prefix=prefix + "tm.")    # z - 1/2
    t_p = make_translator(-0.5, BWD, d0, prefix=prefix + "tp.")   # z + 1/2
    dm, dp = (-0.5 + 0j, r0), (0.5 + 0j, r0)
    j_a = make_inversor(1.0, disk_ball(*dm), prefix=prefix + "ja.")
    j_b = make_inversor(1.0, disk_ball(*dp), prefix=prefix + "jb.")
    dmi = inversion_disk(1.0, dm)
    dpi = inversion_disk(1.0, dp)
    neg = make_pantograph(NEGATE, None, disk_ball(*dpi), prefix=prefix + "n.")
    dpn = (-dpi[0], dpi[1])
    add = make_adder(Ball((dmi[0], dpn[0]), max(dmi[1], dpn[1])), prefix=prefix + "a.")
    dsum = (dmi[0] + dpn[0], dmi[1] + dpn[1])
    j_c = make_inversor(1.0, disk_ball(*dsum), prefix=prefix + "jc.")
    dinv = inversion_disk(1.0, dsum)
    t_q = make_translator(0.25, FWD, disk_ball(*dinv), prefix=prefix + "tq.")  # z + 1/4

    left = compose_functional(j_a, t_m, {j_a.inputs[0]: t_m.outputs[0]})
    right = compose_functional(j_b, t_p, {j_b.inputs[0]: t_p.outputs[0]})
    right = compose_functional(neg, right, {neg.inputs[0]: right.outputs[0]})
    both = compose_functional(add, right, {add.inputs[1]: right.outputs[0]})
    both = compose_functional(both, left, {add.inputs[0]: left.outputs[0]})
    both = restrict_equal_inputs(both, both.inputs[0], both.inputs[1])
    out = compose_functional(j_c, both, {j_c.inputs[0]: both.outputs[0]})
    out = compose_functional(t_q, out, {t_q.inputs[0]: out.outputs[0]})
    return out.with_(
        exprs=(Mul(Var(0), Var(0)),),
        range_fn=None,
        coord_disks=((0j, r0),),
        params={"kind": "squarer_germ"},
    )


def make_squarer(ball, prefix: str = "") -> FunctionalLinkage:
    """z -> z^2 on any ball: the germ squarer wrapped in scaling pantographs.

    For a ball not inside the germ radius, z^2 = mu*(lambda*z)^2 with
    lambda = germ_radius / (2 * reach) and mu = 1/lambda^2 (expansion of
    domain applied to the homogeneous square).
    """
    (center, radius) = _as_disks(ball, 1)[0]
    reach = abs(center) + radius
    if reach <= SQUARER_GERM_RADIUS * 0.999:
        germ = _squarer_germ(prefix=prefix)
        return germ.with_(params={"kind": "squarer", "lambda": 1.0})
    lam = SQUARER_GERM_RADIUS / (2.0 * reach)
    pre = make_pantograph(DIV, 1.0 / lam, disk_ball(center, radius), prefix=prefix + "pre.")
    germ = _squarer_germ(prefix=prefix)
    mid = (lam * center, lam * radius)
    post = make_pantograph(SCALE, 1.0 / (lam * lam), disk_ball(*_square_disk(mid)),
                           prefix=prefix + "post.")
    out = compose_functional(germ, pre, {germ.inputs[0]: pre.outputs[0]})
    out = compose_functional(post, out, {post.inputs[0]: out.outputs[0]})
    return out.with_(
        exprs=(Mul(Var(0), Var(0)),),
        range_fn=None,
        coord_disks=((center, radius),),
        params={"kind": "squarer", "lambda": lam},
    )


def make_multiplier(ball, prefix: str = "") -> FunctionalLinkage:
    """z*w = ((z+w)^2 + (-(z^2 + w^2)))/2 from squarers, adders, pantographs."""
    d1, d2 = _as_disks(ball, 2)
    (c1, r1), (c2, r2) = d1, d2
    dsum = (c1 + c2, r1 + r2)
    a1 = make_adder(Ball((c1, c2), max(r1, r2)), prefix=prefix + "a1.")
    s1 = make_squarer(disk_ball(*dsum), prefix=prefix + "s1.")
    s2 = make_squarer(disk_ball(c1, r1), prefix=prefix + "s2.")
    s3 = make_squarer(disk_ball(c2, r2), prefix=prefix + "s3.")
    dq1, dq2, dq3 = _square_disk(dsum), _square_disk(d1), _square_disk(d2)
    a3 = make_adder(Ball((dq2[0], dq3[0]), max(dq2[1], dq3[1])), prefix=prefix + "a3.")
    dq23 = (dq2[0] + dq3[0], dq2[1] + dq3[1])
    neg = make_pantograph(NEGATE, None, disk_ball(*dq23), prefix=prefix + "n.")
    dneg = (-dq23[0], dq23[1])
    a2 = make_adder(Ball((dq1[0], dneg[0]), max(dq1[1], dneg[1])), prefix=prefix + "a2.")
    dfin = (dq1[0] + dneg[0], dq1[1] + dneg[1])
    half = make_pantograph(DIV, 2.0, disk_ball(*dfin), prefix=prefix + "h.")

    left = compose_functional(s1, a1, {s1.inputs[0]: a1.outputs[0]})
    right = compose_functional(a3, s3, {a3.inputs[1]: s3.outputs[0]})
    right = compose_functional(right, s2, {a3.inputs[0]: s2.outputs[0]})
    right = compose_functional(neg, right, {neg.inputs[0]: right.outputs[0]})
    top = compose_functional(a2, right, {a2.inputs[1]: right.outputs[0]})
    top = compose_functional(top, left, {a2.inputs[0]: left.outputs[0]})
    # inputs now (z, w, z', w'); identify the duplicated variables
    top = restrict_equal_inputs(top, top.inputs[0], top.inputs[2])
    top = restrict_equal_inputs(top, top.inputs[1], top.inputs[2])
    out = compose_functional(half, top, {half.inputs[0]: top.outputs[0]})
    return out.with_(
        exprs=(Mul(Var(0), Var(1)),),
        range_fn=None,
        coord_disks=(d1, d2),
        params={"kind": "multiplier"},
    )


# ---------------------------------------------------------------------------
# straight line


def make_straight_line(m: int, half_width: float, prefix: str = "") -> FunctionalLinkage:
    """Based linkage whose m input vertices can only move on the real axis.

    Each copy is a Peaucellier cell whose far vertex D rides a circle through
    the inversion center, so the input B traces the line through 0; the
    certified interval is (-sqrt(3)/2 * t, sqrt(3)/2 * t) per coordinate,
    bounded by the inversion-circle quasiwall.  All copies share the based
    segment and the two off-axis anchors F, G.
    """
    if m < 1:
        raise LinkageError("need at least one coordinate")
    half_width = float(half_width)
    if not half_width > 0:
        raise LinkageError("half width must be positive")
    t = 2.0 * half_width
    a = 2.5 * t
    r = math.sqrt(a * a - t * t)
    eps = t / 50.0
    rho = inversor_rho(a, r, eps)
    margin = clearance_margin(half_width)
    if not (math.sqrt(3.0) / 2.0 * t > half_width + margin):
        raise UncoverableBall("interval does not clear the inversion quasiwall")
    if not (rho + margin < t / 2.0):
        raise UncoverableBall("inner wall reaches the real axis")
    d_hi = math.hypot(half_width, t / 2.0)
    if not (d_hi < t * t / rho - margin):
        raise UncoverableBall("outer wall cuts the certified interval")

    lb = LinkageBuilder()
    v1 = lb.vertex(prefix + "v1")
    v2 = lb.vertex(prefix + "v2")
    F = lb.vertex(prefix + "F")
    G = lb.vertex(prefix + "G")
    lb.edge(v1, v2, 1.0)
    lb.edge(F, v1, t / 2.0)
    lb.edge(G, v1, t / 2.0)
    diag = math.sqrt(1.0 + t * t / 4.0)
    lb.edge(F, v2, diag)
    lb.edge(G, v2, diag)
    lb.edge(F, G, t)
    lb.mark(v1, 0j)
    lb.mark(v2, 1 + 0j)
    lb.based_edge = (v1, v2)

    steps = [
        FixedStep(v1, 0j),
        FixedStep(v2, 1 + 0j),
        CircleStep(F, v1, t / 2.0, v2, diag, 0),
        AffineStep(G, ((-1.0, F),)),
    ]
    inputs = []
    quads = []
    hook_long = a + r + 2.0 * eps
    hook_short = a + r
    for j in range(m):
        tag = f"{prefix}c{j}."
        B = lb.vertex(tag + "B")
        A = lb.vertex(tag + "A")
        C = lb.vertex(tag + "C")
        D = lb.vertex(tag + "D")
        E = lb.vertex(tag + "E")
        m1, m2 = lb.rigid_parallelogram(A, B, D, C, r, r, prefix=tag + "sq.")
        lb.edge(F, A, a)
        lb.edge(F, C, a)
        lb.edge(A, E, hook_long)
        lb.edge(C, E, hook_short)
        lb.edge(G, D, t)
        bit = 1 + 2 * j
        steps += [
            InputStep(B, j),
            CircleStep(A, F, a, B, r, bit),
            CircleStep(C, F, a, B, r, bit, flip=True),
            AffineStep(D, ((1.0, A), (1.0, C), (-1.0, B))),
            CircleStep(E, A, hook_long, C, hook_short, bit + 1),
            AffineStep(m1, ((0.5, A), (0.5, B))),
            AffineStep(m2, ((0.5, D), (0.5, C))),
        ]
        inputs.append(B)
        quads.append((A, B, D, C))

    outer_x = math.sqrt(max((t * t / rho) ** 2 - t * t / 4.0, 0.0))
    circles = []
    for j in range(m):
        circles.append(BadCircle(j, 0j, math.sqrt(3.0) / 2.0 * t, "quasiwall"))
        circles.append(BadCircle(j, 0j, outer_x, "wall"))
    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=tuple(inputs),
        outputs=tuple(inputs),
        field_tag=REAL,
        coord_disks=tuple((0j, half_width) for _ in range(m)),
        placement=PlacementProgram(tuple(steps), 1 + 2 * m),
        wall_circles=tuple(circles),
        exprs=tuple(Var(j) for j in range(m)),
        params={"kind": "straight_line", "m": m, "t": t, "a": a, "r": r, "eps": eps},
        parallelograms=tuple(quads),
    )


# ---------------------------------------------------------------------------
# conjugator


def _raw_conjugator(s: float, radius: float, prefix: str = "") -> FunctionalLinkage:
    """Conjugation germ at i*s: a rigidified rhombus with two corners on the
    real axis (each riding a straight-line track), certified on B_radius(i*s)."""
    t = 1.5 * s
    a = 2.5 * t
    r = math.sqrt(a * a - t * t)
    eps = t / 50.0
    side = math.sqrt(2.0) * s
    h1, h2 = 2.0 * s, 1.5 * s
    hook_long = a + r + 2.0 * eps
    hook_short = a + r

    lb = LinkageBuilder()
    v1 = lb.vertex(prefix + "v1")
    v2 = lb.vertex(prefix + "v2")
    F = lb.vertex(prefix + "F")
    G = lb.vertex(prefix + "G")
    P = lb.vertex(prefix + "P")
    Aq = lb.vertex(prefix + "A")
    Q = lb.vertex(prefix + "Q")
    Bq = lb.vertex(prefix + "B")
    H = lb.vertex(prefix + "H")
    lb.edge(v1, v2, 1.0)
    diag = math.sqrt(1.0 + t * t / 4.0)
    lb.edge(F, v1, t / 2.0)
    lb.edge(G, v1, t / 2.0)
    lb.edge(F, v2, diag)
    lb.edge(G, v2, diag)
    lb.edge(F, G, t)
    m1, m2 = lb.rigid_parallelogram(P, Aq, Bq, Q, side, side, prefix=prefix + "rh.")
    lb.edge(Aq, H, h1)
    lb.edge(Bq, H, h2)
    lb.mark(v1, 0j)
    lb.mark(v2, 1 + 0j)
    lb.based_edge = (v1, v2)

    steps = [
        FixedStep(v1, 0j),
        FixedStep(v2, 1 + 0j),
        CircleStep(F, v1, t / 2.0, v2, diag, 0),
        AffineStep(G, ((-1.0, F),)),
        InputStep(P, 0),
        LineCircleStep(Aq, v1, v2, P, side, 1, flip=True),
        LineCircleStep(Bq, v1, v2, P, side, 1),
        AffineStep(Q, ((1.0, Aq), (1.0, Bq), (-1.0, P))),
        AffineStep(m1, ((0.5, P), (0.5, Aq))),
        AffineStep(m2, ((0.5, Bq), (0.5, Q))),
        CircleStep(H, Aq, h1, Bq, h2, 2),
    ]
    quads = [(P, Aq, Bq, Q)]
    for j, X in enumerate((Aq, Bq)):
        tag = f"{prefix}c{j}."
        A = lb.vertex(tag + "A")
        C = lb.vertex(tag + "C")
        D = lb.vertex(tag + "D")
        E = lb.vertex(tag + "E")
        ma, mb = lb.rigid_parallelogram(A, X, D, C, r, r, prefix=tag + "sq.")
        lb.edge(F, A, a)
        lb.edge(F, C, a)
        lb.edge(A, E, hook_long)
        lb.edge(C, E, hook_short)
        lb.edge(G, D, t)
        bit = 3 + 2 * j
        steps += [
            CircleStep(A, F, a, X, r, bit),
            CircleStep(C, F, a, X, r, bit, flip=True),
            AffineStep(D, ((1.0, A), (1.0, C), (-1.0, X))),
            CircleStep(E, A, hook_long, C, hook_short, bit + 1),
            AffineStep(ma, ((0.5, A), (0.5, X))),
            AffineStep(mb, ((0.5, D), (0.5, C))),
        ]
        quads.append((A, X, D, C))

    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=(P,),
        outputs=(Q,),
        field_tag=COMPLEX,
        coord_disks=((1j * s, radius),),
        placement=PlacementProgram(tuple(steps), 7),
        wall_circles=(),
        exprs=(Conj(Var(0)),),
        params={"kind": "conjugator_raw", "scale": s, "t": t, "a": a, "r": r},
        parallelograms=tuple(quads),
    )


def make_conjugator(ball, prefix: str = "") -> FunctionalLinkage:
    """z -> conj(z) on any requested ball.

    The raw block conjugates near i*s; the input is shifted there by a
    translator (the one place translators use non-real b) and the output is
    shifted back: conj(z) = conj(z + d) - conj(d) with d = i*s - center.
    """
    (center, radius) = _as_disks(ball, 1)[0]
    margin = clearance_margin(radius)
    s = max(1.0, 9.0 * radius)
    found = None
    for _ in range(SEARCH_ITERATIONS):
        t = 1.5 * s
        a = 2.5 * t
        r = math.sqrt(a * a - t * t)
        eps = t / 50.0
        rho = inversor_rho(a, r, eps)
        side = math.sqrt(2.0) * s
        ymin, ymax = s - radius, s + radius
        ok = ymin > margin and ymax < side - margin and side * side > ymax * ymax
        if ok:
            amin = -radius + math.sqrt(side * side - ymax * ymax)
            amax = radius + math.sqrt(side * side - ymin * ymin)
            lo = 2.0 * math.sqrt(side * side - ymax * ymax)
            hi = 2.0 * math.sqrt(side * side - ymin * ymin)
            ok = (
                amin > margin
                and amax < math.sqrt(3.0) / 2.0 * t - margin
                and math.hypot(amin, t / 2.0) > rho + margin
                and math.hypot(amax, t / 2.0) < t * t / rho - margin
                and lo > 0.5 * s + margin           # hook separation |h1 - h2|
                and hi < 3.5 * s - margin           # hook reach h1 + h2
            )
        if ok:
            found = s
            break
        s *= 2.0
    if found is None:
        raise UncoverableBall("conjugator scale search exhausted")

    d = 1j * s - center
    t_in = make_translator(-d, BWD, disk_ball(center, radius), prefix=prefix + "ti.")
    raw = _raw_conjugator(s, radius, prefix=prefix + "c.")
    t_out = make_translator(1j * s + center.conjugate(), FWD,
                            disk_ball(-1j * s, radius), prefix=prefix + "to.")
    out = compose_functional(raw, t_in, {raw.inputs[0]: t_in.outputs[0]})
    out = compose_functional(t_out, out, {t_out.inputs[0]: out.outputs[0]})
    return out.with_(
        exprs=(Conj(Var(0)),),
        range_fn=None,
        coord_disks=((center, radius),),
        params={"kind": "conjugator", "scale": s},
    )


# ---------------------------------------------------------------------------
# constants, identity, triangle


def make_constant(values, m: int, prefix: str = "") -> FunctionalLinkage:
    """Edgeless linkage: m free inputs, outputs pinned at the given values."""
    values = tuple(complex(v) for v in values)
    lb = LinkageBuilder()
    inputs = tuple(lb.vertex(f"{prefix}P{j}") for j in range(m))
    outputs = tuple(lb.vertex(f"{prefix}K{j}") for j in range(len(values)))
    for q, v in zip(outputs, values):
        lb.mark(q, v)
    steps = tuple(InputStep(p, j) for j, p in enumerate(inputs)) + tuple(
        FixedStep(q, v) for q, v in zip(outputs, values)
    )
    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=inputs,
        outputs=outputs,
        field_tag=COMPLEX,
        coord_disks=tuple((0j, math.inf) for _ in range(m)),
        placement=PlacementProgram(steps, 0),
        exprs=tuple(Const(v) for v in values),
        params={"kind": "constant", "values": values},
    )


def identity_block(disk: Disk, prefix: str = "") -> FunctionalLinkage:
    """Single free vertex serving as both input and output (the map z -> z)."""
    lb = LinkageBuilder()
    p = lb.vertex(prefix + "P" if prefix else None)
    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=(p,),
        outputs=(p,),
        field_tag=COMPLEX,
        coord_disks=(disk,),
        placement=PlacementProgram((InputStep(p, 0),), 0),
        exprs=(Var(0),),
        params={"kind": "identity"},
    )


def make_triangle(l12: float, l13: float, l23: float, prefix: str = "") -> FunctionalLinkage:
    """Based triangle: no inputs, apex as output; two realizations when the
    lengths satisfy the strict triangle inequalities."""
    lb = LinkageBuilder()
    v1 = lb.vertex(prefix + "v1")
    v2 = lb.vertex(prefix + "v2")
    v3 = lb.vertex(prefix + "v3")
    lb.edge(v1, v2, l12)
    lb.edge(v1, v3, l13)
    lb.edge(v2, v3, l23)
    lb.mark(v1, 0j)
    lb.mark(v2, complex(l12))
    lb.based_edge = (v1, v2)
    steps = (
        FixedStep(v1, 0j),
        FixedStep(v2, complex(l12)),
        CircleStep(v3, v1, l13, v2, l23, 0),
    )
    return FunctionalLinkage(
        linkage=lb.build(),
        inputs=(),
        outputs=(v3,),
        field_tag=COMPLEX,
        coord_disks=(),
        placement=PlacementProgram(steps, 1),
        exprs=None,
        params={"kind": "triangle", "lengths": (l12, l13, l23)},
    )
