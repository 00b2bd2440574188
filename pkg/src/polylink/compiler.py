"""Compile polynomial expressions into functional linkages.

The walk is bottom-up over the expression tree: variables become free
passthrough vertices, constants become outputs of one shared pinned block
fed in as extra inputs (so coefficients are themselves inputs moving in a
small certified ball), additions become adders, products become multipliers
or squarers, real scalings become pantographs, and conjugations (curve path
only) become conjugator blocks.  Every block is sized for the conservative
disk bound of the values flowing through it, so a whole compilation is
certified on the requested ball by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .compose import (
    _merge_graphs,
    close_outputs,
    compose_functional,
    restrict_equal_inputs,
    basify_functional,
    with_anchor,
)
from .core import LinkageError, STRUCT_TOL, VertexId, assemble
from .elementary import (
    DIV,
    NEGATE,
    SCALE,
    disk_ball,
    identity_block,
    make_adder,
    make_conjugator,
    make_constant,
    make_multiplier,
    make_pantograph,
    make_squarer,
    make_straight_line,
)
from .functional import (
    Ball,
    ClosedFunctionalLinkage,
    Disk,
    FunctionalLinkage,
    UncoverableBall,
)
from .placement import InputStep, PlacementProgram
from .poly import (
    Add,
    Conj,
    Const,
    Mul,
    Neg,
    PolyExpr,
    Scale,
    Var,
    arity,
    evaluate,
    has_real_coefficients,
    homogeneous_parts,
    is_real_valued,
    monomials_to_expr,
    range_disk,
    substitute,
    to_monomials,
    uses_conj,
)


class CompileOverflow(LinkageError):
    pass


class NoSeedFound(LinkageError):
    pass


@dataclass(frozen=True)
class Stage:
    kind: str
    sym_bits: int
    disks: tuple
    params: dict = field(compare=False, default_factory=dict)


@dataclass
class CompileReport:
    stages: list
    total_sym_order: int
    ball: Ball

    @property
    def stage_sym_product(self) -> int:
        p = 1
        for s in self.stages:
            p *= 1 << s.sym_bits
        return p


def _normalize(expr: PolyExpr) -> PolyExpr:
    """Deterministic simplification: constant folding and Scale extraction."""
    if isinstance(expr, (Var, Const)):
        return expr
    if isinstance(expr, Add):
        l, r = _normalize(expr.left), _normalize(expr.right)
        if isinstance(l, Const) and isinstance(r, Const):
            return Const(l.value + r.value)
        if isinstance(l, Const) and l.value == 0:
            return r
        if isinstance(r, Const) and r.value == 0:
            return l
        return Add(l, r)
    if isinstance(expr, Neg):
        x = _normalize(expr.arg)
        if isinstance(x, Const):
            return Const(-x.value)
        if isinstance(x, Neg):
            return x.arg
        return Neg(x)
    if isinstance(expr, Scale):
        x = _normalize(expr.arg)
        if expr.factor == 0.0:
            return Const(0j)
        if isinstance(x, Const):
            return Const(expr.factor * x.value)
        if expr.factor == 1.0:
            return x
        if expr.factor == -1.0:
            return Neg(x)
        return Scale(expr.factor, x)
    if isinstance(expr, Mul):
        l, r = _normalize(expr.left), _normalize(expr.right)
        if isinstance(l, Const) and isinstance(r, Const):
            return Const(l.value * r.value)
        for c, other in ((l, r), (r, l)):
            if isinstance(c, Const):
                if c.value == 0:
                    return Const(0j)
                if c.value == 1:
                    return other
                if c.value.imag == 0.0:
                    return _normalize(Scale(c.value.real, other))
                return Mul(c, other)  # complex coefficient: goes through a multiplier
        return Mul(l, r)
    if isinstance(expr, Conj):
        x = _normalize(expr.arg)
        if isinstance(x, Const):
            return Const(x.value.conjugate())
        if isinstance(x, Conj):
            return x.arg
        return Conj(x)
    raise LinkageError(f"unknown expression node {expr!r}")


def _collect_constants(expr: PolyExpr, out: list) -> None:
    if isinstance(expr, Const):
        if expr.value not in out:
            out.append(expr.value)
        return
    if isinstance(expr, (Add, Mul)):
        _collect_constants(expr.left, out)
        _collect_constants(expr.right, out)
        return
    if isinstance(expr, (Neg, Scale, Conj)):
        _collect_constants(expr.arg, out)


def _lift_constants(expr: PolyExpr, values: list, m: int) -> PolyExpr:
    if isinstance(expr, Const):
        return Var(m + values.index(expr.value))
    if isinstance(expr, Add):
        return Add(_lift_constants(expr.left, values, m), _lift_constants(expr.right, values, m))
    if isinstance(expr, Mul):
        return Mul(_lift_constants(expr.left, values, m), _lift_constants(expr.right, values, m))
    if isinstance(expr, Neg):
        return Neg(_lift_constants(expr.arg, values, m))
    if isinstance(expr, Scale):
        return Scale(expr.factor, _lift_constants(expr.arg, values, m))
    if isinstance(expr, Conj):
        return Conj(_lift_constants(expr.arg, values, m))
    return expr


class _Compiler:
    def __init__(self, disks: tuple[Disk, ...], allow_conj: bool):
        self.disks = disks
        self.allow_conj = allow_conj
        self.counter = 0
        self.stages: list[Stage] = []

    def name(self) -> str:
        self.counter += 1
        return f"k{self.counter}."

    def track(self, block: FunctionalLinkage) -> FunctionalLinkage:
        self.stages.append(
            Stage(
                kind=str(block.params.get("kind", "block")),
                sym_bits=block.placement.n_bits,
                disks=block.coord_disks,
                params=dict(block.params),
            )
        )
        return block

    def rdisk(self, expr: PolyExpr) -> Disk:
        return range_disk(expr, self.disks)

    def dedupe(self, block, vars_order):
        while True:
            seen: dict[int, int] = {}
            dup = None
            for pos, var in enumerate(vars_order):
                if var in seen:
                    dup = (seen[var], pos)
                    break
                seen[var] = pos
            if dup is None:
                return block, vars_order
            p1, p2 = dup
            block = restrict_equal_inputs(block, block.inputs[p1], block.inputs[p2])
            vars_order = vars_order[:p2] + vars_order[p2 + 1 :]

    def build(self, node: PolyExpr):
        if isinstance(node, Var):
            blk = self.track(identity_block(self.disks[node.index], prefix=self.name()))
            return blk, [node.index]
        if isinstance(node, Const):
            raise LinkageError("constants must be lifted before building")
        if isinstance(node, Neg):
            inner, vo = self.build(node.arg)
            blk = self.track(
                make_pantograph(NEGATE, None, disk_ball(*self.rdisk(node.arg)), prefix=self.name())
            )
            return compose_functional(blk, inner, {blk.inputs[0]: inner.outputs[0]}), vo
        if isinstance(node, Scale):
            inner, vo = self.build(node.arg)
            out = inner
            cur = node.arg
            mag = abs(node.factor)
            if mag != 1.0:
                mode, lam = (SCALE, mag) if mag > 1.0 else (DIV, 1.0 / mag)
                blk = self.track(
                    make_pantograph(mode, lam, disk_ball(*self.rdisk(cur)), prefix=self.name())
                )
                out = compose_functional(blk, out, {blk.inputs[0]: out.outputs[0]})
                cur = Scale(mag, cur)
            if node.factor < 0:
                blk = self.track(
                    make_pantograph(NEGATE, None, disk_ball(*self.rdisk(cur)), prefix=self.name())
                )
                out = compose_functional(blk, out, {blk.inputs[0]: out.outputs[0]})
            return out, vo
        if isinstance(node, Add):
            bl, vl = self.build(node.left)
            br, vr = self.build(node.right)
            dl, dr = self.rdisk(node.left), self.rdisk(node.right)
            add = self.track(make_adder((dl, dr), prefix=self.name()))
            out = compose_functional(add, br, {add.inputs[1]: br.outputs[0]})
            out = compose_functional(out, bl, {add.inputs[0]: bl.outputs[0]})
            return self.dedupe(out, vl + vr)
        if isinstance(node, Mul):
            if node.left == node.right:
                inner, vo = self.build(node.left)
                sq = self.track(
                    make_squarer(disk_ball(*self.rdisk(node.left)), prefix=self.name())
                )
                return (
                    compose_functional(sq, inner, {sq.inputs[0]: inner.outputs[0]}),
                    vo,
                )
            bl, vl = self.build(node.left)
            br, vr = self.build(node.right)
            dl, dr = self.rdisk(node.left), self.rdisk(node.right)
            mult = self.track(make_multiplier((dl, dr), prefix=self.name()))
            out = compose_functional(mult, br, {mult.inputs[1]: br.outputs[0]})
            out = compose_functional(out, bl, {mult.inputs[0]: bl.outputs[0]})
            return self.dedupe(out, vl + vr)
        if isinstance(node, Conj):
            if not self.allow_conj:
                raise LinkageError("conjugation nodes are only allowed on the curve path")
            inner, vo = self.build(node.arg)
            cj = self.track(
                make_conjugator(disk_ball(*self.rdisk(node.arg)), prefix=self.name())
            )
            return compose_functional(cj, inner, {cj.inputs[0]: inner.outputs[0]}), vo
        raise LinkageError(f"unknown expression node {node!r}")


def _with_input_layout(block: FunctionalLinkage, vars_order, m: int, disks) -> FunctionalLinkage:
    """Reorder inputs to variable order, adding free vertices for unused vars."""
    if vars_order == list(range(m)):
        return block
    old_by_var = {v: block.inputs[i] for i, v in enumerate(vars_order)}
    vertices = list(block.linkage.vertices)
    extra_steps = []
    new_inputs = []
    for j in range(m):
        if j in old_by_var:
            new_inputs.append(old_by_var[j])
        else:
            nv = len(vertices)
            vertices.append(VertexId(nv, None))
            new_inputs.append(nv)
            extra_steps.append(InputStep(nv, j))
    linkage = assemble(
        vertices,
        block.linkage.edges,
        block.linkage.collinear,
        block.linkage.marking,
        block.linkage.based_edge,
    )
    input_map = {i: vars_order[i] for i in range(len(vars_order))}
    prog = block.placement.remap(
        {v.index: v.index for v in vertices}, input_map=input_map
    )
    prog = PlacementProgram(prog.steps + tuple(extra_steps), prog.n_bits)
    exprs = None
    if block.exprs is not None:
        mapping = {i: Var(vars_order[i]) for i in range(len(vars_order))}
        exprs = tuple(substitute(e, mapping) for e in block.exprs)
    inner_range = block.range_fn or (lambda d: tuple(range_disk(e, d) for e in block.exprs))

    def range_fn(dd):
        return inner_range(tuple(dd[v] for v in vars_order))

    return block.with_(
        linkage=linkage,
        inputs=tuple(new_inputs),
        coord_disks=tuple(disks),
        placement=prog,
        exprs=exprs,
        range_fn=range_fn,
    )


def _compile_core(expr: PolyExpr, centers, radius: float, allow_conj: bool):
    centers = tuple(complex(c) for c in centers)
    m = len(centers)
    if not radius > 0:
        raise LinkageError("radius must be positive")
    if arity(expr) > m:
        raise LinkageError(f"expression uses {arity(expr)} variables, only {m} centers given")
    norm = _normalize(expr)
    consts: list[complex] = []
    _collect_constants(norm, consts)
    lifted = _lift_constants(norm, consts, m) if consts else norm
    all_centers = centers + tuple(consts)
    disks = tuple((c, float(radius)) for c in all_centers)
    ctx = _Compiler(disks, allow_conj)
    try:
        block, vars_order = ctx.build(lifted)
        if consts:
            kblock = ctx.track(make_constant(consts, m, prefix="const."))
            glue = {}
            for pos, var in enumerate(vars_order):
                if var >= m:
                    glue[block.inputs[pos]] = kblock.outputs[var - m]
            block = compose_functional(block, kblock, glue)
            vars_order = list(range(m)) + [v for v in vars_order if v < m]
            block, vars_order = ctx.dedupe(block, vars_order)
        block = _with_input_layout(block, vars_order, m, disks[:m])
    except UncoverableBall as exc:
        raise CompileOverflow(f"block sizing failed: {exc}") from exc
    block = block.with_(exprs=(norm,), range_fn=None, params={"kind": "compiled"})
    report = CompileReport(
        stages=ctx.stages,
        total_sym_order=block.sym_order,
        ball=Ball(centers, float(radius)),
    )
    return block.with_(report=report)


def compile_complex(expr: PolyExpr, center, radius: float) -> FunctionalLinkage:
    """Functional linkage for a polynomial map over the ball B_radius(center).

    ``center`` is one complex number or a sequence (one per variable).
    Conjugation nodes are rejected here; use curve_linkage for those.
    """
    centers = center if isinstance(center, (tuple, list)) else (center,)
    if uses_conj(_normalize(expr)):
        raise LinkageError("conjugation nodes are only allowed on the curve path")
    return _compile_core(expr, centers, radius, allow_conj=False)


def expand_domain(f: FunctionalLinkage, radius: float) -> FunctionalLinkage:
    """Grow the certified ball of a germ-at-0 linkage to the requested radius.

    Uses g(y) = mu * g(lambda * y) per homogeneous component with
    lambda = min(1, eps / (2 * radius)) and mu = lambda^(-degree); constant
    components pass through unchanged.
    """
    if f.exprs is None or len(f.exprs) != 1:
        raise LinkageError("expansion needs the linkage's defining expression")
    for c, _ in f.coord_disks:
        if abs(c) > STRUCT_TOL:
            raise LinkageError("expansion applies to germs at the origin")
    eps = min((r for _, r in f.coord_disks), default=math.inf)
    if eps >= radius:
        return f
    nvars = len(f.inputs)
    expr = f.exprs[0]
    parts = homogeneous_parts(expr, nvars)
    lam = min(1.0, eps / (2.0 * radius))
    wide = tuple((0j, float(radius)) for _ in range(nvars))

    def wrap(block: FunctionalLinkage, part_expr: PolyExpr, degree: int) -> FunctionalLinkage:
        if degree == 0:
            return block
        out = block
        for j in reversed(range(nvars)):
            pre = make_pantograph(DIV, 1.0 / lam, disk_ball(0j, radius))
            out = compose_functional(out, pre, {block.inputs[j]: pre.outputs[0]})
        small = tuple((0j, lam * radius) for _ in range(nvars))
        mid = range_disk(part_expr, small)
        post = make_pantograph(SCALE, lam ** (-degree), disk_ball(*mid))
        out = compose_functional(post, out, {post.inputs[0]: out.outputs[0]})
        return out.with_(coord_disks=wide, exprs=(part_expr,), range_fn=None)

    if len(parts) == 1:
        ((degree, _),) = parts.items()
        return wrap(f, expr, degree).with_(exprs=(expr,), range_fn=None)

    try:
        wrapped = []
        for degree in sorted(parts):
            part_expr = _normalize(monomials_to_expr(parts[degree], nvars))
            if degree == 0:
                sub = _compile_core(part_expr, (0j,) * nvars, radius, uses_conj(part_expr))
                wrapped.append((sub, part_expr))
                continue
            sub = _compile_core(part_expr, (0j,) * nvars, eps, uses_conj(part_expr))
            wrapped.append((wrap(sub, part_expr, degree), part_expr))
        total, texpr = wrapped[0]
        for nxt, nexpr in wrapped[1:]:
            dl = range_disk(texpr, wide)
            dr = range_disk(nexpr, wide)
            add = make_adder((dl, dr))
            out = compose_functional(add, nxt, {add.inputs[1]: nxt.outputs[0]})
            out = compose_functional(out, total, {add.inputs[0]: total.outputs[0]})
            for j in range(nvars):
                out = restrict_equal_inputs(out, out.inputs[j], out.inputs[nvars + j])
            total, texpr = out, Add(texpr, nexpr)
        return total.with_(coord_disks=wide, exprs=(expr,), range_fn=None)
    except UncoverableBall as exc:
        raise CompileOverflow(f"expansion failed: {exc}") from exc


def _check_real_inputs(expr: PolyExpr, centers) -> None:
    if not has_real_coefficients(expr):
        raise LinkageError("real compilation requires real coefficients")
    if uses_conj(expr):
        raise LinkageError("real compilation does not accept conjugation nodes")
    for c in centers:
        if abs(complex(c).imag) > STRUCT_TOL:
            raise LinkageError("real compilation requires a real center")


def _restrict_to_reals(block: FunctionalLinkage, centers, radius: float):
    """Fiber-sum the inputs onto a straight-line linkage and rebase."""
    m = len(centers)
    half_width = max(abs(complex(c)) for c in centers) if centers else 0.0
    half_width = half_width + radius + max(1.0, radius) / 4.0
    track = make_straight_line(m, half_width, prefix="line.")
    requested = tuple((complex(c), float(radius)) for c in centers)
    glued = compose_functional(
        block,
        track,
        {block.inputs[j]: track.outputs[j] for j in range(m)},
        requested_disks=requested,
    )
    based, degree = basify_functional(glued)
    return based, track, degree


def compile_real(expr: PolyExpr, center, radius: float) -> FunctionalLinkage:
    """Real-functional linkage: the complex compilation of the polynomial with
    its inputs constrained to the real axis, rebased so every pinned image is
    replaced by bracing from the unit base segment."""
    centers = center if isinstance(center, (tuple, list)) else (center,)
    centers = tuple(complex(c) for c in centers)
    _check_real_inputs(expr, centers)
    block = _compile_core(expr, centers, radius, allow_conj=False)
    based, track, _degree = _restrict_to_reals(block, centers, radius)
    report = block.report
    if report is not None:
        report = CompileReport(
            stages=list(report.stages)
            + [Stage("straight_line", track.placement.n_bits, track.coord_disks, dict(track.params))],
            total_sym_order=based.sym_order,
            ball=Ball(centers, float(radius)),
        )
    return based.with_(exprs=(_normalize(expr),), range_fn=None, report=report)


def _combine_outputs(b1: FunctionalLinkage, b2: FunctionalLinkage) -> FunctionalLinkage:
    """Glue two blocks over the same variables input-to-input; outputs concatenate."""
    if len(b1.inputs) != len(b2.inputs):
        raise LinkageError("components must share the input arity")
    pairs = list(zip(b1.inputs, b2.inputs))
    merged, map1, map2 = _merge_graphs(b1.linkage, b2.linkage, pairs)
    prog = PlacementProgram(
        b1.placement.remap(map1).steps
        + b2.placement.remap(
            map2, bit_shift=b1.placement.n_bits, drop_inputs=set(b2.inputs)
        ).steps,
        b1.placement.n_bits + b2.placement.n_bits,
    )
    exprs = None
    if b1.exprs is not None and b2.exprs is not None:
        exprs = b1.exprs + b2.exprs
    return FunctionalLinkage(
        linkage=merged,
        inputs=tuple(map1[v] for v in b1.inputs),
        outputs=tuple(map1[q] for q in b1.outputs) + tuple(map2[q] for q in b2.outputs),
        field_tag=b1.field_tag,
        coord_disks=b1.coord_disks,
        placement=prog,
        exprs=exprs,
        params={"kind": "bundle"},
        parallelograms=tuple(tuple(map1[v] for v in quad) for quad in b1.parallelograms)
        + tuple(tuple(map2[v] for v in quad) for quad in b2.parallelograms),
    )


def realize_set(exprs, ball: Ball) -> ClosedFunctionalLinkage:
    """Closed linkage whose admissible inputs form the real algebraic set
    f^{-1}(0) inside the ball: compile over the reals, then glue every output
    to the base vertex pinned at the origin."""
    exprs = list(exprs) if isinstance(exprs, (tuple, list)) else [exprs]
    centers = ball.center
    radius = ball.radius
    m = len(centers)
    for e in exprs:
        _check_real_inputs(e, centers)
    blocks = [_compile_core(e, centers, radius, allow_conj=False) for e in exprs]
    combined = blocks[0]
    for nxt in blocks[1:]:
        combined = _combine_outputs(combined, nxt)
    based, _track, _deg = _restrict_to_reals(combined, centers, radius)
    based = based.with_(exprs=tuple(_normalize(e) for e in exprs), range_fn=None)
    return close_outputs(based, [0j] * len(exprs))


def _curve_seed(expr: PolyExpr, center: complex, radius: float) -> complex:
    """Grid scan plus gradient Newton steps to land on f(z, conj z) = 0."""
    mono = to_monomials(expr, 1)

    def f(z: complex) -> float:
        return evaluate(expr, (z,)).real

    best, best_val = None, math.inf
    n = 41
    for i in range(n):
        for j in range(n):
            z = center + complex(
                -radius + 2.0 * radius * i / (n - 1), -radius + 2.0 * radius * j / (n - 1)
            )
            if abs(z - center) > radius:
                continue
            v = abs(f(z))
            if v < best_val:
                best, best_val = z, v

    def grad(z: complex) -> complex:
        # df/dx + i df/dy for the real-valued f, from the monomial table
        gx = 0j
        gy = 0j
        for key, coeff in mono.items():
            a, b = key[0]
            zc = z.conjugate()
            da = coeff * a * z ** (a - 1) * zc ** b if a else 0j
            db = coeff * b * z ** a * zc ** (b - 1) if b else 0j
            gx += da + db
            gy += 1j * da - 1j * db
        return complex(gx.real, gy.real)

    z = best
    for _ in range(60):
        v = f(z)
        if abs(v) < 1e-12:
            return z
        g = grad(z)
        if abs(g) < 1e-14:
            break
        z = z - v * g / (abs(g) ** 2)
        if abs(z - center) > radius:
            break
    if abs(f(z)) < 1e-9 and abs(z - center) <= radius:
        return z
    raise NoSeedFound("no zero of the curve polynomial found inside the ball")


def curve_linkage(expr: PolyExpr, ball: Ball) -> ClosedFunctionalLinkage:
    """Closed complex linkage whose single input traces f(z, conj z) = 0.

    The polynomial must be real-valued (coefficient of z^a conj(z)^b equal to
    the conjugate of that of z^b conj(z)^a); a seed on the curve inside the
    ball is located up front so tracing has somewhere to start.
    """
    if arity(expr) > 1:
        raise LinkageError("curve polynomials use the single variable z")
    if not is_real_valued(expr):
        raise LinkageError(
            "curve polynomial must be real-valued: coefficient of z^a conj(z)^b "
            "must equal the conjugate of that of z^b conj(z)^a"
        )
    center = ball.center[0] if ball.center else 0j
    seed = _curve_seed(expr, center, ball.radius)
    block = _compile_core(expr, (center,), ball.radius, allow_conj=True)
    if not any(abs(z) <= STRUCT_TOL for _, z in block.linkage.marking):
        block = with_anchor(block, 0j)
    closed = close_outputs(block, [0j])
    return replace(closed, seed_hint=seed)
