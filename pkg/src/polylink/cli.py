"""Command-line front end.

Subcommands: compile (expression -> linkage JSON), eval (place at an input
and print the outputs), verify (sampled functional verification, nonzero
exit on failure), trace (follow a closed linkage's admissible set, tab
delimited table plus optional figure), render (draw one realization),
info (structural summary).
"""

from __future__ import annotations

import argparse
import sys

from . import jsonio
from .compiler import compile_complex, compile_real, curve_linkage, realize_set
from .core import LinkageError, validate
from .functional import Ball, ClosedFunctionalLinkage
from .poly import ExprError, parse, parse_complex
from .solve import forward_place, parse_branch, trace_curve, verify_functional

USAGE_EXIT = 2
FAIL_EXIT = 1


def format_point(z: complex) -> str:
    re = format(z.real, "g")
    im = format(abs(z.imag), "g")
    sign = "-" if z.imag < 0 else "+"
    return f"{re}{sign}{im}i"


def _parse_values(text: str):
    return tuple(parse_complex(part) for part in text.split(","))


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="polylink",
        description="Compile polynomial maps into planar linkages and verify them.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile an expression to a linkage")
    c.add_argument("--expr", required=True, help="e.g. 'z*z+1', 'x1*x1+x2*x2-1'")
    c.add_argument("--center", default="0", help="comma-separated complex center")
    c.add_argument("--radius", type=float, default=1.0)
    mode = c.add_mutually_exclusive_group()
    mode.add_argument("--real", action="store_true", help="real-functional compilation")
    mode.add_argument("--set", action="store_true", dest="as_set",
                      help="close outputs at 0: realize the real algebraic set")
    mode.add_argument("--curve", action="store_true",
                      help="complex curve f(z, conj z) = 0, conj allowed")
    c.add_argument("-o", "--output", required=True)

    e = sub.add_parser("eval", help="place the linkage at an input")
    e.add_argument("file")
    e.add_argument("--input", required=True, help="comma-separated complex values")
    e.add_argument("--branch", default=None, help="bit string, one per branch bit")

    v = sub.add_parser("verify", help="sampled verification against the expression")
    v.add_argument("file")
    v.add_argument("--samples", type=int, default=200)

    t = sub.add_parser("trace", help="trace a closed linkage's admissible set")
    t.add_argument("file")
    t.add_argument("--seed", default=None, help="starting input (default: stored hint)")
    t.add_argument("--step", type=float, default=0.05)
    t.add_argument("--max-steps", type=int, default=1000)
    t.add_argument("--svg", default=None, help="write the traced polyline figure")
    t.add_argument("-o", "--output", default=None, help="write the table here instead of stdout")

    r = sub.add_parser("render", help="draw one realization")
    r.add_argument("file")
    r.add_argument("--input", default=None)
    r.add_argument("--branch", default=None)
    r.add_argument("-o", "--output", required=True, help="figure path (.svg/.png/.pdf)")

    i = sub.add_parser("info", help="structural summary")
    i.add_argument("file")
    return ap


def _cmd_compile(args) -> int:
    expr = parse(args.expr)
    centers = _parse_values(args.center)
    if args.as_set:
        art = realize_set(expr, Ball(centers, args.radius))
    elif args.curve:
        art = curve_linkage(expr, Ball(centers, args.radius))
    elif args.real:
        art = compile_real(expr, centers, args.radius)
    else:
        art = compile_complex(expr, centers, args.radius)
    jsonio.dump(art, args.output)
    src = art.source if isinstance(art, ClosedFunctionalLinkage) else art
    print(
        f"wrote {args.output}: {src.linkage.n_vertices()} vertices, "
        f"{len(src.linkage.edges)} edges, sym_order 2^{src.placement.n_bits}"
    )
    return 0


def _cmd_eval(args) -> int:
    f = jsonio.load(args.file)
    if isinstance(f, ClosedFunctionalLinkage):
        print("eval applies to open functional linkages; use trace for closed ones",
              file=sys.stderr)
        return USAGE_EXIT
    values = _parse_values(args.input)
    branch = parse_branch(args.branch) if args.branch else None
    phi = forward_place(f, values, branch=branch)
    print(", ".join(format_point(phi.positions[q]) for q in f.outputs))
    return 0


def _cmd_verify(args) -> int:
    f = jsonio.load(args.file)
    if isinstance(f, ClosedFunctionalLinkage):
        print("verify applies to open functional linkages", file=sys.stderr)
        return USAGE_EXIT
    report = verify_functional(f, n=args.samples)
    print(report.summary())
    return 0 if report.passed else FAIL_EXIT


def _cmd_trace(args) -> int:
    c = jsonio.load(args.file)
    if not isinstance(c, ClosedFunctionalLinkage):
        print("trace applies to closed linkages (compile with --set or --curve)",
              file=sys.stderr)
        return USAGE_EXIT
    if args.seed is not None:
        seed = _parse_values(args.seed)
    elif c.seed_hint is not None:
        seed = (c.seed_hint,)
    else:
        print("no --seed given and the file carries no seed hint", file=sys.stderr)
        return USAGE_EXIT
    if len(seed) == 1 and len(c.inputs) == 1:
        seed = seed[0]
    tr = trace_curve(c, seed, args.step, max_steps=args.max_steps)
    lines = ["step\t" + "\t".join(
        f"re{j + 1}\tim{j + 1}" for j in range(len(c.inputs))
    ) + "\t|f|\tresidual"]
    for k, (pt, err, res) in enumerate(zip(tr.points, tr.constraint_errors, tr.residuals)):
        coords = "\t".join(f"{z.real:.12g}\t{z.imag:.12g}" for z in pt)
        lines.append(f"{k}\t{coords}\t{err:.3e}\t{res:.3e}")
    lines.append(f"# exit: {tr.exit_reason}; closed loop: {tr.closed_loop}")
    table = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    if args.svg:
        from .render import render_trace

        render_trace(tr.points, args.svg, title=args.file, closed=tr.closed_loop)
    return 0


def _cmd_render(args) -> int:
    from .render import render_realization

    art = jsonio.load(args.file)
    if isinstance(art, ClosedFunctionalLinkage):
        seed = _parse_values(args.input) if args.input else (
            (art.seed_hint,) if art.seed_hint is not None else None)
        if seed is None:
            print("closed linkage: give --input on the admissible set", file=sys.stderr)
            return USAGE_EXIT
        from .solve import _place_closed
        from .core import Realization

        phi = Realization(_place_closed(art, seed))
        render_realization(art.linkage, phi, args.output, inputs=art.inputs)
    else:
        values = _parse_values(args.input) if args.input else tuple(
            c for c, _ in art.coord_disks)
        branch = parse_branch(args.branch) if args.branch else None
        phi = forward_place(art, values, branch=branch)
        render_realization(art.linkage, phi, args.output,
                           inputs=art.inputs, outputs=art.outputs)
    print(f"wrote {args.output}")
    return 0


def _cmd_info(args) -> int:
    art = jsonio.load(args.file)
    closed = isinstance(art, ClosedFunctionalLinkage)
    src = art.source if closed else art
    rep = validate(src.linkage)
    ball = src.certified_ball
    print(f"kind            {'closed ' if closed else ''}{src.params.get('kind', 'block')}")
    print(f"vertices        {src.linkage.n_vertices()}")
    print(f"edges           {len(src.linkage.edges)}")
    print(f"collinear       {len(src.linkage.collinear)}")
    print(f"field           {src.field_tag}")
    print(f"inputs          {len(src.inputs)}  outputs {len(src.outputs)}")
    print(f"sym_order       {src.sym_order} (2^{src.placement.n_bits})")
    radius = "inf" if ball.radius == float("inf") else format(ball.radius, "g")
    center = ", ".join(format_point(z) for z in ball.center)
    print(f"certified ball  radius {radius} at ({center})")
    if src.exprs is not None:
        from .poly import to_text

        print(f"expression      {'; '.join(to_text(e) for e in src.exprs)}")
    if closed:
        print(f"closure targets {', '.join(format_point(t) for t in art.targets)}")
    print(f"structure       {'clean' if rep.clean else '; '.join(rep.metric_violations + rep.marking_conflicts) or 'see warnings'}")
    return 0


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE_EXIT if exc.code not in (0, None) else 0
    try:
        if args.command == "compile":
            return _cmd_compile(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "trace":
            return _cmd_trace(args)
        if args.command == "render":
            return _cmd_render(args)
        if args.command == "info":
            return _cmd_info(args)
    except (LinkageError, ExprError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
