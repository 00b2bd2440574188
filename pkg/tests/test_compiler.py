"""Expression-to-linkage compilation, domain expansion, real restriction."""

import math

import numpy as np
import pytest

from polylink import jsonio
from polylink.compiler import (
    compile_complex,
    compile_real,
    curve_linkage,
    expand_domain,
    realize_set,
)
from polylink.core import LinkageError, residual
from polylink.elementary import disk_ball, make_squarer
from polylink.functional import Ball
from polylink.poly import Const, evaluate, parse
from polylink.solve import forward_place, sample_ball

RNG = np.random.default_rng(77)


def out_value(f, values):
    phi = forward_place(f, values)
    return phi.positions[f.outputs[0]], residual(f.linkage, phi)[0]


class TestCompileComplex:
    def test_z_squared_plus_one(self):
        f = compile_complex(parse("z*z+1"), 0, 1.0)
        for z, want in [(0, 1.0), (1j, 0.0), (1, 2.0)]:
            out, res = out_value(f, [z])
            assert out == pytest.approx(want, abs=1e-9)
            assert res < 1e-9

    def test_product(self):
        f = compile_complex(parse("z*w"), (0, 0), 2.0)
        out, _ = out_value(f, [1.5, -2.0])
        assert out == pytest.approx(-3.0, abs=1e-9)

    def test_constant_expression(self):
        f = compile_complex(parse("5"), 0, 1.0)
        assert f.sym_order == 1
        for z in (0j, 0.7 - 0.3j):
            out, res = out_value(f, [z])
            assert out == 5.0
            assert res < 1e-12

    def test_sampled_relative_error(self):
        expr = parse("z*z*z - z + 1")
        f = compile_complex(expr, 0, 1.0)
        for pt in sample_ball(f, 100, RNG):
            out, res = out_value(f, pt)
            want = evaluate(expr, pt)
            assert res < 1e-9
            assert abs(out - want) / (1 + abs(want)) < 1e-6

    def test_conj_rejected(self):
        with pytest.raises(LinkageError):
            compile_complex(parse("conj(z)"), 0, 1.0)

    def test_deterministic_artifact(self):
        a = jsonio.dumps(compile_complex(parse("z*z+1"), 0, 1.0))
        b = jsonio.dumps(compile_complex(parse("z*z+1"), 0, 1.0))
        assert a == b

    def test_report_sym_product(self):
        f = compile_complex(parse("z*w + 2"), (0, 0), 1.0)
        assert f.report is not None
        assert f.report.stage_sym_product == f.sym_order
        assert f.sym_order == 2 ** f.placement.n_bits


class TestExpandDomain:
    def test_squarer_germ_expansion(self):
        small = make_squarer(disk_ball(0, 0.1))
        wide = expand_domain(small, 1.0)
        assert wide.certified_ball.radius >= 1.0
        out, res = out_value(wide, [0.9])
        assert out == pytest.approx(0.81, abs=1e-9)
        assert res < 1e-9

    def test_constant_passes_through(self):
        f = compile_complex(parse("3"), 0, 0.5)
        assert expand_domain(f, 2.0) is f.with_() or expand_domain(f, 2.0).certified_ball.radius >= 0.5

    def test_lambda_respects_proof_bound(self):
        # the input scaling factor lambda = eps/(2r) is under the proof's
        # strict bound eps/r, and actually appears as the pre-scaling step
        from polylink.placement import AffineStep

        small = make_squarer(disk_ball(0, 0.1))
        eps, r = small.certified_ball.radius, 1.0
        wide = expand_domain(small, r)
        lam = min(1.0, eps / (2 * r))
        assert lam < eps / r
        coeffs = {
            c
            for st in wide.placement.steps
            if isinstance(st, AffineStep)
            for c, _ in st.terms
        }
        assert any(math.isclose(c, lam) for c in coeffs)

    def test_agreement_on_intersection(self):
        small = make_squarer(disk_ball(0, 0.1))
        wide = expand_domain(small, 1.0)
        for pt in sample_ball(small, 40, RNG):
            a, _ = out_value(small, pt)
            b, _ = out_value(wide, pt)
            assert abs(a - b) / (1 + abs(a)) < 1e-6

    def test_nonhomogeneous_expansion(self):
        germ = compile_complex(parse("z*z + z"), 0, 0.1)
        wide = expand_domain(germ, 0.8)
        out, _ = out_value(wide, [0.7])
        assert out == pytest.approx(0.7 * 0.7 + 0.7, abs=1e-6)


class TestCompileReal:
    def test_square_on_reals(self):
        f = compile_real(parse("x1*x1"), 0, 1.0)
        assert f.field_tag == "real"
        out, res = out_value(f, [0.5])
        assert out == pytest.approx(0.25, abs=1e-9)
        assert res < 1e-9
        phi = forward_place(f, [0.5])
        assert abs(phi.positions[f.inputs[0]].imag) < 1e-9

    def test_sum(self):
        f = compile_real(parse("x1 + x2"), (0, 0), 1.0)
        out, _ = out_value(f, [0.3, -0.3])
        assert abs(out) < 1e-9

    def test_complex_coefficient_rejected(self):
        with pytest.raises(LinkageError):
            compile_real(Const(1j), 0, 1.0)

    def test_based_structure(self):
        f = compile_real(parse("x1*x1"), 0, 1.0)
        assert f.linkage.based_edge is not None
        assert len(f.linkage.marking) == 2

    def test_realness_across_samples(self):
        f = compile_real(parse("x1*x1 - x1"), 0, 1.0)
        for pt in sample_ball(f, 60, RNG):
            phi = forward_place(f, pt)
            for v in f.inputs:
                assert abs(phi.positions[v].imag) < 1e-9


class TestClosedPaths:
    def test_realize_set_zero_polynomial(self):
        closed = realize_set(parse("0"), Ball((0j,), 1.0))
        assert closed.targets == (0j,)
        assert closed.constraint_error((0.37,)) == 0.0

    def test_curve_requires_real_values(self):
        with pytest.raises(LinkageError):
            curve_linkage(parse("z*z"), Ball((0j,), 1.0))

    def test_curve_seed_search(self):
        c = curve_linkage(parse("z*conj(z) - 1"), Ball((0j,), 1.5))
        assert c.seed_hint is not None
        assert abs(abs(c.seed_hint) - 1.0) < 1e-9

    def test_no_seed_in_ball(self):
        from polylink.compiler import NoSeedFound

        with pytest.raises(NoSeedFound):
            curve_linkage(parse("z*conj(z) - 100"), Ball((0j,), 1.0))
