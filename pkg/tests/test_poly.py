"""Expression DAG: parsing, evaluation, disk bounds, monomial structure."""

import pytest
from hypothesis import given, settings, strategies as st

from polylink.poly import (
    ExprError,
    arity,
    evaluate,
    homogeneous_parts,
    is_real_valued,
    parse,
    parse_complex,
    range_disk,
    to_monomials,
    to_text,
)


class TestParse:
    @pytest.mark.parametrize(
        "text,at,want",
        [
            ("z*z+1", (2j,), -3 + 0j),
            ("z - w", (3, 1j), 3 - 1j),
            ("x1*x2 - x1", (2, 5), 8),
            ("conj(z)*z", (3 + 4j,), 25),
            ("-z*z", (2,), -4),
            ("2i + 1", (), 1 + 2j),
            ("(1+2i)*z", (1j,), -2 + 1j),
        ],
    )
    def test_evaluate(self, text, at, want):
        assert evaluate(parse(text), at) == pytest.approx(want)

    def test_errors(self):
        for bad in ["z +", "foo(z)", "x0", "(z", "z**2"]:
            with pytest.raises(ExprError):
                parse(bad)

    def test_parse_complex_literals(self):
        assert parse_complex("2+0i") == 2
        assert parse_complex("1.5-2i") == 1.5 - 2j
        assert parse_complex("-i") == -1j
        with pytest.raises(ExprError):
            parse_complex("z")

    def test_text_roundtrip_stable(self):
        for text in ["z*z+1", "z*w", "(1+2i)*z-conj(z)", "-z+0.5i", "x1-2"]:
            t1 = to_text(parse(text))
            assert to_text(parse(t1)) == t1


class TestRangeDisk:
    def test_linear_exact(self):
        c, r = range_disk(parse("z + 3"), [(1 + 0j, 2.0)])
        assert c == 4 and r == 2.0

    def test_product_bound_holds(self):
        expr = parse("z*z - 2*z + 1")
        c, r = range_disk(expr, [(0.5 + 0j, 1.0)])
        # every sampled value stays inside the bound
        for t in range(40):
            z = 0.5 + 1.0 * complex(__import__("math").cos(t), __import__("math").sin(t)) * (t % 5) / 5
            v = evaluate(expr, (z,))
            assert abs(v - c) <= r + 1e-12

    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 1.5))
    @settings(max_examples=50, deadline=None)
    def test_bound_is_sound(self, x, y, rad):
        expr = parse("z*z*z + (0.5-1i)*z - 2")
        center = complex(x, y)
        c, r = range_disk(expr, [(center, rad)])
        # boundary samples must stay inside
        import math

        for k in range(12):
            z = center + rad * complex(math.cos(k), math.sin(k))
            assert abs(evaluate(expr, (z,)) - c) <= r * (1 + 1e-9) + 1e-9


class TestMonomials:
    def test_expansion(self):
        mono = to_monomials(parse("(z+1)*(z-1)"), 1)
        assert mono == {((2, 0),): 1 + 0j, ((0, 0),): -1 + 0j}

    def test_homogeneous_parts(self):
        parts = homogeneous_parts(parse("z*z + 3*z - 5"), 1)
        assert set(parts) == {0, 1, 2}

    def test_realness_check(self):
        assert is_real_valued(parse("z*conj(z) - 1"))
        assert is_real_valued(parse("(0-0.5i)*z + 0.5i*conj(z)"))  # Im z
        assert not is_real_valued(parse("z*z"))
        assert not is_real_valued(parse("z + 2i"))

    def test_arity(self):
        assert arity(parse("x3")) == 3
        assert arity(parse("2")) == 0
