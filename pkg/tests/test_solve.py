"""Placement, branch enumeration, refinement and tracing."""

import dataclasses

import numpy as np
import pytest

from polylink.compose import close_outputs, with_anchor
from polylink.core import Edge, Realization, residual
from polylink.elementary import (
    FWD,
    NEGATE,
    SCALE,
    disk_ball,
    make_adder,
    make_constant,
    make_inversor,
    make_pantograph,
    make_squarer,
    make_straight_line,
    make_translator,
    make_triangle,
)
from polylink.functional import Ball
from polylink.placement import PlacementDegenerate
from polylink.solve import (
    OutsideCertifiedBall,
    SeedRejected,
    distinct_realizations,
    enumerate_realizations,
    forward_place,
    refine,
    trace_curve,
    verify_functional,
)


def _reflect(z, a, b):
    """Reflect z across the line through a, b."""
    u = (b - a) / abs(b - a)
    return a + u * u * (z - a).conjugate()


class TestForwardPlace:
    def test_translator_example(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        phi = forward_place(t, [1.0], branch=(0,))
        assert phi.positions[t.outputs[0]] == pytest.approx(2.0)
        assert residual(t.linkage, phi)[0] < 1e-12

    def test_inversor_sigma1_branches_share_output(self):
        j = make_inversor(1.0, disk_ball(2.0, 0.3))
        a = forward_place(j, [2.0], branch=(0, 0))
        b = forward_place(j, [2.0], branch=(1, 0))
        q = j.outputs[0]
        assert a.positions[q] == pytest.approx(0.5, abs=1e-12)
        assert a.positions[q] == pytest.approx(b.positions[q], abs=1e-12)
        # A and C swap between the branches
        av = next(v.index for v in j.linkage.vertices if v.label and v.label.endswith("A"))
        cv = next(v.index for v in j.linkage.vertices if v.label and v.label.endswith("C"))
        assert a.positions[av] == pytest.approx(b.positions[cv])
        assert a.positions[cv] == pytest.approx(b.positions[av])

    def test_outside_ball_rejected(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        with pytest.raises(OutsideCertifiedBall):
            forward_place(t, [3.0])

    def test_input_on_wall_circle_rejected(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        outer = max(c.radius for c in t.wall_circles if c.kind == "wall")
        with pytest.raises(OutsideCertifiedBall):
            forward_place(t, [outer])
        j = make_inversor(1.0, disk_ball(2.0, 0.3))
        quasi = next(c.radius for c in j.wall_circles if c.kind == "quasiwall")
        with pytest.raises(OutsideCertifiedBall):
            forward_place(j, [quasi])

    def test_tangential_placement_degenerate(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        s, tt = t.params["s"], t.params["t"]
        with pytest.raises(PlacementDegenerate):
            forward_place(t, [s + tt], check_ball=False)


class TestBranchStructure:
    def test_counts(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        assert distinct_realizations(t.linkage, enumerate_realizations(t, [1.2 + 0.1j])) == 2
        j = make_inversor(1.0, disk_ball(2.0, 0.3))
        assert distinct_realizations(j.linkage, enumerate_realizations(j, [2.0 + 0.1j])) == 4
        k = make_constant([3.0], 1)
        assert len(enumerate_realizations(k, [0.4j])) == 1

    def test_translator_generator_reflects_elbow(self):
        # flipping the bit reflects C across the line through A and E, and
        # carries D along by the fixed translation
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        z = 1.1 + 0.2j
        r0 = forward_place(t, [z], branch=(0,))
        r1 = forward_place(t, [z], branch=(1,))
        labels = {v.label: v.index for v in t.linkage.vertices if v.label}
        a, c, d, e = labels["A"], labels["C"], labels["D"], labels["E"]
        assert r1.positions[c] == pytest.approx(
            _reflect(r0.positions[c], r0.positions[a], r0.positions[e])
        )
        assert r1.positions[d] == pytest.approx(r1.positions[c] + 1.0)
        assert r0.positions[e] == r1.positions[e]

    def test_inversor_sigma2_reflects_hook(self):
        j = make_inversor(1.0, disk_ball(2.0, 0.3))
        z = 2.0 + 0.1j
        r0 = forward_place(j, [z], branch=(0, 0))
        r1 = forward_place(j, [z], branch=(0, 1))
        labels = {v.label: v.index for v in j.linkage.vertices if v.label}
        moved = [v for v in j.linkage.vertices
                 if abs(r0.positions[v.index] - r1.positions[v.index]) > 1e-12]
        assert [v.label for v in moved] == ["E"]
        e, a, c = labels["E"], labels["A"], labels["C"]
        assert r1.positions[e] == pytest.approx(
            _reflect(r0.positions[e], r0.positions[a], r0.positions[c])
        )

    def test_output_branch_independence(self):
        blocks = [
            (make_pantograph(NEGATE, None, disk_ball(0, 1.0)), (0.3 + 0.4j,)),
            (make_adder(Ball((0j, 0j), 1.0)), (0.2 - 0.1j, 0.5j)),
            (make_straight_line(1, 2.0), (1.2,)),
        ]
        for f, pt in blocks:
            reals = enumerate_realizations(f, pt)
            assert len(reals) == f.sym_order
            q = f.outputs[0]
            spread = max(abs(r.positions[q] - reals[0].positions[q]) for r in reals)
            assert spread < 1e-9


class TestTriangle:
    def test_nondegenerate_two_realizations(self):
        tri = make_triangle(3.0, 2.0, 2.5)
        reals = enumerate_realizations(tri, [])
        assert len(reals) == 2
        assert distinct_realizations(tri.linkage, reals) == 2
        for phi in reals:
            assert residual(tri.linkage, phi)[0] < 1e-12


class TestRefine:
    def test_exact_seed_zero_iterations(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        phi = forward_place(t, [1.2])
        out, status = refine(t.linkage, phi)
        assert status == "converged"
        assert all(out.positions[k] == phi.positions[k] for k in phi.positions)

    @pytest.mark.parametrize("scale", [1e-3, 1e-4])
    def test_perturbed_seed_reconverges(self, scale):
        # with the inputs pinned at their original values the fiber is
        # discrete; a small perturbation stays in the basin of its branch
        from polylink.solve import _PinRows

        rng = np.random.default_rng(99)
        blocks = [
            make_translator(1.0, FWD, disk_ball(1.0, 0.5)),
            make_inversor(1.0, disk_ball(2.0, 0.3)),
            make_adder(Ball((0j, 0j), 1.0)),
        ]
        points = [(1.2 + 0.1j,), (2.0 + 0.2j,), (0.3, -0.2 + 0.1j)]
        for f, pt in zip(blocks, points):
            phi = forward_place(f, pt)
            noisy = Realization({
                k: z + scale * complex(rng.standard_normal(), rng.standard_normal())
                for k, z in phi.positions.items()
            })
            pin = _PinRows(f.inputs, pt, 1e3)
            refined, status = refine(f.linkage, noisy, extra=pin, max_iter=25)
            assert status == "converged"
            q = f.outputs[0]
            assert abs(refined.positions[q] - phi.positions[q]) < 1e-9

    def test_collapsed_seed_fails(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        seed = Realization({v.index: 0j for v in t.linkage.vertices})
        _, status = refine(t.linkage, seed, max_iter=30)
        assert status in ("stalled", "diverged")


class TestVerifyFunctional:
    def test_passes_on_good_block(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        report = verify_functional(t, n=100, value_rtol=1e-9)
        assert report.passed
        assert report.max_residual < 1e-9

    def test_fault_injection_detected(self):
        t = make_translator(1.0, FWD, disk_ball(1.0, 0.5))
        edges = list(t.linkage.edges)
        edges[3] = Edge(edges[3].u, edges[3].v, edges[3].length + 0.1)
        broken = dataclasses.replace(t.linkage, edges=tuple(edges))
        broken.__dict__.pop("_arr", None)
        report = verify_functional(t.with_(linkage=broken), n=20)
        assert not report.passed

    def test_constant_exact(self):
        k = make_constant([3.0], 1)
        report = verify_functional(k, n=25)
        assert report.passed
        assert report.max_residual == 0.0
        assert report.max_rel_error == 0.0


class TestTrace:
    def test_seed_rejection(self):
        sq = with_anchor(make_squarer(disk_ball(0, 1.5)), 1.0)
        closed = close_outputs(sq, [1.0])
        with pytest.raises(SeedRejected):
            trace_curve(closed, 0.2 + 0.9j, 0.05)  # |z^2 - 1| is large there

    def test_isolated_point(self):
        sq = with_anchor(make_squarer(disk_ball(0, 1.5)), 1.0)
        closed = close_outputs(sq, [1.0])
        tr = trace_curve(closed, 1.0, 0.05, max_steps=40)
        assert tr.exit_reason == "isolated point"
        assert len(tr.points) == 1
        assert abs(tr.points[0][0] - 1.0) < 1e-9

    def test_steps_bounded_and_residuals_held(self):
        # consecutive trace points move by at most the step (up to curvature
        # slack) and every recorded realization meets the constraint tolerance
        from polylink.compiler import realize_set
        from polylink.functional import Ball
        from polylink.poly import parse

        closed = realize_set(parse("x1*x1 + x2*x2 - 1"), Ball((0j, 0j), 2.0))
        tr = trace_curve(closed, (1.0, 0.0), 0.1, max_steps=80)
        assert tr.closed_loop
        assert max(tr.residuals) < 1e-9
        pts = [(p[0].real, p[1].real) for p in tr.points]
        gaps = [
            ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) ** 0.5
            for a, b in zip(pts[:-1], pts[1:])
        ]
        assert max(gaps) < 0.1 * 1.1
