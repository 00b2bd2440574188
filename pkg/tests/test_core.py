"""Linkage data model: assembly validation, residuals, structural reports."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from polylink.core import (
    CollinearConstraint,
    DuplicateMarking,
    Edge,
    LinkageBuilder,
    MissingVertexPosition,
    NonPositiveLength,
    Realization,
    SelfLoop,
    UnknownVertex,
    VertexId,
    assemble,
    residual,
    validate,
)


def unit_square():
    vs = [VertexId(i, lbl) for i, lbl in enumerate("ABCD")]
    es = [Edge(0, 1, 1.0), Edge(1, 2, 1.0), Edge(2, 3, 1.0), Edge(3, 0, 1.0)]
    return assemble(vs, es, based_edge=(0, 1))


SQUARE_POS = {0: 0j, 1: 1 + 0j, 2: 1 + 1j, 3: 0 + 1j}


class TestAssemble:
    def test_square_is_valid(self):
        sq = unit_square()
        assert len(sq.edges) == 4
        assert sq.based_edge == (0, 1)

    def test_zero_length_edge_rejected(self):
        with pytest.raises(NonPositiveLength):
            assemble([VertexId(0), VertexId(1)], [Edge(0, 1, 0.0)])

    def test_self_loop_rejected(self):
        with pytest.raises(SelfLoop):
            assemble([VertexId(0)], [Edge(0, 0, 1.0)])

    def test_duplicate_marking_rejected(self):
        with pytest.raises(DuplicateMarking):
            assemble([VertexId(0), VertexId(1)], [Edge(0, 1, 1.0)],
                     marking=[(0, 0j), (0, 1j)])

    def test_unknown_vertex_rejected(self):
        with pytest.raises(UnknownVertex):
            assemble([VertexId(0), VertexId(1)], [Edge(0, 2, 1.0)])
        with pytest.raises(UnknownVertex):
            assemble([VertexId(0)], [], marking=[(5, 0j)])

    def test_rigidified_parallelogram_prefab(self):
        # six-vertex rigidified parallelogram: two bars with midpoint holes,
        # three equal struts
        lb = LinkageBuilder()
        vs = [lb.vertex(x) for x in "pqsr"]
        m1, m2 = lb.rigid_parallelogram(*vs, bar_len=2.0, strut_len=1.0)
        linkage = lb.build()
        assert linkage.n_vertices() == 6
        assert len(linkage.edges) == 5
        assert len(linkage.collinear) == 2
        # place as an actual parallelogram: residual vanishes
        p, q, s, r = 0j, 2 + 0j, 1j, 2 + 1j
        phi = Realization({vs[0]: p, vs[1]: q, vs[2]: s, vs[3]: r,
                           m1: (p + q) / 2, m2: (s + r) / 2})
        max_abs, _ = residual(linkage, phi)
        assert max_abs < 1e-12


class TestResidual:
    def test_exact_square(self):
        max_abs, vec = residual(unit_square(), Realization(dict(SQUARE_POS)))
        assert max_abs == 0.0
        assert len(vec) == 4

    def test_perturbed_square_reports_deviation(self):
        # moving B by (0.1, 0) stretches AB by exactly 0.1 and BC by
        # sqrt(1.01) - 1; both computed directly here
        pos = dict(SQUARE_POS)
        pos[1] = pos[1] + 0.1
        max_abs, vec = residual(unit_square(), Realization(pos))
        assert max_abs > 0.09
        assert abs(max_abs - 0.1) < 1e-15
        assert abs(sorted(abs(vec))[-2] - (math.sqrt(1.01) - 1.0)) < 1e-15

    def test_degenerate_triangle_midpoint(self):
        linkage = assemble(
            [VertexId(0, "A"), VertexId(1, "B"), VertexId(2, "C")],
            [Edge(0, 2, 2.0)],
            [CollinearConstraint(0, 1, 2, 0.5, 0.5)],
        )
        phi = Realization({0: 0j, 1: 1 + 0j, 2: 2 + 0j})
        max_abs, _ = residual(linkage, phi)
        assert max_abs == 0.0

    def test_marking_rows(self):
        linkage = assemble([VertexId(0)], [], marking=[(0, 1 + 2j)])
        assert residual(linkage, Realization({0: 1 + 2j}))[0] == 0.0
        assert residual(linkage, Realization({0: 1 + 2.5j}))[0] == 0.5

    def test_missing_position(self):
        with pytest.raises(MissingVertexPosition):
            residual(unit_square(), Realization({0: 0j}))


@st.composite
def square_positions(draw):
    pos = {}
    for k in range(4):
        pos[k] = complex(
            draw(st.floats(-5, 5, allow_nan=False)), draw(st.floats(-5, 5, allow_nan=False))
        )
    return pos


class TestResidualInvariance:
    @given(square_positions(), st.permutations(list(range(4))))
    @settings(max_examples=60, deadline=None)
    def test_permutation_invariance(self, pos, perm):
        sq = unit_square()
        relabeled = assemble(
            [VertexId(perm[v.index]) for v in sq.vertices],
            [Edge(perm[e.u], perm[e.v], e.length) for e in sq.edges],
        )
        plain = assemble([VertexId(i) for i in range(4)],
                         [Edge(e.u, e.v, e.length) for e in sq.edges])
        m1, _ = residual(plain, Realization(pos))
        m2, _ = residual(relabeled, Realization({perm[k]: z for k, z in pos.items()}))
        assert m1 == pytest.approx(m2, abs=1e-12)

    @given(
        square_positions(),
        st.floats(-math.pi, math.pi, allow_nan=False),
        st.floats(-3, 3, allow_nan=False),
        st.floats(-3, 3, allow_nan=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_isometry_invariance_unmarked(self, pos, theta, tx, ty):
        plain = assemble([VertexId(i) for i in range(4)],
                         [Edge(0, 1, 1.0), Edge(1, 2, 1.0), Edge(2, 3, 1.0), Edge(3, 0, 1.0)])
        g = complex(math.cos(theta), math.sin(theta))
        t = complex(tx, ty)
        moved = {k: g * z + t for k, z in pos.items()}
        m1, _ = residual(plain, Realization(pos))
        m2, _ = residual(plain, Realization(moved))
        assert m1 == pytest.approx(m2, rel=1e-9, abs=1e-9)


class TestValidate:
    def test_triangle_1_1_3_accepted_with_warning(self):
        linkage = assemble(
            [VertexId(0), VertexId(1), VertexId(2)],
            [Edge(0, 1, 1.0), Edge(1, 2, 1.0), Edge(0, 2, 3.0)],
        )
        report = validate(linkage)
        assert report.metric_violations
        assert not report.marking_conflicts

    def test_square_clean(self):
        assert validate(unit_square()).clean

    def test_marking_conflict_detected(self):
        linkage = assemble(
            [VertexId(0), VertexId(1)],
            [Edge(0, 1, 5.0)],
            marking=[(0, 0j), (1, 1 + 0j)],
        )
        report = validate(linkage)
        assert report.marking_conflicts
