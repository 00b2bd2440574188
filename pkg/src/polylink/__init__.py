"""Compile polynomial maps and algebraic curves into planar linkages, then
verify the mechanisms numerically: placement, domain certification, symmetry
counting, refinement and curve tracing."""

from .core import (
    AbstractLinkage,
    CollinearConstraint,
    Edge,
    LinkageBuilder,
    LinkageError,
    Realization,
    ValidationReport,
    VertexId,
    assemble,
    residual,
    validate,
)
from .functional import (
    BadCircle,
    Ball,
    BallMeetsInversionCircle,
    ClosedFunctionalLinkage,
    DomainAnnulus,
    FunctionalLinkage,
    UncoverableBall,
)
from .placement import NoIntersection, PlacementDegenerate, PlacementProgram, circle_intersect
from .compose import (
    EmptySlice,
    GlueMap,
    MarkingImageMismatch,
    RangeEscapesDomain,
    UnknownTarget,
    basify,
    close_outputs,
    compose_functional,
    fiber_sum,
    restrict_equal_inputs,
    self_fiber_sum,
    with_anchor,
)
from .elementary import (
    BWD,
    DIV,
    FWD,
    NEGATE,
    SCALE,
    disk_ball,
    inversor_rho,
    make_adder,
    make_conjugator,
    make_constant,
    make_inversor,
    make_multiplier,
    make_pantograph,
    make_squarer,
    make_straight_line,
    make_translator,
    make_triangle,
)
from .poly import Add, Conj, Const, ExprError, Mul, Neg, PolyExpr, Scale, Var, evaluate, parse
from .solve import (
    OutsideCertifiedBall,
    SeedRejected,
    TraceResult,
    VerifyReport,
    enumerate_realizations,
    forward_place,
    refine,
    trace_curve,
    verify_functional,
)
from .compiler import (
    CompileOverflow,
    CompileReport,
    NoSeedFound,
    compile_complex,
    compile_real,
    curve_linkage,
    expand_domain,
    realize_set,
)

__version__ = "0.1.0"
