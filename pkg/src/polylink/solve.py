"""Numerical realization machinery.

Forward placement runs a block's closed-form program; refinement is damped
Gauss-Newton (Levenberg-Marquardt) on the constraint residual; curve tracing
is a pseudo-arclength predictor-corrector whose corrector runs Newton in
input space through the placement program (the linkage is its own
evaluator), after which each point's realization is certified by refinement
with the input softly pinned.  All realizations accepted anywhere in this
module satisfy the constraint tolerance of 1e-9.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    AbstractLinkage,
    CONSTRAINT_TOL,
    LinkageError,
    Realization,
    residual_from_positions,
)
from .placement import run_program
from .poly import evaluate

REFINE_TOL = 1e-12
SPARSE_CUTOFF = 400  # number of position unknowns above which solves go sparse


class OutsideCertifiedBall(LinkageError):
    pass


class SeedRejected(LinkageError):
    pass


def parse_branch(text: str) -> tuple[int, ...]:
    if any(ch not in "01" for ch in text):
        raise LinkageError("branch vector must be a string of 0s and 1s")
    return tuple(int(ch) for ch in text)


def canonical_branch(f) -> tuple[int, ...]:
    return (0,) * f.placement.n_bits


def forward_place(f, inputs, branch=None, check_ball: bool = True) -> Realization:
    """Closed-form realization at the given input, one branch per Z/2 bit.

    Output positions are independent of the branch (functionality); inputs
    outside the certified ball are refused rather than extrapolated.
    """
    values = tuple(complex(v) for v in inputs)
    if len(values) != len(f.inputs):
        raise LinkageError(f"expected {len(f.inputs)} input value(s)")
    if check_ball and not f.contains_input(values, slack=1e-12):
        raise OutsideCertifiedBall(
            f"input {values} is outside the certified ball of radius "
            f"{f.certified_ball.radius:g}"
        )
    if branch is None:
        branch = canonical_branch(f)
    pos = run_program(f.placement, values, branch)
    return Realization(pos)


def enumerate_realizations(f, inputs) -> list[Realization]:
    """One realization per branch vector, in lexicographic bit order."""
    values = tuple(complex(v) for v in inputs)
    if not f.contains_input(values, slack=0.0):
        raise OutsideCertifiedBall("input must lie strictly inside the certified ball")
    if f.placement.n_bits > 20:
        raise LinkageError(
            f"{f.placement.n_bits} branch bits; enumeration is limited to 2^20 sheets"
        )
    out = []
    for bits in itertools.product((0, 1), repeat=f.placement.n_bits):
        out.append(Realization(run_program(f.placement, values, bits)))
    return out


def distinct_realizations(linkage: AbstractLinkage, reals, tol: float = 1e-8) -> int:
    arrays = [r.as_array(linkage) for r in reals]
    kept: list[np.ndarray] = []
    for a in arrays:
        if all(np.max(np.abs(a - b)) > tol for b in kept):
            kept.append(a)
    return len(kept)


# ---------------------------------------------------------------------------
# Jacobian of the constraint residual


def _jacobian(linkage: AbstractLinkage, z: np.ndarray, sparse: bool):
    e_u, e_v, e_l, c_a, c_b, c_c, c_r, c_s, m_v, _ = linkage._arrays()
    rows, cols, data = [], [], []
    base = 0
    if e_u.size:
        d = z[e_u] - z[e_v]
        dist = np.abs(d)
        safe = np.where(dist > 1e-300, dist, 1.0)
        ux = np.where(dist > 1e-300, d.real / safe, 0.0)
        uy = np.where(dist > 1e-300, d.imag / safe, 0.0)
        idx = np.arange(e_u.size)
        rows += [idx, idx, idx, idx]
        cols += [2 * e_u, 2 * e_u + 1, 2 * e_v, 2 * e_v + 1]
        data += [ux, uy, -ux, -uy]
        base = e_u.size
    if c_a.size:
        idx = base + 2 * np.arange(c_a.size)
        ones = np.ones(c_a.size)
        for off, comp in ((0, 0), (1, 1)):
            rows += [idx + off, idx + off, idx + off]
            cols += [2 * c_b + comp, 2 * c_a + comp, 2 * c_c + comp]
            data += [ones, -c_r, -c_s]
        base += 2 * c_a.size
    if m_v.size:
        idx = base + 2 * np.arange(m_v.size)
        ones = np.ones(m_v.size)
        for off, comp in ((0, 0), (1, 1)):
            rows.append(idx + off)
            cols.append(2 * m_v + comp)
            data.append(ones)
        base += 2 * m_v.size
    n_rows = linkage.n_residual_rows()
    n_cols = 2 * z.size
    if not rows:
        mat = sp.csr_matrix((n_rows, n_cols)) if sparse else np.zeros((n_rows, n_cols))
        return mat
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    m = sp.coo_matrix((data, (rows, cols)), shape=(n_rows, n_cols))
    return m.tocsr() if sparse else m.toarray()


class _PinRows:
    """Soft penalty rows pinning input vertices toward target coordinates."""

    def __init__(self, vertex_ids, targets, weight, real_only=False):
        self.vertex_ids = list(vertex_ids)
        self.targets = [complex(t) for t in targets]
        self.weight = weight
        self.real_only = real_only

    def residual(self, z: np.ndarray) -> np.ndarray:
        out = []
        for v, t in zip(self.vertex_ids, self.targets):
            d = z[v] - t
            out.append(self.weight * d.real)
            if not self.real_only:
                out.append(self.weight * d.imag)
        return np.array(out)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        per = 1 if self.real_only else 2
        J = np.zeros((per * len(self.vertex_ids), 2 * z.size))
        row = 0
        for v in self.vertex_ids:
            J[row, 2 * v] = self.weight
            row += 1
            if not self.real_only:
                J[row, 2 * v + 1] = self.weight
                row += 1
        return J




def refine(
    linkage: AbstractLinkage,
    seed: Realization,
    extra=None,
    tol: float = REFINE_TOL,
    max_iter: int = 100,
) -> tuple[Realization, str]:
    """Damped Gauss-Newton on the constraint residual.

    Returns (realization, status) with status converged / stalled / diverged;
    an exact seed converges in zero iterations.
    """
    z = seed.as_array(linkage)
    sparse = 2 * z.size > SPARSE_CUTOFF

    def full_residual(zz):
        r = residual_from_positions(linkage, zz)
        if extra is not None:
            r = np.concatenate([r, extra.residual(zz)])
        return r

    r = full_residual(z)
    norm0 = np.linalg.norm(r)
    lam = 1e-6
    status = "stalled"
    for _ in range(max_iter):
        max_abs = float(np.max(np.abs(r))) if r.size else 0.0
        if max_abs < tol:
            status = "converged"
            break
        J = _jacobian(linkage, z, sparse)
        if extra is not None:
            Je = extra.jacobian(z)
            J = sp.vstack([J, sp.csr_matrix(Je)]).tocsr() if sparse else np.vstack([J, Je])
        if sparse:
            JtJ = (J.T @ J).tocsc()
        else:
            JtJ = J.T @ J
        g = J.T @ r
        norm_r = np.linalg.norm(r)
        improved = False
        for _attempt in range(6):
            if sparse:
                A = JtJ + sp.identity(JtJ.shape[0], format="csc") * (lam + 1e-14)
                try:
                    delta = spla.spsolve(A, -g)
                except RuntimeError:
                    delta = None
            else:
                A = JtJ + (lam + 1e-14) * np.eye(JtJ.shape[0])
                try:
                    delta = np.linalg.solve(A, -g)
                except np.linalg.LinAlgError:
                    delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                d = np.asarray(delta).ravel()
                z_new = z + (d[0::2] + 1j * d[1::2])
                r_new = full_residual(z_new)
                if np.all(np.isfinite(r_new)) and np.linalg.norm(r_new) < norm_r:
                    z, r = z_new, r_new
                    lam = max(lam / 3.0, 1e-14)
                    improved = True
                    break
            lam *= 10.0
        if not improved:
            status = "stalled"
            break
        new_norm = np.linalg.norm(r)
        if new_norm > 1e8 * (1.0 + norm0) or not np.all(np.isfinite(z)):
            status = "diverged"
            break
        # numerical floor: progress has stopped within two decades of the goal
        if new_norm > 0.5 * norm_r and max_abs < 100.0 * tol:
            status = "stalled"
            break
    else:
        status = "stalled"
    max_abs = float(np.max(np.abs(r))) if r.size else 0.0
    if status != "diverged" and max_abs < tol:
        status = "converged"
    positions = {v.index: complex(z[i]) for i, v in enumerate(linkage.vertices)}
    return Realization(positions), status


# ---------------------------------------------------------------------------
# sampling and the verification harness


def sample_ball(f, n: int, rng) -> list[tuple[complex, ...]]:
    """Uniform samples in the certified ball (real samples for real blocks)."""
    m = len(f.inputs)
    if m == 0:
        return [() for _ in range(n)]
    radius = f.certified_ball.radius
    if math.isinf(radius):
        radius = 1.0
    center = np.array(f.certified_ball.center, dtype=complex)
    real = f.field_tag == "real"
    d = m if real else 2 * m
    out = []
    for _ in range(n):
        g = rng.standard_normal(d)
        g /= max(np.linalg.norm(g), 1e-300)
        u = rng.random() ** (1.0 / d)
        step = radius * u * g
        if real:
            pt = center + step
        else:
            pt = center + step[0::2] + 1j * step[1::2]
        out.append(tuple(complex(p) for p in pt))
    return out


@dataclass
class VerifyReport:
    samples: int
    max_residual: float = 0.0
    max_rel_error: float = 0.0
    sym_order: int = 1
    counts: list = field(default_factory=list)  # (point, expected, observed)
    failures: list = field(default_factory=list)
    residual_tol: float = CONSTRAINT_TOL
    value_rtol: float = 1e-6

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = [
            f"samples            {self.samples}",
            f"max residual       {self.max_residual:.3e}  (tol {self.residual_tol:g})",
            f"max relative error {self.max_rel_error:.3e}  (tol {self.value_rtol:g})",
            f"sym order          {self.sym_order}",
        ]
        for point, expected, observed in self.counts:
            lines.append(f"branch count at {point}: {observed} (expected {expected})")
        lines.append("PASS" if self.passed else "FAIL: " + "; ".join(self.failures))
        return "\n".join(lines)


def verify_functional(
    f,
    exprs=None,
    n: int = 200,
    rng_seed: int = 7,
    residual_tol: float = CONSTRAINT_TOL,
    value_rtol: float = 1e-6,
) -> VerifyReport:
    """Sample the certified ball; check placement residual, output values
    against direct expression evaluation, and spot-check realization counts
    against sym_order."""
    from .core import residual as residual_of

    if exprs is None:
        exprs = f.exprs
    rng = np.random.default_rng(rng_seed)
    report = VerifyReport(samples=n, sym_order=f.sym_order,
                          residual_tol=residual_tol, value_rtol=value_rtol)
    pts = sample_ball(f, n, rng)
    for pt in pts:
        try:
            phi = forward_place(f, pt)
        except LinkageError as exc:
            report.failures.append(f"placement failed at {pt}: {exc}")
            continue
        max_abs, _ = residual_of(f.linkage, phi)
        report.max_residual = max(report.max_residual, max_abs)
        if max_abs > residual_tol:
            report.failures.append(f"residual {max_abs:.3e} at {pt}")
        if exprs is not None:
            for q, e in zip(f.outputs, exprs):
                want = evaluate(e, pt)
                got = phi.positions[q]
                rel = abs(got - want) / (1.0 + abs(want))
                report.max_rel_error = max(report.max_rel_error, rel)
                if rel > value_rtol:
                    report.failures.append(
                        f"output {got} != {want} (rel {rel:.3e}) at {pt}"
                    )
    # realization counts at a few interior points
    spots = pts[: min(3, len(pts))]
    for pt in spots:
        if f.placement.n_bits <= 6:
            reals = enumerate_realizations(f, pt)
            observed = distinct_realizations(f.linkage, reals)
            expected = f.sym_order
        else:
            rngb = np.random.default_rng(rng_seed + 1)
            seen = {tuple(0 for _ in range(f.placement.n_bits))}
            while len(seen) < 32:
                seen.add(tuple(int(b) for b in rngb.integers(0, 2, f.placement.n_bits)))
            reals = [forward_place(f, pt, branch=b) for b in sorted(seen)]
            observed = distinct_realizations(f.linkage, reals)
            expected = len(seen)
        report.counts.append((pt, expected, observed))
        if observed != expected:
            report.failures.append(
                f"{observed} distinct realizations at {pt}, expected {expected}"
            )
        if exprs is not None and reals:
            outs = [
                max(abs(r.positions[q] - reals[0].positions[q]) for q in f.outputs)
                for r in reals
            ]
            spread = max(outs)
            if spread > 1e-9:
                report.failures.append(f"output spread over branches {spread:.3e} at {pt}")
    return report


# ---------------------------------------------------------------------------
# curve tracing


@dataclass
class TraceResult:
    points: list           # input coordinates per accepted step
    residuals: list        # linkage residual per point
    constraint_errors: list  # |f - target| per point, from the defining expressions
    closed_loop: bool
    exit_reason: str

    def __len__(self):
        return len(self.points)


def _flat_to_inputs(closed, flat: np.ndarray) -> tuple[complex, ...]:
    real = closed.field_tag == "real"
    vals = []
    for j in range(len(closed.inputs)):
        if real:
            vals.append(complex(flat[j], 0.0))
        else:
            vals.append(complex(flat[2 * j], flat[2 * j + 1]))
    return tuple(vals)


def _place_open(closed, values, strict=True):
    return run_program(
        closed.source.placement, values, canonical_branch(closed.source), strict=strict
    )


def _place_closed(closed, values, strict=True):
    """Run the open placement program and tag positions with closed ids."""
    pos_open = _place_open(closed, values, strict=strict)
    return {closed.vmap[v]: p for v, p in pos_open.items()}


def _closure_map(closed):
    """g(flat input) -> closure rows (output minus target, real components),
    evaluated through the placement program."""

    def g(flat: np.ndarray) -> np.ndarray:
        vals = _flat_to_inputs(closed, flat)
        pos_open = _place_open(closed, vals)
        out = []
        for q, t in zip(closed.source.outputs, closed.targets):
            d = pos_open[q] - t
            out.append(d.real)
            out.append(d.imag)
        return np.array(out)

    return g


def _fd_jacobian(g, x: np.ndarray, scale: float, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the closure map."""
    r0 = g(x)
    J = np.zeros((r0.size, x.size))
    for k in range(x.size):
        dd = rel_step * scale
        xp, xm = x.copy(), x.copy()
        xp[k] += dd
        xm[k] -= dd
        J[:, k] = (g(xp) - g(xm)) / (2.0 * dd)
    return J


def _newton_correct(closed, g, x0, anchor, tangent, scale, max_iter=25):
    """Newton on the closure rows, with the along-tangent coordinate pinned
    when a tangent is given (pseudo-arclength corrector in input space).

    The placement program is the evaluator, so any converged point comes
    with a machine-accurate realization for free.
    """
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        try:
            r = g(x)
        except LinkageError:
            return None
        rows = [r]
        if tangent is not None:
            rows.append(np.array([float(np.dot(x - anchor, tangent))]))
        rr = np.concatenate(rows)
        if np.max(np.abs(rr)) < 1e-12:
            return x
        try:
            J = _fd_jacobian(g, x, scale)
        except LinkageError:
            return None
        if tangent is not None:
            J = np.vstack([J, tangent[None, :]])
        dx, *_ = np.linalg.lstsq(J, -rr, rcond=None)
        n = np.linalg.norm(dx)
        if n > scale:
            dx *= scale / n
        x = x + dx
        if not np.all(np.isfinite(x)):
            return None
    try:
        r = g(x)
    except LinkageError:
        return None
    rows = [r] if tangent is None else [r, np.array([float(np.dot(x - anchor, tangent))])]
    if np.max(np.abs(np.concatenate(rows))) < 1e-10:
        return x
    return None


def _curve_tangent(closed, g, x, scale, prev=None):
    """Unit tangent of the admissible set at x: the null direction of the
    closure Jacobian.  Returns None at an isolated (zero-dimensional) point.

    The Jacobian is differenced with a coarse step: direction accuracy of
    1e-4 is plenty for a predictor and keeps placement noise out of the
    nullity decision.
    """
    J = _fd_jacobian(g, x, scale, rel_step=1e-4)
    if J.size == 0:
        # no closure rows (identically satisfied): any direction works
        t = prev if prev is not None else np.eye(x.size)[0]
        return t / np.linalg.norm(t)
    _u, s, vt = np.linalg.svd(J)
    smax = s[0] if s.size else 0.0
    nullity = int(np.sum(s < 1e-5 * max(1.0, smax))) + max(0, x.size - len(s))
    if nullity < 1:
        return None
    t = vt[-1]
    if prev is not None and float(np.dot(t, prev)) < 0.0:
        t = -t
    return t


def trace_curve(closed, seed_input, step: float, max_steps: int = 1000) -> TraceResult:
    """Pseudo-arclength trace of the closed linkage's admissible input set.

    The predictor steps along the null direction of the closure system; the
    corrector is Newton through the closed-form placement with the input
    pinned along the tangent, after which the realization is polished by
    refine with the input softly pinned (weight 1e3) as a certificate.
    Stops on loop closure (passing within step/2 of the start after at
    least 10 steps), on leaving the certified ball, at an isolated point,
    or after max_steps.
    """
    if step <= 0:
        raise LinkageError("step must be positive")
    seeds = (
        (seed_input,)
        if not isinstance(seed_input, (tuple, list))
        else tuple(seed_input)
    )
    values = tuple(complex(v) for v in seeds)
    if len(values) != len(closed.inputs):
        raise SeedRejected(f"expected {len(closed.inputs)} seed coordinate(s)")
    from .functional import disks_contain

    if not disks_contain(closed.coord_disks, values, slack=1e-9):
        raise SeedRejected("seed is outside the certified ball")
    try:
        err0 = closed.constraint_error(values)
    except LinkageError:
        err0 = 0.0
    if err0 > 1e-3:
        raise SeedRejected(f"seed violates the constraints by {err0:.3e}")

    g = _closure_map(closed)
    real = closed.field_tag == "real"
    flat0 = np.array(
        [c for v in values for c in ((v.real,) if real else (v.real, v.imag))]
    )
    scale = max(1.0, float(np.max(np.abs(flat0))))

    x = _newton_correct(closed, g, flat0, flat0, None, scale)
    if x is None:
        raise SeedRejected("corrector failed at the seed")

    def settle(flat):
        """Realization at the corrected input: placement plus pinned refine."""
        vals = _flat_to_inputs(closed, flat)
        phi = Realization(_place_closed(closed, vals))
        pin = _PinRows(closed.inputs, vals, 1e3, real_only=real)
        phi, _status = refine(closed.linkage, phi, extra=pin, tol=REFINE_TOL, max_iter=10)
        from .core import residual as residual_of

        r, _ = residual_of(closed.linkage, phi)
        try:
            c = closed.constraint_error(vals)
        except LinkageError:
            c = float("nan")
        return phi, vals, r, c

    phi, vals, r, c = settle(x)
    if r > CONSTRAINT_TOL:
        raise SeedRejected(f"seed realization residual {r:.3e}")
    points, residuals, errors = [vals], [r], [c]
    points_flat = [x.copy()]
    start = x.copy()

    tangent = _curve_tangent(closed, g, x, scale)
    if tangent is None:
        return TraceResult(points, residuals, errors, False, "isolated point")

    h = step
    successes = 0
    closed_loop = False
    reason = "max_steps"
    prev_tangent = tangent
    for _k in range(max_steps):
        tangent = _curve_tangent(closed, g, x, scale, prev_tangent)
        if tangent is None:
            reason = "isolated point"
            break
        target = x + h * tangent
        x_try = _newton_correct(closed, g, target, target, tangent, scale)
        if x_try is None:
            h *= 0.5
            successes = 0
            if h < step / 64.0:
                reason = "corrector failed"
                break
            continue
        successes += 1
        if successes >= 5:
            h = min(2.0 * h, step)
        prev_tangent = tangent
        x = x_try
        phi, vals, r, c = settle(x)
        if r > CONSTRAINT_TOL:
            reason = "realization residual blew up"
            break
        if not disks_contain(closed.coord_disks, vals, slack=1e-9):
            reason = "left certified ball"
            break
        prev_flat = points_flat[-1]
        points_flat.append(x.copy())
        points.append(vals)
        residuals.append(r)
        errors.append(c)
        if len(points) > 10 and _segment_distance(start, prev_flat, x) < step / 2.0:
            closed_loop = True
            reason = "loop closed"
            break
    return TraceResult(points, residuals, errors, closed_loop, reason)


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Distance from p to the segment [a, b]; catches a loop passing the start
    between two samples."""
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-300:
        return float(np.linalg.norm(p - a))
    t = min(1.0, max(0.0, float(np.dot(p - a, ab)) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))
