"""Exact rational feasibility oracle for desk-scale LPs.

Everything here runs in Fraction arithmetic: Fourier-Motzkin elimination
with multiplier tracking decides feasibility of a system a_i'x <= b_i and
produces either an exact witness or exact Farkas multipliers (lambda >= 0
with lambda'A = 0 and lambda'b < 0).  On top of that sit a four-cell
classifier (primal/dual feasibility of an LP), an exact optimal value via
epigraph projection, and exact verification of floating-point certificates.

Sizes are guarded: this is an oracle for tests, not a solver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import GeneralFormLp, StandardFormLp

__all__ = [
    "ExactLp",
    "FeasibilityResult",
    "LpClassification",
    "ExactCheck",
    "decide_feasibility",
    "classify_lp",
    "exact_optimum",
    "verify_certificate_exact",
    "exactify_vector",
]

MAX_VARIABLES = 12
MAX_CONSTRAINTS = 60
_MAX_INTERMEDIATE_ROWS = 50_000


def _frac(x) -> Fraction:
    # Fraction(float) is exact for the stored binary value.
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass
class ExactLp:
    """Inequality system a_i'x <= b_i over the rationals."""

    n: int
    rows: list[list[Fraction]] = field(default_factory=list)
    rhs: list[Fraction] = field(default_factory=list)

    def add_le(self, coeffs: Sequence, b) -> None:
        row = [_frac(v) for v in coeffs]
        if len(row) != self.n:
            raise ValueError(f"expected {self.n} coefficients, got {len(row)}")
        self.rows.append(row)
        self.rhs.append(_frac(b))

    def add_ge(self, coeffs: Sequence, b) -> None:
        self.add_le([-_frac(v) for v in coeffs], -_frac(b))

    def add_eq(self, coeffs: Sequence, b) -> None:
        self.add_le(coeffs, b)
        self.add_ge(coeffs, b)

    @property
    def m(self) -> int:
        return len(self.rows)


@dataclass
class FeasibilityResult:
    feasible: bool
    witness: list[Fraction] | None = None
    farkas: list[Fraction] | None = None


class _Row:
    __slots__ = ("a", "b", "lam", "anc")

    def __init__(
        self,
        a: list[Fraction],
        b: Fraction,
        lam: list[Fraction],
        anc: frozenset[int],
    ):
        self.a = a
        self.b = b
        self.lam = lam
        self.anc = anc  # original rows this one combines


def _canonical_key(a: list[Fraction]) -> tuple | None:
    """Scale so the first nonzero coefficient is +-1; None for a zero row."""
    for v in a:
        if v != 0:
            s = abs(v)
            return tuple(x / s for x in a)
    return None


def _fm_scan(rs: list[_Row]):
    """Drop tautologies and dominated parallel rows; spot contradictions.

    A parallel row is dropped only when some kept row is at least as tight
    AND combines a subset of its ancestors.  Tightness alone is not enough:
    the ancestor-count pruning consults ancestries, and swapping a
    narrow-ancestry row for a tighter wide-ancestry one can starve it of
    the combination that exposes a contradiction.
    """
    groups: dict[tuple, list[tuple[Fraction, _Row]]] = {}
    for r in rs:
        key = _canonical_key(r.a)
        if key is None:
            if r.b < 0:
                return None, r
            continue
        rb = r.b / abs(next(v for v in r.a if v != 0))
        kept = groups.setdefault(key, [])
        if any(sb <= rb and s.anc <= r.anc for sb, s in kept):
            continue
        kept[:] = [(sb, s) for sb, s in kept if not (rb <= sb and r.anc <= s.anc)]
        kept.append((rb, r))
    rows = [s for g in groups.values() for _, s in g]
    return rows, None


def _fm_eliminate(sys: ExactLp, targets: list[int]):
    """Project the targeted variables out, returning (rows, bad, stages).

    bad is a contradictory row (0'x <= negative) when one appears, with its
    Farkas multipliers; stages records the pre-elimination rows per variable
    for witness back-substitution.  Rows combining more original rows than
    eliminations-plus-one are redundant (Imbert's criterion) and dropped,
    which keeps the double-exponential growth in check at oracle scale.
    """
    m = sys.m
    rows: list[_Row] = []
    for i in range(m):
        lam = [Fraction(0)] * m
        lam[i] = Fraction(1)
        rows.append(_Row(list(sys.rows[i]), sys.rhs[i], lam, frozenset((i,))))

    stages: list[tuple[int, list[_Row]]] = []
    rows, bad = _fm_scan(rows)
    if bad is not None:
        return rows, bad, stages

    remaining = list(targets)
    eliminated = 0
    while remaining:
        # Cheapest elimination first: fewest pairwise products.
        def cost(j: int) -> tuple[int, int]:
            p = sum(1 for r in rows if r.a[j] > 0)
            q = sum(1 for r in rows if r.a[j] < 0)
            return (p * q, j)

        j = min(remaining, key=cost)
        remaining.remove(j)
        stages.append((j, rows))
        eliminated += 1

        pos = [r for r in rows if r.a[j] > 0]
        neg = [r for r in rows if r.a[j] < 0]
        new_rows = [r for r in rows if r.a[j] == 0]
        max_anc = eliminated + 1
        for rp, rn in itertools.product(pos, neg):
            anc = rp.anc | rn.anc
            if len(anc) > max_anc:
                continue
            sp, sn = rp.a[j], -rn.a[j]
            a = [rp.a[t] / sp + rn.a[t] / sn for t in range(sys.n)]
            b = rp.b / sp + rn.b / sn
            lam = [rp.lam[t] / sp + rn.lam[t] / sn for t in range(m)]
            new_rows.append(_Row(a, b, lam, anc))
        if len(new_rows) > _MAX_INTERMEDIATE_ROWS:
            raise RuntimeError("elimination produced too many rows")
        rows, bad = _fm_scan(new_rows)
        if bad is not None:
            return rows, bad, stages
    return rows, None, stages


def decide_feasibility(sys: ExactLp) -> FeasibilityResult:
    """Decide a'x <= b exactly.

    When infeasible, farkas holds multipliers over the stored rows in order
    (note add_ge/add_eq store negated/<=-split rows, so multipliers refer to
    those).
    """
    if sys.n > MAX_VARIABLES + 1:
        raise ValueError(f"too many variables for the exact oracle: {sys.n}")
    if sys.m > 3 * MAX_CONSTRAINTS + 2 * MAX_VARIABLES + 1:
        raise ValueError(f"too many constraints for the exact oracle: {sys.m}")

    rows, bad, stages = _fm_eliminate(sys, list(range(sys.n)))
    if bad is not None:
        # Self-check: lam >= 0, lam'A = 0, lam'b < 0 must hold exactly.
        lam = bad.lam
        if any(v < 0 for v in lam):
            raise RuntimeError("negative Farkas multiplier")
        for t in range(sys.n):
            if sum(lam[i] * sys.rows[i][t] for i in range(sys.m)) != 0:
                raise RuntimeError("Farkas multipliers do not cancel the rows")
        if not sum(lam[i] * sys.rhs[i] for i in range(sys.m)) < 0:
            raise RuntimeError("Farkas multipliers do not certify infeasibility")
        return FeasibilityResult(False, farkas=lam)

    # Feasible: back-substitute a witness in reverse elimination order.
    witness = [Fraction(0)] * sys.n
    for j, stage_rows in reversed(stages):
        lo: Fraction | None = None
        hi: Fraction | None = None
        for r in stage_rows:
            if r.a[j] == 0:
                continue
            rest = r.b - sum(
                r.a[t] * witness[t] for t in range(sys.n) if t != j and r.a[t] != 0
            )
            bound = rest / r.a[j]
            if r.a[j] > 0:
                hi = bound if hi is None else min(hi, bound)
            else:
                lo = bound if lo is None else max(lo, bound)
        if lo is not None and hi is not None:
            witness[j] = (lo + hi) / 2
        elif lo is not None:
            witness[j] = lo
        elif hi is not None:
            witness[j] = hi
    for row, rhs in zip(sys.rows, sys.rhs):
        if sum(rv * wv for rv, wv in zip(row, witness) if rv != 0) > rhs:
            raise RuntimeError("back-substituted witness violates the system")
    return FeasibilityResult(True, witness=witness)


def _primal_system(p: StandardFormLp | GeneralFormLp) -> ExactLp:
    a = p.a.to_dense()
    if isinstance(p, StandardFormLp):
        sys = ExactLp(p.n)
        for r in range(p.m):
            sys.add_eq(a[r], p.b[r])
        for i in range(p.n):
            e = [Fraction(0)] * p.n
            e[i] = Fraction(1)
            sys.add_ge(e, 0)
        return sys
    sys = ExactLp(p.n)
    for r in range(p.m):
        sys.add_ge(a[r], p.b[r])
    for i in range(p.n):
        e = [Fraction(0)] * p.n
        e[i] = Fraction(1)
        if np.isfinite(p.l[i]):
            sys.add_ge(e, p.l[i])
        if np.isfinite(p.u[i]):
            sys.add_le(e, p.u[i])
    return sys


def _dual_system(p: StandardFormLp | GeneralFormLp) -> ExactLp:
    at = p.a.to_dense().T
    sys = ExactLp(p.m)
    if isinstance(p, StandardFormLp):
        for i in range(p.n):
            sys.add_le(at[i], p.c[i])
        return sys
    # General form: y >= 0 and sign conditions on r = c - A'y per bound kind.
    masks = p.kind_masks()
    for r in range(p.m):
        e = [Fraction(0)] * p.m
        e[r] = Fraction(1)
        sys.add_ge(e, 0)
    for i in range(p.n):
        if masks.free[i]:
            sys.add_eq(at[i], p.c[i])
        elif masks.lower[i]:
            sys.add_le(at[i], p.c[i])
        elif masks.upper[i]:
            sys.add_ge(at[i], p.c[i])
        # boxed: r_i unrestricted, no constraint
    return sys


@dataclass(frozen=True)
class LpClassification:
    primal_feasible: bool
    dual_feasible: bool

    @property
    def cell(self) -> str:
        if self.primal_feasible and self.dual_feasible:
            return "both_feasible"
        if self.primal_feasible:
            return "dual_infeasible"
        if self.dual_feasible:
            return "primal_infeasible"
        return "both_infeasible"


def classify_lp(p: StandardFormLp | GeneralFormLp) -> LpClassification:
    """Exact feasibility of the problem and its dual; one of four cells."""
    primal = decide_feasibility(_primal_system(p))
    dual = decide_feasibility(_dual_system(p))
    return LpClassification(primal.feasible, dual.feasible)


@dataclass(frozen=True)
class ExactOptimum:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: Fraction | None = None


def exact_optimum(p: StandardFormLp | GeneralFormLp) -> ExactOptimum:
    """Exact optimal value by projecting the epigraph onto the t axis."""
    base = _primal_system(p)
    n = p.n
    sys = ExactLp(n + 1)
    row = [_frac(v) for v in p.c] + [Fraction(-1)]
    sys.add_le(row, 0)  # c'x <= t
    for a, b in zip(base.rows, base.rhs):
        sys.add_le(list(a) + [Fraction(0)], b)
    res = decide_feasibility(sys)
    if not res.feasible:
        return ExactOptimum("infeasible")
    # Project out the original variables; what survives bounds t alone, and
    # the tightest lower bound is the optimal value.
    rows: list[tuple[Fraction, Fraction]] = _project_last(sys, n)
    lo: Fraction | None = None
    for coef, b in rows:
        if coef < 0:
            cand = b / coef
            lo = cand if lo is None else max(lo, cand)
    if lo is None:
        return ExactOptimum("unbounded")
    offset = _frac(p.objective_offset)
    return ExactOptimum("optimal", lo + offset)


def _project_last(sys: ExactLp, n_eliminate: int) -> list[tuple[Fraction, Fraction]]:
    """Eliminate the first n_eliminate variables, return rows on the last one."""
    rows, bad, _ = _fm_eliminate(sys, list(range(n_eliminate)))
    if bad is not None:
        # Callers establish feasibility before projecting.
        raise RuntimeError("projection of an infeasible system")
    t = sys.n - 1
    return [(r.a[t], r.b) for r in rows if r.a[t] != 0]


def exactify_vector(
    v: np.ndarray, round_tol: float = 1e-12, max_denominator: int = 10**9
) -> list[Fraction]:
    """Snap a float certificate to rationals.

    Normalizes by the largest magnitude, zeroes entries below round_tol, and
    limits denominators so that accumulated solver roundoff does not survive
    into the exact sign checks.
    """
    arr = np.asarray(v, dtype=np.float64)
    scale = float(np.max(np.abs(arr))) if arr.size else 0.0
    if scale == 0.0:
        return [Fraction(0)] * arr.size
    out = []
    for x in arr / scale:
        if abs(x) <= round_tol:
            out.append(Fraction(0))
        else:
            out.append(Fraction(x).limit_denominator(max_denominator))
    return out


@dataclass(frozen=True)
class ExactCheck:
    valid: bool
    reasons: tuple[str, ...] = ()


def verify_certificate_exact(
    cert: np.ndarray, p: StandardFormLp | GeneralFormLp, kind: str
) -> ExactCheck:
    """Exact sign checks of a snapped float certificate.

    kind "primal" verifies a primal-infeasibility certificate (a dual ray),
    kind "dual" a dual-infeasibility certificate (a primal ray).
    """
    if kind not in ("primal", "dual"):
        raise ValueError(f"unknown certificate kind {kind!r}")
    vec = exactify_vector(cert)
    reasons: list[str] = []
    a = p.a.to_dense()
    if all(v == 0 for v in vec):
        return ExactCheck(False, ("certificate is zero",))

    if isinstance(p, StandardFormLp):
        if kind == "primal":
            aty = [sum(_frac(a[r][i]) * vec[r] for r in range(p.m)) for i in range(p.n)]
            if any(v < 0 for v in aty):
                reasons.append("A'y has a negative component")
            bty = sum(_frac(p.b[r]) * vec[r] for r in range(p.m))
            if not bty < 0:
                reasons.append("b'y is not negative")
        else:
            if any(v < 0 for v in vec):
                reasons.append("ray has a negative component")
            ax = [sum(_frac(a[r][i]) * vec[i] for i in range(p.n)) for r in range(p.m)]
            if any(v != 0 for v in ax):
                reasons.append("Ax is not zero")
            ctx = sum(_frac(p.c[i]) * vec[i] for i in range(p.n))
            if not ctx < 0:
                reasons.append("c'x is not negative")
        return ExactCheck(not reasons, tuple(reasons))

    masks = p.kind_masks()
    if kind == "primal":
        if any(v < 0 for v in vec):
            reasons.append("y has a negative component")
        aty = [sum(_frac(a[r][i]) * vec[r] for r in range(p.m)) for i in range(p.n)]
        # r = -A'y must respect the signs that keep the ray objective finite.
        obj = sum(_frac(p.b[r]) * vec[r] for r in range(p.m))
        for i in range(p.n):
            r_i = -aty[i]
            if masks.free[i]:
                if r_i != 0:
                    reasons.append(f"free variable {i} has nonzero reduced cost")
            elif masks.lower[i]:
                if r_i < 0:
                    reasons.append(f"lower-bounded variable {i} has negative reduced cost")
                else:
                    obj += _frac(p.l[i]) * r_i
            elif masks.upper[i]:
                if r_i > 0:
                    reasons.append(f"upper-bounded variable {i} has positive reduced cost")
                else:
                    obj += _frac(p.u[i]) * r_i
            else:
                obj += _frac(p.l[i]) * max(r_i, Fraction(0))
                obj -= _frac(p.u[i]) * max(-r_i, Fraction(0))
        if not obj > 0:
            reasons.append("ray objective is not positive")
    else:
        ax = [sum(_frac(a[r][i]) * vec[i] for i in range(p.n)) for r in range(p.m)]
        if any(v < 0 for v in ax):
            reasons.append("Ad has a negative component")
        for i in range(p.n):
            if masks.boxed[i] and vec[i] != 0:
                reasons.append(f"boxed variable {i} moves along the ray")
            elif masks.lower[i] and vec[i] < 0:
                reasons.append(f"lower-bounded variable {i} decreases along the ray")
            elif masks.upper[i] and vec[i] > 0:
                reasons.append(f"upper-bounded variable {i} increases along the ray")
        ctd = sum(_frac(p.c[i]) * vec[i] for i in range(p.n))
        if not ctd < 0:
            reasons.append("c'd is not negative")
    return ExactCheck(not reasons, tuple(reasons))
