"""Primal-dual hybrid gradient iteration for LP, with certificate checks.

Standard form   min c'x : Ax = b, x >= 0
    x+ = proj_{>=0}(x - eta A'y - eta c)
    y+ = y + tau A(2x+ - x) - tau b

General form    min c'x : Ax >= b, l <= x <= u
    x+ = proj_[l,u](x - eta (c - A'y))
    y+ = proj_{>=0}(y + tau (b - A(2x+ - x)))

With eta * tau * ||A||^2 < 1 the update is an averaged (firmly nonexpansive)
map in the M-norm, so iterates either converge to a saddle point or drift
along the infimal displacement direction; run() watches both outcomes at a
fixed check interval.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import certificates as certs
from .linalg import MNorm, SparseMatrix, StepSizes
from .model import GeneralFormLp, StandardFormLp, clip_to_dual_signs, validate

__all__ = [
    "PdhgConfig",
    "PdhgState",
    "StandardFormOperator",
    "GeneralFormOperator",
    "make_operator",
    "step",
    "step_standard",
    "step_general",
    "recover_r",
    "KktResiduals",
    "kkt_residual",
    "dual_objective",
    "active_pattern",
    "inclusion_residual",
    "TraceRecord",
    "SolveStatus",
    "SolveOutcome",
    "run",
]

# Below this many entries the operator keeps A dense; one BLAS call per
# product beats sparse bookkeeping at desk scale.
_DENSE_LIMIT = 10_000


@dataclass(frozen=True)
class PdhgConfig:
    max_iters: int = 1_000_000
    eps: float = 1e-8
    kkt_tol: float = 1e-8
    step_factor: float = 0.9
    check_interval: int = 40
    divergence_limit: float = 1e50
    # After one side certifies, keep iterating this much longer for the
    # other side before declaring a single-sided verdict.
    grace_factor: float = 2.0
    grace_min_extra: int = 500

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.check_interval < 1:
            raise ValueError("check_interval must be positive")
        if not (self.eps > 0 and self.kkt_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class PdhgState:
    """Iterate bundle after k steps; sums cover z^1..z^k for averaging."""

    k: int
    x: np.ndarray
    y: np.ndarray
    x_prev: np.ndarray
    y_prev: np.ndarray
    sum_x: np.ndarray
    sum_y: np.ndarray

    @classmethod
    def initial(
        cls, n: int, m: int, x0: np.ndarray | None = None, y0: np.ndarray | None = None
    ) -> "PdhgState":
        x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
        y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=np.float64).copy()
        return cls(
            k=0,
            x=x,
            y=y,
            x_prev=x.copy(),
            y_prev=y.copy(),
            sum_x=np.zeros(n),
            sum_y=np.zeros(m),
        )


class _OperatorBase:
    """Shared plumbing: cached products and the M-norm of the iteration."""

    coupling_sign = 1

    def __init__(self, a: SparseMatrix, steps: StepSizes):
        self.a = a
        self.steps = steps
        m, n = a.shape
        self.n = n
        self.m = m
        if m * n <= _DENSE_LIMIT:
            dense = a.to_dense()
            dense_t = np.ascontiguousarray(dense.T)
            self._mat = lambda v: dense @ v
            self._rmat = lambda v: dense_t @ v
        else:
            csr = a.csr
            csc = a.csr.T.tocsr()
            self._mat = lambda v: csr @ v
            self._rmat = lambda v: csc @ v
        self._m_norm: MNorm | None = None

    def m_norm(self) -> MNorm:
        if self._m_norm is None:
            self._m_norm = MNorm(self.a, self.steps, self.coupling_sign)
        return self._m_norm

    def apply_z(self, z: np.ndarray) -> np.ndarray:
        """Stacked (x, y) convenience view of apply."""
        x, y = self.apply(z[: self.n], z[self.n :])
        return np.concatenate([x, y])


class StandardFormOperator(_OperatorBase):
    coupling_sign = 1

    def __init__(self, p: StandardFormLp, steps: StepSizes):
        super().__init__(p.a, steps)
        self.p = p
        self._eta_c = steps.eta * p.c
        self._tau_b = steps.tau * p.b

    def apply(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = x - self.steps.eta * self._rmat(y)
        w -= self._eta_c
        np.maximum(w, 0.0, out=w)
        y1 = y + self.steps.tau * self._mat(2.0 * w - x)
        y1 -= self._tau_b
        return w, y1


class GeneralFormOperator(_OperatorBase):
    coupling_sign = -1

    def __init__(self, p: GeneralFormLp, steps: StepSizes):
        super().__init__(p.a, steps)
        self.p = p
        self._eta_c = steps.eta * p.c
        self._tau_b = steps.tau * p.b

    def apply(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = x + self.steps.eta * self._rmat(y)
        w -= self._eta_c
        np.clip(w, self.p.l, self.p.u, out=w)
        y1 = y - self.steps.tau * self._mat(2.0 * w - x)
        y1 += self._tau_b
        np.maximum(y1, 0.0, out=y1)
        return w, y1


def make_operator(
    p: StandardFormLp | GeneralFormLp, steps: StepSizes
) -> StandardFormOperator | GeneralFormOperator:
    if isinstance(p, StandardFormLp):
        return StandardFormOperator(p, steps)
    return GeneralFormOperator(p, steps)


def step(op: _OperatorBase, state: PdhgState) -> PdhgState:
    """One iteration, returning a fresh state with the averages advanced."""
    x1, y1 = op.apply(state.x, state.y)
    return PdhgState(
        k=state.k + 1,
        x=x1,
        y=y1,
        x_prev=state.x,
        y_prev=state.y,
        sum_x=state.sum_x + x1,
        sum_y=state.sum_y + y1,
    )


def step_standard(state: PdhgState, p: StandardFormLp, steps: StepSizes) -> PdhgState:
    return step(StandardFormOperator(p, steps), state)


def step_general(state: PdhgState, p: GeneralFormLp, steps: StepSizes) -> PdhgState:
    return step(GeneralFormOperator(p, steps), state)


def recover_r(p: GeneralFormLp, y: np.ndarray) -> np.ndarray:
    """Reduced costs: c - A'y projected onto the dual-finiteness signs."""
    return clip_to_dual_signs(p.c - p.a.rmatvec(y), p.kind_masks())


@dataclass(frozen=True)
class KktResiduals:
    primal: float
    dual: float
    gap: float

    @property
    def max(self) -> float:
        return max(self.primal, self.dual, self.gap)


def dual_objective(p: GeneralFormLp, y: np.ndarray, r: np.ndarray) -> float:
    """b'y + l'r_+ - u'r_- over the finite-bound terms."""
    fin_l = np.isfinite(p.l)
    fin_u = np.isfinite(p.u)
    val = float(p.b @ y)
    val += float(p.l[fin_l] @ np.maximum(r[fin_l], 0.0))
    val -= float(p.u[fin_u] @ np.maximum(-r[fin_u], 0.0))
    return val + p.objective_offset


def kkt_residual(
    p: StandardFormLp | GeneralFormLp,
    x: np.ndarray,
    y: np.ndarray,
    r: np.ndarray | None = None,
) -> KktResiduals:
    """Relative optimality residuals: primal and dual feasibility plus gap,
    each scaled by 1 + the magnitude of the data it is measured against."""
    ax = p.a.matvec(x)
    aty = p.a.rmatvec(y)
    b_scale = 1.0 + float(np.max(np.abs(p.b), initial=0.0))
    c_scale = 1.0 + float(np.max(np.abs(p.c), initial=0.0))
    if isinstance(p, StandardFormLp):
        # The iteration's dual variable multiplies (Ax - b) in the ascent
        # form, so dual feasibility reads A'y + c >= 0 and the dual
        # objective is -b'y.
        primal = max(
            float(np.max(np.abs(ax - p.b), initial=0.0)),
            float(np.max(np.maximum(-x, 0.0), initial=0.0)),
        )
        dual = float(np.max(np.maximum(-aty - p.c, 0.0), initial=0.0))
        pobj = float(p.c @ x)
        dobj = -float(p.b @ y)
    else:
        if r is None:
            r = recover_r(p, y)
        primal = max(
            float(np.max(np.maximum(p.b - ax, 0.0), initial=0.0)),
            float(np.max(np.maximum(p.l - x, 0.0), initial=0.0)),
            float(np.max(np.maximum(x - p.u, 0.0), initial=0.0)),
        )
        dual = max(
            float(np.max(np.abs(p.c - aty - r), initial=0.0)),
            float(np.max(np.maximum(-y, 0.0), initial=0.0)),
        )
        pobj = float(p.c @ x)
        dobj = dual_objective(p, y, r) - p.objective_offset
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return KktResiduals(primal / b_scale, dual / c_scale, gap)


def active_pattern(
    p: StandardFormLp | GeneralFormLp, x: np.ndarray, y: np.ndarray
) -> np.ndarray:
    """Integer code of which projections are active; exact comparisons are
    safe because the projections write the bound values verbatim."""
    if isinstance(p, StandardFormLp):
        return (x == 0.0).astype(np.int8)
    code = (x == p.l).astype(np.int8) + 2 * (x == p.u).astype(np.int8)
    return np.concatenate([code, (y == 0.0).astype(np.int8)])


def inclusion_residual(op: _OperatorBase, x: np.ndarray, y: np.ndarray) -> float:
    """Take one step from (x, y) and measure how far the step conditions are
    from the required normal-cone memberships; exact steps give ~0."""
    eta, tau = op.steps.eta, op.steps.tau
    x1, y1 = op.apply(x, y)
    if isinstance(op, StandardFormOperator):
        pp = op.p
        s = (x - x1) / eta - pp.a.rmatvec(y) - pp.c
        # s must lie in the normal cone of the nonnegative orthant at x1:
        # nonpositive where x1 is at the bound, zero elsewhere.
        viol_x = float(np.max(np.maximum(s, 0.0), initial=0.0))
        interior = x1 > 0.0
        if np.any(interior):
            viol_x = max(viol_x, float(np.max(np.abs(s[interior]))))
        t = (y - y1) / tau - pp.b + pp.a.matvec(2.0 * x1 - x)
        viol_y = float(np.max(np.abs(t), initial=0.0))
        return max(viol_x, viol_y)
    pp = op.p
    s = (x - x1) / eta + pp.a.rmatvec(y) - pp.c
    at_l = x1 == pp.l
    at_u = x1 == pp.u
    interior = ~(at_l | at_u)
    viol_x = 0.0
    if np.any(interior):
        viol_x = float(np.max(np.abs(s[interior])))
    only_l = at_l & ~at_u
    only_u = at_u & ~at_l
    if np.any(only_l):
        viol_x = max(viol_x, float(np.max(np.maximum(s[only_l], 0.0))))
    if np.any(only_u):
        viol_x = max(viol_x, float(np.max(np.maximum(-s[only_u], 0.0))))
    t = (y - y1) / tau + pp.b - pp.a.matvec(2.0 * x1 - x)
    at_zero = y1 == 0.0
    viol_y = 0.0
    if np.any(~at_zero):
        viol_y = float(np.max(np.abs(t[~at_zero])))
    if np.any(at_zero):
        viol_y = max(viol_y, float(np.max(np.maximum(t[at_zero], 0.0))))
    return max(viol_x, viol_y)


@dataclass(frozen=True)
class TraceRecord:
    """One row per sequence kind per check; field names match the CSV header.

    scaled_err and obj_term describe the primal-infeasibility test of that
    sequence (obj_term is the certificate objective; scaled_err is None when
    the objective term is not positive).  kkt and active_changed are
    per-check values repeated across the three rows.  ms is wall time since
    the run started.
    """

    k: int
    seq: str
    scaled_err: float | None
    obj_term: float
    kkt: float
    active_changed: bool
    ms: float


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    BOTH_INFEASIBLE = "both_infeasible"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL_ERROR = "numerical_error"


@dataclass
class SolveOutcome:
    status: SolveStatus
    x: np.ndarray
    y: np.ndarray
    r: np.ndarray | None
    iterations: int
    kkt: KktResiduals | None
    primal_objective: float
    dual_objective: float | None
    primal_certificate: certs.CertCheckReport | None
    dual_certificate: certs.CertCheckReport | None
    trace: list[TraceRecord] = field(default_factory=list)
    state: PdhgState | None = None
    steps: StepSizes | None = None


def run(
    p: StandardFormLp | GeneralFormLp,
    config: PdhgConfig | None = None,
    steps: StepSizes | None = None,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> SolveOutcome:
    """Iterate until optimality, a certificate, or a budget/guard trips.

    Every check_interval iterations the KKT residuals are evaluated and all
    three candidate sequences are put through the infeasibility tests.  A
    single passing side waits out a grace window for the other side before
    the run returns, so that problems infeasible on both sides are reported
    as such rather than by whichever certificate converged first.
    """
    config = config or PdhgConfig()
    report = validate(p)
    if not report.ok:
        raise ValueError("invalid problem: " + "; ".join(report.errors))
    if steps is None:
        steps = StepSizes.for_matrix(p.a, config.step_factor)
    op = make_operator(p, steps)
    general = isinstance(p, GeneralFormLp)

    x = np.zeros(op.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    y = np.zeros(op.m) if y0 is None else np.asarray(y0, dtype=np.float64).copy()
    x_prev = x.copy()
    y_prev = y.copy()
    sum_x = np.zeros(op.n)
    sum_y = np.zeros(op.m)
    k = 0

    trace: list[TraceRecord] = []
    t_start = time.perf_counter()
    prev_pattern = active_pattern(p, x, y)
    best_primal: certs.CertCheckReport | None = None
    best_dual: certs.CertCheckReport | None = None
    grace_deadline: int | None = None
    status: SolveStatus | None = None
    kkt: KktResiduals | None = None
    r: np.ndarray | None = None
    apply = op.apply

    while k < config.max_iters:
        batch = min(config.check_interval, config.max_iters - k)
        for _ in range(batch):
            x1, y1 = apply(x, y)
            sum_x += x1
            sum_y += y1
            x_prev = x
            y_prev = y
            x = x1
            y = y1
        k += batch

        zmax = max(
            float(np.max(np.abs(x), initial=0.0)),
            float(np.max(np.abs(y), initial=0.0)),
        )
        if not np.isfinite(zmax) or zmax > config.divergence_limit:
            status = SolveStatus.NUMERICAL_ERROR
            break

        r = recover_r(p, y) if general else None
        kkt = kkt_residual(p, x, y, r)
        pattern = active_pattern(p, x, y)
        changed = not np.array_equal(pattern, prev_pattern)
        prev_pattern = pattern
        state = PdhgState(
            k=k, x=x, y=y, x_prev=x_prev, y_prev=y_prev, sum_x=sum_x, sum_y=sum_y
        )
        ms = (time.perf_counter() - t_start) * 1000.0

        for kind in certs.CandidateKind:
            cand = certs.extract(state, kind, p if general else None)
            if general:
                prep = certs.check_primal_infeasibility(cand, p, config.eps)
                drep = certs.check_dual_infeasibility(cand, p, config.eps)
            else:
                prep, drep = certs.check_standard_farkas(cand, p, config.eps)
            trace.append(
                TraceRecord(
                    k=k,
                    seq=kind.value,
                    scaled_err=prep.scaled_error,
                    obj_term=prep.objective_term,
                    kkt=kkt.max,
                    active_changed=changed,
                    ms=ms,
                )
            )
            if prep.passed and (
                best_primal is None or prep.scaled_error < best_primal.scaled_error
            ):
                best_primal = prep
            if drep.passed and (
                best_dual is None or drep.scaled_error < best_dual.scaled_error
            ):
                best_dual = drep

        if kkt.max <= config.kkt_tol:
            status = SolveStatus.OPTIMAL
            break
        if best_primal is not None and best_dual is not None:
            status = SolveStatus.BOTH_INFEASIBLE
            break
        if best_primal is not None or best_dual is not None:
            if grace_deadline is None:
                grace_deadline = min(
                    config.max_iters,
                    max(
                        int(k * config.grace_factor),
                        k + config.grace_min_extra,
                    ),
                )
            elif k >= grace_deadline:
                status = (
                    SolveStatus.PRIMAL_INFEASIBLE
                    if best_primal is not None
                    else SolveStatus.DUAL_INFEASIBLE
                )
                break

    if status is None or status is SolveStatus.NUMERICAL_ERROR:
        # Budget exhausted or guard tripped: a certificate in hand still wins.
        if best_primal is not None and best_dual is not None:
            status = SolveStatus.BOTH_INFEASIBLE
        elif best_primal is not None:
            status = SolveStatus.PRIMAL_INFEASIBLE
        elif best_dual is not None:
            status = SolveStatus.DUAL_INFEASIBLE
        elif status is None:
            status = SolveStatus.ITERATION_LIMIT

    if kkt is None:
        r = recover_r(p, y) if general else None
        kkt = kkt_residual(p, x, y, r)
    pobj = p.objective(x)
    dobj = None
    if general and r is not None:
        dobj = dual_objective(p, y, r)
    elif not general:
        dobj = -float(p.b @ y) + p.objective_offset

    final_state = PdhgState(
        k=k,
        x=x.copy(),
        y=y.copy(),
        x_prev=x_prev.copy(),
        y_prev=y_prev.copy(),
        sum_x=sum_x.copy(),
        sum_y=sum_y.copy(),
    )
    return SolveOutcome(
        status=status,
        x=x,
        y=y,
        r=r,
        iterations=k,
        kkt=kkt,
        primal_objective=pobj,
        dual_objective=dobj,
        primal_certificate=best_primal,
        dual_certificate=best_dual,
        trace=trace,
        state=final_state,
        steps=steps,
    )
