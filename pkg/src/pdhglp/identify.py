"""Ray refinement, index partitioning, and the frozen-support affine phase.

Once the iteration settles onto a ray z_star + k*v, everything here kicks
in: estimate and refine (z_star, v) by alternating between the original
iteration and its shifted twin, partition coordinates by which part of the
displacement moves them, build the always-feasible auxiliary problem the
shifted twin solves, detect when the active pattern freezes, and assemble
the dense affine model of the post-freeze iteration whose spectrum predicts
the linear rate of the difference sequence.

Everything operates on the standard-form iteration; general-form problems
go through their standardization first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fixed_point import RateFit, fit_rate
from .linalg import MNorm, SparseMatrix, StepSizes
from .model import GeneralFormLp, StandardFormLp
from .pdhg import StandardFormOperator, _OperatorBase

__all__ = [
    "IndexPartition",
    "RaySolution",
    "AuxiliaryLp",
    "AffinePhase",
    "FreezeReport",
    "RateRegimeReport",
    "ShiftedOperator",
    "partition_indices",
    "refine_ray",
    "build_auxiliary",
    "active_set",
    "active_history",
    "freeze_detector",
    "shift_identity_residual",
    "affine_phase",
    "verify_rate_regimes",
]

PARTITION_TOL_REL = 1e-7
ACTIVE_TOL_REL = 1e-9
DENSE_ANALYSIS_LIMIT = 2000
_REFINE_ROUNDS = 5
_REFINE_TARGET = 1e-10
_FIXED_POINT_BUDGET = 200_000


@dataclass(frozen=True)
class IndexPartition:
    """Coordinates split by how the displacement vector treats them.

    b:  primal displacement strictly positive (iterate escapes the bound)
    n2: primal displacement zero but A'v_y positive (pinned at zero)
    n1: everything else (the coordinates that still behave like an LP)
    """

    b: tuple[int, ...]
    n1: tuple[int, ...]
    n2: tuple[int, ...]
    tol: float

    def masks(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mb = np.zeros(n, dtype=bool)
        m1 = np.zeros(n, dtype=bool)
        m2 = np.zeros(n, dtype=bool)
        mb[list(self.b)] = True
        m1[list(self.n1)] = True
        m2[list(self.n2)] = True
        return mb, m1, m2


def partition_indices(
    a: SparseMatrix, v_x: np.ndarray, v_y: np.ndarray, tol: float | None = None
) -> IndexPartition:
    """Split [n] by the displacement signs, with a scaled zero threshold."""
    v_x = np.asarray(v_x, dtype=np.float64)
    v_y = np.asarray(v_y, dtype=np.float64)
    if tol is None:
        scale = max(
            float(np.max(np.abs(v_x), initial=0.0)),
            float(np.max(np.abs(v_y), initial=0.0)),
        )
        tol = PARTITION_TOL_REL * (1.0 + scale)
    atv = a.rmatvec(v_y)
    b, n1, n2 = [], [], []
    for i in range(v_x.size):
        if v_x[i] > tol:
            b.append(i)
        elif atv[i] > tol:
            n2.append(i)
        else:
            n1.append(i)
    return IndexPartition(tuple(b), tuple(n1), tuple(n2), tol)


class ShiftedOperator(_OperatorBase):
    """The displacement-compensated twin of the standard-form iteration.

    Coordinates in b skip the projection (their auxiliary variable is
    free), n2 coordinates are pinned to zero, and every update is shifted
    back by the displacement, so a trajectory of this operator stays put
    where the original runs off along the ray.  It is itself an LP
    iteration (for the auxiliary problem), hence firmly nonexpansive in
    the same step-size-induced norm.
    """

    coupling_sign = 1

    def __init__(
        self,
        p: StandardFormLp,
        steps: StepSizes,
        v_x: np.ndarray,
        v_y: np.ndarray,
        partition: IndexPartition,
    ):
        super().__init__(p.a, steps)
        self.p = p
        self.v_x = np.asarray(v_x, dtype=np.float64)
        self.v_y = np.asarray(v_y, dtype=np.float64)
        self.partition = partition
        self.mask_b, self.mask_n1, self.mask_n2 = partition.masks(p.n)
        self._eta_c = steps.eta * p.c
        self._tau_b = steps.tau * p.b

    def apply(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = x - self.steps.eta * self._rmat(y)
        w -= self._eta_c
        x1 = np.maximum(w, 0.0)
        x1[self.mask_b] = w[self.mask_b]
        x1[self.mask_n2] = 0.0
        x1 -= self.v_x
        y1 = y + self.steps.tau * self._mat(2.0 * x1 - x)
        y1 -= self._tau_b
        y1 -= self.v_y
        return x1, y1


@dataclass(frozen=True)
class RaySolution:
    """A refined anchor and displacement for the iteration's ray.

    residual is the consistency gap of the final refinement round: the
    step-size norm of the change in the re-derived displacement, which
    equals how far z_star was from a true fixed point of the shifted twin
    built with the previous displacement.  fixed_point_residual is the raw
    final step length of the inner fixed-point loop.
    """

    z_star: np.ndarray
    v: np.ndarray
    residual: float
    fixed_point_residual: float
    rounds: int
    converged: bool
    partition: IndexPartition

    def split(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.z_star[:n], self.z_star[n:], self.v[:n], self.v[n:]


def _fixed_point(
    op: ShiftedOperator, z0: np.ndarray, mn: MNorm, budget: int
) -> tuple[np.ndarray, float]:
    n = op.n
    x, y = z0[:n].copy(), z0[n:].copy()
    res = np.inf
    done = 0
    while done < budget:
        batch = min(200, budget - done)
        for _ in range(batch):
            x, y = op.apply(x, y)
        done += batch
        x1, y1 = op.apply(x, y)
        res = mn(x1 - x, y1 - y)
        if res <= 1e-13 * (1.0 + mn(x, y)):
            x, y = x1, y1
            break
    return np.concatenate([x, y]), res


def _rederive_v(
    op: StandardFormOperator, z_star: np.ndarray, v: np.ndarray, mask_b: np.ndarray
) -> np.ndarray:
    """Apply the original iteration far enough along the ray that the b
    coordinates are strictly positive, where T - I returns the displacement
    exactly (one application, no drift)."""
    n = op.n
    lam = 0.0
    if np.any(mask_b):
        xb = z_star[:n][mask_b]
        vb = v[:n][mask_b]
        margin = 1e-2 * (1.0 + float(np.max(np.abs(z_star[:n]))))
        with np.errstate(divide="ignore"):
            need = (margin - xb) / vb
        lam = max(0.0, float(np.max(need, initial=0.0)))
    z = z_star + lam * v
    return op.apply_z(z) - z


def refine_ray(
    p: StandardFormLp,
    steps: StepSizes,
    warm: np.ndarray,
    rounds: int = _REFINE_ROUNDS,
    target: float = _REFINE_TARGET,
    fixed_point_budget: int = _FIXED_POINT_BUDGET,
) -> RaySolution:
    """Alternate displacement estimation and anchored fixed-point solves.

    warm is a trajectory array (rows z^0..z^K of the original iteration,
    at least ~10^3 rows) or a single warm iterate; the initial displacement
    guess is the mean difference over the trajectory's last tenth, or zero
    for a single point.  Each round partitions by the current displacement,
    drives the shifted twin to its fixed point, re-derives the displacement
    from one application of the original operator along the ray, and stops
    when the displacement stops moving (step-size norm <= target).
    """
    warm = np.asarray(warm, dtype=np.float64)
    if warm.ndim == 1:
        z = warm.copy()
        v = np.zeros_like(z)
    else:
        if warm.shape[0] < 2:
            raise ValueError("warm trajectory needs at least 2 points")
        z = warm[-1].copy()
        tail = max(1, (warm.shape[0] - 1) // 10)
        v = np.diff(warm[-(tail + 1) :], axis=0).mean(axis=0)
    op = StandardFormOperator(p, steps)
    mn = op.m_norm()
    n = p.n

    best: tuple[float, np.ndarray, np.ndarray, float, IndexPartition] | None = None
    used = 0
    for rnd in range(rounds):
        used = rnd + 1
        part = partition_indices(p.a, v[:n], v[n:])
        shifted = ShiftedOperator(p, steps, v[:n], v[n:], part)
        z_star, fp_res = _fixed_point(shifted, z, mn, fixed_point_budget)
        v_new = _rederive_v(op, z_star, v, shifted.mask_b)
        residual = mn(v_new[:n] - v[:n], v_new[n:] - v[n:])
        if best is None or residual < best[0]:
            best = (residual, z_star, v_new, fp_res, part)
        z, v = z_star, v_new
        if residual <= target:
            break

    residual, z_star, v, fp_res, part = best
    return RaySolution(
        z_star=z_star,
        v=v,
        residual=residual,
        fixed_point_residual=fp_res,
        rounds=used,
        converged=residual <= target,
        partition=part,
    )


@dataclass(frozen=True)
class AuxiliaryLp:
    """The always-feasible problem the shifted twin iterates on.

    Same matrix as the original, objective bumped by v_x/eta on the b
    block, right-hand side bumped by v_y/tau; b variables are free, n1
    stay nonnegative, n2 are fixed at zero.
    """

    base: StandardFormLp
    c_aux: np.ndarray
    b_aux: np.ndarray
    partition: IndexPartition

    def as_general_form(self) -> GeneralFormLp:
        """Doubled-row encoding (Ax >= b and -Ax >= -b) with the variable
        roles expressed through bounds, solvable by the general-form
        iteration."""
        a = self.base.a
        rows_i, cols_j, vals = a.triplets()
        m, n = a.shape
        i2 = np.concatenate([rows_i, rows_i + m])
        j2 = np.concatenate([cols_j, cols_j])
        v2 = np.concatenate([vals, -vals])
        stacked = SparseMatrix.from_triplets(2 * m, n, i2, j2, v2)
        l = np.zeros(n)
        u = np.full(n, np.inf)
        mb, _, m2 = self.partition.masks(n)
        l[mb] = -np.inf
        u[m2] = 0.0
        return GeneralFormLp(
            c=self.c_aux.copy(),
            a=stacked,
            b=np.concatenate([self.b_aux, -self.b_aux]),
            l=l,
            u=u,
            name=f"aux({self.base.name})",
        )

    def constraint_residual(self, x: np.ndarray) -> float:
        return float(
            np.max(np.abs(self.base.a.matvec(x) - self.b_aux), initial=0.0)
        )

    def bound_violation(self, x: np.ndarray) -> float:
        viol = 0.0
        for i in self.partition.n1:
            viol = max(viol, -float(x[i]))
        for i in self.partition.n2:
            viol = max(viol, abs(float(x[i])))
        return viol


def build_auxiliary(
    p: StandardFormLp,
    v: np.ndarray,
    steps: StepSizes,
    partition: IndexPartition | None = None,
) -> AuxiliaryLp:
    """Assemble the auxiliary problem for a displacement vector.

    Zero displacement reproduces the original problem: the objective and
    right-hand side are untouched and every variable lands in n1.
    """
    v = np.asarray(v, dtype=np.float64)
    n = p.n
    if partition is None:
        partition = partition_indices(p.a, v[:n], v[n:])
    c_aux = p.c.copy()
    mb, _, _ = partition.masks(n)
    c_aux[mb] += v[:n][mb] / steps.eta
    b_aux = p.b + v[n:] / steps.tau
    return AuxiliaryLp(base=p, c_aux=c_aux, b_aux=b_aux, partition=partition)


def active_set(x: np.ndarray, tol: float = ACTIVE_TOL_REL) -> frozenset[int]:
    """Coordinates sitting at (or numerically below) the zero bound."""
    x = np.asarray(x, dtype=np.float64)
    cut = tol * (1.0 + float(np.max(np.abs(x), initial=0.0)))
    return frozenset(int(i) for i in np.flatnonzero(x <= cut))


def active_history(
    points: np.ndarray, n: int, tol: float = ACTIVE_TOL_REL
) -> list[tuple[int, frozenset[int]]]:
    """(k, active set of x^k) for every row of a stacked trajectory."""
    return [(k, active_set(points[k][:n], tol)) for k in range(points.shape[0])]


@dataclass(frozen=True)
class FreezeReport:
    """k_freeze is the iteration of the last observed active-set change;
    frozen says whether the set then stayed put through the end of the
    observed window (a False means no freeze within budget, it never
    proves degeneracy)."""

    k_freeze: int
    frozen: bool
    changes: int
    last_k: int


def freeze_detector(history: Sequence[tuple[int, frozenset[int]]]) -> FreezeReport:
    if not history:
        raise ValueError("empty active-set history")
    k_freeze = history[0][0]
    changes = 0
    prev = history[0][1]
    for k, s in history[1:]:
        if s != prev:
            k_freeze = k
            changes += 1
            prev = s
    last_k = history[-1][0]
    return FreezeReport(
        k_freeze=k_freeze,
        frozen=k_freeze < last_k,
        changes=changes,
        last_k=last_k,
    )


def shift_identity_residual(
    p: StandardFormLp,
    steps: StepSizes,
    v: np.ndarray,
    partition: IndexPartition,
    z_from: np.ndarray,
    k_max: int = 1000,
) -> float:
    """Iterate the original operator and its shifted twin side by side from
    the same point and report the worst step-size-norm gap between the
    twin's iterate and the original's minus k times the displacement.
    Past the freeze iteration the two agree to roundoff."""
    op = StandardFormOperator(p, steps)
    shifted = ShiftedOperator(p, steps, v[: p.n], v[p.n :], partition)
    mn = op.m_norm()
    n = p.n
    x, y = z_from[:n].copy(), z_from[n:].copy()
    xs, ys = x.copy(), y.copy()
    worst = 0.0
    for k in range(1, k_max + 1):
        x, y = op.apply(x, y)
        xs, ys = shifted.apply(xs, ys)
        worst = max(worst, mn(xs - (x - k * v[:n]), ys - (y - k * v[n:])))
    return worst


@dataclass(frozen=True)
class AffinePhase:
    """Dense model of the iteration after the support has frozen.

    The update is z -> q z - p_vec.  q_inf is the limit of q^k (a
    projector onto the fixed subspace), mu the predicted linear rate of
    the difference sequence, lower_rate the matching lower-bound rate,
    and v_pred / z_star_pred the displacement and anchor the model
    implies.  projector_error and contraction_radius expose the two
    assembly invariants (q_inf (q - I) = 0 and rho(q - q_inf) < 1).
    """

    support: tuple[int, ...]
    q: np.ndarray
    p_vec: np.ndarray
    q_inf: np.ndarray
    sigma: np.ndarray
    mu: float | None
    lower_rate: float | None
    v_pred: np.ndarray
    z_star_pred: np.ndarray
    projector_error: float
    contraction_radius: float


def affine_phase(
    p: StandardFormLp, steps: StepSizes, support: Sequence[int]
) -> AffinePhase:
    """Assemble the frozen-support affine update and its spectral data."""
    n, m = p.n, p.m
    if n + m > DENSE_ANALYSIS_LIMIT:
        raise ValueError(
            f"dense spectral analysis capped at n+m <= {DENSE_ANALYSIS_LIMIT}; "
            "use the rate-fitting path for larger instances"
        )
    eta, tau = steps.eta, steps.tau
    support = tuple(sorted(int(i) for i in support))
    ad = p.a.to_dense()
    mask = np.zeros(n, dtype=bool)
    mask[list(support)] = True
    ad[:, ~mask] = 0.0

    q = np.zeros((n + m, n + m))
    q[:n, :n] = np.eye(n)
    q[:n, n:] = -eta * ad.T
    q[n:, :n] = tau * ad
    q[n:, n:] = np.eye(m) - 2.0 * tau * eta * (ad @ ad.T)
    dc = np.where(mask, p.c, 0.0)
    p_vec = np.concatenate([eta * dc, 2.0 * tau * eta * (ad @ dc) + tau * p.b])

    u, s, vt = np.linalg.svd(ad)
    cut = s.max() * max(m, n) * np.finfo(np.float64).eps if s.size else 0.0
    pos = s > cut
    sigma = s[pos]
    v_cols = vt[: s.size].T[:, pos]
    u_cols = u[:, : s.size][:, pos]
    q_inf = np.zeros((n + m, n + m))
    q_inf[:n, :n] = np.eye(n) - v_cols @ v_cols.T
    q_inf[n:, n:] = np.eye(m) - u_cols @ u_cols.T

    mu = None
    lower_rate = None
    if sigma.size:
        mu = float(np.sqrt(1.0 - eta * tau * float(np.min(sigma)) ** 2))
        lows = []
        for sg in sigma:
            block = np.array(
                [[1.0, -eta * sg], [tau * sg, 1.0 - 2.0 * tau * eta * sg * sg]]
            )
            lows.append(float(np.linalg.svd(block, compute_uv=False)[-1]))
        lower_rate = min(lows)

    v_pred = -(q_inf @ p_vec)
    rhs = (np.eye(n + m) - q_inf) @ p_vec
    z_star_pred = np.linalg.lstsq(q - np.eye(n + m), rhs, rcond=None)[0]
    projector_error = float(np.max(np.abs(q_inf @ (q - np.eye(n + m)))))
    contraction_radius = float(np.max(np.abs(np.linalg.eigvals(q - q_inf))))
    return AffinePhase(
        support=support,
        q=q,
        p_vec=p_vec,
        q_inf=q_inf,
        sigma=sigma,
        mu=mu,
        lower_rate=lower_rate,
        v_pred=v_pred,
        z_star_pred=z_star_pred,
        projector_error=projector_error,
        contraction_radius=contraction_radius,
    )


@dataclass(frozen=True)
class RateRegimeReport:
    """Observed post-freeze rates against the spectral predictions.

    The difference sequence should contract geometrically inside
    [lower_rate - slack, mu + slack]; the normalized iterate and average
    keep their 1/k decay (power slope near -1) even after the freeze.
    """

    k_freeze: int
    diff_fit: RateFit | None
    rate_bracket: tuple[float, float] | None
    diff_rate_in_bracket: bool | None
    iterate_fit: RateFit | None
    average_fit: RateFit | None
    iterate_slope_ok: bool | None
    average_slope_ok: bool | None
    notes: tuple[str, ...] = ()


def verify_rate_regimes(
    points: np.ndarray,
    v: np.ndarray,
    phase: AffinePhase,
    k_freeze: int,
    rate_slack: float = 0.02,
    slope_slack: float = 0.15,
    fit_k_min: int = 100,
) -> RateRegimeReport:
    """Fit the three sequences of a trajectory restarted at the freeze point.

    points are rows z^0..z^N of the original iteration; the sequences are
    rebuilt treating z^{k_freeze} as the new starting point, per the
    post-identification statements.  Difference errors below the float
    noise floor are excluded from the geometric fit.
    """
    notes: list[str] = []
    if k_freeze >= points.shape[0] - 1:
        return RateRegimeReport(
            k_freeze=k_freeze,
            diff_fit=None,
            rate_bracket=None,
            diff_rate_in_bracket=None,
            iterate_fit=None,
            average_fit=None,
            iterate_slope_ok=None,
            average_slope_ok=None,
            notes=("no post-freeze window observed",),
        )
    seg = points[k_freeze:]
    diffs = np.diff(seg, axis=0)
    errs = np.linalg.norm(diffs - v, axis=1)
    # Subtracting consecutive iterates of size ||z|| leaves roundoff of that
    # scale, so the usable window ends where the error meets a magnitude-
    # scaled floor, not an absolute one.
    mags = np.linalg.norm(seg, axis=1)
    floors = 1e-13 * (1.0 + np.maximum(mags[:-1], mags[1:]))
    clean = [(k, e) for k, (e, f) in enumerate(zip(errs, floors)) if e > f]
    diff_fit = None
    bracket = None
    in_bracket = None
    if phase.mu is not None and phase.lower_rate is not None:
        bracket = (phase.lower_rate - rate_slack, phase.mu + rate_slack)
    if len(clean) >= 20:
        diff_fit = fit_rate(clean, model="geometric", k_min=0)
        if bracket is not None:
            in_bracket = bracket[0] <= diff_fit.rate <= bracket[1]
    else:
        notes.append(
            f"difference errors hit the noise floor after {len(clean)} samples; "
            "geometric fit skipped"
        )

    n_pts = seg.shape[0] - 1
    iterate_fit = None
    average_fit = None
    it_ok = None
    avg_ok = None
    # Both scaled errors are O(||v|| + ||z^freeze||/k); once below this floor
    # the 1/k signal is gone and a power fit would only see roundoff (e.g. a
    # trajectory that starts exactly on the ray).
    pw_floor = 1e-12 * (1.0 + float(np.linalg.norm(v)))
    if n_pts >= fit_k_min + 20:
        ks = np.arange(1, n_pts + 1, dtype=np.float64)
        it_err = np.linalg.norm(seg[1:] / ks[:, None] - v, axis=1)
        sums = np.cumsum(seg[1:], axis=0)
        avg = sums * (2.0 / (ks * (ks + 1.0)))[:, None]
        avg_err = np.linalg.norm(avg - v, axis=1)
        it_samples = [(k, e) for k, e in zip(ks, it_err) if e > pw_floor]
        avg_samples = [(k, e) for k, e in zip(ks, avg_err) if e > pw_floor]
        if len(it_samples) >= fit_k_min + 20 and len(avg_samples) >= fit_k_min + 20:
            iterate_fit = fit_rate(it_samples, model="power", k_min=fit_k_min)
            average_fit = fit_rate(avg_samples, model="power", k_min=fit_k_min)
            it_ok = abs(iterate_fit.slope + 1.0) <= slope_slack
            avg_ok = abs(average_fit.slope + 1.0) <= slope_slack
        else:
            notes.append(
                "normalized errors sit at the noise floor; power fits skipped"
            )
    else:
        notes.append("post-freeze window too short for power fits")

    return RateRegimeReport(
        k_freeze=k_freeze,
        diff_fit=diff_fit,
        rate_bracket=bracket,
        diff_rate_in_bracket=in_bracket,
        iterate_fit=iterate_fit,
        average_fit=average_fit,
        iterate_slope_ok=it_ok,
        average_slope_ok=avg_ok,
        notes=tuple(notes),
    )
