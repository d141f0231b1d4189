"""Infeasibility certificates read off three iterate-derived sequences.

For a run of the primal-dual iteration, three vector sequences all converge
to the infimal displacement of the operator, whose primal and dual parts
are (scaled) Farkas certificates whenever they are nonzero:

  difference            z^{k+1} - z^k
  normalized iterate    z^k / k
  normalized average    (2 / (k+1)) * mean(z^1..z^k)

A candidate passes when its certificate residual, scaled by the certificate
objective, drops below eps.  All tests are positively homogeneous: rescaling
a candidate leaves its scaled error unchanged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .model import (
    GeneralFormLp,
    StandardFormLp,
    clip_to_dual_signs,
    clip_to_ray_signs,
)

if TYPE_CHECKING:  # pragma: no cover
    from .pdhg import PdhgState

__all__ = [
    "CandidateKind",
    "CertificateCandidate",
    "CertCheckReport",
    "extract",
    "check_primal_infeasibility",
    "check_dual_infeasibility",
    "check_standard_farkas",
]

# Negative dual entries smaller than this (relative) are iteration dust.
_Y_CLIP_REL = 1e-12


class CandidateKind(enum.Enum):
    DIFFERENCE = "difference"
    NORMALIZED_ITERATE = "normalized_iterate"
    NORMALIZED_AVERAGE = "normalized_average"


@dataclass(frozen=True)
class CertificateCandidate:
    """One sequence value at iteration k; r_part only for general-form runs."""

    kind: CandidateKind
    k: int
    x_part: np.ndarray
    y_part: np.ndarray
    r_part: np.ndarray | None = None


@dataclass(frozen=True)
class CertCheckReport:
    """Outcome of one certificate test on one candidate.

    objective_term is the certificate objective (must be positive for a
    valid certificate); scaled_error is residual / objective_term and is
    None when the objective term is not positive.  vector carries the
    tested certificate (dual vector for side "primal", primal direction
    for side "dual"); r the recovered reduced costs where applicable.
    """

    side: str
    kind: CandidateKind
    k: int
    passed: bool
    objective_term: float
    scaled_error: float | None
    reasons: tuple[str, ...] = ()
    vector: np.ndarray | None = None
    r: np.ndarray | None = None


def extract(
    state: "PdhgState",
    kind: CandidateKind,
    problem: GeneralFormLp | StandardFormLp | None = None,
) -> CertificateCandidate:
    """Build the candidate of the given kind from the current state.

    For general-form problems the dual candidate gets reduced costs
    r = clip(-A'y) attached, projected onto the signs that keep the ray
    objective finite (the candidate is homogeneous, so no cost term).
    """
    k = state.k
    if k < 1:
        raise ValueError("no candidate before the first iteration")
    if kind is CandidateKind.DIFFERENCE:
        x = state.x - state.x_prev
        y = state.y - state.y_prev
    elif kind is CandidateKind.NORMALIZED_ITERATE:
        x = state.x / k
        y = state.y / k
    elif kind is CandidateKind.NORMALIZED_AVERAGE:
        scale = 2.0 / (k * (k + 1))
        x = state.sum_x * scale
        y = state.sum_y * scale
    else:
        raise ValueError(f"unknown candidate kind {kind!r}")
    r = None
    if isinstance(problem, GeneralFormLp):
        r = clip_to_dual_signs(-problem.a.rmatvec(y), problem.kind_masks())
    return CertificateCandidate(kind=kind, k=k, x_part=x, y_part=y, r_part=r)


def check_primal_infeasibility(
    cand: CertificateCandidate, p: GeneralFormLp, eps: float
) -> CertCheckReport:
    """Test (y, r) as an approximate certificate that Ax >= b, l <= x <= u
    has no solution: y >= 0, r + A'y ~ 0, and positive ray objective
    b'y + l'r_+ - u'r_-."""
    y = cand.y_part.copy()
    reasons: list[str] = []
    ynorm = float(np.max(np.abs(y))) if y.size else 0.0
    if ynorm == 0.0:
        return CertCheckReport(
            "primal", cand.kind, cand.k, False, 0.0, None, ("zero candidate",)
        )
    dust = (y < 0.0) & (y >= -_Y_CLIP_REL * ynorm)
    y[dust] = 0.0
    if np.any(y < 0.0):
        reasons.append("dual vector has negative components")

    masks = p.kind_masks()
    aty = p.a.rmatvec(y)
    r = cand.r_part if cand.r_part is not None else clip_to_dual_signs(-aty, masks)
    r_pos = np.maximum(r, 0.0)
    r_neg = np.maximum(-r, 0.0)
    fin_l = np.isfinite(p.l)
    fin_u = np.isfinite(p.u)
    if np.any(r_pos[~fin_l] > 0.0):
        reasons.append("positive reduced cost on a variable with no lower bound")
    if np.any(r_neg[~fin_u] > 0.0):
        reasons.append("negative reduced cost on a variable with no upper bound")
    obj = float(p.b @ y)
    obj += float(p.l[fin_l] @ r_pos[fin_l])
    obj -= float(p.u[fin_u] @ r_neg[fin_u])
    residual = float(np.max(np.abs(r + aty)))
    scaled = residual / obj if obj > 0.0 else None
    if obj <= 0.0:
        reasons.append("ray objective is not positive")
    passed = not reasons and scaled is not None and scaled <= eps
    return CertCheckReport(
        "primal", cand.kind, cand.k, passed, obj, scaled, tuple(reasons), y, r
    )


def check_dual_infeasibility(
    cand: CertificateCandidate, p: GeneralFormLp, eps: float
) -> CertCheckReport:
    """Test d as an approximate unbounded direction: c'd < 0, d in the
    recession cone of the box, and Ad >= 0 up to scaled residual eps."""
    d = cand.x_part
    dnorm = float(np.max(np.abs(d))) if d.size else 0.0
    if dnorm == 0.0:
        return CertCheckReport(
            "dual", cand.kind, cand.k, False, 0.0, None, ("zero candidate",)
        )
    masks = p.kind_masks()
    box_res = float(np.max(np.abs(d - clip_to_ray_signs(d, masks))))
    ad = p.a.matvec(d)
    row_res = float(np.max(np.maximum(-ad, 0.0)))
    obj = -float(p.c @ d)
    residual = max(box_res, row_res)
    scaled = residual / obj if obj > 0.0 else None
    reasons: list[str] = []
    if obj <= 0.0:
        reasons.append("objective does not decrease along the ray")
    passed = not reasons and scaled is not None and scaled <= eps
    return CertCheckReport(
        "dual", cand.kind, cand.k, passed, obj, scaled, tuple(reasons), d, None
    )


def check_standard_farkas(
    cand: CertificateCandidate, p: StandardFormLp, eps: float
) -> tuple[CertCheckReport, CertCheckReport]:
    """Both Farkas tests for standard form, returned as (primal, dual).

    Primal infeasibility: b'y < 0 and A'y >= -eps * ||y||_inf entrywise.
    Dual infeasibility:   c'x < 0, ||Ax||_inf <= eps * ||x||_inf, and
                          x >= -eps * ||x||_inf entrywise.
    The standard-form dual vector is free, so no clipping on y.
    """
    y = cand.y_part
    ynorm = float(np.max(np.abs(y))) if y.size else 0.0
    if ynorm == 0.0:
        primal = CertCheckReport(
            "primal", cand.kind, cand.k, False, 0.0, None, ("zero candidate",)
        )
    else:
        bty = float(p.b @ y)
        obj = -bty
        residual = float(np.max(np.maximum(-p.a.rmatvec(y), 0.0)))
        scaled = residual / ynorm
        passed = obj > 0.0 and scaled <= eps
        reasons = () if obj > 0.0 else ("b'y is not negative",)
        primal = CertCheckReport(
            "primal", cand.kind, cand.k, passed, obj, scaled, reasons, y, None
        )

    x = cand.x_part
    xnorm = float(np.max(np.abs(x))) if x.size else 0.0
    if xnorm == 0.0:
        dual = CertCheckReport(
            "dual", cand.kind, cand.k, False, 0.0, None, ("zero candidate",)
        )
    else:
        ctx = float(p.c @ x)
        obj = -ctx
        residual = max(
            float(np.max(np.abs(p.a.matvec(x)))),
            float(np.max(np.maximum(-x, 0.0))),
        )
        scaled = residual / xnorm
        passed = obj > 0.0 and scaled <= eps
        reasons = () if obj > 0.0 else ("c'x is not negative",)
        dual = CertCheckReport(
            "dual", cand.kind, cand.k, passed, obj, scaled, reasons, x, None
        )
    return primal, dual
