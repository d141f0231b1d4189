"""LP problem containers and the bridge between the two canonical forms.

Two shapes are used throughout:

  standard form   min c'x   s.t.  Ax = b,  x >= 0
  general form    min c'x   s.t.  Ax >= b, l <= x <= u

``to_standard_form`` rewrites a general-form problem as a standard-form one
(shifts, sign flips, free-variable splits, slacks, box rows) and returns a
map that can pull solutions and infeasibility certificates back to the
original variables.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import SparseMatrix

__all__ = [
    "VariableKind",
    "KindMasks",
    "StandardFormLp",
    "GeneralFormLp",
    "ValidationReport",
    "StandardizationMap",
    "to_standard_form",
    "standard_to_general",
    "clip_to_dual_signs",
    "clip_to_ray_signs",
]


class VariableKind(enum.Enum):
    BOXED = "boxed"
    LOWER = "lower"
    UPPER = "upper"
    FREE = "free"


@dataclass(frozen=True)
class KindMasks:
    """Boolean masks over variables, one per bound pattern."""

    boxed: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    free: np.ndarray


def _as_vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


@dataclass
class StandardFormLp:
    """min c'x subject to Ax = b, x >= 0."""

    c: np.ndarray
    a: SparseMatrix
    b: np.ndarray
    name: str = ""
    objective_offset: float = 0.0

    def __post_init__(self):
        m, n = self.a.shape
        self.c = _as_vector(self.c, n, "c")
        self.b = _as_vector(self.b, m, "b")

    @property
    def n(self) -> int:
        return self.a.n_cols

    @property
    def m(self) -> int:
        return self.a.n_rows

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.objective_offset


@dataclass
class GeneralFormLp:
    """min c'x subject to Ax >= b, l <= x <= u (entries of l, u may be infinite)."""

    c: np.ndarray
    a: SparseMatrix
    b: np.ndarray
    l: np.ndarray
    u: np.ndarray
    name: str = ""
    objective_offset: float = 0.0

    def __post_init__(self):
        m, n = self.a.shape
        self.c = _as_vector(self.c, n, "c")
        self.b = _as_vector(self.b, m, "b")
        self.l = _as_vector(self.l, n, "l")
        self.u = _as_vector(self.u, n, "u")

    @property
    def n(self) -> int:
        return self.a.n_cols

    @property
    def m(self) -> int:
        return self.a.n_rows

    def kinds(self) -> list[VariableKind]:
        masks = self.kind_masks()
        out = []
        for i in range(self.n):
            if masks.boxed[i]:
                out.append(VariableKind.BOXED)
            elif masks.lower[i]:
                out.append(VariableKind.LOWER)
            elif masks.upper[i]:
                out.append(VariableKind.UPPER)
            else:
                out.append(VariableKind.FREE)
        return out

    def kind_masks(self) -> KindMasks:
        fin_l = np.isfinite(self.l)
        fin_u = np.isfinite(self.u)
        return KindMasks(
            boxed=fin_l & fin_u,
            lower=fin_l & ~fin_u,
            upper=~fin_l & fin_u,
            free=~fin_l & ~fin_u,
        )

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.objective_offset


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _check_finite(report: ValidationReport, name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        report.errors.append(f"{name} contains NaN or infinite entries")


def validate(p: StandardFormLp | GeneralFormLp) -> ValidationReport:
    """Semantic checks beyond shape consistency; never raises."""
    report = ValidationReport()
    _check_finite(report, "c", p.c)
    _check_finite(report, "b", p.b)
    _, _, vals = p.a.triplets()
    _check_finite(report, "A", vals)

    dense_row_nnz = np.diff(p.a.csr.indptr)
    col_nnz = np.diff(p.a.csr.tocsc().indptr)
    for r in np.flatnonzero(dense_row_nnz == 0):
        report.warnings.append(f"row {r} of A has no nonzero entries")

    if isinstance(p, GeneralFormLp):
        if np.any(np.isnan(p.l)) or np.any(np.isnan(p.u)):
            report.errors.append("bounds contain NaN")
        else:
            if np.any(p.l == np.inf):
                report.errors.append("lower bound +inf is not a valid bound")
            if np.any(p.u == -np.inf):
                report.errors.append("upper bound -inf is not a valid bound")
            bad = np.flatnonzero(p.l > p.u)
            for i in bad:
                report.errors.append(f"variable {i}: lower bound exceeds upper bound")
            for i in np.flatnonzero(col_nnz == 0):
                ci = p.c[i]
                if (ci < 0 and p.u[i] == np.inf) or (ci > 0 and p.l[i] == -np.inf):
                    report.warnings.append(
                        f"column {i} has no constraint entries and an unbounded "
                        "improving direction"
                    )
    else:
        for i in np.flatnonzero(col_nnz == 0):
            if p.c[i] < 0:
                report.warnings.append(
                    f"column {i} has no constraint entries and negative cost"
                )
    return report


def clip_to_dual_signs(w: np.ndarray, masks: KindMasks) -> np.ndarray:
    """Project reduced costs onto the signs where the dual objective is finite.

    Boxed variables keep any sign, lower-bounded ones are clipped to >= 0,
    upper-bounded ones to <= 0, free ones to 0.
    """
    r = w.copy()
    r[masks.free] = 0.0
    r[masks.lower] = np.maximum(r[masks.lower], 0.0)
    r[masks.upper] = np.minimum(r[masks.upper], 0.0)
    return r


def clip_to_ray_signs(d: np.ndarray, masks: KindMasks) -> np.ndarray:
    """Project a primal direction onto the recession cone of the box.

    Boxed variables cannot move, lower-bounded ones only upward,
    upper-bounded ones only downward, free ones anywhere.
    """
    out = d.copy()
    out[masks.boxed] = 0.0
    out[masks.lower] = np.maximum(out[masks.lower], 0.0)
    out[masks.upper] = np.minimum(out[masks.upper], 0.0)
    return out


@dataclass
class StandardizationMap:
    """Index bookkeeping from to_standard_form, with pull-back maps.

    Column conventions in the standard-form problem, in order:
      * one column per lower-bounded or boxed variable (x = l + t),
      * one column per upper-bounded variable (x = u - t),
      * two columns per free variable (x = t_pos - t_neg),
      * one slack column per general-form row (Ax - s = b'),
      * one slack column per boxed variable's box row (t + s_box = u - l).
    """

    n_gen: int
    m_gen: int
    n_std: int
    m_std: int
    kinds: list[VariableKind]
    main_col: np.ndarray
    neg_col: np.ndarray
    sign: np.ndarray
    shift: np.ndarray
    row_slack_col: np.ndarray
    box_rows: list[tuple[int, int, int]]
    objective_offset: float

    def pull_back_primal(self, x_std: np.ndarray) -> np.ndarray:
        """Map a standard-form point to general-form variables."""
        x = self.shift + self.sign * x_std[self.main_col]
        free = self.neg_col >= 0
        x[free] = x_std[self.main_col[free]] - x_std[self.neg_col[free]]
        return x

    def pull_back_primal_ray(self, d_std: np.ndarray) -> np.ndarray:
        """Map an unboundedness ray (homogeneous, no shift) back."""
        d = self.sign * d_std[self.main_col]
        free = self.neg_col >= 0
        d[free] = d_std[self.main_col[free]] - d_std[self.neg_col[free]]
        return d

    def pull_back_dual_solution(self, y_std: np.ndarray) -> np.ndarray:
        """Row duals of the general-form constraints at a dual solution.

        Takes y in the iteration convention (multiplier of Ax - b in the
        ascent form, dual objective -b'y); the general-form row dual is its
        negation restricted to the original rows.
        """
        return -y_std[: self.m_gen]

    def pull_back_dual_ray(self, y_std: np.ndarray) -> np.ndarray:
        """Map a standard-form infeasibility certificate (A'y >= 0, b'y < 0)
        to the general-form convention (y >= 0, positive ray objective)."""
        return -y_std[: self.m_gen]


def to_standard_form(p: GeneralFormLp) -> tuple[StandardFormLp, StandardizationMap]:
    m, n = p.m, p.n
    masks = p.kind_masks()
    kinds = p.kinds()

    main_col = np.full(n, -1, dtype=np.int64)
    neg_col = np.full(n, -1, dtype=np.int64)
    sign = np.ones(n)
    shift = np.zeros(n)

    next_col = 0
    for i in range(n):
        main_col[i] = next_col
        next_col += 1
        if masks.free[i]:
            neg_col[i] = next_col
            next_col += 1
        elif masks.upper[i]:
            sign[i] = -1.0
            shift[i] = p.u[i]
        else:
            shift[i] = p.l[i]

    row_slack_col = np.arange(next_col, next_col + m, dtype=np.int64)
    next_col += m

    boxed_idx = np.flatnonzero(masks.boxed)
    box_rows = []
    for j, i in enumerate(boxed_idx):
        box_rows.append((int(i), m + j, next_col + j))
    next_col += len(boxed_idx)

    n_std = next_col
    m_std = m + len(boxed_idx)

    rows_a, cols_a, vals_a = p.a.triplets()
    out_r: list[np.ndarray] = []
    out_c: list[np.ndarray] = []
    out_v: list[np.ndarray] = []

    # Constraint block: A (with per-variable signs) on the substituted columns.
    out_r.append(rows_a)
    out_c.append(main_col[cols_a])
    out_v.append(vals_a * sign[cols_a])
    free_entries = neg_col[cols_a] >= 0
    if np.any(free_entries):
        out_r.append(rows_a[free_entries])
        out_c.append(neg_col[cols_a[free_entries]])
        out_v.append(-vals_a[free_entries])

    # Row slacks: Ax - s = b'.
    out_r.append(np.arange(m, dtype=np.int64))
    out_c.append(row_slack_col)
    out_v.append(np.full(m, -1.0))

    # Box rows: t_i + s_box = u_i - l_i.
    for i, row, col in box_rows:
        out_r.append(np.array([row, row], dtype=np.int64))
        out_c.append(np.array([main_col[i], col], dtype=np.int64))
        out_v.append(np.array([1.0, 1.0]))

    a_std = SparseMatrix.from_triplets(
        m_std,
        n_std,
        np.concatenate(out_r),
        np.concatenate(out_c),
        np.concatenate(out_v),
    )

    c_std = np.zeros(n_std)
    c_std[main_col] = sign * p.c
    free = neg_col >= 0
    c_std[neg_col[free]] = -p.c[free]

    b_std = np.zeros(m_std)
    b_std[:m] = p.b - p.a.matvec(shift)
    for i, row, _ in box_rows:
        b_std[row] = p.u[i] - p.l[i]

    offset = float(p.c @ shift) + p.objective_offset
    std = StandardFormLp(
        c=c_std, a=a_std, b=b_std, name=p.name, objective_offset=offset
    )
    mapping = StandardizationMap(
        n_gen=n,
        m_gen=m,
        n_std=n_std,
        m_std=m_std,
        kinds=kinds,
        main_col=main_col,
        neg_col=neg_col,
        sign=sign,
        shift=shift,
        row_slack_col=row_slack_col,
        box_rows=box_rows,
        objective_offset=offset,
    )
    return std, mapping


def standard_to_general(p: StandardFormLp) -> GeneralFormLp:
    """Embed a standard-form problem: each equality becomes two inequalities."""
    if not isinstance(p, StandardFormLp):
        # A GeneralFormLp has all the attributes read below, so without this
        # guard inequality rows would be re-encoded as equalities and the
        # result would describe a different feasible set.
        raise TypeError(f"expected StandardFormLp, got {type(p).__name__}")
    rows, cols, vals = p.a.triplets()
    m, n = p.a.shape
    a2 = SparseMatrix.from_triplets(
        2 * m,
        n,
        np.concatenate([rows, rows + m]),
        np.concatenate([cols, cols]),
        np.concatenate([vals, -vals]),
    )
    b2 = np.concatenate([p.b, -p.b])
    return GeneralFormLp(
        c=p.c.copy(),
        a=a2,
        b=b2,
        l=np.zeros(n),
        u=np.full(n, np.inf),
        name=p.name,
        objective_offset=p.objective_offset,
    )
