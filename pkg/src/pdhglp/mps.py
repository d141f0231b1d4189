"""MPS reader and writer targeting the general problem form.

Reads both whitespace-delimited and fixed-column MPS variants into an
intermediate document, converts the document to a general-form problem in
which every constraint is a >= row (L rows negated, E rows and RANGES
intervals expanded into opposing pairs), and writes documents back out in
a whitespace-clean layout that parses to an equal document.

Supported sections: NAME, ROWS, COLUMNS, RHS, RANGES, BOUNDS, ENDATA.
Bound codes LO, UP, FX, FR, MI, PL.  Integer machinery (BV bounds, COLUMNS
markers) is rejected with a clear error rather than misread as continuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import SparseMatrix
from .model import GeneralFormLp

__all__ = [
    "MpsParseError",
    "MpsRow",
    "MpsDocument",
    "parse_mps",
    "to_general_form",
    "load_mps",
    "write_mps",
]

_SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")
_ROW_KINDS = ("N", "L", "G", "E")
_VALUE_BOUNDS = ("LO", "UP", "FX")
_FLAG_BOUNDS = ("FR", "MI", "PL")
# 1-based inclusive column windows of the fixed layout, fields 1..6.
_FIXED_WINDOWS = ((2, 3), (5, 12), (15, 22), (25, 36), (40, 47), (50, 61))


class MpsParseError(ValueError):
    """Parse failure with the 1-based source line attached."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class MpsRow:
    kind: str
    name: str


@dataclass
class MpsDocument:
    """Sectioned MPS content before any modeling decisions are applied.

    rows keeps declaration order; columns keeps file order (duplicate
    (column, row) pairs are preserved here and summed during conversion);
    bounds keeps file order because bound codes apply sequentially.
    """

    name: str = ""
    rows: list[MpsRow] = field(default_factory=list)
    columns: list[tuple[str, str, float]] = field(default_factory=list)
    rhs: dict[str, float] = field(default_factory=dict)
    ranges: dict[str, float] = field(default_factory=dict)
    bounds: list[tuple[str, str, float | None]] = field(default_factory=list)

    @property
    def objective_row(self) -> str:
        for r in self.rows:
            if r.kind == "N":
                return r.name
        raise ValueError("document has no objective (N) row")

    def column_order(self) -> list[str]:
        seen: dict[str, None] = {}
        for col, _, _ in self.columns:
            seen.setdefault(col)
        return list(seen)

    def constraint_rows(self) -> list[MpsRow]:
        """Structural rows: everything except N rows."""
        return [r for r in self.rows if r.kind != "N"]


def _fixed_fields(line: str) -> list[str]:
    out = []
    for lo, hi in _FIXED_WINDOWS:
        piece = line[lo - 1 : hi].strip()
        if piece:
            out.append(piece)
    return out


def _tokens(line: str) -> list[str]:
    """Whitespace tokens, falling back to the fixed windows when the free
    reading is structurally impossible (embedded blanks in names)."""
    toks = line.split()
    return toks


def _parse_value(tok: str, line_no: int, what: str) -> float:
    try:
        v = float(tok.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise MpsParseError(f"{what} {tok!r} is not a number", line_no) from None
    if np.isnan(v):
        raise MpsParseError(f"{what} is NaN", line_no)
    return v


def parse_mps(text: str | bytes) -> MpsDocument:
    """Parse MPS text into a document, validating references as they appear."""
    if isinstance(text, bytes):
        text = text.decode("latin-1")
    doc = MpsDocument()
    section: str | None = None
    row_names: set[str] = set()
    col_names: set[str] = set()
    saw_endata = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        if saw_endata:
            raise MpsParseError("content after ENDATA", line_no)

        if not raw[0].isspace():
            head = raw.split()
            keyword = head[0].upper()
            if keyword not in _SECTIONS:
                raise MpsParseError(f"unknown section {head[0]!r}", line_no)
            if keyword == "NAME":
                doc.name = head[1] if len(head) > 1 else ""
            elif keyword == "ENDATA":
                saw_endata = True
            section = keyword
            continue

        if section is None or section in ("NAME", "ENDATA"):
            raise MpsParseError("data before any section header", line_no)

        toks = _tokens(raw)
        if section == "ROWS":
            if len(toks) != 2:
                toks = _fixed_fields(raw)
            if len(toks) != 2:
                raise MpsParseError("ROWS entry needs a type and a name", line_no)
            kind = toks[0].upper()
            if kind not in _ROW_KINDS:
                raise MpsParseError(f"unknown row type {toks[0]!r}", line_no)
            if toks[1] in row_names:
                raise MpsParseError(f"duplicate row name {toks[1]!r}", line_no)
            row_names.add(toks[1])
            doc.rows.append(MpsRow(kind, toks[1]))
        elif section == "COLUMNS":
            _parse_columns_line(doc, raw, toks, line_no, row_names, col_names)
        elif section in ("RHS", "RANGES"):
            _parse_pairs_line(doc, section, raw, toks, line_no, row_names)
        elif section == "BOUNDS":
            _parse_bounds_line(doc, raw, toks, line_no, col_names)

    if not any(r.kind == "N" for r in doc.rows):
        raise MpsParseError("no objective (N) row declared")
    return doc


def _parse_columns_line(doc, raw, toks, line_no, row_names, col_names):
    if len(toks) >= 2 and toks[1].strip("'\"").upper() == "MARKER":
        raise MpsParseError(
            "integer markers are not supported (continuous problems only)", line_no
        )
    if len(toks) not in (3, 5):
        toks = _fixed_fields(raw)
    if len(toks) not in (3, 5):
        raise MpsParseError(
            "COLUMNS entry needs a column, then 1 or 2 (row, value) pairs", line_no
        )
    col = toks[0]
    col_names.add(col)
    for i in range(1, len(toks), 2):
        row = toks[i]
        if row not in row_names:
            raise MpsParseError(f"COLUMNS references undeclared row {row!r}", line_no)
        doc.columns.append((col, row, _parse_value(toks[i + 1], line_no, "coefficient")))


def _parse_pairs_line(doc, section, raw, toks, line_no, row_names):
    # The leading set name is optional; an even token count means it was
    # omitted and every token belongs to a (row, value) pair.
    if len(toks) not in (2, 3, 4, 5):
        toks = _fixed_fields(raw)
    if len(toks) in (3, 5):
        toks = toks[1:]
    if len(toks) not in (2, 4):
        raise MpsParseError(f"{section} entry needs (row, value) pairs", line_no)
    target = doc.rhs if section == "RHS" else doc.ranges
    for i in range(0, len(toks), 2):
        row = toks[i]
        if row not in row_names:
            raise MpsParseError(
                f"{section} references undeclared row {row!r}", line_no
            )
        target[row] = _parse_value(toks[i + 1], line_no, f"{section} value")


def _parse_bounds_line(doc, raw, toks, line_no, col_names):
    if not toks:
        raise MpsParseError("empty BOUNDS entry", line_no)
    code = toks[0].upper()
    if code == "BV":
        raise MpsParseError(
            "binary bound code BV is not supported (continuous problems only)",
            line_no,
        )
    if code in _VALUE_BOUNDS:
        want = 4
    elif code in _FLAG_BOUNDS:
        want = 3
    else:
        raise MpsParseError(f"unknown bound code {toks[0]!r}", line_no)
    if len(toks) not in (want, want - 1):
        toks = _fixed_fields(raw)
    if len(toks) == want - 1:
        # Set name omitted.
        toks = [code, ""] + toks[1:]
    if len(toks) < want:
        raise MpsParseError(f"bound code {code} needs a column", line_no)
    col = toks[2]
    if col not in col_names:
        raise MpsParseError(f"BOUNDS references undeclared column {col!r}", line_no)
    value = None
    if code in _VALUE_BOUNDS:
        value = _parse_value(toks[3], line_no, "bound value")
    doc.bounds.append((code, col, value))


def _row_interval(kind: str, b: float, rng: float | None) -> tuple[float, float]:
    """[lo, hi] a constraint row must land in, after RANGES expansion."""
    if rng is None:
        if kind == "G":
            return b, np.inf
        if kind == "L":
            return -np.inf, b
        return b, b
    if kind == "G":
        return b, b + abs(rng)
    if kind == "L":
        return b - abs(rng), b
    # E row: the sign of the range picks the side.
    if rng >= 0:
        return b, b + rng
    return b + rng, b


def to_general_form(doc: MpsDocument) -> GeneralFormLp:
    """Lower a document to min c'x, Ax >= b, l <= x <= u.

    The first N row is the objective; later N rows are free rows and are
    dropped.  Each constraint row's interval contributes a >= row for a
    finite lower end and a negated >= row for a finite upper end.  The RHS
    entry of the objective row is the negated objective constant.
    """
    obj_row = doc.objective_row
    cols = doc.column_order()
    col_idx = {cname: i for i, cname in enumerate(cols)}
    n = len(cols)

    kinds = {r.name: r.kind for r in doc.rows}
    for row in doc.ranges:
        if kinds[row] == "N":
            raise ValueError(f"RANGES entry on free row {row!r}")

    c = np.zeros(n)
    by_row: dict[str, dict[int, float]] = {r.name: {} for r in doc.rows}
    for col, row, val in doc.columns:
        j = col_idx[col]
        if row == obj_row:
            c[j] += val
        else:
            cur = by_row[row]
            cur[j] = cur.get(j, 0.0) + val

    lows, rows_i, cols_j, vals = [], [], [], []

    def emit(entries: dict[int, float], sign: float, rhs: float):
        i = len(lows)
        lows.append(rhs)
        for j, v in entries.items():
            rows_i.append(i)
            cols_j.append(j)
            vals.append(sign * v)

    for r in doc.constraint_rows():
        lo, hi = _row_interval(kinds[r.name], doc.rhs.get(r.name, 0.0), doc.ranges.get(r.name))
        entries = by_row[r.name]
        if np.isfinite(lo):
            emit(entries, 1.0, lo)
        if np.isfinite(hi):
            emit(entries, -1.0, -hi)

    l = np.zeros(n)
    u = np.full(n, np.inf)
    explicit_lower = np.zeros(n, dtype=bool)
    for code, col, value in doc.bounds:
        j = col_idx[col]
        if code == "LO":
            l[j] = value
            explicit_lower[j] = True
        elif code == "UP":
            u[j] = value
            if value < 0 and not explicit_lower[j]:
                # Classic convention: a negative upper bound on a column whose
                # lower bound was never set releases the lower bound, instead
                # of leaving the contradictory 0 <= x <= value.
                l[j] = -np.inf
        elif code == "FX":
            l[j] = value
            u[j] = value
            explicit_lower[j] = True
        elif code == "FR":
            l[j] = -np.inf
            u[j] = np.inf
        elif code == "MI":
            l[j] = -np.inf
            explicit_lower[j] = True
        elif code == "PL":
            u[j] = np.inf

    bad = np.flatnonzero(l > u)
    if bad.size:
        names = ", ".join(cols[int(j)] for j in bad[:5])
        raise ValueError(f"conflicting bounds leave l > u on columns: {names}")

    a = SparseMatrix.from_triplets(len(lows), n, rows_i, cols_j, vals)
    return GeneralFormLp(
        c=c,
        a=a,
        b=np.asarray(lows, dtype=np.float64),
        l=l,
        u=u,
        name=doc.name,
        objective_offset=-doc.rhs.get(obj_row, 0.0),
    )


def load_mps(path) -> GeneralFormLp:
    with open(path, "rb") as fh:
        return to_general_form(parse_mps(fh.read()))


def _fmt(v: float) -> str:
    """Shortest decimal that round-trips through float."""
    return np.format_float_positional(v, unique=True, trim="0")


def write_mps(doc: MpsDocument) -> str:
    """Render a document as whitespace-delimited MPS.

    parse_mps(write_mps(doc)) reproduces doc exactly: names are emitted
    verbatim, values in round-trip decimal, sections in canonical order.
    """
    out = [f"NAME {doc.name}".rstrip()]
    out.append("ROWS")
    for r in doc.rows:
        out.append(f" {r.kind}  {r.name}")
    out.append("COLUMNS")
    for col, row, val in doc.columns:
        out.append(f"    {col}  {row}  {_fmt(val)}")
    if doc.rhs:
        out.append("RHS")
        for row, val in doc.rhs.items():
            out.append(f"    RHS1  {row}  {_fmt(val)}")
    if doc.ranges:
        out.append("RANGES")
        for row, val in doc.ranges.items():
            out.append(f"    RNG1  {row}  {_fmt(val)}")
    if doc.bounds:
        out.append("BOUNDS")
        for code, col, value in doc.bounds:
            if value is None:
                out.append(f" {code}  BND1  {col}")
            else:
                out.append(f" {code}  BND1  {col}  {_fmt(value)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"
