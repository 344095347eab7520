"""Finite-population data model: survey values, auxiliaries, coverage and response.

A frame is stored column-wise. Units outside the sampled sub-population U_B
carry no X-vector (NaN rows); the survey value may be unavailable (NaN) for
units that are never observed.
"""

from __future__ import annotations

import csv
import hashlib
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
BoolArray = npt.NDArray[np.bool_]

TRUE_TOKENS = {"1", "true", "t", "yes", "y"}
FALSE_TOKENS = {"0", "false", "f", "no", "n"}


class FrameError(ValueError):
    """Structural problem with a frame or its source file."""


class CsvError(FrameError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class UnitRecord:
    id: str
    y: float | None
    in_b: bool
    r: bool
    x: tuple[float, ...] | None
    z: tuple[float, ...]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Frame:
    """Immutable finite population U with sub-population U_B and respondent stratum."""

    ids: npt.NDArray[np.str_]
    y: FloatArray
    in_b: BoolArray
    r: BoolArray
    x: FloatArray
    z: FloatArray
    intercept: bool = False

    @classmethod
    def from_arrays(
        cls,
        y: npt.ArrayLike,
        z: npt.ArrayLike,
        in_b: npt.ArrayLike | None = None,
        r: npt.ArrayLike | None = None,
        x: npt.ArrayLike | None = None,
        ids: Sequence[str] | None = None,
        with_intercept: bool = False,
    ) -> Frame:
        """Build a frame from column data.

        ``x`` may have one row per unit of U (rows outside U_B are discarded) or
        one row per unit of U_B, in frame order. 1-d ``x``/``z`` are single
        auxiliaries. With ``with_intercept`` a unit constant is prepended to both
        bases; otherwise the caller asserts the bases already carry it (or not).
        """
        yv = np.asarray(y, dtype=np.float64).reshape(-1)
        n = yv.shape[0]
        zv = np.asarray(z, dtype=np.float64)
        if zv.ndim == 1:
            zv = zv[:, None]
        inb = np.ones(n, dtype=bool) if in_b is None else np.asarray(in_b, dtype=bool)
        rv = inb.copy() if r is None else np.asarray(r, dtype=bool)
        if x is None:
            xv = np.full((n, 0), np.nan)
        else:
            xv = np.asarray(x, dtype=np.float64)
            if xv.ndim == 1:
                xv = xv[:, None]
        if xv.shape[0] == inb.sum() and xv.shape[0] != n:
            full = np.full((n, xv.shape[1]), np.nan)
            full[inb] = xv
            xv = full
        elif xv.shape[0] == n:
            xv = xv.copy()
            xv[~inb] = np.nan
        else:
            raise FrameError(f"x has {xv.shape[0]} rows; expected {n} or {int(inb.sum())}")
        if zv.shape[0] != n or inb.shape != (n,) or rv.shape != (n,):
            raise FrameError("column lengths disagree")
        if with_intercept:
            zv = np.column_stack([np.ones(n), zv])
            ones = np.where(inb, 1.0, np.nan)
            xv = np.column_stack([ones, xv])
        if ids is None:
            idv = np.array([str(i + 1) for i in range(n)])
        else:
            idv = np.array([str(i) for i in ids])
            if idv.shape != (n,):
                raise FrameError("ids length disagrees with y")
        return cls(
            ids=_frozen(idv),
            y=_frozen(yv),
            in_b=_frozen(inb),
            r=_frozen(rv),
            x=_frozen(xv),
            z=_frozen(zv),
            intercept=with_intercept or _has_intercept(xv, zv, inb),
        )

    @property
    def n_total(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_b(self) -> int:
        return int(self.in_b.sum())

    @property
    def n_resp(self) -> int:
        return int(self.r.sum())

    @property
    def x_dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def z_dim(self) -> int:
        return int(self.z.shape[1])

    @property
    def b_rows(self) -> npt.NDArray[np.intp]:
        """Frame row of each U_B unit, in frame order (U_B position -> row)."""
        return np.flatnonzero(self.in_b)

    def units(self) -> Iterator[UnitRecord]:
        for j in range(self.n_total):
            yj = float(self.y[j])
            yield UnitRecord(
                id=str(self.ids[j]),
                y=None if np.isnan(yj) else yj,
                in_b=bool(self.in_b[j]),
                r=bool(self.r[j]),
                x=tuple(float(v) for v in self.x[j]) if self.in_b[j] else None,
                z=tuple(float(v) for v in self.z[j]),
            )

    def subset(self, rows: npt.ArrayLike) -> Frame:
        """Frame restricted to the given rows (used for partition checks)."""
        idx = np.asarray(rows)
        return Frame(
            ids=_frozen(self.ids[idx]),
            y=_frozen(self.y[idx]),
            in_b=_frozen(self.in_b[idx]),
            r=_frozen(self.r[idx]),
            x=_frozen(self.x[idx]),
            z=_frozen(self.z[idx]),
            intercept=self.intercept,
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.y, self.in_b, self.r, self.x, self.z):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


def _has_intercept(x: FloatArray, z: FloatArray, in_b: BoolArray) -> bool:
    if z.shape[1] == 0 or not np.all(z[:, 0] == 1.0):
        return False
    if x.shape[1] == 0:
        return False
    return bool(np.all(x[in_b, 0] == 1.0))


@dataclass(frozen=True)
class TotalsBundle:
    t_z: FloatArray
    t_z_b: FloatArray
    t_x_b: FloatArray
    t_x_nr: FloatArray = field(default_factory=lambda: np.zeros(0))

    @property
    def coverage_gap(self) -> FloatArray:
        """T_Z - T_Z(B): the Z-total of the units the design cannot reach."""
        return self.t_z - self.t_z_b


def validate(frame: Frame, require_intercept: bool = False) -> list[str]:
    """Return a list of invariant violations; an empty list means valid."""
    problems: list[str] = []
    n = frame.n_total
    if frame.z.ndim != 2 or frame.z.shape[0] != n:
        problems.append("z matrix shape disagrees with N")
        return problems
    if frame.x.ndim != 2 or frame.x.shape[0] != n:
        problems.append("x matrix shape disagrees with N")
        return problems
    if not np.all(np.isfinite(frame.z)):
        bad = np.flatnonzero(~np.all(np.isfinite(frame.z), axis=1))
        problems.append(f"missing z-vector for {bad.size} unit(s), first id {frame.ids[bad[0]]}")
    n_b = frame.n_b
    if not 0 < n_b <= n:
        problems.append(f"N_B = {n_b} outside (0, N={n}]")
    x_present = np.all(np.isfinite(frame.x), axis=1) if frame.x_dim else frame.in_b.copy()
    x_absent = np.all(np.isnan(frame.x), axis=1) if frame.x_dim else ~frame.in_b
    bad_in = frame.in_b & ~x_present
    if bad_in.any():
        problems.append(f"U_B unit without a complete x-vector (id {frame.ids[np.argmax(bad_in)]})")
    bad_out = ~frame.in_b & ~x_absent
    if bad_out.any():
        problems.append(f"x-vector present outside U_B (id {frame.ids[np.argmax(bad_out)]})")
    stray = frame.r & ~frame.in_b
    if stray.any():
        problems.append(f"respondent outside U_B (id {frame.ids[np.argmax(stray)]})")
    no_y = frame.r & np.isnan(frame.y)
    if no_y.any():
        problems.append(f"respondent with unavailable y (id {frame.ids[np.argmax(no_y)]})")
    if frame.intercept or require_intercept:
        if frame.z_dim == 0 or not np.all(frame.z[:, 0] == 1.0):
            problems.append("unit-constant convention: first z component is not 1 everywhere")
        if frame.x_dim == 0 or not np.all(frame.x[frame.in_b, 0] == 1.0):
            problems.append("unit-constant convention: first x component is not 1 on U_B")
    return problems


def require_valid(frame: Frame) -> None:
    problems = validate(frame)
    if problems:
        raise FrameError("invalid frame: " + "; ".join(problems))


def compute_totals(frame: Frame) -> TotalsBundle:
    require_valid(frame)
    nr = frame.in_b & ~frame.r
    return TotalsBundle(
        t_z=frame.z.sum(axis=0),
        t_z_b=frame.z[frame.in_b].sum(axis=0),
        t_x_b=frame.x[frame.in_b].sum(axis=0),
        t_x_nr=frame.x[nr].sum(axis=0),
    )


@dataclass(frozen=True)
class ColumnMap:
    """Names of the CSV columns holding each frame field.

    ``in_b`` may be None for files that only list U_B units (for instance a
    respondent/sample extract); every row is then taken to be in U_B.
    """

    id: str = "id"
    y: str = "y"
    in_b: str | None = "in_b"
    r: str = "r"
    x: tuple[str, ...] = ()
    z: tuple[str, ...] = ()
    missing: str = ""

    @classmethod
    def for_frame(cls, frame: Frame) -> ColumnMap:
        """Default names for the non-constant auxiliaries of ``frame``."""
        skip = int(frame.intercept)
        return cls(
            x=tuple(f"x{k + 1}" for k in range(frame.x_dim - skip)),
            z=tuple(f"z{m + 1}" for m in range(frame.z_dim - skip)),
        )


def _parse_bool(token: str, row: int, column: str) -> bool:
    t = token.strip().lower()
    if t in TRUE_TOKENS:
        return True
    if t in FALSE_TOKENS:
        return False
    raise CsvError(f"cannot parse {token!r} as a 0/1 indicator", row, column)


def _parse_real(token: str, row: int, column: str, missing: str) -> float:
    if token.strip() == missing:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise CsvError(f"cannot parse {token!r} as a number", row, column) from None


def ingest_csv(
    path: str | Path,
    schema: ColumnMap,
    with_intercept: bool = False,
) -> Frame:
    """Read a frame from a header-row CSV. Row numbers in errors count the header as row 1."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = [schema.id, schema.y, schema.r, *schema.x, *schema.z]
        if schema.in_b is not None:
            wanted.append(schema.in_b)
        absent = [c for c in wanted if c not in header]
        if absent:
            raise CsvError(f"schema columns not found in header: {absent}")
        if not schema.z:
            raise CsvError("schema names no z columns")
        ids, ys, inbs, rs, xs, zs = [], [], [], [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if None in rec or any(v is None for v in rec.values()):
                raise CsvError("wrong number of fields", lineno)
            inb = True if schema.in_b is None else _parse_bool(rec[schema.in_b], lineno, schema.in_b)
            r = _parse_bool(rec[schema.r], lineno, schema.r)
            if r and not inb:
                raise CsvError("respondent outside U_B", lineno, schema.r)
            y = _parse_real(rec[schema.y], lineno, schema.y, schema.missing)
            if r and np.isnan(y):
                raise CsvError("respondent row has a missing survey value", lineno, schema.y)
            xrow = [_parse_real(rec[c], lineno, c, schema.missing) for c in schema.x]
            for c, v in zip(schema.x, xrow):
                if inb and np.isnan(v):
                    raise CsvError("U_B unit with missing x value", lineno, c)
                if not inb and not np.isnan(v):
                    raise CsvError("x value given for a unit outside U_B", lineno, c)
            zrow = [_parse_real(rec[c], lineno, c, schema.missing) for c in schema.z]
            for c, v in zip(schema.z, zrow):
                if np.isnan(v):
                    raise CsvError("missing z value", lineno, c)
            ids.append(rec[schema.id])
            ys.append(y)
            inbs.append(inb)
            rs.append(r)
            xs.append(xrow)
            zs.append(zrow)
    if not ids:
        raise CsvError("file has no data rows")
    frame = Frame.from_arrays(
        y=ys,
        z=np.array(zs, dtype=np.float64).reshape(len(ids), len(schema.z)),
        in_b=inbs,
        r=rs,
        x=np.array(xs, dtype=np.float64).reshape(len(ids), len(schema.x)),
        ids=ids,
        with_intercept=with_intercept,
    )
    problems = validate(frame)
    if problems:
        raise FrameError("; ".join(problems))
    return frame


def _fmt(v: float, missing: str) -> str:
    return missing if np.isnan(v) else repr(float(v))


def export_csv(frame: Frame, path: str | Path, schema: ColumnMap | None = None) -> ColumnMap:
    """Write a frame so that ``ingest_csv`` with the returned schema reproduces it exactly.

    The leading unit constant of an intercepted frame is not written; read the
    file back with ``with_intercept=True``.
    """
    schema = schema or ColumnMap.for_frame(frame)
    skip = int(frame.intercept)
    if len(schema.x) != frame.x_dim - skip or len(schema.z) != frame.z_dim - skip:
        raise FrameError("schema dimensions disagree with frame")
    in_b_col = schema.in_b or "in_b"
    header = [schema.id, schema.y, in_b_col, schema.r, *schema.x, *schema.z]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j in range(frame.n_total):
            w.writerow(
                [
                    frame.ids[j],
                    _fmt(frame.y[j], schema.missing),
                    int(frame.in_b[j]),
                    int(frame.r[j]),
                    *(_fmt(v, schema.missing) for v in frame.x[j, skip:]),
                    *(_fmt(v, schema.missing) for v in frame.z[j, skip:]),
                ]
            )
    if schema.in_b is None:
        schema = ColumnMap(schema.id, schema.y, in_b_col, schema.r, schema.x, schema.z, schema.missing)
    return schema
