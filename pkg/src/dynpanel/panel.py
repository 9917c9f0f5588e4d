"""Binary-choice panel data and estimation-window extraction.

A panel is stored in long format: one row per observed period, grouped by
individual through an ``offsets`` array.  The initial status ``y0`` of each
individual lives outside the period rows because the model is not specified
for the initial period.

An estimation window is a run of four consecutive periods
``(t-2, t-1, t, t+1)``; the ``t-2`` slot may be the initial status.  Each
window is reduced to the quantities the maximum score objectives consume:
the middle-period special regressor ``z_t``, the middle choice ``y_t``, the
switch indicator ``y_{t+1} - y_{t-1}`` and the difference regressor

    chi_bar = (y_t - y_{t-2}, x_{t+1} - x_{t-1}, z_{t+1} - z_{t-1}).
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, GapPolicyViolation, ParseError, SchemaError

__all__ = [
    "IndividualRecord",
    "PanelDataset",
    "EstimationWindow",
    "WindowSet",
    "ValidationReport",
    "validate",
    "extract_windows",
    "read_csv",
    "write_csv",
    "Coefficients",
]


@dataclass(frozen=True, eq=False)
class IndividualRecord:
    """Observed history of one individual.

    ``t0`` is the time index of the initial status; it defaults to one period
    before the first observed period.
    """

    id: object
    y0: int
    t: np.ndarray
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    t0: int | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.int64).reshape(-1))
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(len(t), -1) if len(t) else x.reshape(0, 0)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).reshape(-1))
        if self.t0 is None:
            object.__setattr__(self, "t0", int(t[0]) - 1 if len(t) else 0)

    @property
    def n_periods(self) -> int:
        return len(self.t)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """A (possibly unbalanced) binary-choice panel in long format.

    Parameters
    ----------
    ids : array of individual identifiers, shape (n,)
    y0, t0 : initial status and its time index, shape (n,)
    offsets : row offsets, shape (n + 1,); rows of individual ``i`` are
        ``offsets[i]:offsets[i + 1]``
    t, y, z : per-row time index, choice and special regressor
    x : per-row covariates, shape (rows, p)
    x_names : names of the ``p`` covariate columns
    init_x, init_z : covariates of the initial period, if known (NaN otherwise);
        only used when writing the panel back to CSV
    """

    ids: np.ndarray
    y0: np.ndarray
    t0: np.ndarray
    offsets: np.ndarray
    t: np.ndarray
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    x_names: tuple = ()
    init_x: np.ndarray | None = None
    init_z: np.ndarray | None = None

    def __post_init__(self):
        p = self.x.shape[1] if self.x.ndim == 2 else 0
        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"x{k + 1}" for k in range(p)))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_records(cls, records: Sequence[IndividualRecord], x_names=None) -> "PanelDataset":
        records = list(records)
        p = None
        for r in records:
            if r.n_periods:
                p = r.x.shape[1]
                break
        if p is None:
            p = len(x_names) if x_names else 0
        lengths = np.array([r.n_periods for r in records], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)

        def cat(attr, shape_tail=()):
            parts = [getattr(r, attr) for r in records if r.n_periods]
            if not parts:
                return np.zeros((0,) + shape_tail)
            return np.concatenate(parts)

        x_parts = [r.x.reshape(r.n_periods, -1) for r in records if r.n_periods]
        x = np.concatenate(x_parts) if x_parts else np.zeros((0, p))
        ids = np.empty(len(records), dtype=object)
        ids[:] = [r.id for r in records]
        return cls(
            ids=ids,
            y0=np.array([r.y0 for r in records], dtype=np.int64),
            t0=np.array([r.t0 for r in records], dtype=np.int64),
            offsets=offsets,
            t=cat("t").astype(np.int64),
            y=cat("y").astype(np.int64),
            x=x.astype(float),
            z=cat("z").astype(float),
            x_names=tuple(x_names) if x_names else (),
        )

    # -- basic accessors ----------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return self.n

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_periods(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def owner(self) -> np.ndarray:
        """Individual index of every row."""
        return np.repeat(np.arange(self.n), self.n_periods)

    def record(self, i: int) -> IndividualRecord:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return IndividualRecord(
            id=self.ids[i],
            y0=int(self.y0[i]),
            t=self.t[lo:hi].copy(),
            y=self.y[lo:hi].copy(),
            x=self.x[lo:hi].copy(),
            z=self.z[lo:hi].copy(),
            t0=int(self.t0[i]),
        )

    @property
    def individuals(self) -> list[IndividualRecord]:
        return [self.record(i) for i in range(self.n)]

    def take(self, idx) -> "PanelDataset":
        """Dataset made of individuals ``idx`` (repeats allowed), in that order."""
        idx = np.asarray(idx, dtype=np.int64)
        rows = _gather_ranges(self.offsets, idx)
        lengths = self.n_periods[idx]
        return PanelDataset(
            ids=self.ids[idx],
            y0=self.y0[idx],
            t0=self.t0[idx],
            offsets=np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64),
            t=self.t[rows],
            y=self.y[rows],
            x=self.x[rows],
            z=self.z[rows],
            x_names=self.x_names,
            init_x=None if self.init_x is None else self.init_x[idx],
            init_z=None if self.init_z is None else self.init_z[idx],
        )

    def equals(self, other: "PanelDataset") -> bool:
        """Exact equality of content (ids, times, values and covariate names)."""
        if self.n != other.n or self.x_names != other.x_names:
            return False
        return (
            list(self.ids) == list(other.ids)
            and np.array_equal(self.y0, other.y0)
            and np.array_equal(self.t0, other.t0)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )


def _gather_ranges(offsets: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Concatenate ``arange(offsets[i], offsets[i+1])`` for every ``i`` in idx."""
    starts = offsets[idx]
    lengths = offsets[idx + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    shift = np.repeat(starts - np.concatenate([[0], np.cumsum(lengths)[:-1]]), lengths)
    return np.arange(total, dtype=np.int64) + shift


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimationWindow:
    """One four-period window reduced to what the objectives need."""

    id: object
    t: int
    z_mid: float
    y_mid: int
    d_switch: int
    chi_bar: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Columnar collection of estimation windows.

    ``owner`` indexes the individual (0..n_individuals-1) each window comes
    from, so bootstrap resampling can be done by individual rather than by
    window.  Windows are sorted by owner.
    """

    owner: np.ndarray
    t: np.ndarray
    z_mid: np.ndarray
    y_mid: np.ndarray
    d_switch: np.ndarray
    chi_bar: np.ndarray
    n_individuals: int
    ids: np.ndarray | None = None
    names: tuple = ()

    def __len__(self) -> int:
        return len(self.owner)

    @property
    def dim(self) -> int:
        return self.chi_bar.shape[1]

    def __iter__(self) -> Iterator[EstimationWindow]:
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, k: int) -> EstimationWindow:
        o = int(self.owner[k])
        return EstimationWindow(
            id=self.ids[o] if self.ids is not None else o,
            t=int(self.t[k]),
            z_mid=float(self.z_mid[k]),
            y_mid=int(self.y_mid[k]),
            d_switch=int(self.d_switch[k]),
            chi_bar=self.chi_bar[k].copy(),
        )

    @classmethod
    def from_windows(cls, windows: Sequence[EstimationWindow], n_individuals=None, names=()) -> "WindowSet":
        """Build a set from individual windows; distinct ids define owners."""
        windows = list(windows)
        keys = {}
        owner = []
        for w in windows:
            owner.append(keys.setdefault(w.id, len(keys)))
        order = np.argsort(np.asarray(owner, dtype=np.int64), kind="stable")
        windows = [windows[k] for k in order]
        owner = np.asarray(owner, dtype=np.int64)[order]
        dim = len(windows[0].chi_bar) if windows else len(names)
        ids = np.empty(len(keys), dtype=object)
        ids[:] = list(keys)
        return cls(
            owner=owner,
            t=np.array([w.t for w in windows], dtype=np.int64),
            z_mid=np.array([w.z_mid for w in windows], dtype=float),
            y_mid=np.array([w.y_mid for w in windows], dtype=np.int64),
            d_switch=np.array([w.d_switch for w in windows], dtype=np.int64),
            chi_bar=np.array([w.chi_bar for w in windows], dtype=float).reshape(len(windows), dim),
            n_individuals=len(keys) if n_individuals is None else int(n_individuals),
            ids=ids,
            names=tuple(names),
        )

    def take_individuals(self, idx) -> "WindowSet":
        """Windows of the individuals ``idx`` (repeats allowed), renumbered 0..len(idx)-1."""
        idx = np.asarray(idx, dtype=np.int64)
        starts = np.searchsorted(self.owner, np.arange(self.n_individuals + 1))
        rows = _gather_ranges(starts, idx)
        counts = starts[idx + 1] - starts[idx]
        return WindowSet(
            owner=np.repeat(np.arange(len(idx), dtype=np.int64), counts),
            t=self.t[rows],
            z_mid=self.z_mid[rows],
            y_mid=self.y_mid[rows],
            d_switch=self.d_switch[rows],
            chi_bar=self.chi_bar[rows],
            n_individuals=len(idx),
            ids=None if self.ids is None else self.ids[idx],
            names=self.names,
        )

    def windows_per_individual(self) -> np.ndarray:
        return np.bincount(self.owner, minlength=self.n_individuals)


@dataclass(frozen=True, eq=False)
class Coefficients:
    """A parameter point ``(r, b, w)``: lag slot, covariate slots, special-regressor slot."""

    r: float
    b: np.ndarray
    w: float
    names: tuple = ()

    @classmethod
    def from_vector(cls, v, names=()) -> "Coefficients":
        v = np.asarray(v, dtype=float).reshape(-1)
        return cls(float(v[0]), v[1:-1].copy(), float(v[-1]), tuple(names))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.r], np.asarray(self.b, dtype=float).reshape(-1), [self.w]])

    def __array__(self, dtype=None, copy=None):
        v = self.vector
        return v if dtype is None else v.astype(dtype)

    def __len__(self) -> int:
        return len(self.vector)

    def as_dict(self) -> dict:
        names = self.names or coefficient_names([f"x{k + 1}" for k in range(len(self.b))])
        return dict(zip(names, map(float, self.vector)))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def coefficient_names(x_names: Sequence[str]) -> tuple:
    """Names of the parameter slots: lag coefficient, covariates, special regressor."""
    return ("y_lag",) + tuple(x_names) + ("z",)


def _window_rows(ds: PanelDataset):
    """Row indices of middle periods that start a valid window, plus the t-2 choice."""
    n_rows = len(ds.t)
    if n_rows == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    owner = ds.owner
    g = np.arange(n_rows)
    k = g - ds.offsets[owner]
    T = ds.n_periods[owner]
    cand = (k >= 1) & (k <= T - 2)
    gm1 = np.clip(g - 1, 0, n_rows - 1)
    gp1 = np.clip(g + 1, 0, n_rows - 1)
    gm2 = np.clip(g - 2, 0, n_rows - 1)
    ok = cand & (ds.t[gm1] == ds.t - 1) & (ds.t[gp1] == ds.t + 1)
    from_y0 = k == 1
    t_lag2 = np.where(from_y0, ds.t0[owner], ds.t[gm2])
    y_lag2 = np.where(from_y0, ds.y0[owner], ds.y[gm2])
    ok &= t_lag2 == ds.t - 2
    return g[ok], y_lag2[ok]


def _has_gaps(ds: PanelDataset) -> np.ndarray:
    """Per-individual flag: periods (including the initial one) are not consecutive."""
    gaps = np.zeros(ds.n, dtype=bool)
    if len(ds.t) == 0:
        return gaps
    owner = ds.owner
    first = ds.offsets[:-1][ds.n_periods > 0]
    step = np.diff(ds.t, prepend=ds.t[0])
    step[first] = ds.t[first] - ds.t0[owner[first]]
    np.logical_or.at(gaps, owner, step != 1)
    return gaps


def extract_windows(dataset: PanelDataset, strict: bool = False) -> WindowSet:
    """Reduce a panel to its estimation windows.

    One window per individual and interior period ``t`` such that periods
    ``t-2, t-1, t, t+1`` are all observed consecutively (``t-2`` may be the
    initial status).  Windows interrupted by a gap are skipped; with
    ``strict=True`` any gap raises :class:`GapPolicyViolation` instead.
    """
    report = validate(dataset, _count=False)
    if report.issues:
        raise DomainError("invalid dataset: " + "; ".join(report.issues[:5]))
    if strict:
        gaps = _has_gaps(dataset)
        if gaps.any():
            bad = dataset.ids[np.flatnonzero(gaps)[0]]
            raise GapPolicyViolation(f"individual {bad!r} has non-consecutive periods")
    return _build_windows(dataset)


def _build_windows(ds: PanelDataset) -> WindowSet:
    rows, y_lag2 = _window_rows(ds)
    owner = ds.owner[rows] if len(rows) else np.zeros(0, dtype=np.int64)
    before, after = rows - 1, rows + 1
    chi = np.empty((len(rows), ds.p + 2))
    chi[:, 0] = ds.y[rows] - y_lag2
    chi[:, 1:-1] = ds.x[after] - ds.x[before]
    chi[:, -1] = ds.z[after] - ds.z[before]
    return WindowSet(
        owner=owner.astype(np.int64),
        t=ds.t[rows],
        z_mid=ds.z[rows].astype(float),
        y_mid=ds.y[rows],
        d_switch=ds.y[after] - ds.y[before],
        chi_bar=chi,
        n_individuals=ds.n,
        ids=ds.ids,
        names=coefficient_names(ds.x_names),
    )


@dataclass
class ValidationReport:
    n_individuals: int
    p: int
    windows_per_individual: np.ndarray
    switcher_fraction: float
    issues: list

    @property
    def n_windows(self) -> int:
        return int(self.windows_per_individual.sum())

    @property
    def ok(self) -> bool:
        return not self.issues


def validate(dataset: PanelDataset, _count: bool = True) -> ValidationReport:
    """Check the dataset invariants and summarise its usable windows.

    Never raises and never mutates; problems are listed in ``issues``.
    """
    ds = dataset
    issues = []
    lengths = ds.n_periods
    for i in np.flatnonzero(lengths < 1):
        issues.append(f"individual {ds.ids[i]!r}: no observed period beyond the initial one")
    if not np.isin(ds.y0, (0, 1)).all():
        i = int(np.flatnonzero(~np.isin(ds.y0, (0, 1)))[0])
        issues.append(f"individual {ds.ids[i]!r}: initial status {ds.y0[i]} not in {{0, 1}}")
    if not np.isin(ds.y, (0, 1)).all():
        g = int(np.flatnonzero(~np.isin(ds.y, (0, 1)))[0])
        issues.append(f"individual {ds.ids[ds.owner[g]]!r}: y={ds.y[g]} at t={ds.t[g]} not in {{0, 1}}")
    if ds.x.ndim != 2 or ds.x.shape[0] != len(ds.t) or len(ds.x_names) != ds.p:
        issues.append("covariate block does not have a common width p")
    if len(ds.t):
        owner = ds.owner
        same = owner[1:] == owner[:-1]
        bad = same & (np.diff(ds.t) <= 0)
        for g in np.flatnonzero(bad)[:5]:
            issues.append(f"individual {ds.ids[owner[g]]!r}: time indices not strictly increasing")
        first = ds.offsets[:-1][lengths > 0]
        bad0 = ds.t[first] <= ds.t0[lengths > 0]
        for i in np.flatnonzero(lengths > 0)[bad0][:5]:
            issues.append(f"individual {ds.ids[i]!r}: initial period not before the first period")

    if _count and not issues:
        w = _build_windows(ds)
        per = w.windows_per_individual()
        frac = float(np.mean(w.d_switch != 0)) if len(w) else 0.0
    else:
        per = np.zeros(ds.n, dtype=np.int64)
        frac = 0.0
    return ValidationReport(ds.n, ds.p, per, frac, issues)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

_X_COL = re.compile(r"^x(\d+)$")


def _sort_ids(ids):
    try:
        return sorted(ids, key=int)
    except ValueError:
        return sorted(ids)


def read_csv(path, x_columns: Sequence[str] | None = None, y0_column: str | None = "auto") -> PanelDataset:
    """Read a panel from CSV.

    Required columns are ``id, t, y, z`` and the covariates (by default every
    column named ``x1, x2, ...``).  If a ``y0`` column exists (or
    ``y0_column`` names one) it supplies the initial status and every row is
    an observed period; otherwise the earliest row of each id is consumed as
    the initial status.  Rows may come in any order.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        missing = [c for c in ("id", "t", "y", "z") if c not in header]
        if x_columns is None:
            x_columns = sorted((h for h in header if _X_COL.match(h)), key=lambda h: int(h[1:]))
        missing += [c for c in x_columns if c not in header]
        if y0_column == "auto":
            y0_column = "y0" if "y0" in header else None
        elif y0_column is not None and y0_column not in header:
            missing.append(y0_column)
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        col = {h: k for k, h in enumerate(header)}

        groups: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                t = int(row[col["t"]])
                y = int(row[col["y"]])
                z = float(row[col["z"]])
                x = [float(row[col[c]]) for c in x_columns]
                y0 = int(row[col[y0_column]]) if y0_column else None
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if y not in (0, 1):
                raise DomainError(f"{path}: row {lineno}: y={y} not in {{0, 1}}")
            if y0 is not None and y0 not in (0, 1):
                raise DomainError(f"{path}: row {lineno}: y0={y0} not in {{0, 1}}")
            groups.setdefault(row[col["id"]].strip(), []).append((t, y, z, x, y0, lineno))

    records = []
    init_x, init_z = [], []
    p = len(x_columns)
    for key in _sort_ids(groups):
        rows = sorted(groups[key], key=lambda r: r[0])
        ts = [r[0] for r in rows]
        if len(set(ts)) != len(ts):
            raise SchemaError(f"{path}: id {key!r} has duplicate t values")
        if y0_column:
            y0s = {r[4] for r in rows}
            if len(y0s) != 1:
                raise DomainError(f"{path}: id {key!r} has conflicting {y0_column} values")
            y0, t0 = y0s.pop(), ts[0] - 1
            body = rows
            init_x.append([math.nan] * p)
            init_z.append(math.nan)
        else:
            y0, t0 = rows[0][1], rows[0][0]
            body = rows[1:]
            init_x.append(rows[0][3])
            init_z.append(rows[0][2])
        rid = int(key) if key.lstrip("-").isdigit() else key
        records.append(
            IndividualRecord(
                id=rid,
                y0=y0,
                t=[r[0] for r in body],
                y=[r[1] for r in body],
                x=np.array([r[3] for r in body], dtype=float).reshape(len(body), p),
                z=[r[2] for r in body],
                t0=t0,
            )
        )
    ds = PanelDataset.from_records(records, x_names=tuple(x_columns))
    return PanelDataset(
        **{k: getattr(ds, k) for k in ("ids", "y0", "t0", "offsets", "t", "y", "x", "z", "x_names")},
        init_x=np.array(init_x, dtype=float).reshape(len(records), p),
        init_z=np.array(init_z, dtype=float),
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(dataset: PanelDataset, path) -> Path:
    """Write the panel in the standard schema; the initial status is the earliest row."""
    ds = dataset
    path = Path(path)
    init_x = ds.init_x if ds.init_x is not None else np.full((ds.n, ds.p), np.nan)
    init_z = ds.init_z if ds.init_z is not None else np.full(ds.n, np.nan)
    xcols = [f"x{k + 1}" for k in range(ds.p)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["id", "t", "y", "z", *xcols])
        for i in range(ds.n):
            out.writerow([ds.ids[i], int(ds.t0[i]), int(ds.y0[i]), _fmt(init_z[i]), *map(_fmt, init_x[i])])
            for g in range(ds.offsets[i], ds.offsets[i + 1]):
                out.writerow([ds.ids[i], int(ds.t[g]), int(ds.y[g]), _fmt(ds.z[g]), *map(_fmt, ds.x[g])])
    return path
