"""Tabular data model: typed columns, missing values, CSV ingestion.

A :class:`Dataset` stores predictors as one float64 matrix.  Ordinal
columns hold their numeric values, categorical columns hold dense level
codes 0..L-1 (encoded in first-appearance order), and missing cells are
NaN in either case.  The response is a separate float vector and must be
complete.  Datasets are immutable after construction and safe to share.

Column roles come from a sidecar file with one ``<name> <letter>`` line
per column: ``d`` response, ``n`` ordinal, ``c`` categorical, ``x``
excluded.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError, ValidationError

DEFAULT_NA_TOKENS = ("NA", "")

ROLE_DEPENDENT = "d"
ROLE_ORDINAL = "n"
ROLE_CATEGORICAL = "c"
ROLE_EXCLUDED = "x"
_ROLES = {ROLE_DEPENDENT, ROLE_ORDINAL, ROLE_CATEGORICAL, ROLE_EXCLUDED}


@dataclass(frozen=True)
class Dataset:
    """Immutable dataset: predictor matrix, roles, response."""

    names: tuple                 # predictor names, length K
    X: np.ndarray                # n x K float64; levels as codes, NaN missing
    iscat: np.ndarray            # int8 flags, length K
    levels: tuple                # per predictor: tuple of level labels or None
    y: np.ndarray                # response, float64, no NaN
    y_name: str

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValidationError("X and y row counts differ")
        if self.n_rows < 2:
            raise ValidationError("dataset needs at least 2 rows")
        if np.isnan(self.y).any():
            raise ValidationError("response contains missing values")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.X.shape[1]

    @property
    def nlev(self) -> np.ndarray:
        """Level counts per predictor (0 for ordinal columns)."""
        return np.array(
            [len(lv) if lv is not None else 0 for lv in self.levels],
            dtype=np.intp)

    def drop_predictors(self, drop) -> "Dataset":
        """New dataset without the predictor indices in ``drop``."""
        keep = [k for k in range(self.n_predictors) if k not in set(drop)]
        return self.select_predictors(keep)

    def select_predictors(self, keep) -> "Dataset":
        """New dataset with only the predictor indices in ``keep``."""
        keep = list(keep)
        return Dataset(
            names=tuple(self.names[k] for k in keep),
            X=np.ascontiguousarray(self.X[:, keep]),
            iscat=self.iscat[keep].copy(),
            levels=tuple(self.levels[k] for k in keep),
            y=self.y,
            y_name=self.y_name,
        )

    def take_rows(self, idx) -> "Dataset":
        """New dataset restricted to the given row indices."""
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(
            names=self.names,
            X=np.ascontiguousarray(self.X[idx]),
            iscat=self.iscat,
            levels=self.levels,
            y=self.y[idx].copy(),
            y_name=self.y_name,
        )

    def with_response(self, y) -> "Dataset":
        """New dataset sharing predictors with a replaced response."""
        return Dataset(names=self.names, X=self.X, iscat=self.iscat,
                       levels=self.levels, y=np.asarray(y, dtype=np.float64),
                       y_name=self.y_name)


def from_arrays(names, columns, roles, y, y_name="y") -> Dataset:
    """Build a Dataset from per-column arrays.

    ``roles`` holds 'n' or 'c' per column; categorical columns may be
    numeric (codes taken from first-appearance order of their values) or
    string-labeled.
    """
    if len(names) != len(columns) or len(roles) != len(columns):
        raise ValidationError("names, columns and roles lengths differ")
    n = len(y)
    X = np.empty((n, len(columns)), dtype=np.float64)
    iscat = np.zeros(len(columns), dtype=np.int8)
    levels = []
    for k, (col, role) in enumerate(zip(columns, roles)):
        if role == ROLE_ORDINAL:
            X[:, k] = np.asarray(col, dtype=np.float64)
            levels.append(None)
        elif role == ROLE_CATEGORICAL:
            iscat[k] = 1
            codes, labels = _encode_levels(col)
            X[:, k] = codes
            levels.append(tuple(labels))
        else:
            raise ValidationError(f"unsupported role {role!r} for column {names[k]!r}")
    return Dataset(names=tuple(names), X=X, iscat=iscat, levels=tuple(levels),
                   y=np.asarray(y, dtype=np.float64), y_name=y_name)


def _encode_levels(col):
    codes = np.empty(len(col), dtype=np.float64)
    labels = []
    seen = {}
    for i, cell in enumerate(col):
        if cell is None or (isinstance(cell, float) and np.isnan(cell)):
            codes[i] = np.nan
            continue
        key = str(cell)
        if key not in seen:
            seen[key] = len(labels)
            labels.append(key)
        codes[i] = seen[key]
    return codes, labels


def read_roles(roles_path) -> dict:
    """Parse a roles sidecar file into a name -> role-letter mapping."""
    mapping = {}
    with open(roles_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise SchemaError(
                    f"{roles_path}:{lineno}: expected '<column> <role>'")
            name, role = parts
            if role not in _ROLES:
                raise SchemaError(
                    f"{roles_path}:{lineno}: unknown role {role!r} "
                    f"(expected one of d, n, c, x)")
            if name in mapping:
                raise SchemaError(f"{roles_path}:{lineno}: duplicate column {name!r}")
            mapping[name] = role
    return mapping


def load_csv(data_path, roles_path, na_tokens=DEFAULT_NA_TOKENS) -> Dataset:
    """Load a headered CSV with a roles sidecar into a Dataset.

    Ordinal cells parse as reals, categorical cells are level-encoded in
    first-appearance order, cells matching an NA token become missing, and
    excluded columns are dropped.  The response must be complete.
    """
    roles = read_roles(roles_path)
    na = set(na_tokens)
    with open(data_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{data_path}: empty file, header required")
        rows = [row for row in reader if row]

    if len(set(header)) != len(header):
        raise SchemaError(f"{data_path}: duplicate column names in header")
    for name in header:
        if name not in roles:
            raise SchemaError(f"{data_path}: column {name!r} has no role entry")
    for name in roles:
        if name not in header:
            raise SchemaError(f"roles file names unknown column {name!r}")
    dep = [name for name in header if roles[name] == ROLE_DEPENDENT]
    if len(dep) != 1:
        raise ValidationError(
            f"expected exactly one dependent column, found {len(dep)}")
    y_name = dep[0]

    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(
                f"{data_path}: row {r} has {len(row)} cells, expected {len(header)}")

    n = len(rows)
    if n < 2:
        raise ValidationError(f"{data_path}: need at least 2 data rows, found {n}")

    names, columns, col_roles = [], [], []
    y = np.empty(n, dtype=np.float64)
    for c, name in enumerate(header):
        role = roles[name]
        if role == ROLE_EXCLUDED:
            continue
        cells = [row[c] for row in rows]
        if role == ROLE_DEPENDENT:
            for i, cell in enumerate(cells):
                if cell in na:
                    raise ValidationError(
                        f"{data_path}: missing response at row {i + 2}, "
                        f"column {name!r}")
                try:
                    y[i] = float(cell)
                except ValueError:
                    raise SchemaError(
                        f"{data_path}: unparseable response {cell!r} at "
                        f"row {i + 2}, column {name!r}")
            continue
        if role == ROLE_ORDINAL:
            col = np.empty(n, dtype=np.float64)
            for i, cell in enumerate(cells):
                if cell in na:
                    col[i] = np.nan
                    continue
                try:
                    col[i] = float(cell)
                except ValueError:
                    raise SchemaError(
                        f"{data_path}: unparseable ordinal value {cell!r} at "
                        f"row {i + 2}, column {name!r}")
            names.append(name)
            columns.append(col)
            col_roles.append(ROLE_ORDINAL)
        else:
            col = [None if cell in na else cell for cell in cells]
            names.append(name)
            columns.append(col)
            col_roles.append(ROLE_CATEGORICAL)
    return from_arrays(names, columns, col_roles, y, y_name=y_name)


def write_csv(ds: Dataset, data_path) -> None:
    """Canonical writer: floats as shortest round-trip repr, missing as NA."""
    with open(data_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.names) + [ds.y_name])
        for i in range(ds.n_rows):
            row = []
            for k in range(ds.n_predictors):
                v = ds.X[i, k]
                if np.isnan(v):
                    row.append("NA")
                elif ds.iscat[k]:
                    row.append(ds.levels[k][int(v)])
                else:
                    row.append(repr(float(v)))
            row.append(repr(float(ds.y[i])))
            writer.writerow(row)


def write_roles(ds: Dataset, roles_path) -> None:
    """Write the roles sidecar matching :func:`write_csv` output."""
    with open(roles_path, "w", encoding="utf-8") as fh:
        for k, name in enumerate(ds.names):
            fh.write(f"{name} {'c' if ds.iscat[k] else 'n'}\n")
        fh.write(f"{ds.y_name} d\n")


def permute_response(ds: Dataset, rng) -> Dataset:
    """Dataset sharing predictors with a uniformly permuted response."""
    perm = rng.permutation(ds.n_rows)
    return ds.with_response(ds.y[perm])


def column_summary(ds: Dataset) -> list:
    """Per-column records: role, missing count, levels or value range."""
    out = []
    for k, name in enumerate(ds.names):
        col = ds.X[:, k]
        n_missing = int(np.isnan(col).sum())
        rec = {"name": name, "n_missing": n_missing}
        if ds.iscat[k]:
            rec["role"] = "categorical"
            rec["n_levels"] = len(ds.levels[k])
        else:
            rec["role"] = "ordinal"
            ok = col[~np.isnan(col)]
            rec["min"] = float(ok.min()) if ok.size else float("nan")
            rec["max"] = float(ok.max()) if ok.size else float("nan")
        out.append(rec)
    out.append({"name": ds.y_name, "role": "dependent", "n_missing": 0,
                "min": float(ds.y.min()), "max": float(ds.y.max())})
    return out
