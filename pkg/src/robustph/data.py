"""Randomly censored regression samples and their CSV ingestion."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataValidationError, DomainError, SchemaError


@dataclass(frozen=True, eq=False)
class CensoredDataset:
    """Observed triples ``(x_i, delta_i, z_i)``.

    Attributes
    ----------
    time : ndarray, shape (n,)
        Observed times ``min(T_i, C_i)``.
    status : ndarray of int, shape (n,)
        1 when the event was observed, 0 when censored.
    covariates : ndarray, shape (n, p)
    names : tuple of str
        Covariate labels, length ``p``.
    """

    time: np.ndarray
    status: np.ndarray
    covariates: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).reshape(-1)
        status = np.asarray(self.status)
        if status.dtype == bool:
            status = status.astype(int)
        status = status.reshape(-1)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(time.size, -1) if time.size else cov.reshape(0, 0)
        n = time.size
        if status.size != n or cov.shape[0] != n:
            raise DataValidationError("time, status and covariates must have the same number of rows")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            bad = np.flatnonzero(~np.isfinite(time) | (time < 0))
            raise DataValidationError(f"times must be finite and >= 0 (rows {bad.tolist()})")
        if not np.all(np.isin(status, (0, 1))):
            raise DataValidationError("status must be binary 0/1")
        if not np.all(np.isfinite(cov)):
            raise DataValidationError("covariates must be finite")
        names = tuple(self.names) if self.names else tuple(f"z{j + 1}" for j in range(cov.shape[1]))
        if len(names) != cov.shape[1]:
            raise DataValidationError("one name per covariate column is required")
        for arr in (time, cov):
            arr.setflags(write=False)
        status = status.astype(int)
        status.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.time.size

    @property
    def p(self):
        return self.covariates.shape[1]

    @property
    def events(self):
        return int(self.status.sum())

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, CensoredDataset):
            return NotImplemented
        return (
            self.names == other.names
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.status, other.status)
            and np.array_equal(self.covariates, other.covariates)
        )

    __hash__ = None

    def require_events(self):
        if self.events == 0:
            raise DataValidationError("at least one uncensored observation is required for fitting")

    def take(self, rows):
        rows = np.asarray(rows)
        return CensoredDataset(self.time[rows], self.status[rows], self.covariates[rows], self.names)

    def __repr__(self):
        return f"CensoredDataset(n={self.n}, p={self.p}, events={self.events}, names={self.names})"


def subset_covariates(data, indices):
    """Keep the covariate columns ``indices`` (0-based), in the given order."""
    indices = [int(i) for i in indices]
    if len(set(indices)) != len(indices):
        raise DomainError("covariate indices must be distinct")
    for i in indices:
        if not 0 <= i < data.p:
            raise DomainError(f"covariate index {i} out of range for p={data.p}")
    return CensoredDataset(
        data.time,
        data.status,
        data.covariates[:, indices].reshape(data.n, len(indices)),
        tuple(data.names[i] for i in indices),
    )


def _parse_float(text, what, row):
    try:
        value = float(text)
    except ValueError:
        raise DataValidationError(f"row {row}: non-numeric {what} {text!r}") from None
    if not math.isfinite(value):
        raise DataValidationError(f"row {row}: non-finite {what} {text!r}")
    return value


def load_csv(path, time_column, status_column, covariate_columns=(), status_true=None):
    """Read a censored sample from a CSV file with a header row.

    Parameters
    ----------
    status_true : str, optional
        Token that marks an observed event (``"yes"``, ``"dead"``, ...). Every
        other non-empty value means censored. Without it the status column
        must hold 0/1.

    Rows with an empty field in any used column are rejected and reported
    by their 1-based data-row number. A sample without events loads with a
    warning; fitting it raises later.
    """
    covariate_columns = list(covariate_columns)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [time_column, status_column, *covariate_columns]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"missing column(s) {missing} in {path}; header is {header}")
        times, status, cov, skipped = [], [], [], []
        for row_no, row in enumerate(reader, start=1):
            if any((row.get(c) is None or row[c].strip() == "") for c in needed):
                skipped.append(row_no)
                continue
            t = _parse_float(row[time_column].strip(), "time", row_no)
            if t < 0:
                raise DataValidationError(f"row {row_no}: negative time {t}")
            raw = row[status_column].strip()
            if status_true is not None:
                s = int(raw == status_true)
            else:
                s = _parse_float(raw, "status", row_no)
                if s not in (0.0, 1.0):
                    raise DataValidationError(
                        f"row {row_no}: status {raw!r} is not 0/1 (use a status_true token)"
                    )
                s = int(s)
            times.append(t)
            status.append(s)
            cov.append([_parse_float(row[c].strip(), f"covariate {c}", row_no) for c in covariate_columns])
    if skipped:
        warnings.warn(f"rejected rows with missing values: {skipped}", stacklevel=2)
    if not times:
        raise DataValidationError(f"no usable rows in {path}")
    data = CensoredDataset(
        np.array(times),
        np.array(status, dtype=int),
        np.array(cov, dtype=float).reshape(len(times), len(covariate_columns)),
        tuple(covariate_columns),
    )
    if data.events == 0:
        warnings.warn("all observations are censored; fitting will fail", stacklevel=2)
    return data


def to_csv(data, path, time_column="time", status_column="status"):
    """Write ``data`` in the layout read by :func:`load_csv`.

    Floats are written with ``repr`` so a reload is bit-identical.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([time_column, status_column, *data.names])
        for i in range(data.n):
            w.writerow([repr(float(data.time[i])), int(data.status[i]), *(repr(float(v)) for v in data.covariates[i])])
