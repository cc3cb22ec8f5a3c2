"""Right-censored survival data: container, grouping rule, risk sets, CSV input.

A dataset is the usual triple (observed time, event indicator, covariate
row) per subject. ``build_risk_structure`` extracts the distinct event
times with their event and risk sets, plus a time-descending subject
ordering that the likelihood kernels consume directly.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateCovariateError,
    DomainError,
    ParseError,
    StructureError,
)

#: relative slack applied before the ceiling so that times already sitting
#: on a grid point (up to rounding) stay there instead of jumping a bin
_GRID_RTOL = 1e-9


class StudyDesignWarning(UserWarning):
    """Dataset violates a soft assumption (no events, or nobody censored
    at or after the last event time)."""


def _frozen(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass
class SurvivalDataset:
    """Observed times, event indicators and covariates; immutable after init.

    Parameters
    ----------
    times : array_like
        Strictly positive observed event or censoring times, length n.
    status : array_like
        Event indicators in {0, 1}; 1 means the time is an event.
    covariates : array_like
        n x d matrix of covariate values.
    """

    times: np.ndarray
    status: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        status = np.asarray(self.status)
        cov = np.asarray(self.covariates, dtype=np.float64)
        if cov.ndim == 1:
            cov = cov.reshape(-1, 1)
        if times.ndim != 1 or status.ndim != 1 or cov.ndim != 2:
            raise StructureError("times and status must be 1-d, covariates 2-d")
        n = times.size
        if n < 2 or status.size != n or cov.shape[0] != n:
            raise StructureError(
                f"inconsistent sizes: times {times.size}, status {status.size}, "
                f"covariates {cov.shape[0]} rows (need matching n >= 2)"
            )
        if cov.shape[1] < 1:
            raise StructureError("need at least one covariate column")
        if not np.all(np.isfinite(times)) or np.any(times <= 0.0):
            raise DomainError("times must be finite and strictly positive")
        if not np.all(np.isin(status, (0, 1))):
            raise DomainError("status values must be 0 or 1")
        if not np.all(np.isfinite(cov)):
            raise DomainError("covariates must be finite")
        status = status.astype(np.int8)
        if status.sum() == 0:
            warnings.warn("dataset contains no events", StudyDesignWarning, stacklevel=2)
        else:
            last_event = times[status == 1].max()
            if not np.any((status == 0) & (times >= last_event)):
                warnings.warn(
                    "no subject censored at or after the last event time",
                    StudyDesignWarning,
                    stacklevel=2,
                )
        self.times = _frozen(times)
        self.status = _frozen(status)
        self.covariates = _frozen(cov)

    @property
    def n(self):
        return self.times.size

    @property
    def n_covariates(self):
        return self.covariates.shape[1]

    def with_times(self, times):
        """Copy of the dataset with replaced observed times."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StudyDesignWarning)
            return SurvivalDataset(times, self.status, self.covariates)


@dataclass
class RiskStructure:
    """Distinct event times with their event sets and risk sets.

    ``event_sets[j]`` / ``risk_sets[j]`` hold original row indices. The
    remaining fields are a flattened view in time-descending subject order
    (``order_desc``): the risk set at event time j is the first
    ``n_at_risk[j]`` entries of that order, and
    ``event_pos_flat[event_offsets[j]:event_offsets[j+1]]`` are the
    positions of the failing subjects within it.
    """

    event_times: np.ndarray
    event_sets: list
    risk_sets: list
    d: np.ndarray
    n_at_risk: np.ndarray
    order_desc: np.ndarray = field(repr=False)
    event_pos_flat: np.ndarray = field(repr=False)
    event_offsets: np.ndarray = field(repr=False)

    @property
    def k(self):
        return self.event_times.size


def group_times(times, tau):
    """Round times up onto the grid {tau, 2*tau, ...}.

    Every output is the smallest grid point >= the input, except that an
    input already within relative tolerance of a grid point maps to that
    point rather than the next one.
    """
    if not np.isscalar(tau) or not np.isfinite(tau) or tau <= 0.0:
        raise DomainError("tau must be a positive real")
    t = np.asarray(times, dtype=np.float64)
    if np.any(t <= 0.0):
        raise DomainError("times must be strictly positive")
    return tau * np.ceil((t / tau) * (1.0 - _GRID_RTOL))


def build_risk_structure(data):
    """Event/risk sets at each distinct event time of the dataset.

    Subjects censored exactly at an event time remain in the risk set for
    that time (events take precedence in ties between events and
    censorings).
    """
    times = data.times
    status = data.status
    event_mask = status == 1
    if not event_mask.any():
        raise StructureError("cannot build a risk structure without events")
    event_times = np.unique(times[event_mask])
    k = event_times.size

    order_desc = np.argsort(-times, kind="stable")
    pos_of_row = np.empty(data.n, dtype=np.int64)
    pos_of_row[order_desc] = np.arange(data.n)

    times_asc = np.sort(times)
    n_at_risk = data.n - np.searchsorted(times_asc, event_times, side="left")

    event_sets = []
    risk_sets = []
    d = np.empty(k, dtype=np.int64)
    ev_pos_parts = []
    offsets = np.zeros(k + 1, dtype=np.int64)
    for j, t in enumerate(event_times):
        dset = np.flatnonzero((times == t) & event_mask)
        rset = np.flatnonzero(times >= t)
        event_sets.append(_frozen(dset))
        risk_sets.append(_frozen(rset))
        d[j] = dset.size
        ev_pos_parts.append(np.sort(pos_of_row[dset]))
        offsets[j + 1] = offsets[j] + dset.size

    return RiskStructure(
        event_times=_frozen(event_times),
        event_sets=event_sets,
        risk_sets=risk_sets,
        d=_frozen(d),
        n_at_risk=_frozen(n_at_risk.astype(np.int64)),
        order_desc=_frozen(order_desc),
        event_pos_flat=_frozen(np.concatenate(ev_pos_parts)),
        event_offsets=_frozen(offsets),
    )


def _is_binary(col):
    return np.all(np.isin(col, (0.0, 1.0)))


def standardize_covariates(data):
    """Scale non-binary covariate columns to mean 0, sd 1 (sd divisor n-1).

    Binary columns (distinct values within {0, 1}) pass through untouched.
    Returns the transformed dataset and a list of per-column (mean, sd)
    transform parameters, with (0, 1) recorded for untouched columns.
    """
    cov = np.array(data.covariates, copy=True)
    params = []
    for c in range(cov.shape[1]):
        col = cov[:, c]
        if _is_binary(col):
            params.append((0.0, 1.0))
            continue
        sd = float(col.std(ddof=1))
        if sd == 0.0:
            raise DegenerateCovariateError(f"covariate column {c} has zero variance")
        mean = float(col.mean())
        cov[:, c] = (col - mean) / sd
        params.append((mean, sd))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StudyDesignWarning)
        out = SurvivalDataset(data.times, data.status, cov)
    return out, params


def _read_rows(path, time_col, status_col, covariate_cols, drop_missing):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = [time_col, status_col, *covariate_cols]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ParseError(f"missing column(s) {missing} in {path}")
        times, status, rows = [], [], []
        n_dropped = 0
        for lineno, rec in enumerate(reader, start=1):
            cells = [rec.get(c) for c in wanted]
            if any(raw is None or raw.strip() == "" for raw in cells):
                if drop_missing:
                    n_dropped += 1
                    continue
                col = wanted[
                    next(i for i, raw in enumerate(cells)
                         if raw is None or raw.strip() == "")
                ]
                raise ParseError(f"row {lineno}, column {col!r}: missing value")

            def cell(col):
                raw = rec[col]
                try:
                    return float(raw)
                except ValueError:
                    raise ParseError(
                        f"row {lineno}, column {col!r}: non-numeric value {raw!r}"
                    ) from None

            t = cell(time_col)
            if t <= 0.0:
                raise ParseError(f"row {lineno}, column {time_col!r}: time must be > 0")
            s = cell(status_col)
            if s not in (0.0, 1.0):
                raise ParseError(
                    f"row {lineno}, column {status_col!r}: status must be 0 or 1, got {s:g}"
                )
            times.append(t)
            status.append(int(s))
            rows.append([cell(c) for c in covariate_cols])
    if not times:
        raise StructureError(f"{path} contains a header but no usable data rows")
    data = SurvivalDataset(np.array(times), np.array(status), np.array(rows))
    return data, n_dropped


def load_csv(path, time_col, status_col, covariate_cols):
    """Read a dataset from a UTF-8, comma-separated file with a header row.

    Missing values are not supported: every selected cell must parse as a
    number, status must be 0 or 1, and times must be positive. Errors name
    the offending row (1-based, excluding the header) and column.
    """
    return _read_rows(path, time_col, status_col, covariate_cols, False)[0]


def load_csv_dropping_missing(path, time_col, status_col, covariate_cols):
    """Like ``load_csv`` but drops rows with empty selected cells.

    Returns (dataset, number of dropped rows).
    """
    return _read_rows(path, time_col, status_col, covariate_cols, True)
