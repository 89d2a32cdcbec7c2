"""Daily ``date,value`` series such as infection counts or doses administered."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vaxctl.errors import InvalidParameterError, ScenarioParseError


@dataclass(frozen=True, eq=False)
class DailySeries:
    """Nonnegative values on contiguous calendar days starting at ``start``."""

    start: dt.date
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidParameterError("a daily series needs at least one value")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidParameterError("daily series values must be finite and >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=len(self) - 1)

    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(len(self))]

    def starting(self, date: dt.date | str) -> "DailySeries":
        """Drop the days before ``date``."""
        if isinstance(date, str):
            date = dt.date.fromisoformat(date)
        skip = (date - self.start).days
        if skip < 0 or skip >= len(self):
            raise InvalidParameterError(f"start date {date} outside series {self.start}..{self.end}")
        return DailySeries(date, self.values[skip:])

    def value_at(self, t: float) -> float:
        """Value in force ``t`` days after the start (piecewise constant per day).

        A node sitting exactly on a day boundary is shared by the two days it
        separates and takes the smaller value, so that a trapezoid over the
        node values never exceeds the day-by-day total.
        """
        n = len(self)
        r = round(t)
        if abs(t - r) <= 1e-9:
            day = int(r)
            if day < 0 or day > n:
                raise InvalidParameterError(f"t={t} outside the series span of {n} days")
            if day == 0:
                return float(self.values[0])
            if day == n:
                return float(self.values[n - 1])
            return float(min(self.values[day - 1], self.values[day]))
        day = math.floor(t)
        if day < 0 or day >= n:
            raise InvalidParameterError(f"t={t} outside the series span of {n} days")
        return float(self.values[day])

    def total(self, n_days: int | None = None) -> float:
        vals = self.values if n_days is None else self.values[:n_days]
        return float(vals.sum())


def parse_timeseries(text: str, source: str = "<string>") -> DailySeries:
    """Parse ``date,value`` CSV text; LF or CRLF line endings."""
    reader = csv.reader(io.StringIO(text.lstrip("\ufeff"), newline=""))
    rows = [(n, row) for n, row in enumerate(reader, start=1) if row and any(c.strip() for c in row)]
    if not rows:
        raise ScenarioParseError(f"{source}: empty file")
    header = [c.strip().lower() for c in rows[0][1]]
    if header != ["date", "value"]:
        raise ScenarioParseError(f"{source}:1: expected header 'date,value', got {','.join(rows[0][1])!r}")
    dates, values = [], []
    for line, row in rows[1:]:
        if len(row) != 2:
            raise ScenarioParseError(f"{source}:{line}: expected 2 fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise ScenarioParseError(f"{source}:{line}: bad date {row[0]!r}") from None
        try:
            value = float(row[1])
        except ValueError:
            raise ScenarioParseError(f"{source}:{line}: bad value {row[1]!r}") from None
        if not math.isfinite(value) or value < 0:
            raise ScenarioParseError(f"{source}:{line}: value must be finite and >= 0, got {row[1].strip()}")
        if dates:
            step = (day - dates[-1]).days
            if step == 0:
                raise ScenarioParseError(f"{source}:{line}: duplicate date {day}")
            if step < 0:
                raise ScenarioParseError(f"{source}:{line}: date {day} out of order")
            if step > 1:
                missing = dates[-1] + dt.timedelta(days=1)
                raise ScenarioParseError(f"{source}:{line}: gap in series, missing {missing}")
        dates.append(day)
        values.append(value)
    if not dates:
        raise ScenarioParseError(f"{source}: no data rows")
    return DailySeries(dates[0], np.array(values))


def load_timeseries(path: str | Path, start: dt.date | str | None = None) -> DailySeries:
    """Load a daily series, optionally dropping days before ``start``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc.strerror or exc}") from exc
    series = parse_timeseries(text, str(path))
    if start is not None:
        series = series.starting(start)
    return series
