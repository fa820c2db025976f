"""Time-series ingestion and rolling train/test window management.

CSV files carry a header row with a timestamp column (ISO-8601 by default,
configurable strptime format) and a decimal value column. Loading
validates monotone timestamps and a fixed sampling interval; gaps are
either rejected (default) or linearly imputed and flagged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from wiae.errors import ValidationError


@dataclass(frozen=True)
class CsvSchema:
    timestamp_col: str = "timestamp"
    value_col: str = "value"
    timestamp_format: str | None = None  # None: ISO-8601
    gap_policy: str = "reject"           # "reject" | "linear-impute"

    def __post_init__(self):
        if self.gap_policy not in ("reject", "linear-impute"):
            raise ValidationError(f"unknown gap policy {self.gap_policy!r}")

    def parse_ts(self, text, line_no):
        try:
            if self.timestamp_format is None:
                return datetime.fromisoformat(text)
            return datetime.strptime(text, self.timestamp_format)
        except ValueError as err:
            raise ValidationError(f"line {line_no}: unparseable timestamp {text!r}: {err}")


@dataclass
class SeriesFrame:
    """Validated series: strictly increasing timestamps, fixed interval."""

    timestamps: list
    values: np.ndarray
    source: str = ""
    interval: timedelta | None = None
    imputed: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.imputed is None:
            self.imputed = np.zeros(self.values.size, dtype=bool)
        if len(self.timestamps) != self.values.size:
            raise ValidationError("timestamps and values must align")

    def __len__(self):
        return self.values.size

    def slice(self, start, stop):
        return SeriesFrame(
            timestamps=self.timestamps[start:stop],
            values=self.values[start:stop].copy(),
            source=self.source,
            interval=self.interval,
            imputed=self.imputed[start:stop].copy(),
        )


def load_csv(path, schema: CsvSchema | None = None) -> SeriesFrame:
    """Parse and validate a series CSV; malformed rows name their line."""
    schema = schema or CsvSchema()
    timestamps, values = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty file")
        for col in (schema.timestamp_col, schema.value_col):
            if col not in reader.fieldnames:
                raise ValidationError(f"{path}: missing column {col!r}")
        for line_no, row in enumerate(reader, start=2):
            ts = schema.parse_ts(row[schema.timestamp_col], line_no)
            try:
                val = float(row[schema.value_col])
            except (TypeError, ValueError):
                raise ValidationError(
                    f"line {line_no}: unparseable value {row[schema.value_col]!r}"
                )
            if not np.isfinite(val):
                raise ValidationError(f"line {line_no}: non-finite value")
            if timestamps and ts == timestamps[-1]:
                raise ValidationError(f"line {line_no}: duplicated timestamp {ts.isoformat()}")
            if timestamps and ts < timestamps[-1]:
                raise ValidationError(f"line {line_no}: non-monotone timestamp {ts.isoformat()}")
            timestamps.append(ts)
            values.append(val)
    if not timestamps:
        raise ValidationError(f"{path}: no data rows")
    return _assemble(timestamps, values, schema, str(path))


def _assemble(timestamps, values, schema, source):
    if len(timestamps) == 1:
        return SeriesFrame(timestamps=timestamps, values=np.array(values), source=source)
    interval = timestamps[1] - timestamps[0]
    if interval <= timedelta(0):
        raise ValidationError("sampling interval must be positive")
    out_ts, out_vals, out_flag = [timestamps[0]], [values[0]], [False]
    for i in range(1, len(timestamps)):
        gap = timestamps[i] - timestamps[i - 1]
        steps = gap / interval
        n_steps = round(steps)
        if abs(steps - n_steps) > 1e-9 or n_steps < 1:
            raise ValidationError(
                f"line {i + 2}: timestamp off the sampling grid (gap {gap}, interval {interval})"
            )
        if n_steps > 1:
            if schema.gap_policy == "reject":
                raise ValidationError(
                    f"line {i + 2}: gap of {n_steps - 1} missing samples before "
                    f"{timestamps[i].isoformat()} (gap policy: reject)"
                )
            for j in range(1, n_steps):
                frac = j / n_steps
                out_ts.append(timestamps[i - 1] + j * interval)
                out_vals.append(values[i - 1] + (values[i] - values[i - 1]) * frac)
                out_flag.append(True)
        out_ts.append(timestamps[i])
        out_vals.append(values[i])
        out_flag.append(False)
    return SeriesFrame(
        timestamps=out_ts,
        values=np.array(out_vals),
        source=source,
        interval=interval,
        imputed=np.array(out_flag, dtype=bool),
    )


def save_csv(frame: SeriesFrame, path, schema: CsvSchema | None = None):
    """Write a frame back to CSV; load(save(frame)) is value-identical."""
    schema = schema or CsvSchema()
    with open(path, "w", newline="") as fh:
        fh.write(f"{schema.timestamp_col},{schema.value_col}\n")
        for ts, val in zip(frame.timestamps, frame.values):
            text = ts.isoformat() if schema.timestamp_format is None else ts.strftime(
                schema.timestamp_format
            )
            fh.write(f"{text},{float(val)!r}\n")


@dataclass(frozen=True)
class RollingSchedule:
    """Rolling retraining protocol in sample counts."""

    train_len: int
    period: int          # retrain every this many samples; also the test span
    horizon: int
    eval_span: int | None = None  # cap on scored targets per split

    def __post_init__(self):
        if self.train_len < 1 or self.period < 1 or self.horizon < 1:
            raise ValidationError("schedule lengths must be positive")
        if self.period > self.train_len:
            raise ValidationError("retrain period cannot exceed the training window")
        if self.train_len <= self.horizon:
            raise ValidationError("training window must exceed the forecast horizon")

    def validate_for_model(self, k):
        if self.train_len <= k + self.horizon:
            raise ValidationError(
                f"training window {self.train_len} must exceed k + horizon = {k + self.horizon}"
            )


def rolling_splits(frame, schedule: RollingSchedule):
    """Consecutive (train, test) index slices.

    Split i trains on [i * period, i * period + train_len) and tests on the
    immediately following ``period`` samples; test slices abut and never
    overlap their own training window.
    """
    n = len(frame)
    n_splits = (n - schedule.train_len) // schedule.period
    if n_splits < 1:
        raise ValidationError(
            f"insufficient data: {n} samples cannot fit one "
            f"{schedule.train_len}+{schedule.period} split"
        )
    splits = []
    for i in range(n_splits):
        start = i * schedule.period
        train = slice(start, start + schedule.train_len)
        test = slice(train.stop, train.stop + schedule.period)
        splits.append((train, test))
    return splits
