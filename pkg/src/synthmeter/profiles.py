"""Canonical load-profile containers, ingestion and household/time splits.

A profile is a fixed-length vector of half-hourly consumption (kWh): 48
slots for a day, 336 for a week. Sets of profiles are stored as an
immutable matrix plus per-row metadata so every downstream computation is
a plain numpy operation.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyResult,
    HorizonMismatch,
    MalformedRow,
    TooFewHouseholds,
)

WINTER_SPRING = "WS"
SUMMER_AUTUMN = "SA"

# December through May count as winter/spring, the rest as summer/autumn.
_WS_MONTHS = frozenset({12, 1, 2, 3, 4, 5})


class Horizon(enum.Enum):
    DAILY = 48
    WEEKLY = 336

    @property
    def length(self) -> int:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "Horizon":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown horizon {name!r}; expected daily or weekly") from None


class Role(enum.Enum):
    TRAIN = "train"
    HOLDOUT = "holdout"
    SYNTHETIC = "synthetic"
    ATTACK = "attack"


def season_label(start_date: dt.date) -> str:
    """Season of a profile's first day: WS for Dec-May, SA for Jun-Nov."""
    return WINTER_SPRING if start_date.month in _WS_MONTHS else SUMMER_AUTUMN


@dataclass(frozen=True)
class ProfileSet:
    """Immutable matrix of profiles with aligned per-row metadata.

    ``values`` has shape (n, horizon.length); rows are kWh per half-hour.
    ``labels`` holds free-form row tags ("" when absent): season labels
    WS/SA for real data, registry group tags for attack sets.
    ``artificial`` marks injected rows, which are exempt from the
    non-negativity check.
    """

    values: np.ndarray
    household_ids: tuple[str, ...]
    start_dates: tuple[dt.date, ...]
    horizon: Horizon
    role: Role
    labels: tuple[str, ...] = ()
    artificial: tuple[bool, ...] = ()

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 2 or values.shape[1] != self.horizon.length:
            raise HorizonMismatch(
                f"values shape {values.shape} does not match horizon {self.horizon.name} "
                f"(length {self.horizon.length})"
            )
        n = values.shape[0]
        labels = self.labels if self.labels else ("",) * n
        artificial = self.artificial if self.artificial else (False,) * n
        if not (len(self.household_ids) == len(self.start_dates) == len(labels) == len(artificial) == n):
            raise ValueError("metadata lengths do not match the number of profile rows")
        real = ~np.asarray(artificial, dtype=bool)
        if n and np.any(values[real] < 0):
            raise ValueError("negative kWh in non-artificial profiles")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "household_ids", tuple(self.household_ids))
        object.__setattr__(self, "start_dates", tuple(self.start_dates))
        object.__setattr__(self, "labels", tuple(labels))
        object.__setattr__(self, "artificial", tuple(artificial))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def subset(self, indices, role: Role | None = None) -> "ProfileSet":
        idx = np.asarray(indices)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        else:
            idx = idx.astype(np.int64, copy=False)
        return ProfileSet(
            values=self.values[idx],
            household_ids=tuple(self.household_ids[i] for i in idx),
            start_dates=tuple(self.start_dates[i] for i in idx),
            horizon=self.horizon,
            role=role if role is not None else self.role,
            labels=tuple(self.labels[i] for i in idx),
            artificial=tuple(self.artificial[i] for i in idx),
        )

    def with_role(self, role: Role) -> "ProfileSet":
        return ProfileSet(
            values=self.values,
            household_ids=self.household_ids,
            start_dates=self.start_dates,
            horizon=self.horizon,
            role=role,
            labels=self.labels,
            artificial=self.artificial,
        )

    def households(self) -> list[str]:
        """Distinct household ids in first-seen order."""
        return list(dict.fromkeys(self.household_ids))


def require_same_horizon(*sets: ProfileSet) -> Horizon:
    horizons = {s.horizon for s in sets}
    if len(horizons) != 1:
        raise HorizonMismatch(f"mixed horizons: {sorted(h.name for h in horizons)}")
    return next(iter(horizons))


@dataclass(frozen=True)
class SplitSpec:
    holdout_fraction: float = 0.5
    train_years: tuple[int, ...] = ()
    eval_years: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.holdout_fraction < 1.0):
            raise ValueError("holdout_fraction must be in (0, 1)")


@dataclass
class IngestResult:
    profiles: ProfileSet
    rows_read: int
    dropped_periods: int


def _parse_timestamp(raw: str, line: int) -> dt.datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1]
    try:
        ts = dt.datetime.fromisoformat(text)
    except ValueError:
        raise MalformedRow(line, f"bad timestamp {raw!r}") from None
    if ts.minute not in (0, 30) or ts.second or ts.microsecond:
        raise MalformedRow(line, f"timestamp {raw!r} not on a half-hour boundary")
    return ts


def _slot_of(ts: dt.datetime) -> int:
    return ts.hour * 2 + (1 if ts.minute == 30 else 0)


def _week_start(day: dt.date) -> dt.date:
    return day - dt.timedelta(days=day.weekday())  # weeks start on Monday


def ingest(readings_path, horizon: Horizon) -> IngestResult:
    """Build one profile per household per complete day/week from long CSV.

    Input columns: household_id, timestamp (ISO-8601, half-hour aligned),
    kwh. A period with any missing or duplicated slot is dropped and
    counted; nothing is imputed. Output rows are sorted by household id
    then start date, so the result is independent of input order.
    """
    length = horizon.length
    # periods[(household, period_start)][slot] -> kwh
    periods: dict[tuple[str, dt.date], dict[int, float]] = {}
    duplicated: set[tuple[str, dt.date]] = set()
    rows_read = 0
    with open(readings_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyResult("input file is empty")
        expected = ["household_id", "timestamp", "kwh"]
        if [c.strip() for c in header] != expected:
            raise MalformedRow(1, f"expected header {','.join(expected)}")
        for line, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise MalformedRow(line, f"expected 3 fields, got {len(row)}")
            household = row[0].strip()
            if not household:
                raise MalformedRow(line, "empty household_id")
            ts = _parse_timestamp(row[1], line)
            try:
                kwh = float(row[2])
            except ValueError:
                raise MalformedRow(line, f"bad kwh value {row[2]!r}") from None
            if not np.isfinite(kwh) or kwh < 0:
                raise MalformedRow(line, f"kwh must be finite and non-negative, got {row[2]}")
            rows_read += 1
            day = ts.date()
            if horizon is Horizon.DAILY:
                start = day
                slot = _slot_of(ts)
            else:
                start = _week_start(day)
                slot = (day - start).days * 48 + _slot_of(ts)
            key = (household, start)
            bucket = periods.setdefault(key, {})
            if slot in bucket:
                duplicated.add(key)
            bucket[slot] = kwh

    dropped = 0
    kept: list[tuple[str, dt.date, np.ndarray]] = []
    for key in sorted(periods):
        if key in duplicated or len(periods[key]) != length:
            dropped += 1
            continue
        slots = periods[key]
        kept.append((key[0], key[1], np.array([slots[i] for i in range(length)])))
    if not kept:
        raise EmptyResult("no complete period survived ingestion")

    values = np.stack([v for _, _, v in kept])
    profile_set = ProfileSet(
        values=values,
        household_ids=tuple(h for h, _, _ in kept),
        start_dates=tuple(d for _, d, _ in kept),
        horizon=horizon,
        role=Role.TRAIN,
        labels=tuple(season_label(d) for _, d, _ in kept),
    )
    return IngestResult(profiles=profile_set, rows_read=rows_read, dropped_periods=dropped)


def split_households(data: ProfileSet, spec: SplitSpec) -> tuple[ProfileSet, ProfileSet]:
    """Partition by household, never by individual profile.

    The same seed always produces the same membership. Both sides must
    end up with at least two households.
    """
    households = sorted(set(data.household_ids))
    n = len(households)
    n_holdout = int(round(spec.holdout_fraction * n))
    if n_holdout < 2 or n - n_holdout < 2:
        raise TooFewHouseholds(
            f"{n} households at fraction {spec.holdout_fraction} leaves a side below 2"
        )
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    holdout_ids = {households[i] for i in order[:n_holdout]}
    mask = np.array([hid in holdout_ids for hid in data.household_ids])
    return data.subset(~mask, role=Role.TRAIN), data.subset(mask, role=Role.HOLDOUT)


@dataclass
class TimeSplit:
    fit: ProfileSet
    evaluation: ProfileSet
    discarded: int


def split_time(data: ProfileSet, spec: SplitSpec) -> TimeSplit:
    """Partition profiles by calendar year of their start date.

    Profiles dated outside both year lists are discarded and counted.
    """
    train_years = set(spec.train_years)
    eval_years = set(spec.eval_years)
    if not train_years or not eval_years:
        raise ValueError("train_years and eval_years must both be non-empty")
    if train_years & eval_years:
        raise ValueError("train_years and eval_years overlap")
    years = np.array([d.year for d in data.start_dates])
    fit_mask = np.isin(years, sorted(train_years))
    eval_mask = np.isin(years, sorted(eval_years))
    discarded = int(len(data) - fit_mask.sum() - eval_mask.sum())
    if not fit_mask.any() or not eval_mask.any():
        raise EmptyResult("a time-split side received no profiles")
    return TimeSplit(
        fit=data.subset(fit_mask, role=Role.TRAIN),
        evaluation=data.subset(eval_mask, role=Role.HOLDOUT),
        discarded=discarded,
    )


def _slot_columns(length: int) -> list[str]:
    return [f"hh_{i:02d}" for i in range(length)]


def write_wide(profiles: ProfileSet, path) -> None:
    """Write the canonical wide profile file all tools share."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["household_id", "start_date", "label", *_slot_columns(profiles.horizon.length)])
        for i in range(len(profiles)):
            writer.writerow(
                [
                    profiles.household_ids[i],
                    profiles.start_dates[i].isoformat(),
                    profiles.labels[i],
                    *(repr(float(v)) for v in profiles.values[i]),
                ]
            )


def read_wide(
    path,
    role: Role,
    horizon: Horizon | None = None,
    artificial: bool = False,
) -> ProfileSet:
    """Read a canonical wide profile file.

    When ``horizon`` is given, files of the wrong width raise
    HorizonMismatch; otherwise the width must match one of the known
    horizons.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyResult(f"{path} is empty")
        n_slots = len(header) - 3
        if header[:3] != ["household_id", "start_date", "label"]:
            raise MalformedRow(1, "expected header household_id,start_date,label,hh_00,...")
        if horizon is not None and n_slots != horizon.length:
            raise HorizonMismatch(
                f"{path} has {n_slots} value columns, expected {horizon.length}"
            )
        if horizon is None:
            by_length = {h.length: h for h in Horizon}
            if n_slots not in by_length:
                raise HorizonMismatch(f"{path} has {n_slots} value columns; no known horizon matches")
            horizon = by_length[n_slots]
        if header[3:] != _slot_columns(horizon.length):
            raise MalformedRow(1, "slot columns must be hh_00..hh_{L-1}")

        ids: list[str] = []
        dates: list[dt.date] = []
        labels: list[str] = []
        rows: list[np.ndarray] = []
        for line, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3 + horizon.length:
                raise MalformedRow(line, f"expected {3 + horizon.length} fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[1])
            except ValueError:
                raise MalformedRow(line, f"bad start_date {row[1]!r}") from None
            try:
                values = np.array([float(v) for v in row[3:]])
            except ValueError:
                raise MalformedRow(line, "bad kWh value") from None
            if not np.all(np.isfinite(values)):
                raise MalformedRow(line, "non-finite kWh value")
            ids.append(row[0])
            dates.append(date)
            labels.append(row[2])
            rows.append(values)
    if not rows:
        raise EmptyResult(f"{path} contains no profiles")
    return ProfileSet(
        values=np.stack(rows),
        household_ids=tuple(ids),
        start_dates=tuple(dates),
        horizon=horizon,
        role=role,
        labels=tuple(labels),
        artificial=(artificial,) * len(rows),
    )
