"""Seeded demo population used for end-to-end runs and controls.

Profiles mimic domestic half-hourly consumption: a base load, a morning
and an evening peak with household-specific magnitudes and timing, a
seasonal multiplier and multiplicative noise. Nothing here is calibrated
to any real dataset; the point is realistic structure (non-negative,
spiky, autocorrelated, seasonal) at a chosen scale.
"""

from __future__ import annotations

import csv
import datetime as dt

import numpy as np

from .profiles import Horizon, ProfileSet, Role, season_label

_SLOTS = np.arange(48)


def _uniform_about(rng: np.random.Generator, lo: float, hi: float, spread: float) -> float:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) * spread
    return rng.uniform(mid - half, mid + half)


def _household_archetype(rng: np.random.Generator, spread: float = 1.0) -> dict:
    """Household parameters; ``spread`` in [0, 1] scales how much households
    differ from each other (1.0 = fully diverse, 0 = identical)."""
    slot_span = max(1, round(3 * spread))
    return {
        "base": _uniform_about(rng, 0.04, 0.12, spread),  # kWh per half-hour standby
        "morning_peak": _uniform_about(rng, 0.2, 0.8, spread),
        "morning_slot": int(rng.integers(16 - slot_span, 16 + slot_span)),  # around 08:00
        "evening_peak": _uniform_about(rng, 0.4, 1.6, spread),
        "evening_slot": int(rng.integers(38 - slot_span, 38 + slot_span)),  # around 19:00
        "width": _uniform_about(rng, 1.5, 3.5, spread),
        "winter_factor": _uniform_about(rng, 1.1, 1.6, spread),
    }


def _day_profile(arch: dict, month: int, rng: np.random.Generator) -> np.ndarray:
    morning = arch["morning_peak"] * np.exp(-0.5 * ((_SLOTS - arch["morning_slot"]) / arch["width"]) ** 2)
    evening = arch["evening_peak"] * np.exp(-0.5 * ((_SLOTS - arch["evening_slot"]) / arch["width"]) ** 2)
    seasonal = arch["winter_factor"] if month in (12, 1, 2, 3, 4, 5) else 1.0
    shape = (arch["base"] + morning + evening) * seasonal
    noise = rng.lognormal(mean=0.0, sigma=0.18, size=48)
    return np.maximum(shape * noise, 0.0)


def make_population(
    n_households: int,
    days_per_household: int,
    seed: int = 0,
    start: dt.date = dt.date(2012, 1, 1),
    day_step: int = 7,
    spread: float = 1.0,
) -> ProfileSet:
    """Daily ProfileSet with per-household archetypes and seasonal labels.

    Days are spaced ``day_step`` apart per household so a modest count of
    profiles spans both season halves. ``spread`` controls household
    diversity: 1.0 gives the full archetype range, small values an almost
    interchangeable population.
    """
    rng = np.random.default_rng(seed)
    values, ids, dates = [], [], []
    for h in range(n_households):
        arch = _household_archetype(rng, spread=spread)
        hid = f"H{h:05d}"
        for d in range(days_per_household):
            day = start + dt.timedelta(days=d * day_step)
            values.append(_day_profile(arch, day.month, rng))
            ids.append(hid)
            dates.append(day)
    profile_set = ProfileSet(
        values=np.stack(values),
        household_ids=tuple(ids),
        start_dates=tuple(dates),
        horizon=Horizon.DAILY,
        role=Role.TRAIN,
        labels=tuple(season_label(d) for d in dates),
    )
    return profile_set


def write_long_csv(profiles: ProfileSet, path) -> int:
    """Write a daily ProfileSet as the long reading format; returns row count."""
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["household_id", "timestamp", "kwh"])
        for i in range(len(profiles)):
            day = profiles.start_dates[i]
            for slot in range(profiles.horizon.length):
                ts = dt.datetime.combine(day, dt.time(0, 0)) + dt.timedelta(minutes=30 * slot)
                writer.writerow(
                    [profiles.household_ids[i], ts.isoformat(), repr(float(profiles.values[i, slot]))]
                )
                rows += 1
    return rows
