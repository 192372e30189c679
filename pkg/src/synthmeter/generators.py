"""Synthetic-data sources: an external-file adapter plus two built-in
reference generators bracketing the privacy spectrum.

The memorizer regurgitates (optionally jittered) training rows, so every
attack must flag it; the mixture sampler draws from a fitted density
model, the well-behaved control. Claimed epsilon/delta values are carried
through to reports untouched; the toolkit never computes privacy budgets.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import gmm
from .profiles import Horizon, ProfileSet, Role, read_wide

EXTERNAL = "external"
MEMORIZER = "memorizer"
GMM_SAMPLER = "gmm"


@dataclass(frozen=True)
class GeneratorMetadata:
    name: str
    kind: str = EXTERNAL
    claimed_epsilon: float | None = None
    claimed_delta: float | None = None
    notes: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "claimed_epsilon": self.claimed_epsilon,
            "claimed_delta": self.claimed_delta,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class MemorizerConfig:
    jitter_sigma: float = 0.0
    seed: int = 0
    sequential: bool = False  # cycle rows in order instead of sampling

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")


def load_external(path, metadata: GeneratorMetadata, horizon: Horizon | None = None) -> ProfileSet:
    """Read an externally produced synthetic file in the canonical wide format."""
    return read_wide(path, role=Role.SYNTHETIC, horizon=horizon)


def memorizer_generate(train: ProfileSet, n: int, config: MemorizerConfig) -> ProfileSet:
    """Copy training rows (uniformly sampled, or cycled when sequential)
    plus i.i.d. per-slot Gaussian jitter, clamped at zero."""
    if len(train) == 0:
        raise ValueError("training set is empty")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(config.seed)
    if config.sequential:
        picks = np.arange(n) % len(train)
    else:
        picks = rng.integers(0, len(train), size=n)
    values = train.values[picks]
    if config.jitter_sigma > 0:
        values = values + rng.normal(0.0, config.jitter_sigma, size=values.shape)
        values = np.maximum(values, 0.0)
    else:
        values = values.copy()
    epoch = dt.date(2000, 1, 1)
    return ProfileSet(
        values=values,
        household_ids=tuple(f"memorizer_{i:06d}" for i in range(n)),
        start_dates=(epoch,) * n,
        horizon=train.horizon,
        role=Role.SYNTHETIC,
    )


def gmm_generate(train: ProfileSet, n: int, config: gmm.FitConfig) -> ProfileSet:
    """Fit a diagonal mixture on the training set, then sample n rows."""
    model = gmm.fit(train, config)
    return gmm.sample(model, n, seed=config.seed, horizon=train.horizon).profiles
