"""The four privacy-attack protocols.

* Distance-based reconstruction: one-tailed KS on nearest-neighbour
  distances of sampled synthetic rows to train vs holdout. p >= 0.05
  means no memorisation evidence.
* Outlier-poisoned reconstruction: per injected outlier, nearest
  synthetic distance divided by the outlier's norm; the CDF of these
  scale-free ratios over a threshold grid is the attack curve.
* Plain membership inference: a discriminator trained synthetic-vs-
  holdout, precision at threshold 0.5 on a balanced train/holdout
  attack set; 0.5 is a random guess.
* Outlier-poisoned membership inference: the same discriminator scored
  on the 300-row registry, top third by score predicted positive, so
  precision equals recall.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, nnet
from .errors import InsufficientSamples
from .poisoning import OutlierRegistry
from .profiles import ProfileSet, require_same_horizon

DEFAULT_DISCRIMINATOR_HIDDEN = (64, 32)


def default_threshold_ratios() -> tuple[float, ...]:
    # 0.05 .. 1.00 step 0.05; the 0.3 policy ratio is on the grid
    return tuple(round(0.05 * i, 2) for i in range(1, 21))


@dataclass(frozen=True)
class ReconstructionConfig:
    threshold_ratios: tuple[float, ...] = field(default_factory=default_threshold_ratios)
    synthetic_sample_size: int | None = None  # None: min(len(synthetic), 2000)
    seed: int = 0

    def __post_init__(self):
        ratios = tuple(sorted(set(float(r) for r in self.threshold_ratios)))
        if not ratios:
            raise ValueError("at least one threshold ratio is required")
        if ratios[0] <= 0.0 or ratios[-1] > 1.0:
            raise ValueError("threshold ratios must lie in (0, 1]")
        object.__setattr__(self, "threshold_ratios", ratios)


@dataclass
class ReconstructionResult:
    fraction_reconstructed: dict[float, float]
    per_outlier_nn_distance_ratio: np.ndarray
    ks: kernels.KsResult | None = None

    def as_dict(self) -> dict:
        return {
            "fraction_reconstructed": {repr(r): v for r, v in self.fraction_reconstructed.items()},
            "per_outlier_nn_distance_ratio": [float(v) for v in self.per_outlier_nn_distance_ratio],
            "ks": None
            if self.ks is None
            else {
                "statistic": self.ks.statistic,
                "p_value": self.ks.p_value,
                "m": self.ks.m,
                "n": self.ks.n,
            },
        }


@dataclass
class MiaResult:
    precision: float
    attack_set_size: int
    positive_fraction: float
    discriminator_train_loss_trace: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "attack_set_size": self.attack_set_size,
            "positive_fraction": self.positive_fraction,
            "discriminator_train_loss_trace": self.discriminator_train_loss_trace,
        }


def _sample_rows(profile_set: ProfileSet, size: int, rng: np.random.Generator) -> ProfileSet:
    if size >= len(profile_set):
        return profile_set
    picks = rng.choice(len(profile_set), size=size, replace=False)
    return profile_set.subset(np.sort(picks))


def reconstruction_ks(
    train: ProfileSet,
    holdout: ProfileSet,
    synthetic: ProfileSet,
    sample_size: int | None = None,
    seed: int = 0,
) -> kernels.KsResult:
    """Distance-based reconstruction test.

    Samples synthetic rows without replacement, computes their nearest
    distances into train and holdout, and returns the one-tailed KS
    result. A small p-value indicates synthetic rows sit suspiciously
    close to the training set.
    """
    require_same_horizon(train, holdout, synthetic)
    if sample_size is None:
        sample_size = min(len(synthetic), 2000)
    if sample_size < 5:
        raise InsufficientSamples("need at least 5 sampled synthetic rows")
    sample = _sample_rows(synthetic, sample_size, np.random.default_rng(seed))
    d_train = kernels.nearest_neighbor_distances(sample, train).nn_distance
    d_holdout = kernels.nearest_neighbor_distances(sample, holdout).nn_distance
    return kernels.ks_one_tailed(d_train, d_holdout)


def reconstruction_poisoned(
    registry: OutlierRegistry,
    synthetic: ProfileSet,
    config: ReconstructionConfig | None = None,
) -> ReconstructionResult:
    """Outlier-poisoned reconstruction attack.

    An outlier counts as reconstructed at ratio r when its nearest
    synthetic row lies within r times the outlier's own Euclidean norm.
    The reported curve is non-decreasing in r by construction and
    invariant to jointly rescaling synthetic rows and outliers.
    """
    if config is None:
        config = ReconstructionConfig()
    outliers = registry.seen_outliers
    if len(outliers) == 0 or len(synthetic) == 0:
        raise InsufficientSamples("registry outliers and synthetic set must be non-empty")
    require_same_horizon(outliers, synthetic)
    sample_size = config.synthetic_sample_size
    if sample_size is None:
        sample_size = min(len(synthetic), 2000)
    sample = _sample_rows(synthetic, sample_size, np.random.default_rng(config.seed))
    nn = kernels.nearest_neighbor_distances(outliers, sample)
    norms = np.linalg.norm(outliers.values, axis=1)
    ratios = nn.nn_distance / norms
    fractions = {r: float((ratios <= r).mean()) for r in config.threshold_ratios}
    return ReconstructionResult(
        fraction_reconstructed=fractions,
        per_outlier_nn_distance_ratio=ratios,
    )


def _train_discriminator(
    positives: np.ndarray,
    negatives: np.ndarray,
    seed: int,
    config: nnet.TrainConfig | None = None,
) -> nnet.TrainResult:
    """Synthetic-vs-real discriminator. Sides are balanced by seeded
    down-sampling of the larger one so 0.5 stays the uninformative prior."""
    rng = np.random.default_rng(seed)
    size = min(len(positives), len(negatives))
    if len(positives) > size:
        positives = positives[np.sort(rng.choice(len(positives), size=size, replace=False))]
    if len(negatives) > size:
        negatives = negatives[np.sort(rng.choice(len(negatives), size=size, replace=False))]
    x = np.vstack([positives, negatives])
    y = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    width = x.shape[1]
    model = nnet.init_model([width, *DEFAULT_DISCRIMINATOR_HIDDEN, 1], head=nnet.SIGMOID, seed=seed)
    if config is None:
        config = nnet.TrainConfig(loss=nnet.BCE, seed=seed)
    if config.batch_size > len(x):
        config = replace(config, batch_size=len(x))
    return nnet.train(model, x, y, config)


def mia_plain(
    train: ProfileSet,
    holdout: ProfileSet,
    synthetic: ProfileSet,
    seed: int = 0,
    train_config: nnet.TrainConfig | None = None,
) -> MiaResult:
    """Plain membership inference.

    The holdout set is split 50/50 into a discriminator-training half
    and an attack half. The discriminator learns synthetic (True) vs
    holdout half 1 (False); the attack set is train (True) vs holdout
    half 2 (False), balanced by down-sampling. Precision is evaluated at
    probability threshold 0.5; with no positive predictions the result
    is the random-guess value 0.5.
    """
    require_same_horizon(train, holdout, synthetic)
    if len(holdout) < 4:
        raise InsufficientSamples("holdout must have at least 4 rows to split")
    if len(train) == 0 or len(synthetic) == 0:
        raise InsufficientSamples("train and synthetic sets must be non-empty")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(holdout))
    half = len(holdout) // 2
    disc_half = holdout.values[np.sort(order[:half])]
    attack_half = holdout.values[np.sort(order[half:])]

    trained = _train_discriminator(synthetic.values, disc_half, seed=seed, config=train_config)

    size = min(len(train), len(attack_half))
    train_rows = train.values
    if len(train_rows) > size:
        train_rows = train_rows[np.sort(rng.choice(len(train_rows), size=size, replace=False))]
    neg_rows = attack_half
    if len(neg_rows) > size:
        neg_rows = neg_rows[np.sort(rng.choice(len(neg_rows), size=size, replace=False))]
    attack_x = np.vstack([train_rows, neg_rows])
    truth = np.concatenate([np.ones(len(train_rows), dtype=bool), np.zeros(len(neg_rows), dtype=bool)])

    probs = np.atleast_1d(nnet.forward(trained.model, attack_x))
    precision = threshold_precision(probs, truth)
    return MiaResult(
        precision=precision,
        attack_set_size=len(attack_x),
        positive_fraction=0.5,
        discriminator_train_loss_trace=trained.loss_trace,
    )


def threshold_precision(probs: np.ndarray, truth: np.ndarray, threshold: float = 0.5) -> float:
    """Precision of predictions strictly above the threshold.

    With no positive predictions (e.g. a discriminator stuck at the
    threshold) the precision is undefined; the random-guess value 0.5
    is reported by convention.
    """
    probs = np.asarray(probs, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    predicted = probs > threshold
    if predicted.sum() == 0:
        return 0.5
    return float(truth[predicted].mean())


def top_fraction_precision(
    scores: np.ndarray, truth: np.ndarray, positive_fraction: float = 1.0 / 3.0
) -> float:
    """Precision when the top ceil(fraction * n) scores are predicted positive.

    Ordering is by descending score with exact ties resolved by input
    order. When the predicted-positive count equals the number of true
    positives, precision equals recall by construction.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    n = len(scores)
    if n == 0 or len(truth) != n:
        raise ValueError("scores and truth must be equal-length and non-empty")
    n_pos = int(np.ceil(positive_fraction * n))
    order = np.lexsort((np.arange(n), -scores))
    picked = order[:n_pos]
    return float(truth[picked].sum() / n_pos)


def mia_poisoned(
    registry: OutlierRegistry,
    synthetic: ProfileSet,
    holdout: ProfileSet,
    seed: int = 0,
    train_config: nnet.TrainConfig | None = None,
) -> MiaResult:
    """Outlier-poisoned membership inference.

    The discriminator learns synthetic (True) vs holdout (False) and
    scores the registry's rows (seen, unseen-same, unseen-different, in
    that fixed order). The top third by score is predicted positive.
    Scores are ranked on the discriminator's logits: sigmoid is strictly
    monotone, so this is the probability ordering without the float
    saturation that collapses confident predictions into ties.
    """
    attack, truth = registry.attack_set()
    require_same_horizon(attack, synthetic, holdout)
    if len(holdout) == 0 or len(synthetic) == 0:
        raise InsufficientSamples("holdout and synthetic sets must be non-empty")
    trained = _train_discriminator(synthetic.values, holdout.values, seed=seed, config=train_config)
    scores = np.atleast_1d(nnet.logits(trained.model, attack.values))
    precision = top_fraction_precision(scores, truth, positive_fraction=1.0 / 3.0)
    return MiaResult(
        precision=precision,
        attack_set_size=len(attack),
        positive_fraction=1.0 / 3.0,
        discriminator_train_loss_trace=trained.loss_trace,
    )
