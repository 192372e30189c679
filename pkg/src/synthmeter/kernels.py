"""Numerical primitives shared by all suites.

Everything here is a pure function over numpy arrays (or ProfileSets,
which are thin wrappers around them): exact nearest-neighbour scans,
the one-tailed KS statistic, RBF MMD, KL divergence, per-profile
autocorrelation, peak masking, per-slot statistics and 2-d PCA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInput,
    HorizonMismatch,
    InsufficientSamples,
    LagTooLarge,
    RankDeficient,
    ZeroMass,
)
from .profiles import ProfileSet

#: sentinel bandwidth: use the median pairwise distance of the pooled sample
MEDIAN_HEURISTIC = "median"


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, ProfileSet):
        return data.values
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


@dataclass
class NearestNeighborResult:
    """Per-query-row minimum Euclidean distance into the reference set."""

    nn_distance: np.ndarray
    nn_index: np.ndarray


def nearest_neighbor_distances(query, reference) -> NearestNeighborResult:
    """Exact nearest-neighbour Euclidean distances, query rows vs reference rows.

    Matches a row-by-row brute-force scan bit for bit: a fast inner-product
    pass shortlists candidates per row, then distances are recomputed with
    the plain difference formula and the first index attaining the minimum
    wins, exactly as in the naive scan.
    """
    if isinstance(query, ProfileSet) and isinstance(reference, ProfileSet):
        if query.horizon is not reference.horizon:
            raise HorizonMismatch("query and reference horizons differ")
    q = _as_matrix(query)
    r = _as_matrix(reference)
    if q.size == 0 or r.size == 0:
        raise DegenerateInput("empty input set")
    if q.shape[1] != r.shape[1]:
        raise HorizonMismatch(f"dimension mismatch: {q.shape[1]} vs {r.shape[1]}")

    q_sq = np.einsum("ij,ij->i", q, q)
    r_sq = np.einsum("ij,ij->i", r, r)
    out_d = np.empty(len(q))
    out_i = np.empty(len(q), dtype=np.int64)
    # margin bounds the rounding gap between the inner-product expansion and
    # the exact difference formula, so no true minimum escapes the shortlist
    scale = q_sq + (r_sq.max() if len(r_sq) else 0.0) + 1.0
    chunk = max(1, int(4e6) // max(1, len(r)))
    for start in range(0, len(q), chunk):
        stop = min(start + chunk, len(q))
        d2 = q_sq[start:stop, None] + r_sq[None, :] - 2.0 * (q[start:stop] @ r.T)
        np.maximum(d2, 0.0, out=d2)
        approx_min = d2.min(axis=1)
        margin = 1e-8 * scale[start:stop]
        for k in range(stop - start):
            cand = np.flatnonzero(d2[k] <= approx_min[k] + margin[k])
            exact = ((q[start + k] - r[cand]) ** 2).sum(axis=1)
            j = int(exact.argmin())
            out_i[start + k] = cand[j]
            out_d[start + k] = np.sqrt(exact[j])
    return NearestNeighborResult(nn_distance=out_d, nn_index=out_i)


@dataclass
class KsResult:
    statistic: float
    p_value: float
    m: int
    n: int


def ks_one_tailed(distances_to_train, distances_to_holdout) -> KsResult:
    """One-sided two-sample KS: D+ of (train-distance CDF - holdout-distance CDF).

    A large statistic (small p) means synthetic rows sit closer to the
    training set than to the holdout set, i.e. memorisation evidence.
    The p-value is the one-sided asymptotic exp(-2 d^2 m n / (m + n)),
    clamped to [0, 1].
    """
    a = np.asarray(distances_to_train, dtype=np.float64).ravel()
    b = np.asarray(distances_to_holdout, dtype=np.float64).ravel()
    m, n = len(a), len(b)
    if m < 5 or n < 5:
        raise InsufficientSamples(f"need at least 5 samples per side, got {m} and {n}")
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    pooled = np.concatenate([a_sorted, b_sorted])
    cdf_a = np.searchsorted(a_sorted, pooled, side="right") / m
    cdf_b = np.searchsorted(b_sorted, pooled, side="right") / n
    statistic = float(max(np.max(cdf_a - cdf_b), 0.0))
    p = float(np.exp(-2.0 * statistic * statistic * m * n / (m + n)))
    return KsResult(statistic=statistic, p_value=min(max(p, 0.0), 1.0), m=m, n=n)


@dataclass
class MmdResult:
    mmd2: float
    bandwidth: float


def median_heuristic_bandwidth(x, y) -> float:
    """Median pairwise Euclidean distance over the pooled rows (1.0 if zero)."""
    pooled = np.vstack([_as_matrix(x), _as_matrix(y)])
    n = len(pooled)
    sq = np.einsum("ij,ij->i", pooled, pooled)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pooled @ pooled.T)
    np.maximum(d2, 0.0, out=d2)
    upper = d2[np.triu_indices(n, k=1)]
    median = float(np.median(np.sqrt(upper))) if len(upper) else 0.0
    return median if median > 0.0 else 1.0


def _rbf_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    a_sq = np.einsum("ij,ij->i", a, a)
    b_sq = np.einsum("ij,ij->i", b, b)
    d2 = a_sq[:, None] + b_sq[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(d2 / (-2.0 * bandwidth * bandwidth))


def mmd2_rbf(x, y, bandwidth: float | str = MEDIAN_HEURISTIC) -> MmdResult:
    """Squared MMD between two row sets under an RBF kernel.

    k(a, b) = exp(-||a - b||^2 / (2 sigma^2)). The estimate is the full
    mean of each within-set kernel matrix minus twice the mean cross
    kernel, so identical inputs cancel exactly and rounding is the only
    source of negative values. The statistic is symmetric in x and y.
    """
    a = _as_matrix(x)
    b = _as_matrix(y)
    if len(a) < 2 or len(b) < 2:
        raise DegenerateInput(f"need at least 2 rows per set, got {len(a)} and {len(b)}")
    if a.shape[1] != b.shape[1]:
        raise HorizonMismatch(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    sigma = median_heuristic_bandwidth(a, b) if bandwidth == MEDIAN_HEURISTIC else float(bandwidth)
    if sigma <= 0:
        raise DegenerateInput("bandwidth must be positive")
    k_xx = float(_rbf_kernel(a, a, sigma).mean())
    k_yy = float(_rbf_kernel(b, b, sigma).mean())
    k_xy = float(_rbf_kernel(a, b, sigma).mean())
    return MmdResult(mmd2=k_xx + k_yy - 2.0 * k_xy, bandwidth=sigma)


def kl_divergence(p, q, smoothing: float = 0.0) -> float:
    """KL(p || q) over discrete distributions with optional additive smoothing.

    Smoothing alpha is added to both vectors before renormalising;
    0 * ln(0/q) counts as 0. With no smoothing, q_i = 0 < p_i raises
    ZeroMass.
    """
    p_arr = np.asarray(p, dtype=np.float64).ravel()
    q_arr = np.asarray(q, dtype=np.float64).ravel()
    if p_arr.shape != q_arr.shape:
        raise ValueError("p and q must have the same length")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    if np.any(p_arr < 0) or np.any(q_arr < 0):
        raise ValueError("probabilities must be non-negative")
    p_s = p_arr + smoothing
    q_s = q_arr + smoothing
    p_s = p_s / p_s.sum()
    q_s = q_s / q_s.sum()
    if abs(p_s.sum() - 1.0) > 1e-9 or abs(q_s.sum() - 1.0) > 1e-9:
        raise ValueError("inputs do not normalise to probability vectors")
    support = p_s > 0
    if np.any(support & (q_s == 0)):
        raise ZeroMass("q has zero mass on the support of p and smoothing is 0")
    return float(np.sum(p_s[support] * np.log(p_s[support] / q_s[support])))


@dataclass
class AcfResult:
    """Per-profile autocorrelations, rows aligned with ``kept_indices``."""

    coefficients: np.ndarray
    kept_indices: np.ndarray
    excluded_zero_variance: int


def acf(profiles, max_lag: int) -> AcfResult:
    """Autocorrelation rho(k) for k = 1..max_lag per profile.

    rho(k) = sum_{t<=L-k} (x_t - xbar)(x_{t+k} - xbar) / sum_t (x_t - xbar)^2,
    the standard estimator normalised by the full-series variance sum.
    Zero-variance profiles are excluded and counted.
    """
    x = _as_matrix(profiles)
    n, length = x.shape
    if not (1 <= max_lag < length):
        raise LagTooLarge(f"max_lag must be in [1, {length - 1}], got {max_lag}")
    centered = x - x.mean(axis=1, keepdims=True)
    denom = (centered * centered).sum(axis=1)
    kept = np.flatnonzero(denom > 0)
    c = centered[kept]
    coeffs = np.empty((len(kept), max_lag))
    for k in range(1, max_lag + 1):
        coeffs[:, k - 1] = (c[:, :-k] * c[:, k:]).sum(axis=1) / denom[kept]
    return AcfResult(
        coefficients=coeffs,
        kept_indices=kept,
        excluded_zero_variance=int(n - len(kept)),
    )


def top_n_peaks(values, n: int) -> np.ndarray:
    """Keep the n largest values in place, zero the rest.

    Ties at the cutoff go to the earliest slot. Kept values are copied
    bit for bit and never move. n >= len(values) returns the profile
    unchanged.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    x = np.asarray(values, dtype=np.float64).ravel()
    if n >= len(x):
        return x.copy()
    # stable order: value descending, then slot index ascending
    order = np.lexsort((np.arange(len(x)), -x))
    out = np.zeros_like(x)
    keep = order[:n]
    out[keep] = x[keep]
    return out


def peak_mask(profiles, n: int) -> np.ndarray:
    """Apply top_n_peaks to every row of a profile matrix."""
    x = _as_matrix(profiles)
    return np.stack([top_n_peaks(row, n) for row in x])


def per_slot_statistics(profiles, quantiles: list[float]) -> np.ndarray:
    """Per-half-hour mean plus requested quantiles.

    Returns a (1 + len(quantiles)) x L matrix: row 0 is the mean, row
    1 + i the i-th quantile (linear interpolation between order
    statistics).
    """
    x = _as_matrix(profiles)
    if x.shape[0] == 0:
        raise DegenerateInput("empty profile set")
    for q in quantiles:
        if not (0.0 < q < 1.0):
            raise ValueError(f"quantiles must be in (0, 1), got {q}")
    rows = [x.mean(axis=0)]
    for q in quantiles:
        rows.append(np.quantile(x, q, axis=0, method="linear"))
    return np.stack(rows)


@dataclass
class PcaProjection:
    components: np.ndarray  # (2, L)
    mean: np.ndarray
    explained_variance: np.ndarray
    projections: list[np.ndarray]  # one (n_i, 2) table per input set


def pca_project(fit_on, project: list, dims: int = 2) -> PcaProjection:
    """Fit a 2-d PCA on one set, project any number of sets with it.

    Components are the top eigenvectors of the covariance of the
    mean-centred fit set. Sign convention: the largest-magnitude loading
    of each component is positive, so output is deterministic.
    """
    x = _as_matrix(fit_on)
    if len(x) < dims + 1:
        raise DegenerateInput(f"need at least {dims + 1} rows to fit, got {len(x)}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (len(x) - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    positive = eigenvalues > max(eigenvalues[0], 0.0) * 1e-12
    if positive[:dims].sum() < dims:
        raise RankDeficient(f"covariance has fewer than {dims} positive eigenvalues")
    components = eigenvectors[:, :dims].T
    for i in range(dims):
        pivot = np.argmax(np.abs(components[i]))
        if components[i, pivot] < 0:
            components[i] = -components[i]
    projections = [(_as_matrix(s) - mean) @ components.T for s in project]
    return PcaProjection(
        components=components,
        mean=mean,
        explained_variance=eigenvalues[:dims],
        projections=projections,
    )
