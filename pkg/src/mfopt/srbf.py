"""Stochastic radial basis function (SRBF) surrogates.

A single-output surrogate is an ensemble of distance-power RBF fits
``g(x, tau) = sum_j w_j * ||x - c_j||^tau`` indexed by the exponent
``tau in [1, 3]``.  The ensemble mean is the prediction; the spread of
the ensemble (95% band half-width) is the prediction uncertainty.
Weights are obtained by least-squares regression on the training data,
centers by deterministic k-means, and the number of centers by
leave-one-out cross-validation.
"""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

# Leverage values this close to 1 make the closed-form LOO residual
# unusable; those folds fall back to an explicit refit.
_LOO_LEVERAGE_GUARD = 1e-8


class FitConditionWarning(UserWarning):
    """Raised when the basis matrix is rank deficient and the solution
    had to be truncated at the singular-value cutoff."""


@dataclass(frozen=True)
class SrbfConfig:
    """Knobs for SRBF fitting.

    ``fixed_taus`` and ``fixed_centers`` bypass the stratified tau grid
    and the k-means placement; they exist for diagnostics and for
    constructing exactly-representable fits in tests.
    """

    ensemble_size: int = 100
    loocv_ensemble_size: int = 5
    kmin: int = 2
    seed: int = 0
    duplicate_tol: float = 1e-12
    svd_cutoff: float = 1e-10
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-10
    tau_low: float = 1.0
    tau_high: float = 3.0
    fixed_taus: tuple[float, ...] | None = None
    fixed_centers: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if not (1 <= self.loocv_ensemble_size):
            raise ValueError("loocv_ensemble_size must be >= 1")
        if self.fixed_taus is not None:
            taus = np.asarray(self.fixed_taus, dtype=float)
            if taus.size == 0 or np.any(taus < self.tau_low) or np.any(taus > self.tau_high):
                raise ValueError("fixed_taus must be a nonempty subset of [tau_low, tau_high]")

    def fit_taus(self) -> np.ndarray:
        """Exponent samples used for the full ensemble: M stratified
        midpoints of [tau_low, tau_high]."""
        if self.fixed_taus is not None:
            return np.asarray(self.fixed_taus, dtype=float)
        m = self.ensemble_size
        width = self.tau_high - self.tau_low
        return self.tau_low + width * (np.arange(1, m + 1) - 0.5) / m

    def loocv_taus(self) -> np.ndarray:
        """Reduced exponent subset used inside LOO folds: a stratified
        subsample of the fit grid (one member per equal block)."""
        if self.fixed_taus is not None:
            return np.asarray(self.fixed_taus, dtype=float)
        full = self.fit_taus()
        m = min(self.loocv_ensemble_size, full.size)
        idx = ((2 * np.arange(m) + 1) * full.size) // (2 * m)
        return full[idx]

    def center_override(self) -> np.ndarray | None:
        if self.fixed_centers is None:
            return None
        return np.asarray(self.fixed_centers, dtype=float)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TrainingSet:
    """Design points in the unit hypercube with observed values."""

    points: np.ndarray  # (J, D)
    values: np.ndarray  # (J,)
    duplicate_tol: float = 1e-12

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).ravel()
        if pts.shape[0] != vals.shape[0]:
            raise ValueError("points and values must have the same length")
        if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
            raise ValueError("training points must lie in the unit hypercube")
        if pts.shape[0] > 1:
            dmin = pdist_min(pts)
            if dmin < self.duplicate_tol:
                raise ValueError(
                    f"duplicate training points (min pairwise distance {dmin:.3e})"
                )
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "values", _readonly(vals))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def append(self, x: np.ndarray, value: float) -> "TrainingSet":
        """New set with one more observation; only the new point is
        checked against the duplicate tolerance."""
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError("dimension mismatch")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("point outside the unit hypercube")
        if self.size and cdist(x[None, :], self.points).min() < self.duplicate_tol:
            raise ValueError("point duplicates an existing training point")
        pts = np.vstack([self.points, x[None, :]])
        vals = np.append(self.values, float(value))
        return TrainingSet(pts, vals, self.duplicate_tol)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.points.tobytes())
        h.update(self.values.tobytes())
        return f"J{self.size}-{h.hexdigest()[:16]}"


def pdist_min(points: np.ndarray) -> float:
    """Smallest pairwise Euclidean distance."""
    d = cdist(points, points)
    np.fill_diagonal(d, np.inf)
    return float(d.min())


@dataclass(frozen=True)
class Prediction:
    mean: float
    uncertainty: float  # half-width of the 95% ensemble band, >= 0


# ---------------------------------------------------------------------------
# center placement


def kmeans_centers(points: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Deterministic k-means: greedy farthest-point seeding (starting
    from the point nearest the data centroid) followed by Lloyd
    iterations.  Point order is normalized by lexicographic sort, so
    the result does not depend on input ordering.  ``seed`` is accepted
    for interface stability but no randomness is involved.
    """
    del seed
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    j = pts.shape[0]
    if not 1 <= k <= j:
        raise ValueError(f"k must be in [1, {j}], got {k}")
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    if k == j:
        # one point per cluster is the exact optimum
        return pts.copy()

    centroid = pts.mean(axis=0)
    chosen = [int(np.argmin(np.linalg.norm(pts - centroid, axis=1)))]
    dist_to_chosen = np.linalg.norm(pts - pts[chosen[0]], axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist_to_chosen))
        chosen.append(nxt)
        dist_to_chosen = np.minimum(dist_to_chosen, np.linalg.norm(pts - pts[nxt], axis=1))
    centers = pts[chosen].copy()

    inertia_prev = np.inf
    for _ in range(100):
        d2 = cdist(pts, centers, "sqeuclidean")
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(j), labels].sum())
        for c in range(k):
            mask = labels == c
            if mask.any():
                centers[c] = pts[mask].mean(axis=0)
            # empty cluster: keep the previous center
        if inertia == 0.0 or inertia_prev - inertia <= 1e-10 * inertia_prev:
            break
        inertia_prev = inertia
    return centers


# ---------------------------------------------------------------------------
# least squares


def _solve_least_squares(a: np.ndarray, s: np.ndarray, cutoff: float) -> np.ndarray:
    """Least-squares solve with a relative singular-value cutoff.

    Uses column-pivoted QR; if that reveals rank deficiency, re-solves
    with the SVD driver so the returned solution is the minimum-norm
    one, and emits :class:`FitConditionWarning`.
    """
    w, _, rank, _ = sla.lstsq(a, s, cond=cutoff, lapack_driver="gelsy", check_finite=False)
    if rank < a.shape[1]:
        w, _, rank, _ = sla.lstsq(a, s, cond=cutoff, lapack_driver="gelsd", check_finite=False)
        warnings.warn(
            f"basis matrix is rank deficient (rank {rank} < {a.shape[1]}); "
            "solution truncated at the singular-value cutoff",
            FitConditionWarning,
            stacklevel=3,
        )
    return w


def fit_weights(train: TrainingSet, centers: np.ndarray, tau: float) -> np.ndarray:
    """Least-squares weights for the basis ``||x - c_j||^tau``.

    Returns the minimum-norm solution when the basis matrix is rank
    deficient (with a :class:`FitConditionWarning`).
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] > train.size:
        raise ValueError("more centers than training points")
    a = cdist(train.points, centers) ** tau
    return _solve_least_squares(a, train.values, SrbfConfig().svd_cutoff)


# ---------------------------------------------------------------------------
# the ensemble


@dataclass(frozen=True)
class RbfEnsemble:
    """Fitted SRBF surrogate: shared centers, one weight vector per
    exponent sample.  Immutable and safe to share across threads."""

    centers: np.ndarray        # (K, D)
    tau_samples: np.ndarray    # (M,)
    weights: np.ndarray        # (M, K)
    kstar: int
    training_fingerprint: str = ""
    condition_flags: int = 0   # number of rank-deficient member solves

    def __post_init__(self):
        object.__setattr__(self, "centers", _readonly(self.centers))
        object.__setattr__(self, "tau_samples", _readonly(self.tau_samples))
        object.__setattr__(self, "weights", _readonly(self.weights))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def member_values(self, x: np.ndarray) -> np.ndarray:
        """Ensemble member evaluations, shape (n, M)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = cdist(x, self.centers)
        basis = d[:, None, :] ** self.tau_samples[None, :, None]  # (n, M, K)
        # sum over centers of weighted basis values, one column per member
        return np.einsum("nmk,mk->nm", basis, self.weights)

    def predict_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Means and 95%-band half-widths at the rows of ``x``."""
        g = self.member_values(x)
        means = g.sum(axis=1) / g.shape[1]
        g.sort(axis=1)
        lo = _percentile_sorted(g, 2.5)
        hi = _percentile_sorted(g, 97.5)
        return means, 0.5 * (hi - lo)

    def predict(self, x: np.ndarray) -> Prediction:
        means, uncs = self.predict_batch(np.asarray(x, dtype=float)[None, :])
        return Prediction(float(means[0]), float(uncs[0]))


def _percentile_sorted(g: np.ndarray, q: float) -> np.ndarray:
    """Percentile along axis 1 of an already-sorted array, linear
    interpolation between order statistics (matches numpy's default)."""
    m = g.shape[1]
    pos = (q / 100.0) * (m - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, m - 1)
    frac = pos - lo
    return g[:, lo] * (1.0 - frac) + g[:, hi] * frac


def _centers_for(train: TrainingSet, k: int, config: SrbfConfig) -> np.ndarray:
    override = config.center_override()
    if override is not None:
        if override.shape[0] != k:
            raise ValueError("fixed_centers length must equal the requested k")
        return override
    return kmeans_centers(train.points, k, config.seed)


def fit_ensemble(train: TrainingSet, k: int, config: SrbfConfig = SrbfConfig()) -> RbfEnsemble:
    """Fit the full tau ensemble with ``k`` centers."""
    if not 1 <= k <= train.size:
        raise ValueError(f"k must be in [1, {train.size}], got {k}")
    centers = _centers_for(train, k, config)
    taus = config.fit_taus()
    d = cdist(train.points, centers)
    weights = np.empty((taus.size, centers.shape[0]))
    n_flagged = 0
    for m, tau in enumerate(taus):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", FitConditionWarning)
            weights[m] = _solve_least_squares(d ** tau, train.values, config.svd_cutoff)
        n_flagged += sum(issubclass(w.category, FitConditionWarning) for w in caught)
    if n_flagged:
        warnings.warn(
            f"{n_flagged} of {taus.size} ensemble members were rank deficient",
            FitConditionWarning,
            stacklevel=2,
        )
    return RbfEnsemble(
        centers=centers,
        tau_samples=taus,
        weights=weights,
        kstar=k,
        training_fingerprint=train.fingerprint(),
        condition_flags=n_flagged,
    )


# ---------------------------------------------------------------------------
# leave-one-out cross-validation


def _loo_errors(a: np.ndarray, s: np.ndarray, cutoff: float) -> np.ndarray:
    """Leave-one-out prediction errors ``s_i - pred_i`` for the least
    squares fit with design matrix ``a``, one fold per row.

    Uses the closed-form identity e_i = r_i / (1 - h_ii) with residuals
    r and leverages h from a single factorization; folds whose leverage
    is numerically 1 are refit explicitly.
    """
    j, k = a.shape
    q, r = sla.qr(a, mode="economic", check_finite=False)
    diag = np.abs(np.diag(r))
    if diag.min() > cutoff * diag.max():
        w = sla.solve_triangular(r, q.T @ s, check_finite=False)
        leverage = np.einsum("ij,ij->i", q, q)
    else:
        u, sv, vt = np.linalg.svd(a, full_matrices=False)
        keep = sv > cutoff * sv[0]
        w = vt[keep].T @ ((u[:, keep].T @ s) / sv[keep])
        leverage = np.einsum("ij,ij->i", u[:, keep], u[:, keep])
    resid = s - a @ w
    denom = 1.0 - leverage
    errors = np.empty(j)
    ok = denom > _LOO_LEVERAGE_GUARD
    errors[ok] = resid[ok] / denom[ok]
    for i in np.flatnonzero(~ok):
        a_i = np.delete(a, i, axis=0)
        s_i = np.delete(s, i)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FitConditionWarning)
            w_i = _solve_least_squares(a_i, s_i, cutoff)
        errors[i] = s[i] - a[i] @ w_i
    return errors


def loocv_rmse(train: TrainingSet, k: int, config: SrbfConfig = SrbfConfig()) -> float:
    """Leave-one-out RMSE of the reduced-tau ensemble mean with ``k``
    centers.  Centers are placed once on the full training set and
    shared across folds."""
    if train.size < 3:
        raise ValueError("LOOCV needs at least 3 training points")
    if k > train.size - 1:
        raise ValueError("k must leave at least one point per fold (k <= J-1)")
    centers = _centers_for(train, k, config)
    taus = config.loocv_taus()
    d = cdist(train.points, centers)
    per_tau = np.empty((train.size, taus.size))
    for m, tau in enumerate(taus):
        per_tau[:, m] = _loo_errors(d ** tau, train.values, config.svd_cutoff)
    mean_err = per_tau.mean(axis=1)  # error of the ensemble-mean prediction
    return float(np.sqrt(np.mean(mean_err ** 2)))


def candidate_center_counts(size: int, prev_kstar: int | None, config: SrbfConfig) -> list[int]:
    """Admissible center counts: the full range [kmin, J-1] on a fresh
    fit, or the previous choice +-1 during active learning."""
    kmax = size - 1
    kmin = min(config.kmin, kmax)
    if prev_kstar is None:
        return list(range(kmin, kmax + 1))
    cands = [k for k in (prev_kstar - 1, prev_kstar, prev_kstar + 1) if kmin <= k <= kmax]
    if not cands:
        cands = [min(max(prev_kstar, kmin), kmax)]
    return cands


def select_num_centers(
    train: TrainingSet,
    prev_kstar: int | None = None,
    config: SrbfConfig = SrbfConfig(),
) -> int:
    """Number of centers minimizing the LOOCV RMSE (ties toward fewer
    centers, i.e. stronger smoothing)."""
    override = config.center_override()
    if override is not None:
        return override.shape[0]
    if train.size < 3:
        k = max(1, train.size - 1)
        logger.warning(
            "training set of size %d is too small for LOOCV; using k=%d", train.size, k
        )
        return k
    best_k, best_rmse = None, np.inf
    for k in candidate_center_counts(train.size, prev_kstar, config):
        rmse = loocv_rmse(train, k, config)
        if rmse < best_rmse:
            best_k, best_rmse = k, rmse
    return int(best_k)
