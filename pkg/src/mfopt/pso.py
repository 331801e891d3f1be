"""Deterministic particle swarm optimizer.

Synchronous constriction-factor swarm with no random coefficients:
initial positions come from a Hammersley sequence, velocities start at
zero, and every update is a pure function of the swarm state.  The
objective must accept a batch of points, shape (n, D), and return one
value per row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
    53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113,
)


def unit_box(dim: int) -> tuple[tuple[float, float], ...]:
    return tuple((0.0, 1.0) for _ in range(dim))


@dataclass(frozen=True)
class PsoConfig:
    box: tuple[tuple[float, float], ...]
    n_particles: int | None = None      # default 4 * dim
    n_iterations: int = 200
    chi: float = 0.721
    c_cognitive: float = 1.655
    c_social: float = 1.655
    stall_patience: int | None = 15     # stop after this many non-improving iterations
    init_scheme: str = "hammersley-grid"

    def __post_init__(self):
        if len(self.box) < 1 or any(hi <= lo for lo, hi in self.box):
            raise ValueError("box must be a nonempty list of (lo, hi) pairs with lo < hi")
        if self.swarm_size < 2:
            raise ValueError("need at least 2 particles")
        if not 0.0 < self.chi < 1.0:
            raise ValueError("chi must be in (0, 1)")
        if self.c_cognitive <= 0 or self.c_social <= 0:
            raise ValueError("acceleration coefficients must be positive")
        if self.init_scheme != "hammersley-grid":
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def swarm_size(self) -> int:
        return self.n_particles if self.n_particles is not None else 4 * self.dim


def _radical_inverse(index: int, base: int) -> float:
    inv, digit_weight = 0.0, 1.0 / base
    while index > 0:
        inv += (index % base) * digit_weight
        index //= base
        digit_weight /= base
    return inv


def hammersley(n: int, dim: int) -> np.ndarray:
    """First ``n`` Hammersley points in [0,1]^dim.

    Convention: coordinate 0 of point i is (i + 0.5)/n; coordinate k
    (k >= 1) is the radical inverse of i + 1 in the k-th prime base.
    """
    if dim - 1 > len(_PRIMES):
        raise ValueError(f"dimension {dim} exceeds the prime table")
    pts = np.empty((n, dim))
    pts[:, 0] = (np.arange(n) + 0.5) / n
    for k in range(1, dim):
        base = _PRIMES[k - 1]
        pts[:, k] = [_radical_inverse(i + 1, base) for i in range(n)]
    return pts


def init_swarm(config: PsoConfig) -> tuple[np.ndarray, np.ndarray]:
    """Hammersley positions mapped into the box, zero velocities."""
    lo = np.array([b[0] for b in config.box])
    hi = np.array([b[1] for b in config.box])
    u = hammersley(config.swarm_size, config.dim)
    positions = lo + u * (hi - lo)
    return positions, np.zeros_like(positions)


def minimize(objective, config: PsoConfig, trace: list | None = None) -> tuple[np.ndarray, float]:
    """Minimize a batch objective over the box.

    Non-finite evaluations are treated as +inf (and counted); if every
    evaluation over the whole run is non-finite, raises ValueError.
    Returns the best position and value seen.
    """
    lo = np.array([b[0] for b in config.box])
    hi = np.array([b[1] for b in config.box])
    x, v = init_swarm(config)

    n_bad = 0

    def evaluate(pts: np.ndarray) -> np.ndarray:
        nonlocal n_bad
        f = np.asarray(objective(pts), dtype=float)
        bad = ~np.isfinite(f)
        if bad.any():
            n_bad += int(bad.sum())
            f = np.where(bad, np.inf, f)
        return f

    pbest_f = evaluate(x)
    pbest_x = x.copy()
    g = int(np.argmin(pbest_f))
    gbest_x, gbest_f = pbest_x[g].copy(), float(pbest_f[g])
    if trace is not None:
        trace.append(gbest_f)

    stall = 0
    for _ in range(config.n_iterations):
        v = config.chi * (v + config.c_cognitive * (pbest_x - x) + config.c_social * (gbest_x - x))
        x = x + v
        clipped = (x < lo) | (x > hi)
        if clipped.any():
            x = np.clip(x, lo, hi)
            v[clipped] = 0.0
        f = evaluate(x)
        improved = f < pbest_f
        pbest_x[improved] = x[improved]
        pbest_f[improved] = f[improved]
        g = int(np.argmin(pbest_f))
        if pbest_f[g] < gbest_f:
            gbest_x, gbest_f = pbest_x[g].copy(), float(pbest_f[g])
            stall = 0
        else:
            stall += 1
        if trace is not None:
            trace.append(gbest_f)
        if config.stall_patience is not None and stall >= config.stall_patience:
            break

    if not np.isfinite(gbest_f):
        raise ValueError("objective returned no finite value at any evaluated point")
    if n_bad:
        logger.warning("objective returned %d non-finite values during PSO", n_bad)
    return gbest_x, gbest_f
