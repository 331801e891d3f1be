"""Analytical multi-fidelity benchmark problems with synthetic noise.

Four problem families (Forrester, Griewank, Rosenbrock, and a
shifted-rotated Rastrigin), each available at up to three or four
fidelity levels whose noiseless responses deliberately disagree.
Evaluations add zero-mean Gaussian noise whose standard deviation
scales with the range of the noiseless high-fidelity response; draws
come from a counter-based generator keyed by (campaign seed, level,
evaluation index) so every observation is reproducible and independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import qmc


class EvaluationError(RuntimeError):
    """An objective evaluation failed; carries the fidelity level."""

    def __init__(self, level: int, message: str):
        super().__init__(f"evaluation failed at level {level}: {message}")
        self.level = level


# noise scale factors for the table functions f1, f2, f3 (fractions of
# the high-fidelity range); the range of the Rosenbrock problem is
# additionally shrunk because it spans three orders of magnitude
_NOISE_FACTORS = (0.025, 0.05, 0.10)
_P3_RANGE_DIVISOR = 500.0

# which table functions serve as the levels for a given level count:
# one level -> f1; two -> highest and lowest (f1, f3); three -> all
_LEVEL_SUBSETS = {1: (0,), 2: (0, 2), 3: (0, 1, 2), 4: (0, 1, 2, 3)}


def default_costs(n_levels: int) -> tuple[float, ...]:
    """Synthetic cost ratios for the analytical campaigns."""
    table = {1: (1.0,), 2: (1.0, 0.1), 3: (1.0, 0.2, 0.1)}
    if n_levels not in table:
        raise ValueError(
            f"no default cost ratios for {n_levels} levels; pass beta explicitly"
        )
    return table[n_levels]


def initial_design(dim: int) -> np.ndarray:
    """Center plus face centers of the unit hypercube (2D+1 points,
    center first, then low/high faces in dimension order)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    pts = [np.full(dim, 0.5)]
    for d in range(dim):
        for val in (0.0, 1.0):
            p = np.full(dim, 0.5)
            p[d] = val
            pts.append(p)
    return np.array(pts)


def rotation_matrix(dim: int, theta: float = 0.2) -> np.ndarray:
    """Orthogonal matrix composed of plane rotations by ``theta`` in the
    coordinate planes (1,2), (2,3), ..., (D-1,D), applied in that order."""
    r = np.eye(dim)
    for d in range(dim - 1):
        g = np.eye(dim)
        c, s = np.cos(theta), np.sin(theta)
        g[d, d] = c
        g[d, d + 1] = -s
        g[d + 1, d] = s
        g[d + 1, d + 1] = c
        r = g @ r
    return r


# ---------------------------------------------------------------------------
# noiseless level functions (vectorized over rows, physical coordinates)


def _p1_functions():
    def f1(x):
        x = np.atleast_2d(x)[:, 0]
        return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)

    def f2(x):
        u = np.atleast_2d(x)[:, 0]
        return 0.75 * f1(x) + 5.0 * (u - 0.5) - 2.0

    def f3(x):
        u = np.atleast_2d(x)[:, 0]
        return 0.5 * f1(x) + 10.0 * (u - 0.5) - 5.0

    return [f1, f2, f3]


def _p2_functions(dim: int):
    j = np.arange(1, dim + 1)

    def f1(x):
        x = np.atleast_2d(x)
        return (x ** 2).sum(axis=1) / 25.0 - np.cos(x / np.sqrt(j)).prod(axis=1) + 1.0

    def f2(x):
        x = np.atleast_2d(x)
        return -np.cos(x / np.sqrt(j)).prod(axis=1) + 1.0

    def f3(x):
        x = np.atleast_2d(x)
        return (x ** 2).sum(axis=1) / 20.0 - np.cos(x / np.sqrt(j + 1)).prod(axis=1) - 1.0

    return [f1, f2, f3]


def _p3_functions(dim: int):
    def f1(x):
        x = np.atleast_2d(x)
        a, b = x[:, :-1], x[:, 1:]
        return (100.0 * (b - a ** 2) ** 2 + (1.0 - a) ** 2).sum(axis=1)

    def f2(x):
        x = np.atleast_2d(x)
        a, b = x[:, :-1], x[:, 1:]
        core = (50.0 * (b - a ** 2) ** 2 + (-2.0 - a) ** 2).sum(axis=1)
        return core - 0.5 * x.sum(axis=1)

    def f3(x):
        x = np.atleast_2d(x)
        return (f1(x) - 4.0 - 0.5 * x.sum(axis=1)) / (10.0 + 0.25 * x.sum(axis=1))

    return [f1, f2, f3]


def _p4_functions(dim: int, theta: float = 0.2, phis=(10000.0, 5000.0, 2500.0)):
    rot = rotation_matrix(dim, theta)
    x_opt = np.full(dim, 0.1)

    def z_of(x):
        return (np.atleast_2d(x) - x_opt) @ rot.T

    def f1(x):
        z = z_of(x)
        return (z ** 2 + 1.0 - np.cos(10.0 * np.pi * z)).sum(axis=1)

    def make_low(phi):
        th = 1.0 - 0.0001 * phi
        a, omega, b = th, 10.0 * np.pi * th, 0.5 * np.pi * th

        def f(x):
            z = z_of(x)
            err = (a * np.cos(omega * z + b + np.pi) ** 2).sum(axis=1)
            return f1(x) + err

        return f

    return [f1] + [make_low(phi) for phi in phis]


@dataclass(frozen=True)
class ProblemInfo:
    builder: object
    bounds_of: object           # dim -> (D, 2) array
    supported_dims: tuple[int, ...]
    max_levels: int
    x_check_physical: object    # dim -> (D,) array
    range_divisor: float = 1.0


def _const_bounds(lo, hi):
    return lambda dim: np.array([[lo, hi]] * dim, dtype=float)


PROBLEMS: dict[str, ProblemInfo] = {
    "P1": ProblemInfo(
        builder=lambda dim: _p1_functions(),
        bounds_of=_const_bounds(0.0, 1.0),
        supported_dims=(1,),
        max_levels=3,
        x_check_physical=lambda dim: np.array([0.7572]),
    ),
    "P2": ProblemInfo(
        builder=lambda dim: _p2_functions(dim),
        bounds_of=_const_bounds(-6.0, 5.0),
        supported_dims=(2,),
        max_levels=3,
        x_check_physical=lambda dim: np.zeros(dim),
    ),
    "P3": ProblemInfo(
        builder=lambda dim: _p3_functions(dim),
        bounds_of=_const_bounds(-2.0, 2.0),
        supported_dims=(2, 5, 10),
        max_levels=3,
        x_check_physical=lambda dim: np.ones(dim),
        range_divisor=_P3_RANGE_DIVISOR,
    ),
    "P4": ProblemInfo(
        builder=lambda dim: _p4_functions(dim),
        bounds_of=_const_bounds(-0.1, 0.2),
        supported_dims=(2, 5, 10),
        max_levels=4,
        x_check_physical=lambda dim: np.full(dim, 0.1),
    ),
}


def scan_function_range(func, bounds: np.ndarray) -> float:
    """Range (max - min) over a dense deterministic sample of the box:
    1001 equispaced points in 1-D, an unscrambled 2^16-point Sobol
    sample otherwise."""
    dim = bounds.shape[0]
    if dim == 1:
        u = np.linspace(0.0, 1.0, 1001)[:, None]
    else:
        u = qmc.Sobol(d=dim, scramble=False).random_base2(16)
    x = bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])
    vals = func(x)
    return float(vals.max() - vals.min())


class FidelityStack:
    """An N-level noisy objective over a rectangular domain.

    Level 1 is the most accurate and most expensive; level N the
    cheapest and noisiest.  Stateless apart from caches: evaluations
    with the same (seed, level, eval_index, x) always return the same
    value, so concurrent repetitions are safe.
    """

    def __init__(
        self,
        functions,
        bounds,
        sigmas,
        beta,
        seed: int = 0,
        problem: str = "custom",
        x_check_physical=None,
        range_divisor: float = 1.0,
    ):
        self.functions = list(functions)
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        self.sigmas = tuple(float(s) for s in sigmas)
        self.beta = tuple(float(b) for b in beta)
        self.seed = int(seed)
        self.problem = problem
        self.range_divisor = float(range_divisor)
        self._x_check = None if x_check_physical is None else np.asarray(x_check_physical, dtype=float)
        self._r1 = None
        if len(self.functions) != len(self.sigmas) or len(self.functions) != len(self.beta):
            raise ValueError("functions, sigmas and beta must have equal length")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("noise sigmas must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def n_levels(self) -> int:
        return len(self.functions)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def to_physical(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.bounds[:, 0] + u * (self.bounds[:, 1] - self.bounds[:, 0])

    def to_normalized(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.bounds[:, 0]) / (self.bounds[:, 1] - self.bounds[:, 0])

    def _check_domain(self, x: np.ndarray):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim}-dimensional points")
        span = self.bounds[:, 1] - self.bounds[:, 0]
        tol = 1e-9 * span
        if np.any(x < self.bounds[:, 0] - tol) or np.any(x > self.bounds[:, 1] + tol):
            raise ValueError("point outside the problem domain")
        return x

    def _check_level(self, level: int):
        if not 1 <= level <= self.n_levels:
            raise ValueError(f"level must be in [1, {self.n_levels}], got {level}")

    def noise_draw(self, level: int, eval_index: int) -> float:
        """One Gaussian draw from the stream keyed by (seed, level,
        eval_index)."""
        key = np.array(
            [self.seed, (np.uint64(level) << np.uint64(32)) | np.uint64(eval_index)],
            dtype=np.uint64,
        )
        gen = np.random.Generator(np.random.Philox(key=key))
        return float(gen.normal(0.0, self.sigmas[level - 1]))

    def evaluate(self, level: int, x: np.ndarray, eval_index: int) -> float:
        """Noisy observation of the level's response at a physical point."""
        self._check_level(level)
        pts = self._check_domain(x)
        value = float(self.functions[level - 1](pts)[0])
        return value + self.noise_draw(level, eval_index)

    def evaluate_normalized(self, level: int, u: np.ndarray, eval_index: int) -> float:
        return self.evaluate(level, self.to_physical(u), eval_index)

    def true_high_fidelity(self, x: np.ndarray) -> float:
        """Noiseless highest-fidelity response; for verification and
        metrics only, never seen by the learner."""
        pts = self._check_domain(x)
        return float(self.functions[0](pts)[0])

    def true_high_fidelity_normalized(self, u: np.ndarray) -> float:
        return self.true_high_fidelity(self.to_physical(u))

    def function_range_r1(self) -> float:
        """Range of the noiseless highest fidelity over a dense scan of
        the domain, divided by the problem's range divisor.  This is
        the reference scale for the noise model."""
        if self._r1 is None:
            self._r1 = scan_function_range(self.functions[0], self.bounds) / self.range_divisor
        return self._r1

    def reference_optimum_normalized(self) -> tuple[np.ndarray, float] | None:
        """Known global optimum (normalized coordinates, noiseless
        value), when the problem has one."""
        if self._x_check is None:
            return None
        return self.to_normalized(self._x_check), self.true_high_fidelity(self._x_check)


@lru_cache(maxsize=32)
def _cached_range(problem: str, dim: int) -> float:
    info = PROBLEMS[problem]
    func = info.builder(dim)[0]
    return scan_function_range(func, info.bounds_of(dim)) / info.range_divisor


def make_stack(
    problem: str,
    dim: int,
    n_levels: int,
    seed: int = 0,
    beta=None,
    sigmas=None,
    p4_noiseless_hf: bool = False,
) -> FidelityStack:
    """Build one of the named benchmark problems.

    The default noise model assigns each table function a standard
    deviation proportional to the high-fidelity range; pass ``sigmas``
    to override (required for P4 with four levels).  ``p4_noiseless_hf``
    reproduces the variant where only the lower fidelities are noisy.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; choose from {sorted(PROBLEMS)}")
    info = PROBLEMS[problem]
    if dim not in info.supported_dims:
        raise ValueError(f"{problem} supports dimensions {info.supported_dims}, got {dim}")
    if not 1 <= n_levels <= info.max_levels:
        raise ValueError(f"{problem} supports 1..{info.max_levels} levels, got {n_levels}")

    functions = info.builder(dim)
    subset = _LEVEL_SUBSETS[n_levels]
    selected = [functions[i] for i in subset]

    if sigmas is None:
        if any(i >= len(_NOISE_FACTORS) for i in subset):
            raise ValueError(f"{problem} with {n_levels} levels requires explicit sigmas")
        r1 = _cached_range(problem, dim)
        sigmas = [_NOISE_FACTORS[i] * r1 for i in subset]
        if problem == "P4" and p4_noiseless_hf:
            sigmas[0] = 0.0

    beta = default_costs(n_levels) if beta is None else tuple(float(b) for b in beta)

    return FidelityStack(
        functions=selected,
        bounds=info.bounds_of(dim),
        sigmas=sigmas,
        beta=beta,
        seed=seed,
        problem=problem,
        x_check_physical=info.x_check_physical(dim),
        range_divisor=info.range_divisor,
    )
