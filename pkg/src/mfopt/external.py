"""Adapter for external objective evaluators.

Lets an arbitrary executable serve as the fidelity stack so campaigns
can drive simulations that live outside this process.  The protocol is
line-oriented over the child's standard pipes:

    request  (to child stdin):   EVAL <level> <x1> <x2> ... <xD>\n
    response (from child stdout): OK <value>\n   or   ERR <message>\n

Coordinates are physical (already mapped out of the unit cube) and
printed with 17 significant digits.  The child must answer one line per
request, in order.  Anything else - a malformed reply, an ERR reply, or
the child exiting - surfaces as :class:`EvaluationError` carrying the
fidelity level, which terminates a campaign cleanly.
"""

from __future__ import annotations

import subprocess

import numpy as np

from .benchmarks import EvaluationError


class PipeEvaluator:
    """Fidelity stack backed by a child process speaking the line
    protocol.  Matches the analytical stack interface closely enough to
    drive a campaign; noise and reproducibility are the child's
    responsibility, so the evaluation index is not transmitted."""

    def __init__(self, argv, dim: int, n_levels: int, bounds, beta, seed: int = 0):
        self.argv = list(argv)
        self._dim = int(dim)
        self._n_levels = int(n_levels)
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        self.beta = tuple(float(b) for b in beta)
        self.seed = int(seed)
        self.problem = "external"
        if self.bounds.shape[0] != self._dim:
            raise ValueError("bounds must have one (lo, hi) pair per dimension")
        if len(self.beta) != self._n_levels:
            raise ValueError("beta must have one entry per level")
        self._proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    @property
    def n_levels(self) -> int:
        return self._n_levels

    @property
    def dim(self) -> int:
        return self._dim

    def to_physical(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.bounds[:, 0] + u * (self.bounds[:, 1] - self.bounds[:, 0])

    def to_normalized(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.bounds[:, 0]) / (self.bounds[:, 1] - self.bounds[:, 0])

    def _request(self, level: int, x: np.ndarray) -> float:
        if not 1 <= level <= self._n_levels:
            raise ValueError(f"level must be in [1, {self._n_levels}], got {level}")
        coords = " ".join(f"{c:.17g}" for c in np.asarray(x, dtype=float).ravel())
        try:
            self._proc.stdin.write(f"EVAL {level} {coords}\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(level, f"evaluator process unavailable: {exc}") from exc
        if not reply:
            raise EvaluationError(level, "evaluator closed its output stream")
        parts = reply.strip().split(maxsplit=1)
        if parts[0] == "OK" and len(parts) == 2:
            try:
                return float(parts[1])
            except ValueError as exc:
                raise EvaluationError(level, f"unparseable value {parts[1]!r}") from exc
        if parts[0] == "ERR":
            raise EvaluationError(level, parts[1] if len(parts) > 1 else "unspecified error")
        raise EvaluationError(level, f"malformed reply {reply.strip()!r}")

    def evaluate(self, level: int, x: np.ndarray, eval_index: int = 0) -> float:
        del eval_index
        return self._request(level, x)

    def evaluate_normalized(self, level: int, u: np.ndarray, eval_index: int = 0) -> float:
        return self.evaluate(level, self.to_physical(u), eval_index)

    def true_high_fidelity(self, x: np.ndarray) -> float:
        # one fresh highest-fidelity evaluation; used by metrics only
        return self._request(1, x)

    def true_high_fidelity_normalized(self, u: np.ndarray) -> float:
        return self.true_high_fidelity(self.to_physical(u))

    def close(self):
        if self._proc.stdin and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
