"""Bitstring-level simulation of the (1+1) EA on functions of unitation.

Randomness comes from numpy's counter-based Philox generator. Run ``r`` of a
batch seeded with ``seed`` uses the key ``(seed, r)``; within a run the first
``n`` uniforms pick the initial bitstring and step ``t`` consumes the next
``n`` uniforms for its flip mask. A run is therefore a pure function of
``(seed, r)``, independent of batch order or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fitness import UnitationFitness, check_rate

DEFAULT_CAP = 10**6
_MASK64 = (1 << 64) - 1


class EstimateUnavailable(RuntimeError):
    """No run of a batch reached the optimum within the cap."""

    def __init__(self, stats: "TrajectoryStats"):
        super().__init__(f"all {stats.runs} runs exceeded the cap of {stats.cap} steps")
        self.stats = stats


def run_generator(seed: int, run: int) -> np.random.Generator:
    key = ((seed & _MASK64) << 64) | (run & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def _pack(bits: np.ndarray) -> list[int]:
    """Rows of a boolean matrix as Python ints (bit j = column j)."""
    n = bits.shape[1]
    if n <= 62:
        weights = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
        return (bits.astype(np.int64) @ weights).tolist()
    packed = np.packbits(bits, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def run_trajectory(fitness: UnitationFitness, q, seed: int, cap: int = DEFAULT_CAP, run: int = 0) -> int | None:
    """Steps until the EA first holds an optimal bitstring, or None past ``cap``.

    A uniformly random initial bitstring costs nothing; each further step
    flips every bit independently with probability q and keeps the
    offspring iff its fitness is at least the parent's.
    """
    q = float(check_rate(q, "q"))
    if cap < 1:
        raise ValueError("cap must be at least 1")
    n = fitness.n
    values = fitness.values
    opt = fitness.optimum_level
    rng = run_generator(seed, run)

    x = _pack(rng.random((1, n)) < 0.5)[0]
    ones = x.bit_count()
    if ones == opt:
        return 0
    fx = values[ones]

    steps = 0
    block = 64
    while steps < cap:
        size = min(block, cap - steps)
        for m in _pack(rng.random((size, n)) < q):
            steps += 1
            y = x ^ m
            c = y.bit_count()
            fy = values[c]
            if fy >= fx:
                x, fx = y, fy
                if c == opt:
                    return steps
        block = min(block * 2, 8192)
    return None


@dataclass(frozen=True)
class TrajectoryStats:
    runs: int
    hits: int
    mean_steps: float | None
    standard_error: float | None
    cap: int
    seed: int

    @property
    def censored(self) -> int:
        return self.runs - self.hits

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "hits": self.hits,
            "censored": self.censored,
            "mean_steps": self.mean_steps,
            "standard_error": self.standard_error,
            "cap": self.cap,
            "seed": self.seed,
        }


class _Batch:
    def __init__(self, fitness, q, seed, cap):
        self.args = (fitness, q, seed, cap)

    def __call__(self, runs: range) -> list:
        fitness, q, seed, cap = self.args
        return [run_trajectory(fitness, q, seed, cap, r) for r in runs]


def estimate_runtime(
    fitness: UnitationFitness,
    q,
    runs: int,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    workers: int | None = None,
) -> TrajectoryStats:
    """Monte Carlo estimate of E[T(q)].

    Runs that exceed the cap are censored: they are left out of the mean and
    reported through :attr:`TrajectoryStats.censored`. The standard error is
    None when fewer than two runs hit.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    check_rate(q, "q")
    task = _Batch(fitness, q, seed, cap)
    if workers and workers > 1:
        chunks = [range(lo, min(lo + 256, runs)) for lo in range(0, runs, 256)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [s for part in ex.map(task, chunks) for s in part]
    else:
        results = task(range(runs))

    hit = np.array([s for s in results if s is not None], dtype=float)
    mean = float(hit.mean()) if hit.size else None
    se = float(hit.std(ddof=1) / math.sqrt(hit.size)) if hit.size >= 2 else None
    stats = TrajectoryStats(runs, int(hit.size), mean, se, cap, seed)
    if not hit.size:
        raise EstimateUnavailable(stats)
    return stats


def sample_offspring_unitation(n: int, i: int, q, samples: int, seed: int = 0) -> np.ndarray:
    """Histogram of offspring unitation from the bitstring ``1^i 0^(n-i)``.

    Mutates real bitstrings, so it can be compared against the analytic
    kernel row.
    """
    q = float(check_rate(q, "q"))
    if not 0 <= i <= n:
        raise ValueError(f"level i={i} outside [0, {n}]")
    rng = run_generator(seed, 0)
    parent = np.zeros(n, dtype=bool)
    parent[:i] = True
    flips = rng.random((samples, n)) < q
    ones = (parent ^ flips).sum(axis=1)
    return np.bincount(ones, minlength=n + 1)
