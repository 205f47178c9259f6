"""Functions of unitation: DistantSteppingStones, OneMax, Needle and Jump.

A function of unitation depends on a bitstring only through its number of
ones, so it is stored as a table of ``n + 1`` values indexed by that count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence, Union

RateLike = Union[float, int, str, Fraction]


class ConstructionError(ValueError):
    """Raised when a fitness function cannot be built from its parameters."""


def as_fraction(value: RateLike) -> Fraction:
    """Convert a rate to an exact rational.

    Floats are read through their shortest decimal repr, so ``0.3`` becomes
    ``3/10`` rather than the nearest binary double. Strings may be decimals
    (``"0.3"``) or fractions (``"3/10"``).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("rate must be numeric, not bool")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"rate must be finite, got {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rate")


def check_rate(value: RateLike, name: str = "p") -> Fraction:
    rate = as_fraction(value)
    if not 0 < rate < 1:
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {value}")
    return rate


@dataclass(frozen=True)
class UnitationFitness:
    """Fitness table indexed by the number of ones.

    ``values[i]`` is the fitness of every bitstring with ``i`` ones.
    """

    n: int
    values: tuple
    optimum_level: int
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if len(self.values) != self.n + 1:
            raise ValueError(
                f"expected {self.n + 1} fitness values, got {len(self.values)}"
            )
        if not 0 <= self.optimum_level <= self.n:
            raise ValueError(f"optimum_level {self.optimum_level} outside [0, {self.n}]")
        top = self.values[self.optimum_level]
        for i, v in enumerate(self.values):
            if i != self.optimum_level and not v < top:
                raise ValueError(
                    f"level {i} has fitness {v} >= optimum fitness {top}; "
                    "the maximum must be strict and unique"
                )

    def __call__(self, ones: int):
        return self.values[ones]

    def rescaled(self, transform) -> "UnitationFitness":
        """Apply ``transform`` to every value (it should be strictly increasing)."""
        return UnitationFitness(
            self.n, tuple(transform(v) for v in self.values), self.optimum_level, self.name
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "values": list(self.values),
            "optimum_level": self.optimum_level,
        }


@dataclass(frozen=True)
class SteppingStoneProfile:
    """Construction record of a DistantSteppingStones function.

    ``levels[0] == n`` is the optimum; ``levels[k]`` for ``k >= 1`` is the
    unitation of stone ``k``, with fitness ``N + 1 - k``.
    """

    p: Fraction
    n: int
    levels: tuple
    N: int

    def fitness_of_stone(self, k: int) -> int:
        return self.N + 1 - k

    def to_dict(self) -> dict:
        return {
            "p": str(self.p),
            "n": self.n,
            "levels": list(self.levels),
            "N": self.N,
        }


def closed_form_s(p: RateLike, k: int) -> float:
    """Value of the k-th iterate of ``x -> p(1-x) + (1-p)x`` started at 1."""
    p = float(check_rate(p))
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return (1 - 2 * p) ** k * 0.5 + 0.5


def iterate_s(p: RateLike, k: int) -> float:
    """Same quantity as :func:`closed_form_s`, by applying the map k times."""
    p = float(check_rate(p))
    x = 1.0
    for _ in range(k):
        x = p * (1 - x) + (1 - p) * x
    return x


def _max_iterations(n: int) -> int:
    return 64 * (1 + math.ceil(math.log2(n)))


def stone_levels(p: RateLike, n: int) -> list[int]:
    """Deduplicated stone levels ``floor(n * s_k)``, ending at ``floor(n / 2)``.

    The iterates are computed in exact rational arithmetic so the floors are
    not subject to rounding.
    """
    p = check_rate(p)
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    target = n // 2
    levels = [n]
    seen = {n}
    s = Fraction(1)
    for _ in range(_max_iterations(n)):
        s = p * (1 - s) + (1 - p) * s
        level = math.floor(n * s)
        if level not in seen:
            seen.add(level)
            levels.append(level)
        if level == target:
            return levels
    raise ConstructionError(
        f"stone levels for p={p}, n={n} did not reach {target} "
        f"within {_max_iterations(n)} iterations"
    )


def build_dss(p: RateLike, n: int) -> tuple[UnitationFitness, SteppingStoneProfile]:
    """Build DistantSteppingStones_p on n bits.

    Returns the fitness table and the stone profile. The optimum (all ones)
    gets fitness ``N + 1``, stone ``k`` gets ``N + 1 - k`` and everything else
    is 0.
    """
    p = check_rate(p)
    levels = stone_levels(p, n)
    N = len(levels) - 1
    values = [0] * (n + 1)
    for k, level in enumerate(levels):
        values[level] = N + 1 - k
    fitness = UnitationFitness(n, tuple(values), n, name=f"dss(p={p})")
    return fitness, SteppingStoneProfile(p, n, tuple(levels), N)


def build_onemax(n: int) -> UnitationFitness:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return UnitationFitness(n, tuple(range(n + 1)), n, name="onemax")


def build_needle(n: int, plateau=1, peak=2) -> UnitationFitness:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not plateau < peak:
        raise ValueError("needle peak must exceed the plateau value")
    return UnitationFitness(n, (plateau,) * n + (peak,), n, name="needle")


def build_jump(n: int, m: int) -> UnitationFitness:
    """Jump_m: OneMax shifted by m, with a gap of width m before the optimum."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not 1 <= m < n:
        raise ValueError(f"jump width m must satisfy 1 <= m < n, got m={m}, n={n}")
    values = tuple(m + i if (i <= n - m or i == n) else n - i for i in range(n + 1))
    return UnitationFitness(n, values, n, name=f"jump(m={m})")


def alpha(p: RateLike) -> float:
    """``1 / (p^p (1-p)^(1-p))``, the exponential base of the runtime at rate p."""
    p = float(check_rate(p))
    return math.exp(-(p * math.log(p) + (1 - p) * math.log(1 - p)))


def build_fitness(kind: str, n: int, p: RateLike | None = None, m: int | None = None):
    """Construct a fitness by name; used by the CLI."""
    if kind == "dss":
        if p is None:
            raise ValueError("dss requires p")
        return build_dss(p, n)[0]
    if kind == "onemax":
        return build_onemax(n)
    if kind == "needle":
        return build_needle(n)
    if kind == "jump":
        if m is None:
            raise ValueError("jump requires m")
        return build_jump(n, m)
    raise ValueError(f"unknown fitness kind {kind!r}")


__all__: Sequence[str] = [
    "ConstructionError",
    "SteppingStoneProfile",
    "UnitationFitness",
    "alpha",
    "as_fraction",
    "build_dss",
    "build_fitness",
    "build_jump",
    "build_needle",
    "build_onemax",
    "check_rate",
    "closed_form_s",
    "iterate_s",
    "stone_levels",
]
