"""Runtime curves, optimal-rate search and numerical checks built on the exact chain."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Sequence

import numpy as np

from .chain import (
    ALWAYS_ACCEPT,
    ELITIST,
    build_ea_chain,
    expected_hitting_time,
    one_step_optimum_prob,
    transition_pmf,
)
from .fitness import (
    RateLike,
    SteppingStoneProfile,
    UnitationFitness,
    alpha,
    as_fraction,
    build_dss,
    build_needle,
    check_rate,
)

Q_MIN = 1e-3
Q_MAX = 1 - 1e-3
INVPHI = (math.sqrt(5) - 1) / 2


class NoMinimumError(RuntimeError):
    """Every sampled runtime was infinite."""


def _pmap(func: Callable, items: Sequence, workers: int | None):
    """Map preserving input order; processes when ``workers > 1``."""
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items))


def _as_number(value):
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else str(value.numerator)
    return "inf" if math.isinf(value) else float(value)


# ---------------------------------------------------------------------------
# runtime curves
# ---------------------------------------------------------------------------

def runtime_at(fitness: UnitationFitness, q, backend: str = "float"):
    """E[T(q)] of the elitist (1+1) EA from a uniform random start."""
    return expected_hitting_time(build_ea_chain(fitness, q, ELITIST, backend))


class _RuntimeTask:
    # picklable partial for process pools
    def __init__(self, fitness, backend):
        self.fitness = fitness
        self.backend = backend

    def __call__(self, q):
        return runtime_at(self.fitness, q, self.backend)


@dataclass(frozen=True)
class RuntimeCurve:
    fitness: UnitationFitness
    q_grid: tuple
    values: tuple
    backend: str

    @property
    def overflow(self) -> tuple:
        return tuple(isinstance(v, float) and math.isinf(v) for v in self.values)

    def rows(self) -> list[tuple]:
        return [(q, v) for q, v in zip(self.q_grid, self.values)]

    def to_dict(self) -> dict:
        return {
            "fitness": self.fitness.name,
            "n": self.fitness.n,
            "backend": self.backend,
            "points": [
                {"q": _as_number(q) if isinstance(q, Fraction) else float(q), "E_T": _as_number(v)}
                for q, v in self.rows()
            ],
        }


def _check_grid(q_grid) -> list:
    grid = list(q_grid)
    if not grid:
        raise ValueError("q grid must be nonempty")
    for a, b in zip(grid, grid[1:]):
        if not a < b:
            raise ValueError("q grid must be strictly increasing")
    if not (0 < grid[0] and grid[-1] < 1):
        raise ValueError("q grid must lie inside (0, 1)")
    return grid


def runtime_curve(fitness: UnitationFitness, q_grid, backend: str = "float", workers: int | None = None) -> RuntimeCurve:
    grid = _check_grid(q_grid)
    if backend == "rational":
        grid = [as_fraction(q) for q in grid]
    else:
        grid = [float(q) for q in grid]
    values = _pmap(_RuntimeTask(fitness, backend), grid, workers)
    return RuntimeCurve(fitness, tuple(grid), tuple(values), backend)


# ---------------------------------------------------------------------------
# optimal rate
# ---------------------------------------------------------------------------

def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float, max_iter: int = 200):
    """Minimize a unimodal f on [lo, hi] until the bracket is narrower than tol.

    Returns ``(x, fx, iterations, evaluations)`` where ``evaluations`` lists
    every ``(x, f(x))`` pair computed.
    """
    evals = []

    def g(x):
        y = f(x)
        evals.append((x, y))
        return y

    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = g(c), g(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = g(d)
        it += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, it, evals


@dataclass(frozen=True)
class OptRateResult:
    q_star: float
    t_star: object
    bracket: tuple
    refinement_iterations: int
    boundary_flag: bool
    curve: RuntimeCurve | None = field(default=None, repr=False, compare=False)

    def to_dict(self, include_curve: bool = False) -> dict:
        d = {
            "q_star": float(self.q_star),
            "t_star": _as_number(self.t_star),
            "bracket": [float(self.bracket[0]), float(self.bracket[1])],
            "refinement_iterations": self.refinement_iterations,
            "boundary_flag": self.boundary_flag,
        }
        if include_curve and self.curve is not None:
            d["curve"] = self.curve.to_dict()["points"]
        return d


def optimal_rate(
    fitness: UnitationFitness,
    q_min: float = Q_MIN,
    q_max: float = Q_MAX,
    coarse_points: int = 256,
    tol: float = 1e-5,
    backend: str = "float",
    workers: int | None = None,
) -> OptRateResult:
    """Locate the mutation rate minimizing E[T(q)].

    A dense coarse scan picks the best grid point (ties go to the smaller q);
    golden-section search then refines inside the two neighbouring grid
    cells. The returned minimum is the best of every evaluated point, so it
    never exceeds any sampled value of the coarse curve.
    """
    if not (0 < q_min < q_max < 1):
        raise ValueError("need 0 < q_min < q_max < 1")
    if coarse_points < 16:
        raise ValueError("coarse_points must be at least 16")
    if tol <= 0:
        raise ValueError("tol must be positive")
    q_min, q_max = max(q_min, Q_MIN), min(q_max, Q_MAX)
    grid = np.linspace(q_min, q_max, coarse_points)
    curve = runtime_curve(fitness, grid, backend, workers)
    vals = [float(v) for v in curve.values]
    if all(math.isinf(v) for v in vals):
        raise NoMinimumError("runtime is infinite at every grid point")
    best = min(range(len(vals)), key=lambda i: (vals[i], i))
    boundary = best in (0, len(vals) - 1)
    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, len(grid) - 1)])

    def f(q):
        return float(runtime_at(fitness, as_fraction(q) if backend == "rational" else q, backend))

    _, _, iters, evals = golden_section(f, lo, hi, tol)
    candidates = [(vals[best], float(grid[best]))] + [(y, x) for x, y in evals]
    t_star_f, q_star = min(candidates)
    if q_star == float(grid[best]):
        t_star = curve.values[best]
    else:
        t_star = runtime_at(fitness, as_fraction(q_star) if backend == "rational" else q_star, backend)
    return OptRateResult(q_star, t_star, (lo, hi), iters, boundary, curve)


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    q_star: float | None
    t_star: object
    normalized: float | None
    boundary_flag: bool = False
    error: str | None = None
    result: OptRateResult | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class ConvergenceReport:
    p: Fraction
    rows: tuple

    def to_dict(self, include_curves: bool = False) -> dict:
        out = []
        for r in self.rows:
            d = {
                "n": r.n,
                "q_star": r.q_star,
                "t_star": None if r.t_star is None else _as_number(r.t_star),
                "normalized": r.normalized,
                "boundary_flag": r.boundary_flag,
                "error": r.error,
            }
            if include_curves and r.result is not None and r.result.curve is not None:
                d["curve"] = r.result.curve.to_dict()["points"]
            out.append(d)
        return {"p": str(self.p), "alpha": alpha(self.p), "rows": out}


class _StudyTask:
    def __init__(self, p, search):
        self.p = p
        self.search = search

    def __call__(self, n):
        try:
            fitness, _ = build_dss(self.p, n)
            res = optimal_rate(fitness, **self.search)
        except Exception as exc:  # recorded per row; the study goes on
            return ConvergenceRow(n, None, None, None, error=f"{type(exc).__name__}: {exc}")
        a = alpha(self.p)
        with np.errstate(over="ignore"):
            norm = float(res.t_star) / a**n
        return ConvergenceRow(n, res.q_star, res.t_star, norm, res.boundary_flag, None, res)


def convergence_study(p: RateLike, n_list: Sequence[int], workers: int | None = None, **search) -> ConvergenceReport:
    """Optimal rate of DSS_p for each n in ``n_list`` (rows in input order)."""
    p = check_rate(p)
    ns = list(n_list)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_list must be strictly increasing")
    if any(n < 4 for n in ns):
        raise ValueError("every n must be at least 4")
    rows = _pmap(_StudyTask(p, search), ns, workers)
    return ConvergenceReport(p, tuple(rows))


# ---------------------------------------------------------------------------
# closed forms and stone quantities
# ---------------------------------------------------------------------------

def needle_closed_form(n: int, p: RateLike, exact: bool = True):
    """Expected runtime on Needle: sum_j C(n, j) / (1 - (1 - 2p)^j)."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    p = check_rate(p)
    if exact:
        c = 1 - 2 * p
        return sum((Fraction(comb(n, j)) / (1 - c**j) for j in range(1, n + 1)), Fraction(0))
    c = 1 - 2 * float(p)
    return math.fsum(comb(n, j) / _one_minus_power(c, j) for j in range(1, n + 1))


def _one_minus_power(c: float, j: int) -> float:
    # 1 - c**j without cancellation when |c| is close to 1
    if c == 0:
        return 1.0
    if c > 0 or j % 2 == 0:
        return -math.expm1(j * math.log(abs(c)))
    return 1.0 + abs(c) ** j


def stone_step_probability(profile: SteppingStoneProfile, k: int, q: RateLike, backend: str = "rational"):
    """Kernel probability of jumping from stone k's level straight to stone k-1's."""
    if not 1 <= k <= profile.N:
        raise ValueError(f"stone index k must be in [1, {profile.N}], got {k}")
    row = transition_pmf(profile.n, profile.levels[k], q, backend)
    return row[profile.levels[k - 1]]


def stone_step_flips(profile: SteppingStoneProfile, k: int) -> tuple[int, int]:
    """Flip counts (ones, zeros) taking level k to level k-1 closest to a p-fraction of each.

    Among integer pairs with ``ones - zeros = level_k - level_{k-1}`` this
    picks the one nearest to ``(p * level_k, p * (n - level_k))``.
    """
    if not 1 <= k <= profile.N:
        raise ValueError(f"stone index k must be in [1, {profile.N}], got {k}")
    n, p = profile.n, profile.p
    here, there = profile.levels[k], profile.levels[k - 1]
    diff = here - there
    best = None
    for a in range(max(0, diff), min(here, n - here + diff) + 1):
        b = a - diff
        cost = abs(a - p * here) + abs(b - p * (n - here))
        if best is None or cost < best[0]:
            best = (cost, a, b)
    return best[1], best[2]


def stone_step_mask_probability(profile: SteppingStoneProfile, k: int, q: RateLike, backend: str = "rational"):
    """Probability of one particular flip mask from :func:`stone_step_flips`."""
    a, b = stone_step_flips(profile, k)
    flips = a + b
    n = profile.n
    q = check_rate(q, "q")
    if backend == "rational":
        return q**flips * (1 - q) ** (n - flips)
    q = float(q)
    return math.exp(flips * math.log(q) + (n - flips) * math.log1p(-q))


def max_stone_escape_probability(profile: SteppingStoneProfile, q: RateLike, backend: str = "rational"):
    """Largest one-step probability of producing the optimum from any stone (k >= 1)."""
    return max(one_step_optimum_prob(profile.n, lvl, q, backend) for lvl in profile.levels[1:])


def escape_bound(p: RateLike, q: RateLike, n: int):
    """Upper bound on the stone-to-optimum probability that applies to (p, q).

    Returns ``(label, bound)`` with an exact rational bound, or a float for
    the ``gamma^n`` case. Undefined for p = 1/2.
    """
    p = check_rate(p)
    q = check_rate(q, "q")
    if p == Fraction(1, 2):
        raise ValueError("escape bounds are stated for p != 1/2")
    pn = p * n
    if p > Fraction(1, 2):
        if q >= Fraction(1, 2):
            return "eq1", q ** math.ceil(pn) * (1 - q) ** math.floor(n - pn)
        beta = (1 - p) ** 2 + p**2
        return "eq2", q ** math.ceil((1 - beta) * n) * (1 - q) ** math.floor(beta * n)
    if q <= Fraction(1, 2):
        return "p<1/2,q<=1/2", q ** math.ceil(pn) * (1 - q) ** math.floor(n - pn)
    if n % 2 == 0:
        return "gamma^n", (q * (1 - q)) ** (n // 2)
    return "gamma^n", math.sqrt(q * (1 - q)) ** n


def stone_hitting_time(profile: SteppingStoneProfile, q: RateLike, backend: str = "float"):
    """Expected time for an always-accepting EA to reach any stone S_1..S_N.

    Starts from a uniform random bitstring; no state is absorbing apart from
    the stones being the target set.
    """
    fitness, _ = build_dss(profile.p, profile.n)
    chain = build_ea_chain(fitness, q, ALWAYS_ACCEPT, backend, absorbing=False)
    return expected_hitting_time(chain, targets=profile.levels[1:])


# ---------------------------------------------------------------------------
# analytic inequalities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaCheck:
    lemma_id: str
    passed: bool
    worst_margin: float
    worst_point: tuple

    def to_dict(self) -> dict:
        return {
            "lemma": self.lemma_id,
            "pass": self.passed,
            "worst_margin": self.worst_margin,
            "worst_point": list(self.worst_point),
        }


def _interior_grid(m: int) -> np.ndarray:
    return np.arange(1, m + 1) / (m + 1)


def _xlogx(x):
    return x * np.log(x)


def verify_analytic_lemmas(grid_density: int = 1000) -> list[LemmaCheck]:
    """Check the three elementary inequalities on uniform grids over (0, 1).

    * ``sqrt-entropy``: ``x^x (1-x)^(1-x) - sqrt(x (1-x)) > 0`` off x = 1/2.
    * ``argmax-g1``: ``(1-x)^(1-a) x^a`` peaks at ``x = a`` (to one grid step)
      for every grid value of ``a``.
    * ``beta-ineq``: ``(1-p)^(1-p) p^p - q^(1-b) (1-q)^b > 0`` with
      ``b = (1-p)^2 + p^2``, over the product grid in (p, q).
    """
    if grid_density < 100:
        raise ValueError("grid_density must be at least 100")
    x = _interior_grid(grid_density)
    checks = []

    lhs = np.exp(_xlogx(x) + _xlogx(1 - x))
    margin = lhs - np.sqrt(x * (1 - x))
    i = int(np.argmin(margin))
    checks.append(LemmaCheck("sqrt-entropy", bool(np.all(margin > 0)), float(margin[i]), (float(x[i]),)))

    step = 1.0 / (grid_density + 1)
    fine = np.linspace(0.0, 1.0, 10 * grid_density + 1)
    with np.errstate(divide="ignore"):
        logx, log1x = np.log(fine), np.log1p(-fine)
    worst = (math.inf, (0.0,))
    for a in x:
        g = np.nan_to_num(a * logx + (1 - a) * log1x, nan=-np.inf)
        argmax = fine[int(np.argmax(g))]
        slack = step - abs(argmax - a)
        if slack < worst[0]:
            worst = (slack, (float(a), float(argmax)))
    checks.append(LemmaCheck("argmax-g1", bool(worst[0] > 0), float(worst[0]), worst[1]))

    P, Q = np.meshgrid(x, x, indexing="ij")
    beta = (1 - P) ** 2 + P**2
    rhs = np.exp(_xlogx(P) + _xlogx(1 - P))
    lhs = np.exp((1 - beta) * np.log(Q) + beta * np.log1p(-Q))
    margin = rhs - lhs
    idx = np.unravel_index(int(np.argmin(margin)), margin.shape)
    checks.append(
        LemmaCheck(
            "beta-ineq",
            bool(np.all(margin > 0)),
            float(margin[idx]),
            (float(P[idx]), float(Q[idx])),
        )
    )
    return checks


NEEDLE_RATES = (Fraction(1, 5), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(4, 5))


def verify_needle_oracle(max_n: int = 12, rates: Sequence = NEEDLE_RATES) -> LemmaCheck:
    """Exact comparison of the Needle closed form with the rational chain solver."""
    worst = (0.0, ())
    ok = True
    for n in range(1, max_n + 1):
        fitness = build_needle(n)
        for q in rates:
            q = as_fraction(q)
            closed = needle_closed_form(n, q)
            solved = runtime_at(fitness, q, "rational")
            if closed != solved:
                ok = False
                gap = float(abs(closed - solved))
                if gap >= worst[0]:
                    worst = (gap, (n, float(q)))
    return LemmaCheck("needle-oracle", ok, worst[0], worst[1])
