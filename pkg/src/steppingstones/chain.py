"""Unitation Markov chain of the (1+1) EA and exact expected hitting times.

Two numeric backends are supported:

``"rational"``
    Every probability is a :class:`fractions.Fraction`; results are exact.
``"float"``
    Binomial terms are evaluated in the log domain and the linear system is
    solved in double precision. Results that leave the double range come
    back as ``inf``.

Hitting times are obtained by state elimination on the transient states.
The elimination only ever adds nonnegative quantities (the diagonal of
``I - Q`` is recomputed as the total outflow of a state rather than
``1 - Q[i, i]``), which keeps full relative accuracy even when the escape
probabilities are many orders of magnitude below 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .fitness import RateLike, UnitationFitness, as_fraction, check_rate

BACKENDS = ("rational", "float")
ELITIST = "elitist-ge"
ALWAYS_ACCEPT = "always-accept"
ACCEPTANCE_MODES = (ELITIST, ALWAYS_ACCEPT)


class UnreachableTargetError(ArithmeticError):
    """The target set cannot be reached from some transient state."""


def _check_backend(backend: str) -> str:
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {backend!r}")
    return backend


def _rate(q: RateLike, backend: str):
    q = check_rate(q, "q")
    return q if backend == "rational" else float(q)


# ---------------------------------------------------------------------------
# mutation kernel
# ---------------------------------------------------------------------------

def _binomial_pmf_exact(m: int, q: Fraction) -> list[Fraction]:
    r = 1 - q
    qpow = [Fraction(1)]
    rpow = [Fraction(1)]
    for _ in range(m):
        qpow.append(qpow[-1] * q)
        rpow.append(rpow[-1] * r)
    return [comb(m, a) * qpow[a] * rpow[m - a] for a in range(m + 1)]


def _binomial_pmf_log(m: int, q: float) -> np.ndarray:
    a = np.arange(m + 1)
    logc = gammaln(m + 1) - gammaln(a + 1) - gammaln(m - a + 1)
    return np.exp(logc + a * math.log(q) + (m - a) * math.log1p(-q))


def _convolve_exact(x: Sequence[Fraction], y: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(x) + len(y) - 1)
    for u, xu in enumerate(x):
        if xu == 0:
            continue
        for b, yb in enumerate(y):
            out[u + b] += xu * yb
    return out


def transition_pmf(n: int, i: int, q: RateLike, backend: str = "rational"):
    """Distribution of the offspring's number of ones given a parent with i ones.

    The parent loses ``a ~ Bin(i, q)`` ones and gains ``b ~ Bin(n - i, q)``;
    the offspring has ``i - a + b`` ones, so the row is the convolution of
    the two binomial laws (the first one reversed).
    """
    _check_backend(backend)
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not 0 <= i <= n:
        raise ValueError(f"level i={i} outside [0, {n}]")
    q = _rate(q, backend)
    if backend == "rational":
        kept = _binomial_pmf_exact(i, q)[::-1]
        gained = _binomial_pmf_exact(n - i, q)
        return _convolve_exact(kept, gained)
    kept = _binomial_pmf_log(i, q)[::-1]
    gained = _binomial_pmf_log(n - i, q)
    return np.convolve(kept, gained)


@dataclass(frozen=True)
class MutationKernel:
    """Offspring-unitation transition matrix under standard bit mutation."""

    n: int
    q: object
    rows: object = field(repr=False)
    backend: str = "rational"

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def row(self, i: int):
        return self.rows[i]


def mutation_kernel(n: int, q: RateLike, backend: str = "rational") -> MutationKernel:
    _check_backend(backend)
    qv = _rate(q, backend)
    if backend == "rational":
        rows = tuple(tuple(transition_pmf(n, i, qv, backend)) for i in range(n + 1))
    else:
        rows = np.vstack([transition_pmf(n, i, qv, backend) for i in range(n + 1)])
        rows.setflags(write=False)
    return MutationKernel(n, qv, rows, backend)


# ---------------------------------------------------------------------------
# EA chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EAChain:
    """Acceptance-filtered (1+1) EA chain on the levels 0..n.

    ``moves[i][j]`` (``j != i``) is the probability of moving from level i to
    level j in one step; the diagonal of ``moves`` is zero and the self-loop
    probability is kept separately in ``stay`` (it collects the kernel's own
    diagonal plus all rejected offspring). Keeping the two apart lets the
    solver form ``1 - P[i, i]`` without cancellation.
    """

    kernel: MutationKernel
    fitness: UnitationFitness
    acceptance_mode: str
    absorbing: bool
    moves: object = field(repr=False)
    stay: object = field(repr=False)

    @property
    def n(self) -> int:
        return self.kernel.n

    @property
    def backend(self) -> str:
        return self.kernel.backend

    @property
    def optimum(self) -> int:
        return self.fitness.optimum_level

    def transition_matrix(self):
        """Full row-stochastic matrix (list of lists or ndarray by backend)."""
        if self.backend == "float":
            P = np.array(self.moves, dtype=float)
            P[np.diag_indices_from(P)] = self.stay
            return P
        P = [list(r) for r in self.moves]
        for i in range(self.n + 1):
            P[i][i] = self.stay[i]
        return P

    def to_json(self) -> str:
        """Debug dump; rational entries are written as decimal fraction strings."""
        P = self.transition_matrix()
        if self.backend == "float":
            rows = [[float(x) for x in r] for r in P]
        else:
            rows = [[str(x) for x in r] for r in P]
        return json.dumps(
            {
                "n": self.n,
                "q": str(self.kernel.q),
                "backend": self.backend,
                "acceptance_mode": self.acceptance_mode,
                "absorbing": self.absorbing,
                "fitness": self.fitness.to_dict(),
                "transition": rows,
            },
            sort_keys=True,
        )


def build_ea_chain(
    fitness: UnitationFitness,
    q: RateLike,
    acceptance_mode: str = ELITIST,
    backend: str = "rational",
    absorbing: bool = True,
    kernel: MutationKernel | None = None,
) -> EAChain:
    """Build the (1+1) EA chain for ``fitness`` at mutation rate ``q``.

    In ``elitist-ge`` mode an offspring replaces the parent iff its fitness
    is at least the parent's. In ``always-accept`` mode every offspring
    replaces the parent. With ``absorbing=True`` the optimum level is made
    absorbing; the non-absorbing variant is only meaningful together with
    ``always-accept`` (hitting times of other target sets).
    """
    if acceptance_mode not in ACCEPTANCE_MODES:
        raise ValueError(f"acceptance_mode must be one of {ACCEPTANCE_MODES}")
    _check_backend(backend)
    n = fitness.n
    if kernel is None:
        kernel = mutation_kernel(n, q, backend)
    elif kernel.n != n or kernel.backend != backend:
        raise ValueError("kernel does not match fitness length or backend")
    f = fitness.values
    opt = fitness.optimum_level

    if acceptance_mode == ELITIST:
        accept = [[f[j] >= f[i] for j in range(n + 1)] for i in range(n + 1)]
    else:
        accept = [[True] * (n + 1) for _ in range(n + 1)]

    if backend == "float":
        K = np.asarray(kernel.rows)
        mask = np.array(accept, dtype=bool)
        np.fill_diagonal(mask, False)
        moves = np.where(mask, K, 0.0)
        rejected = np.where(mask, 0.0, K)
        stay = rejected.sum(axis=1)  # includes K[i, i]
        if absorbing:
            moves[opt, :] = 0.0
            stay[opt] = 1.0
        moves.setflags(write=False)
        stay.setflags(write=False)
        return EAChain(kernel, fitness, acceptance_mode, absorbing, moves, stay)

    zero = Fraction(0)
    moves = []
    stay = []
    for i in range(n + 1):
        Ki = kernel.rows[i]
        if absorbing and i == opt:
            moves.append((zero,) * (n + 1))
            stay.append(Fraction(1))
            continue
        row = [Ki[j] if (j != i and accept[i][j]) else zero for j in range(n + 1)]
        stay.append(sum((Ki[j] for j in range(n + 1) if j == i or not accept[i][j]), zero))
        moves.append(tuple(row))
    return EAChain(kernel, fitness, acceptance_mode, absorbing, tuple(moves), tuple(stay))


# ---------------------------------------------------------------------------
# start distribution and hitting times
# ---------------------------------------------------------------------------

def uniform_start(n: int, backend: str = "rational"):
    """Unitation law of a uniformly random bitstring: Bin(n, 1/2)."""
    _check_backend(backend)
    if backend == "rational":
        return [Fraction(comb(n, i), 2**n) for i in range(n + 1)]
    return _binomial_pmf_log(n, 0.5)


def _check_start(start, n: int, backend: str):
    if len(start) != n + 1:
        raise ValueError(f"start distribution needs {n + 1} weights, got {len(start)}")
    if backend == "rational":
        start = [as_fraction(w) for w in start]
        if any(w < 0 for w in start) or sum(start) != 1:
            raise ValueError("start distribution must be nonnegative and sum to 1")
        return start
    start = np.asarray(start, dtype=float)
    if np.any(start < 0) or abs(start.sum() - 1.0) > 1e-9:
        raise ValueError("start distribution must be nonnegative and sum to 1")
    return start


def _eliminate_exact(M: list[list[Fraction]], leak: list[Fraction]) -> list[Fraction]:
    m = len(leak)
    r = [Fraction(1)] * m
    out = [Fraction(0)] * m
    for k in range(m):
        o = sum(M[k][k + 1:], leak[k])
        if o == 0:
            raise UnreachableTargetError("target set unreachable from a transient state")
        out[k] = o
        Mk = M[k]
        for i in range(k + 1, m):
            Mik = M[i][k]
            if Mik == 0:
                continue
            w = Mik / o
            Mi = M[i]
            for j in range(k + 1, m):
                if j != i and Mk[j]:
                    Mi[j] += w * Mk[j]
            leak[i] += w * leak[k]
            r[i] += w * r[k]
    t = [Fraction(0)] * m
    for k in range(m - 1, -1, -1):
        acc = r[k]
        Mk = M[k]
        for j in range(k + 1, m):
            if Mk[j]:
                acc += Mk[j] * t[j]
        t[k] = acc / out[k]
    return t


def _eliminate_float(M: np.ndarray, leak: np.ndarray) -> np.ndarray:
    m = len(leak)
    r = np.ones(m)
    out = np.zeros(m)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for k in range(m):
            o = M[k, k + 1:].sum() + leak[k]
            out[k] = o
            if not o > 0:
                return np.full(m, math.inf)
            w = M[k + 1:, k] / o
            M[k + 1:, k + 1:] += np.outer(w, M[k, k + 1:])
            idx = np.arange(k + 1, m)
            M[idx, idx] = 0.0
            leak[k + 1:] += w * leak[k]
            r[k + 1:] += w * r[k]
        t = np.zeros(m)
        for k in range(m - 1, -1, -1):
            t[k] = (r[k] + M[k, k + 1:] @ t[k + 1:]) / out[k]
    t[~np.isfinite(t)] = math.inf
    return t


def hitting_times(chain: EAChain, targets: Iterable[int] | None = None):
    """Expected number of steps to reach ``targets`` from every level.

    ``targets`` defaults to the optimum level. Entries for target levels are
    zero. Rational chains give Fractions; float chains give an ndarray whose
    entries are ``inf`` when the value overflows double precision.
    """
    n = chain.n
    if targets is None:
        targets = {chain.optimum}
    targets = set(targets)
    if not targets or not targets <= set(range(n + 1)):
        raise ValueError(f"targets must be a nonempty subset of 0..{n}")
    transient = [i for i in range(n + 1) if i not in targets]
    target_list = sorted(targets)

    if chain.backend == "float":
        P = np.asarray(chain.moves)
        M = P[np.ix_(transient, transient)].copy()
        leak = P[np.ix_(transient, target_list)].sum(axis=1)
        t = _eliminate_float(M, leak)
        full = np.zeros(n + 1)
        full[transient] = t
        return full

    P = chain.moves
    M = [[P[i][j] for j in transient] for i in transient]
    leak = [sum((P[i][j] for j in target_list), Fraction(0)) for i in transient]
    t = _eliminate_exact(M, leak)
    full = [Fraction(0)] * (n + 1)
    for idx, i in enumerate(transient):
        full[i] = t[idx]
    return full


def expected_hitting_time(chain: EAChain, start=None, targets: Iterable[int] | None = None):
    """Expected runtime ``E[T]`` from a start distribution (default: uniform bitstring).

    T counts offspring generated after the initial individual, so T = 0 when
    the initial individual already lies in the target set. Returns a
    Fraction for rational chains and a float (``inf`` on overflow) otherwise.
    """
    if start is None:
        start = uniform_start(chain.n, chain.backend)
    start = _check_start(start, chain.n, chain.backend)
    t = hitting_times(chain, targets)
    if chain.backend == "float":
        with np.errstate(over="ignore", invalid="ignore"):
            mask = start > 0
            value = float(np.dot(start[mask], t[mask]))
        return value if math.isfinite(value) else math.inf
    return sum((w * ti for w, ti in zip(start, t) if w), Fraction(0))


def one_step_optimum_prob(chain_or_n, i: int, q: RateLike | None = None, backend: str = "rational"):
    """Probability that a parent with i ones produces the all-ones offspring.

    Accepts either an :class:`EAChain` (rate taken from its kernel) or ``n``
    together with ``q``. The value is ``q^(n-i) (1-q)^i``.
    """
    if isinstance(chain_or_n, EAChain):
        n, backend = chain_or_n.n, chain_or_n.backend
        q = chain_or_n.kernel.q
    else:
        n = chain_or_n
        if q is None:
            raise ValueError("q is required when passing n")
    if not 0 <= i <= n:
        raise ValueError(f"level i={i} outside [0, {n}]")
    q = _rate(q, backend)
    if backend == "rational":
        return q ** (n - i) * (1 - q) ** i
    return math.exp((n - i) * math.log(q) + i * math.log1p(-q))
