"""Acceptance criteria, one test each, with their tolerances and time budgets.

Every test records a ``[C<k>] PASS|FAIL`` line that is printed in the pytest
terminal summary. Curves for C4 are written to ``build/acceptance/``.
"""
import csv
import math
import time
from fractions import Fraction
from pathlib import Path

from steppingstones.analysis import (
    convergence_study,
    escape_bound,
    max_stone_escape_probability,
    needle_closed_form,
    optimal_rate,
    runtime_at,
    stone_step_probability,
    verify_analytic_lemmas,
)
from steppingstones.chain import build_ea_chain, expected_hitting_time, transition_pmf
from steppingstones.fitness import alpha, build_dss, build_needle, build_onemax
from steppingstones.montecarlo import estimate_runtime

from .conftest import ACCEPTANCE_LINES
from .oracles import kernel_row_by_masks

ARTIFACTS = Path(__file__).resolve().parents[1] / "build" / "acceptance"


def record(k, ok, detail):
    line = f"[C{k:02d}] {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append((k, line))
    print(line)
    return ok


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_c01_uniform_sampling_exactness():
    with Timer() as t:
        ok = True
        values = {}
        for n in (4, 6, 8, 10):
            fitness, _ = build_dss(Fraction(1, 2), n)
            chain = build_ea_chain(fitness, Fraction(1, 2))
            step = Fraction(1, 2**n)
            ok &= all(chain.kernel[i, n] == step for i in range(n + 1))
            ok &= all(chain.moves[i][n] == step for i in range(n))
            value = expected_hitting_time(chain)
            values[n] = value
            ok &= value == (1 - step) * 2**n
            ok &= abs(value - 2**n) <= 1
    ok &= t.elapsed < 1.0
    detail = ", ".join(f"n={n}: E[T]={v} (2^n={2**n})" for n, v in values.items())
    assert record(1, ok, f"{detail}; {t.elapsed:.2f}s < 1s")


def test_c02_needle_oracle_equality():
    with Timer() as t:
        mismatches = []
        rates = [Fraction(1, 5), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(4, 5)]
        for n in range(1, 13):
            fitness = build_needle(n)
            for q in rates:
                if needle_closed_form(n, q) != runtime_at(fitness, q, "rational"):
                    mismatches.append((n, q))
    ok = not mismatches and t.elapsed < 10
    assert record(2, ok, f"60 (n, q) pairs, {len(mismatches)} mismatches; {t.elapsed:.2f}s < 10s")


def test_c03_onemax_optimal_rate():
    n = 20
    with Timer() as t:
        res = optimal_rate(build_onemax(n), 0.005, 0.5, backend="float")
        at_inverse_n = runtime_at(build_onemax(n), 1 / n, "float")
    lo_ok = 0.5 / n < res.q_star < 2 / n
    ratio = at_inverse_n / res.t_star
    ok = lo_ok and ratio <= 1.05 and t.elapsed < 5
    assert record(
        3, ok,
        f"q*={res.q_star:.5f} in ({0.5 / n}, {2 / n}); E[T(1/n)]/min={ratio:.4f} <= 1.05; {t.elapsed:.2f}s < 5s",
    )


def _write_curves(p, report):
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    path = ARTIFACTS / f"curves_p{p}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "q", "E_T"])
        for row in report.rows:
            for q, v in row.result.curve.rows():
                w.writerow([row.n, repr(q), repr(float(v))])
    return path


def test_c04_optimal_rate_approaches_p():
    with Timer() as t:
        parts = []
        ok = True
        for p in (0.3, 0.7):
            report = convergence_study(p, [10, 20, 30, 40])
            gaps = [abs(r.q_star - p) for r in report.rows]
            ok &= all(r.error is None for r in report.rows)
            ok &= gaps[-1] < gaps[0]
            path = _write_curves(p, report)
            parts.append(f"p={p}: |q*-p| {gaps[0]:.2e} -> {gaps[-1]:.2e} (curves: {path.name})")
    ok &= t.elapsed < 120
    assert record(4, ok, "; ".join(parts) + f"; {t.elapsed:.1f}s < 120s")


def test_c05_runtime_growth_off_p():
    p = 0.3
    a = alpha(p)
    ns = (10, 20, 30, 40)
    with Timer() as t:
        base = {}
        for n in ns:
            fitness, _ = build_dss(p, n)
            base[n] = (fitness, runtime_at(fitness, p))
        ratios = {q: [runtime_at(base[n][0], q) / base[n][1] for n in ns] for q in (0.15, 0.5)}
        normalized = [base[n][1] / (a**n * (1 + math.log(n))) for n in ns]
    increasing = all(all(y > x for x, y in zip(r, r[1:])) for r in ratios.values())
    band = max(normalized) / min(normalized)
    ok = increasing and band <= 10
    detail = "; ".join(f"q={q}: ratios {[round(x, 2) for x in r]}" for q, r in ratios.items())
    assert record(5, ok, f"{detail}; normalized E[T(p)] spread x{band:.2f} <= 10 ({t.elapsed:.1f}s)")


def test_c06_lemma_inequalities():
    with Timer() as t:
        checks = verify_analytic_lemmas(1000)
    ok = all(c.passed and c.worst_margin > 0 for c in checks) and t.elapsed < 1
    detail = ", ".join(f"{c.lemma_id} margin={c.worst_margin:.3e}" for c in checks)
    assert record(6, ok, f"{detail}; {t.elapsed:.2f}s < 1s")


def test_c07_escape_bounds():
    with Timer() as t:
        violations = []
        count = 0
        for p in (Fraction(3, 10), Fraction(7, 10)):
            for n in (20, 40):
                _, profile = build_dss(p, n)
                for q in [Fraction(k, 10) for k in range(1, 10)]:
                    label, bound = escape_bound(p, q, n)
                    count += 1
                    if not max_stone_escape_probability(profile, q) <= bound:
                        violations.append((p, n, q, label))
    ok = not violations and t.elapsed < 5
    assert record(7, ok, f"{count} (p, n, q) cases, {len(violations)} violations; {t.elapsed:.2f}s < 5s")


def test_c08_stone_step_band():
    a = alpha(0.3)
    with Timer() as t:
        scaled = {}
        for n in (20, 30, 40):
            _, profile = build_dss(0.3, n)
            scaled[n] = [
                float(stone_step_probability(profile, k, Fraction(3, 10))) * a**n
                for k in range(1, profile.N + 1)
            ]
    outside = [(n, k + 1, v) for n, vs in scaled.items() for k, v in enumerate(vs) if not 1e-3 <= v <= 1e3]
    ok = not outside and t.elapsed < 5
    detail = "; ".join(f"n={n}: " + ", ".join(f"{v:.3g}" for v in vs) for n, vs in scaled.items())
    assert record(8, ok, f"P(step)*alpha^n = {detail}; {len(outside)} outside [1e-3, 1e3]; {t.elapsed:.2f}s")


def test_c09_monte_carlo_vs_exact():
    fitness, _ = build_dss(0.3, 10)
    exact = float(runtime_at(fitness, Fraction(3, 10), "rational"))
    with Timer() as t:
        stats = estimate_runtime(fitness, 0.3, 10_000, seed=20261016)
    z = abs(stats.mean_steps - exact) / stats.standard_error
    ok = stats.hits == 10_000 and z < 4 and t.elapsed < 30
    assert record(
        9, ok,
        f"mean {stats.mean_steps:.2f} +- {stats.standard_error:.2f} vs exact {exact:.2f} "
        f"(alpha^10={alpha(0.3) ** 10:.1f}); |z|={z:.2f} < 4; {t.elapsed:.1f}s < 30s",
    )


def test_c10_kernel_brute_force():
    with Timer() as t:
        bad = []
        for n in range(1, 11):
            for q in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
                for i in range(n + 1):
                    if transition_pmf(n, i, q) != kernel_row_by_masks(n, i, q):
                        bad.append((n, i, q))
    ok = not bad and t.elapsed < 10
    assert record(10, ok, f"n<=10 x 3 rates x all levels, {len(bad)} mismatches; {t.elapsed:.2f}s < 10s")
