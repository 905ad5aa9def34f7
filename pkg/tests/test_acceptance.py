"""Acceptance criteria 1-10 for the two worked examples.

Every criterion records a single PASS/FAIL line, printed in the terminal
summary (and to stdout when run with ``-s``).  Variants at full
evaluation sizes carry the ``expensive`` marker; run them with
``pytest -m expensive tests/test_acceptance.py``.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from memlqr.analysis import closed_loop_spectrum, cross_apply_gain, semigroup_convergence_probe
from memlqr.cli import main
from memlqr.galerkin import Basis, assemble, bilinear_form, project_state
from memlqr.model import DomainSpec, a_eigenpair, mu_roots, omega_zero, unstable_index_set
from memlqr.riccati import gain_distance, orthonormalize, representers, solve_are, solve_system
from memlqr.simulate import cost_functional, decay_rate, integrate
from memlqr.stabilizability import hautus_check

PI2 = math.pi**2


class Criterion:
    """Collects sub-checks, records one line and fails on any miss."""

    def __init__(self, key, budget=None):
        self.key = key
        self.budget = budget
        self.checks = []

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is None and self.budget is not None:
            self.check("runtime", elapsed < self.budget, f"{elapsed:.2f}s < {self.budget}s")
        failed = [c for c in self.checks if not c[1]]
        if exc_type is not None:
            failed.append(("exception", False, repr(exc)))
        ok = not failed
        detail = f"({elapsed:.2f}s, {len(self.checks)} checks)"
        if failed:
            detail += " failed: " + "; ".join(f"{n} [{d}]" for n, _, d in failed)
        ACCEPTANCE_RESULTS[self.key] = (ok, detail)
        print(f"criterion {self.key}: {'PASS' if ok else 'FAIL'}  {detail}")
        if exc_type is None:
            assert ok, detail
        return False


# -- 1 ---------------------------------------------------------------------

def test_criterion_1_analytic_spectrum_1d(ex1_params):
    with Criterion("1", budget=1.0) as c:
        expected = {1: (0.0, -0.05 + 3.14j), 2: (0.0, -0.2 + 6.28j),
                    3: (1.0, 0.55 + 9.41j), 4: (1.0, 0.21 + 12.54j)}
        for j, (shift, value) in expected.items():
            pair = a_eigenpair(j * j * PI2, ex1_params)
            got_p, got_m = pair.mu_plus + shift, pair.mu_minus + shift
            c.check(f"mu_{j}+", abs(got_p - value) <= 0.005, f"{got_p:.4f} vs {value}")
            c.check(f"mu_{j}-", abs(got_m - value.conjugate()) <= 0.005, f"{got_m:.4f}")
        w0 = omega_zero(ex1_params)
        c.check("omega_0", w0 == 0.01 + 1 / 0.01 and abs(w0 - 100.01) < 1e-12, f"{w0!r}")


# -- 2 ---------------------------------------------------------------------

REFERENCE_UNSTABLE_GROUPS = [
    (2, [(1, 1)], -0.05 + 4.443j),
    (5, [(1, 2), (2, 1)], -0.124 + 7.024j),
    (10, [(1, 3), (3, 1)], -0.247 + 9.932j),
    (17, [(1, 4), (4, 1)], -0.42 + 12.946j),
    (8, [(2, 2)], -0.198 + 8.884j),
    (13, [(2, 3), (3, 2)], -0.321 + 11.323j),
    (20, [(2, 4), (4, 2)], -0.494 + 14.041j),
    (18, [(3, 3)], -0.445 + 13.321j),
]


def test_criterion_2_analytic_spectrum_2d(ex2_params):
    with Criterion("2", budget=1.0) as c:
        groups = {g.group: g for g in unstable_index_set(ex2_params, DomainSpec.UNIT_SQUARE)}
        c.check("group set", set(groups) == {row[0] for row in REFERENCE_UNSTABLE_GROUPS}, sorted(groups))
        for group, modes, value in REFERENCE_UNSTABLE_GROUPS:
            g = groups.get(group)
            if g is None:
                continue
            c.check(f"modes {group}", sorted(m.index for m in g.modes) == modes,
                    [m.index for m in g.modes])
            mp, mm = g.eigenpair.mu_plus, g.eigenpair.mu_minus
            c.check(f"mu {group}pi^2", abs(mp - value) <= 0.001 and abs(mm - value.conjugate()) <= 0.001,
                    f"{mp:.4f} vs {value}")
        w0 = omega_zero(ex2_params)
        c.check("omega_0", abs(w0 - 200.001) < 1e-12, f"{w0!r}")


# -- 3 ---------------------------------------------------------------------

REFERENCE_RANK_MATRICES = [
    ((1, 1), [[0.35], [1.13]], 1),
    ((1, 2), [[0.33, 0.54], [-1.08, -0.67]], 2),
    ((1, 3), [[0.07, 0.49], [0.23, -0.61]], 2),
    ((1, 4), [[-0.06, 0.27], [0.21, 0.87]], 2),
    ((2, 2), [[0.51], [0.63]], 1),
    ((2, 3), [[0.11, 0.47], [-0.14, 0.58]], 2),
    ((2, 4), [[-0.10, 0.26], [-0.12, -0.83]], 2),
    ((3, 3), [[0.10], [-0.13]], 1),
]


def test_criterion_3_rank_tests(ex1_params, ex1_shapes, ex2_params, ex2_shapes):
    with Criterion("3", budget=1.0) as c:
        r1 = hautus_check(ex1_params, DomainSpec.INTERVAL01, ex1_shapes)
        values = [g.matrix[0, 0] for g in r1.groups]
        c.check("1D B* values", len(values) == 4 and np.allclose(values, [7.92, 1.13, 0.42, 1.26], atol=0.005),
                np.round(values, 4).tolist())
        c.check("1D verdict", r1.verdict)
        r2 = hautus_check(ex2_params, DomainSpec.UNIT_SQUARE, ex2_shapes)
        by_first = {g.modes[0]: g for g in r2.groups}
        c.check("2D matrix count", len(by_first) == 8, len(by_first))
        for first, matrix, rank in REFERENCE_RANK_MATRICES:
            g = by_first.get(first)
            ok = g is not None and g.matrix.shape == np.shape(matrix) and \
                np.allclose(g.matrix, matrix, atol=0.01) and g.rank == rank
            c.check(f"rank matrix {first}", ok, None if g is None else np.round(g.matrix, 3).tolist())
        c.check("2D verdict", r2.verdict)


# -- 4 ---------------------------------------------------------------------

def test_criterion_4_galerkin_fidelity(ex1_params, ex2_params):
    with Criterion("4", budget=30.0) as c:
        system = assemble(Basis("Sine2D", 15), ex2_params, [])
        vals = closed_loop_spectrum(system).eigenvalues
        jk = system.basis.indices
        mp, mm = mu_roots((jk[:, 0] ** 2 + jk[:, 1] ** 2) * PI2, ex2_params.eta, ex2_params.kappa)
        expected = np.concatenate([mp, mm])
        err = max(np.min(np.abs(vals - v)) / max(1.0, abs(v)) for v in expected)
        c.check("Sine2D n=15 vs analytic", err <= 1e-8, f"max rel err {err:.2e}")
        c.check("Sine2D eigenvalue count", len(vals) == len(expected))
        report = closed_loop_spectrum(assemble(Basis("Hat1D", 100), ex1_params, []), shift=1.0)
        c.check("Hat1D n=100 unstable count", report.unstable_count == 8, report.unstable_count)


# -- 5 ---------------------------------------------------------------------

def test_criterion_5_are_quality(ex1_params, ex1_shapes, ex2_params, ex2_shapes):
    with Criterion("5", budget=120.0) as c:
        cases = [("Hat1D", n, ex1_params, ex1_shapes) for n in (10, 20, 50)] + \
                [("Sine2D", n, ex2_params, ex2_shapes) for n in (5, 10)]
        for kind, n, params, shapes in cases:
            system = assemble(Basis(kind, n), params, shapes)
            sol = solve_system(system)
            P = sol.P_hat
            sym = np.linalg.norm(P - P.T) <= 1e-12 * np.linalg.norm(P)
            psd = np.linalg.eigvalsh(0.5 * (P + P.T)).min() >= -1e-10 * np.linalg.norm(P, 2)
            F = system.A + params.omega * np.eye(2 * system.dim) + system.B @ sol.K
            absc = np.linalg.eigvals(F).real.max()
            c.check(f"{kind} n={n}", sol.residual <= 1e-8 and sym and psd and absc < 0,
                    f"residual {sol.residual:.1e}, abscissa {absc:.3f}")


# -- 6 ---------------------------------------------------------------------

def _cross_mesh(params, shapes, kind, n_gain, n_eval):
    s = assemble(Basis(kind, n_gain), params, shapes)
    rep = representers(solve_system(s), s)
    big = assemble(Basis(kind, n_eval), params, shapes)
    return closed_loop_spectrum(big, cross_apply_gain(rep, big)).abscissa


def test_criterion_6_cross_mesh(ex1_params, ex1_shapes, ex2_params, ex2_shapes):
    with Criterion("6", budget=300.0) as c:
        a1 = _cross_mesh(ex1_params, ex1_shapes, "Hat1D", 50, 200)
        c.check("1D K_50 on n=200", a1 < -1.0, f"abscissa {a1:.4f}")
        a2 = _cross_mesh(ex2_params, ex2_shapes, "Sine2D", 10, 15)
        c.check("2D K_10 on n=15", a2 < -0.5, f"abscissa {a2:.4f}")


@pytest.mark.expensive
def test_criterion_6_cross_mesh_full(ex1_params, ex1_shapes, ex2_params, ex2_shapes):
    with Criterion("6 (full size)") as c:
        a1 = _cross_mesh(ex1_params, ex1_shapes, "Hat1D", 50, 1000)
        c.check("1D K_50 on n=1000", a1 < -1.0, f"abscissa {a1:.4f}")
        a2 = _cross_mesh(ex2_params, ex2_shapes, "Sine2D", 10, 25)
        c.check("2D K_10 on n=25", a2 < -0.5, f"abscissa {a2:.4f}")


# -- 7 ---------------------------------------------------------------------

REFERENCE_INPUT1_N10 = (0.0169, 0.0052)
REFERENCE_INPUT2_N10 = (0.0375, 0.0177)


def _sweep(params, shapes, kind, ns):
    reps = {}
    for n in sorted({k for n in ns for k in (n, n + 1)}):
        s = assemble(Basis(kind, n), params, shapes)
        reps[n] = representers(solve_system(s), s)
    return {n: gain_distance(reps[n], reps[n + 1]) for n in ns}


def _within_factor_2(value, reference):
    return reference / 2 <= value <= 2 * reference


def _check_tables(c, table1, table2):
    a = [table1[n][0][0] for n in sorted(table1)]
    b = [table1[n][0][1] for n in sorted(table1)]
    c.check("1D alpha monotone", all(x > y for x, y in zip(a, a[1:])), np.round(a, 5).tolist())
    c.check("1D beta monotone", all(x > y for x, y in zip(b, b[1:])), np.round(b, 4).tolist())
    c.check("1D n=10 alpha", _within_factor_2(table1[10][0][0], 0.176), f"{table1[10][0][0]:.4f}")
    c.check("1D n=50 alpha", _within_factor_2(table1[50][0][0], 9.9e-3), f"{table1[50][0][0]:.5f}")
    for i, ref in enumerate((REFERENCE_INPUT1_N10, REFERENCE_INPUT2_N10)):
        for j, name in enumerate(("alpha", "beta")):
            seq = [table2[n][i][j] for n in sorted(table2)]
            c.check(f"2D {name}_{i + 1} monotone", all(x > y for x, y in zip(seq, seq[1:])),
                    np.round(seq, 5).tolist())
            c.check(f"2D {name}_{i + 1} n=10", _within_factor_2(table2[10][i][j], ref[j]),
                    f"{table2[10][i][j]:.5f} vs {ref[j]}")


def test_criterion_7_convergence_tables(ex1_params, ex1_shapes, ex2_params, ex2_shapes):
    with Criterion("7") as c:
        t1 = _sweep(ex1_params, ex1_shapes, "Hat1D", [10, 20, 50, 100])
        t2 = _sweep(ex2_params, ex2_shapes, "Sine2D", [2, 5, 10])
        _check_tables(c, t1, t2)


@pytest.mark.expensive
def test_criterion_7_convergence_tables_full(ex1_params, ex1_shapes, ex2_params, ex2_shapes):
    with Criterion("7 (full size)") as c:
        t1 = _sweep(ex1_params, ex1_shapes, "Hat1D", [10, 20, 50, 100, 500])
        t2 = _sweep(ex2_params, ex2_shapes, "Sine2D", [2, 5, 10, 15, 20])
        _check_tables(c, t1, t2)


# -- 8 ---------------------------------------------------------------------

def _open_rate(system, params, c0, T=60.0):
    rec = integrate(system, None, c0, T=T, dt=1e-3, save_every=10)
    slow = a_eigenpair(system.basis.domain.ndim * PI2, params).mu_plus
    period = 2 * math.pi / abs(slow.imag)
    t1 = 0.2 * T
    return decay_rate(rec, (t1, t1 + math.floor(0.6 * T / period) * period))


def _closed_rate(system, K, c0, T=10.0):
    rec = integrate(system, K, c0, T=T, dt=1e-3, save_every=10)
    return decay_rate(rec, (0.2 * T, 0.8 * T))


def test_criterion_8_simulation(ex1_params, ex2_params, solved_hat50, solved_sine10):
    with Criterion("8", budget=60.0) as c:
        s1, sol1, _ = solved_hat50
        c1 = project_state(s1.basis, -5.0)
        r_open = _open_rate(s1, ex1_params, c1)
        c.check("1D open loop", abs(r_open - 0.05) <= 0.01, f"{r_open:.4f}")
        r_closed = _closed_rate(s1, sol1.K, c1)
        c.check("1D closed loop K_50", r_closed > 1.0, f"{r_closed:.4f}")
        s2, sol2, _ = solved_sine10
        c2 = project_state(s2.basis, 2.0)
        r_open2 = _open_rate(s2, ex2_params, c2)
        c.check("2D open loop", abs(r_open2 - 0.05) <= 0.01, f"{r_open2:.4f}")
        r_closed2 = _closed_rate(s2, sol2.K, c2)
        c.check("2D closed loop K_10", r_closed2 > 0.5, f"{r_closed2:.4f}")


# -- 9 ---------------------------------------------------------------------

def test_criterion_9_property_suites(ex1_params, ex1_shapes, solved_hat50):
    with Criterion("9") as c:
        rng = np.random.default_rng(2024)

        # weak form
        worst = 0.0
        for kind, n in (("Hat1D", 20), ("Sine2D", 4)):
            system = assemble(Basis(kind, n), ex1_params, [])
            for _ in range(20):
                x1, x2 = rng.normal(size=(2, 2 * system.dim))
                form = bilinear_form(system, x1, x2)
                worst = max(worst, abs(-x2 @ system.G @ system.A @ x1 - form) / max(1.0, abs(form)))
        c.check("weak form", worst <= 1e-10, f"{worst:.1e}")

        # Vieta and roundtrip
        worst = 0.0
        for lam in np.geomspace(1.0, 1e7, 200):
            eta, kappa = rng.uniform(1e-3, 0.5, size=2)
            mp, mm = (complex(v) for v in mu_roots(lam, eta, kappa))
            prod, total = lam * (1 + eta * kappa), -(kappa + eta * lam)
            worst = max(worst, abs(mp * mm - prod) / prod,
                        abs(mp + mm - total) / max(abs(total), abs(mp), abs(mm)))
            for mu in (mp, mm):
                num, den = mu * (mu + kappa), eta * (mu + kappa) + 1
                scale = abs(num) + lam * (abs(eta * (mu + kappa)) + 1)
                worst = max(worst, abs(num + lam * den) / scale)
        c.check("Vieta and roundtrip", worst <= 1e-10, f"{worst:.1e}")

        # optimal cost
        system, sol, _ = solved_hat50
        *_, L = orthonormalize(system)
        x0 = project_state(system.basis, -5.0)
        rec = integrate(system, sol.K, x0, T=40.0, dt=1e-3, shift=system.omega)
        J = cost_functional(rec, system.q_weight, system.r_matrix, system.G)
        w = L.T @ x0
        predicted = w @ sol.P_hat @ w
        c.check("optimal cost", abs(J - predicted) <= 0.01 * predicted, f"{J:.3f} vs {predicted:.3f}")

        # Lyapunov against the Kronecker form
        worst = 0.0
        for n in range(1, 7):
            for _ in range(5):
                A = rng.normal(size=(n, n))
                A -= (np.linalg.eigvals(A).real.max() + 0.5) * np.eye(n)
                C = rng.normal(size=(n, n))
                Q = C @ C.T + np.eye(n)
                P = solve_are(A, np.zeros((n, 1)), Q, [[1.0]]).P_hat
                kron = np.kron(np.eye(n), A.T) + np.kron(A.T, np.eye(n))
                ref = np.linalg.solve(kron, -Q.reshape(-1, order="F")).reshape(n, n, order="F")
                worst = max(worst, np.abs(P - ref).max() / max(1.0, np.abs(ref).max()))
        c.check("Lyapunov Kronecker", worst <= 1e-8, f"{worst:.1e}")

        # (C2) semigroup convergence probe
        probe = semigroup_convergence_probe(
            ex1_params, DomainSpec.INTERVAL01, (lambda x: np.sin(np.pi * x), None),
            [10, 20, 40, 80, 160], [0.0, 0.5, 1.0, 2.0], dt=1e-3,
        )
        m = probe["max"]
        c.check("C2 probe monotone", all(a > b for a, b in zip(m, m[1:])), np.array2string(m, precision=2))

        # (C5) bounded Riccati solutions
        norms = []
        for n in (10, 20, 50, 100):
            norms.append(np.linalg.norm(solve_system(assemble(Basis("Hat1D", n), ex1_params, ex1_shapes)).P_hat, 2))
        steps = np.abs(np.diff(norms))
        c.check("C5 bounded |P_hat|", max(norms) <= 1.5 * min(norms) and np.all(np.diff(steps) < 0),
                np.round(norms, 2).tolist())


# -- 10 --------------------------------------------------------------------

def test_criterion_10_documented_discrepancy(tmp_path):
    with Criterion("10") as c:
        code = main(["spectrum", "--preset", "example2", "--out", str(tmp_path)])
        c.check("exit code", code == 0, code)
        summary = json.loads((tmp_path / "summary.json").read_text())
        c.check("analytic count", summary["analytic_unstable_eigenvalue_count"] == 26,
                summary["analytic_unstable_eigenvalue_count"])
        g = summary.get("galerkin", {})
        c.check("reported count", g.get("computed_unstable_count") == 26, g.get("computed_unstable_count"))
        c.check("reference recorded", g.get("reference_unstable_count") == 16)
        c.check("flag emitted", "flag" in g and "16" in g["flag"] and "26" in g["flag"], g.get("flag"))
