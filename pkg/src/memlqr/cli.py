"""Command-line entry point: ``memlqr {spectrum,check,solve,sweep,simulate}``.

Exit codes: 0 success, 1 analytic failure (rank test or closed loop),
2 invalid configuration or infeasible omega, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from memlqr import analysis, galerkin, riccati, simulate
from memlqr.config import RunConfig, load_preset, preset_names
from memlqr.errors import MemLQRError
from memlqr.model import (
    a_eigenpair,
    laplacian_modes,
    omega_zero,
    required_max_index,
    unstable_index_set,
)
from memlqr.stabilizability import hautus_check

log = logging.getLogger("memlqr")

EXIT_OK, EXIT_ANALYTIC, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(v) -> str:
    return f"{v:.17g}"


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MEMLQR_THREADS", "1")))
    except ValueError:
        return 1


def _solver_kwargs(cfg: RunConfig) -> dict:
    s = cfg.solver
    out = {}
    if "tol" in s:
        out["tol"] = float(s["tol"])
    if "max_iter" in s:
        out["maxiter"] = int(s["max_iter"])
    if "max_refine" in s:
        out["max_refine"] = int(s["max_refine"])
    return out


def _solve(cfg: RunConfig, n: int):
    system = galerkin.assemble(galerkin.Basis.for_domain(cfg.domain, n), cfg.params, cfg.shapes)
    sol = riccati.solve_system(system, **_solver_kwargs(cfg))
    return system, sol, riccati.representers(sol, system)


def _max_index(cfg: RunConfig) -> int:
    return cfg.max_index or required_max_index(cfg.params, cfg.domain)


def _count_unstable(groups, omega: float) -> int:
    """Eigenvalues (with eigenspace multiplicity) strictly right of ``-omega``."""
    total = 0
    for g in groups:
        roots = (g.eigenpair.mu_plus, g.eigenpair.mu_minus)
        total += g.multiplicity * sum(mu.real + omega > 0 for mu in roots)
    return int(total)


# -- commands ----------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    max_index = _max_index(cfg)
    groups = unstable_index_set(p, cfg.domain, max_index)
    unstable = {g.group for g in groups}
    tail_group = max_index**2 + (0 if cfg.domain.ndim == 1 else 1)
    rows = analysis.analytic_spectrum(p, cfg.domain, max_index if cfg.domain.ndim == 1
                                      else math.isqrt(tail_group) + 1)
    with open(out / "spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "lambda", "modes", "mu_plus_re", "mu_plus_im",
                    "mu_minus_re", "mu_minus_im", "in_unstable_set"])
        for g, modes, lam, mp, mm in rows:
            if g > tail_group:
                continue
            w.writerow([g, _fmt(lam), " ".join("(" + ",".join(map(str, ix)) + ")" for ix in modes),
                        _fmt(mp.real), _fmt(mp.imag), _fmt(mm.real), _fmt(mm.imag), int(g in unstable)])
    summary = {
        "command": "spectrum",
        "omega_zero": omega_zero(p),
        "omega": p.omega,
        "max_index": max_index,
        "unstable_groups": [
            {"group": g.group, "modes": [list(m.index) for m in g.modes],
             "mu_plus": [g.eigenpair.mu_plus.real, g.eigenpair.mu_plus.imag],
             "mu_minus": [g.eigenpair.mu_minus.real, g.eigenpair.mu_minus.imag]}
            for g in groups
        ],
        "analytic_unstable_eigenvalue_count": _count_unstable(groups, p.omega),
    }
    eval_n = cfg.active_eval_n
    if eval_n:
        system = galerkin.assemble(galerkin.Basis.for_domain(cfg.domain, eval_n), p, cfg.shapes)
        report = analysis.closed_loop_spectrum(system, None, p.omega)
        report.to_csv(out / "galerkin_spectrum.csv")
        summary["galerkin"] = {"n": eval_n, **report.to_dict(),
                               **analysis.unstable_count_check(report, cfg.reference_unstable_count)}
        if "flag" in summary["galerkin"]:
            log.warning(summary["galerkin"]["flag"])
    _write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_check(cfg: RunConfig, out: Path) -> int:
    report = hautus_check(cfg.params, cfg.domain, cfg.shapes, _max_index(cfg))
    _write_json(out / "rank_report.json", report.to_dict())
    _write_json(out / "summary.json", {"command": "check", "verdict": report.verdict,
                                       "groups": len(report.groups)})
    return EXIT_OK if report.verdict else EXIT_ANALYTIC


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    system, sol, rep = _solve(cfg, cfg.n)
    riccati.write_solution_json(sol, out / "are_solution.json")
    _write_json(out / "representers.json", rep.to_dict())
    riccati.write_representer_csvs(rep, out)
    summary = {
        "command": "solve",
        "n": cfg.n,
        "basis": system.basis.metadata(),
        "residual": sol.residual,
        "iterations": sol.iterations,
        "shifted_closed_loop_abscissa": sol.closed_loop_abscissa,
        "closed_loop_abscissa": sol.closed_loop_abscissa - cfg.params.omega,
    }
    ok = sol.closed_loop_abscissa < 0
    eval_n = cfg.active_eval_n
    if eval_n:
        big = galerkin.assemble(galerkin.Basis.for_domain(cfg.domain, eval_n), cfg.params, cfg.shapes)
        K_big = analysis.cross_apply_gain(rep, big)
        open_rep = analysis.closed_loop_spectrum(big, None, cfg.params.omega)
        closed_rep = analysis.closed_loop_spectrum(big, K_big, cfg.params.omega)
        open_rep.to_csv(out / "spectrum_open.csv")
        closed_rep.to_csv(out / "spectrum_closed.csv")
        summary["evaluation"] = {
            "n": eval_n,
            "open": open_rep.to_dict(),
            "closed": closed_rep.to_dict(),
            **analysis.unstable_count_check(open_rep, cfg.reference_unstable_count),
        }
        ok = ok and closed_rep.unstable_count == 0
    _write_json(out / "summary.json", summary)
    return EXIT_OK if ok else EXIT_ANALYTIC


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    n_list = cfg.active_n_list
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        solved = list(pool.map(lambda n: _solve(cfg, n), n_list))
    m = len(cfg.shapes)
    header = ["n", "n_next", "adjacent"]
    for i in range(m):
        header += [f"dist_alpha_{i + 1}", f"dist_beta_{i + 1}"]
    header += ["residual_n", "P_hat_norm2_n"]
    rows = []
    for (n, (_, sol, rep)), (n2, (_, _, rep2)) in zip(zip(n_list, solved), zip(n_list[1:], solved[1:])):
        dists = riccati.gain_distance(rep, rep2)
        row = [n, n2, int(n2 == n + 1)]
        for da, db in dists:
            row += [_fmt(da), _fmt(db)]
        row += [_fmt(sol.residual), _fmt(np.linalg.norm(sol.P_hat, 2))]
        rows.append(row)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    _write_json(out / "summary.json", {
        "command": "sweep",
        "n_list": n_list,
        "residuals": [sol.residual for _, sol, _ in solved],
        "P_hat_norm2": [float(np.linalg.norm(sol.P_hat, 2)) for _, sol, _ in solved],
        "rows": len(rows),
    })
    return EXIT_OK


def _fit_window(T: float, period: float | None):
    t1 = 0.2 * T
    if period and period < 0.6 * T:
        k = math.floor(0.6 * T / period)
        return (t1, t1 + k * period)
    return (t1, 0.8 * T)


def _safe_rate(rec, window):
    try:
        return simulate.decay_rate(rec, window)
    except ValueError:
        return None


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    sim = {"T": 60.0, "closed_T": 10.0, "dt": 1e-3, "save_every": 10, **cfg.simulation}
    sim_n = int(sim.get("n", cfg.n))
    system, sol, rep = _solve(cfg, cfg.n)
    target = system if sim_n == cfg.n else galerkin.assemble(
        galerkin.Basis.for_domain(cfg.domain, sim_n), cfg.params, cfg.shapes)
    K = sol.K if sim_n == cfg.n else analysis.cross_apply_gain(rep, target)
    c0 = galerkin.project_state(target.basis, cfg.initial_y, cfg.initial_z, (target.M, target.S))

    slow = a_eigenpair(laplacian_modes(cfg.domain, 1)[0].lam, cfg.params)
    period = 2 * math.pi / abs(slow.mu_plus.imag) if slow.mu_plus.imag else None
    open_rec = simulate.integrate(target, None, c0, T=float(sim["T"]), dt=float(sim["dt"]),
                                  save_every=int(sim["save_every"]))
    closed_rec = simulate.integrate(target, K, c0, T=float(sim["closed_T"]), dt=float(sim["dt"]),
                                    save_every=int(sim["save_every"]))
    open_rec.to_csv(out / "trajectory_open.csv")
    closed_rec.to_csv(out / "trajectory_closed.csv")
    open_window = tuple(sim["fit_window"]) if "fit_window" in sim else _fit_window(open_rec.times[-1], period)
    closed_window = (0.2 * closed_rec.times[-1], 0.8 * closed_rec.times[-1])
    abscissa = analysis.closed_loop_spectrum(target, K, 0.0).abscissa
    summary = {
        "command": "simulate",
        "n": cfg.n,
        "simulation_n": sim_n,
        "open_loop_rate": _safe_rate(open_rec, open_window),
        "open_loop_window": list(open_window),
        "closed_loop_rate": _safe_rate(closed_rec, closed_window),
        "closed_loop_window": list(closed_window),
        "closed_loop_abscissa": abscissa,
        "omega": cfg.params.omega,
    }
    _write_json(out / "summary.json", summary)
    return EXIT_OK if abscissa < -cfg.params.omega else EXIT_ANALYTIC


COMMANDS = {
    "spectrum": cmd_spectrum,
    "check": cmd_check,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memlqr", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON run configuration")
    src.add_argument("--preset", choices=preset_names(), help="bundled configuration")
    ap.add_argument("--out", type=Path, default=Path("memlqr_out"), help="output directory")
    ap.add_argument("--expensive", action="store_true", help="use full-size evaluation grids")
    ap.add_argument("--n", type=int, help="override the basis size")
    ap.add_argument("--n-list", type=lambda s: [int(v) for v in s.split(",") if v],
                    help="override the sweep list, e.g. 10,11,20,21")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_preset(args.preset) if args.preset else json.loads(args.config.read_text())
        if args.n is not None:
            raw["n"] = args.n
        if args.n_list is not None:
            raw["n_list"] = args.n_list
            raw.pop("expensive_n_list", None)
        cfg = RunConfig.from_dict(raw, expensive=args.expensive)
    except MemLQRError as exc:
        print(f"memlqr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"memlqr: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args.out)
    except MemLQRError as exc:
        print(f"memlqr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
