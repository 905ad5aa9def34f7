"""Dense spectra, cross-mesh gain application and convergence probes."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from memlqr.errors import DomainMismatch, NoConvergence
from memlqr.galerkin import Basis, GalerkinSystem, assemble, cross_grams, project_state
from memlqr.model import DomainSpec, ModelParams, laplacian_modes, mu_roots
from memlqr.riccati import GainRepresenters
from memlqr.simulate import integrate


def sort_eigenvalues(vals) -> np.ndarray:
    vals = np.asarray(vals, dtype=complex)
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def eig(matrix) -> np.ndarray:
    """Eigenvalues of a dense real matrix, by descending real part.

    Uses LAPACK ``dgeev`` (Hessenberg reduction then Francis double-shift QR).
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        vals = sla.eigvals(a, overwrite_a=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"QR iteration failed: {exc}") from exc
    return sort_eigenvalues(vals)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray  # already shifted
    shift: float
    unstable_count: int
    abscissa: float

    @classmethod
    def from_eigenvalues(cls, vals, shift: float) -> "SpectrumReport":
        vals = sort_eigenvalues(vals)
        return cls(vals, shift, int(np.sum(vals.real > 0)), float(vals.real.max()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im"])
            for v in self.eigenvalues:
                w.writerow([f"{v.real:.17g}", f"{v.imag:.17g}"])

    def to_dict(self) -> dict:
        return {"shift": self.shift, "unstable_count": self.unstable_count, "abscissa": self.abscissa}


def spectrum_report(matrix, shift: float = 0.0) -> SpectrumReport:
    a = np.asarray(matrix, dtype=float)
    return SpectrumReport.from_eigenvalues(eig(a + shift * np.eye(a.shape[0])), shift)


def closed_loop_spectrum(system: GalerkinSystem, K=None, shift: float = 0.0) -> SpectrumReport:
    """Spectrum of ``A + B K + shift I`` (``K=None`` gives the open loop)."""
    F = system.A
    if K is not None:
        K = np.atleast_2d(K)
        if K.shape != (system.n_inputs, 2 * system.dim):
            raise ValueError(f"gain shape {K.shape} does not fit the system")
        F = F + system.B @ K
    return spectrum_report(F, shift)


def cross_apply_gain(rep: GainRepresenters, system: GalerkinSystem) -> np.ndarray:
    """Matrix of ``(p, q) -> <alpha, p> + <beta, q>`` on another basis."""
    if rep.basis.kind != system.basis.kind:
        raise DomainMismatch(f"{rep.basis.kind} gain on {system.basis.kind} system")
    Ml, Sl = cross_grams(rep.basis, system.basis)
    return np.hstack([rep.alpha @ Ml, rep.beta @ Sl])


def analytic_spectrum(params: ModelParams, domain: DomainSpec, max_index: int):
    """Rows ``(group, modes, lam, mu_plus, mu_minus)`` sorted by lambda."""
    from memlqr.model import group_modes

    rows = []
    for g, modes in group_modes(laplacian_modes(domain, max_index)):
        lam = modes[0].lam
        mp, mm = mu_roots(lam, params.eta, params.kappa)
        rows.append((g, tuple(m.index for m in modes), lam, complex(mp), complex(mm)))
    return rows


def unstable_count_check(report: SpectrumReport, reference: int | None = None) -> dict:
    """Compare the computed unstable count with an externally quoted value.

    A mismatch is flagged, never corrected.
    """
    out = {"computed_unstable_count": report.unstable_count, "shift": report.shift}
    if reference is not None:
        out["reference_unstable_count"] = int(reference)
        out["matches_reference"] = report.unstable_count == int(reference)
        if not out["matches_reference"]:
            out["flag"] = (
                f"open question: quoted count {reference} disagrees with the computed "
                f"count {report.unstable_count}; the computed value is reported"
            )
    return out


def _x_sq_distance(ca, basis_a, cb, basis_b, grams) -> float:
    (Maa, Saa), (Mbb, Sbb), (Mab, Sab) = grams
    da, db = basis_a.dim, basis_b.dim
    ya, za, yb, zb = ca[:da], ca[da:], cb[:db], cb[db:]
    val = (ya @ Maa @ ya + yb @ Mbb @ yb - 2 * ya @ Mab @ yb
           + za @ Saa @ za + zb @ Sbb @ zb - 2 * za @ Sab @ zb)
    return max(float(val), 0.0)


def semigroup_convergence_probe(params: ModelParams, domain: DomainSpec, x, n_list, t_grid,
                                dt: float = 1e-3) -> dict:
    """Open-loop deviation ``|x_n(t) - x_ref(t)|_X`` against the largest n.

    ``x`` is a pair ``(y, z)`` accepted by :func:`project_state`.  Returns
    ``{"n": [...], "deviations": (len(n)-1, len(t_grid)) array, "max": [...]}``
    where rows follow ``n_list`` without the reference.
    """
    n_list = sorted(n_list)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.abs(t_grid / dt - np.round(t_grid / dt)) > 1e-9):
        raise ValueError("t_grid points must be multiples of dt")
    idx = np.round(t_grid / dt).astype(int)
    T = max(float(t_grid.max()), dt)
    y, z = x
    traj = {}
    for n in n_list:
        basis = Basis.for_domain(domain, n)
        system = assemble(basis, params, [])
        c0 = project_state(basis, y, z, (system.M, system.S))
        rec = integrate(system, None, c0, T=T, dt=dt)
        traj[n] = (basis, rec.states[idx])
    ref_n = n_list[-1]
    ref_basis, ref_states = traj[ref_n]
    rows = []
    for n in n_list[:-1]:
        basis, states = traj[n]
        grams = (cross_grams(basis, basis), cross_grams(ref_basis, ref_basis), cross_grams(basis, ref_basis))
        rows.append([np.sqrt(_x_sq_distance(states[k], basis, ref_states[k], ref_basis, grams))
                     for k in range(len(t_grid))])
    dev = np.array(rows)
    return {"n": n_list[:-1], "reference_n": ref_n, "t": t_grid, "deviations": dev,
            "max": dev.max(axis=1) if dev.size else np.array([])}
