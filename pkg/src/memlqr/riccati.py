"""Finite-dimensional Riccati equations and the resulting feedback gains.

All Riccati work happens in coordinates where the X inner product is the
Euclidean one: with ``G = L L^T`` and ``w = L^T c`` the operator adjoint
becomes the matrix transpose, and the discretized cost ``q <c, c>_X`` becomes
``q |w|^2``.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from memlqr.errors import DomainMismatch, HamiltonianAxisEigenvalue, NoConvergence
from memlqr.galerkin import (
    Basis,
    GalerkinSystem,
    cross_grams,
    evaluate,
    evaluate_derivative,
)

SIGN_TOL = 1e-13
SIGN_MAXITER = 100
REFINE_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class ARESolution:
    P_hat: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int
    closed_loop_abscissa: float
    refinements: int = 0

    def to_dict(self) -> dict:
        return {
            "P_hat": self.P_hat.tolist(),
            "K": self.K.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "refinements": self.refinements,
            "closed_loop_abscissa": self.closed_loop_abscissa,
            "P_hat_norm2": float(np.linalg.norm(self.P_hat, 2)),
        }


@dataclass(frozen=True, eq=False)
class GainRepresenters:
    basis: Basis
    alpha: np.ndarray  # (m, dim) coefficients of the L^2 representers
    beta: np.ndarray  # (m, dim) coefficients of the H^1_0 representers

    def to_dict(self) -> dict:
        return {
            "basis": self.basis.metadata(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }


def orthonormalize(system: GalerkinSystem):
    """Return ``(A_hat, B_hat, Q_hat, L)`` with ``G = L L^T``.

    ``A_hat = L^T A L^{-T}`` and ``B_hat = L^T B``.
    """
    try:
        L = np.linalg.cholesky(system.G)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Gram matrix is not positive definite") from exc
    LT = L.T
    # A_hat = L^T A L^{-T}  <=>  A_hat L^T = L^T A
    A_hat = sla.solve_triangular(L, (LT @ system.A).T, lower=True).T
    B_hat = LT @ system.B
    Q_hat = system.q_weight * np.eye(A_hat.shape[0])
    return A_hat, B_hat, Q_hat, L


def riccati_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of the ARE residual relative to ``|Q|_F``."""
    BRB = B @ np.linalg.solve(R, B.T)
    res = A.T @ P + P @ A - P @ BRB @ P + Q
    return float(np.linalg.norm(res) / np.linalg.norm(Q))


def matrix_sign(Z: np.ndarray, tol: float = SIGN_TOL, maxiter: int = SIGN_MAXITER,
                hamiltonian: bool = False):
    """Newton iteration for the matrix sign function with determinant scaling.

    With ``hamiltonian=True`` the Hamiltonian structure is re-imposed after
    every step (``J Z`` is kept symmetric).
    """
    N = Z.shape[0]
    Z = np.array(Z, dtype=float, copy=True)
    half = N // 2
    for it in range(1, maxiter + 1):
        try:
            with warnings.catch_warnings():
                # exact singularity is detected below and reported as an axis eigenvalue
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(Z, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NoConvergence(f"sign iteration diverged at step {it}") from exc
        diag = np.abs(np.diag(lu))
        if diag.min() <= np.finfo(float).eps * diag.max() * N:
            raise HamiltonianAxisEigenvalue(
                "singular iterate in sign iteration: eigenvalue on or near the imaginary axis"
            )
        # |det Z|^(-1/N), computed from the LU diagonal in log form
        scale = np.exp(-np.mean(np.log(diag)))
        Zinv = sla.lu_solve((lu, piv), np.eye(N))
        Znew = 0.5 * (scale * Z + Zinv / scale)
        if hamiltonian:
            # Z Hamiltonian <=> J Z symmetric, J = [[0, I], [-I, 0]]
            JZ = np.vstack([Znew[half:], -Znew[:half]])
            JZ = 0.5 * (JZ + JZ.T)
            Znew = np.vstack([-JZ[half:], JZ[:half]])
        change = np.linalg.norm(Znew - Z, 1) / np.linalg.norm(Znew, 1)
        Z = Znew
        if change <= tol:
            return Z, it
        # determinant scaling stops helping near convergence; the final
        # quadratic steps are plain Newton
        if change < 1e-2:
            scale = 1.0
    raise NoConvergence(f"sign iteration did not converge in {maxiter} steps")


def _kleinman_step(A, BRB, Q, P):
    Ak = A - BRB @ P
    rhs = -(Q + P @ BRB @ P)
    X = sla.solve_continuous_lyapunov(Ak.T, rhs)
    return 0.5 * (X + X.T)


def solve_are(A_hat_omega, B_hat, Q_hat, R, L=None, tol: float = SIGN_TOL,
              maxiter: int = SIGN_MAXITER, max_refine: int = 1) -> ARESolution:
    """Stabilizing solution of ``A^T P + P A - P B R^-1 B^T P + Q = 0``.

    Solved by the sign function of the Hamiltonian matrix, followed by
    Newton-Kleinman polishing while the relative residual exceeds 1e-10
    (at most ``max_refine`` steps).  ``L`` maps the gain back to raw
    coefficient vectors, ``K = -R^-1 B^T P L^T``; if omitted it is the identity.

    ``closed_loop_abscissa`` is the largest real part of ``A + B K_hat`` for
    the *given* matrix, i.e. of the shifted closed loop when the shift is
    already included in ``A_hat_omega``.
    """
    A = np.asarray(A_hat_omega, dtype=float)
    B = np.atleast_2d(np.asarray(B_hat, dtype=float))
    if B.shape[0] != A.shape[0]:
        B = B.T
    Q = np.atleast_2d(np.asarray(Q_hat, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    N = A.shape[0]
    BRB = B @ np.linalg.solve(R, B.T)
    BRB = 0.5 * (BRB + BRB.T)
    H = np.block([[A, -BRB], [-Q, -A.T]])
    W, iters = matrix_sign(H, tol=tol, maxiter=maxiter, hamiltonian=True)
    # stable invariant subspace = ker(W + I):  [W12; W22 + I] P = -[W11 + I; W21]
    lhs = np.vstack([W[:N, N:], W[N:, N:] + np.eye(N)])
    rhs = -np.vstack([W[:N, :N] + np.eye(N), W[N:, :N]])
    P, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if rank < N:
        raise HamiltonianAxisEigenvalue(
            "stable invariant subspace has wrong dimension: imaginary-axis eigenvalues"
        )
    P = 0.5 * (P + P.T)
    residual = riccati_residual(A, B, Q, R, P)
    refinements = 0
    while residual > REFINE_THRESHOLD and refinements < max_refine:
        P_new = _kleinman_step(A, BRB, Q, P)
        res_new = riccati_residual(A, B, Q, R, P_new)
        refinements += 1
        if not res_new < residual:
            break
        P, residual = P_new, res_new
    K_hat = -np.linalg.solve(R, B.T @ P)
    K = K_hat if L is None else K_hat @ L.T
    abscissa = float(np.max(np.linalg.eigvals(A + B @ K_hat).real))
    return ARESolution(P, K, residual, iters, abscissa, refinements)


def solve_system(system: GalerkinSystem, **kwargs) -> ARESolution:
    """Orthonormalize, shift by omega and solve the Riccati equation.

    The reported abscissa is that of ``A + omega I + B K``, which must be
    negative for the gain to deliver decay rate omega.
    """
    A_hat, B_hat, Q_hat, L = orthonormalize(system)
    A_w = A_hat + system.omega * np.eye(A_hat.shape[0])
    return solve_are(A_w, B_hat, Q_hat, system.r_matrix, L=L, **kwargs)


def representers(solution: ARESolution, system: GalerkinSystem) -> GainRepresenters:
    """Riesz representers: ``K c = <alpha, p>_{L^2} + <beta, q>_{H^1_0}``."""
    K = solution.K if isinstance(solution, ARESolution) else np.atleast_2d(solution)
    d = system.dim
    if K.shape[1] != 2 * d:
        raise ValueError(f"gain has {K.shape[1]} columns, system state has {2 * d}")
    alpha = np.linalg.solve(system.M.T, K[:, :d].T).T
    beta = np.linalg.solve(system.S.T, K[:, d:].T).T
    return GainRepresenters(system.basis, alpha, beta)


def _sq_distance(coef_a, gram_aa, coef_b, gram_bb, gram_ab) -> float:
    val = coef_a @ gram_aa @ coef_a + coef_b @ gram_bb @ coef_b - 2.0 * coef_a @ gram_ab @ coef_b
    return max(float(val), 0.0)


def gain_distance(rep_a: GainRepresenters, rep_b: GainRepresenters):
    """Per-input ``(|alpha_a - alpha_b|_{L^2}, |beta_a - beta_b|_{H^1_0})``.

    Hat representers on different meshes are compared exactly through
    union-mesh Gauss quadrature; sine representers through zero padding.
    """
    ba, bb = rep_a.basis, rep_b.basis
    if ba.kind != bb.kind:
        raise DomainMismatch(f"cannot compare {ba.kind} with {bb.kind}")
    if rep_a.alpha.shape[0] != rep_b.alpha.shape[0]:
        raise ValueError("representers have different numbers of inputs")
    Maa, Saa = cross_grams(ba, ba)
    Mbb, Sbb = cross_grams(bb, bb)
    Mab, Sab = cross_grams(ba, bb)
    out = []
    for i in range(rep_a.alpha.shape[0]):
        da = _sq_distance(rep_a.alpha[i], Maa, rep_b.alpha[i], Mbb, Mab)
        db = _sq_distance(rep_a.beta[i], Saa, rep_b.beta[i], Sbb, Sab)
        out.append((np.sqrt(da), np.sqrt(db)))
    return out


# -- export ------------------------------------------------------------------

def write_solution_json(solution: ARESolution, path) -> None:
    with open(path, "w") as fh:
        json.dump(solution.to_dict(), fh, indent=1, sort_keys=True)


def write_representer_csvs(rep: GainRepresenters, outdir) -> list:
    """Sample representers on a uniform grid (1D: 1001 points; 2D: 101 x 101)."""
    from pathlib import Path

    outdir = Path(outdir)
    paths = []
    basis = rep.basis
    for i in range(rep.alpha.shape[0]):
        for name, coeffs in (("alpha", rep.alpha[i]), ("beta", rep.beta[i])):
            path = outdir / f"representers_{name}_{i + 1}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                if basis.kind == "Hat1D":
                    x = np.linspace(0.0, 1.0, 1001)
                    vals = evaluate(basis, coeffs, x)
                    deriv = evaluate_derivative(basis, coeffs, x)
                    w.writerow(["xi", name, f"d{name}_dxi"])
                    for row in zip(x, vals, deriv):
                        w.writerow([f"{v:.17g}" for v in row])
                else:
                    g = np.linspace(0.0, 1.0, 101)
                    X, Y = np.meshgrid(g, g, indexing="ij")
                    vals = evaluate(basis, coeffs, X, Y)
                    w.writerow(["xi1", "xi2", name])
                    for row in zip(X.ravel(), Y.ravel(), vals.ravel()):
                        w.writerow([f"{v:.17g}" for v in row])
            paths.append(path)
    return paths
