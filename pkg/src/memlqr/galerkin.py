"""Galerkin realization of the state and input operators.

States are coefficient vectors ``c = (y, z)`` over a basis of H_n, so a
state has ``2 * dim`` entries.  The X = L^2 x H^1_0 inner product is carried
explicitly by the Gram matrix ``G = blockdiag(M, S)``, with M the L^2 mass
matrix and S the H^1_0 (stiffness) Gram of the basis.

Two bases are supported: interior hat functions on a uniform mesh of (0, 1)
and tensor sine eigenfunctions on the unit square.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from memlqr.errors import DomainMismatch
from memlqr.model import PI2, DomainSpec, InputShape, ModelParams
from memlqr.stabilizability import bstar_on_mode

GAUSS_POINTS = 5


@dataclass(frozen=True)
class Basis:
    kind: str  # "Hat1D" | "Sine2D"
    n: int

    def __post_init__(self):
        if self.kind == "Hat1D":
            if self.n < 3:
                raise ValueError("Hat1D needs n >= 3")
        elif self.kind == "Sine2D":
            if self.n < 1:
                raise ValueError("Sine2D needs n >= 1")
        else:
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @classmethod
    def for_domain(cls, domain: DomainSpec, n: int) -> "Basis":
        domain = DomainSpec.parse(domain)
        return cls("Hat1D" if domain.ndim == 1 else "Sine2D", n)

    @property
    def domain(self) -> DomainSpec:
        return DomainSpec.INTERVAL01 if self.kind == "Hat1D" else DomainSpec.UNIT_SQUARE

    @property
    def dim(self) -> int:
        return self.n - 1 if self.kind == "Hat1D" else self.n * self.n

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes (Hat1D)."""
        return np.arange(1, self.n) / self.n

    @property
    def indices(self) -> np.ndarray:
        """``(dim, 2)`` array of (j, k) in lexicographic order (Sine2D)."""
        j, k = np.meshgrid(np.arange(1, self.n + 1), np.arange(1, self.n + 1), indexing="ij")
        return np.column_stack([j.ravel(), k.ravel()])

    def metadata(self) -> dict:
        meta = {"kind": self.kind, "n": self.n, "dim": self.dim}
        if self.kind == "Sine2D":
            meta["ordering"] = "lexicographic (j, k)"
        else:
            meta["nodes"] = "j/n, j = 1..n-1"
        return meta


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    basis: Basis
    M: np.ndarray
    S: np.ndarray
    A: np.ndarray
    B: np.ndarray
    q_weight: float
    r_matrix: np.ndarray
    omega: float
    params: ModelParams = field(repr=False, default=None)

    @property
    def G(self) -> np.ndarray:
        return sla.block_diag(self.M, self.S)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


def assemble_grams(basis: Basis):
    """Mass and stiffness matrices ``(M, S)`` of the basis."""
    d = basis.dim
    if basis.kind == "Hat1D":
        h = basis.h
        M = (2 * h / 3) * np.eye(d) + (h / 6) * (np.eye(d, k=1) + np.eye(d, k=-1))
        S = (2 / h) * np.eye(d) - (1 / h) * (np.eye(d, k=1) + np.eye(d, k=-1))
        return M, S
    jk = basis.indices
    return np.eye(d), np.diag((jk[:, 0] ** 2 + jk[:, 1] ** 2) * PI2)


def _solve_mass(basis: Basis, M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if basis.kind == "Sine2D":
        return np.array(rhs, dtype=float, copy=True)
    return sla.cho_solve(sla.cho_factor(M), rhs)


def assemble_state(basis: Basis, params: ModelParams, grams=None) -> np.ndarray:
    """State matrix ``[[-eta M^-1 S, -M^-1 S], [I, -kappa I]]``.

    Obtained from ``-c2^T G A c1 = a(c1, c2)`` with
    ``a((y, z), (p, q)) = p^T S (eta y + z) - q^T S (y - kappa z)``.
    """
    M, S = grams if grams is not None else assemble_grams(basis)
    d = basis.dim
    MiS = _solve_mass(basis, M, S)
    A = np.empty((2 * d, 2 * d))
    A[:d, :d] = -params.eta * MiS
    A[:d, d:] = -MiS
    A[d:, :d] = np.eye(d)
    A[d:, d:] = -params.kappa * np.eye(d)
    return A


# -- loads -------------------------------------------------------------------

def hat_interval_integral(n: int, lo: float, hi: float) -> np.ndarray:
    """``int_lo^hi phi_j`` for all interior hats ``j = 1..n-1`` (exact)."""
    j = np.arange(1, n)
    left, mid, right = (j - 1) / n, j / n, (j + 1) / n
    # rising part n*(x - left) on [left, mid]
    s = np.clip(lo, left, mid)
    t = np.clip(hi, left, mid)
    rise = 0.5 * n * ((t - left) ** 2 - (s - left) ** 2)
    # falling part n*(right - x) on [mid, right]
    s = np.clip(lo, mid, right)
    t = np.clip(hi, mid, right)
    fall = 0.5 * n * ((right - s) ** 2 - (right - t) ** 2)
    return rise + fall


def shape_loads(basis: Basis, shape: InputShape) -> np.ndarray:
    """``(<b, phi_j>_{L^2})_j`` for a box-constant shape, in closed form."""
    if basis.kind == "Hat1D":
        out = np.zeros(basis.dim)
        for box, amp in shape.boxes:
            if len(box) != 1:
                raise DomainMismatch("Hat1D basis needs 1D boxes")
            (lo, hi), = box
            out += amp * hat_interval_integral(basis.n, lo, hi)
        return out
    return np.array([bstar_on_mode([shape], tuple(ix))[0] for ix in basis.indices])


def assemble_input(basis: Basis, shapes, M: np.ndarray | None = None) -> np.ndarray:
    """Input matrix: column i is the X-projection of ``(b_i, 0)``."""
    if M is None:
        M, _ = assemble_grams(basis)
    d = basis.dim
    B = np.zeros((2 * d, len(shapes)))
    if shapes:
        loads = np.column_stack([shape_loads(basis, s) for s in shapes])
        B[:d] = _solve_mass(basis, M, loads)
    return B


def assemble(basis: Basis, params: ModelParams, shapes) -> GalerkinSystem:
    for s in shapes:
        s.check(basis.domain)
    M, S = assemble_grams(basis)
    A = assemble_state(basis, params, (M, S))
    B = assemble_input(basis, shapes, M)
    return GalerkinSystem(basis, M, S, A, B, params.q_weight, params.r_matrix, params.omega, params)


# -- quadrature (1D) and evaluation ------------------------------------------

def gauss_grid(breaks: np.ndarray, npts: int = GAUSS_POINTS):
    """Composite Gauss-Legendre nodes/weights over consecutive ``breaks``."""
    x, w = np.polynomial.legendre.leggauss(npts)
    a, b = breaks[:-1, None], breaks[1:, None]
    pts = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    wts = (0.5 * (b - a) * w).ravel()
    return pts, wts


def hat_values(n: int, x: np.ndarray) -> np.ndarray:
    """``(len(x), n-1)`` matrix of hat values."""
    nodes = np.arange(1, n) / n
    return np.clip(1.0 - n * np.abs(x[:, None] - nodes[None, :]), 0.0, None)


def hat_derivatives(n: int, x: np.ndarray) -> np.ndarray:
    """Hat derivatives at points that are never mesh nodes."""
    nodes = np.arange(1, n) / n
    diff = x[:, None] - nodes[None, :]
    inside = np.abs(diff) < 1.0 / n
    return np.where(inside, -n * np.sign(diff), 0.0)


def union_breaks(*ns: int) -> np.ndarray:
    pts = np.concatenate([np.arange(n + 1) / n for n in ns])
    pts = np.unique(np.round(pts, 15))
    return pts


def cross_grams(basis_a: Basis, basis_b: Basis):
    """L^2 and H^1_0 cross Gram matrices ``(<phi_a_i, phi_b_j>)``.

    Hat pairs are integrated exactly on the union mesh; sine pairs are
    orthonormal so the cross Gram is a zero-padded identity.
    """
    if basis_a.kind != basis_b.kind:
        raise DomainMismatch(f"{basis_a.kind} vs {basis_b.kind}")
    if basis_a.kind == "Hat1D":
        x, w = gauss_grid(union_breaks(basis_a.n, basis_b.n))
        va, vb = hat_values(basis_a.n, x), hat_values(basis_b.n, x)
        da, db = hat_derivatives(basis_a.n, x), hat_derivatives(basis_b.n, x)
        return va.T @ (w[:, None] * vb), da.T @ (w[:, None] * db)
    ia = {tuple(ix): r for r, ix in enumerate(basis_a.indices)}
    Ml = np.zeros((basis_a.dim, basis_b.dim))
    Sl = np.zeros_like(Ml)
    for c, ix in enumerate(basis_b.indices):
        r = ia.get(tuple(ix))
        if r is not None:
            Ml[r, c] = 1.0
            Sl[r, c] = (ix[0] ** 2 + ix[1] ** 2) * PI2
    return Ml, Sl


def evaluate(basis: Basis, coeffs: np.ndarray, *coords) -> np.ndarray:
    """Evaluate ``sum_j coeffs_j phi_j`` at points."""
    if basis.kind == "Hat1D":
        x = np.asarray(coords[0], dtype=float)
        return hat_values(basis.n, x.ravel()).dot(coeffs).reshape(x.shape)
    x, y = (np.asarray(c, dtype=float) for c in coords)
    jk = basis.indices
    sx = np.sin(np.pi * np.multiply.outer(x, jk[:, 0]))
    sy = np.sin(np.pi * np.multiply.outer(y, jk[:, 1]))
    return 2.0 * (sx * sy).dot(coeffs)


def evaluate_derivative(basis: Basis, coeffs: np.ndarray, x) -> np.ndarray:
    """Piecewise-constant derivative of a Hat1D function (right-continuous at nodes)."""
    if basis.kind != "Hat1D":
        raise DomainMismatch("derivative evaluation is 1D only")
    x = np.asarray(x, dtype=float)
    full = np.concatenate([[0.0], coeffs, [0.0]])
    cell = np.clip(np.floor(x * basis.n).astype(int), 0, basis.n - 1)
    return (full[cell + 1] - full[cell]) * basis.n


# -- projections ---------------------------------------------------------------

def _l2_loads(basis: Basis, f) -> np.ndarray:
    if f is None:
        return np.zeros(basis.dim)
    if isinstance(f, InputShape):
        return shape_loads(basis, f)
    if np.isscalar(f):
        box = ((0.0, 1.0),) * basis.domain.ndim
        return shape_loads(basis, InputShape(((box, float(f)),)))
    return quadrature_loads(basis, f)


def quadrature_loads(basis: Basis, f, npts: int = GAUSS_POINTS) -> np.ndarray:
    """``<f, phi_j>_{L^2}`` by composite Gauss-Legendre quadrature."""
    if basis.kind == "Hat1D":
        x, w = gauss_grid(np.arange(basis.n + 1) / basis.n, npts)
        return hat_values(basis.n, x).T @ (w * f(x))
    # resolve every sine in the basis: cells of width 1/(2n) in each direction
    cells = 2 * basis.n + 2
    x, w = gauss_grid(np.linspace(0.0, 1.0, cells + 1), npts)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w) * f(X, Y)
    jk = basis.indices
    sx = np.sin(np.pi * np.outer(x, np.arange(1, basis.n + 1)))
    inner = sx.T @ W @ sx  # (j, k) table
    return 2.0 * inner[jk[:, 0] - 1, jk[:, 1] - 1]


def project_state(basis: Basis, y=None, z=None, grams=None) -> np.ndarray:
    """X-orthogonal projection of ``(y, z)`` onto ``H_n x H_n``.

    ``y`` may be ``None``, a constant, an :class:`InputShape`, or a callable.
    ``z`` must vanish on the boundary; it is ``None`` or a callable.  In 1D
    the H^1_0 projection onto hats is nodal interpolation; in the sine basis
    it coincides with the L^2 coefficients.
    """
    M, S = grams if grams is not None else assemble_grams(basis)
    d = basis.dim
    c = np.zeros(2 * d)
    c[:d] = _solve_mass(basis, M, _l2_loads(basis, y))
    if z is not None:
        if basis.kind == "Hat1D":
            c[d:] = z(basis.nodes)
        else:
            c[d:] = quadrature_loads(basis, z)
    return c


def x_inner(system: GalerkinSystem, c1: np.ndarray, c2: np.ndarray) -> float:
    c1, c2 = np.asarray(c1, dtype=float), np.asarray(c2, dtype=float)
    d = system.dim
    if c1.shape != (2 * d,) or c2.shape != (2 * d,):
        raise ValueError(f"expected vectors of length {2 * d}, got {c1.shape} and {c2.shape}")
    return float(c1[:d] @ system.M @ c2[:d] + c1[d:] @ system.S @ c2[d:])


def bilinear_form(system: GalerkinSystem, c1: np.ndarray, c2: np.ndarray) -> float:
    """Direct evaluation of the form on coefficient vectors."""
    d, S = system.dim, system.S
    eta, kappa = system.params.eta, system.params.kappa
    y, z = c1[:d], c1[d:]
    p, q = c2[:d], c2[d:]
    return float(p @ S @ (eta * y + z) - q @ S @ (y - kappa * z))


# -- export ------------------------------------------------------------------

def export_npz(system: GalerkinSystem, path) -> None:
    np.savez(
        path,
        M=system.M, S=system.S, A=system.A, B=system.B, G=system.G,
        kind=system.basis.kind, n=system.basis.n,
        q_weight=system.q_weight, r_matrix=system.r_matrix, omega=system.omega,
    )


def export_csv(matrix: np.ndarray, path, basis: Basis, name: str) -> None:
    meta = basis.metadata()
    with open(path, "w", newline="") as fh:
        fh.write(f"# {name} basis={meta['kind']} n={meta['n']} dim={meta['dim']}\n")
        writer = csv.writer(fh)
        for row in np.atleast_2d(matrix):
            writer.writerow([f"{v:.17g}" for v in row])
