"""Rank test for decay-rate stabilizability of (A, B).

Only the first component of a state enters ``B*``, so for each eigenspace
of the Laplacian that carries a slow A-eigenvalue it suffices to check that
the matrix of input inner products against an eigenspace basis has full
column rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from memlqr.model import DomainSpec, InputShape, LaplacianMode, ModelParams, unstable_index_set

RANK_RTOL = 1e-12


def sine_interval_integral(j, lo: float, hi: float):
    """``int_lo^hi sin(j*pi*x) dx`` for integer ``j >= 1`` (vectorized over j)."""
    j = np.asarray(j, dtype=float)
    return (np.cos(j * math.pi * lo) - np.cos(j * math.pi * hi)) / (j * math.pi)


def bstar_on_mode(shapes, mode) -> np.ndarray:
    """Inner products ``<b_i, psi>`` with an L^2-normalized Dirichlet sine mode.

    ``mode`` is a :class:`LaplacianMode` or a bare index tuple.  In 1D
    ``psi_j = sqrt(2) sin(j pi x)``; in 2D ``psi_jk = 2 sin(j pi x) sin(k pi y)``.
    """
    index = mode.index if isinstance(mode, LaplacianMode) else tuple(mode)
    norm = math.sqrt(2.0) ** len(index)
    out = np.zeros(len(shapes))
    for i, shape in enumerate(shapes):
        total = 0.0
        for box, amp in shape.boxes:
            if len(box) != len(index):
                raise ValueError(f"box {box} does not match mode index {index}")
            factor = amp * norm
            for (lo, hi), j in zip(box, index):
                factor *= float(sine_interval_integral(j, lo, hi))
            total += factor
        out[i] = total
    return out


def numerical_rank(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    tol = max(mat.shape) * sv[0] * RANK_RTOL
    return int(np.sum(sv > tol))


@dataclass(frozen=True)
class GroupRank:
    group: int
    lam: float
    modes: tuple  # index tuples
    matrix: np.ndarray  # m x k
    rank: int

    @property
    def required(self) -> int:
        return len(self.modes)

    @property
    def passed(self) -> bool:
        return self.rank == self.required


@dataclass(frozen=True)
class RankReport:
    omega: float
    groups: tuple

    @property
    def verdict(self) -> bool:
        return all(g.passed for g in self.groups)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "verdict": self.verdict,
            "groups": [
                {
                    "group": g.group,
                    "lambda_over_pi2": g.group,
                    "lambda": g.lam,
                    "modes": [list(ix) for ix in g.modes],
                    "matrix": g.matrix.tolist(),
                    "rank": g.rank,
                    "required_rank": g.required,
                    "pass": g.passed,
                }
                for g in self.groups
            ],
        }


def hautus_check(
    params: ModelParams,
    domain: DomainSpec,
    shapes: list[InputShape],
    max_index: int | None = None,
    basis_mixing=None,
) -> RankReport:
    """Run the eigenspace rank test for every group in the unstable set.

    ``basis_mixing``, if given, maps a group size ``k`` to a ``k x k`` matrix
    applied to the canonical sine basis; it exists to exercise basis
    invariance and is ``None`` in normal use.
    """
    domain = DomainSpec.parse(domain)
    for s in shapes:
        s.check(domain)
    groups = []
    for grp in unstable_index_set(params, domain, max_index):
        cols = [bstar_on_mode(shapes, m) for m in grp.modes]
        mat = np.column_stack(cols) if cols else np.zeros((len(shapes), 0))
        if basis_mixing is not None:
            mat = mat @ basis_mixing(len(grp.modes))
        groups.append(GroupRank(grp.group, grp.lam, tuple(m.index for m in grp.modes), mat, numerical_rank(mat)))
    return RankReport(params.omega, tuple(groups))
