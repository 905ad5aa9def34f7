"""Problem data and closed-form spectral facts.

The state operator acts on pairs (y, z) with z the exponentially weighted
history of y.  On the Dirichlet Laplacian eigenfunction with eigenvalue
``lam`` it reduces to the 2x2 matrix ``[[-eta*lam, -lam], [1, -kappa]]``, so
every Laplacian eigenvalue produces the two roots of

    mu**2 + (kappa + eta*lam)*mu + lam*(1 + eta*kappa) = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import groupby

import numpy as np

from memlqr.errors import InvalidConstant, MaxIndexTooSmall, OmegaInfeasible

PI2 = math.pi**2


class DomainSpec(str, enum.Enum):
    INTERVAL01 = "Interval01"
    UNIT_SQUARE = "UnitSquare"

    @property
    def ndim(self) -> int:
        return 1 if self is DomainSpec.INTERVAL01 else 2

    @classmethod
    def parse(cls, value) -> "DomainSpec":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise InvalidConstant(
                f"unknown domain {value!r}; expected one of "
                f"{[d.value for d in cls]}"
            ) from None


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Physical constants, target decay rate and LQR weights.

    ``Q = q_weight * I`` on the state space X and ``R = r_matrix``.
    """

    eta: float
    kappa: float
    omega: float
    q_weight: float = 1.0
    r_matrix: np.ndarray = field(default_factory=lambda: np.eye(1))

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.r_matrix, dtype=float))
        object.__setattr__(self, "r_matrix", r)

    @property
    def n_inputs(self) -> int:
        return self.r_matrix.shape[0]


Box = tuple  # tuple of (lo, hi) intervals, one per axis


@dataclass(frozen=True)
class InputShape:
    """Piecewise-constant input shape ``sum(amplitude * indicator(box))``."""

    boxes: tuple = ()

    @classmethod
    def box(cls, *intervals, amplitude: float) -> "InputShape":
        return cls(((tuple(tuple(map(float, iv)) for iv in intervals), float(amplitude)),))

    @classmethod
    def zero(cls) -> "InputShape":
        return cls(())

    @property
    def is_zero(self) -> bool:
        return all(amp == 0.0 for _, amp in self.boxes)

    def check(self, domain: DomainSpec) -> None:
        for box, amp in self.boxes:
            if len(box) != domain.ndim:
                raise InvalidConstant(
                    f"box {box} has {len(box)} axes, domain {domain.value} has {domain.ndim}"
                )
            for lo, hi in box:
                if not (0.0 <= lo < hi <= 1.0):
                    raise InvalidConstant(f"box interval ({lo}, {hi}) not inside (0, 1)")
            if not math.isfinite(amp):
                raise InvalidConstant(f"non-finite amplitude {amp}")

    def __call__(self, *coords):
        """Pointwise evaluation (used only by quadrature oracles)."""
        coords = [np.asarray(c, dtype=float) for c in coords]
        out = np.zeros(np.broadcast(*coords).shape)
        for box, amp in self.boxes:
            inside = np.ones_like(out, dtype=bool)
            for (lo, hi), c in zip(box, coords):
                inside &= (c > lo) & (c < hi)
            out = out + amp * inside
        return out


@dataclass(frozen=True)
class LaplacianMode:
    index: tuple  # (j,) in 1D, (j, k) in 2D
    lam: float
    group: int  # j**2 (+ k**2): exact integer label of the eigenspace


@dataclass(frozen=True)
class AEigenpair:
    lam: float
    mu_plus: complex
    mu_minus: complex

    @property
    def max_real(self) -> float:
        return max(self.mu_plus.real, self.mu_minus.real)


@dataclass(frozen=True)
class ModeGroup:
    """All Laplacian modes sharing one eigenvalue, with the induced A-eigenpair."""

    group: int
    lam: float
    modes: tuple
    eigenpair: AEigenpair

    @property
    def multiplicity(self) -> int:
        return len(self.modes)


def omega_zero(params: ModelParams) -> float:
    """Accumulation point ``kappa + 1/eta`` of the slow eigenvalue branch (negated)."""
    return params.kappa + 1.0 / params.eta


def validate(params: ModelParams) -> None:
    for name in ("eta", "kappa", "q_weight"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            raise InvalidConstant(f"{name} must be positive, got {value}")
    r = params.r_matrix
    if r.shape[0] != r.shape[1] or not np.all(np.isfinite(r)):
        raise InvalidConstant(f"R must be a finite square matrix, got shape {r.shape}")
    if not np.allclose(r, r.T, rtol=1e-12, atol=0.0):
        raise InvalidConstant("R must be symmetric")
    if np.linalg.eigvalsh(r).min() <= 0:
        raise InvalidConstant("R must be positive definite")
    if not (math.isfinite(params.omega) and params.omega > 0):
        raise InvalidConstant(f"omega must be positive, got {params.omega}")
    w0 = omega_zero(params)
    if params.omega >= w0:
        raise OmegaInfeasible(
            f"omega={params.omega} >= kappa + 1/eta = {w0}: infinitely many modes "
            "cannot be shifted by a finite-rank feedback"
        )


def laplacian_modes(domain: DomainSpec, max_index: int) -> list[LaplacianMode]:
    """Dirichlet Laplacian modes with every index <= ``max_index``, sorted by eigenvalue."""
    if max_index < 1:
        raise ValueError("max_index must be >= 1")
    domain = DomainSpec.parse(domain)
    if domain.ndim == 1:
        return [LaplacianMode((j,), j * j * PI2, j * j) for j in range(1, max_index + 1)]
    idx = [(j, k) for j in range(1, max_index + 1) for k in range(1, max_index + 1)]
    idx.sort(key=lambda jk: (jk[0] ** 2 + jk[1] ** 2, jk))
    return [LaplacianMode(jk, (jk[0] ** 2 + jk[1] ** 2) * PI2, jk[0] ** 2 + jk[1] ** 2) for jk in idx]


def group_modes(modes) -> list[tuple[int, tuple]]:
    """Group a lambda-sorted mode list into eigenspaces."""
    return [(g, tuple(ms)) for g, ms in groupby(modes, key=lambda m: m.group)]


def mu_roots(lam, eta: float, kappa: float):
    """Vectorized roots of the per-mode characteristic polynomial.

    The real branch uses ``mu_plus = c / mu_minus`` to avoid cancellation.
    """
    lam = np.asarray(lam, dtype=float)
    b = kappa + eta * lam
    c = lam * (1.0 + eta * kappa)
    disc = b * b - 4.0 * c
    sq = np.sqrt(np.abs(disc))
    real = disc >= 0
    mu_minus_real = -(b + sq) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_plus_real = np.where(mu_minus_real != 0, c / mu_minus_real, 0.0)
    mu_plus = np.where(real, mu_plus_real + 0j, -b / 2.0 + 1j * sq / 2.0)
    mu_minus = np.where(real, mu_minus_real + 0j, -b / 2.0 - 1j * sq / 2.0)
    return mu_plus, mu_minus


def a_eigenpair(lam: float, params: ModelParams) -> AEigenpair:
    if lam <= 0:
        raise ValueError("Laplacian eigenvalue must be positive")
    mp, mm = mu_roots(lam, params.eta, params.kappa)
    return AEigenpair(float(lam), complex(mp), complex(mm))


def _real_branch_reached(lam: float, eta: float, kappa: float) -> bool:
    b = kappa + eta * lam
    disc = b * b - 4.0 * lam * (1.0 + eta * kappa)
    vertex = (2.0 + eta * kappa) / eta**2
    return disc > 0 and lam > vertex


def _tail_lambda(domain: DomainSpec, max_index: int) -> float:
    # in 2D, every mode with j**2 + k**2 <= max_index**2 + 1 is enumerated
    if domain.ndim == 1:
        return max_index**2 * PI2
    return (max_index**2 + 1) * PI2


def tail_ok(params: ModelParams, domain: DomainSpec, max_index: int) -> bool:
    lam = _tail_lambda(domain, max_index)
    if not _real_branch_reached(lam, params.eta, params.kappa):
        return False
    mp, mm = mu_roots(lam, params.eta, params.kappa)
    return max(mp.real, mm.real) < -params.omega


def required_max_index(params: ModelParams, domain: DomainSpec) -> int:
    """Smallest enumeration bound for which the tail test passes."""
    domain = DomainSpec.parse(domain)
    vertex = (2.0 + params.eta * params.kappa) / params.eta**2
    n = max(1, int(math.sqrt(vertex / PI2)) - 1)
    while not tail_ok(params, domain, n):
        n += 1
        if n > 10**7:
            raise MaxIndexTooSmall("tail condition never met")
    return n


def unstable_index_set(
    params: ModelParams, domain: DomainSpec, max_index: int | None = None
) -> list[ModeGroup]:
    """Eigenspace groups whose A-eigenvalues lie in ``Re(mu) >= -omega``.

    Beyond the tail eigenvalue the slow root rises monotonically towards
    ``-omega_0 < -omega`` and the fast root decreases, so no group past it can
    qualify.  ``max_index=None`` picks the smallest sufficient bound.
    """
    validate(params)
    domain = DomainSpec.parse(domain)
    if max_index is None:
        max_index = required_max_index(params, domain)
    if not tail_ok(params, domain, max_index):
        raise MaxIndexTooSmall(
            f"max_index={max_index} does not reach the stable real branch; "
            f"need at least {required_max_index(params, domain)}"
        )
    # only groups below the tail can qualify; enumerate those cheaply
    tail_group = round(_tail_lambda(domain, max_index) / PI2)
    j = np.arange(1, max_index + 1)
    if domain.ndim == 1:
        groups = j**2
    else:
        groups = np.unique((j[:, None] ** 2 + j[None, :] ** 2).ravel())
    groups = groups[groups <= tail_group]
    mp, mm = mu_roots(groups * PI2, params.eta, params.kappa)
    hit = (mp.real >= -params.omega) | (mm.real >= -params.omega)
    wanted = set(int(g) for g in groups[hit])
    if not wanted:
        return []
    kmax = math.isqrt(max(wanted))
    out = []
    for g, modes in group_modes(laplacian_modes(domain, min(max_index, kmax))):
        if g in wanted:
            out.append(ModeGroup(g, g * PI2, modes, a_eigenpair(g * PI2, params)))
    return out
