"""Time integration of the Galerkin system, decay-rate fits and LQR cost."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from memlqr.errors import SingularStepMatrix
from memlqr.galerkin import GalerkinSystem


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray  # (len(times), 2*dim)
    y_norm: np.ndarray
    x_norm: np.ndarray
    controls: np.ndarray  # (len(times), m); zeros in open loop

    def to_csv(self, path) -> None:
        m = self.controls.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y_norm", "x_norm"] + [f"u{i + 1}" for i in range(m)])
            for k in range(len(self.times)):
                row = [self.times[k], self.y_norm[k], self.x_norm[k], *self.controls[k]]
                w.writerow([f"{v:.17g}" for v in row])


def integrate(system: GalerkinSystem, K=None, c0=None, T: float = 10.0, dt: float = 1e-3,
              shift: float = 0.0, save_every: int = 1) -> TrajectoryRecord:
    """Crank-Nicolson integration of ``c' = (A + shift I + B K) c``.

    ``K=None`` is the open loop.  ``shift`` defaults to 0 (the physical
    system); ``shift=omega`` integrates the shifted system whose cost the
    Riccati solution prices.  Every ``save_every``-th step is recorded.
    """
    if dt <= 0 or T < dt:
        raise ValueError(f"need dt > 0 and T >= dt (got T={T}, dt={dt})")
    d2 = 2 * system.dim
    m = system.n_inputs
    F = system.A + shift * np.eye(d2)
    if K is not None:
        K = np.atleast_2d(np.asarray(K, dtype=float))
        F = F + system.B @ K
    c = np.zeros(d2) if c0 is None else np.array(c0, dtype=float)
    eye = np.eye(d2)
    lu, piv = sla.lu_factor(eye - 0.5 * dt * F)
    udiag = np.abs(np.diag(lu))
    if udiag.min() <= np.finfo(float).eps * max(udiag.max(), 1.0):
        raise SingularStepMatrix(f"I - dt/2 (A + BK) is singular for dt={dt}")
    step = sla.lu_solve((lu, piv), eye + 0.5 * dt * F)

    nsteps = int(round(T / dt))
    nrec = nsteps // save_every + 1
    states = np.empty((nrec, d2))
    states[0] = c
    r = 1
    for k in range(1, nsteps + 1):
        c = step @ c
        if k % save_every == 0:
            states[r] = c
            r += 1
    states = states[:r]
    times = np.arange(r) * dt * save_every

    d = system.dim
    ys, zs = states[:, :d], states[:, d:]
    y_sq = np.einsum("ij,jk,ik->i", ys, system.M, ys)
    z_sq = np.einsum("ij,jk,ik->i", zs, system.S, zs)
    controls = states @ K.T if K is not None else np.zeros((r, m))
    return TrajectoryRecord(
        times, states, np.sqrt(np.maximum(y_sq, 0.0)), np.sqrt(np.maximum(y_sq + z_sq, 0.0)), controls
    )


def decay_rate(record: TrajectoryRecord, window=None, norm: str = "x") -> float:
    """Negated least-squares slope of ``log |x(t)|`` over ``window``.

    The default window is ``[0.2 T, 0.8 T]``.  For oscillatory responses pass
    a window spanning whole oscillation periods.
    """
    t = record.times
    values = record.x_norm if norm == "x" else record.y_norm
    if window is None:
        window = (0.2 * t[-1], 0.8 * t[-1])
    t1, t2 = window
    sel = (t >= t1 - 1e-12) & (t <= t2 + 1e-12)
    if t2 <= t1 or sel.sum() < 2:
        raise ValueError(f"degenerate fit window {window}")
    if np.any(values[sel] <= 0):
        raise ValueError("norm vanishes inside the fit window")
    slope = np.polyfit(t[sel], np.log(values[sel]), 1)[0]
    return float(-slope)


def cost_functional(record: TrajectoryRecord, q_weight: float, R, G) -> float:
    """Trapezoidal ``int q c^T G c + u^T R u dt`` over the recorded horizon."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    c = record.states
    u = record.controls
    integrand = q_weight * np.einsum("ij,jk,ik->i", c, G, c) + np.einsum("ij,jk,ik->i", u, R, u)
    return float(np.trapezoid(integrand, record.times))
