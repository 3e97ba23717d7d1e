"""Numerical integration of the one-body, two-body, and extended
(algebraic-variable) systems, with conserved-quantity monitoring.

The integrator is an adaptive embedded Runge-Kutta pair (scipy's RK45 by
default, DOP853 selectable) with dense output.  A symplectic scheme is not
used: the extended system is Poisson with a nonconstant structure matrix,
so one explicit adaptive scheme serves all three systems uniformly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from .heisenmodel import (
    CollisionError,
    GroupElement,
    PhaseState2B,
    SystemSpec,
    first_integrals,
    hamiltonian,
    rho,
)

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "MonitorReport",
    "ExtendedState",
    "PoissonMatrix",
    "IntegrationError",
    "hamilton_rhs",
    "integrate",
    "monitor_conserved",
    "extended_poisson_build",
    "integrate_extended",
    "trajectory_to_csv",
    "max_line_deviation",
]


class IntegrationError(RuntimeError):
    """Integration failure (step-size underflow near collision); carries the
    last good state in ``last_state``."""

    def __init__(self, msg, last_t=None, last_state=None):
        super().__init__(msg)
        self.last_t = last_t
        self.last_state = last_state


@dataclass(frozen=True)
class IntegratorConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_step: float = np.inf
    t_end: float = 10.0
    dense: bool = True
    method: str = "RK45"
    rho_min: float = 1e-8

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), dim)
    stats: dict
    sol: object = None  # dense-output interpolant (scipy OdeSolution)
    flagged_event: str | None = None

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self.y.shape[0] != self.t.size:
            raise ValueError("time/state sample count mismatch")

    @property
    def dim(self) -> int:
        return self.y.shape[1]

    def at(self, t):
        if self.sol is None:
            raise ValueError("trajectory has no dense output")
        return np.atleast_1d(self.sol(t)).T


# ---------------------------------------------------------------------------
# Hamiltonian flow
# ---------------------------------------------------------------------------

def hamilton_rhs(spec: SystemSpec, s) -> np.ndarray:
    """Canonical vector field (dH/dp, -dH/dq) in the flat array ordering."""
    a = np.asarray(s, dtype=float) if not hasattr(s, "to_array") else s.to_array()
    if spec.kind == "one-body":
        r = rho(GroupElement(a[0], a[1], a[2]))
    else:
        r = rho(PhaseState2B.from_array(a).relative)
    if r == 0.0:
        raise CollisionError("vector field evaluated at the collision set")
    return np.asarray(spec._rhs_fn(*a), dtype=float)


def hamilton_jacobian(spec: SystemSpec, s) -> np.ndarray:
    """Jacobian matrix of hamilton_rhs at s (generated symbolically)."""
    a = np.asarray(s, dtype=float) if not hasattr(s, "to_array") else s.to_array()
    return np.asarray(spec._jac_fn(*a), dtype=float)


def integrate(spec: SystemSpec, s0, cfg: IntegratorConfig) -> Trajectory:
    """Adaptive integration of the canonical equations up to cfg.t_end.

    Terminates early with a flagged event when rho drops below cfg.rho_min;
    step-size underflow raises IntegrationError with the last good state.
    """
    a0 = s0.to_array() if hasattr(s0, "to_array") else np.asarray(s0, dtype=float)

    def f(t, y):
        return np.asarray(spec._rhs_fn(*y), dtype=float)

    def near_collision(t, y):
        if spec.kind == "one-body":
            r = rho(GroupElement(y[0], y[1], y[2]))
        else:
            r = rho(PhaseState2B.from_array(y).relative)
        return r - cfg.rho_min

    near_collision.terminal = True
    near_collision.direction = -1

    res = solve_ivp(
        f,
        (0.0, cfg.t_end),
        a0,
        method=cfg.method,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        dense_output=cfg.dense,
        events=near_collision,
    )
    if res.status == -1:
        raise IntegrationError(
            f"integration failed: {res.message}",
            last_t=res.t[-1] if res.t.size else 0.0,
            last_state=res.y[:, -1] if res.t.size else a0,
        )
    stats = {
        "nfev": int(res.nfev),
        "steps": int(res.t.size - 1),
        "status": int(res.status),
        "message": str(res.message),
    }
    flagged = "collision_guard" if res.status == 1 else None
    return Trajectory(
        t=res.t, y=res.y.T, stats=stats, sol=res.sol, flagged_event=flagged
    )


# ---------------------------------------------------------------------------
# Conserved-quantity monitoring
# ---------------------------------------------------------------------------

@dataclass
class MonitorReport:
    drifts: dict  # per-integral max |value - value(0)|
    djdt_residual_max: float
    h_initial: float
    j_constant_at_zero_energy: bool | None  # None when H != 0
    j_drift: float

    def to_json(self) -> dict:
        return {
            "drifts": {k: float(v) for k, v in self.drifts.items()},
            "djdt_residual_max": float(self.djdt_residual_max),
            "h_initial": float(self.h_initial),
            "j_constant_at_zero_energy": self.j_constant_at_zero_energy,
            "j_drift": float(self.j_drift),
        }


def monitor_conserved(
    spec: SystemSpec, traj: Trajectory, n_samples: int = 400, h0_tol: float = 1e-9
) -> MonitorReport:
    """Drift of the known integrals and the dJ/dt = 2H residual.

    The dJ/dt residual differentiates J along the dense output (central
    differences on the interpolant, not on the raw samples)."""
    keys = (
        ["H", "p_theta"] if spec.kind == "one-body" else ["H", "I1", "I2", "I3", "I4"]
    )
    ts = np.linspace(traj.t[0], traj.t[-1], n_samples)
    states = traj.at(ts) if traj.sol is not None else traj.y
    if traj.sol is None:
        ts = traj.t
    vals = {k: [] for k in keys + ["J"]}
    for row in states:
        fi = first_integrals(spec, row)
        for k in vals:
            vals[k].append(fi[k])
    drifts = {k: float(np.max(np.abs(np.array(v) - v[0]))) for k, v in vals.items() if k != "J"}
    j_arr = np.array(vals["J"])
    j_drift = float(np.max(np.abs(j_arr - j_arr[0])))

    # dJ/dt - 2H via dense-output differentiation
    djdt_res = 0.0
    if traj.sol is not None:
        h = max(1e-5, (ts[-1] - ts[0]) * 1e-6)
        inner = ts[(ts > ts[0] + h) & (ts < ts[-1] - h)]
        for t in inner:
            jp = first_integrals(spec, traj.at(t + h))["J"]
            jm = first_integrals(spec, traj.at(t - h))["J"]
            hh = hamiltonian(spec, traj.at(t))
            djdt_res = max(djdt_res, abs((jp - jm) / (2 * h) - 2 * hh))

    h0 = vals["H"][0]
    j_const = bool(j_drift < 1e-8) if abs(h0) < h0_tol else None
    return MonitorReport(
        drifts=drifts,
        djdt_residual_max=float(djdt_res),
        h_initial=float(h0),
        j_constant_at_zero_energy=j_const,
        j_drift=j_drift,
    )


def max_line_deviation(points: np.ndarray) -> float:
    """Max orthogonal distance of a point cloud from its best-fit line."""
    pts = np.asarray(points, dtype=float)
    center = pts.mean(axis=0)
    d = pts - center
    _, _, vt = np.linalg.svd(d, full_matrices=False)
    direction = vt[0]
    residual = d - np.outer(d @ direction, direction)
    return float(np.max(np.linalg.norm(residual, axis=1))) if pts.shape[0] else 0.0


# ---------------------------------------------------------------------------
# Extended Poisson system (algebraic Hamiltonian lift)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtendedState:
    """State (q, p, u) of the lifted system; on the physical leaf P(u) = 0."""

    q: tuple
    p: tuple
    u: float

    def to_array(self) -> np.ndarray:
        return np.array(list(self.q) + list(self.p) + [self.u], dtype=float)

    @staticmethod
    def from_array(a, n: int) -> "ExtendedState":
        a = [float(v) for v in a]
        return ExtendedState(tuple(a[:n]), tuple(a[n : 2 * n]), a[2 * n])


class PoissonMatrix:
    """The degenerate (2n+1)-dimensional structure matrix J(x) of the lift.

    Antisymmetric at every point, rank 2n at regular points; the minimal
    polynomial P(u) is the only Casimir."""

    def __init__(self, n, grad_qP_fn, du_P_fn):
        self.n = n
        self._grad_qP = grad_qP_fn
        self._du_P = du_P_fn

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        q, u = x[:n], x[2 * n]
        gq = np.asarray(self._grad_qP(*q, u), dtype=float).reshape(n)
        du = float(self._du_P(*q, u))
        if du == 0.0:
            raise ZeroDivisionError("branch point: dP/du = 0")
        col = gq / du
        J = np.zeros((2 * n + 1, 2 * n + 1))
        J[:n, n : 2 * n] = np.eye(n)
        J[n : 2 * n, :n] = -np.eye(n)
        J[n : 2 * n, 2 * n] = col
        J[2 * n, n : 2 * n] = -col
        return J


class ExtendedSystem:
    """Bundle (J, K, P) for the lifted Kepler-type system."""

    def __init__(self, n, J: PoissonMatrix, K_fn, gradK_fn, P_fn, P_expr, K_expr):
        self.n = n
        self.J = J
        self._K = K_fn
        self._gradK = gradK_fn
        self._P = P_fn
        self.P_expr = P_expr
        self.K_expr = K_expr

    def K(self, x) -> float:
        return float(self._K(*np.asarray(x, dtype=float)))

    def grad_K(self, x) -> np.ndarray:
        return np.asarray(self._gradK(*np.asarray(x, dtype=float)), dtype=float)

    def P(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self._P(*x[: self.n], x[2 * self.n]))

    def grad_P(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        g = np.zeros(2 * n + 1)
        g[:n] = np.asarray(self.J._grad_qP(*x[:n], x[2 * n]), dtype=float).reshape(n)
        g[2 * n] = float(self.J._du_P(*x[:n], x[2 * n]))
        return g

    def rhs(self, x) -> np.ndarray:
        return self.J(x) @ self.grad_K(x)

    def bracket(self, f, g, x, grad_f=None, grad_g=None, h_scale: float = 1.0) -> float:
        """Bracket grad(f)^T J grad(g); gradients are central differences
        unless analytic ones are supplied."""
        x = np.asarray(x, dtype=float)
        base = float(np.cbrt(np.finfo(float).eps)) * h_scale

        def grad(fn):
            out = np.empty_like(x)
            for i in range(x.size):
                h = base * max(1.0, abs(x[i]))
                xp, xm = x.copy(), x.copy()
                xp[i] += h
                xm[i] -= h
                out[i] = (fn(xp) - fn(xm)) / (2 * h)
            return out

        gf = np.asarray(grad_f(x), dtype=float) if grad_f is not None else grad(f)
        gg = np.asarray(grad_g(x), dtype=float) if grad_g is not None else grad(g)
        return float(gf @ self.J(x) @ gg)


def extended_poisson_build(spec: SystemSpec) -> ExtendedSystem:
    """Lift of the one-body algebraic Hamiltonian to rational (q, p, u) data.

    P(u) = u^2 - ((x^2+y^2)^2 + 16 z^2) and K(q, p, u) is the kinetic energy
    plus W(z, u), so K is rational whenever W is."""
    if spec.kind != "one-body":
        raise ValueError("extended lift implemented for the one-body system")
    x, y, z, px, py, pz, u = sp.symbols("x y z p_x p_y p_z u", real=True)
    from .heisenmodel import _RHO, _Z

    P = u**2 - ((x**2 + y**2) ** 2 + 16 * z**2)
    K = ((px - y * pz / 2) ** 2 + (py + x * pz / 2) ** 2) / 2 + spec.potential.expr.subs(
        {_Z: z, _RHO: u}, simultaneous=True
    )
    xs = (x, y, z, px, py, pz, u)
    grad_qP = [sp.diff(P, v) for v in (x, y, z)]
    J = PoissonMatrix(
        3,
        sp.lambdify((x, y, z, u), grad_qP, modules="numpy"),
        sp.lambdify((x, y, z, u), sp.diff(P, u), modules="numpy"),
    )
    gradK = [sp.diff(K, v) for v in xs]
    return ExtendedSystem(
        3,
        J,
        sp.lambdify(xs, K, modules="numpy"),
        sp.lambdify(xs, gradK, modules="numpy"),
        sp.lambdify((x, y, z, u), P, modules="numpy"),
        P,
        K,
    )


def integrate_extended(
    sys: ExtendedSystem,
    x0,
    cfg: IntegratorConfig,
    leaf_threshold: float = 1e-6,
    renormalize_u: bool = False,
) -> Trajectory:
    """Integrate xdot = J(x) grad K(x).

    The Casimir residual P(u(t)) is tracked as a diagnostic; by default
    drift is measured, not corrected.  With renormalize_u=True, u is reset
    to the positive root of P at every accepted sample."""
    a0 = x0.to_array() if hasattr(x0, "to_array") else np.asarray(x0, dtype=float)
    if abs(sys.P(a0)) > 1e-12:
        raise ValueError("initial state is off the physical leaf P(u) = 0")

    n = sys.n

    def f(t, xarr):
        if renormalize_u:
            xarr = xarr.copy()
            q = xarr[:n]
            xarr[2 * n] = math.sqrt(
                float(xarr[2 * n] ** 2 - sys._P(*q, xarr[2 * n]))
            )
        return sys.rhs(xarr)

    res = solve_ivp(
        f,
        (0.0, cfg.t_end),
        a0,
        method=cfg.method,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        dense_output=cfg.dense,
    )
    if res.status == -1:
        raise IntegrationError(
            f"extended integration failed: {res.message}",
            last_t=res.t[-1] if res.t.size else 0.0,
            last_state=res.y[:, -1] if res.t.size else a0,
        )
    p_res = max(abs(sys.P(res.y[:, k])) for k in range(res.t.size))
    flagged = "leaf_departure" if p_res > leaf_threshold else None
    stats = {
        "nfev": int(res.nfev),
        "steps": int(res.t.size - 1),
        "max_casimir_residual": float(p_res),
        "status": int(res.status),
    }
    return Trajectory(
        t=res.t, y=res.y.T, stats=stats, sol=res.sol, flagged_event=flagged
    )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def trajectory_to_csv(spec: SystemSpec, traj: Trajectory, path, header_meta=None):
    """CSV with t, state components, then H, p_theta/I_k, J; flushed per row."""
    keys = (
        ["H", "p_theta", "J"]
        if spec.kind == "one-body"
        else ["H", "I1", "I2", "I3", "I4", "J"]
    )
    if spec.kind == "one-body":
        names = ["x", "y", "z", "p_x", "p_y", "p_z"]
    else:
        names = [
            "x1", "y1", "z1", "x2", "y2", "z2",
            "p_x1", "p_y1", "p_z1", "p_x2", "p_y2", "p_z2",
        ]
    with open(path, "w", newline="") as fh:
        if header_meta:
            fh.write("# " + json.dumps(header_meta, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["t"] + names + keys)
        for k in range(traj.t.size):
            row = traj.y[k]
            fi = first_integrals(spec, row)
            w.writerow(
                [repr(float(traj.t[k]))]
                + [repr(float(v)) for v in row]
                + [repr(float(fi[key])) for key in keys]
            )
            fh.flush()
