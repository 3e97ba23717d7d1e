"""Variational equations along particular solutions, changes of variables,
gauge transformations, and reduction to scalar equations.

The builders return exact data (entries in Q(i)[t] or Q(i)(t)) whenever
their inputs are exact; numeric evaluation wraps the exact form.  Along a
numerically integrated trajectory the variational matrix is sampled
instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import sympy as sp
from scipy.special import jv, yv

from .exactalg import (
    ExactMatrix,
    ExactPoly,
    ExactRatFunc,
    ExactScalar,
    SingularMatrixError,
)
from .heisenmodel import SystemSpec, condition_coefficient_a, hamiltonian
from .dynamics import Trajectory, hamilton_jacobian, hamilton_rhs

__all__ = [
    "LinearSystem",
    "SampledLinearSystem",
    "ScalarODE",
    "GaugeMatrix",
    "NotCyclicError",
    "ve_along",
    "transform_vars_q1h1",
    "transform_vars_q1h1_inverse",
    "ve_blocks_transformed",
    "ve_twobody_blocks",
    "gauge_transform",
    "reduction_gauge",
    "reduction_gauge_resonant",
    "cyclic_to_scalar",
    "exp_substitution",
    "bessel_closed_form",
    "system_residual",
    "fundamental_solution",
]


class NotCyclicError(ValueError):
    """The chosen component's derivatives do not span the solution space."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearSystem:
    """First-order system y' = A(var) y with exact rational-function matrix."""

    A: ExactMatrix
    var: str = "t"
    meta: tuple = ()

    def __post_init__(self):
        if self.A.rows != self.A.cols:
            raise ValueError("coefficient matrix must be square")

    @property
    def dim(self) -> int:
        return self.A.rows

    def eval(self, t) -> np.ndarray:
        return np.array(
            [
                [complex(self.A[i, j](complex(t))) for j in range(self.dim)]
                for i in range(self.dim)
            ]
        )

    def subsystem(self, indices) -> "LinearSystem":
        idx = list(indices)
        sub = ExactMatrix(
            [[self.A[i, j] for j in idx] for i in idx], var=self.A.var
        )
        return LinearSystem(sub, var=self.var, meta=self.meta)

    def to_json(self) -> dict:
        return {"dim": self.dim, "var": self.var, "A": self.A.to_json()}

    @staticmethod
    def from_json(doc) -> "LinearSystem":
        return LinearSystem(ExactMatrix.from_json(doc["A"]), var=doc["var"])


class SampledLinearSystem:
    """Variational matrix sampled along a numeric trajectory."""

    def __init__(self, spec: SystemSpec, traj: Trajectory):
        if traj.sol is None:
            raise ValueError("trajectory needs dense output for sampling")
        self.spec = spec
        self.traj = traj
        self.dim = spec.dim
        self.var = "t"

    def eval(self, t) -> np.ndarray:
        return hamilton_jacobian(self.spec, self.traj.at(float(t)))


class ScalarODE:
    """Monic scalar ODE sum_k c_k(t) y^(k) = 0 with ExactRatFunc c_k."""

    def __init__(self, coeffs, var: str = "t"):
        cs = [ExactRatFunc.coerce(c, var) for c in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        if len(cs) < 2:
            raise ValueError("order must be at least 1")
        lead = cs[-1]
        self.coeffs = tuple(c / lead for c in cs)
        self.var = var

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, k: int) -> ExactRatFunc:
        return self.coeffs[k]

    def companion(self) -> LinearSystem:
        n = self.order
        rows = [
            [ExactRatFunc.coerce(1 if j == i + 1 else 0, self.var) for j in range(n)]
            for i in range(n - 1)
        ]
        rows.append([-self.coeffs[k] for k in range(n)])
        return LinearSystem(ExactMatrix(rows, var=self.var), var=self.var)

    def __eq__(self, other):
        return isinstance(other, ScalarODE) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"ScalarODE(order={self.order}, var={self.var!r})"

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "var": self.var,
            "coeffs": [c.to_json() for c in self.coeffs],
        }

    @staticmethod
    def from_json(doc) -> "ScalarODE":
        return ScalarODE(
            [ExactRatFunc.from_json(c, doc["var"]) for c in doc["coeffs"]],
            var=doc["var"],
        )


class GaugeMatrix:
    """Polynomial matrix Q(t) with nonzero determinant and cached inverse."""

    def __init__(self, Q: ExactMatrix):
        if Q.rows != Q.cols:
            raise ValueError("gauge matrix must be square")
        if Q.det().is_zero():
            raise SingularMatrixError("gauge matrix identically singular")
        self.Q = Q

    @cached_property
    def inverse(self) -> ExactMatrix:
        return self.Q.inverse()


# ---------------------------------------------------------------------------
# sympy <-> exactalg bridge
# ---------------------------------------------------------------------------

def _scalar_from_sympy(e) -> ExactScalar:
    e = sp.nsimplify(sp.expand(e))
    re, im = e.as_real_imag()
    if not (re.is_rational and im.is_rational):
        raise ValueError(f"coefficient {e} is not a Gaussian rational")
    re, im = sp.Rational(re), sp.Rational(im)
    return ExactScalar(Fraction(re.p, re.q), Fraction(im.p, im.q))


def _poly_from_sympy(expr, tsym, var: str) -> ExactPoly:
    expr = sp.expand(expr)
    if expr == 0:
        return ExactPoly((), var=var)
    poly = sp.Poly(expr, tsym)
    cs = [ExactScalar(0)] * (poly.degree() + 1)
    for (k,), c in poly.terms():
        cs[k] = _scalar_from_sympy(c)
    return ExactPoly(cs, var=var)


def _exact_to_sympy(v):
    s = ExactScalar.coerce(
        v if not isinstance(v, str) else ExactScalar.parse(v)
    )
    return sp.Rational(s.re.numerator, s.re.denominator) + sp.I * sp.Rational(
        s.im.numerator, s.im.denominator
    )


# ---------------------------------------------------------------------------
# Variational equations
# ---------------------------------------------------------------------------

# interleaved variation order (x, p_x, y, p_y, z, p_z) from the flat
# (x, y, z, p_x, p_y, p_z) state order
_INTERLEAVE_1B = (0, 3, 1, 4, 2, 5)


def ve_along(spec: SystemSpec, solution, check_tol: float = 1e-8):
    """Linearization A(t) of the canonical field along a solution.

    A Trajectory gives a SampledLinearSystem.  A one-body parameter dict
    {"c": rational} gives the exact polynomial system along the vertical
    particular solution, rows/columns in the interleaved variation order
    (x, p_x, y, p_y, z, p_z).  The input is verified to be a solution.
    """
    if isinstance(solution, Trajectory):
        traj = solution
        for tq in np.linspace(traj.t[0], traj.t[-1], 7)[1:-1]:
            h = 1e-6 * max(1.0, abs(tq))
            fd = (traj.at(tq + h) - traj.at(tq - h)) / (2 * h)
            if np.max(np.abs(fd - hamilton_rhs(spec, traj.at(tq)))) > max(
                check_tol, 1e-4
            ):
                raise ValueError("trajectory fails the solution residual check")
        return SampledLinearSystem(spec, traj)

    if spec.kind != "one-body":
        raise ValueError("exact variational build implemented for one-body")
    c = solution["c"]
    if c == 0:
        raise ValueError("c must be nonzero")
    a = condition_coefficient_a(spec, Fraction(c))
    t = sp.Symbol("t", real=True)
    syms = spec._symbols
    n = 3
    field = [sp.diff(spec.h_expr, p) for p in syms[n:]] + [
        -sp.diff(spec.h_expr, q) for q in syms[:n]
    ]
    point = {
        syms[0]: 0, syms[1]: 0, syms[2]: sp.nsimplify(c),
        syms[3]: 0, syms[4]: 0,
        syms[5]: -2 * sp.Rational(a.numerator, a.denominator) * t,
    }
    # residual check: the particular solution must satisfy the field
    expect = [0, 0, 0, 0, 0, -2 * sp.Rational(a.numerator, a.denominator)]
    for f, e in zip(field, expect):
        if sp.simplify(f.subs(point) - e) != 0:
            raise ValueError("particular solution fails the residual check")
    jac = [[sp.simplify(sp.diff(f, v).subs(point)) for v in syms] for f in field]
    p = _INTERLEAVE_1B
    entries = [
        [_poly_from_sympy(jac[p[i]][p[j]], t, "t") for j in range(6)]
        for i in range(6)
    ]
    return LinearSystem(ExactMatrix(entries, var="t"), var="t", meta=(("a", str(a)),))


def transform_vars_q1h1(s) -> np.ndarray:
    """Non-canonical complex change of variables to (q1, h1, q2, h2, q3, h3)."""
    a = np.asarray(s, dtype=float) if not hasattr(s, "to_array") else s.to_array()
    x, y, z, px, py, pz = a
    q1 = x + 1j * y
    q2 = x - 1j * y
    h1 = px + 1j * py + 0.5j * pz * q1
    h2 = px - 1j * py - 0.5j * pz * q2
    return np.array([q1, h1, q2, h2, z, pz], dtype=complex)


def transform_vars_q1h1_inverse(w) -> np.ndarray:
    """Inverse of transform_vars_q1h1, back to (x, y, z, p_x, p_y, p_z)."""
    q1, h1, q2, h2, q3, h3 = np.asarray(w, dtype=complex)
    x = (q1 + q2) / 2
    y = (q1 - q2) / (2j)
    pz = h3
    px = (h1 + h2 - 0.5j * pz * (q1 - q2)) / 2
    py = (h1 - h2 - 0.5j * pz * (q1 + q2)) / (2j)
    return np.array([x, y, q3, px, py, pz], dtype=complex).real


def ve_blocks_transformed(spec: SystemSpec, c) -> LinearSystem:
    """Block-diagonal variational matrix diag(A1, A2, A3) in the transformed
    variables (dq1, dh1, dq2, dh2, dq3, dh3) along the vertical solution.

    A1 = [[0, 1], [-i a, -2 i a t]], A2 is its coefficient conjugate, and A3
    is strictly lower triangular with the computed entry C."""
    if spec.kind != "one-body":
        raise ValueError("transformed blocks are defined for the one-body system")
    a = condition_coefficient_a(spec, Fraction(c))
    if a == 0:
        raise ValueError("a must be nonzero")
    ia = ExactScalar.i() * ExactScalar(a)
    t = ExactPoly.x()
    A1 = [
        [ExactRatFunc.coerce(0), ExactRatFunc.coerce(1)],
        [ExactRatFunc(ExactPoly([-ia])), ExactRatFunc(t.scale(-(ia + ia)))],
    ]
    # C: linearization of dh3 in dq3 along the axis
    q3 = sp.Symbol("q3", positive=(c > 0), negative=(c < 0))
    from .heisenmodel import _RHO, _Z

    sgn = 1 if c > 0 else -1
    W_on_axis = spec.potential.dz_expr.subs(
        {_Z: q3, _RHO: 4 * sgn * q3}, simultaneous=True
    ) + 16 * q3 / (4 * sgn * q3) * spec.potential.drho_expr.subs(
        {_Z: q3, _RHO: 4 * sgn * q3}, simultaneous=True
    )
    C = sp.simplify(-sp.diff(W_on_axis, q3).subs(q3, sp.nsimplify(c)))
    C_sc = _scalar_from_sympy(C)

    zero = ExactRatFunc.coerce(0)
    M = [[zero] * 6 for _ in range(6)]
    for i in range(2):
        for j in range(2):
            M[i][j] = A1[i][j]
    conj = ExactMatrix([[A1[0][0], A1[0][1]], [A1[1][0], A1[1][1]]]).conjugate_coeffs()
    for i in range(2):
        for j in range(2):
            M[2 + i][2 + j] = conj[i, j]
    M[5][4] = ExactRatFunc(ExactPoly([C_sc]))
    return LinearSystem(ExactMatrix(M, var="t"), var="t", meta=(("a", str(a)),))


def ve_twobody_blocks(mu, tau0, w2) -> LinearSystem:
    """12-dim block-diagonal variational matrix diag(A1, A2, A3) in the
    rescaled two-body variables, independent variable tau.

    Variations ordered (u1, p_v1, u2, p_v2, v1, p_u1, v2, p_u2, w1, w2,
    p_w1, p_w2); A3 has the single nonzero entry 4i/w2."""
    if mu == 0:
        raise ValueError("mu must be nonzero")
    m = ExactScalar.coerce(mu if not isinstance(mu, str) else ExactScalar.parse(mu))
    t0 = ExactScalar.coerce(
        tau0 if not isinstance(tau0, str) else ExactScalar.parse(tau0)
    )
    if w2 == 0:
        raise ValueError("w2 must be nonzero")
    w2s = ExactScalar.coerce(w2 if not isinstance(w2, str) else ExactScalar.parse(w2))

    var = "tau"
    tm = ExactPoly([-t0, ExactScalar(1)], var=var)   # tau - tau0
    tp = ExactPoly([t0, ExactScalar(1)], var=var)    # tau + tau0
    one = ExactPoly([1], var=var)

    def R(p):
        return ExactRatFunc(ExactPoly.coerce(p, var), var=var)

    A1 = [
        [R(tm), R(one), R(0), R(0)],
        [R(tm * tm), R(tm), R(-1), R(0)],
        [R(0), R(0), R(tp.scale(-m)), R(ExactPoly([m], var=var))],
        [R(one), R(0), R((tp * tp).scale(m)), R(tp.scale(-m))],
    ]
    A2 = [
        [R(-tm), R(one), R(0), R(0)],
        [R(tm * tm), R(-tm), R(one), R(0)],
        [R(0), R(0), R(tp.scale(m)), R(ExactPoly([m], var=var))],
        [R(-1), R(0), R((tp * tp).scale(m)), R(tp.scale(m))],
    ]
    zero = R(0)
    M = [[zero] * 12 for _ in range(12)]
    for i in range(4):
        for j in range(4):
            M[i][j] = A1[i][j]
            M[4 + i][4 + j] = A2[i][j]
    four_i = ExactScalar(0, 4) / w2s
    M[11][9] = R(ExactPoly([four_i], var=var))
    return LinearSystem(
        ExactMatrix(M, var=var), var=var, meta=(("mu", str(m)), ("tau0", str(t0)))
    )


# ---------------------------------------------------------------------------
# Gauge transformations and scalar reduction
# ---------------------------------------------------------------------------

def gauge_transform(sys: LinearSystem, Q: GaugeMatrix) -> LinearSystem:
    """Coefficient matrix of the system satisfied by Q^-1 y:
    Q^-1 (A Q - dQ/dt), computed exactly."""
    A = sys.A
    out = Q.inverse @ (A @ Q.Q - Q.Q.derivative())
    return LinearSystem(out, var=sys.var, meta=sys.meta)


def reduction_gauge(mu) -> GaugeMatrix:
    """The order-reduction gauge built on the tau0 = 0 particular solution."""
    if mu == 0:
        raise ValueError("mu must be nonzero")
    m = ExactScalar.coerce(mu)
    var = "tau"
    P = ExactPoly.coerce
    tau = ExactPoly.x(var)
    rows = [
        [1, 0, 0, 0],
        [-tau, 1, 0, 0],
        [1, tau.scale(2), -1, 0],
        [
            tau,
            ExactPoly([-1, 0, -2], var=var),
            tau,
            ExactPoly([-m.inverse()], var=var),
        ],
    ]
    Q = ExactMatrix(
        [[ExactRatFunc(P(e, var), var=var) for e in row] for row in rows], var=var
    )
    return GaugeMatrix(Q)


def reduction_gauge_resonant() -> GaugeMatrix:
    """The order-reduction gauge for mu = -1 built on the tau0 = 1 solution."""
    var = "tau"
    P = ExactPoly.coerce
    rows = [
        [1, 0, 0, 0],
        [ExactPoly([-1, 1], var=var), 1, 0, 0],
        [-1, 0, -1, 0],
        [ExactPoly([1, 1], var=var), -1, ExactPoly([1, 1], var=var), 1],
    ]
    Q = ExactMatrix(
        [[ExactRatFunc(P(e, var), var=var) for e in row] for row in rows], var=var
    )
    return GaugeMatrix(Q)


def cyclic_to_scalar(sys: LinearSystem, index: int) -> ScalarODE:
    """Minimal scalar ODE satisfied by component `index` of every solution.

    Requires the component to be a cyclic vector: the rows e, eA + e',
    ... must span; otherwise NotCyclicError."""
    n = sys.dim
    var = sys.var
    e = [ExactRatFunc.coerce(1 if j == index else 0, var) for j in range(n)]
    rows = [e]
    for _ in range(n):
        prev = rows[-1]
        nxt = [
            sum(
                (prev[k] * sys.A[k, j] for k in range(n)),
                ExactRatFunc.coerce(0, var),
            )
            + prev[j].derivative()
            for j in range(n)
        ]
        rows.append(nxt)
    # columns v_0 .. v_n of the (n x (n+1)) dependency matrix
    M_full = ExactMatrix([[rows[k][j] for k in range(n + 1)] for j in range(n)], var=var)
    M_head = ExactMatrix([[rows[k][j] for k in range(n)] for j in range(n)], var=var)
    if M_head.rank() < n:
        raise NotCyclicError(f"component {index} is not cyclic for this system")
    ker = M_full.nullspace()
    coeffs = ker[0]
    lead = coeffs[n]
    return ScalarODE([c / lead for c in coeffs], var=var)


def exp_substitution(ode: ScalarODE, s: ExactPoly) -> ScalarODE:
    """ODE satisfied by w where y = w * exp(s(t)), s polynomial; exact."""
    s = ExactPoly.coerce(s, ode.var)
    ds = ExactRatFunc(s.derivative(), var=ode.var)
    n = ode.order
    var = ode.var
    zero = ExactRatFunc.coerce(0, var)
    # y^(j) = e^s * sum_i B[j][i] w^(i)
    B = [[zero] * (n + 1) for _ in range(n + 1)]
    B[0][0] = ExactRatFunc.coerce(1, var)
    for j in range(n):
        for i in range(j + 2):
            term = B[j][i].derivative() + ds * B[j][i] if i <= j else zero
            if i > 0:
                term = term + B[j][i - 1]
            B[j + 1][i] = term
    new = [
        sum((ode.coeff(j) * B[j][i] for j in range(n + 1)), zero)
        for i in range(n + 1)
    ]
    return ScalarODE(new, var=var)


# ---------------------------------------------------------------------------
# Closed form in Bessel functions
# ---------------------------------------------------------------------------

def bessel_closed_form(a, C1, C2, t, derivatives: bool = False):
    """Solution sqrt(t) e^{-i a t^2/2} [C1 J_{1/4}(s) + C2 Y_{1/4}(s)] of the
    second-order reduced equation, with Bessel argument s = a t^2 / 2.

    The argument convention was fixed by the residual oracle: s = a t^2 / 2
    makes the expression annihilate the equation; the doubled argument does
    not.  With derivatives=True returns (y, y', y'').  For a = 0 the
    equation degenerates and the affine solution C1 + C2 t is returned.
    """
    if t <= 0:
        raise ValueError("t must be positive (branch point of sqrt)")
    if a == 0:
        return (C1 + C2 * t, C2, 0.0) if derivatives else C1 + C2 * t
    nu = 0.25
    sig = a * t * t / 2
    dsig = a * t

    def Z(order):
        return C1 * jv(order, sig) + C2 * yv(order, sig)

    z0 = Z(nu)
    zp = Z(nu - 1) - (nu / sig) * z0
    zpp = -zp / sig - (1 - nu * nu / (sig * sig)) * z0

    rt = math.sqrt(t)
    w = rt * z0
    wp = 0.5 * z0 / rt + rt * zp * dsig
    wpp = -0.25 * z0 / (rt * t) + zp * dsig / rt + rt * (zpp * dsig * dsig + zp * a)

    E = np.exp(-0.5j * a * t * t)
    y = E * w
    if not derivatives:
        return y
    yp = E * (wp - 1j * a * t * w)
    ypp = E * (wpp - 2j * a * t * wp + (-1j * a - a * a * t * t) * w)
    return y, yp, ypp


# ---------------------------------------------------------------------------
# Numeric helpers
# ---------------------------------------------------------------------------

def system_residual(sys: LinearSystem, vec) -> list:
    """Exact residual y' - A y for a vector of polynomials/rational funcs."""
    v = [ExactRatFunc.coerce(p, sys.var) for p in vec]
    n = sys.dim
    return [
        v[i].derivative()
        - sum((sys.A[i, j] * v[j] for j in range(n)), ExactRatFunc.coerce(0, sys.var))
        for i in range(n)
    ]


def fundamental_solution(sys, t0: float, t1: float, rtol=1e-10, atol=1e-12):
    """Numeric fundamental matrix Phi(t1) with Phi(t0) = identity."""
    from scipy.integrate import solve_ivp

    dim = sys.dim

    def f(t, y):
        A = sys.eval(t)
        return (A @ y.reshape(dim, dim)).reshape(-1)

    y0 = np.eye(dim, dtype=complex).reshape(-1)
    res = solve_ivp(f, (t0, t1), y0, rtol=rtol, atol=atol, method="DOP853")
    if res.status != 0:
        raise RuntimeError(f"fundamental-solution integration failed: {res.message}")
    return res.y[:, -1].reshape(dim, dim)
