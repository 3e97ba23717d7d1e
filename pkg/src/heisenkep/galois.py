"""Differential-Galois decision machinery: the parabolic-cylinder criterion,
exponential-solution search, symmetric powers with singularity analysis,
the exterior-square factorization, and the orchestrated verdicts.

All decisions are certified: a returned exponential solution carries an
exact substitution certificate, an empty search is complete for the stated
ansatz class (rational logarithmic derivative over Q(i) with simple finite
poles), and the symmetric-power operator is certified by exact substitution
in the monomial module.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exactalg import (
    ExactMatrix,
    ExactPoly,
    ExactRatFunc,
    ExactScalar,
    poly_roots_numeric,
    squarefree_decomposition,
)

__all__ = [
    "DiffOperator",
    "ParabolicParams",
    "SingularityData",
    "GaloisVerdict",
    "FactorizationBasis",
    "rehm_classify",
    "parabolic_from_ode",
    "exp_solutions",
    "sym_power",
    "singularity_analysis",
    "case2_obstruction",
    "fuchsian_check",
    "liouvillian_verdict_o3r",
    "exterior_square",
    "plucker_check",
    "system_exp_solutions",
    "factorization_basis",
    "o3r_operator",
]

_ZERO = ExactScalar(0)
_ONE = ExactScalar(1)


# ---------------------------------------------------------------------------
# Operator type
# ---------------------------------------------------------------------------

class DiffOperator:
    """Monic scalar operator D^n + a_{n-1} D^{n-1} + ... + a_0 over C(t)."""

    def __init__(self, coeffs, var: str = "t"):
        cs = [ExactRatFunc.coerce(c, var) for c in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        if len(cs) < 2:
            raise ValueError("operator order must be at least 1")
        lead = cs[-1]
        self.coeffs = tuple(c / lead for c in cs)
        self.var = var

    @staticmethod
    def from_ode(ode) -> "DiffOperator":
        return DiffOperator(ode.coeffs, var=ode.var)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, k: int) -> ExactRatFunc:
        return self.coeffs[k]

    def cleared(self) -> list:
        """Coefficients as polynomials after clearing denominators and
        removing any common polynomial factor."""
        den = ExactPoly([1], var=self.var)
        for c in self.coeffs:
            den = den.lcm(c.den)
        polys = [c.num * den.exact_div(c.den) for c in self.coeffs]
        g = ExactPoly((), var=self.var)
        for p in polys:
            g = p if g.is_zero() else g.gcd(p)
        if g.degree > 0:
            polys = [p.exact_div(g) for p in polys]
        return polys

    def apply_exp_ansatz(self, r) -> ExactRatFunc:
        """L(e^{int r}) / e^{int r}: zero iff D - r is a right factor."""
        r = ExactRatFunc.coerce(r, self.var)
        N = ExactRatFunc.coerce(1, self.var)
        total = self.coeffs[0] * N
        for j in range(1, self.order + 1):
            N = N.derivative() + r * N
            total = total + self.coeffs[j] * N
        return total

    def __eq__(self, other):
        return isinstance(other, DiffOperator) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"DiffOperator(order={self.order}, var={self.var!r})"

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "var": self.var,
            "coeffs": [c.to_json() for c in self.coeffs],
        }

    @staticmethod
    def from_json(doc) -> "DiffOperator":
        return DiffOperator(
            [ExactRatFunc.from_json(c, doc["var"]) for c in doc["coeffs"]],
            var=doc["var"],
        )


@dataclass(frozen=True)
class GaloisVerdict:
    tag: str  # "NotSolvableIdentityComponent" | "Inconclusive"
    evidence: dict

    def __post_init__(self):
        if self.tag not in ("NotSolvableIdentityComponent", "Inconclusive"):
            raise ValueError(f"unknown verdict tag {self.tag!r}")
        if self.tag == "NotSolvableIdentityComponent" and not self.evidence:
            raise ValueError("a NotSolvable verdict must carry evidence")

    def to_json(self) -> str:
        return json.dumps(
            {"tag": self.tag, "evidence": self.evidence}, sort_keys=True, default=str
        )


# ---------------------------------------------------------------------------
# Parabolic cylinder criterion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParabolicParams:
    """Parameters of w'' - (alpha^2 t^2 + 2 alpha beta t + gamma) w = 0,
    with alpha known only through alpha^2 (the sign is a gauge choice)."""

    alpha_sq: ExactScalar
    two_alpha_beta: ExactScalar
    gamma: ExactScalar

    def __post_init__(self):
        if self.alpha_sq.is_zero():
            raise ValueError("alpha must be nonzero")

    @staticmethod
    def from_alpha(alpha, beta, gamma) -> "ParabolicParams":
        a = ExactScalar.coerce(alpha)
        b = ExactScalar.coerce(beta)
        return ParabolicParams(a * a, (a + a) * b, ExactScalar.coerce(gamma))

    def ratio_squared(self) -> ExactScalar:
        """((beta^2 - gamma)/alpha)^2, well defined without the sign of
        alpha."""
        beta_sq = (self.two_alpha_beta * self.two_alpha_beta) / (
            self.alpha_sq * ExactScalar(4)
        )
        d = beta_sq - self.gamma
        return (d * d) / self.alpha_sq


def rehm_classify(p: ParabolicParams) -> GaloisVerdict:
    """SL(2, C) verdict for the parabolic cylinder equation.

    The differential Galois group is all of SL(2, C) unless
    (beta^2 - gamma)/alpha is an odd integer for one of the two signs of
    alpha, which holds iff its square is the square of an odd integer."""
    q = p.ratio_squared()
    odd_square = (
        q.is_real()
        and q.re >= 0
        and q.re.denominator == 1
        and math.isqrt(q.re.numerator) ** 2 == q.re.numerator
        and math.isqrt(q.re.numerator) % 2 == 1
    )
    ev = {
        "criterion": "parabolic_cylinder",
        "ratio_squared": str(q),
        "alpha_sq": str(p.alpha_sq),
        "gamma": str(p.gamma),
    }
    if odd_square:
        return GaloisVerdict("Inconclusive", ev | {"odd_integer_ratio": True})
    return GaloisVerdict("NotSolvableIdentityComponent", ev | {"group": "SL(2,C)"})


def parabolic_from_ode(ode) -> ParabolicParams:
    """Match w'' - (c2 t^2 + c1 t + c0) w = 0 and extract the parameters."""
    if ode.order != 2:
        raise ValueError("second-order equation required")
    if not ode.coeff(1).is_zero():
        raise ValueError("no first-derivative term allowed")
    c = -ode.coeff(0)
    if not c.is_poly():
        raise ValueError("potential must be polynomial")
    p = c.as_poly()
    if p.degree > 2:
        raise ValueError("potential degree exceeds 2")
    if p.coeff(2).is_zero():
        raise ValueError("degenerate: alpha = 0")
    return ParabolicParams(p.coeff(2), p.coeff(1), p.coeff(0))


# ---------------------------------------------------------------------------
# Scalar linear algebra (fast path over Q(i) numbers)
# ---------------------------------------------------------------------------

def _scalar_rref(rows):
    """Gauss-Jordan over ExactScalar; returns (rref, pivot columns)."""
    m = [list(r) for r in rows]
    if not m:
        return m, []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, len(m)) if not m[i][c].is_zero()), None)
        if pr is None:
            continue
        m[r], m[pr] = m[pr], m[r]
        inv = m[r][c].inverse()
        m[r] = [e * inv for e in m[r]]
        for i in range(len(m)):
            if i != r and not m[i][c].is_zero():
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def _scalar_nullspace(rows):
    """Right-kernel basis of a matrix of ExactScalar entries."""
    if not rows:
        return []
    ncols = len(rows[0])
    m, pivots = _scalar_rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [_ZERO] * ncols
        v[fc] = _ONE
        for r, pc in enumerate(pivots):
            v[pc] = -m[r][fc]
        basis.append(v)
    return basis


# ---------------------------------------------------------------------------
# Exact root helpers (Gaussian-rational roots by rationalize-and-verify)
# ---------------------------------------------------------------------------

_MAXDENS = (12, 1000, 10**4, 10**8)


def _rationalize(x: complex, maxden: int) -> ExactScalar:
    return ExactScalar(
        Fraction(x.real).limit_denominator(maxden),
        Fraction(x.imag).limit_denominator(maxden),
    )


def gaussian_roots(p: ExactPoly) -> list:
    """Roots of p lying in Q(i), found numerically and certified exactly.

    Small denominators are tried first so that clustered numeric roots
    (e.g. from double roots) still rationalize correctly."""
    if p.degree < 1:
        return []
    out = []
    for z in poly_roots_numeric(p, tol=1e-5):
        for maxden in _MAXDENS:
            cand = _rationalize(z, maxden)
            if p(cand).is_zero():
                if cand not in out:
                    out.append(cand)
                break
    return out


def _falling(j: int, var: str = "lam") -> ExactPoly:
    """Falling factorial lam (lam-1) ... (lam-j+1) as a polynomial."""
    out = ExactPoly([1], var=var)
    for s in range(j):
        out = out * ExactPoly([-s, 1], var=var)
    return out


# ---------------------------------------------------------------------------
# Newton polygon at infinity, polynomial solutions, twisting
# ---------------------------------------------------------------------------

def _clear_ratfunc_coeffs(coeffs, var):
    """list of ExactRatFunc -> list of ExactPoly with cleared denominator."""
    den = ExactPoly([1], var=var)
    for c in coeffs:
        den = den.lcm(c.den)
    return [c.num * den.exact_div(c.den) for c in coeffs]


def _infinity_indicial(polys) -> ExactPoly:
    """Slope-zero indicial polynomial I(N) at infinity: the leading
    coefficient of L(t^N) as a polynomial in N."""
    M = max(p.degree - j for j, p in enumerate(polys) if not p.is_zero())
    I = ExactPoly((), var="lam")
    for j, p in enumerate(polys):
        if not p.is_zero() and p.degree - j == M:
            I = I + _falling(j).scale(p.leading())
    return I


def _nonneg_integer_roots(I: ExactPoly) -> list:
    out = []
    for z in poly_roots_numeric(I, tol=1e-5):
        if abs(z.imag) < 1e-5:
            n = round(z.real)
            if n >= 0 and n not in out and I(ExactScalar(n)).is_zero():
                out.append(n)
    return sorted(out)


def _polynomial_solutions(polys, var) -> list:
    """Basis of polynomial solutions of sum_j c_j y^(j) = 0, exact."""
    degs = _nonneg_integer_roots(_infinity_indicial(polys))
    if not degs:
        return []
    N = max(degs)
    maxdeg = max(p.degree for p in polys if not p.is_zero()) + N
    rows = [[_ZERO] * (N + 1) for _ in range(maxdeg + 1)]
    for s in range(N + 1):
        for j, p in enumerate(polys):
            if p.is_zero() or j > s:
                continue
            fall = 1
            for k in range(j):
                fall *= s - k
            if fall == 0:
                continue
            fs = ExactScalar(fall)
            for d in range(p.degree + 1):
                c = p.coeff(d)
                if not c.is_zero():
                    rows[d + s - j][s] = rows[d + s - j][s] + c * fs
    sols = []
    for v in _scalar_nullspace(rows):
        q = ExactPoly(v, var=var)
        if not q.is_zero():
            sols.append(q)
    return sols


def _twist(coeffs, rprime, var):
    """Coefficients of the operator for u where y = u * exp(int rprime);
    monic in, monic out.  rprime is rational."""
    rp = ExactRatFunc.coerce(rprime, var)
    n = len(coeffs) - 1
    zero = ExactRatFunc.coerce(0, var)
    B = [[zero] * (n + 1) for _ in range(n + 1)]
    B[0][0] = ExactRatFunc.coerce(1, var)
    for j in range(n):
        for i in range(j + 2):
            term = B[j][i].derivative() + rp * B[j][i] if i <= j else zero
            if i > 0:
                term = term + B[j][i - 1]
            B[j + 1][i] = term
    return [
        sum((coeffs[j] * B[j][i] for j in range(n + 1)), zero)
        for i in range(n + 1)
    ]


def _newton_polygon_slopes(polys):
    """Candidate leading degrees of the polynomial part of r, with edge
    polynomials: pairs (d, edge) where d >= 0 is an integer slope of the
    upper hull of the points (j, deg c_j)."""
    pts = [(j, p.degree) for j, p in enumerate(polys) if not p.is_zero()]
    out = []
    seen = set()
    for (j1, d1), (j2, d2) in itertools.combinations(pts, 2):
        num, den = d1 - d2, j2 - j1
        if num < 0 or num % den != 0:
            continue
        d = num // den
        h = max(dj + j * d for j, dj in pts)
        if d1 + j1 * d != h or d in seen:
            continue
        seen.add(d)
        edge = ExactPoly((), var="rho")
        for j, p in enumerate(polys):
            if not p.is_zero() and p.degree + j * d == h:
                edge = edge + ExactPoly.monomial(p.leading(), j, var="rho")
        out.append((d, edge))
    return sorted(out, key=lambda e: -e[0])


def _poly_part_candidates(coeffs, var, max_d=None, depth=0):
    """Candidate polynomial parts s' of rational logarithmic derivatives,
    from the Newton polygon at infinity, recursively refined."""
    polys = _clear_ratfunc_coeffs(coeffs, var)
    out = [ExactPoly((), var=var)]
    if depth > 12:
        return out
    for d, edge in _newton_polygon_slopes(polys):
        if max_d is not None and d > max_d:
            continue
        for rho in gaussian_roots(edge):
            if rho.is_zero():
                continue
            lead = ExactPoly.monomial(rho, d, var=var)
            if d == 0:
                if lead not in out:
                    out.append(lead)
                continue
            twisted = _twist(coeffs, ExactRatFunc(lead, var=var), var)
            for tail in _poly_part_candidates(
                twisted, var, max_d=d - 1, depth=depth + 1
            ):
                cand = lead + tail
                if cand not in out:
                    out.append(cand)
    return out


def _integrate_poly(p: ExactPoly) -> ExactPoly:
    cs = [_ZERO]
    for k, c in enumerate(p.coeffs):
        cs.append(c * ExactScalar(Fraction(1, k + 1)))
    return ExactPoly(cs, var=p.var)


# ---------------------------------------------------------------------------
# Local exponents at finite points
# ---------------------------------------------------------------------------

def _taylor_coeff_mod(p: ExactPoly, s: int, f: ExactPoly) -> ExactPoly:
    """s-th Taylor coefficient of p at a root of f, as an element of
    Q(i)[t]/(f)."""
    q = p
    for _ in range(s):
        q = q.derivative()
    return (q % f).scale(ExactScalar(Fraction(1, math.factorial(s))))


def _local_data(polys, f: ExactPoly, var: str):
    """Regularity and exponents of the operator at the roots of the
    squarefree factor f of the leading coefficient.

    Returns (regular, exponents) with exponents a list of pairs
    (value, subfactor): the ExactScalar exponent is valid at the roots of
    the subfactor (an exact divisor of f, found by gcd splitting when the
    exponents differ between roots)."""
    n = len(polys) - 1

    def mult(p):
        if p.is_zero():
            return math.inf
        m, q = 0, p
        while True:
            d, r = divmod(q, f)
            if not r.is_zero():
                return m
            q, m = d, m + 1

    mn = mult(polys[n])
    if not all(mult(polys[j]) >= mn - (n - j) for j in range(n)):
        return False, []
    # indicial polynomial sum_j A_j lam(lam-1)...(lam-j+1) with A_j the
    # (mn - n + j)-th Taylor coefficient of c_j, an element of Q(i)[t]/(f)
    ind = [ExactPoly((), var=var) for _ in range(n + 1)]
    for j in range(n + 1):
        s = mn - (n - j)
        if s < 0 or polys[j].is_zero():
            continue
        A = _taylor_coeff_mod(polys[j], s, f)
        if A.is_zero():
            continue
        fall = _falling(j)
        for k in range(fall.degree + 1):
            ind[k] = (ind[k] + A.scale(fall.coeff(k))) % f
    while len(ind) > 1 and ind[-1].is_zero():
        ind.pop()
    return True, _solve_indicial(ind, f, var)


def _solve_indicial(ind, f: ExactPoly, var: str):
    """Rational roots of an indicial polynomial with coefficients in
    Q(i)[t]/(f), splitting f when the roots differ between its points."""
    if all(c.degree <= 0 for c in ind):
        poly = ExactPoly([c.coeff(0) for c in ind], var="lam")
        return [(v, f) for v in gaussian_roots(poly) if v.is_real()]
    # point-dependent coefficients: collect rational candidates from the
    # numeric roots of the pointwise indicial, then certify by gcd with f
    cands = []
    for z in poly_roots_numeric(f, tol=1e-5):
        pv = [c(z) for c in ind]
        while pv and abs(pv[-1]) < 1e-9:
            pv.pop()
        if len(pv) < 2:
            continue
        for lr in np.roots(list(reversed(pv))):
            if abs(lr.imag) > 1e-5:
                continue
            v = Fraction(float(lr.real)).limit_denominator(_MAXDENS[0])
            if v not in cands:
                cands.append(v)
    out = []
    for v in sorted(cands):
        vs = ExactScalar(v)
        acc = ExactPoly((), var=var)
        for k, c in enumerate(ind):
            acc = (acc + c.scale(vs**k)) % f
        g = f if acc.is_zero() else f.gcd(acc)
        if g.degree > 0:
            out.append((vs, g))
    return out


# ---------------------------------------------------------------------------
# Exponential solutions
# ---------------------------------------------------------------------------

def exp_solutions(L: DiffOperator, max_combinations: int = 400) -> list:
    """Complete list of right factors D - r with r in Q(i)(t) and only
    simple poles at finite points.

    Candidates are assembled from local exponents at the finite singular
    points (residues of r) and the Newton polygon at infinity (the
    polynomial part of r), then each is certified by exact substitution.
    An empty list proves there is no exponential solution in this class."""
    var = L.var
    polys = L.cleared()
    lead = polys[L.order]

    # residue choice groups: one per subfactor of the leading coefficient
    groups = []
    for f, _m in squarefree_decomposition(lead):
        if f.degree < 1:
            continue
        regular, exps = _local_data(polys, f.monic(), var)
        if not regular:
            continue
        by_sub = {}
        for v, g in exps:
            by_sub.setdefault(str(g), (g.monic(), []))[1].append(v)
        groups.extend(by_sub.values())

    combos = [()]
    for g, values in groups:
        choices = [None] + values
        combos = [c + ((g, v),) for c in combos for v in choices]
        if len(combos) > max_combinations:
            raise RuntimeError("residue combination search space too large")

    results = []
    seen = set()
    for combo in combos:
        tail = ExactRatFunc.coerce(0, var)
        for g, v in combo:
            if v is None:
                continue
            tail = tail + ExactRatFunc(g.derivative().scale(v), g, var=var)
        base = _twist(list(L.coeffs), tail, var)
        for spoly in _poly_part_candidates(base, var):
            twisted = (
                base
                if spoly.is_zero()
                else _twist(base, ExactRatFunc(spoly, var=var), var)
            )
            tp = _clear_ratfunc_coeffs(twisted, var)
            for q in _polynomial_solutions(tp, var):
                r = (
                    ExactRatFunc(spoly, var=var)
                    + tail
                    + ExactRatFunc(q.derivative(), q, var=var)
                )
                key = str(r)
                if key not in seen and L.apply_exp_ansatz(r).is_zero():
                    seen.add(key)
                    results.append((r, {"poly_part": spoly, "poly_factor": q}))
    return results


# ---------------------------------------------------------------------------
# Symmetric powers
# ---------------------------------------------------------------------------

def _sym_module(L: DiffOperator, k: int):
    """Derivative tower of w = y^k in the monomial module.

    Basis: size-k multisets of derivative orders < n, as sorted tuples.
    Returns (basis, [w, w', ..., w^(dim)]) with ExactRatFunc entries."""
    n = L.order
    var = L.var
    basis = sorted(itertools.combinations_with_replacement(range(n), k))
    index = {b: i for i, b in enumerate(basis)}
    dim = len(basis)
    zero = ExactRatFunc.coerce(0, var)
    red = [-L.coeff(j) for j in range(n)]  # y^(n) = sum red[j] y^(j)

    def d_vec(vec):
        out = [zero] * dim
        for b, c in zip(basis, vec):
            if c.is_zero():
                continue
            dc = c.derivative()
            if not dc.is_zero():
                out[index[b]] = out[index[b]] + dc
            for pos in range(k):
                lst = list(b)
                o = lst[pos]
                if o + 1 < n:
                    lst[pos] = o + 1
                    nb = tuple(sorted(lst))
                    out[index[nb]] = out[index[nb]] + c
                else:
                    for j in range(n):
                        if red[j].is_zero():
                            continue
                        lst2 = list(b)
                        lst2[pos] = j
                        nb = tuple(sorted(lst2))
                        out[index[nb]] = out[index[nb]] + c * red[j]
        return out

    w = [zero] * dim
    w[index[tuple([0] * k)]] = ExactRatFunc.coerce(1, var)
    tower = [w]
    for _ in range(dim):
        tower.append(d_vec(tower[-1]))
    return basis, tower


def _eval_tower(tower, upto, x: ExactScalar):
    """Evaluate the first `upto` tower vectors at a point; None at a pole."""
    try:
        return [[c(x) for c in vec] for vec in tower[:upto]]
    except ZeroDivisionError:
        return None


def _rank_of_cols(cols) -> int:
    rows = [[col[r] for col in cols] for r in range(len(cols[0]))]
    return len(_scalar_rref(rows)[1])


def _solve_dependency(cols, m):
    """b with sum_{j<m} b_j cols[j] = -cols[m]; None if the specialized
    system is singular."""
    rows = [
        [cols[j][r] for j in range(m)] + [cols[m][r]]
        for r in range(len(cols[0]))
    ]
    R, pivots = _scalar_rref(rows)
    if pivots != list(range(m)):
        return None
    return [-R[i][m] for i in range(m)]


def _interp_ratfunc(xs, ys, deg, var):
    """Rational function p/q with deg p, deg q <= deg matching all samples;
    None if no consistent fit exists."""
    rows = []
    for x, y in zip(xs, ys):
        xp = [ExactScalar(x**k) for k in range(deg + 1)]
        xq = [(-y) * ExactScalar(x**k) for k in range(deg + 1)]
        rows.append(xp + xq)
    for v in _scalar_nullspace(rows):
        p = ExactPoly(v[: deg + 1], var=var)
        q = ExactPoly(v[deg + 1 :], var=var)
        if not q.is_zero():
            return ExactRatFunc(p, q, var=var)
    return None


def _newton_interp_poly(xs, ys, var):
    """Polynomial through the given points (Newton divided differences)."""
    n = len(xs)
    coef = list(ys)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / ExactScalar(xs[i] - xs[i - j])
    poly = ExactPoly((), var=var)
    base = ExactPoly([1], var=var)
    for i in range(n):
        poly = poly + base.scale(coef[i])
        base = base * ExactPoly([-xs[i], 1], var=var)
    return poly


def _interp_with_den(xs, ys, den, deg, var):
    """Fit p/den through the samples by polynomial interpolation of y*den,
    verifying on spare points; None if the fit fails."""
    K = deg + den.degree + 2
    if K + 3 > len(xs):
        return None
    dvals = [den(ExactScalar(x)) for x in xs]
    if any(d.is_zero() for d in dvals):
        return None
    prods = [y * d for y, d in zip(ys, dvals)]
    p = _newton_interp_poly(xs[:K], prods[:K], var)
    if p.degree > K - 2:
        return None
    for i in range(K, len(xs)):
        if p(ExactScalar(xs[i])) != prods[i]:
            return None
    return ExactRatFunc(p, den, var=var)


def sym_power(L: DiffOperator, k: int, degree_cap: int = 128) -> DiffOperator:
    """Minimal monic operator annihilating all k-fold products of solutions
    of L.

    The derivative tower of w = y^k is computed exactly in the monomial
    module; the minimal order is located by exact-rank specialization at
    rational points, the coefficients are reconstructed by rational
    interpolation, and the result is certified by exact substitution in
    the module."""
    if k < 1:
        raise ValueError("k must be positive")
    if k == 1:
        return DiffOperator(list(L.coeffs), var=L.var)
    _, tower = _sym_module(L, k)
    dim = len(tower[0])
    var = L.var

    # minimal order: first m with w^(m) dependent on its predecessors.
    # Full specialized rank at some point proves independence; dependence
    # is then certified by the exact reconstruction below.
    probes = [
        ExactScalar(Fraction(5, 7)),
        ExactScalar(Fraction(-3, 2)),
        ExactScalar(3),
    ]
    m = dim
    for cand in range(1, dim):
        rank = 0
        for x in probes:
            cols = _eval_tower(tower, cand + 1, x)
            if cols is not None:
                rank = max(rank, _rank_of_cols(cols))
        if rank <= cand:
            m = cand
            break

    deg = 8
    xs, sols = [], []
    x = 1
    while deg <= degree_cap:
        npts = 2 * deg + 6
        while len(xs) < npts and x < 100 * npts:
            x += 1
            cols = _eval_tower(tower, m + 1, ExactScalar(x))
            if cols is None:
                continue
            b = _solve_dependency(cols, m)
            if b is None:
                continue
            xs.append(x)
            sols.append(b)
        if len(xs) < npts:
            raise RuntimeError("could not collect enough sample points")
        coeffs = []
        den_guess = None
        for j in range(m):
            ys = [s[j] for s in sols]
            f = None
            if den_guess is not None:
                f = _interp_with_den(xs, ys, den_guess, deg, var)
            if f is None:
                f = _interp_ratfunc(xs, ys, deg, var)
                if f is None:
                    coeffs = None
                    break
                den_guess = (
                    f.den if den_guess is None else den_guess.lcm(f.den)
                )
            coeffs.append(f)
        if coeffs is not None:
            total = list(tower[m])
            for j in range(m):
                total = [t + coeffs[j] * v for t, v in zip(total, tower[j])]
            if all(t.is_zero() for t in total):
                return DiffOperator(
                    coeffs + [ExactRatFunc.coerce(1, var)], var=var
                )
        deg *= 2
    raise RuntimeError("symmetric power reconstruction exceeded the degree cap")


# ---------------------------------------------------------------------------
# Singularity analysis
# ---------------------------------------------------------------------------

@dataclass
class SingularityData:
    finite: list
    infinity: dict
    fuchsian: bool

    def all_finite_exponents(self) -> list:
        out = []
        for rec in self.finite:
            out.extend(rec["exponents"])
        return out

    def to_json(self) -> dict:
        return {
            "finite": [
                {
                    "factor": rec["factor"].to_json(),
                    "multiplicity": rec["multiplicity"],
                    "regular": rec["regular"],
                    "exponents": [str(e) for e in rec["exponents"]],
                    "num_points": rec["num_points"],
                }
                for rec in self.finite
            ],
            "infinity": {
                "regular": self.infinity["regular"],
                "algebraic_exponents": [
                    str(e) for e in self.infinity["algebraic_exponents"]
                ],
            },
            "fuchsian": self.fuchsian,
        }


def singularity_analysis(L: DiffOperator) -> SingularityData:
    """Finite singular points with exact exponents (shared across the roots
    of each squarefree factor, with factor splitting when they differ),
    regular/irregular classification, and the algebraic-growth exponents
    at infinity."""
    var = L.var
    polys = L.cleared()
    n = L.order
    lead = polys[n]

    finite = []
    for f, mlt in squarefree_decomposition(lead):
        if f.degree < 1:
            continue
        fm = f.monic()
        regular, exps = _local_data(polys, fm, var)
        if not regular:
            finite.append(
                {
                    "factor": fm,
                    "multiplicity": mlt,
                    "regular": False,
                    "exponents": [],
                    "num_points": fm.degree,
                }
            )
            continue
        # refine f into disjoint parts so each record carries the full
        # exponent list valid at all of its roots
        parts = [fm]
        for _v, g in exps:
            refined = []
            for p in parts:
                c = p.gcd(g)
                if 0 < c.degree < p.degree:
                    refined.extend([c, p.exact_div(c).monic()])
                else:
                    refined.append(p)
            parts = refined
        for p in parts:
            vals = [v for v, g in exps if (g % p).is_zero()]
            finite.append(
                {
                    "factor": p,
                    "multiplicity": mlt,
                    "regular": True,
                    "exponents": sorted(vals, key=lambda s: (s.re, s.im)),
                    "num_points": p.degree,
                }
            )

    inf_regular = all(
        polys[j].is_zero() or polys[j].degree <= lead.degree - (n - j)
        for j in range(n)
    )
    # algebraic growth t^{-alpha}: I(-alpha) = 0 for the slope-zero
    # indicial polynomial at infinity
    I = _infinity_indicial(polys)
    alg = []
    for cand in gaussian_roots(I):
        a = -cand
        if a not in alg:
            alg.append(a)
    fuchsian = inf_regular and all(rec["regular"] for rec in finite)
    return SingularityData(
        finite=finite,
        infinity={"regular": inf_regular, "algebraic_exponents": alg},
        fuchsian=fuchsian,
    )


def fuchsian_check(L: DiffOperator) -> dict:
    """Regular/irregular classification of every singular point."""
    data = singularity_analysis(L)
    return {
        "fuchsian": data.fuchsian,
        "finite": [
            {"factor": str(rec["factor"]), "regular": rec["regular"]}
            for rec in data.finite
        ],
        "infinity_regular": data.infinity["regular"],
    }


# ---------------------------------------------------------------------------
# Case-2 exponent bookkeeping
# ---------------------------------------------------------------------------

def case2_obstruction(
    L: DiffOperator, symL: DiffOperator, sing: SingularityData
) -> GaloisVerdict:
    """Exponent bookkeeping for the symmetric-power obstruction.

    A candidate solution P(t) prod_i (t - t_i)^{a_i} of the symmetric power
    needs half-integer local exponents a_i.  When every admissible exponent
    is a non-negative integer the candidate is a polynomial, whose degree
    must appear as minus an exponent at infinity; if no exponent at
    infinity is a non-positive integer, the case is excluded."""
    exps = sing.all_finite_exponents()
    half_int = [e for e in exps if e.is_real() and (2 * e.re).denominator == 1]
    fractional = [e for e in half_int if e.re.denominator != 1 or e.re < 0]
    ev = {
        "criterion": "sym_power_exponent_bookkeeping",
        "finite_exponent_values": sorted({str(e) for e in exps}),
        "alpha_infinity": [str(a) for a in sing.infinity["algebraic_exponents"]],
    }
    if fractional or any(not rec["regular"] for rec in sing.finite):
        return GaloisVerdict(
            "Inconclusive", ev | {"reason": "non-polynomial candidates possible"}
        )
    feasible_degrees = [
        int(-a.re)
        for a in sing.infinity["algebraic_exponents"]
        if a.is_real() and a.re.denominator == 1 and a.re <= 0
    ]
    if feasible_degrees:
        return GaloisVerdict(
            "Inconclusive",
            ev
            | {
                "reason": "polynomial degree match possible",
                "feasible_degrees": feasible_degrees,
            },
        )
    return GaloisVerdict("NotSolvableIdentityComponent", ev | {"case2": "excluded"})


# ---------------------------------------------------------------------------
# Orchestrated verdict for the third-order reduced equation
# ---------------------------------------------------------------------------

def o3r_operator() -> DiffOperator:
    """The third-order reduced operator of the resonant mass-ratio branch,
    derived through the actual reduction chain rather than hard-coded."""
    from .variational import (
        cyclic_to_scalar,
        exp_substitution,
        gauge_transform,
        reduction_gauge_resonant,
        ve_twobody_blocks,
    )

    sys = ve_twobody_blocks(Fraction(-1), 1, 1).subsystem(range(4))
    g = gauge_transform(sys, reduction_gauge_resonant()).subsystem(range(3))
    ode = cyclic_to_scalar(g, 1)
    red = exp_substitution(ode, ExactPoly([0, 0, Fraction(2, 3)], var="tau"))
    return DiffOperator.from_ode(red)


def liouvillian_verdict_o3r(operator: DiffOperator | None = None) -> GaloisVerdict:
    """Three-case Liouvillian analysis of the third-order reduced equation:
    no exponential solution (case 1), not Fuchsian so the fully-algebraic
    case is excluded (case 3), and symmetric-cube exponent bookkeeping
    (case 2)."""
    L = operator if operator is not None else o3r_operator()
    evidence = {"operator_order": L.order}

    sols = exp_solutions(L)
    evidence["case1"] = {
        "exponential_solutions": [str(r) for r, _ in sols],
        "excluded": not sols,
    }
    if sols:
        return GaloisVerdict("Inconclusive", evidence | {"reason": "case 1 fires"})

    fc = fuchsian_check(L)
    evidence["case3"] = {
        "fuchsian": fc["fuchsian"],
        "irregular_at_infinity": not fc["infinity_regular"],
        "excluded": not fc["fuchsian"],
    }
    if fc["fuchsian"]:
        return GaloisVerdict(
            "Inconclusive", evidence | {"reason": "case 3 not excluded"}
        )

    sym3 = sym_power(L, 3)
    sing = singularity_analysis(sym3)
    lead = sym3.cleared()[sym3.order]
    c2 = case2_obstruction(L, sym3, sing)
    evidence["case2"] = {
        "sym3_order": sym3.order,
        "singularity_polynomial": str(lead),
        "num_singular_points": sum(rec["num_points"] for rec in sing.finite),
        "finite_exponents": sorted({str(e) for e in sing.all_finite_exponents()}),
        "alpha_infinity": [str(a) for a in sing.infinity["algebraic_exponents"]],
        "excluded": c2.tag == "NotSolvableIdentityComponent",
    }
    if c2.tag != "NotSolvableIdentityComponent":
        return GaloisVerdict(
            "Inconclusive", evidence | {"reason": "case 2 not excluded"}
        )
    return GaloisVerdict("NotSolvableIdentityComponent", evidence)


# ---------------------------------------------------------------------------
# Exterior square and factorization of the transformed system
# ---------------------------------------------------------------------------

_PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def exterior_square(A: ExactMatrix) -> ExactMatrix:
    """Induced system on 2-forms z_ij = y_i ^ y_j, component ordering
    (z01, z02, z03, z12, z13, z23):
    d z_ij = sum_k (A_ik z_kj + A_jk z_ik)."""
    if A.rows != 4 or A.cols != 4:
        raise ValueError("exterior square implemented for 4x4 systems")
    var = A.var
    zero = ExactRatFunc.coerce(0, var)
    idx, sign = {}, {}
    for s, (i, j) in enumerate(_PAIRS):
        idx[(i, j)] = idx[(j, i)] = s
        sign[(i, j)], sign[(j, i)] = 1, -1
    out = [[zero] * 6 for _ in range(6)]
    for s, (i, j) in enumerate(_PAIRS):
        for k in range(4):
            if k != j:
                t = idx[(k, j)]
                out[s][t] = out[s][t] + A[i, k] * ExactScalar(sign[(k, j)])
            if k != i:
                t = idx[(i, k)]
                out[s][t] = out[s][t] + A[j, k] * ExactScalar(sign[(i, k)])
    return ExactMatrix(out, var=var)


def _coerce_entry(y):
    if isinstance(y, str):
        return ExactRatFunc.coerce(ExactScalar.parse(y))
    return ExactRatFunc.coerce(y)


def plucker_check(Y) -> bool:
    """z03 z12 - z02 z13 + z23 z01 = 0, evaluated exactly."""
    v = [_coerce_entry(y) for y in Y]
    return (v[2] * v[3] - v[1] * v[4] + v[5] * v[0]).is_zero()


def _minimal_annihilator(B: ExactMatrix, index: int, var: str):
    """Minimal scalar operator annihilating component `index` of every
    solution of y' = B y (the order may be below the dimension)."""
    n = B.rows
    zero = ExactRatFunc.coerce(0, var)
    e = [ExactRatFunc.coerce(1 if j == index else 0, var) for j in range(n)]
    rows = [e]
    for m in range(1, n + 1):
        prev = rows[-1]
        rows.append(
            [
                sum((prev[k] * B[k, j] for k in range(n)), zero)
                + prev[j].derivative()
                for j in range(n)
            ]
        )
        M = ExactMatrix(
            [[rows[k][j] for k in range(m + 1)] for j in range(n)], var=var
        )
        if M.rank() <= m:
            for v in M.nullspace():
                if not v[m].is_zero():
                    return DiffOperator([c / v[m] for c in v[: m + 1]], var=var)
    return None


def _poly_vector_solutions(B: ExactMatrix, sprime: ExactRatFunc, degree_bound: int):
    """Exact polynomial vector solutions of v' = (B - s' I) v."""
    n = B.rows
    var = B.var
    C = [
        [
            B[i, j] - (sprime if i == j else ExactRatFunc.coerce(0, var))
            for j in range(n)
        ]
        for i in range(n)
    ]
    den = ExactPoly([1], var=var)
    for row in C:
        for c in row:
            den = den.lcm(c.den)
    Cp = [[c.num * den.exact_div(c.den) for c in row] for row in C]
    dmax = max((p.degree for row in Cp for p in row if not p.is_zero()), default=0)
    N = degree_bound
    ncols = n * (N + 1)
    rows_per = N + max(dmax, den.degree) + 2
    M = [[_ZERO] * ncols for _ in range(n * rows_per)]

    def col(i, s):
        return i * (N + 1) + s

    for i in range(n):
        off = i * rows_per
        # den * v_i' - sum_j Cp[i][j] v_j = 0, coefficientwise in t
        for s in range(1, N + 1):
            for d in range(den.degree + 1):
                c = den.coeff(d)
                if not c.is_zero():
                    M[off + d + s - 1][col(i, s)] = (
                        M[off + d + s - 1][col(i, s)] + c * ExactScalar(s)
                    )
        for j in range(n):
            p = Cp[i][j]
            if p.is_zero():
                continue
            for s in range(N + 1):
                for d in range(p.degree + 1):
                    c = p.coeff(d)
                    if not c.is_zero():
                        M[off + d + s][col(j, s)] = M[off + d + s][col(j, s)] - c
    out = []
    for v in _scalar_nullspace(M):
        vec = [
            ExactPoly([v[col(i, s)] for s in range(N + 1)], var=var)
            for i in range(n)
        ]
        if any(not p.is_zero() for p in vec):
            out.append(vec)
    return out


def _normalize_direction(vec):
    """Scale a polynomial vector so the last nonzero entry of its leading
    coefficient vector is 1."""
    deg = max(p.degree for p in vec)
    lead = [p.coeff(deg) if p.degree == deg else _ZERO for p in vec]
    piv = max(i for i, c in enumerate(lead) if not c.is_zero())
    inv = lead[piv].inverse()
    return [p.scale(inv) for p in vec]


def system_exp_solutions(sys, degree_bound: int = 8) -> list:
    """Solutions Y = exp(s(t)) v(t) of y' = B y with polynomial vector v
    and polynomial exponent s.

    Candidate exponents come from the Newton polygons of the minimal
    scalar annihilators of the coordinates; directions are recovered
    exactly by undetermined coefficients and normalized so the last
    nonzero leading entry is one.  Returns (s, v) pairs."""
    B = sys if isinstance(sys, ExactMatrix) else sys.A
    n = B.rows
    var = B.var

    s_candidates = [ExactPoly((), var=var)]
    seen = {str(s_candidates[0])}
    for i in range(n):
        ode = _minimal_annihilator(B, i, var)
        if ode is None:
            continue
        for spoly in _poly_part_candidates(list(ode.coeffs), var):
            s = _integrate_poly(spoly)
            if str(s) not in seen:
                seen.add(str(s))
                s_candidates.append(s)

    results = []
    for s in s_candidates:
        sp = ExactRatFunc(s.derivative(), var=var)
        for vvec in _poly_vector_solutions(B, sp, degree_bound):
            results.append((s, _normalize_direction(vvec)))
    return results


@dataclass
class FactorizationBasis:
    Q: object  # GaugeMatrix
    complete: bool
    kernels: list


def factorization_basis(solutions) -> FactorizationBasis:
    """Change-of-basis matrix assembled from exterior-square exponential
    solutions.

    Each direction Y (ordered z01, z02, z03, z12, z13, z23) must satisfy
    the Pluecker quadric; the kernel of its 4x4 operator matrix supplies
    columns of Q.  Kernel vectors are scaled so their last nonzero
    coordinate is 1 and ordered by descending pivot index.  If the columns
    do not span, the basis is completed with unit vectors and flagged as
    partial (the factorization is then only block-triangular)."""
    from .variational import GaugeMatrix

    cols = []
    kernels = []
    for Y in solutions:
        v = [_coerce_entry(y) for y in Y]
        if not plucker_check(v):
            raise ValueError("solution fails the Pluecker condition")
        z01, z02, z03, z12, z13, z23 = v
        zero = ExactRatFunc.coerce(0)
        M = ExactMatrix(
            [
                [z12, -z02, z01, zero],
                [z13, -z03, zero, z01],
                [z23, zero, -z03, z02],
                [zero, z23, -z13, z12],
            ]
        )
        canon = []
        for vec in M.nullspace():
            piv = max(i for i, c in enumerate(vec) if not c.is_zero())
            inv = vec[piv].inverse()
            canon.append(([c * inv for c in vec], piv))
        canon.sort(key=lambda p: -p[1])
        kernels.append([c for c, _ in canon])
        cols.extend(c for c, _ in canon)

    complete = False
    if len(cols) == 4:
        trial = ExactMatrix([[cols[j][i] for j in range(4)] for i in range(4)])
        complete = not trial.det().is_zero()
    if not complete:
        for i in range(4):
            if len(cols) == 4:
                break
            unit = [ExactRatFunc.coerce(1 if j == i else 0) for j in range(4)]
            trial = ExactMatrix(
                [
                    [(cols + [unit])[j][i2] for j in range(len(cols) + 1)]
                    for i2 in range(4)
                ]
            )
            if trial.rank() == len(cols) + 1:
                cols.append(unit)
    Qm = ExactMatrix([[cols[j][i] for j in range(4)] for i in range(4)])
    return FactorizationBasis(Q=GaugeMatrix(Qm), complete=complete, kernels=kernels)
