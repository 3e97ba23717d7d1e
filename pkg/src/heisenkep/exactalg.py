"""Exact arithmetic over the Gaussian rationals Q(i).

Provides scalars, univariate polynomials, rational functions and matrices
with bit-exact arithmetic.  All values are immutable and canonical at
construction time, so equality is structural and instances are hashable.

The coefficient field is Q(i) only; no further algebraic extensions are
introduced.  Quantities that genuinely live outside Q(i) (square roots of
parameters, numeric root locations) are handled by the numeric layers.

Serialization: scalars render as ``a/b+c/d*i`` with zero parts omitted and
unit denominators dropped; polynomials as JSON arrays of such strings in
degree-ascending order.
"""

from __future__ import annotations

import re as _re
from fractions import Fraction

import numpy as np

__all__ = [
    "ExactScalar",
    "ExactPoly",
    "ExactRatFunc",
    "ExactMatrix",
    "ratfunc_normalize",
    "nullspace",
    "matrix_inverse",
    "poly_roots_numeric",
]


class SingularMatrixError(ZeroDivisionError):
    """Raised when an exact inverse of a singular matrix is requested."""


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------

class ExactScalar:
    """A Gaussian rational a/b + (c/d)i with Fraction parts.

    ``Fraction`` keeps each part in lowest terms with a positive
    denominator, which is exactly the canonical form required here.
    """

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("ExactScalar is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def coerce(x) -> "ExactScalar":
        if isinstance(x, ExactScalar):
            return x
        if isinstance(x, (int, Fraction)):
            return ExactScalar(x)
        if isinstance(x, complex):
            raise TypeError("floats/complex are not exact; convert explicitly")
        raise TypeError(f"cannot coerce {type(x).__name__} to ExactScalar")

    @staticmethod
    def i() -> "ExactScalar":
        return ExactScalar(0, 1)

    # -- predicates ---------------------------------------------------------

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self) -> bool:
        return not self.is_zero()

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = ExactScalar.coerce(other)
        return ExactScalar(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = ExactScalar.coerce(other)
        return ExactScalar(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return ExactScalar.coerce(other) - self

    def __neg__(self):
        return ExactScalar(-self.re, -self.im)

    def __mul__(self, other):
        other = ExactScalar.coerce(other)
        return ExactScalar(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def inverse(self) -> "ExactScalar":
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("inverse of zero ExactScalar")
        return ExactScalar(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * ExactScalar.coerce(other).inverse()

    def __rtruediv__(self, other):
        return ExactScalar.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = ExactScalar(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "ExactScalar":
        return ExactScalar(self.re, -self.im)

    # -- comparisons / hashing ---------------------------------------------

    def __eq__(self, other):
        try:
            other = ExactScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    # -- conversions --------------------------------------------------------

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    @staticmethod
    def _fmt_frac(f: Fraction) -> str:
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        if self.re != 0:
            parts.append(self._fmt_frac(self.re))
        if self.im != 0:
            s = self._fmt_frac(self.im) + "*i"
            if parts and not s.startswith("-"):
                s = "+" + s
            parts.append(s)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"ExactScalar({self})"

    _TOKEN = _re.compile(r"^([+-]?\d+(?:/\d+)?)(\*i)?$")

    @staticmethod
    def parse(s: str) -> "ExactScalar":
        """Parse the ``a/b+c/d*i`` wire format (zero parts may be omitted)."""
        s = s.replace(" ", "")
        if s in ("", "0"):
            return ExactScalar(0)
        # split into signed tokens
        toks, cur = [], ""
        for ch in s:
            if ch in "+-" and cur and cur[-1] not in "+-/*":
                toks.append(cur)
                cur = ch
            else:
                cur += ch
        toks.append(cur)
        re_part, im_part = Fraction(0), Fraction(0)
        for tok in toks:
            m = ExactScalar._TOKEN.match(tok)
            if not m:
                raise ValueError(f"malformed ExactScalar token {tok!r} in {s!r}")
            val = Fraction(m.group(1))
            if m.group(2):
                im_part += val
            else:
                re_part += val
        return ExactScalar(re_part, im_part)


_ZERO = ExactScalar(0)
_ONE = ExactScalar(1)


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------

class ExactPoly:
    """Univariate polynomial over Q(i), coefficients stored degree-ascending.

    The zero polynomial has an empty coefficient tuple and degree -1
    (the distinguished sentinel).  Trailing zero coefficients are stripped
    at construction so the leading coefficient is always nonzero.
    """

    __slots__ = ("coeffs", "var")

    def __init__(self, coeffs=(), var: str = "t"):
        cs = [ExactScalar.coerce(c) for c in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))
        object.__setattr__(self, "var", var)

    def __setattr__(self, name, value):
        raise AttributeError("ExactPoly is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(c, var: str = "t") -> "ExactPoly":
        return ExactPoly([ExactScalar.coerce(c)], var=var)

    @staticmethod
    def x(var: str = "t") -> "ExactPoly":
        return ExactPoly([0, 1], var=var)

    @staticmethod
    def monomial(c, deg: int, var: str = "t") -> "ExactPoly":
        return ExactPoly([0] * deg + [c], var=var)

    @staticmethod
    def coerce(p, var: str = "t") -> "ExactPoly":
        if isinstance(p, ExactPoly):
            return p
        return ExactPoly.constant(ExactScalar.coerce(p), var=var)

    # -- structure ----------------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self):
        return bool(self.coeffs)

    def leading(self) -> ExactScalar:
        if self.is_zero():
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def coeff(self, k: int) -> ExactScalar:
        return self.coeffs[k] if 0 <= k <= self.degree else _ZERO

    # -- arithmetic ---------------------------------------------------------

    def _cvar(self, other: "ExactPoly") -> str:
        if self.is_zero():
            return other.var
        if other.is_zero() or self.var == other.var:
            return self.var
        raise ValueError(f"variable mismatch: {self.var} vs {other.var}")

    def __add__(self, other):
        other = ExactPoly.coerce(other, self.var)
        var = self._cvar(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return ExactPoly(
            [self.coeff(k) + other.coeff(k) for k in range(n)], var=var
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-ExactPoly.coerce(other, self.var))

    def __rsub__(self, other):
        return ExactPoly.coerce(other, self.var) - self

    def __neg__(self):
        return ExactPoly([-c for c in self.coeffs], var=self.var)

    def __mul__(self, other):
        if isinstance(other, ExactScalar):
            other = ExactPoly.constant(other, var=self.var)
        other = ExactPoly.coerce(other, self.var)
        var = self._cvar(other)
        if self.is_zero() or other.is_zero():
            return ExactPoly((), var=var)
        out = [_ZERO] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return ExactPoly(out, var=var)

    __rmul__ = __mul__

    def scale(self, s) -> "ExactPoly":
        s = ExactScalar.coerce(s)
        return ExactPoly([c * s for c in self.coeffs], var=self.var)

    def __pow__(self, n: int) -> "ExactPoly":
        if n < 0:
            raise ValueError("negative polynomial power")
        out = ExactPoly.constant(1, var=self.var)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __divmod__(self, other):
        other = ExactPoly.coerce(other, self.var)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        var = self._cvar(other)
        rem = list(self.coeffs)
        q = [_ZERO] * max(0, len(rem) - len(other.coeffs) + 1)
        inv_lead = other.leading().inverse()
        d = other.degree
        for k in range(len(rem) - 1, d - 1, -1):
            if rem[k].is_zero():
                continue
            f = rem[k] * inv_lead
            q[k - d] = f
            for j, b in enumerate(other.coeffs):
                rem[k - d + j] = rem[k - d + j] - f * b
        return ExactPoly(q, var=var), ExactPoly(rem[:d], var=var)

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def exact_div(self, other) -> "ExactPoly":
        q, r = divmod(self, other)
        if not r.is_zero():
            raise ValueError("exact_div: division is not exact")
        return q

    def monic(self) -> "ExactPoly":
        if self.is_zero():
            return self
        return self.scale(self.leading().inverse())

    def gcd(self, other) -> "ExactPoly":
        """Monic gcd via the Euclidean algorithm (field coefficients)."""
        return _poly_gcd(self, ExactPoly.coerce(other, self.var))

    def lcm(self, other) -> "ExactPoly":
        other = ExactPoly.coerce(other, self.var)
        if self.is_zero() or other.is_zero():
            return ExactPoly((), var=self.var)
        g = self.gcd(other)
        return (self * other).exact_div(g).monic()

    def derivative(self) -> "ExactPoly":
        return ExactPoly(
            [c * ExactScalar(k) for k, c in enumerate(self.coeffs)][1:],
            var=self.var,
        )

    def compose_linear(self, a, b) -> "ExactPoly":
        """p(a*x + b) by Horner evaluation in the polynomial ring."""
        a = ExactScalar.coerce(a)
        b = ExactScalar.coerce(b)
        lin = ExactPoly([b, a], var=self.var)
        out = ExactPoly((), var=self.var)
        for c in reversed(self.coeffs):
            out = out * lin + ExactPoly.constant(c, var=self.var)
        return out

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        if isinstance(x, (ExactScalar, int, Fraction)):
            x = ExactScalar.coerce(x)
            out = _ZERO
            for c in reversed(self.coeffs):
                out = out * x + c
            return out
        out = 0j
        for c in reversed(self.coeffs):
            out = out * x + c.to_complex()
        return out

    # -- comparisons / serialization ----------------------------------------

    def __eq__(self, other):
        if not isinstance(other, (ExactPoly, ExactScalar, int, Fraction)):
            return NotImplemented
        other = ExactPoly.coerce(other, self.var)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def to_json(self) -> list:
        return [str(c) for c in self.coeffs]

    @staticmethod
    def from_json(data, var: str = "t") -> "ExactPoly":
        return ExactPoly([ExactScalar.parse(s) for s in data], var=var)

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for k, c in enumerate(self.coeffs):
            if c.is_zero():
                continue
            cs = str(c)
            if k == 0:
                terms.append(cs)
            else:
                head = "" if cs == "1" else f"({cs})*"
                pw = self.var if k == 1 else f"{self.var}^{k}"
                terms.append(f"{head}{pw}")
        return " + ".join(terms)

    def __repr__(self):
        return f"ExactPoly({self})"


def _poly_gcd(a: ExactPoly, b: ExactPoly) -> ExactPoly:
    """Monic Euclidean gcd with per-step monic rescaling."""
    if a.is_zero():
        return b.monic() if not b.is_zero() else b
    if b.is_zero():
        return a.monic()
    a, b = a.monic(), b.monic()
    while not b.is_zero():
        r = a % b
        a, b = b, (r.monic() if not r.is_zero() else r)
    return a


def squarefree_decomposition(p: ExactPoly) -> list[tuple[ExactPoly, int]]:
    """Yun-style decomposition: returns [(f_i, m_i)] with p ~ prod f_i^{m_i},
    each f_i squarefree and pairwise coprime."""
    if p.is_zero():
        raise ValueError("zero polynomial")
    p = p.monic()
    out = []
    m = 1
    while p.degree > 0:
        g = p.gcd(p.derivative())
        f = p.exact_div(g).monic()  # product of factors of multiplicity >= m
        if f.degree > 0:
            # factors with multiplicity exactly m: f / gcd(f, g)
            h = f.gcd(g)
            exact = f.exact_div(h).monic()
            if exact.degree > 0:
                out.append((exact, m))
        p = g
        m += 1
    return out


# ---------------------------------------------------------------------------
# Rational functions
# ---------------------------------------------------------------------------

class ExactRatFunc:
    """Quotient of ExactPoly values, canonical at construction:
    gcd(num, den) = 1 and den monic."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=1, var: str = "t", _canonical: bool = False):
        num = ExactPoly.coerce(num, var)
        den = ExactPoly.coerce(den, num.var if not num.is_zero() else var)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator in ExactRatFunc")
        if not _canonical:
            if num.is_zero():
                den = ExactPoly.constant(1, var=den.var)
            else:
                g = num.gcd(den)
                if g.degree > 0:
                    num = num.exact_div(g)
                    den = den.exact_div(g)
                lead = den.leading()
                if lead != _ONE:
                    inv = lead.inverse()
                    num = num.scale(inv)
                    den = den.scale(inv)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, name, value):
        raise AttributeError("ExactRatFunc is immutable")

    @staticmethod
    def coerce(f, var: str = "t") -> "ExactRatFunc":
        if isinstance(f, ExactRatFunc):
            return f
        if isinstance(f, ExactPoly):
            return ExactRatFunc(f, 1, var=f.var)
        return ExactRatFunc(ExactPoly.coerce(f, var), 1, var=var)

    @property
    def var(self) -> str:
        return self.den.var

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __bool__(self):
        return not self.is_zero()

    def is_poly(self) -> bool:
        return self.den.degree == 0

    def as_poly(self) -> ExactPoly:
        if not self.is_poly():
            raise ValueError("not a polynomial")
        return self.num.scale(self.den.coeff(0).inverse())

    def __add__(self, other):
        other = ExactRatFunc.coerce(other, self.var)
        return ExactRatFunc(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-ExactRatFunc.coerce(other, self.var))

    def __rsub__(self, other):
        return ExactRatFunc.coerce(other, self.var) - self

    def __neg__(self):
        return ExactRatFunc(-self.num, self.den, _canonical=True)

    def __mul__(self, other):
        if isinstance(other, ExactScalar):
            return ExactRatFunc(self.num.scale(other), self.den)
        other = ExactRatFunc.coerce(other, self.var)
        return ExactRatFunc(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inverse(self) -> "ExactRatFunc":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero rational function")
        return ExactRatFunc(self.den, self.num)

    def __truediv__(self, other):
        return self * ExactRatFunc.coerce(other, self.var).inverse()

    def __rtruediv__(self, other):
        return ExactRatFunc.coerce(other, self.var) * self.inverse()

    def derivative(self) -> "ExactRatFunc":
        return ExactRatFunc(
            self.num.derivative() * self.den - self.num * self.den.derivative(),
            self.den * self.den,
        )

    def __call__(self, x):
        if isinstance(x, (ExactScalar, int, Fraction)):
            d = self.den(x)
            if isinstance(d, ExactScalar) and d.is_zero():
                raise ZeroDivisionError("evaluation at a pole")
            return self.num(x) / d
        return self.num(x) / self.den(x)

    def __eq__(self, other):
        try:
            other = ExactRatFunc.coerce(other, self.var)
        except TypeError:
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __str__(self):
        if self.is_poly():
            return str(self.as_poly())
        return f"({self.num})/({self.den})"

    def __repr__(self):
        return f"ExactRatFunc({self})"

    def to_json(self) -> dict:
        return {"num": self.num.to_json(), "den": self.den.to_json()}

    @staticmethod
    def from_json(data, var: str = "t") -> "ExactRatFunc":
        return ExactRatFunc(
            ExactPoly.from_json(data["num"], var),
            ExactPoly.from_json(data["den"], var),
        )


def ratfunc_normalize(f: ExactRatFunc) -> ExactRatFunc:
    """Canonical form of a rational function (coprime, monic denominator).

    Construction already canonicalizes, so this re-runs the reduction on the
    stored numerator/denominator pair and is idempotent.
    """
    return ExactRatFunc(f.num, f.den)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

class ExactMatrix:
    """Rectangular matrix with ExactRatFunc entries."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries, var: str = "t"):
        ents = [
            [ExactRatFunc.coerce(e, var) for e in row] for row in entries
        ]
        if not ents or not ents[0]:
            raise ValueError("matrix dimensions must be >= 1")
        ncols = len(ents[0])
        if any(len(r) != ncols for r in ents):
            raise ValueError("ragged matrix")
        object.__setattr__(self, "rows", len(ents))
        object.__setattr__(self, "cols", ncols)
        object.__setattr__(self, "entries", tuple(tuple(r) for r in ents))

    def __setattr__(self, name, value):
        raise AttributeError("ExactMatrix is immutable")

    @staticmethod
    def identity(n: int, var: str = "t") -> "ExactMatrix":
        return ExactMatrix(
            [[1 if i == j else 0 for j in range(n)] for i in range(n)], var=var
        )

    @staticmethod
    def zero(rows: int, cols: int, var: str = "t") -> "ExactMatrix":
        return ExactMatrix([[0] * cols for _ in range(rows)], var=var)

    @property
    def var(self) -> str:
        return self.entries[0][0].var

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __add__(self, other):
        if self.rows != other.rows or self.cols != other.cols:
            raise ValueError("shape mismatch")
        return ExactMatrix(
            [
                [self[i, j] + other[i, j] for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def __sub__(self, other):
        if self.rows != other.rows or self.cols != other.cols:
            raise ValueError("shape mismatch")
        return ExactMatrix(
            [
                [self[i, j] - other[i, j] for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def __neg__(self):
        return ExactMatrix(
            [[-self[i, j] for j in range(self.cols)] for i in range(self.rows)]
        )

    def __matmul__(self, other):
        if isinstance(other, ExactMatrix):
            if self.cols != other.rows:
                raise ValueError("shape mismatch in matmul")
            out = []
            for i in range(self.rows):
                row = []
                for j in range(other.cols):
                    acc = ExactRatFunc.coerce(0, self.var)
                    for k in range(self.cols):
                        if self[i, k].is_zero() or other[k, j].is_zero():
                            continue
                        acc = acc + self[i, k] * other[k, j]
                    row.append(acc)
                out.append(row)
            return ExactMatrix(out)
        raise TypeError("matmul expects an ExactMatrix")

    def scale(self, s) -> "ExactMatrix":
        return ExactMatrix(
            [[self[i, j] * s for j in range(self.cols)] for i in range(self.rows)]
        )

    def transpose(self) -> "ExactMatrix":
        return ExactMatrix(
            [[self[i, j] for i in range(self.rows)] for j in range(self.cols)]
        )

    def derivative(self) -> "ExactMatrix":
        return ExactMatrix(
            [
                [self[i, j].derivative() for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def conjugate_coeffs(self) -> "ExactMatrix":
        """Entrywise conjugation of Q(i) coefficients (the variable stays real)."""

        def conj_poly(p: ExactPoly) -> ExactPoly:
            return ExactPoly([c.conjugate() for c in p.coeffs], var=p.var)

        return ExactMatrix(
            [
                [
                    ExactRatFunc(conj_poly(self[i, j].num), conj_poly(self[i, j].den))
                    for j in range(self.cols)
                ]
                for i in range(self.rows)
            ]
        )

    def _rref(self):
        """Reduced row echelon form; returns (rref rows, pivot column list)."""
        m = [list(r) for r in self.entries]
        pivots = []
        r = 0
        for c in range(self.cols):
            pr = next((i for i in range(r, self.rows) if not m[i][c].is_zero()), None)
            if pr is None:
                continue
            m[r], m[pr] = m[pr], m[r]
            inv = m[r][c].inverse()
            m[r] = [e * inv for e in m[r]]
            for i in range(self.rows):
                if i != r and not m[i][c].is_zero():
                    f = m[i][c]
                    m[i] = [a - f * b for a, b in zip(m[i], m[r])]
            pivots.append(c)
            r += 1
            if r == self.rows:
                break
        return m, pivots

    def rank(self) -> int:
        return len(self._rref()[1])

    def nullspace(self) -> list[list[ExactRatFunc]]:
        """Basis of the right kernel over the rational-function field.

        Basis vectors are in reduced echelon normalization: each has a 1 in
        its free coordinate and the pivot coordinates filled in.
        """
        m, pivots = self._rref()
        free = [c for c in range(self.cols) if c not in pivots]
        basis = []
        one = ExactRatFunc.coerce(1, self.var)
        zero = ExactRatFunc.coerce(0, self.var)
        for fc in free:
            v = [zero] * self.cols
            v[fc] = one
            for r, pc in enumerate(pivots):
                v[pc] = -m[r][fc]
            basis.append(v)
        return basis

    def inverse(self) -> "ExactMatrix":
        if self.rows != self.cols:
            raise ValueError("inverse of non-square matrix")
        n = self.rows
        aug = ExactMatrix(
            [
                list(self.entries[i]) + [1 if j == i else 0 for j in range(n)]
                for i in range(n)
            ],
            var=self.var,
        )
        m, pivots = aug._rref()
        if len(pivots) < n or pivots[:n] != list(range(n)):
            raise SingularMatrixError("matrix is singular")
        return ExactMatrix([row[n:] for row in m])

    def det(self) -> ExactRatFunc:
        if self.rows != self.cols:
            raise ValueError("determinant of non-square matrix")
        m = [list(r) for r in self.entries]
        n = self.rows
        det = ExactRatFunc.coerce(1, self.var)
        sign = 1
        for c in range(n):
            pr = next((i for i in range(c, n) if not m[i][c].is_zero()), None)
            if pr is None:
                return ExactRatFunc.coerce(0, self.var)
            if pr != c:
                m[c], m[pr] = m[pr], m[c]
                sign = -sign
            det = det * m[c][c]
            inv = m[c][c].inverse()
            for i in range(c + 1, n):
                if m[i][c].is_zero():
                    continue
                f = m[i][c] * inv
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
        if sign < 0:
            det = -det
        return det

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "var": self.var,
            "entries": [
                [self[i, j].to_json() for j in range(self.cols)]
                for i in range(self.rows)
            ],
        }

    @staticmethod
    def from_json(data) -> "ExactMatrix":
        var = data.get("var", "t")
        return ExactMatrix(
            [
                [ExactRatFunc.from_json(e, var) for e in row]
                for row in data["entries"]
            ],
            var=var,
        )

    def __str__(self):
        return "\n".join(
            "[" + ", ".join(str(self[i, j]) for j in range(self.cols)) + "]"
            for i in range(self.rows)
        )

    def __repr__(self):
        return f"ExactMatrix(\n{self}\n)"


def nullspace(M: ExactMatrix) -> list[list[ExactRatFunc]]:
    """Exact right-kernel basis of M; empty list iff M is injective."""
    return M.nullspace()


def matrix_inverse(M: ExactMatrix) -> ExactMatrix:
    """Exact inverse; raises SingularMatrixError on singular input."""
    return M.inverse()


def poly_roots_numeric(p: ExactPoly, tol: float = 1e-9) -> list[complex]:
    """All deg(p) complex roots (with multiplicity) via companion eigenvalues.

    Each root is accepted only if the scaled residual |p(r)| / max(coeff
    magnitudes * max(1,|r|)^deg) stays below tol.
    """
    if p.is_zero():
        raise ValueError("zero polynomial has no well-defined roots")
    if p.degree == 0:
        return []
    cs = np.array([c.to_complex() for c in p.coeffs])
    roots = np.roots(cs[::-1])
    scale = np.max(np.abs(cs))
    for r in roots:
        res = abs(p(complex(r))) / (scale * max(1.0, abs(r)) ** p.degree)
        if res > tol:
            raise ArithmeticError(
                f"root {r} fails residual acceptance ({res:.3e} > {tol:.3e})"
            )
    return sorted(roots.tolist(), key=lambda z: (round(z.real, 10), round(z.imag, 10)))
