"""Truncated Fourier-Taylor symbol algebra on the cotangent space of T^2.

A symbol is a finite double expansion

    s(x, xi) = sum_{m, alpha} c_{m, alpha} exp(i m.x) xi^alpha,

with integer modes |m_1|, |m_2| <= K and xi-exponents alpha_1+alpha_2 <= D.
The module provides exact arithmetic on this class (products, Poisson
brackets, star-product bidifferentials, jet reciprocals) plus h-power series
of symbols and the two exponential-conjugation drivers used by the normal
form machinery.

Truncation bookkeeping
----------------------
Dropping xi-degrees beyond a target jet degree is ordinary jet arithmetic
and is recorded per operation in ``xi_truncated`` (not propagated).
Dropping Fourier modes beyond the mode cap corrupts subsequent products at
low modes; that event is sticky: ``mode_overflow`` is inherited by every
symbol computed from an overflowed one, and certified runs must end with
``mode_overflow == False``.

Star-product convention (load-bearing)
--------------------------------------
    a # b = sum_n (h/(2i))^n / n! (d_xi.d_y - d_x.d_eta)^n a(x,xi) b(y,eta)|

so the h^0 coefficient is the product, the h^1 coefficient is (1/2i){a, b},
and Op(a) Op(b) = Op(a # b) holds exactly for the torus midpoint matrix rule
of torusquant.  Consistency of the pair is asserted by tests.
"""

from __future__ import annotations

import numpy as np

from . import _backend
from .errors import DivisorFloorError, ValidationError

# configured maxima for retained degrees, and the sparse-form drop threshold
K_CAP = 8
D_CAP = 6
DROP = 1e-30

KERNEL_BACKEND = _backend.BACKEND


class FourierTaylorSymbol:
    """Sparse symbol with coefficients keyed by (m1, m2, alpha1, alpha2).

    Treat instances as immutable values; all operations return new symbols.
    """

    __slots__ = ("coeffs", "K", "D", "mode_overflow", "xi_truncated",
                 "_packed")

    def __init__(self, coeffs=None, K=None, D=None, *,
                 mode_overflow=False, xi_truncated=False, drop=DROP):
        clean = {}
        kmax = 0
        dmax = 0
        if coeffs:
            for key, c in coeffs.items():
                c = complex(c)
                if abs(c) <= drop:
                    continue
                m1, m2, a1, a2 = (int(v) for v in key)
                if a1 < 0 or a2 < 0:
                    raise ValidationError(f"negative xi exponent in key {key}")
                clean[(m1, m2, a1, a2)] = c
                kmax = max(kmax, abs(m1), abs(m2))
                dmax = max(dmax, a1 + a2)
        self.coeffs = clean
        self.K = kmax if K is None else int(K)
        self.D = dmax if D is None else int(D)
        if kmax > self.K or dmax > self.D:
            raise ValidationError(
                f"coefficients exceed declared bounds K={self.K}, D={self.D}")
        self.mode_overflow = bool(mode_overflow)
        self.xi_truncated = bool(xi_truncated)
        self._packed = None

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, K=0, D=0):
        return cls({}, K=K, D=D)

    @classmethod
    def constant(cls, c):
        return cls({(0, 0, 0, 0): c})

    @classmethod
    def monomial(cls, m=(0, 0), alpha=(0, 0), c=1.0):
        return cls({(m[0], m[1], alpha[0], alpha[1]): c})

    # -- basic queries -------------------------------------------------

    def is_zero(self):
        return not self.coeffs

    def is_x_independent(self, tol=0.0):
        return all(abs(c) <= tol for (m1, m2, _, _), c in self.coeffs.items()
                   if (m1, m2) != (0, 0))

    def x_degree(self):
        return max((max(abs(k[0]), abs(k[1])) for k in self.coeffs), default=0)

    def xi_degree(self):
        return max((k[2] + k[3] for k in self.coeffs), default=0)

    def norm_max(self):
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def norm_sum(self):
        return sum(abs(c) for c in self.coeffs.values())

    def coefficient(self, m=(0, 0), alpha=(0, 0)):
        return self.coeffs.get((m[0], m[1], alpha[0], alpha[1]), 0j)

    def __repr__(self):
        n = len(self.coeffs)
        return (f"FourierTaylorSymbol({n} terms, K={self.K}, D={self.D}"
                + (", overflow" if self.mode_overflow else "") + ")")

    def _pack(self):
        if self._packed is None:
            keys = sorted(self.coeffs)
            if keys:
                arr = np.array(keys, dtype=np.int32)
                vals = np.array([self.coeffs[k] for k in keys],
                                dtype=np.complex128)
            else:
                arr = np.zeros((0, 4), dtype=np.int32)
                vals = np.zeros(0, dtype=np.complex128)
            self._packed = (arr[:, :2].copy(), arr[:, 2:].copy(), vals)
        return self._packed

    # -- linear operations ---------------------------------------------

    def scale(self, c):
        c = complex(c)
        return FourierTaylorSymbol(
            {k: c * v for k, v in self.coeffs.items()},
            K=self.K, D=self.D, mode_overflow=self.mode_overflow)

    def add(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0j) + v
        return FourierTaylorSymbol(
            out, K=max(self.K, other.K), D=max(self.D, other.D),
            mode_overflow=self.mode_overflow or other.mode_overflow)

    def __add__(self, other):
        if isinstance(other, FourierTaylorSymbol):
            return self.add(other)
        return self.add(FourierTaylorSymbol.constant(other))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, FourierTaylorSymbol):
            other = FourierTaylorSymbol.constant(other)
        return self.add(other.scale(-1.0))

    def __mul__(self, other):
        if isinstance(other, FourierTaylorSymbol):
            return multiply(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.scale(-1.0)

    # -- differentiation and projections --------------------------------

    def dx(self, j):
        """Derivative in x_j (j = 1 or 2)."""
        out = {}
        for (m1, m2, a1, a2), c in self.coeffs.items():
            m = m1 if j == 1 else m2
            if m != 0:
                out[(m1, m2, a1, a2)] = 1j * m * c
        return FourierTaylorSymbol(out, K=self.K, D=self.D,
                                   mode_overflow=self.mode_overflow)

    def dxi(self, j):
        """Derivative in xi_j (j = 1 or 2)."""
        out = {}
        for (m1, m2, a1, a2), c in self.coeffs.items():
            if j == 1 and a1 > 0:
                out[(m1, m2, a1 - 1, a2)] = a1 * c
            elif j == 2 and a2 > 0:
                out[(m1, m2, a1, a2 - 1)] = a2 * c
        return FourierTaylorSymbol(out, K=self.K, D=max(self.D - 1, 0),
                                   mode_overflow=self.mode_overflow)

    def average_x1(self):
        """Projection onto modes with m1 = 0 (the x1-average)."""
        out = {k: c for k, c in self.coeffs.items() if k[0] == 0}
        return FourierTaylorSymbol(out, K=self.K, D=self.D,
                                   mode_overflow=self.mode_overflow)

    def average_x(self):
        """Projection onto the m = (0,0) mode (full torus average)."""
        out = {k: c for k, c in self.coeffs.items() if k[0] == 0 and k[1] == 0}
        return FourierTaylorSymbol(out, K=self.K, D=self.D,
                                   mode_overflow=self.mode_overflow)

    def x_dependent_part(self):
        out = {k: c for k, c in self.coeffs.items() if (k[0], k[1]) != (0, 0)}
        return FourierTaylorSymbol(out, K=self.K, D=self.D,
                                   mode_overflow=self.mode_overflow)

    def prune(self, threshold):
        """Drop coefficients with |c| < threshold (no flags; noise cleanup)."""
        out = {k: c for k, c in self.coeffs.items() if abs(c) >= threshold}
        return FourierTaylorSymbol(out, K=self.K, D=self.D,
                                   mode_overflow=self.mode_overflow)

    def truncate(self, K=None, D=None):
        """Restrict to |m_i| <= K, |alpha| <= D, discarding the rest."""
        K = self.K if K is None else K
        D = self.D if D is None else D
        out = {}
        dropped_m = dropped_d = False
        for (m1, m2, a1, a2), c in self.coeffs.items():
            if abs(m1) > K or abs(m2) > K:
                dropped_m = True
            elif a1 + a2 > D:
                dropped_d = True
            else:
                out[(m1, m2, a1, a2)] = c
        return FourierTaylorSymbol(
            out, K=K, D=D,
            mode_overflow=self.mode_overflow or dropped_m,
            xi_truncated=dropped_d)

    # -- evaluation ------------------------------------------------------

    def evaluate(self, x1, x2, xi1, xi2):
        """Evaluate pointwise; arguments broadcast like numpy arrays."""
        x1 = np.asarray(x1)
        res = np.zeros(np.broadcast(x1, x2, xi1, xi2).shape,
                       dtype=np.complex128)
        for (m1, m2, a1, a2), c in self.coeffs.items():
            term = c * np.exp(1j * (m1 * x1 + m2 * x2))
            if a1:
                term = term * np.asarray(xi1) ** a1
            if a2:
                term = term * np.asarray(xi2) ** a2
            res = res + term
        return res

    def xi_polynomial_at_mode(self, m):
        """Coefficient map alpha -> c of the xi-polynomial at x-mode m."""
        m1, m2 = m
        return {(a1, a2): c for (k1, k2, a1, a2), c in self.coeffs.items()
                if k1 == m1 and k2 == m2}

    def x_modes(self):
        return sorted({(k[0], k[1]) for k in self.coeffs})

    # -- serialization ----------------------------------------------------

    def to_json_dict(self):
        coeffs = [
            {"m": [k[0], k[1]], "alpha": [k[2], k[3]],
             "re": self.coeffs[k].real, "im": self.coeffs[k].imag}
            for k in sorted(self.coeffs)
        ]
        return {"K": self.K, "D": self.D, "coeffs": coeffs}

    @classmethod
    def from_json_dict(cls, d):
        coeffs = {}
        for entry in d["coeffs"]:
            key = (entry["m"][0], entry["m"][1],
                   entry["alpha"][0], entry["alpha"][1])
            coeffs[key] = complex(entry["re"], entry.get("im", 0.0))
        return cls(coeffs, K=d["K"], D=d["D"])


def max_coeff_diff(a, b):
    """Largest coefficient magnitude of a - b (test helper)."""
    keys = set(a.coeffs) | set(b.coeffs)
    return max((abs(a.coeffs.get(k, 0j) - b.coeffs.get(k, 0j))
                for k in keys), default=0.0)


# -- products and brackets ------------------------------------------------

def star_bidifferential(a, b, n, kcap=None, dcap=None, drop=DROP):
    """Order-n bidifferential term of the star product (without h^n).

    n = 0 is the plain product; n = 1 equals (1/2i){a, b}.  The result is
    truncated to |m_i| <= kcap, |alpha| <= dcap with the natural bounds
    (K_a + K_b, D_a + D_b - n) capped by the configured maxima.
    """
    kt = min(a.K + b.K, K_CAP if kcap is None else kcap)
    dt = min(max(a.D + b.D - n, 0), D_CAP if dcap is None else dcap)
    ma, aa, va = a._pack()
    mb, ab, vb = b._pack()
    keys, vals, dm, dx_ = _backend.star_term(ma, aa, va, mb, ab, vb,
                                             n, kt, dt, drop)
    out = {tuple(int(v) for v in k): complex(c) for k, c in zip(keys, vals)}
    return FourierTaylorSymbol(
        out, K=kt, D=dt,
        mode_overflow=a.mode_overflow or b.mode_overflow or dm,
        xi_truncated=dx_)


def multiply(a, b, kcap=None, dcap=None):
    """Pointwise product, coefficientwise convolution in (m, alpha)."""
    return star_bidifferential(a, b, 0, kcap=kcap, dcap=dcap)


def poisson_bracket(a, b, kcap=None, dcap=None):
    """{a, b} = d_xi a . d_x b - d_x a . d_xi b."""
    return star_bidifferential(a, b, 1, kcap=kcap, dcap=dcap).scale(2j)


def taylor_reciprocal(f, D=None, floor=1e-12):
    """Jet inverse: x-independent g with f*g = 1 + O(xi^{D+1}).

    Raises DivisorFloorError when |f(0)| < floor (vanishing divisor).
    """
    if not f.is_x_independent():
        raise ValidationError("taylor_reciprocal requires an x-independent "
                              "symbol")
    D = f.D if D is None else int(D)
    f0 = f.coefficient((0, 0), (0, 0))
    if abs(f0) < floor:
        raise DivisorFloorError(
            f"divisor magnitude {abs(f0):.3e} below floor {floor:.3e}")
    # f = f0 (1 - u) with u(0) = 0; g = (1/f0) sum_k u^k, exact mod xi^{D+1}
    u = FourierTaylorSymbol.constant(1.0) - f.scale(1.0 / f0)
    acc = FourierTaylorSymbol.constant(1.0)
    p = FourierTaylorSymbol.constant(1.0)
    for _ in range(D):
        p = multiply(p, u, kcap=0, dcap=D)
        if p.is_zero():
            break
        acc = acc.add(p)
    g = acc.scale(1.0 / f0)
    return FourierTaylorSymbol(g.coeffs, K=0, D=D,
                               mode_overflow=f.mode_overflow)


# -- h-power series --------------------------------------------------------

class HSeries:
    """Truncated power series in h with FourierTaylorSymbol coefficients."""

    __slots__ = ("terms", "N")

    def __init__(self, terms, N=None):
        terms = list(terms)
        if N is None:
            N = len(terms) - 1
        if N < 0:
            raise ValidationError("HSeries needs order N >= 0")
        while len(terms) < N + 1:
            terms.append(FourierTaylorSymbol.zero())
        if len(terms) != N + 1:
            raise ValidationError(
                f"expected {N + 1} terms for order {N}, got {len(terms)}")
        self.terms = terms
        self.N = N

    @classmethod
    def from_symbol(cls, sym, N):
        return cls([sym], N=N)

    def term(self, n):
        return self.terms[n]

    def scale(self, c):
        return HSeries([t.scale(c) for t in self.terms], N=self.N)

    def add(self, other):
        N = max(self.N, other.N)
        out = []
        for n in range(N + 1):
            a = self.terms[n] if n <= self.N else FourierTaylorSymbol.zero()
            b = other.terms[n] if n <= other.N else FourierTaylorSymbol.zero()
            out.append(a.add(b))
        return HSeries(out, N=N)

    def __add__(self, other):
        return self.add(other)

    def is_zero(self):
        return all(t.is_zero() for t in self.terms)

    def norm_max(self):
        return max((t.norm_max() for t in self.terms), default=0.0)

    def mode_overflow(self):
        return any(t.mode_overflow for t in self.terms)

    def x_dependent_defect(self):
        """Per-order max coefficient magnitude over modes m != 0."""
        return [t.x_dependent_part().norm_max() for t in self.terms]

    def prune(self, threshold):
        return HSeries([t.prune(threshold) for t in self.terms], N=self.N)

    def evaluate_at_h(self, h, x1, x2, xi1, xi2):
        res = 0
        for n, t in enumerate(self.terms):
            if not t.is_zero():
                res = res + h ** n * t.evaluate(x1, x2, xi1, xi2)
        return res

    def to_json_dict(self):
        return {"N": self.N, "terms": [t.to_json_dict() for t in self.terms]}

    @classmethod
    def from_json_dict(cls, d):
        return cls([FourierTaylorSymbol.from_json_dict(t)
                    for t in d["terms"]], N=d["N"])

    def __repr__(self):
        return f"HSeries(N={self.N})"


def hseries_star(A, B, N, kcap=None, dcap=None, drop=DROP):
    """Star product of two h-series truncated at h^N."""
    out = [FourierTaylorSymbol.zero() for _ in range(N + 1)]
    deg_a = [t.xi_degree() for t in A.terms]
    deg_b = [t.xi_degree() for t in B.terms]
    for s in range(N + 1):
        acc = out[s]
        for n in range(min(s, A.N) + 1):
            a = A.terms[n]
            if a.is_zero():
                continue
            for m in range(min(s - n, B.N) + 1):
                r = s - n - m
                b = B.terms[m]
                if b.is_zero():
                    continue
                if r > deg_a[n] + deg_b[m]:
                    continue  # bidifferential vanishes beyond total xi-degree
                acc = acc.add(star_bidifferential(a, b, r, kcap=kcap,
                                                  dcap=dcap, drop=drop))
        out[s] = acc
    return HSeries(out, N=N)


def moyal_conjugation_step(P, a, j, N, kcap=None, dcap=None, drop=DROP):
    """Conjugation e^{ad_{h^j a}} P truncated at h^N.

    ad is the Weyl commutator at symbol level: the h^{l+j+1} coefficient
    gains (1/i){a, p_l} and odd star orders r = 3, 5, ... contribute the
    h^2-spaced corrections.  a = 0 returns P unchanged.
    """
    if a.is_zero():
        return HSeries(list(P.terms[:N + 1]) if P.N >= N else list(P.terms),
                       N=N)

    deg_a = a.xi_degree()

    def ad(T):
        out = [FourierTaylorSymbol.zero() for _ in range(N + 1)]
        deg_t = [t.xi_degree() for t in T.terms]
        for s in range(N + 1):
            r = 1
            while True:
                ell = s - j - r
                if ell < 0:
                    break
                if ell <= T.N and not T.terms[ell].is_zero():
                    if r <= deg_a + deg_t[ell]:
                        out[s] = out[s].add(
                            star_bidifferential(a, T.terms[ell], r,
                                                kcap=kcap, dcap=dcap,
                                                drop=drop).scale(2))
                r += 2
        return HSeries(out, N=N)

    acc = HSeries(list(P.terms[:N + 1]), N=N) if P.N >= N else \
        HSeries(list(P.terms), N=N)
    term = acc
    for k in range(1, N + 2):
        term = ad(term).scale(1.0 / k).prune(drop)
        if term.is_zero():
            break
        acc = acc.add(term)
    return acc


def weight_conjugation(P, W, N, tol=1e-15, max_k=120, kcap=None,
                       dcap=None, drop=DROP):
    """Conjugation e^{ad_B} P with B = (i/h) Op(W), truncated at h^N.

    ad_B keeps the h-order at star order r = 1 (classical flow by H_W) and
    adds h^2 per extra odd order, so the exponential is summed until the
    increment norm falls below tol relative to P.  Converges for ||W|| < 1.
    """
    deg_w = W.xi_degree()

    def ad(T):
        out = [FourierTaylorSymbol.zero() for _ in range(N + 1)]
        deg_t = [t.xi_degree() for t in T.terms]
        for s in range(N + 1):
            r = 1
            while True:
                ell = s - (r - 1)
                if ell < 0:
                    break
                if ell <= T.N and not T.terms[ell].is_zero():
                    if r <= deg_w + deg_t[ell]:
                        out[s] = out[s].add(
                            star_bidifferential(W, T.terms[ell], r,
                                                kcap=kcap, dcap=dcap,
                                                drop=drop).scale(2j))
                r += 2
        return HSeries(out, N=N)

    scale = max(P.norm_max(), 1.0)
    acc = HSeries(list(P.terms[:N + 1]), N=N) if P.N >= N else \
        HSeries(list(P.terms), N=N)
    term = acc
    for k in range(1, max_k + 1):
        term = ad(term).scale(1.0 / k).prune(drop)
        nrm = term.norm_max()
        if nrm == 0.0:
            break
        acc = acc.add(term)
        if nrm < tol * scale:
            break
    else:
        raise DivisorFloorError(
            "weight conjugation series did not converge "
            f"(last increment {nrm:.3e})")
    return acc
