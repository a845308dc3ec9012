"""Reference oracle: Weyl quantization on the torus and dense eigensolve.

The operator acts on the Floquet space spanned by e_k(x) = exp(i x.(k +
theta)), k in Z^2, |k_i| <= M.  The matrix rule is the midpoint rule

    <e_l | Op(P) | e_k> = sum_n h^n  phat_{n, l-k}( h ((k+l)/2 + theta) ),

which pairs exactly with the star-product convention of the symbol algebra
(Op(a) Op(b) = Op(a # b) for polynomial symbols).  The spectrum inside a
rectangle is trusted only when the diagonal estimate on the outer quarter
of the window stays clear of the inflated rectangle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EigensolverError, UntrustedWindowError, ValidationError

MATRIX_DIM_CAP = 4096


@dataclass
class QuantizationWindow:
    """Retained modes |k_1|, |k_2| <= M with Floquet shift theta at scale h."""

    M: int
    theta: tuple
    h: float

    def __post_init__(self):
        if self.dim > MATRIX_DIM_CAP:
            raise ValidationError(
                f"matrix dimension {self.dim} exceeds cap {MATRIX_DIM_CAP}")
        if self.M < 2:
            raise ValidationError("window needs M >= 2")

    @property
    def dim(self):
        return (2 * self.M + 1) ** 2

    def mode_range(self):
        return np.arange(-self.M, self.M + 1)

    @classmethod
    def from_floquet(cls, floquet, h, M):
        """theta = -S/(2 pi h) - alpha0/4, reduced mod 1 to [-1/2, 1/2)."""
        th = -np.asarray(floquet.S, dtype=float) / (2 * np.pi * h) \
            - np.asarray(floquet.alpha0, dtype=float) / 4.0
        th = (th + 0.5) % 1.0 - 0.5
        return cls(M=M, theta=(float(th[0]), float(th[1])), h=h)


@dataclass
class OracleSpectrum:
    eigenvalues: np.ndarray
    window: QuantizationWindow
    trusted_rectangle: object = None

    def count(self):
        return len(self.eigenvalues)


def weyl_matrix(P, window):
    """Assemble the dense matrix of Op(P) on the window, column order
    lexicographic in k = (k_1, k_2)."""
    M = window.M
    h = window.h
    th1, th2 = window.theta
    side = 2 * M + 1
    dim = side * side
    ks = window.mode_range()
    mat = np.zeros((dim, dim), dtype=complex)
    for n in range(P.N + 1):
        term = P.term(n)
        if term.is_zero():
            continue
        hn = h ** n
        for m in term.x_modes():
            m1, m2 = m
            if abs(m1) > 2 * M or abs(m2) > 2 * M:
                raise ValidationError(
                    f"symbol x-mode {m} couples outside the window (M={M})")
            poly = term.xi_polynomial_at_mode(m)
            k1 = ks[max(0, -m1): side - max(0, m1)]
            k2 = ks[max(0, -m2): side - max(0, m2)]
            K1, K2 = np.meshgrid(k1, k2, indexing="ij")
            xi1 = h * (K1 + 0.5 * m1 + th1)
            xi2 = h * (K2 + 0.5 * m2 + th2)
            val = np.zeros_like(xi1, dtype=complex)
            for (a1, a2), c in poly.items():
                val = val + c * xi1 ** a1 * xi2 ** a2
            col = (K1 + M) * side + (K2 + M)
            row = (K1 + m1 + M) * side + (K2 + m2 + M)
            mat[row.ravel(), col.ravel()] += hn * val.ravel()
    return mat


def eigs(matrix):
    """All eigenvalues of a dense matrix, sorted by (Re, Im)."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError("eigs needs a square matrix")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("matrix entries must be finite")
    try:
        vals = scipy.linalg.eigvals(matrix, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise EigensolverError(f"dense eigensolver failed: {exc}") from None
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


@dataclass
class TrustReport:
    passed: bool
    margin: float
    n_boundary_modes: int
    M: int
    h: float

    def to_json_dict(self):
        return {"passed": self.passed, "margin": self.margin,
                "n_boundary_modes": self.n_boundary_modes,
                "M": self.M, "h": self.h}


def trusted_window(P, window, rect, epsilon):
    """Check the outer quarter of the window against the inflated rectangle.

    For every mode k with max|k_i| >= ceil(0.75 M), the diagonal symbol
    estimate P0(h(k + theta)) (m = 0 part of the h^0 term) must lie outside
    the rectangle inflated to twice its half-widths.  The margin is the
    smallest relative exceedance; negative margin means failure.
    """
    M = window.M
    h = window.h
    th = np.asarray(window.theta)
    band_start = int(np.ceil(0.75 * M))
    ks = window.mode_range()
    K1, K2 = np.meshgrid(ks, ks, indexing="ij")
    band = np.maximum(np.abs(K1), np.abs(K2)) >= band_start
    xi1 = h * (K1[band] + th[0])
    xi2 = h * (K2[band] + th[1])
    p0 = P.term(0).average_x()
    z = p0.evaluate(0.0, 0.0, xi1, xi2)
    re_excess = np.abs(z.real) / (2.0 * rect.re_half_width)
    im_excess = (np.abs(z.imag / epsilon - rect.im_center_over_eps)
                 / (2.0 * rect.im_half_width_over_eps))
    margin = float(np.min(np.maximum(re_excess, im_excess)) - 1.0)
    return TrustReport(passed=margin > 0.0, margin=margin,
                       n_boundary_modes=int(np.sum(band)), M=M, h=h)


def suggest_window(P, rect, epsilon, floquet, h, margin=0.25,
                   dim_cap=MATRIX_DIM_CAP):
    """Smallest window passing the trust check with the requested margin."""
    M_cap = (int(np.sqrt(dim_cap)) - 1) // 2
    M = max(4, int(np.ceil(0.3 / h)))
    while M <= M_cap:
        window = QuantizationWindow.from_floquet(floquet, h, M)
        rep = trusted_window(P, window, rect, epsilon)
        if rep.passed and rep.margin >= margin:
            return window, rep
        M = max(M + 1, int(np.ceil(M * 1.2)))
    raise UntrustedWindowError(
        f"no trusted window within the dimension cap at h={h} "
        f"(best M tried {min(M, M_cap)})")


def star_consistency_defect(a, b, N, window, h):
    """Max entry of Op(a)Op(b) - Op(a # b) over window-interior modes.

    The star series is truncated at h^N; interior means both row and
    column modes at distance > K_a + K_b from the window edge, where the
    finite window does not truncate the mode coupling.
    """
    from .symbols import HSeries, hseries_star
    A = HSeries([a], N=0)
    B = HSeries([b], N=0)
    AB = hseries_star(A, B, N)
    wa = weyl_matrix(A, window)
    wb = weyl_matrix(B, window)
    wab = weyl_matrix(AB, window)
    prod = wa @ wb
    M = window.M
    side = 2 * M + 1
    guard = a.x_degree() + b.x_degree()
    if M - guard < 1:
        raise ValidationError("window too small for the interior comparison")
    ks = window.mode_range()
    K1, K2 = np.meshgrid(ks, ks, indexing="ij")
    interior = (np.maximum(np.abs(K1), np.abs(K2)) <= M - guard).ravel()
    sub = np.ix_(interior, interior)
    return float(np.max(np.abs(prod[sub] - wab[sub])))
