"""Saddle-point resonance reduction via harmonic flow averaging.

Near a resonant saddle the rotated, rescaled problem is a harmonic
oscillator p2 = sum lambda_j/2 (xi_j^2 + y_j^2) perturbed by
i eps e^{3 pi i/4} <p3>, where <p3> averages the cubic term along the
periodic harmonic flow.  In complexified coordinates z_j = x_j + i xi_j
the flow is z_j(t) = e^{-i lambda_j t} z_j(0), so a monomial z^a zbar^b
survives the average iff lambda.(a - b) = 0 (exact monomial rule).
Resonances near the saddle energy are E0 - i eps^2 z with z on the
quasi-eigenvalue lattice of the reduced problem at hbar = h/eps^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

from .errors import ValidationError
from .lattice import quasi_eigenvalues

# polynomials on phase space: {(a1, a2, b1, b2): c} for x1^a1 x2^a2
# xi1^b1 xi2^b2; the z-representation keys (c1, c2, d1, d2) encode
# z1^c1 z2^c2 zbar1^d1 zbar2^d2

_BINOM = [[1]]
for _n in range(1, 16):
    row = [1]
    for _k in range(1, _n):
        row.append(_BINOM[_n - 1][_k - 1] + _BINOM[_n - 1][_k])
    row.append(1)
    _BINOM.append(row)


def _clean(poly, drop=1e-15):
    return {k: c for k, c in poly.items() if abs(c) > drop}


def poly_to_z(poly):
    """Rewrite in z_j = x_j + i xi_j, zbar_j: exact binomial expansion."""
    out = {}
    for (a1, a2, b1, b2), coef in poly.items():
        # x^a = ((z+zbar)/2)^a ; xi^b = ((z-zbar)/(2i))^b
        part1 = {}
        for i1 in range(a1 + 1):
            for j1 in range(b1 + 1):
                c = (coef * _BINOM[a1][i1] * _BINOM[b1][j1]
                     * (0.5 ** a1) * ((-0.5j) ** b1) * ((-1.0) ** (b1 - j1)))
                key = (i1 + j1, a1 - i1 + b1 - j1)  # (z1 pow, zbar1 pow)
                part1[key] = part1.get(key, 0j) + c
        for (c1, d1), v1 in part1.items():
            for i2 in range(a2 + 1):
                for j2 in range(b2 + 1):
                    c = (v1 * _BINOM[a2][i2] * _BINOM[b2][j2]
                         * (0.5 ** a2) * ((-0.5j) ** b2)
                         * ((-1.0) ** (b2 - j2)))
                    key = (c1, i2 + j2, d1, a2 - i2 + b2 - j2)
                    out[key] = out.get(key, 0j) + c
    return _clean(out)


def poly_from_z(zpoly):
    """Inverse of poly_to_z: z = x + i xi, zbar = x - i xi."""
    out = {}
    for (c1, c2, d1, d2), coef in zpoly.items():
        part1 = {}
        for i1 in range(c1 + 1):
            for j1 in range(d1 + 1):
                c = (coef * _BINOM[c1][i1] * _BINOM[d1][j1]
                     * (1j ** (c1 - i1)) * ((-1j) ** (d1 - j1)))
                key = (i1 + j1, c1 - i1 + d1 - j1)  # (x1 pow, xi1 pow)
                part1[key] = part1.get(key, 0j) + c
        for (a1, b1), v1 in part1.items():
            for i2 in range(c2 + 1):
                for j2 in range(d2 + 1):
                    c = (v1 * _BINOM[c2][i2] * _BINOM[d2][j2]
                         * (1j ** (c2 - i2)) * ((-1j) ** (d2 - j2)))
                    key = (a1, i2 + j2, b1, c2 - i2 + d2 - j2)
                    out[key] = out.get(key, 0j) + c
    return _clean(out)


def poly_evaluate(poly, x1, x2, xi1, xi2):
    res = np.zeros(np.broadcast(x1, x2, xi1, xi2).shape, dtype=complex)
    for (a1, a2, b1, b2), c in poly.items():
        res = res + (c * np.asarray(x1) ** a1 * np.asarray(x2) ** a2
                     * np.asarray(xi1) ** b1 * np.asarray(xi2) ** b2)
    return res


def base_frequency(lambdas, max_den=64, tol=1e-9):
    """Largest omega with lambda in omega * Z^2; rejects irrational ratios."""
    l1, l2 = float(lambdas[0]), float(lambdas[1])
    if l1 <= 0 or l2 <= 0:
        raise ValidationError("saddle frequencies must be positive")
    frac = Fraction(l2 / l1).limit_denominator(max_den)
    if abs(l2 / l1 - float(frac)) > tol:
        raise ValidationError(
            f"frequencies {lambdas} are not rationally dependent "
            f"(best rational {frac} off by {abs(l2/l1 - float(frac)):.2e})")
    n2, n1 = frac.numerator, frac.denominator
    g = gcd(n1, n2)
    n1, n2 = n1 // g, n2 // g
    return l1 / n1  # lambda = omega * (n1, n2)


@dataclass
class ResonantSaddle:
    """Saddle data: frequencies, optional resonance vector, cubic term."""

    lambdas: tuple
    p3: dict                      # {(a1, a2): c}, homogeneous degree 3 in x
    E0: float = 0.0
    k_res: tuple | None = None
    trivial_resonance_ok: bool = False

    def __post_init__(self):
        if self.lambdas[0] <= 0 or self.lambdas[1] <= 0:
            raise ValidationError("saddle frequencies must be positive")
        for (a1, a2) in self.p3:
            if a1 + a2 != 3:
                raise ValidationError("p3 must be homogeneous of degree 3")
        if self.k_res is not None:
            k = np.asarray(self.k_res, dtype=float)
            if np.allclose(k, 0):
                if not self.trivial_resonance_ok:
                    raise ValidationError("trivial resonance vector k = 0 "
                                          "must be explicitly flagged")
            elif abs(np.dot(self.lambdas, k)) > 1e-12:
                raise ValidationError(
                    f"resonance condition violated: lambda.k = "
                    f"{np.dot(self.lambdas, k):.3e}")

    def p3_phase_poly(self):
        return {(a1, a2, 0, 0): complex(c) for (a1, a2), c in self.p3.items()}


def harmonic_average(poly, lambdas):
    """Average along the harmonic flow: keep z^a zbar^b with lambda.(a-b)=0.

    Exact monomial rule in complexified coordinates; requires rationally
    dependent frequencies (periodic flow).
    """
    base_frequency(lambdas)  # validates rational dependence
    zp = poly_to_z(poly)
    l1, l2 = lambdas
    kept = {}
    for (c1, c2, d1, d2), coef in zp.items():
        if abs(l1 * (c1 - d1) + l2 * (c2 - d2)) < 1e-12:
            kept[(c1, c2, d1, d2)] = coef
    return poly_from_z(kept)


def flow_quadrature_average(poly, lambdas, points, n_nodes=512):
    """(1/T) int_0^T poly(flow_t(rho)) dt at given phase points (oracle)."""
    omega = base_frequency(lambdas)
    T = 2 * np.pi / omega
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    ts = 0.5 * T * (nodes + 1.0)
    out = []
    for (x1, x2, xi1, xi2) in points:
        z1 = (x1 + 1j * xi1) * np.exp(-1j * lambdas[0] * ts)
        z2 = (x2 + 1j * xi2) * np.exp(-1j * lambdas[1] * ts)
        x1t, xi1t = z1.real, z1.imag
        x2t, xi2t = z2.real, z2.imag
        vals = poly_evaluate(poly, x1t, x2t, xi1t, xi2t)
        out.append(complex(0.5 * np.dot(weights, vals)))
    return out


@dataclass
class ReducedProblem:
    """Rescaled saddle data: hbar = h/eps^2 with the rotated perturbation."""

    h_tilde: float
    epsilon: float
    h: float
    E0: float
    lambdas: tuple
    p2: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)
    p3_average: dict = field(default_factory=dict)
    remainder_order: str = "eps^2"

    def to_json_dict(self):
        def poly_json(p):
            return [{"key": list(k), "re": c.real, "im": c.imag}
                    for k, c in sorted(p.items())]
        return {
            "h_tilde": self.h_tilde, "epsilon": self.epsilon, "h": self.h,
            "E0": self.E0, "lambdas": list(self.lambdas),
            "p2": poly_json(self.p2),
            "perturbation": poly_json(self.perturbation),
            "p3_average": poly_json(self.p3_average),
            "remainder_order": self.remainder_order,
        }


def rescale(saddle, epsilon, h):
    """x = eps y, hbar = h/eps^2; perturbation i eps e^{3 pi i/4} <p3>."""
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if h > 0 and epsilon <= h ** 0.25:
        warnings.warn(
            f"eps = {epsilon} <= h^(1/4) = {h ** 0.25:.3g}: outside the "
            "resonance-window regime", RuntimeWarning)
    l1, l2 = saddle.lambdas
    p2 = {(2, 0, 0, 0): 0.5 * l1, (0, 0, 2, 0): 0.5 * l1,
          (0, 2, 0, 0): 0.5 * l2, (0, 0, 0, 2): 0.5 * l2}
    avg = harmonic_average(saddle.p3_phase_poly(), saddle.lambdas)
    phase = 1j * epsilon * np.exp(3j * np.pi / 4)
    pert = {k: phase * c for k, c in avg.items()}
    return ReducedProblem(
        h_tilde=h / epsilon ** 2, epsilon=epsilon, h=h, E0=saddle.E0,
        lambdas=tuple(saddle.lambdas), p2=p2, perturbation=pert,
        p3_average=avg)


def unscale(reduced):
    """Invert rescale: recover (epsilon, h, <p3>) from the reduced record."""
    eps = reduced.epsilon
    h = reduced.h_tilde * eps ** 2
    phase = 1j * eps * np.exp(3j * np.pi / 4)
    avg = {k: c / phase for k, c in reduced.perturbation.items()}
    return eps, h, _clean(avg)


def resonance_lattice(reduced, nf, floquet, rect):
    """Resonances E0 - i eps^2 z with z on the reduced problem's lattice.

    nf must be the normal form in the action chart of the harmonic-resonant
    system (supplied by the caller; the chart construction is external).
    """
    if nf is None:
        raise ValidationError(
            "resonance lattice needs the action-chart normal form")
    pts = quasi_eigenvalues(nf, reduced.h_tilde, floquet, rect)
    eps = reduced.epsilon
    return [(k, reduced.E0 - 1j * eps ** 2 * z) for k, z in pts]
