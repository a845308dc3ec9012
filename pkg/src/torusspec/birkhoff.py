"""Quantum Birkhoff normal form on the torus.

Starting from an h-series whose order-zero symbol is x-independent, the
normal form conjugates away the x-dependence of every retained h-order:
at step n the x-dependent part of the h^{n+1} coefficient is removed by a
generator a_n solving the cohomological equation, applied through the
exact exponential conjugation of the symbol algebra.  The x-independent
coefficients p_tilde_n(xi, eps) evaluated on the Floquet lattice are the
quasi-eigenvalues.

The module also provides the principal reduction: for a series whose
order-zero symbol still depends on x (strength O(eps)), iterated weight
conjugations e^{(i/h) Op(W)} transfer that dependence into higher h-orders,
producing the x-independent-principal form the normal form needs.  Each
round is an exact similarity of the quantized operator up to the recorded
residual, so the spectrum is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivisorFloorError, NumericalError, ValidationError
from .symbols import (FourierTaylorSymbol, HSeries,
                      moyal_conjugation_step, multiply,
                      taylor_reciprocal, weight_conjugation)

# pipeline intermediates are pruned at this relative level: coefficients
# below it are double-precision noise, and dropping them must not trip the
# mode-overflow bookkeeping
PRUNE_REL = 1e-15

# retained degree caps for pipeline runs: deep enough jets that their
# truncation floor sits well below the certified tolerances
PIPE_KCAP = 10
PIPE_DCAP = 10


def _divisor_symbol(p0, m):
    """i m . d_xi p0 as an x-independent symbol."""
    d1 = p0.dxi(1).scale(1j * m[0])
    d2 = p0.dxi(2).scale(1j * m[1])
    return d1.add(d2)


def _divisor_radius(f):
    """Crude validity radius of the reciprocal jet: |f(0)| / |f'(0)|."""
    f0 = abs(f.coefficient((0, 0), (0, 0)))
    g1 = abs(f.coefficient((0, 0), (1, 0)))
    g2 = abs(f.coefficient((0, 0), (0, 1)))
    grad = max(g1, g2)
    return float("inf") if grad == 0 else f0 / grad


def cohomological_solve(p0, b, epsilon=None, floor=1e-10, info=None):
    """Solve H_{p0} a = b - <b> by mode-wise Fourier division.

    p0 must be x-independent with Re dp0/dxi_1(0) != 0 and Im dp0/dxi_2(0)
    != 0 (the small-divisor structure).  a has zero x-mean and satisfies
    the equation exactly on retained modes and degrees; divisor jets are
    re-expanded around xi = 0 and their validity radii recorded in info.
    """
    if not p0.is_x_independent():
        raise ValidationError("cohomological divisor needs x-independent p0")
    c0 = p0.dxi(1).coefficient((0, 0), (0, 0))
    d0 = p0.dxi(2).coefficient((0, 0), (0, 0))
    if abs(c0.real) < 1e-12:
        raise ValidationError(
            "flow nondegeneracy violated: Re dp0/dxi_1(0) = 0")
    has_m1_zero = any(k[0] == 0 and k[1] != 0 for k in b.coeffs)
    if has_m1_zero and abs(d0.imag) < 1e-14:
        raise DivisorFloorError(
            "averaged-perturbation nondegeneracy violated: "
            "Im dp0/dxi_2(0) = 0 with transversal modes present")
    dcap = max(p0.D, b.D)
    out = {}
    for m in sorted({(k[0], k[1]) for k in b.coeffs}):
        if m == (0, 0):
            continue
        f = _divisor_symbol(p0, m)
        f0 = f.coefficient((0, 0), (0, 0))
        if abs(f0) < floor:
            raise DivisorFloorError(
                f"divisor magnitude {abs(f0):.3e} at mode {m} below floor "
                f"{floor:.3e}")
        recip = taylor_reciprocal(f, D=dcap, floor=floor)
        if info is not None:
            info.setdefault("divisor_radius", {})[m] = _divisor_radius(f)
        bm = FourierTaylorSymbol(
            {(0, 0, a1, a2): c
             for (a1, a2), c in b.xi_polynomial_at_mode(m).items()})
        am = multiply(bm, recip, kcap=0, dcap=dcap)
        for (_, _, a1, a2), c in am.coeffs.items():
            key = (m[0], m[1], a1, a2)
            out[key] = out.get(key, 0j) + c
    return FourierTaylorSymbol(out, K=b.K, D=dcap,
                               mode_overflow=b.mode_overflow)


@dataclass
class NormalFormResult:
    """x-independent coefficients p_tilde_n plus the conjugator generators."""

    p_tilde: list
    generators: list
    epsilon: float
    growth_log: list
    defects: list
    divisor_radius: dict = field(default_factory=dict)
    mode_overflow: bool = False
    reduction_residual: float = 0.0

    @property
    def N(self):
        return len(self.p_tilde) - 1

    def lattice_values(self, h, xi1, xi2):
        """z = sum_n h^n p_tilde_n(xi) evaluated vectorized over xi arrays."""
        z = np.zeros(np.broadcast(xi1, xi2).shape, dtype=complex)
        for n, pt in enumerate(self.p_tilde):
            z = z + h ** n * pt.evaluate(0.0, 0.0, xi1, xi2)
        return z

    def last_term_scale(self, h, xi1, xi2):
        """Magnitude of the last retained term (truncation-size report)."""
        pt = self.p_tilde[-1]
        return float(np.max(np.abs(
            h ** self.N * pt.evaluate(0.0, 0.0, xi1, xi2))))

    def to_json_dict(self):
        return {
            "epsilon": self.epsilon,
            "p_tilde": [p.to_json_dict() for p in self.p_tilde],
            "generators": [a.to_json_dict() for a in self.generators],
            "growth_log": self.growth_log,
            "defects": self.defects,
            "mode_overflow": self.mode_overflow,
            "reduction_residual": self.reduction_residual,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            p_tilde=[FourierTaylorSymbol.from_json_dict(p)
                     for p in d["p_tilde"]],
            generators=[FourierTaylorSymbol.from_json_dict(a)
                        for a in d["generators"]],
            epsilon=d["epsilon"], growth_log=d["growth_log"],
            defects=d["defects"], mode_overflow=d["mode_overflow"],
            reduction_residual=d.get("reduction_residual", 0.0))


def _gradient_norm(a):
    """l1 coefficient norm of the phase-space gradient of a."""
    return max(a.dx(1).norm_sum(), a.dx(2).norm_sum(),
               a.dxi(1).norm_sum(), a.dxi(2).norm_sum())


def normal_form(P, N, epsilon, defect_tol=1e-10, prune=None,
                kcap=PIPE_KCAP, dcap=PIPE_DCAP):
    """Iteratively remove x-dependence of the h^1..h^N coefficients.

    Requires the h^0 term of P to be x-independent (apply reduce_principal
    first otherwise).  Returns the NormalFormResult with p_tilde_0 = the
    input principal symbol and the generators a_0..a_{N-1}.
    """
    p0 = P.term(0)
    scale = max(P.norm_max(), 1.0)
    if prune is None:
        prune = PRUNE_REL * scale
    if p0.x_dependent_part().norm_max() > 1e-12 * scale:
        raise ValidationError(
            "normal form requires an x-independent principal symbol; "
            "run the principal reduction first")
    p0 = p0.average_x()
    cur = HSeries(list(P.terms[:N + 1]), N=N) if P.N >= N \
        else HSeries(list(P.terms), N=N)
    generators = []
    growth = []
    info = {}
    for n in range(N):
        T = cur.term(n + 1)
        Tx = T.x_dependent_part()
        if Tx.norm_max() <= prune:
            a_n = FourierTaylorSymbol.zero()
        else:
            a_n = cohomological_solve(p0, Tx.scale(1j), info=info)
        if not a_n.is_zero():
            cur = moyal_conjugation_step(cur, a_n, n, N, kcap=kcap,
                                         dcap=dcap, drop=prune)
            cur = cur.prune(prune)
        generators.append(a_n)
        growth.append({"n": n, "grad_norm": _gradient_norm(a_n)})
        res = cur.term(n + 1).x_dependent_part().norm_max()
        if res > max(defect_tol, 10 * prune):
            raise NumericalError(
                f"normal form step {n} left x-dependent defect {res:.3e}")
    defects = cur.x_dependent_defect()
    p_tilde = [cur.term(n).average_x() for n in range(N + 1)]
    return NormalFormResult(
        p_tilde=p_tilde, generators=generators, epsilon=epsilon,
        growth_log=growth, defects=defects,
        divisor_radius=info.get("divisor_radius", {}),
        mode_overflow=any(t.mode_overflow for t in cur.terms))


def conjugate_by_generators(P, generators, N, prune=None,
                            kcap=PIPE_KCAP, dcap=PIPE_DCAP):
    """Apply the found generators to an arbitrary series (defect checks)."""
    scale = max(P.norm_max(), 1.0)
    if prune is None:
        prune = PRUNE_REL * scale
    cur = HSeries(list(P.terms[:N + 1]), N=N) if P.N >= N \
        else HSeries(list(P.terms), N=N)
    for n, a_n in enumerate(generators):
        if not a_n.is_zero():
            cur = moyal_conjugation_step(cur, a_n, n, N, kcap=kcap,
                                         dcap=dcap, drop=prune)
            cur = cur.prune(prune)
    return cur


@dataclass
class ReductionInfo:
    weights: list
    residuals: list
    dropped_principal: float
    rounds: int


def reduce_principal(P, N, target_residual=1e-11, max_rounds=14,
                     prune=None, kcap=PIPE_KCAP, dcap=PIPE_DCAP):
    """Transfer the x-dependence of the h^0 symbol into higher orders.

    Repeatedly solves H_{p00} W = v for the x-dependent principal part v
    and conjugates the full series by e^{(i/h) Op(W)} (an exact similarity
    of the quantized operator).  Stops when the principal x-dependence
    falls below target_residual; the tiny leftover is dropped and recorded.
    """
    scale = max(P.norm_max(), 1.0)
    if prune is None:
        prune = PRUNE_REL * scale
    cur = HSeries(list(P.terms[:N + 1]), N=N) if P.N >= N \
        else HSeries(list(P.terms), N=N)
    weights = []
    residuals = [cur.term(0).x_dependent_part().norm_max()]
    for _ in range(max_rounds):
        v = cur.term(0).x_dependent_part()
        res = v.norm_max()
        if res <= target_residual:
            break
        p00 = cur.term(0).average_x()
        W = cohomological_solve(p00, v)
        cur = weight_conjugation(cur, W, N, kcap=kcap, dcap=dcap,
                                 drop=prune).prune(prune)
        weights.append(W)
        residuals.append(cur.term(0).x_dependent_part().norm_max())
        if len(residuals) >= 3 and residuals[-1] > 0.5 * residuals[-2]:
            raise NumericalError(
                "principal reduction stalled: residuals "
                f"{residuals[-2]:.3e} -> {residuals[-1]:.3e}")
    dropped = cur.term(0).x_dependent_part().norm_max()
    if dropped > max(target_residual, 10 * prune):
        raise NumericalError(
            f"principal reduction left x-dependence {dropped:.3e} above "
            f"target {target_residual:.3e}")
    terms = list(cur.terms)
    terms[0] = terms[0].average_x()
    return HSeries(terms, N=N), ReductionInfo(
        weights=weights, residuals=residuals,
        dropped_principal=dropped, rounds=len(weights))


@dataclass
class GrowthReport:
    """Per-order growth of the generator gradients over an epsilon grid."""

    epsilons: list
    norms: dict          # n -> list of ||grad a_n|| per epsilon
    slopes: dict         # n -> fitted log-log slope or None for zero rows
    bounds: dict         # n -> -(1 + 2 n)

    def rows(self):
        out = []
        for n in sorted(self.norms):
            out.append((n, self.norms[n], self.slopes[n], self.bounds[n]))
        return out


def growth_report(results_by_epsilon):
    """Fit ||grad a_n|| ~ eps^slope; growth must be no worse than -(1+2n).

    results_by_epsilon maps eps -> NormalFormResult (same N).  Rows whose
    norms vanish identically are reported with slope None (exact zero).
    """
    eps_sorted = sorted(results_by_epsilon)
    if not eps_sorted:
        raise ValidationError("growth report needs at least one result")
    n_gen = len(results_by_epsilon[eps_sorted[0]].generators)
    norms = {}
    slopes = {}
    bounds = {}
    for n in range(n_gen):
        vals = [results_by_epsilon[e].growth_log[n]["grad_norm"]
                for e in eps_sorted]
        norms[n] = vals
        bounds[n] = -(1 + 2 * n)
        if all(v == 0.0 for v in vals):
            slopes[n] = None
        elif any(v == 0.0 for v in vals):
            slopes[n] = float("nan")
        else:
            slopes[n] = float(np.polyfit(np.log(eps_sorted),
                                         np.log(vals), 1)[0])
    return GrowthReport(epsilons=list(eps_sorted), norms=norms,
                        slopes=slopes, bounds=bounds)
