"""Hamilton-flow utilities in the normal-form chart.

In the chart the unperturbed symbol depends on xi_1 only, the flow is
translation in x_1, and the trajectory average of a perturbation q is its
x_1-average.  This module provides that average, the conjugation weight G
solving  H_p G = q - <q>,  the averaged remainder of order eps^2 produced
by the weight flow, numerical Hamilton flow, and the classical
action/period identity  dI/dE = T(E).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import NumericalError, ValidationError
from .symbols import (D_CAP, K_CAP, FourierTaylorSymbol, multiply,
                      poisson_bracket, taylor_reciprocal)


class FlowModel:
    """Unperturbed symbol p(xi_1), perturbation q(x, xi), strength epsilon.

    Construction verifies the chart form of p and the transversality
    condition dp/dxi_1(0) != 0.  With spectral=True it additionally requires
    d<q>/dxi_2(0) != 0, the condition under which the model supports
    spectral prediction.
    """

    def __init__(self, p, q, epsilon, spectral=False):
        if not p.is_x_independent():
            raise ValidationError("p must be x-independent in the chart")
        if any(k[3] > 0 for k in p.coeffs):
            raise ValidationError("p must depend on xi_1 only in the chart")
        c0 = p.dxi(1).coefficient((0, 0), (0, 0))
        if abs(c0) < 1e-12:
            raise ValidationError(
                "flow nondegeneracy violated: dp/dxi_1(0) = 0")
        self.p = p
        self.q = q
        self.epsilon = float(epsilon)
        self.q_avg = q.average_x1()
        if spectral:
            b0 = self.q_avg.dxi(2).coefficient((0, 0), (0, 0))
            if abs(b0) < 1e-12:
                raise ValidationError(
                    "averaged-perturbation nondegeneracy violated: "
                    "d<q>/dxi_2(0) = 0")

    def principal_symbol(self):
        """p + i eps q, the full order-zero symbol."""
        return self.p.add(self.q.scale(1j * self.epsilon))

    def averaged_principal(self):
        """p + i eps <q>, the x-independent part after averaging."""
        return self.p.add(self.q_avg.scale(1j * self.epsilon))


def flow_average(q, model):
    """Trajectory average of q along the H_p-flow (the x_1-average)."""
    return q.average_x1()


def weight_G(model):
    """Conjugation weight solving H_p G = q - <q>.

    Mode-wise Fourier division: G_m = q_m / (i m_1 dp/dxi_1), expanded as a
    xi-jet; only modes with m_1 != 0 occur.
    """
    dp = model.p.dxi(1)
    c0 = dp.coefficient((0, 0), (0, 0))
    if abs(c0) < 1e-12:
        raise ValidationError("flow nondegeneracy violated: dp/dxi_1(0) = 0")
    out = {}
    dcap = max(model.q.D, model.p.D, D_CAP)
    recips = {}
    for m in model.q.x_modes():
        if m[0] == 0:
            continue
        if m[0] not in recips:
            recips[m[0]] = taylor_reciprocal(dp.scale(1j * m[0]), D=dcap)
        qm = FourierTaylorSymbol(
            {(0, 0, a1, a2): c
             for (a1, a2), c in model.q.xi_polynomial_at_mode(m).items()})
        gm = multiply(qm, recips[m[0]], kcap=0, dcap=dcap)
        for (_, _, a1, a2), c in gm.coeffs.items():
            out[(m[0], m[1], a1, a2)] = c
    return FourierTaylorSymbol(out, K=max(model.q.K, 0), D=dcap)


def averaged_remainder(model, order=None, tol=1e-16):
    """Order-eps^2 remainder of the weight conjugation.

    Computes  (p + i eps q) o exp(i eps H_G) - p - i eps <q>  by summing the
    flow Taylor series sum_k (i eps)^k / k! H_G^k (p + i eps q) until terms
    fall below tol.  The result is the explicit symbol r_eps(x, xi).
    """
    eps = model.epsilon
    G = weight_G(model)
    F = model.principal_symbol()
    acc = F
    term = F
    scale = max(F.norm_max(), 1.0)
    kmax = order if order is not None else 24
    for k in range(1, kmax + 1):
        term = poisson_bracket(G, term).scale(1j * eps / k)
        if term.is_zero():
            break
        acc = acc.add(term)
        if term.norm_max() < tol * scale and order is None:
            break
    return acc - model.averaged_principal()


def _real_gradient(p):
    """Gradient callables (dp/dx, dp/dxi) for a real-valued symbol."""
    px1, px2 = p.dx(1), p.dx(2)
    pxi1, pxi2 = p.dxi(1), p.dxi(2)

    def grad(x1, x2, xi1, xi2):
        gx = np.array([px1.evaluate(x1, x2, xi1, xi2).real,
                       px2.evaluate(x1, x2, xi1, xi2).real])
        gxi = np.array([pxi1.evaluate(x1, x2, xi1, xi2).real,
                        pxi2.evaluate(x1, x2, xi1, xi2).real])
        return gx, gxi

    return grad


def hamilton_flow(p, rho0, t, xi_box=None, rtol=1e-10, atol=1e-12):
    """Integrate xdot = dp/dxi, xidot = -dp/dx from rho0 for time t.

    p is a FourierTaylorSymbol or a callable (x1,x2,xi1,xi2) -> (dp/dx,
    dp/dxi).  Returns the endpoint with x reduced mod 2 pi.  Raises
    NumericalError if the trajectory leaves |xi_i| <= xi_box.
    """
    grad = p if callable(p) else _real_gradient(p)

    def rhs(_, y):
        gx, gxi = grad(y[0], y[1], y[2], y[3])
        return [gxi[0], gxi[1], -gx[0], -gx[1]]

    sol = solve_ivp(rhs, (0.0, t), np.asarray(rho0, dtype=float),
                    method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise NumericalError(f"flow integration failed: {sol.message}")
    if xi_box is not None:
        samples = sol.sol(np.linspace(0.0, t, 65))
        if np.max(np.abs(samples[2:4])) > xi_box:
            raise NumericalError("trajectory escaped the symbol validity box")
    y = sol.y[:, -1]
    return np.array([y[0] % (2 * np.pi), y[1] % (2 * np.pi), y[2], y[3]])


def _xi1_of_energy(p, E, guess=0.0):
    """Solve p(xi_1) = E by Newton from the given guess."""
    poly = {k[2]: c.real for k, c in p.coeffs.items()}
    deg = max(poly, default=0)
    coefs = np.array([poly.get(d, 0.0) for d in range(deg + 1)])
    dcoefs = np.polynomial.polynomial.polyder(coefs)
    xi = guess
    for _ in range(60):
        f = np.polynomial.polynomial.polyval(xi, coefs) - E
        fp = np.polynomial.polynomial.polyval(xi, dcoefs)
        step = f / fp
        xi -= step
        if abs(step) < 1e-14:
            return xi
    raise NumericalError(f"could not invert p(xi_1) = {E}")


def closed_trajectory(p, E, xi2=0.0, x0=(0.0, 0.0), rtol=1e-12):
    """Period and action of the x_1-loop at energy E in the chart.

    Returns (T, I, rho0).  The period is located as the first return of x_1
    to its start mod 2 pi, refined by root-finding on the dense solution;
    the action integrates xi . dx along the loop with Gauss-Legendre nodes.
    """
    xi1 = _xi1_of_energy(p, E)
    c = p.dxi(1).evaluate(0.0, 0.0, xi1, xi2).real
    if abs(c) < 1e-12:
        raise NumericalError("period detection failed: dp/dxi_1 = 0 on orbit")
    T_guess = 2 * np.pi / abs(c)
    grad = _real_gradient(p)

    def rhs(_, y):
        gx, gxi = grad(y[0], y[1], y[2], y[3])
        return [gxi[0], gxi[1], -gx[0], -gx[1]]

    rho0 = np.array([x0[0], x0[1], xi1, xi2])
    sol = solve_ivp(rhs, (0.0, 1.5 * T_guess), rho0, method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=True)
    if not sol.success:
        raise NumericalError(f"flow integration failed: {sol.message}")
    target = 2 * np.pi * np.sign(c)

    def crossing(t):
        return sol.sol(t)[0] - rho0[0] - target

    try:
        T = brentq(crossing, 0.5 * T_guess, 1.5 * T_guess, xtol=1e-13)
    except ValueError as exc:
        raise NumericalError(f"period detection failed: {exc}") from None

    nodes, weights = np.polynomial.legendre.leggauss(64)
    ts = 0.5 * T * (nodes + 1.0)
    ys = sol.sol(ts)
    gxi1 = p.dxi(1).evaluate(ys[0], ys[1], ys[2], ys[3]).real
    gxi2 = p.dxi(2).evaluate(ys[0], ys[1], ys[2], ys[3]).real
    integrand = ys[2] * gxi1 + ys[3] * gxi2
    I = 0.5 * T * float(np.dot(weights, integrand))
    return T, I, rho0


@dataclass
class ActionPeriodReport:
    """Rows (E, I, T, dI/dE, |dI/dE - T|); dI/dE by central differences."""

    E: list = field(default_factory=list)
    I: list = field(default_factory=list)
    T: list = field(default_factory=list)
    dIdE: list = field(default_factory=list)
    err: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.E, self.I, self.T, self.dIdE, self.err))

    def to_csv_rows(self):
        header = ["E", "I", "T", "dIdE", "abs_err"]
        body = [[f"{e:.16e}", f"{i:.16e}", f"{t:.16e}",
                 "" if np.isnan(d) else f"{d:.16e}",
                 "" if np.isnan(r) else f"{r:.16e}"]
                for e, i, t, d, r in self.rows()]
        return header, body


def action_period_check(p, E_grid):
    """Verify dI/dE = T(E) over an energy grid (central differences)."""
    E_grid = sorted(float(E) for E in E_grid)
    if len(E_grid) < 3:
        raise ValidationError("action/period check needs >= 3 energies")
    rep = ActionPeriodReport()
    data = [closed_trajectory(p, E) for E in E_grid]
    for i, E in enumerate(E_grid):
        T, I, _ = data[i]
        if 0 < i < len(E_grid) - 1:
            dIdE = (data[i + 1][1] - data[i - 1][1]) / (E_grid[i + 1]
                                                        - E_grid[i - 1])
            err = abs(dIdE - T)
        else:
            dIdE = float("nan")
            err = float("nan")
        rep.E.append(E)
        rep.I.append(I)
        rep.T.append(T)
        rep.dIdE.append(dIdE)
        rep.err.append(err)
    return rep
