"""Small-divisor fixed-point solver for the complex eiconal equation.

Solves  p_eps(x, zeta + phi'(x)) = z(zeta)  for a grad-periodic complex
phase on the torus, where p_eps = p(xi_1) + i eps <q>(xi) + r(x, xi) with
r = O(eps^2).  The phase is sought in the scaled form

    phi = et * (psi_per + a*alpha(x) + b*beta(x)),      et = epsilon_tilde,

with alpha, beta the x-linear null resp. transversal directions of the
linearized operator Z = c* d_x1 + d* d_x2 (c* = d p_eps/d xi_1, d* =
d p_eps/d xi_2 at the shift).  Each sweep evaluates the nonlinearity by FFT
collocation with 2x zero padding, takes b from the zero mode and psi_per
from the mean-free part by Fourier division, and iterates to a fixed point
in the weighted norm  sup_k <k>^s |(k_1/eps, k_2) psi_hat(k)|.

Realification tunes the free constant a by Newton until both cycle actions
are real; the eta-parametrized family (a = 0, shifted zeta) tabulates the
reduced x-independent symbol p_tilde(eta).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonContractionError, NumericalError, ValidationError
from .symbols import FourierTaylorSymbol

_LIN_FLOOR = 1e-13


def _next_pow2(n):
    p = 1
    while p < n:
        p *= 2
    return p


class EiconalProblem:
    """Eiconal data: symbol parts, strengths, grid and shift.

    Parameters
    ----------
    p : FourierTaylorSymbol
        Unperturbed symbol, x-independent, function of xi_1 only.
    q_avg : FourierTaylorSymbol
        Averaged perturbation, x-independent.
    epsilon : float
    r : FourierTaylorSymbol or None
        Optional explicit O(eps^2) remainder (may depend on x).
    epsilon_tilde : float or None
        Scaling parameter, default sqrt(epsilon); requires eps < et < 1.
    grid : int or None
        FFT resolution per axis (power of two), >= 4x the x-degree.
    zeta : complex 2-vector
        Shift of the xi-origin for the family construction.
    """

    def __init__(self, p, q_avg, epsilon, r=None, epsilon_tilde=None,
                 grid=None, zeta=(0.0, 0.0), weight_s=2.0,
                 tol=1e-12, max_iter=200, nonlinearity_override=None):
        if not p.is_x_independent() or any(k[3] > 0 for k in p.coeffs):
            raise ValidationError("p must be x-independent, xi_1 only")
        if not q_avg.is_x_independent():
            raise ValidationError("averaged perturbation must be "
                                  "x-independent")
        self.p = p
        self.q_avg = q_avg
        self.r = r if r is not None else FourierTaylorSymbol.zero()
        self.epsilon = float(epsilon)
        self.epsilon_tilde = (np.sqrt(self.epsilon) if epsilon_tilde is None
                              else float(epsilon_tilde))
        if not (self.epsilon < self.epsilon_tilde < 1.0):
            raise ValidationError(
                f"need epsilon < epsilon_tilde < 1, got "
                f"{self.epsilon} vs {self.epsilon_tilde}")
        K = max(p.x_degree(), q_avg.x_degree(), self.r.x_degree())
        n_min = max(32, 4 * K)
        self.grid = _next_pow2(n_min) if grid is None else int(grid)
        if self.grid < 4 * K:
            raise ValidationError(f"grid {self.grid} < 4 x x-degree {K}")
        self.zeta = np.asarray(zeta, dtype=complex)
        self.weight_s = float(weight_s)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.nonlinearity_override = nonlinearity_override

        self.principal = p.add(q_avg.scale(1j * self.epsilon))
        self.symbol = self.principal.add(self.r)
        self._coef_cache = {}

    # shifted derivatives of the principal (x-independent) part
    def _lin_data(self, zeta):
        z1, z2 = zeta
        c_star = self.principal.dxi(1).evaluate(0.0, 0.0, z1, z2)
        d_star = self.principal.dxi(2).evaluate(0.0, 0.0, z1, z2)
        qxi2 = d_star / (1j * self.epsilon)
        if abs(c_star.real) < _LIN_FLOOR:
            raise ValidationError("linearization degenerate: Re dp/dxi_1 = 0")
        if abs(d_star) < _LIN_FLOOR * self.epsilon:
            raise ValidationError(
                "averaged-perturbation nondegeneracy violated: "
                "d<q>/dxi_2 = 0 at the shift")
        return complex(c_star), complex(d_star), complex(qxi2)

    def energy(self, zeta):
        """z(zeta) = (p + i eps <q>)(zeta)."""
        return complex(self.principal.evaluate(0.0, 0.0, zeta[0], zeta[1]))

    def _grids(self, n):
        if n not in self._coef_cache:
            x = 2 * np.pi * np.arange(n) / n
            X1, X2 = np.meshgrid(x, x, indexing="ij")
            k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
            K1, K2 = np.meshgrid(k, k, indexing="ij")
            # coefficient fields C_alpha(x) of the full symbol
            fields = {}
            for alpha in sorted({(a1, a2)
                                 for (_, _, a1, a2) in self.symbol.coeffs}):
                modes = np.zeros((n, n), dtype=complex)
                for (m1, m2, a1, a2), c in self.symbol.coeffs.items():
                    if (a1, a2) == alpha:
                        modes[m1 % n, m2 % n] += c
                fields[alpha] = np.fft.ifft2(modes) * n * n
            self._coef_cache[n] = (X1, X2, K1, K2, fields)
        return self._coef_cache[n]

    def evaluate_symbol(self, n, xi1_field, xi2_field):
        """p_eps(x, xi(x)) on the n x n collocation grid."""
        _, _, _, _, fields = self._grids(n)
        dmax = self.symbol.xi_degree()
        pow1 = [np.ones_like(xi1_field)]
        pow2 = [np.ones_like(xi2_field)]
        for _ in range(dmax):
            pow1.append(pow1[-1] * xi1_field)
            pow2.append(pow2[-1] * xi2_field)
        out = np.zeros_like(xi1_field, dtype=complex)
        for (a1, a2), C in fields.items():
            out = out + C * pow1[a1] * pow2[a2]
        return out


@dataclass
class EiconalSolution:
    """Converged eiconal phase in scaled variables.

    psi_per_hat holds Fourier coefficients of the zero-mean periodic part
    on the problem grid (numpy fft layout); a, b are the linear-part
    constants; residual is the sup-norm eiconal defect measured on a
    doubled grid.
    """

    psi_per_hat: np.ndarray
    a: complex
    b: complex
    residual: float
    iterations: int
    weighted_norm: float
    contraction_ratios: list = field(default_factory=list)
    ge17_constant: float = 0.0
    zeta: tuple = (0.0 + 0.0j, 0.0 + 0.0j)
    lin: tuple = (1.0 + 0j, 0 + 0j, 1.0 + 0j)  # (c*, d*, qxi2)

    def to_json_dict(self):
        n = self.psi_per_hat.shape[0]
        nz = np.argwhere(np.abs(self.psi_per_hat) > 1e-16)
        coeffs = []
        k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        for i, j in nz:
            v = self.psi_per_hat[i, j]
            coeffs.append({"m": [int(k[i]), int(k[j])], "alpha": [0, 0],
                           "re": v.real, "im": v.imag})
        coeffs.sort(key=lambda e: (e["m"][0], e["m"][1]))
        return {
            "K": int(n // 2), "D": 0, "coeffs": coeffs,
            "a": [self.a.real, self.a.imag],
            "b": [self.b.real, self.b.imag],
            "residual": self.residual,
            "iterations": self.iterations,
        }


def _pad_modes(hat, n_out):
    n = hat.shape[0]
    out = np.zeros((n_out, n_out), dtype=complex)
    h = n // 2
    sl = np.r_[0:h, n_out - h:n_out]
    src = np.r_[0:h, n - h:n]
    out[np.ix_(sl, sl)] = hat[np.ix_(src, src)]
    return out


def solve_linearized(v, epsilon):
    """Solve (d_x1 + i eps d_x2) u = v for zero-mean periodic grid data.

    Exact in the truncated Fourier basis: u_hat(k) = v_hat(k)/(i k1 - eps k2).
    Raises ValidationError when the input mean exceeds 1e-14 (relatively).
    """
    v = np.asarray(v, dtype=complex)
    n = v.shape[0]
    vhat = np.fft.fft2(v) / (n * n)
    scale = max(np.max(np.abs(vhat)), 1.0)
    if abs(vhat[0, 0]) > 1e-14 * scale:
        raise ValidationError(
            f"linearized solve requires zero-mean input, got mean "
            f"{abs(vhat[0, 0]):.3e}")
    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    div = 1j * K1 - epsilon * K2
    div[0, 0] = 1.0
    uhat = vhat / div
    uhat[0, 0] = 0.0
    return np.fft.ifft2(uhat) * n * n


def _weighted_norm(hat, epsilon, s):
    """sup_k <k>^s |(k1/eps, k2)| |psi_hat(k)| over the mode grid."""
    n = hat.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    w = (1.0 + K1 ** 2 + K2 ** 2) ** (s / 2.0)
    deriv = np.hypot(K1 / epsilon, K2)
    return float(np.max(w * deriv * np.abs(hat)))


def iterate_schema(problem, a=0.0):
    """Run the fixed-point sweeps to convergence; returns EiconalSolution.

    Raises NonContractionError when the correction ratio stays >= 1 over
    three consecutive sweeps or the sweep budget is exhausted.
    """
    n = problem.grid
    eps = problem.epsilon
    et = problem.epsilon_tilde
    s = problem.weight_s
    zeta = problem.zeta
    c_star, d_star, qxi2 = problem._lin_data(zeta)
    z0 = problem.energy(zeta)
    a = complex(a)

    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    div = 1j * (c_star * K1 + d_star * K2)
    div[0, 0] = 1.0
    b_div = 2.0 * eps * c_star * qxi2  # Z beta

    alpha_p = np.array([eps * qxi2, 1j * c_star])   # alpha'(x), constant
    beta_p = np.array([eps * qxi2, -1j * c_star])   # beta'(x), constant

    n2 = 2 * n
    x2g = 2 * np.pi * np.arange(n2) / n2
    psi_hat = np.zeros((n, n), dtype=complex)
    b = 0.0 + 0.0j

    def nonlinearity(psi_hat_cur, b_cur):
        # gradient fields of psi on the padded grid
        g1h = _pad_modes(1j * K1 * psi_hat_cur, n2)
        g2h = _pad_modes(1j * K2 * psi_hat_cur, n2)
        g1 = np.fft.ifft2(g1h) * n2 * n2
        g2 = np.fft.ifft2(g2h) * n2 * n2
        xi1 = g1 + a * alpha_p[0] + b_cur * beta_p[0]
        xi2 = g2 + a * alpha_p[1] + b_cur * beta_p[1]
        if problem.nonlinearity_override is not None:
            X1, X2 = np.meshgrid(x2g, x2g, indexing="ij")
            G = problem.nonlinearity_override(X1, X2, xi1, xi2)
        else:
            P = problem.evaluate_symbol(
                n2, zeta[0] + et * xi1, zeta[1] + et * xi2)
            lin = et * (c_star * xi1 + d_star * xi2)
            G = (P - z0 - lin) / et
        Ghat2 = np.fft.fft2(G) / (n2 * n2)
        # restrict to the solver's mode window
        sel = np.r_[0:n // 2, n2 - n // 2:n2]
        return Ghat2[np.ix_(sel, sel)]

    ratios = []
    prev_corr = None
    stall = 0
    for it in range(1, problem.max_iter + 1):
        Ghat = nonlinearity(psi_hat, b)
        b_new = -Ghat[0, 0] / b_div
        rhs = -Ghat
        rhs[0, 0] = 0.0
        psi_new = rhs / div
        psi_new[0, 0] = 0.0
        corr = _weighted_norm(psi_new - psi_hat, eps, s) + abs(b_new - b)
        psi_hat, b = psi_new, b_new
        if prev_corr is not None and prev_corr > 0:
            ratio = corr / prev_corr
            ratios.append(ratio)
            stall = stall + 1 if ratio >= 1.0 else 0
            if stall >= 3:
                bound = eps / et + et
                raise NonContractionError(
                    f"eiconal sweeps stopped contracting: observed ratio "
                    f"{ratio:.3f} vs theoretical factor O({bound:.3f})")
        prev_corr = corr
        if corr < problem.tol:
            break
    else:
        raise NonContractionError(
            f"eiconal solver did not reach tol {problem.tol} in "
            f"{problem.max_iter} sweeps (last correction {corr:.3e})")

    # defect on the doubled (anti-aliased) grid
    g1h = _pad_modes(1j * K1 * psi_hat, n2)
    g2h = _pad_modes(1j * K2 * psi_hat, n2)
    g1 = np.fft.ifft2(g1h) * n2 * n2
    g2 = np.fft.ifft2(g2h) * n2 * n2
    xi1 = zeta[0] + et * (g1 + a * alpha_p[0] + b * beta_p[0])
    xi2 = zeta[1] + et * (g2 + a * alpha_p[1] + b * beta_p[1])
    if problem.nonlinearity_override is None:
        defect = problem.evaluate_symbol(n2, xi1, xi2) - z0
        residual = float(np.max(np.abs(defect)))
    else:
        residual = 0.0
    wn = _weighted_norm(psi_hat, eps, s)
    factor = eps / et + et
    return EiconalSolution(
        psi_per_hat=psi_hat, a=a, b=b, residual=residual, iterations=it,
        weighted_norm=wn, contraction_ratios=ratios,
        ge17_constant=(abs(b) + wn) / factor,
        zeta=(complex(zeta[0]), complex(zeta[1])),
        lin=(c_star, d_star, qxi2))


def compute_actions(solution, problem):
    """Cycle actions of the phase torus, closed form with quadrature check.

    I_1 = 2 pi (zeta_1 + et eps (a+b) d<q>/dxi_2),
    I_2 = 2 pi (zeta_2 + i et (a-b) d p_eps/d xi_1),
    cross-checked by integrating xi . dx along both fundamental cycles on
    the collocation grid.  A mismatch beyond 1e-8 raises NumericalError.
    """
    eps = problem.epsilon
    et = problem.epsilon_tilde
    c_star, _, qxi2 = solution.lin
    a, b = solution.a, solution.b
    z1, z2 = solution.zeta
    I1 = 2 * np.pi * (z1 + et * eps * (a + b) * qxi2)
    I2 = 2 * np.pi * (z2 + 1j * et * (a - b) * c_star)

    # quadrature along the two cycles from the reconstructed gradient
    n = solution.psi_per_hat.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    g1 = np.fft.ifft2(1j * K1 * solution.psi_per_hat) * n * n
    g2 = np.fft.ifft2(1j * K2 * solution.psi_per_hat) * n * n
    alpha_p = np.array([eps * qxi2, 1j * c_star])
    beta_p = np.array([eps * qxi2, -1j * c_star])
    xi1 = z1 + et * (g1 + a * alpha_p[0] + b * beta_p[0])
    xi2 = z2 + et * (g2 + a * alpha_p[1] + b * beta_p[1])
    row = n // 3
    I1_quad = 2 * np.pi * np.mean(xi1[:, row])
    I2_quad = 2 * np.pi * np.mean(xi2[row, :])
    mismatch = max(abs(I1 - I1_quad), abs(I2 - I2_quad))
    if mismatch > 1e-8:
        raise NumericalError(
            f"action quadrature disagrees with closed form by "
            f"{mismatch:.3e}")
    return complex(I1), complex(I2)


def realify_actions(problem, a0=0.0, tol=1e-11, max_steps=20, fd_step=1e-6):
    """Newton on (Re a, Im a) driving both normalized action defects to zero.

    Residuals are (Im I_1 / (2 pi et eps), Im I_2 / (2 pi et)); each
    evaluation runs the full fixed-point solve.  Returns (a_star, solution).
    """
    eps = problem.epsilon
    et = problem.epsilon_tilde

    def residual(a):
        sol = iterate_schema(problem, a=a)
        I1, I2 = compute_actions(sol, problem)
        return np.array([I1.imag / (2 * np.pi * et * eps),
                         I2.imag / (2 * np.pi * et)]), sol

    u = np.array([complex(a0).real, complex(a0).imag])
    for _ in range(max_steps):
        F, sol = residual(complex(u[0], u[1]))
        if np.max(np.abs(F)) < tol:
            return complex(u[0], u[1]), sol
        J = np.zeros((2, 2))
        for j in range(2):
            up = u.copy()
            up[j] += fd_step
            um = u.copy()
            um[j] -= fd_step
            Fp, _ = residual(complex(up[0], up[1]))
            Fm, _ = residual(complex(um[0], um[1]))
            J[:, j] = (Fp - Fm) / (2 * fd_step)
        u = u - np.linalg.solve(J, F)
    raise NumericalError(
        f"realification Newton did not converge in {max_steps} steps "
        f"(residual {np.max(np.abs(F)):.3e})")


@dataclass
class FamilyResult:
    """Tabulated reduced symbol and per-eta solutions of the shifted family."""

    etas: list
    p_tilde: list
    zetas: list
    solutions: list
    failures: list = field(default_factory=list)

    def table_rows(self):
        return [(e[0], e[1], p.real, p.imag)
                for e, p in zip(self.etas, self.p_tilde)]


def _solve_shifted(problem_template, zeta):
    prob = EiconalProblem(
        problem_template.p, problem_template.q_avg, problem_template.epsilon,
        r=problem_template.r, epsilon_tilde=problem_template.epsilon_tilde,
        grid=problem_template.grid, zeta=zeta,
        weight_s=problem_template.weight_s, tol=problem_template.tol,
        max_iter=problem_template.max_iter,
        nonlinearity_override=problem_template.nonlinearity_override)
    return prob, iterate_schema(prob, a=0.0)


def eta_of_zeta(problem_template, zeta):
    """Linear-in-x frequency eta of the a = 0 solution at shift zeta."""
    prob, sol = _solve_shifted(problem_template, zeta)
    c_star, _, qxi2 = sol.lin
    et = prob.epsilon_tilde
    eps = prob.epsilon
    eta = np.asarray(zeta, dtype=complex) + et * sol.b * np.array(
        [eps * qxi2, -1j * c_star])
    return eta, prob, sol


def solve_family(problem_template, eta_grid, zeta_tol=1e-12, max_newton=30):
    """Solve the shifted eiconal family on a grid of real eta targets.

    For each eta, finds zeta with eta(zeta) = eta by damped fixed point,
    and records p_tilde(eta) = z(zeta) plus the solution.  Per-eta failures
    are collected, not fatal.
    """
    etas, p_tab, zetas, sols, failures = [], [], [], [], []
    for eta_t in eta_grid:
        eta_t = np.asarray(eta_t, dtype=float)
        zeta = eta_t.astype(complex)
        ok = False
        try:
            for _ in range(max_newton):
                eta_cur, prob, sol = eta_of_zeta(problem_template, zeta)
                err = eta_cur - eta_t
                if np.max(np.abs(err)) < zeta_tol:
                    ok = True
                    break
                zeta = zeta - err
            if not ok:
                raise NumericalError(
                    f"family shift iteration stalled at eta = {eta_t}, "
                    f"|defect| = {np.max(np.abs(err)):.3e}")
            etas.append((float(eta_t[0]), float(eta_t[1])))
            p_tab.append(problem_template.energy(zeta))
            zetas.append((complex(zeta[0]), complex(zeta[1])))
            sols.append(sol)
        except (NumericalError, ValidationError) as exc:
            failures.append(((float(eta_t[0]), float(eta_t[1])), str(exc)))
    return FamilyResult(etas=etas, p_tilde=p_tab, zetas=zetas,
                        solutions=sols, failures=failures)


def phase_gradient_bounds(problem_template, eta, d_eta=1e-4):
    """Displacement data of the family transformation at one eta.

    Returns (max |d_x1 phi_per|, max |d_x2 phi_per|, max |d_eta phi_per|)
    measured on the collocation grid; the three bound the coordinate
    displacements of the canonical map at orders eps^2, eps, eps.
    """
    res = solve_family(problem_template, [eta])
    if res.failures:
        raise NumericalError(res.failures[0][1])
    sol = res.solutions[0]
    et = problem_template.epsilon_tilde
    n = sol.psi_per_hat.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    g1 = np.fft.ifft2(1j * K1 * sol.psi_per_hat) * n * n
    g2 = np.fft.ifft2(1j * K2 * sol.psi_per_hat) * n * n
    # the b-part of the phase is x-linear, not periodic: gradient constants
    c_star, _, qxi2 = sol.lin
    eps = problem_template.epsilon
    bgrad = sol.b * np.array([eps * qxi2, -1j * c_star])
    dphi1 = float(np.max(np.abs(et * (g1 + bgrad[0]))))
    dphi2 = float(np.max(np.abs(et * (g2 + bgrad[1]))))

    # eta-derivative of phi_per by central differences over the family
    maxd = 0.0
    for j in range(2):
        de = np.zeros(2)
        de[j] = d_eta
        rp = solve_family(problem_template, [np.asarray(eta) + de])
        rm = solve_family(problem_template, [np.asarray(eta) - de])
        if rp.failures or rm.failures:
            raise NumericalError("family solve failed on the eta stencil")
        hp = rp.solutions[0].psi_per_hat
        hm = rm.solutions[0].psi_per_hat
        fp = np.fft.ifft2(hp) * n * n
        fm = np.fft.ifft2(hm) * n * n
        maxd = max(maxd, float(np.max(np.abs(et * (fp - fm))))
                   / (2 * d_eta))
    return dphi1, dphi2, maxd
