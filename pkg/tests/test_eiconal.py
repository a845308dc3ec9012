"""Small-divisor eiconal solver: linearized solve, fixed point, actions,
realification, and the eta-family."""

import numpy as np
import pytest

from torusspec import eiconal as ei, models
from torusspec.errors import NonContractionError, ValidationError
from torusspec.symbols import FourierTaylorSymbol

S = FourierTaylorSymbol
EPS_GRID = (0.05, 0.1, 0.2)


def grids(n):
    x = 2 * np.pi * np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


@pytest.fixture(scope="module")
def bench_problems():
    return {eps: models.eiconal_problem(models.benchmark1(eps))
            for eps in EPS_GRID}


class TestSolveLinearized:
    def test_first_mode(self):
        X1, _ = grids(32)
        u = ei.solve_linearized(np.exp(1j * X1), 0.1)
        uhat = np.fft.fft2(u) / 32 ** 2
        assert abs(uhat[1, 0] - (-1j)) < 1e-13

    def test_small_divisor_mode(self):
        _, X2 = grids(32)
        u = ei.solve_linearized(np.exp(1j * X2), 0.1)
        uhat = np.fft.fft2(u) / 32 ** 2
        assert abs(uhat[0, 1] - (-10.0)) < 1e-12

    def test_zero_input(self):
        u = ei.solve_linearized(np.zeros((16, 16)), 0.1)
        assert np.max(np.abs(u)) == 0.0

    def test_rejects_nonzero_mean(self):
        with pytest.raises(ValidationError):
            ei.solve_linearized(np.ones((16, 16)), 0.1)

    def test_weighted_bound_constant(self, rng):
        # || (eps^-1 d1, d2) u || <= (C/eps) || v || with C <= 2, and the
        # bound is attained at the smallest transversal modes
        n = 32
        eps = 0.07
        k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        K1, K2 = np.meshgrid(k, k, indexing="ij")
        w = (1.0 + K1 ** 2 + K2 ** 2)
        for _ in range(5):
            vhat = ((rng.standard_normal((n, n))
                     + 1j * rng.standard_normal((n, n)))
                    * np.exp(-0.5 * np.hypot(K1, K2)))
            vhat[0, 0] = 0.0
            v = np.fft.ifft2(vhat) * n * n
            u = ei.solve_linearized(v, eps)
            uhat = np.fft.fft2(u) / n ** 2
            lhs = np.max(w * np.hypot(K1 / eps, K2) * np.abs(uhat))
            rhs = np.max(w * np.abs(vhat)) / eps
            assert lhs <= 2.0 * rhs + 1e-12

        vhat = np.zeros((n, n), dtype=complex)
        vhat[0, 1] = 1.0  # sharp mode
        v = np.fft.ifft2(vhat) * n * n
        u = ei.solve_linearized(v, eps)
        uhat = np.fft.fft2(u) / n ** 2
        lhs = np.max(w * np.hypot(K1 / eps, K2) * np.abs(uhat))
        assert abs(lhs * eps / (np.max(w * np.abs(vhat)))
                   - 2.0) < 1e-10  # weight <k>^2 = 2 at k=(0,1)


class TestIterateSchema:
    def test_linear_problem_trivial(self):
        prob = ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                                 S.monomial(alpha=(0, 1)), 0.1)
        sol = ei.iterate_schema(prob, a=0.0)
        assert sol.b == 0.0
        assert sol.weighted_norm == 0.0
        assert sol.iterations == 1
        assert sol.residual < 1e-14

    def test_synthetic_single_mode(self):
        c = 0.3 + 0.1j

        def override(X1, X2, xi1, xi2):
            return c * np.exp(1j * X1)

        prob = ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                                 S.monomial(alpha=(0, 1)), 0.1,
                                 nonlinearity_override=override)
        sol = ei.iterate_schema(prob, a=0.0)
        assert abs(sol.b) < 1e-14
        assert abs(sol.psi_per_hat[1, 0] - 1j * c) < 1e-13
        assert sol.iterations <= 2

    @pytest.mark.parametrize("eps", EPS_GRID)
    def test_benchmark_residual_and_contraction(self, bench_problems, eps):
        prob = bench_problems[eps]
        sol = ei.iterate_schema(prob, a=0.0)
        assert sol.residual < 1e-10
        et = prob.epsilon_tilde
        bound = eps / et + et
        assert all(r <= bound for r in sol.contraction_ratios)

    def test_contraction_constant_uniform(self, bench_problems):
        cs = []
        for eps, prob in bench_problems.items():
            sol = ei.iterate_schema(prob, a=0.0)
            worst = max(sol.contraction_ratios) if sol.contraction_ratios \
                else 0.0
            cs.append(worst / (eps / prob.epsilon_tilde
                               + prob.epsilon_tilde))
        assert max(cs) <= 1.0  # single C = 1 works across the grid

    def test_non_contraction_diagnostic(self):
        def override(X1, X2, xi1, xi2):
            return np.exp(1j * X1) * (1.0 + 5.0 * xi2)  # huge Lipschitz

        prob = ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                                 S.monomial(alpha=(0, 1)), 0.1,
                                 nonlinearity_override=override)
        with pytest.raises(NonContractionError):
            ei.iterate_schema(prob, a=0.0)

    def test_defect_on_doubled_grid(self, bench_problems):
        prob = bench_problems[0.1]
        sol = ei.iterate_schema(prob, a=0.0)
        assert sol.residual <= 10 * prob.tol

    def test_invariant_ge17_bound_recorded(self, bench_problems):
        for prob in bench_problems.values():
            sol = ei.iterate_schema(prob, a=0.0)
            assert sol.ge17_constant < 2.0


class TestActions:
    def test_zero_solution(self):
        prob = ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                                 S.monomial(alpha=(0, 1)), 0.1)
        sol = ei.iterate_schema(prob, a=0.0)
        I1, I2 = ei.compute_actions(sol, prob)
        assert abs(I1) < 1e-14 and abs(I2) < 1e-14

    def test_linear_part_formulas(self):
        prob = ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                                 S.monomial(alpha=(0, 1)), 0.1,
                                 epsilon_tilde=0.3)
        sol = ei.iterate_schema(prob, a=1.0)
        I1, I2 = ei.compute_actions(sol, prob)
        # a = 1, b = 0: I1 = 2 pi et eps a, I2 = 2 pi i et a
        assert abs(I1 - 2 * np.pi * 0.3 * 0.1) < 1e-12
        assert abs(I2 - 2j * np.pi * 0.3) < 1e-12

    def test_quadrature_cross_check_on_benchmark(self, bench_problems):
        prob = bench_problems[0.1]
        sol = ei.iterate_schema(prob, a=0.25 + 0.1j)
        ei.compute_actions(sol, prob)  # raises beyond 1e-8 mismatch


class TestRealify:
    def test_linear_problem_gives_zero(self):
        prob = ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                                 S.monomial(alpha=(0, 1)), 0.1)
        a_star, _ = ei.realify_actions(prob)
        assert abs(a_star) < 1e-12

    def test_scaling_law_single_constant(self, bench_problems):
        ratios = []
        for eps, prob in bench_problems.items():
            a_star, sol = ei.realify_actions(prob)
            I1, I2 = ei.compute_actions(sol, prob)
            assert abs(I1.imag) < 1e-10 and abs(I2.imag) < 1e-10
            ratios.append(abs(prob.epsilon_tilde * a_star) / eps)
        assert max(ratios) < 0.1          # |et a*| <= C' eps
        assert max(ratios) / min(ratios) < 1.5  # one constant fits the grid

    def test_stability_under_remainder_perturbation(self):
        eps = 0.1
        m = models.benchmark1(eps)
        from torusspec.geomflow import averaged_remainder
        r = averaged_remainder(m)
        base = ei.EiconalProblem(m.p, m.q_avg, eps, r=r)
        pert = ei.EiconalProblem(m.p, m.q_avg, eps, r=r.scale(1.1))
        a0, _ = ei.realify_actions(base)
        a1, _ = ei.realify_actions(pert)
        # no branch jump: the change is a small fraction of a*
        assert abs(a1 - a0) < 0.5 * abs(a0)
        assert abs(a1 - a0) > 0.0


class TestFamily:
    def test_linear_model_exact(self):
        prob = ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                                 S.monomial(alpha=(0, 1)), 0.1)
        fam = ei.solve_family(prob, [(0.0, 0.0), (0.05, -0.02)])
        assert not fam.failures
        for (e1, e2), pt in zip(fam.etas, fam.p_tilde):
            assert abs(pt - (e1 + 0.1j * e2)) < 1e-12
        assert all(np.max(np.abs(s.psi_per_hat)) < 1e-13
                   for s in fam.solutions)

    def test_reduced_symbol_second_order(self):
        grid = [(a, b) for a in np.linspace(-0.1, 0.1, 3)
                for b in np.linspace(-0.1, 0.1, 3)]
        errs = []
        for eps in EPS_GRID:
            m = models.benchmark1(eps)
            prob = models.eiconal_problem(m)
            fam = ei.solve_family(prob, grid)
            assert not fam.failures
            base = m.averaged_principal()
            errs.append(max(
                abs(pt - base.evaluate(0, 0, e1, e2))
                for (e1, e2), pt in zip(fam.etas, fam.p_tilde)))
        slope = np.polyfit(np.log(EPS_GRID), np.log(errs), 1)[0]
        assert slope >= 1.9

    def test_phase_normalization_zero_mean(self, bench_problems):
        fam = ei.solve_family(bench_problems[0.1], [(0.02, -0.03)])
        sol = fam.solutions[0]
        assert abs(sol.psi_per_hat[0, 0]) < 1e-15

    def test_displacement_bounds(self):
        # |x - y| = O(eps), |xi_1 - eta_1| = O(eps^2), |xi_2 - eta_2| = O(eps)
        d1s, d2s, des = [], [], []
        for eps in EPS_GRID:
            prob = models.eiconal_problem(models.benchmark1(eps))
            d1, d2, de = ei.phase_gradient_bounds(prob, (0.0, 0.0))
            d1s.append(d1)
            d2s.append(d2)
            des.append(de)
        assert max(d / e ** 2 for d, e in zip(d1s, EPS_GRID)) < 1.0
        assert max(d / e for d, e in zip(d2s, EPS_GRID)) < 1.0
        assert max(d / e for d, e in zip(des, EPS_GRID)) < 1.0

    def test_actions_of_family_tori_are_real(self, bench_problems):
        # the transformation conserves actions: on the real-eta family the
        # cycle actions are 2 pi eta, real
        prob = bench_problems[0.1]
        eta = (0.04, -0.06)
        fam = ei.solve_family(prob, [eta])
        sol = fam.solutions[0]
        n = sol.psi_per_hat.shape[0]
        k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        K1, K2 = np.meshgrid(k, k, indexing="ij")
        g1 = np.fft.ifft2(1j * K1 * sol.psi_per_hat) * n * n
        g2 = np.fft.ifft2(1j * K2 * sol.psi_per_hat) * n * n
        et = prob.epsilon_tilde
        eps = prob.epsilon
        c_star, _, qxi2 = sol.lin
        bg = sol.b * np.array([eps * qxi2, -1j * c_star])
        z1, z2 = fam.zetas[0]
        xi1 = z1 + et * (g1 + bg[0])
        xi2 = z2 + et * (g2 + bg[1])
        I1 = 2 * np.pi * np.mean(xi1[:, 5])
        I2 = 2 * np.pi * np.mean(xi2[5, :])
        assert abs(I1 - 2 * np.pi * eta[0]) < 1e-8
        assert abs(I2 - 2 * np.pi * eta[1]) < 1e-8

    def test_epsilon_tilde_independence(self):
        # with a = 0 the phase does not depend on the scaling split
        eps = 0.1
        m = models.benchmark1(eps)
        r = None
        from torusspec.geomflow import averaged_remainder
        r = averaged_remainder(m)
        pa = ei.EiconalProblem(m.p, m.q_avg, eps, r=r,
                               epsilon_tilde=np.sqrt(eps))
        pb = ei.EiconalProblem(m.p, m.q_avg, eps, r=r, epsilon_tilde=0.5)
        sa = ei.iterate_schema(pa, a=0.0)
        sb = ei.iterate_schema(pb, a=0.0)
        phi_a = pa.epsilon_tilde * sa.psi_per_hat
        phi_b = pb.epsilon_tilde * sb.psi_per_hat
        assert np.max(np.abs(phi_a - phi_b)) < 1e-11
        assert abs(pa.epsilon_tilde * sa.b - pb.epsilon_tilde * sb.b) < 1e-11


class TestProblemValidation:
    def test_epsilon_ordering(self):
        with pytest.raises(ValidationError):
            ei.EiconalProblem(S.monomial(alpha=(1, 0)),
                              S.monomial(alpha=(0, 1)), 0.3,
                              epsilon_tilde=0.2)

    def test_grid_headroom(self):
        m = models.benchmark1(0.1)
        with pytest.raises(ValidationError):
            models.eiconal_problem(m, grid=8)
