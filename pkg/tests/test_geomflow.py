"""Flow averaging, conjugation weight, Hamilton flow, action/period."""

import numpy as np
import pytest

import torusspec as ts
from torusspec import geomflow as gf, models
from torusspec.errors import NumericalError, ValidationError
from torusspec.symbols import FourierTaylorSymbol, max_coeff_diff, multiply

S = FourierTaylorSymbol


@pytest.fixture
def chart_model():
    p = S.monomial(alpha=(1, 0))
    q = S({(1, 0, 0, 0): 0.5, (-1, 0, 0, 0): 0.5})  # cos x1
    return gf.FlowModel(p, q, 0.1)


class TestFlowModel:
    def test_rejects_degenerate_p(self):
        with pytest.raises(ValidationError):
            gf.FlowModel(S.monomial(alpha=(2, 0)), S.constant(1.0), 0.1)

    def test_rejects_x_dependent_p(self):
        with pytest.raises(ValidationError):
            gf.FlowModel(S.monomial(m=(1, 0)) + S.monomial(alpha=(1, 0)),
                         S.constant(1.0), 0.1)

    def test_spectral_nondegeneracy(self):
        p = S.monomial(alpha=(1, 0))
        q = S({(1, 0, 0, 0): 0.5, (-1, 0, 0, 0): 0.5})  # <q> = 0
        with pytest.raises(ValidationError):
            gf.FlowModel(p, q, 0.1, spectral=True)


class TestFlowAverage:
    def test_x_independent_fixed(self, chart_model):
        q = S({(0, 0, 1, 1): 2.0, (0, 0, 0, 2): -1.0})
        assert max_coeff_diff(gf.flow_average(q, chart_model), q) == 0.0

    def test_cos_cos_averages_to_zero(self, chart_model):
        # cos x1 cos x2 has only m1 != 0 modes
        q = S({(1, 1, 0, 0): 0.25, (1, -1, 0, 0): 0.25,
               (-1, 1, 0, 0): 0.25, (-1, -1, 0, 0): 0.25})
        assert gf.flow_average(q, chart_model).is_zero()

    def test_mixed_perturbation(self, chart_model):
        q = S({(0, 0, 0, 1): 1.0,
               (1, 0, 0, 0): 0.1, (-1, 0, 0, 0): 0.1,
               (1, 0, 0, 1): 0.1, (-1, 0, 0, 1): 0.1,
               (1, 1, 0, 0): -0.05j, (-1, -1, 0, 0): 0.05j})
        avg = gf.flow_average(q, chart_model)
        assert avg.coeffs == {(0, 0, 0, 1): 1.0 + 0j}

    def test_idempotent(self, bench_model):
        a1 = gf.flow_average(bench_model.q, bench_model)
        a2 = gf.flow_average(a1, bench_model)
        assert max_coeff_diff(a1, a2) == 0.0

    def test_commutes_with_x_independent_factor(self, bench_model):
        f = S({(0, 0, 1, 0): 0.7, (0, 0, 0, 1): -0.2})
        lhs = gf.flow_average(multiply(f, bench_model.q), bench_model)
        rhs = multiply(f, gf.flow_average(bench_model.q, bench_model))
        assert max_coeff_diff(lhs, rhs) < 1e-15


class TestWeightG:
    def test_cos_gives_sin(self, chart_model):
        G = gf.weight_G(chart_model)
        assert max_coeff_diff(
            G, S({(1, 0, 0, 0): -0.5j, (-1, 0, 0, 0): 0.5j})) < 1e-14

    def test_averaged_input_gives_zero(self):
        p = S.monomial(alpha=(1, 0))
        q = S({(0, 1, 0, 0): 1.0, (0, -1, 0, 0): 1.0, (0, 0, 0, 1): 0.5})
        model = gf.FlowModel(p, q, 0.1)
        assert gf.weight_G(model).is_zero()

    def test_transport_equation_residual(self, bench_model):
        # H_p G = q - <q> coefficientwise up to the retained degrees
        G = gf.weight_G(bench_model)
        HpG = multiply(bench_model.p.dxi(1), G.dx(1))
        rhs = bench_model.q - bench_model.q_avg
        assert max_coeff_diff(HpG.truncate(D=G.D - bench_model.p.D),
                              rhs) < 1e-12

    def test_flow_average_of_weight_transport_is_zero(self, bench_model):
        G = gf.weight_G(bench_model)
        HpG = multiply(bench_model.p.dxi(1), G.dx(1))
        assert gf.flow_average(HpG, bench_model).is_zero()

    def test_nontrivial_divisor_with_curved_p(self):
        # p = xi1 + 0.3 xi1^2 and a (1,1) mode: the division is by a jet
        p = S({(0, 0, 1, 0): 1.0, (0, 0, 2, 0): 0.3})
        q = S({(1, 1, 0, 0): -0.5j, (-1, -1, 0, 0): 0.5j})  # sin(x1+x2)
        model = gf.FlowModel(p, q, 0.1)
        G = gf.weight_G(model)
        HpG = multiply(p.dxi(1), G.dx(1))
        assert max_coeff_diff(HpG.truncate(D=G.D - 1), q) < 1e-12


class TestAveragedRemainder:
    def test_order_eps_squared(self):
        norms = []
        for eps in (0.05, 0.1, 0.2):
            r = gf.averaged_remainder(models.benchmark1(eps))
            norms.append(r.norm_max())
        slope = np.polyfit(np.log([0.05, 0.1, 0.2]), np.log(norms), 1)[0]
        assert slope > 1.95

    def test_first_order_cancellation(self, bench_model):
        # the order-eps part of the conjugated symbol is exactly i eps <q>
        r = gf.averaged_remainder(bench_model)
        assert r.norm_max() < 0.6 * bench_model.epsilon ** 2


class TestHamiltonFlow:
    def test_translation_flow(self):
        p = S.monomial(alpha=(1, 0))
        end = gf.hamilton_flow(p, (0.0, 0.0, 0.3, 0.2), 1.5)
        assert np.allclose(end, [1.5, 0.0, 0.3, 0.2], atol=1e-10)

    def test_translation_wraps_mod_2pi(self):
        p = S.monomial(alpha=(1, 0))
        end = gf.hamilton_flow(p, (0.0, 0.0, 1.0, 0.0), 2 * np.pi + 0.25)
        assert abs(end[0] - 0.25) < 1e-9

    def test_harmonic_period(self):
        def grad(x1, x2, xi1, xi2):
            return np.array([x1, 0.0]), np.array([xi1, 0.0])

        end = gf.hamilton_flow(grad, (0.7, 0.0, 0.2, 0.0), 2 * np.pi)
        assert abs(end[0] - 0.7) + abs(end[2] - 0.2) < 1e-9

    def test_energy_conserved_over_period(self):
        p = S({(0, 0, 1, 0): 1.0, (0, 0, 2, 0): 0.3})
        rho0 = (0.0, 0.0, 0.1, 0.05)
        E0 = p.evaluate(*rho0).real
        T = 2 * np.pi / (1 + 0.6 * 0.1)
        end = gf.hamilton_flow(p, rho0, T)
        assert abs(p.evaluate(*end).real - E0) < 1e-9

    def test_escape_detection(self):
        def grad(x1, x2, xi1, xi2):
            return np.array([-1.0, 0.0]), np.array([0.0, 0.0])

        with pytest.raises(NumericalError):
            gf.hamilton_flow(grad, (0.0, 0.0, 0.0, 0.0), 10.0, xi_box=2.0)


class TestActionPeriod:
    def test_trivial_chart(self):
        p = S.monomial(alpha=(1, 0))
        T, I, _ = gf.closed_trajectory(p, 0.1)
        assert abs(T - 2 * np.pi) < 1e-10
        assert abs(I - 2 * np.pi * 0.1) < 1e-9

    def test_curved_chart_period(self):
        p = S({(0, 0, 1, 0): 1.0, (0, 0, 2, 0): 0.3})
        xi1 = (-1 + np.sqrt(1 + 1.2 * 0.1)) / 0.6
        T, I, _ = gf.closed_trajectory(p, 0.1, xi2=0.1)
        assert abs(T - 2 * np.pi / (1 + 0.6 * xi1)) < 1e-9
        assert abs(I - 2 * np.pi * xi1) < 1e-9

    def test_action_constant_on_level_set(self):
        p = S({(0, 0, 1, 0): 1.0, (0, 0, 2, 0): 0.3})
        _, I1, _ = gf.closed_trajectory(p, 0.07, xi2=0.0, x0=(0.0, 0.0))
        _, I2, _ = gf.closed_trajectory(p, 0.07, xi2=0.3, x0=(1.0, 2.0))
        assert abs(I1 - I2) < 1e-9

    def test_derivative_of_action_is_period(self):
        p = S({(0, 0, 1, 0): 1.0, (0, 0, 2, 0): 0.3})
        rep = gf.action_period_check(p, np.arange(0.05, 0.155, 1e-3))
        errs = [e for e in rep.err if not np.isnan(e)]
        assert errs and max(errs) < 1e-6

    def test_csv_rows_shape(self):
        p = S.monomial(alpha=(1, 0))
        rep = gf.action_period_check(p, [0.05, 0.06, 0.07])
        header, body = rep.to_csv_rows()
        assert header == ["E", "I", "T", "dIdE", "abs_err"]
        assert len(body) == 3
