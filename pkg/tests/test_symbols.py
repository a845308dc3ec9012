"""Symbol algebra: products, brackets, star terms, jets, conjugations."""

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

import torusspec as ts
from torusspec import torusquant as tq
from torusspec.errors import DivisorFloorError, ValidationError
from torusspec.symbols import (FourierTaylorSymbol, HSeries, max_coeff_diff,
                               hseries_star, moyal_conjugation_step,
                               multiply, poisson_bracket, star_bidifferential,
                               taylor_reciprocal, weight_conjugation)

S = FourierTaylorSymbol

TOL = 1e-12


def sym_strategy():
    key = st.tuples(st.integers(-2, 2), st.integers(-2, 2),
                    st.integers(0, 3), st.integers(0, 3))
    coef = st.complex_numbers(max_magnitude=2.0, allow_nan=False,
                              allow_infinity=False)
    return st.dictionaries(key, coef, min_size=1, max_size=6).map(S)


class TestMultiply:
    def test_xi1_times_xi2(self):
        c = multiply(S.monomial(alpha=(1, 0)), S.monomial(alpha=(0, 1)))
        assert c.coeffs == {(0, 0, 1, 1): 1.0 + 0j}

    def test_inverse_modes(self):
        c = multiply(S.monomial(m=(1, 0)), S.monomial(m=(-1, 0)))
        assert c.coeffs == {(0, 0, 0, 0): 1.0 + 0j}

    def test_truncation_flag(self):
        one = S.constant(1.0)
        x1 = S.monomial(alpha=(1, 0))
        prod = multiply(one + x1, one - x1, dcap=1)
        assert prod.coeffs == {(0, 0, 0, 0): 1.0 + 0j}
        assert prod.xi_truncated
        assert not prod.mode_overflow

    def test_mode_overflow_is_sticky(self):
        a = S.monomial(m=(2, 0))
        prod = multiply(a, a, kcap=3)  # mode 4 dropped
        assert prod.mode_overflow
        assert multiply(prod + S.constant(1.0),
                        S.constant(2.0)).mode_overflow

    def test_h0_of_star_is_product(self, rng):
        from conftest import random_symbol
        a = random_symbol(rng)
        b = random_symbol(rng)
        assert max_coeff_diff(star_bidifferential(a, b, 0, kcap=8, dcap=12),
                              multiply(a, b, kcap=8, dcap=12)) == 0.0


class TestPoissonBracket:
    def test_xi1_with_mode(self):
        pb = poisson_bracket(S.monomial(alpha=(1, 0)), S.monomial(m=(1, 0)))
        assert pb.coeffs == {(1, 0, 0, 0): 1j}

    def test_linear_combination_example(self):
        p = S.monomial(alpha=(1, 0)) + S.monomial(alpha=(0, 1), c=0.1j)
        pb = poisson_bracket(p, S.monomial(m=(1, 1)))
        val = pb.coefficient((1, 1), (0, 0))
        assert abs(val - (1j - 0.1)) < TOL

    def test_self_bracket_vanishes(self, rng):
        from conftest import random_symbol
        a = random_symbol(rng)
        assert poisson_bracket(a, a, dcap=12).norm_max() < TOL

    @settings(max_examples=25, deadline=None)
    @given(sym_strategy(), sym_strategy())
    def test_antisymmetry(self, a, b):
        d = max_coeff_diff(poisson_bracket(a, b, kcap=8, dcap=12),
                           poisson_bracket(b, a, kcap=8, dcap=12).scale(-1))
        assert d < TOL * max(1.0, a.norm_max() * b.norm_max())

    @settings(max_examples=25, deadline=None)
    @given(sym_strategy(), sym_strategy(), sym_strategy())
    def test_jacobi(self, a, b, c):
        def pb(x, y):
            return poisson_bracket(x, y, kcap=16, dcap=16)

        total = pb(a, pb(b, c)).add(pb(b, pb(c, a))).add(pb(c, pb(a, b)))
        scale = max(1.0, a.norm_max() * b.norm_max() * c.norm_max())
        assert total.norm_max() < 1e-10 * scale

    @settings(max_examples=25, deadline=None)
    @given(sym_strategy(), sym_strategy(), sym_strategy())
    def test_bilinearity(self, a, b, c):
        lhs = poisson_bracket(a.add(b.scale(2.5 - 1j)), c, kcap=8, dcap=12)
        rhs = poisson_bracket(a, c, kcap=8, dcap=12).add(
            poisson_bracket(b, c, kcap=8, dcap=12).scale(2.5 - 1j))
        scale = max(1.0, (a.norm_max() + b.norm_max()) * c.norm_max())
        assert max_coeff_diff(lhs, rhs) < TOL * scale

    def test_h1_of_star_is_half_bracket(self, rng):
        from conftest import random_symbol
        a = random_symbol(rng)
        b = random_symbol(rng)
        s1 = star_bidifferential(a, b, 1, kcap=8, dcap=12)
        pb = poisson_bracket(a, b, kcap=8, dcap=12)
        assert max_coeff_diff(s1.scale(2j), pb) < TOL * max(
            1.0, a.norm_max() * b.norm_max())


class TestTaylorReciprocal:
    def test_constant(self):
        g = taylor_reciprocal(S.constant(2.0), D=0)
        assert g.coeffs == {(0, 0, 0, 0): 0.5 + 0j}

    def test_geometric_series(self):
        f = S.constant(1.0) + S.monomial(alpha=(1, 0))
        g = taylor_reciprocal(f, D=2)
        assert max_coeff_diff(g, S({(0, 0, 0, 0): 1.0, (0, 0, 1, 0): -1.0,
                                    (0, 0, 2, 0): 1.0})) < TOL

    def test_complex_constant(self):
        g = taylor_reciprocal(S.constant(1j - 0.1), D=0)
        assert abs(g.coefficient((0, 0), (0, 0)) - 1 / (1j - 0.1)) < TOL

    def test_inverse_property(self, rng):
        for _ in range(5):
            coeffs = {(0, 0, 0, 0): 1.5 + 0.5j}
            for a1 in range(3):
                for a2 in range(3 - a1):
                    if (a1, a2) != (0, 0):
                        coeffs[(0, 0, a1, a2)] = 0.3 * complex(
                            rng.standard_normal(), rng.standard_normal())
            f = S(coeffs)
            g = taylor_reciprocal(f, D=6)
            prod = multiply(f, g, kcap=0, dcap=6)
            assert max_coeff_diff(prod, S.constant(1.0)) < TOL

    def test_divisor_floor(self):
        with pytest.raises(DivisorFloorError):
            taylor_reciprocal(S.constant(1e-14), D=2)

    def test_requires_x_independent(self):
        with pytest.raises(ValidationError):
            taylor_reciprocal(S.monomial(m=(1, 0)) + S.constant(1.0), D=2)


class TestMoyalConjugation:
    def test_zero_generator_identity(self):
        P = HSeries([S.monomial(alpha=(1, 0))], N=2)
        out = moyal_conjugation_step(P, S.zero(), 0, 2)
        assert all(max_coeff_diff(out.term(n), P.term(n)) == 0.0
                   for n in range(3))

    def test_matrix_exponential_oracle_exact_case(self):
        # Op(xi1) conjugated by e^{Op(e^{i x1})} on a 9x9 mode window:
        # the series terminates, so symbol and matrix agree exactly
        P = HSeries([S.monomial(alpha=(1, 0))], N=1)
        a = S.monomial(m=(1, 0))
        conj = moyal_conjugation_step(P, a, 0, 1)
        assert max_coeff_diff(conj.term(1), S.monomial(m=(1, 0), c=-1.0)) \
            < TOL
        w = tq.QuantizationWindow(M=4, theta=(0.0, 0.0), h=0.1)
        A = tq.weyl_matrix(HSeries([a], N=0), w)
        E = scipy.linalg.expm(A)
        target = E @ tq.weyl_matrix(P, w) @ scipy.linalg.expm(-A)
        got = tq.weyl_matrix(conj, w)
        assert np.max(np.abs(target - got)) < 1e-13

    def test_matrix_exponential_oracle_order(self):
        # truncation at h^N leaves an O(h^{N+1}) defect on interior modes
        P = HSeries([S({(0, 0, 1, 0): 1.0, (0, 0, 0, 1): 0.3j,
                        (1, 1, 0, 0): 0.2, (-1, -1, 0, 0): 0.2})], N=3)
        a = S({(1, 0, 0, 1): 0.3, (-1, 0, 0, 1): 0.3,
               (0, 1, 1, 0): -0.2j, (0, -1, 1, 0): 0.2j})
        conj = moyal_conjugation_step(P, a, 0, 3)
        errs = []
        hs = [0.05, 0.025]
        for h in hs:
            w = tq.QuantizationWindow(M=6, theta=(0.3, -0.2), h=h)
            A = tq.weyl_matrix(HSeries([a], N=0), w)
            target = scipy.linalg.expm(A) @ tq.weyl_matrix(P, w) \
                @ scipy.linalg.expm(-A)
            got = tq.weyl_matrix(conj, w)
            ks = np.arange(-6, 7)
            K1, K2 = np.meshgrid(ks, ks, indexing="ij")
            inner = (np.maximum(np.abs(K1), np.abs(K2)) <= 4).ravel()
            sub = np.ix_(inner, inner)
            errs.append(np.max(np.abs(target[sub] - got[sub])))
        slope = np.log(errs[0] / errs[1]) / np.log(hs[0] / hs[1])
        assert slope > 3.5

    def test_conjugation_inverse(self, rng):
        from conftest import random_symbol
        P = HSeries([random_symbol(rng, scale=0.5) for _ in range(3)], N=2)
        a = random_symbol(rng, scale=0.3)
        j = 1
        there = moyal_conjugation_step(P, a, j, 2)
        back = moyal_conjugation_step(there, a.scale(-1), j, 2)
        assert all(max_coeff_diff(back.term(n), P.term(n)) < TOL
                   for n in range(3))


class TestWeightConjugation:
    def test_classical_flow_at_h0(self):
        # e^{ad} acts on the h^0 term as composition with the W-flow:
        # for W = x-independent no-op on x-independent symbols
        P = HSeries([S.monomial(alpha=(2, 0))], N=2)
        W = S.monomial(alpha=(0, 1), c=0.2)
        out = weight_conjugation(P, W, 2)
        assert all(max_coeff_diff(out.term(n), P.term(n)) < TOL
                   for n in range(3))

    def test_matrix_similarity_small_window(self):
        # e^{(i/h) Op(W)} conjugation: the computed series must agree with
        # the matrix-exponential conjugation away from the window edge (the
        # exponential is not banded, so a wide guard band absorbs the
        # boundary tails of order (||B||/2)^guard / guard!).
        h = 0.1
        P = HSeries([S({(0, 0, 1, 0): 1.0, (0, 0, 0, 1): 0.1j,
                        (1, 0, 0, 0): 0.05, (-1, 0, 0, 0): 0.05})], N=3)
        W = S({(1, 0, 0, 0): 0.02j, (-1, 0, 0, 0): 0.02j,
               (0, 1, 1, 0): 0.01, (0, -1, 1, 0): 0.01})
        out = weight_conjugation(P, W, 3)
        M = 12
        w = tq.QuantizationWindow(M=M, theta=(0.2, 0.1), h=h)
        B = tq.weyl_matrix(HSeries([W.scale(1j / h)], N=0), w)
        target = scipy.linalg.expm(B) @ tq.weyl_matrix(P, w) \
            @ scipy.linalg.expm(-B)
        got = tq.weyl_matrix(out, w)
        ks = np.arange(-M, M + 1)
        K1, K2 = np.meshgrid(ks, ks, indexing="ij")
        inner = (np.maximum(np.abs(K1), np.abs(K2)) <= 3).ravel()
        sub = np.ix_(inner, inner)
        assert np.max(np.abs(target[sub] - got[sub])) < 1e-6


class TestHSeries:
    def test_length_invariant(self):
        s = HSeries([S.constant(1.0)], N=3)
        assert len(s.terms) == 4

    def test_star_consistency_with_single_products(self, rng):
        from conftest import random_symbol
        a = random_symbol(rng)
        b = random_symbol(rng)
        A = HSeries([a], N=0)
        B = HSeries([b], N=0)
        AB = hseries_star(A, B, 2, kcap=8, dcap=12)
        assert max_coeff_diff(AB.term(0), multiply(a, b, kcap=8, dcap=12)) \
            < TOL
        assert max_coeff_diff(
            AB.term(1),
            star_bidifferential(a, b, 1, kcap=8, dcap=12)) < TOL


class TestSerialization:
    def test_round_trip(self, rng):
        from conftest import random_symbol
        a = random_symbol(rng)
        d = a.to_json_dict()
        b = S.from_json_dict(d)
        assert max_coeff_diff(a, b) == 0.0
        assert (b.K, b.D) == (a.K, a.D)

    def test_invariant_bounds_enforced(self):
        with pytest.raises(ValidationError):
            S({(3, 0, 0, 0): 1.0}, K=2)
        with pytest.raises(ValidationError):
            S({(0, 0, 3, 1): 1.0}, D=3)

    def test_canonical_sparse_form(self):
        a = S({(0, 0, 0, 0): 1e-31})
        assert a.is_zero()


class TestBackends:
    def test_backends_agree_bitwise(self, rng):
        from torusspec import _kernels_py
        try:
            from torusspec import _kernels
        except ImportError:
            pytest.skip("compiled backend not built")
        for n in range(4):
            na, nb = 18, 13
            ma = rng.integers(-3, 4, size=(na, 2)).astype(np.int32)
            aa = rng.integers(0, 4, size=(na, 2)).astype(np.int32)
            va = rng.standard_normal(na) + 1j * rng.standard_normal(na)
            mb = rng.integers(-3, 4, size=(nb, 2)).astype(np.int32)
            ab = rng.integers(0, 4, size=(nb, 2)).astype(np.int32)
            vb = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)
            r1 = _kernels_py.star_term(ma, aa, va, mb, ab, vb, n, 8, 6,
                                       1e-30)
            r2 = _kernels.star_term(ma, aa, va, mb, ab, vb, n, 8, 6, 1e-30)
            assert np.array_equal(r1[0], r2[0])
            assert np.array_equal(r1[1], r2[1])
            assert r1[2:] == r2[2:]
