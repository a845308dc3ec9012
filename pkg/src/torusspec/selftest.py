"""Built-in invariant sweep (fast subset of the full test suite)."""

from __future__ import annotations

import numpy as np

from . import eiconal, geomflow, models, poisson_bracket
from . import barriertop as bt
from .birkhoff import cohomological_solve
from .symbols import (FourierTaylorSymbol, HSeries, max_coeff_diff,
                      moyal_conjugation_step, multiply, taylor_reciprocal)

S = FourierTaylorSymbol


def _checks():
    rng = np.random.default_rng(0)

    def rnd():
        c = {}
        for _ in range(5):
            key = (int(rng.integers(-2, 3)), int(rng.integers(-2, 3)),
                   int(rng.integers(0, 3)), int(rng.integers(0, 3)))
            c[key] = complex(rng.standard_normal(), rng.standard_normal())
        return S(c)

    a, b = rnd(), rnd()
    yield ("bracket antisymmetry",
           max_coeff_diff(poisson_bracket(a, b),
                          poisson_bracket(b, a).scale(-1)) < 1e-12)

    f = S({(0, 0, 0, 0): 1.0, (0, 0, 1, 0): 1.0})
    g = taylor_reciprocal(f, D=4)
    yield ("taylor reciprocal",
           max_coeff_diff(multiply(f, g, kcap=0, dcap=4), S.constant(1.0))
           < 1e-12)

    P = HSeries([S.monomial(alpha=(1, 0))], N=1)
    gen = S.monomial(m=(1, 0))
    back = moyal_conjugation_step(
        moyal_conjugation_step(P, gen, 0, 1), gen.scale(-1), 0, 1)
    yield ("conjugation inverse",
           max(max_coeff_diff(back.term(n), P.term(n)) for n in (0, 1))
           < 1e-12)

    m = models.benchmark1(0.1)
    G = geomflow.weight_G(m)
    resid = max_coeff_diff(poisson_bracket(G, m.p).truncate(D=5),
                           (m.q_avg - m.q).truncate(D=5))
    yield ("weight equation", resid < 1e-12)

    prob = models.eiconal_problem(m)
    sol = eiconal.iterate_schema(prob, a=0.0)
    yield ("eiconal residual", sol.residual < 1e-10)

    p0 = S({(0, 0, 1, 0): 1.0, (0, 0, 0, 1): 0.1j})
    av = cohomological_solve(p0, S.monomial(m=(0, 1)))
    yield ("cohomological divisor",
           abs(av.coefficient((0, 1), (0, 0)) + 10.0) < 1e-12)

    avg = bt.harmonic_average({(3, 0, 0, 0): 1.0}, (1.0, 1.0))
    yield ("harmonic parity", not avg)

    pts = [tuple(rng.standard_normal(4)) for _ in range(5)]
    poly = {(2, 1, 0, 0): 1.0}
    qa = bt.flow_quadrature_average(poly, (1.0, 2.0), pts)
    ev = bt.poly_evaluate(bt.harmonic_average(poly, (1.0, 2.0)),
                          *np.array(pts).T)
    yield ("harmonic quadrature", max(abs(np.array(qa) - ev)) < 1e-10)


def run(verbose=True):
    failed = 0
    for name, ok in _checks():
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failed += 0 if ok else 1
    if failed:
        print(f"selftest: {failed} failures")
        return 3
    print("selftest: all invariants hold")
    return 0
