"""Built-in models and assembly helpers."""

from __future__ import annotations

from .errors import ValidationError
from .eiconal import EiconalProblem
from .geomflow import FlowModel, averaged_remainder
from .symbols import FourierTaylorSymbol, HSeries


def cos_x(m, c=1.0):
    """c * cos(m . x) as a symbol."""
    return FourierTaylorSymbol({(m[0], m[1], 0, 0): 0.5 * c,
                                (-m[0], -m[1], 0, 0): 0.5 * c})


def sin_x(m, c=1.0):
    """c * sin(m . x) as a symbol."""
    return FourierTaylorSymbol({(m[0], m[1], 0, 0): -0.5j * c,
                                (-m[0], -m[1], 0, 0): 0.5j * c})


def xi(j, power=1, c=1.0):
    alpha = (power, 0) if j == 1 else (0, power)
    return FourierTaylorSymbol.monomial(alpha=alpha, c=c)


def benchmark1(epsilon):
    """The standard benchmark flow model.

    p(xi_1) = xi_1 + 0.3 xi_1^2,
    q(x, xi) = xi_2 + 0.15 xi_1 xi_2 + 0.2 cos(x_1)(1 + xi_2)
               + 0.1 sin(x_1 + x_2),
    so the flow average is <q> = xi_2 + 0.15 xi_1 xi_2.
    """
    p = FourierTaylorSymbol({(0, 0, 1, 0): 1.0, (0, 0, 2, 0): 0.3})
    q = FourierTaylorSymbol({
        (0, 0, 0, 1): 1.0,
        (0, 0, 1, 1): 0.15,
        (1, 0, 0, 0): 0.1, (-1, 0, 0, 0): 0.1,
        (1, 0, 0, 1): 0.1, (-1, 0, 0, 1): 0.1,
        (1, 1, 0, 0): -0.05j, (-1, -1, 0, 0): 0.05j,
    })
    return FlowModel(p, q, epsilon, spectral=True)


MODELS = {"benchmark1": benchmark1}


def by_name(name, epsilon):
    if name not in MODELS:
        raise ValidationError(
            f"unknown model '{name}' (available: {sorted(MODELS)})")
    return MODELS[name](epsilon)


def operator_series(model, N, subprincipal=False):
    """The full operator symbol as an h-series.

    Order h^0 is p + i eps q.  With subprincipal=True an x-dependent h^1
    term q - <q> is added (a generic lower-order symbol exercising the
    normal form at order h).
    """
    terms = [model.principal_symbol()]
    if subprincipal:
        terms.append(model.q - model.q_avg)
    return HSeries(terms, N=N)


def eiconal_problem(model, epsilon_tilde=None, grid=None, zeta=(0.0, 0.0),
                    **kwargs):
    """Assemble the averaged eiconal problem for a flow model.

    The remainder r = (p + i eps q) o exp(i eps H_G) - p - i eps <q> is
    computed explicitly from the conjugation weight, so the eiconal data
    is exactly the averaged reduction of the model.
    """
    r = averaged_remainder(model)
    return EiconalProblem(model.p, model.q_avg, model.epsilon, r=r,
                          epsilon_tilde=epsilon_tilde, grid=grid, zeta=zeta,
                          **kwargs)
