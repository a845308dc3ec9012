"""End-to-end runs: model -> reduction -> normal form -> lattice vs oracle.

The prediction side reduces the operator series to x-independent-principal
form, normalizes it, and evaluates the quasi-eigenvalue lattice; the oracle
side quantizes the original series on a trusted window and diagonalizes.
Independent (h, eps, N) runs can be distributed over a process pool.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import birkhoff, lattice, models, speccompare, torusquant
from .errors import UntrustedWindowError


@dataclass
class PredictionBundle:
    nf: object
    reduction: object
    series: object
    model: object
    N: int


def prepare(model, N, subprincipal=False):
    """Reduce and normalize the model's operator series once per (eps, N)."""
    P = models.operator_series(model, N, subprincipal=subprincipal)
    Pred, info = birkhoff.reduce_principal(P, N)
    nf = birkhoff.normal_form(Pred, N, model.epsilon)
    nf.reduction_residual = info.dropped_principal
    return PredictionBundle(nf=nf, reduction=info, series=P, model=model, N=N)


def predict_lattice(bundle, h, floquet, rect, k_box=None):
    return lattice.quasi_eigenvalues(bundle.nf, h, floquet, rect, k_box=k_box)


def oracle_spectrum(P, h, floquet, rect, epsilon, M=None, require_trust=True):
    """Dense spectrum of Op(P) on a trusted window, filtered to rect."""
    if M is None:
        window, trust = torusquant.suggest_window(P, rect, epsilon,
                                                  floquet, h)
    else:
        window = torusquant.QuantizationWindow.from_floquet(floquet, h, M)
        trust = torusquant.trusted_window(P, window, rect, epsilon)
        if require_trust and not trust.passed:
            raise UntrustedWindowError(
                f"window M={M} fails the trust check at h={h} "
                f"(margin {trust.margin:.3f})")
    mat = torusquant.weyl_matrix(P, window)
    vals = torusquant.eigs(mat)
    kept = lattice.rectangle_filter(vals, rect, epsilon)
    spec = torusquant.OracleSpectrum(eigenvalues=vals, window=window,
                                     trusted_rectangle=rect)
    return spec, trust, kept


def compare_at(bundle, h, floquet, rect, M=None, shrink=0.9):
    """Predict, diagonalize, and match at one value of h."""
    pred = predict_lattice(bundle, h, floquet, rect)
    _, trust, kept = oracle_spectrum(bundle.series, h, floquet, rect,
                                     bundle.model.epsilon, M=M)
    report = speccompare.match_spectra(pred, kept, rect,
                                       bundle.model.epsilon, shrink=shrink)
    return report, trust


def _study_worker(args):
    name, epsilon, N, h, S, alpha0, re_hw, F0, im_hw = args
    model = models.by_name(name, epsilon)
    bundle = prepare(model, N)
    fl = lattice.FloquetData(S=tuple(S), alpha0=tuple(alpha0))
    rect = lattice.SpectralRectangle(re_hw, F0, im_hw)
    report, _ = compare_at(bundle, h, fl, rect)
    return report


def convergence_study(model_name, epsilon, N, h_list, floquet, rect,
                      workers=1):
    """Order-fit study over h.  Named models only (workers pickle args)."""
    args = [(model_name, epsilon, N, h, list(floquet.S),
             list(floquet.alpha0), rect.re_half_width,
             rect.im_center_over_eps, rect.im_half_width_over_eps)
            for h in sorted(h_list)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_study_worker, args))
    else:
        model = models.by_name(model_name, epsilon)
        bundle = prepare(model, N)
        reports = []
        for h in sorted(h_list):
            rep, _ = compare_at(bundle, h, floquet, rect)
            reports.append(rep)
    sup = [r.sup_error for r in reports]
    mean = [r.mean_error for r in reports]
    slope, exact = speccompare.fit_order(sorted(h_list), sup)
    return speccompare.StudyResult(
        h_list=sorted(h_list), sup_errors=sup, mean_errors=mean,
        reports=reports, N=N, epsilon=epsilon, slope=slope, exact=exact)
