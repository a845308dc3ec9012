"""Matching of predicted quasi-eigenvalues against the oracle spectrum.

A minimal-cost one-to-one assignment (exact Hungarian algorithm) pairs the
two eigenvalue lists; inside a shrunk copy of the spectral rectangle the
pairing must be perfect, and its sup/mean errors quantify the agreement.
Convergence studies fit the decay of the sup error in h.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError

MAX_MATCH_POINTS = 2000


@dataclass
class MatchReport:
    """One-to-one pairing with error statistics over the shrunk rectangle."""

    pairs: list                 # (k or None, z_pred, z_oracle, |error|)
    unmatched_pred: list        # (k or None, z)
    unmatched_oracle: list      # z
    sup_error: float
    mean_error: float
    n_pred: int
    n_oracle: int
    n_matched: int
    n_pred_shrunk: int
    n_oracle_shrunk: int
    shrunk_clean: bool          # no unmatched points inside the shrunk rect
    counts_agree: bool
    shrink: float

    def to_json_dict(self):
        return {
            "pairs": [
                {"k": list(k) if k is not None else None,
                 "pred": [zp.real, zp.imag], "oracle": [zo.real, zo.imag],
                 "error": e}
                for k, zp, zo, e in self.pairs],
            "unmatched_pred": [
                {"k": list(k) if k is not None else None,
                 "z": [z.real, z.imag]} for k, z in self.unmatched_pred],
            "unmatched_oracle": [[z.real, z.imag]
                                 for z in self.unmatched_oracle],
            "sup_error": self.sup_error,
            "mean_error": self.mean_error,
            "counts": {"pred": self.n_pred, "oracle": self.n_oracle,
                       "matched": self.n_matched,
                       "pred_shrunk": self.n_pred_shrunk,
                       "oracle_shrunk": self.n_oracle_shrunk},
            "shrunk_clean": self.shrunk_clean,
            "counts_agree": self.counts_agree,
            "shrink": self.shrink,
        }


def _median_spacing(zs):
    if len(zs) < 2:
        return np.inf
    z = np.asarray(zs)
    d = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(d, np.inf)
    return float(np.median(np.min(d, axis=1)))


def match_spectra(pred, oracle, rect, epsilon, shrink=0.9):
    """Minimal-cost assignment of predicted (k, z) against oracle z.

    Both inputs must already be filtered to the rectangle.  Pairs with
    error above 10x the median oracle spacing are refused (left unmatched).
    A count mismatch inside the shrunk rectangle is reported in the
    MatchReport, not raised.
    """
    pred = list(pred)
    oracle = [complex(z) for z in oracle]
    if len(pred) > MAX_MATCH_POINTS or len(oracle) > MAX_MATCH_POINTS:
        raise ValidationError(
            f"matching supports at most {MAX_MATCH_POINTS} points per side")
    pred_k = [p[0] for p in pred]
    zp = np.array([complex(p[1]) for p in pred])
    zo = np.array(oracle)
    shr = rect.shrink(shrink)

    if len(zp) == 0 or len(zo) == 0:
        in_p = rect.contains(zp, epsilon) if len(zp) else np.zeros(0, bool)
        return MatchReport(
            pairs=[], unmatched_pred=list(zip(pred_k, zp)),
            unmatched_oracle=list(zo),
            sup_error=0.0, mean_error=0.0,
            n_pred=len(zp), n_oracle=len(zo), n_matched=0,
            n_pred_shrunk=int(np.sum(shr.contains(zp, epsilon)))
            if len(zp) else 0,
            n_oracle_shrunk=int(np.sum(shr.contains(zo, epsilon)))
            if len(zo) else 0,
            shrunk_clean=(len(zp) == 0 and len(zo) == 0),
            counts_agree=(len(zp) == len(zo)), shrink=shrink)

    cap = 10.0 * _median_spacing(zo if len(zo) >= len(zp) else zp)
    cost = np.abs(zp[:, None] - zo[None, :])
    big = 1e6 * (1.0 + np.max(cost))
    masked = np.where(cost > cap, big, cost)
    rows, cols = linear_sum_assignment(masked)

    pairs = []
    used_p = np.zeros(len(zp), dtype=bool)
    used_o = np.zeros(len(zo), dtype=bool)
    for i, j in zip(rows, cols):
        if cost[i, j] <= cap:
            pairs.append((pred_k[i], complex(zp[i]), complex(zo[j]),
                          float(cost[i, j])))
            used_p[i] = True
            used_o[j] = True
    unmatched_pred = [(pred_k[i], complex(zp[i]))
                      for i in range(len(zp)) if not used_p[i]]
    unmatched_oracle = [complex(zo[j])
                        for j in range(len(zo)) if not used_o[j]]

    in_shrunk = [shr.contains(np.array([p[1]]), epsilon)[0]
                 or shr.contains(np.array([p[2]]), epsilon)[0]
                 for p in pairs]
    sel = [e for p, s in zip(pairs, in_shrunk) if s for e in [p[3]]]
    sup_error = max(sel) if sel else 0.0
    mean_error = float(np.mean(sel)) if sel else 0.0

    clean = (all(not shr.contains(np.array([z]), epsilon)[0]
                 for _, z in unmatched_pred)
             and all(not shr.contains(np.array([z]), epsilon)[0]
                     for z in unmatched_oracle))
    n_ps = int(np.sum(shr.contains(zp, epsilon)))
    n_os = int(np.sum(shr.contains(zo, epsilon)))
    return MatchReport(
        pairs=pairs, unmatched_pred=unmatched_pred,
        unmatched_oracle=unmatched_oracle,
        sup_error=float(sup_error), mean_error=mean_error,
        n_pred=len(zp), n_oracle=len(zo), n_matched=len(pairs),
        n_pred_shrunk=n_ps, n_oracle_shrunk=n_os,
        shrunk_clean=clean, counts_agree=(n_ps == n_os), shrink=shrink)


@dataclass
class StudyResult:
    """Per-h sup errors of the matched spectra with the fitted h-order."""

    h_list: list
    sup_errors: list
    mean_errors: list
    reports: list
    N: int
    epsilon: float
    slope: float | None = None
    exact: bool = False

    def rows(self):
        return [(h, self.N, s, m, r.n_pred, r.n_oracle, r.n_matched)
                for h, s, m, r in zip(self.h_list, self.sup_errors,
                                      self.mean_errors, self.reports)]


def fit_order(h_list, errors, exact_floor=1e-13):
    """Least-squares slope of log error vs log h.

    Errors entirely below exact_floor are reported as exact (slope None).
    """
    errs = np.asarray(errors, dtype=float)
    if np.all(errs <= exact_floor):
        return None, True
    errs = np.maximum(errs, 1e-300)
    slope = float(np.polyfit(np.log(h_list), np.log(errs), 1)[0])
    return slope, False


def convergence_study(run_one, h_list, N, epsilon):
    """Fit the h-order of sup errors produced by run_one(h) -> MatchReport.

    run_one must perform the full predict/oracle/compare pipeline at the
    given h (trust failures raise inside it and invalidate the study).
    h_list must be geometric-ish with at least 4 points.
    """
    h_list = sorted(float(h) for h in h_list)
    if len(h_list) < 4:
        raise ValidationError("convergence study needs >= 4 values of h")
    reports = [run_one(h) for h in h_list]
    sup = [r.sup_error for r in reports]
    mean = [r.mean_error for r in reports]
    slope, exact = fit_order(h_list, sup)
    return StudyResult(h_list=h_list, sup_errors=sup, mean_errors=mean,
                       reports=reports, N=N, epsilon=epsilon,
                       slope=slope, exact=exact)
