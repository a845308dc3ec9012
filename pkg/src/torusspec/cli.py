"""Batch front-end: scenario configs, pipeline orchestration, artifacts.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure (non-contraction, untrusted window, divisor floor, ...).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, birkhoff, barriertop, eiconal, lattice, models
from . import pipeline, serialize, speccompare, torusquant
from .errors import NumericalError, ValidationError
from .geomflow import FlowModel
from .symbols import FourierTaylorSymbol


DEFAULT_RECT = {"re_half_width": 0.15, "F0": 0.0,
                "im_half_width_over_eps": 0.15}


def _load_config(args):
    cfg = {}
    if args.config:
        if not os.path.exists(args.config):
            raise ValidationError(f"config file not found: {args.config}")
        with open(args.config) as f:
            cfg = json.load(f)
    if args.model:
        cfg["model"] = args.model
    if args.eps is not None:
        cfg["epsilon"] = args.eps
    if args.h is not None:
        cfg["h"] = args.h
    if args.order is not None:
        cfg["N"] = args.order
    if args.out:
        cfg["out"] = args.out
    cfg.setdefault("out", "./out")
    cfg.setdefault("N", 3)
    cfg.setdefault("floquet", {"S": [0.0, 0.0], "alpha0": [0, 0]})
    cfg.setdefault("rectangle", dict(DEFAULT_RECT))
    _validate(cfg)
    return cfg


def _validate(cfg):
    if "model" not in cfg:
        raise ValidationError("config needs a model (name or symbol table)")
    if "epsilon" not in cfg:
        raise ValidationError("config needs epsilon")
    if ("h" in cfg) == ("h_list" in cfg):
        raise ValidationError("config needs exactly one of h / h_list")
    for key in ("eiconal_tol",):
        tol = cfg.get("tolerances", {}).get(key)
        if tol is not None and tol <= 0:
            raise ValidationError(f"tolerance {key} must be positive")
    ref = cfg.get("action_chart_nf")
    if ref is not None and not os.path.exists(ref):
        raise ValidationError(f"referenced file not found: {ref}")


def _model(cfg):
    spec = cfg["model"]
    eps = float(cfg["epsilon"])
    if isinstance(spec, str):
        return models.by_name(spec, eps)
    p = FourierTaylorSymbol.from_json_dict(spec["p"])
    q = FourierTaylorSymbol.from_json_dict(spec["q"])
    return FlowModel(p, q, eps, spectral=spec.get("spectral", True))


def _floquet(cfg):
    f = cfg["floquet"]
    return lattice.FloquetData(S=tuple(f["S"]), alpha0=tuple(f["alpha0"]))


def _rect(cfg):
    r = cfg["rectangle"]
    return lattice.SpectralRectangle(
        re_half_width=float(r["re_half_width"]),
        im_center_over_eps=float(r.get("F0", 0.0)),
        im_half_width_over_eps=float(r["im_half_width_over_eps"]))


def _meta(cfg):
    return {"config_hash": serialize.config_hash(cfg),
            "tool_version": __version__}


def _h_values(cfg):
    return [float(h) for h in ([cfg["h"]] if "h" in cfg else cfg["h_list"])]


def cmd_eiconal(cfg, out):
    model = _model(cfg)
    prob = models.eiconal_problem(
        model, epsilon_tilde=cfg.get("epsilon_tilde"),
        tol=cfg.get("tolerances", {}).get("eiconal_tol", 1e-12))
    a_star, sol = eiconal.realify_actions(prob)
    I1, I2 = eiconal.compute_actions(sol, prob)
    doc = sol.to_json_dict()
    doc.update({
        "a_star": [a_star.real, a_star.imag],
        "I1": [I1.real, I1.imag], "I2": [I2.real, I2.imag],
        "ge17_constant": sol.ge17_constant,
        "epsilon": prob.epsilon, "epsilon_tilde": prob.epsilon_tilde,
    })
    serialize.write_json(os.path.join(out, "eiconal_solution.json"),
                         {"solution": doc}, meta=_meta(cfg))
    grid_cfg = cfg.get("eta_grid", {"min": -0.1, "max": 0.1, "points": 5})
    etas = np.linspace(grid_cfg["min"], grid_cfg["max"], grid_cfg["points"])
    grid = [(a, b) for a in etas for b in etas]
    fam = eiconal.solve_family(prob, grid)
    serialize.write_csv(
        os.path.join(out, "p_tilde_table.csv"),
        ["eta1", "eta2", "re_p", "im_p"], fam.table_rows(), meta=_meta(cfg))
    if fam.failures:
        raise NumericalError(f"{len(fam.failures)} family solves failed: "
                             f"{fam.failures[:3]}")
    print(f"eiconal: residual {sol.residual:.3e}, a* = {a_star:.6g}, "
          f"family table {len(fam.etas)} points")
    return 0


def cmd_bnf(cfg, out):
    model = _model(cfg)
    bundle = pipeline.prepare(model, int(cfg["N"]))
    serialize.write_json(os.path.join(out, "normal_form.json"),
                         {"normal_form": bundle.nf.to_json_dict()},
                         meta=_meta(cfg))
    eps_list = cfg.get("eps_list")
    if eps_list:
        results = {}
        for eps in eps_list:
            m = models.by_name(cfg["model"], float(eps)) \
                if isinstance(cfg["model"], str) else _model(
                    {**cfg, "epsilon": eps})
            results[float(eps)] = pipeline.prepare(m, int(cfg["N"])).nf
        rep = birkhoff.growth_report(results)
        rows = []
        for n, norms, slope, bound in rep.rows():
            rows.append([n] + norms
                        + [("exact-zero" if slope is None else slope), bound])
        serialize.write_csv(
            os.path.join(out, "growth_report.csv"),
            ["n"] + [f"grad_norm_eps_{e}" for e in rep.epsilons]
            + ["slope", "bound"], rows, meta=_meta(cfg))
    print(f"bnf: defects {['%.2e' % d for d in bundle.nf.defects]}, "
          f"overflow={bundle.nf.mode_overflow}")
    return 0


def cmd_predict(cfg, out):
    model = _model(cfg)
    bundle = pipeline.prepare(model, int(cfg["N"]))
    fl, rect = _floquet(cfg), _rect(cfg)
    for h in _h_values(cfg):
        pts = pipeline.predict_lattice(bundle, h, fl, rect)
        rows = [[k[0], k[1], z.real, z.imag] for k, z in pts]
        tag = f"h_{h:.6g}".replace(".", "_")
        serialize.write_csv(os.path.join(out, f"lattice_{tag}.csv"),
                            ["k1", "k2", "re_z", "im_z"], rows,
                            meta=_meta(cfg))
        serialize.write_json(
            os.path.join(out, f"lattice_{tag}.json"),
            {"h": h, "epsilon": model.epsilon, "N": bundle.N,
             "S": list(fl.S), "alpha0": list(fl.alpha0),
             "points": [{"k": list(k), "z": [z.real, z.imag]}
                        for k, z in pts]},
            meta=_meta(cfg))
        print(f"predict: h={h:.6g} -> {len(pts)} lattice points")
    return 0


def cmd_oracle(cfg, out):
    model = _model(cfg)
    P = models.operator_series(model, int(cfg["N"]))
    fl, rect = _floquet(cfg), _rect(cfg)
    M = cfg.get("window", {}).get("M")
    for h in _h_values(cfg):
        t0 = time.time()
        spec, trust, kept = pipeline.oracle_spectrum(
            P, h, fl, rect, model.epsilon, M=M)
        dt = time.time() - t0
        tag = f"h_{h:.6g}".replace(".", "_")
        rows = [[z.real, z.imag] for z in spec.eigenvalues]
        serialize.write_csv(os.path.join(out, f"spectrum_{tag}.csv"),
                            ["re", "im"], rows, meta=_meta(cfg))
        serialize.write_json(os.path.join(out, f"trust_{tag}.json"),
                             {"trust": trust.to_json_dict(),
                              "in_rectangle": len(kept)}, meta=_meta(cfg))
        print(f"oracle: h={h:.6g} dim={spec.window.dim} "
              f"margin={trust.margin:.3f} in-rect={len(kept)} "
              f"[{dt:.1f}s assembly+solve]", file=sys.stderr)
    return 0


def cmd_compare(cfg, out):
    model = _model(cfg)
    bundle = pipeline.prepare(model, int(cfg["N"]))
    fl, rect = _floquet(cfg), _rect(cfg)
    M = cfg.get("window", {}).get("M")
    rows = []
    for h in _h_values(cfg):
        rep, trust = pipeline.compare_at(bundle, h, fl, rect, M=M)
        tag = f"h_{h:.6g}".replace(".", "_")
        serialize.write_json(os.path.join(out, f"match_{tag}.json"),
                             {"match": rep.to_json_dict()}, meta=_meta(cfg))
        serialize.write_csv(
            os.path.join(out, f"scatter_pred_{tag}.csv"), ["re", "im"],
            [[p[1].real, p[1].imag] for p in rep.pairs], meta=_meta(cfg))
        serialize.write_csv(
            os.path.join(out, f"scatter_oracle_{tag}.csv"), ["re", "im"],
            [[p[2].real, p[2].imag] for p in rep.pairs], meta=_meta(cfg))
        rows.append([h, bundle.N, rep.sup_error, rep.mean_error,
                     rep.n_pred, rep.n_oracle, rep.n_matched])
        print(f"compare: h={h:.6g} sup={rep.sup_error:.3e} "
              f"counts {rep.n_pred}/{rep.n_oracle} clean={rep.shrunk_clean}")
    serialize.write_csv(os.path.join(out, "compare_errors.csv"),
                        ["h", "N", "sup_error", "mean_error", "n_pred",
                         "n_oracle", "n_matched"], rows, meta=_meta(cfg))
    return 0


def cmd_converge(cfg, out, workers=1):
    if "h_list" not in cfg:
        raise ValidationError("converge needs h_list")
    if not isinstance(cfg["model"], str):
        raise ValidationError("converge requires a named model")
    fl, rect = _floquet(cfg), _rect(cfg)
    study = pipeline.convergence_study(
        cfg["model"], float(cfg["epsilon"]), int(cfg["N"]),
        cfg["h_list"], fl, rect, workers=workers)
    rows = [list(r) for r in study.rows()]
    serialize.write_csv(
        os.path.join(out, "convergence.csv"),
        ["h", "N", "sup_error", "mean_error", "n_pred", "n_oracle",
         "n_matched"], rows,
        meta={**_meta(cfg),
              "slope": "exact" if study.exact else f"{study.slope:.4f}"})
    print(f"converge: slope = "
          f"{'exact' if study.exact else round(study.slope, 3)} over "
          f"h in {study.h_list}")
    return 0


def cmd_barrier_top(cfg, out):
    sd = cfg.get("saddle")
    if not sd:
        raise ValidationError("barrier-top needs a saddle section")
    p3 = {tuple(e["key"]): complex(e["re"], e.get("im", 0.0))
          for e in sd["p3"]}
    saddle = barriertop.ResonantSaddle(
        lambdas=tuple(sd["lambdas"]), p3=p3, E0=sd.get("E0", 0.0),
        k_res=tuple(sd["k_res"]) if sd.get("k_res") else None)
    h = _h_values(cfg)[0]
    red = barriertop.rescale(saddle, float(cfg["epsilon"]), h)
    serialize.write_json(os.path.join(out, "reduced_problem.json"),
                         {"reduced": red.to_json_dict()}, meta=_meta(cfg))
    ref = cfg.get("action_chart_nf")
    if ref:
        with open(ref) as f:
            nf = birkhoff.NormalFormResult.from_json_dict(
                json.load(f)["normal_form"])
        fl, rect = _floquet(cfg), _rect(cfg)
        res = barriertop.resonance_lattice(red, nf, fl, rect)
        serialize.write_csv(
            os.path.join(out, "resonances.csv"),
            ["re_E", "im_E", "k1", "k2"],
            [[z.real, z.imag, k[0], k[1]] for k, z in res], meta=_meta(cfg))
        print(f"barrier-top: {len(res)} resonances, h_tilde={red.h_tilde}")
    else:
        print(f"barrier-top: reduced record written, h_tilde={red.h_tilde} "
              "(no action-chart normal form supplied)")
    return 0


def cmd_selftest(cfg, out):
    """Fast invariant sweep over the core modules."""
    from . import selftest
    return selftest.run(verbose=True)


COMMANDS = {
    "eiconal": cmd_eiconal,
    "bnf": cmd_bnf,
    "predict": cmd_predict,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "converge": cmd_converge,
    "barrier-top": cmd_barrier_top,
    "selftest": cmd_selftest,
}


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="torusspec",
        description="Eigenvalue prediction for weakly non-selfadjoint "
                    "operators with periodic flow on the 2-torus")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON scenario config")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--model", help="built-in model name (benchmark1)")
    ap.add_argument("--h", type=float)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--order", type=int, help="normal form order N")
    args = ap.parse_args(argv)

    try:
        if args.command == "selftest":
            return cmd_selftest({}, None)
        cfg = _load_config(args)
        out = cfg["out"]
        os.makedirs(out, exist_ok=True)
        if args.command == "converge":
            return cmd_converge(cfg, out, workers=args.workers)
        return COMMANDS[args.command](cfg, out)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
