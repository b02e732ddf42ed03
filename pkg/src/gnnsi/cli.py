"""Command-line surface: single-instance tests, Monte Carlo campaigns,
model generation, and noise calibration.

Exit codes: 0 success (including skipped tests), 1 runtime failure,
2 usage or input-file errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace

from .errors import GnnsiError, ParseError
from .experiments import (METHODS, robustness_campaigns, run_campaign,
                          search_config, tau_sweep, write_records_csv)
from .graphs import load_graph
from .inference import estimated_covariance, run_test
from .model_io import load_model, random_model, save_model
from .synthgen import (ExperimentConfig, calibrate_noise, kronecker_cov,
                       wasserstein_to_gaussian)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _campaign_flags(sub):
    sub.add_argument("--config", help="JSON campaign configuration file")
    sub.add_argument("--seed", type=int, help="override the config seed")
    sub.add_argument("--trials", type=int, help="override the trial count")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker processes for the trial pool")
    sub.add_argument("--out", help="write per-trial records as CSV")
    sub.add_argument("--json", action="store_true",
                     help="print the summary as JSON")
    sub.add_argument("--progress", action="store_true",
                     help="print a progress line every 50 trials")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnsi",
        description="Selective inference for GNN saliency subgraphs.")
    subs = parser.add_subparsers(dest="command", required=True)

    t = subs.add_parser("test", help="test one graph/model instance")
    t.add_argument("graph", help="graph JSON file (with features)")
    t.add_argument("model", help="weight JSON file")
    t.add_argument("--cov", default="independence",
                   choices=("independence", "correlation", "estimated"),
                   help="feature covariance used by the test")
    t.add_argument("--tau-l", type=float, default=0.3)
    t.add_argument("--tau-u", type=float, default=0.7)
    t.add_argument("--method", default="cam",
                   choices=("cam", "gradcam", "grad", "gradinput"))
    t.add_argument("--layer", type=int, default=None,
                   help="saliency layer for gradcam")
    t.add_argument("--raw", action="store_true",
                   help="threshold raw saliency instead of normalized")
    t.add_argument("--json", action="store_true")

    for name, help_text in (
            ("type1", "null-hypothesis rejection-rate campaign"),
            ("power", "alternative-hypothesis rejection-rate campaign"),
            ("robustness", "non-Gaussian noise campaign"),
            ("tau-sweep", "rejection rates over the threshold grid")):
        sub = subs.add_parser(name, help=help_text)
        _campaign_flags(sub)
        if name == "power":
            sub.add_argument("--delta", type=float,
                             help="override the signal strength")
        if name == "robustness":
            sub.add_argument("--families", default="skewnorm,student_t",
                             help="comma-separated noise family names")
            sub.add_argument("--targets", default="0.15",
                             help="comma-separated Wasserstein distances")

    g = subs.add_parser("gen-model", help="write a random weight file")
    g.add_argument("--arch", default="gcn", choices=("gcn", "gin"))
    g.add_argument("--d-in", type=int, default=5)
    g.add_argument("--hidden", default="10,10,10",
                   help="comma-separated layer widths")
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--gin-mlp-hidden", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    c = subs.add_parser("calibrate-noise",
                        help="shape parameter for a Wasserstein target")
    c.add_argument("--family", required=True,
                   choices=("skewnorm", "exponnorm", "gennorm_steep",
                            "gennorm_flat", "student_t"))
    c.add_argument("--target", type=float, required=True)
    c.add_argument("--json", action="store_true")
    return parser


def _load_config(args) -> ExperimentConfig:
    config = (ExperimentConfig.from_json(args.config)
              if args.config else ExperimentConfig())
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.trials is not None:
        config = replace(config, trials=args.trials)
    if getattr(args, "delta", None) is not None:
        config = replace(config, delta=args.delta)
    return config


def _progress_printer(enabled: bool):
    if not enabled:
        return None

    def show(done, total):
        if done % 50 == 0 or done == total:
            print(f"  {done}/{total} trials", file=sys.stderr, flush=True)
    return show


def _print_summary(label: str, result, as_json: bool) -> None:
    if as_json:
        print(json.dumps({"campaign": label, **result.summary(),
                          "config": asdict(result.config)}))
        return
    print(f"{label}: {result.n_tested}/{result.config.trials} tested, "
          f"skipped {result.n_skipped or 0}")
    for method in METHODS:
        rate = result.rates[method]
        se = result.standard_errors[method]
        print(f"  {method:10s} rejection rate {rate:.4f} (se {se:.4f})")
    print(f"  wall time {result.wall_seconds:.1f} s")


def cmd_test(args) -> int:
    g, x = load_graph(args.graph)
    model = load_model(args.model)
    if args.cov == "estimated":
        cov = estimated_covariance(x.values, g.n, model.d_in)
    else:
        cov = kronecker_cov(args.cov, g, model.d_in)
    config = search_config(ExperimentConfig(
        n=g.n, d=model.d_in, saliency_method=args.method,
        gradcam_layer=args.layer if args.layer is not None else 1,
        tau_l=args.tau_l, tau_u=args.tau_u))
    if args.raw:
        config = replace(config, normalize=False)
    result = run_test(model, g, x.values, cov, args.tau_l, args.tau_u, config)
    if args.json:
        doc = {"status": result.status,
               "predicted_class": result.predicted_class}
        if result.tested:
            doc.update({
                "T_obs": result.t_obs,
                "p_selective": result.p_selective,
                "p_naive": result.p_naive,
                "p_bonferroni": result.p_bonferroni,
                "p_wo_pp": result.p_wo_pp,
                "salient": sorted(result.selection.salient),
                "nonsalient": sorted(result.selection.nonsalient),
                "truncation": [list(iv) for iv in
                               result.truncation.intervals],
            })
        print(json.dumps(doc))
        return EXIT_OK
    if not result.tested:
        print(f"status: Skipped({result.status.split(':', 1)[1]})")
        return EXIT_OK
    print(f"status: tested (predicted class {result.predicted_class})")
    print(f"salient nodes:     {sorted(result.selection.salient)}")
    print(f"non-salient nodes: {sorted(result.selection.nonsalient)}")
    print(f"T_obs = {result.t_obs:.6f}")
    print("truncation set: " + " U ".join(
        f"[{lo:.6g}, {hi:.6g}]" for lo, hi in result.truncation.intervals))
    print(f"p_selective  = {result.p_selective:.6f}")
    print(f"p_naive      = {result.p_naive:.6f}")
    print(f"p_bonferroni = {result.p_bonferroni:.6f}")
    print(f"p_wo_pp      = {result.p_wo_pp:.6f}")
    return EXIT_OK


def cmd_type1(args) -> int:
    config = _load_config(args)
    result = run_campaign(config, args.threads,
                          _progress_printer(args.progress))
    if args.out:
        write_records_csv(args.out, result)
    _print_summary("type1", result, args.json)
    return EXIT_OK


def cmd_power(args) -> int:
    config = _load_config(args)
    if config.delta == 0.0:
        print("power campaign requires delta != 0", file=sys.stderr)
        return EXIT_USAGE
    result = run_campaign(config, args.threads,
                          _progress_printer(args.progress))
    if args.out:
        write_records_csv(args.out, result)
    _print_summary(f"power(delta={config.delta})", result, args.json)
    return EXIT_OK


def cmd_robustness(args) -> int:
    config = _load_config(args)
    kinds = [k for k in args.families.split(",") if k]
    targets = [float(t) for t in args.targets.split(",") if t]
    results = robustness_campaigns(config, kinds, targets, args.threads,
                                   _progress_printer(args.progress))
    rows_written = False
    for kind, target, family, result in results:
        label = f"robustness({kind}, W1={target})"
        if args.out:
            write_records_csv(args.out, result,
                              {"noise_kind": kind, "target_w1": target,
                               "shape_param": family.shape_param},
                              append=rows_written)
            rows_written = True
        _print_summary(label, result, args.json)
    return EXIT_OK


def cmd_tau_sweep(args) -> int:
    config = _load_config(args)
    results = tau_sweep(config, args.threads,
                        progress=_progress_printer(args.progress))
    rows_written = False
    for tau_l, tau_u, result in results:
        if args.out:
            write_records_csv(args.out, result,
                              {"tau_l": tau_l, "tau_u": tau_u},
                              append=rows_written)
            rows_written = True
        _print_summary(f"tau=({tau_l}, {tau_u})", result, args.json)
    return EXIT_OK


def cmd_gen_model(args) -> int:
    hidden = [int(h) for h in args.hidden.split(",") if h]
    spec = random_model(args.arch, args.d_in, hidden,
                        n_classes=args.classes, seed=args.seed,
                        gin_mlp_hidden=args.gin_mlp_hidden)
    save_model(spec, args.out)
    print(f"wrote {args.arch} model to {args.out}")
    return EXIT_OK


def cmd_calibrate_noise(args) -> int:
    family = calibrate_noise(args.family, args.target)
    achieved = wasserstein_to_gaussian(family)
    if args.json:
        print(json.dumps({"family": family.kind,
                          "shape_param": family.shape_param,
                          "achieved_w1": achieved}))
    else:
        print(f"{family.kind}: shape = {family.shape_param:.8g} "
              f"(W1 = {achieved:.6f})")
    return EXIT_OK


_COMMANDS = {
    "test": cmd_test,
    "type1": cmd_type1,
    "power": cmd_power,
    "robustness": cmd_robustness,
    "tau-sweep": cmd_tau_sweep,
    "gen-model": cmd_gen_model,
    "calibrate-noise": cmd_calibrate_noise,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GnnsiError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
