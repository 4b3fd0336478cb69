"""``kllime`` command line: explain, power-curve, render, demo.

Exit codes: 0 success, 1 error, 2 target power not attained (the artifact is
still written).
"""
import argparse
import logging
import sys

from . import explanation as ex
from .adapter import AdapterError
from .divergence import UndefinedPowerError
from .io import load_instance
from .perturb import REPRESENTATIONS

log = logging.getLogger("kllime")

EXIT_OK, EXIT_ERROR, EXIT_NOT_ATTAINED = 0, 1, 2


def _shape(text):
    rows, _, cols = text.lower().partition("x")
    return int(rows), int(cols)


def _run_flags(p, need_model=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-perturbations", type=int, default=1000)
    p.add_argument("--num-posterior-samples", type=int, default=100,
                   help="L for built-in models (adapters declare their own)")
    p.add_argument("--beta-a", type=float, default=1.0)
    p.add_argument("--beta-b", type=float, default=1.0)
    p.add_argument("--rho-fixed", type=float, default=None)
    p.add_argument("--num-lambdas", type=int, default=50)
    p.add_argument("--lambda-min-ratio", type=float, default=1e-3)
    p.add_argument("--target-power", type=float, default=0.8)
    p.add_argument("--background", type=float, default=0.0)
    p.add_argument("--representation", choices=REPRESENTATIONS, default=REPRESENTATIONS[0])
    p.add_argument("--shape", type=_shape, default=None, help="ROWSxCOLS for CSV instances")
    p.add_argument("--jobs", type=int, default=1, help="threads for per-sample projections")
    if need_model:
        p.add_argument("--model", required=False,
                       help="builtin:<file> | adapter-cmd:<argv> | adapter-tcp:<host:port>")


def build_parser():
    ap = argparse.ArgumentParser(prog="kllime", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="explain one instance, write a JSON artifact")
    p.add_argument("instance", help="instance file (.csv single row or .pgm P2)")
    _run_flags(p)
    p.add_argument("--full", action="store_true", help="store per-sample coefficient maps")
    p.add_argument("--out", required=True)

    p = sub.add_parser("power-curve", help="TSV of lambda, mean complexity, relative power")
    p.add_argument("instance", nargs="?", help="instance file for a fresh run")
    p.add_argument("--artifact", help="read the curve from an existing artifact")
    _run_flags(p)
    p.add_argument("--out", help="TSV path (default stdout)")

    p = sub.add_parser("render", help="render a coefficient map as a P2 PGM")
    p.add_argument("artifact")
    p.add_argument("--what", default="mean", help="mean | variance | sample:<l>")
    p.add_argument("--at", default="selected", help="selected | lambda-index:<k>")
    p.add_argument("--out", required=True)

    p = sub.add_parser("demo", help="synthetic 8x8 digit demo with renders")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-perturbations", type=int, default=1000)
    p.add_argument("--num-posterior-samples", type=int, default=50)
    p.add_argument("--num-lambdas", type=int, default=50)
    p.add_argument("--target-power", type=float, default=0.8)
    p.add_argument("--out", required=True)
    return ap


def _options(args):
    return ex.ExplainOptions(
        seed=args.seed, num_perturbations=args.num_perturbations,
        num_posterior_samples=args.num_posterior_samples, beta_a=args.beta_a, beta_b=args.beta_b,
        rho_fixed=args.rho_fixed, num_lambdas=args.num_lambdas,
        lambda_min_ratio=args.lambda_min_ratio, target_power=args.target_power,
        representation=args.representation, full=getattr(args, "full", False), n_jobs=args.jobs)


def _fresh_artifact(args):
    if not args.model:
        raise ValueError("--model is required")
    opts = _options(args)
    instance = load_instance(args.instance, args.background, args.shape)
    source = ex.open_source(args.model, opts)
    try:
        return ex.explain(instance, source, opts)
    finally:
        source.close()


def _status(art):
    c = art["curve"]
    k = c["selected_index"]
    msg = (f"selected lambda index {k}: power {c['relative_power'][k]:.6g}, "
           f"mean complexity {c['mean_complexity'][k]:.6g}")
    if not c["attained"]:
        log.warning("target power %g not attained; %s", c["target_power"], msg)
        return EXIT_NOT_ATTAINED
    log.info(msg)
    return EXIT_OK


def cmd_explain(args):
    art = _fresh_artifact(args)
    ex.save(art, args.out)
    return _status(art)


def cmd_power_curve(args):
    if args.artifact:
        art, code = ex.load(args.artifact), EXIT_OK
    elif args.instance:
        art = _fresh_artifact(args)
        code = _status(art)
    else:
        raise ValueError("give an instance file or --artifact")
    text = ex.curve_tsv(art)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def cmd_render(args):
    data = ex.render(ex.load(args.artifact), args.what, args.at)
    with open(args.out, "wb") as fh:
        fh.write(data)
    return EXIT_OK


def cmd_demo(args):
    from .demo import run_demo
    summary = run_demo(args.out, seed=args.seed, num_posterior_samples=args.num_posterior_samples,
                       num_perturbations=args.num_perturbations, num_lambdas=args.num_lambdas,
                       target_power=args.target_power)
    code = EXIT_OK
    for name, case in summary["cases"].items():
        if case is None:
            log.warning("no %s test instance at seed %d", name, args.seed)
            continue
        log.info("%s: label %s predicted %s, power %.4g at complexity %.4g (densest power %.4g)",
                 name, case["label"], case["predicted"], case["selected_power"],
                 case["selected_complexity"], case["densest_power"])
        if not case["attained"]:
            code = EXIT_NOT_ATTAINED
    return code


COMMANDS = {"explain": cmd_explain, "power-curve": cmd_power_curve,
            "render": cmd_render, "demo": cmd_demo}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="kllime: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UndefinedPowerError as exc:
        log.error("explanatory power undefined: %s", exc)
    except (AdapterError, ValueError, IndexError, OSError) as exc:
        log.error("%s", exc)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
