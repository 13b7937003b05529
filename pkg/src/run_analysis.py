#!/usr/bin/env python
# coding: utf-8

import argparse
import logging
import math
import sys

import pandas as pd
from colorama import Fore, Style, init

from src.exceptions import ConvergenceError, DataError, ParameterError
from src.models.ellipse_theory import (BivariateGaussianParams, ExternalPoint, delta_theta_from_slopes,
                                       delta_theta_theory, quantile_ellipse, support_region_contains, tangent_slopes)
from src.models.generators import GenConfig, damping, gen_pair, make_rng
from src.simulation import (FAMILIES, ExperimentSpec, NuisanceRanges, dataset_increments, draw_nuisance,
                            mimic_bootstrap, run_comparison, run_grid, summarize, write_results_csv)
from src.utils.config import SCALE_PRESETS, RunConfig
from src.utils.data_loader import load_paired_trees, save_paired_trees
from src.utils.metrics import pearson_flat, per_generation_pearson, pooled_pearson, td_delta_theta_increments
from src.visualisation.plot_data import batch_plot_frame, ellipse_plot_frame, pearson_plot_frame, write_plot_csv

# Initialize colorama for colored console output
init(autoreset=True)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

SETTING_ALIASES = {"same": "same_params", "diff": "diff_params"}

logger = logging.getLogger("treecorr")


def print_header():
    """Print header for the tree-correlation tool."""
    header = f"""
{Fore.CYAN}============================================================
{Fore.CYAN}||            TREE-SHAPED DATA CORRELATION TOOLKIT        ||
{Fore.CYAN}============================================================{Style.RESET_ALL}
    """
    print(header)


def print_section(title):
    """Print a section title."""
    print(f"\n{Fore.YELLOW}=== {title} ==={Style.RESET_ALL}\n")


def print_success(message):
    """Print a success message."""
    print(f"{Fore.GREEN}✓ {message}{Style.RESET_ALL}")


def print_info(message):
    """Print an information message."""
    print(f"{Fore.BLUE}ℹ {message}{Style.RESET_ALL}")


def print_error(message):
    """Print an error message."""
    print(f"{Fore.RED}✗ {message}{Style.RESET_ALL}", file=sys.stderr)


def configure_logging(verbosity):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")


def _run_config(args):
    flags = {name: getattr(args, name, None) for name in ("alpha", "tau", "sigma2", "epsilon", "seed", "threads",
                                                          "scale")}
    return RunConfig.from_sources(flags)


def _degrees(rad):
    return f"{math.degrees(rad):.2f}°"


def cmd_theory(args):
    """Closed-form ellipse quantities for one external point."""
    bg = BivariateGaussianParams(args.mu1, args.mu2, args.sigma1, args.sigma2, args.rho)
    ellipse = quantile_ellipse(bg, args.alpha)
    p = ExternalPoint(args.x0, args.y0)
    print_section("Quantile Ellipse")
    print(f"c2 = {ellipse.c2:.6f}")
    print(f"D = {ellipse.density_height:.6g}")

    k1, k2 = tangent_slopes(ellipse, p)
    print_section("Tangent Lines")
    print(f"k1 = {k1:.6f}")
    print(f"k2 = {k2:.6f}")
    from_slopes = delta_theta_from_slopes(k1, k2)
    print(f"delta_theta (slopes) = {from_slopes:.9f} rad ({_degrees(from_slopes)})")

    inside = support_region_contains(bg, args.alpha, p)
    print(f"positive-slope region = {'yes' if inside else 'no'}")
    if inside:
        closed = delta_theta_theory(bg, args.alpha, p)
        print(f"delta_theta (closed form) = {closed:.9f} rad ({_degrees(closed)})")
    else:
        print_info("Point outside the positive-slope region; closed form not applicable")

    if args.plot_out:
        write_plot_csv(ellipse_plot_frame(ellipse, p), args.plot_out)
        print_success(f"Plot data written to {args.plot_out}")
    return EXIT_OK


def _gen_config(args, rho, nuisance, seed):
    return GenConfig(
        branching=args.branching, depth=args.depth, obs_per_node=args.obs_per_node,
        mu_x=nuisance.mu_x if args.mu_x is None else args.mu_x,
        mu_y=nuisance.mu_y if args.mu_y is None else args.mu_y,
        sigma1_sq=nuisance.sigma1_sq if args.sigma1_sq is None else args.sigma1_sq,
        sigma2_sq=nuisance.sigma2_sq if args.sigma2_sq is None else args.sigma2_sq,
        rho=rho, damping=args.damping, marginal=nuisance.marginal, seed=seed)


def cmd_generate(args):
    """Write one or two synthetic paired tree files sharing nuisance parameters."""
    if args.eta is not None and not args.out2:
        raise ParameterError("--eta needs --out2 for the second pair")
    run = _run_config(args)
    nuisance = draw_nuisance(make_rng(run.seed, 0), NuisanceRanges(), args.family)
    targets = [(args.out, args.rho, 1)]
    if args.eta is not None:
        targets.append((args.out2, args.rho + args.eta, 2))

    print_section("Generating Paired Trees")
    for path, rho, stream in targets:
        config = _gen_config(args, rho, nuisance, run.seed)
        data = gen_pair(config, make_rng(run.seed, stream))
        comments = [f"rho={rho:g} damping={args.damping} family={config.marginal.label} seed={run.seed}"]
        save_paired_trees(data, path, comments)
        print_success(f"{len(data.topology)} nodes (rho={rho:g}) written to {path}")
    return EXIT_OK


def _normalization(args, run):
    overrides = dict(normalize=not args.no_normalize, sign_flip=args.sign_flip)
    if run.epsilon == "exact":
        if args.rho is None:
            raise ParameterError("--epsilon exact needs --rho")
        overrides.update(damping=damping(args.damping, args.depth), rho=args.rho)
    return run.normalization(**overrides)


def cmd_angle(args):
    """Angle estimate of one paired tree file."""
    run = _run_config(args)
    cfg = _normalization(args, run)
    data = load_paired_trees(args.file)
    estimate = td_delta_theta_increments(dataset_increments(data, args.increments), cfg)

    print_section(f"Angle of {args.file}")
    print(f"delta_theta = {_degrees(estimate.delta_theta)}")
    print(f"candidates = {len(estimate.candidate_widths)}")
    print(f"m = {estimate.m}")
    print(f"n = {estimate.n}")
    if args.out:
        frame = pd.DataFrame([{"file": args.file, "delta_theta_rad": estimate.delta_theta,
                               "delta_theta_deg": estimate.degrees, "candidates": len(estimate.candidate_widths),
                               "m": estimate.m, "n": estimate.n}])
        write_plot_csv(frame, args.out)
        print_success(f"Angle written to {args.out}")
    return EXIT_OK


def cmd_simulate(args):
    """Monte-Carlo comparison of one cell or the full (rho, eta) grid."""
    run = _run_config(args)
    reps = args.reps if args.reps is not None else run.reps
    batches = args.batches if args.batches is not None else run.batches
    template = ExperimentSpec(
        rho=args.rho, eta=args.eta, family=args.family, damping=args.damping,
        setting=SETTING_ALIASES.get(args.setting, args.setting), normalize=args.normalize,
        reps=reps, batches=batches, depth=args.depth, branching=args.branching, seed=run.seed,
        alpha=run.alpha, tau=run.tau, sigma2=run.sigma2, epsilon=run.epsilon)

    print_section("Simulation")
    print_info(f"{reps} replicates x {batches} batches on {run.worker_threads} thread(s)")
    if args.grid:
        results = run_grid(template, threads=run.worker_threads)
    else:
        results = [run_comparison(template, threads=run.worker_threads)]

    table = summarize(results)
    if args.out:
        write_results_csv(table, args.out)
        print_success(f"{len(table)} result row(s) written to {args.out}")
    else:
        print(table.drop(columns=["mean", "sd"]).to_string(index=False))
    if args.plot_out:
        write_plot_csv(batch_plot_frame(results), args.plot_out)
        print_success(f"Batch proportions written to {args.plot_out}")
    return EXIT_OK


def _print_report(label, report):
    print(f"{label}: " + ", ".join(f"g{gen}={r:.3f}" for gen, r in report.rows))
    for gen, why in report.omitted:
        print_info(f"{label} generation {gen} omitted ({why})")


def cmd_analyze(args):
    """Compare two paired tree files: per-generation Pearson, angles, Pearson and mimic proportions."""
    run = _run_config(args)
    cfg = _normalization(args, run)
    data_a, data_b = load_paired_trees(args.file_a), load_paired_trees(args.file_b)
    inc_a = dataset_increments(data_a, args.increments)
    inc_b = dataset_increments(data_b, args.increments)

    print_section("Per-generation Pearson")
    report_a, report_b = per_generation_pearson(inc_a), per_generation_pearson(inc_b)
    _print_report("A", report_a)
    _print_report("B", report_b)

    print_section("Angle and Pearson")
    angle_a = td_delta_theta_increments(inc_a, cfg).delta_theta
    angle_b = td_delta_theta_increments(inc_b, cfg).delta_theta
    r_a, r_b = pooled_pearson(inc_a), pooled_pearson(inc_b)
    flat_a, flat_b = pearson_flat(data_a), pearson_flat(data_b)
    print(f"delta_theta:    A = {_degrees(angle_a)} {'<' if angle_a < angle_b else '>='} B = {_degrees(angle_b)}")
    print(f"pearson pooled: A = {r_a:.3f} {'<' if r_a < r_b else '>='} B = {r_b:.3f}")
    print(f"pearson flat:   A = {flat_a:.3f} {'<' if flat_a < flat_b else '>='} B = {flat_b:.3f}")

    if args.mimic_reps:
        print_section("Mimic Bootstrap")
        result = mimic_bootstrap(data_a, data_b, reps=args.mimic_reps, batches=args.mimic_batches, seed=run.seed,
                                 cfg=cfg, increments=args.increments, threads=run.worker_threads)
        print(f"P(delta_theta A > B)  = {result.delta_theta.mean:.2%} ({result.delta_theta.sd:.3f})")
        print(f"P(pearson flat A < B) = {result.pearson.mean:.2%} ({result.pearson.sd:.3f})")
        if result.delta_theta.failures or result.pearson.failures:
            print_info(f"failed replicates: angle {result.delta_theta.failures}, pearson {result.pearson.failures}")

    if args.plot_out:
        write_plot_csv(pearson_plot_frame({"A": report_a, "B": report_b}), args.plot_out)
        print_success(f"Plot data written to {args.plot_out}")
    return EXIT_OK


def _add_run_options(parser, normalization=True):
    parser.add_argument("--alpha", type=float, help="Tail probability (default 0.05)")
    parser.add_argument("--seed", type=int, help="Base seed (default 0)")
    parser.add_argument("--threads", type=int, help="Worker threads (default: all cores)")
    if normalization:
        parser.add_argument("--tau", type=float, help="Mean-schedule sensitivity (default 0.1)")
        parser.add_argument("--sigma2", type=float, help="Normalized variance (default 1)")
        parser.add_argument("--epsilon", choices=["harmonic", "exact"], help="Mean schedule (default harmonic)")


def _add_tree_options(parser):
    parser.add_argument("--damping", "--f", dest="damping", choices=["exp", "linear"], default="exp")
    parser.add_argument("--depth", type=int, default=7)
    parser.add_argument("--branching", type=int, default=2)


def _add_estimate_options(parser):
    parser.add_argument("--no-normalize", action="store_true", help="Skip per-generation normalization")
    parser.add_argument("--sign-flip", action="store_true", help="Negate x increments when correlation is negative")
    parser.add_argument("--increments", choices=["raw", "diff"], default="diff")
    parser.add_argument("--rho", type=float, help="Correlation for the exact epsilon schedule")
    _add_tree_options(parser)


def build_parser():
    parser = argparse.ArgumentParser(prog="treecorr", description="Geometric correlation of paired tree-shaped data")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="Quantile-ellipse geometry for one external point")
    for name in ("mu1", "mu2", "sigma1", "sigma2", "rho", "x0", "y0"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--plot-out", help="CSV with ellipse boundary and tangent lines")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("generate", help="Write synthetic paired tree files")
    p.add_argument("--out", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--eta", type=float, help="Also write the rho + eta pair to --out2")
    p.add_argument("--out2")
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--obs-per-node", type=int, default=1)
    for name in ("mu-x", "mu-y", "sigma1-sq", "sigma2-sq"):
        p.add_argument(f"--{name}", type=float, help="Override the drawn value")
    p.add_argument("--seed", type=int)
    _add_tree_options(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("angle", help="Angle estimate of one paired tree file")
    p.add_argument("file")
    p.add_argument("--out", help="CSV with the angle in radians and degrees")
    _add_run_options(p)
    _add_estimate_options(p)
    p.set_defaults(func=cmd_angle)

    p = sub.add_parser("simulate", help="Monte-Carlo comparison of two correlations")
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--setting", choices=["same", "diff", "same_params", "diff_params"], default="same")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--reps", type=int, help="Replicates per batch (default from --scale)")
    p.add_argument("--batches", type=int, help="Batches (default from --scale)")
    p.add_argument("--scale", choices=sorted(SCALE_PRESETS))
    p.add_argument("--grid", action="store_true", help="Sweep every rho, eta with rho + eta < 1")
    p.add_argument("--out", help="Result CSV")
    p.add_argument("--plot-out", help="CSV with one row per batch proportion")
    _add_run_options(p)
    _add_tree_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="Compare two paired tree files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--mimic-reps", type=int, default=0)
    p.add_argument("--mimic-batches", type=int, default=1)
    p.add_argument("--plot-out", help="CSV with per-generation Pearson correlations")
    _add_run_options(p)
    _add_estimate_options(p)
    p.set_defaults(func=cmd_analyze, increments="raw")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    print_header()
    logger.debug("Arguments: %s", vars(args))
    try:
        return args.func(args)
    except ParameterError as exc:
        print_error(str(exc))
        return EXIT_USAGE
    except (DataError, ConvergenceError, OSError) as exc:
        print_error(str(exc))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
