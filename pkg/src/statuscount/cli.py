"""Command-line interface: simulate, fit, diagnose, replicate.

Exit codes: 0 on success, 2 for invalid inputs or configuration, 3 when a
numeric computation fails.  Every command writes a ``manifest.json`` into
the output directory recording the resolved settings, input paths, and
produced files, so a run can be reproduced from its outputs alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    read_chain,
    read_dataset_csv,
    read_mcmc_json,
    read_prior_json,
    read_scenario_json,
    write_baseline_curves,
    write_chain,
    write_convergence,
    write_dataset_csv,
    write_influence,
    write_manifest,
    write_marginal_curves,
    write_replication_report,
    write_summary,
)
from .diagnostics import compute_influence, ess_and_acf, gelman_rubin
from .estimation import bayes_estimates, summarize
from .model import NumericError, marginal_survival
from .priors import PriorSpec
from .sampler import MCMCConfig, run_fit
from .simulate import (
    DESK_MCMC,
    DESK_REPLICATES,
    PAPER_MCMC,
    PAPER_REPLICATES,
    replicate_study,
    simulate_dataset,
)

# fit-time paper-scale settings (longer warmup and heavier thinning than
# the replication studies use)
PAPER_FIT_MCMC = MCMCConfig(iterations=100_000, burn_in=20_000, thin=60)

_FOCUS_BLOCKS = ("beta1_", "beta2_", "psi_star")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    scenario = read_scenario_json(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    out = _out_dir(args)
    data = simulate_dataset(scenario)
    data_path = out / "data.csv"
    write_dataset_csv(data, data_path)
    write_manifest(
        out, "simulate",
        inputs={"scenario": str(args.scenario)},
        outputs=[data_path.name],
        settings={"scenario": dataclasses.asdict(scenario)},
    )
    print(f"wrote {data_path} ({data.n} observations, "
          f"{data.n_prime} grid points, {int(data.delta.sum())} events)")
    return 0


def cmd_fit(args):
    data = read_dataset_csv(args.data)
    if args.priors is not None:
        prior = read_prior_json(args.priors, data.n_prime, data.p, data.q)
    else:
        prior = PriorSpec.vague(data.n_prime, data.p, data.q)
    base = PAPER_FIT_MCMC if args.paper_scale else DESK_MCMC
    config = read_mcmc_json(args.mcmc, base=base) if args.mcmc else base
    if args.seed is not None:
        config = config.with_seed(args.seed)

    out = _out_dir(args)
    chain = run_fit(data, prior, config)
    summary = summarize(chain, data.grid, level=args.level)

    chain_path = out / "chain.csv"
    write_chain(chain, chain_path)
    write_summary(summary, out / "summary.csv", out / "summary.txt")
    write_baseline_curves(summary, out / "baseline.csv")

    est = bayes_estimates(chain)
    mesh = np.linspace(0.0, float(data.grid[-1]), 201)
    mean_curve = summary.baseline.cumulative_mean(mesh)
    surv_curve = marginal_survival(
        mesh, np.zeros(data.q), summary.baseline, est["beta2_hat"], est["psi_hat"]
    )
    write_marginal_curves(mesh, mean_curve, surv_curve, out / "marginal_curves.csv")
    from .plots import plot_marginals

    plot_marginals(mesh, mean_curve, surv_curve, out / "marginals.png")

    write_manifest(
        out, "fit",
        inputs={
            "data": str(args.data),
            "priors": str(args.priors) if args.priors else None,
            "mcmc": str(args.mcmc) if args.mcmc else None,
        },
        outputs=[
            "chain.csv", "chain.meta.json", "summary.csv", "summary.txt",
            "baseline.csv", "marginal_curves.csv", "marginals.png",
        ],
        settings={
            "mcmc": dataclasses.asdict(config),
            "level": args.level,
            "paper_scale": bool(args.paper_scale),
        },
    )
    psi_mean, psi_psd, _, _ = summary.row("psi")
    print(f"fit complete: {chain.s0} retained draws, "
          f"acceptance rate {chain.acceptance_rate:.4f}, "
          f"frailty variance {psi_mean:.4f} (psd {psi_psd:.4f})")
    print(f"outputs in {out}")
    return 0


def cmd_diagnose(args):
    data = read_dataset_csv(args.data)
    chains = [read_chain(path) for path in args.chain]
    primary = chains[0]
    if (primary.n_prime, primary.p, primary.q) != (data.n_prime, data.p, data.q):
        raise ValueError("chain and dataset dimensions do not match")

    out = _out_dir(args)
    report = compute_influence(primary, data)
    write_influence(report, data, out / "influence.csv", out / "diagnostics.txt")

    max_lag = min(args.max_lag, primary.s0 - 1)
    psrf = gelman_rubin(chains) if len(chains) > 1 else None
    rows = {}
    acf_rows = {}
    for j, label in enumerate(primary.labels):
        ess, acf = ess_and_acf(primary.draws[:, j], max_lag)
        rows[label] = {"ess": ess}
        if psrf is not None:
            rows[label]["psrf"] = float(psrf[j])
        acf_rows[label] = acf
    write_convergence(rows, acf_rows, out / "convergence.csv", out / "acf.csv")

    from .plots import plot_acf, plot_influence

    plot_influence(report.kl, report.threshold, out / "kl.png")
    focus = {
        lab: acf_rows[lab]
        for lab in primary.labels
        if any(lab.startswith(b) for b in _FOCUS_BLOCKS)
    }
    plot_acf(focus or acf_rows, out / "acf.png")

    write_manifest(
        out, "diagnose",
        inputs={"data": str(args.data), "chains": [str(c) for c in args.chain]},
        outputs=[
            "influence.csv", "diagnostics.txt", "convergence.csv", "acf.csv",
            "kl.png", "acf.png",
        ],
        settings={"max_lag": max_lag, "n_chains": len(chains)},
    )
    flagged = int(report.flagged.sum())
    psrf_note = ""
    if psrf is not None:
        psrf_note = f", max PSRF {float(np.max(psrf)):.4f}"
    print(f"dic {report.dic:.3f}, lpml {report.lpml:.3f}, "
          f"{flagged} influential observation(s){psrf_note}")
    print(f"outputs in {out}")
    return 0


def cmd_replicate(args):
    scenario = read_scenario_json(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    base = PAPER_MCMC if args.paper_scale else DESK_MCMC
    config = read_mcmc_json(args.mcmc, base=base) if args.mcmc else base
    replicates = args.replicates
    if replicates is None:
        replicates = PAPER_REPLICATES if args.paper_scale else DESK_REPLICATES

    out = _out_dir(args)
    report = replicate_study(
        scenario, replicates, mcmc=config, jobs=args.jobs,
        share_data_seed=args.share_data_seed,
    )
    write_replication_report(
        report, out / "report.csv", out / "report.txt", out / "report.json"
    )

    truth10 = report.scenario.true_mean_function(report.eval_times)
    truth20 = report.scenario.true_hazard_function(report.eval_times)
    import csv as _csv

    with (out / "baseline_recovery.csv").open("w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["t", "lambda10_truth", "lambda10_mean", "lambda20_truth",
                    "lambda20_mean"])
        for k in range(report.eval_times.size):
            w.writerow([
                repr(float(report.eval_times[k])), repr(float(truth10[k])),
                repr(float(report.mean_lambda10[k])), repr(float(truth20[k])),
                repr(float(report.mean_lambda20[k])),
            ])
    from .plots import plot_baseline_recovery

    plot_baseline_recovery(
        report.eval_times, truth10, report.mean_lambda10,
        truth20, report.mean_lambda20, out / "recovery.png",
    )

    write_manifest(
        out, "replicate",
        inputs={"scenario": str(args.scenario),
                "mcmc": str(args.mcmc) if args.mcmc else None},
        outputs=[
            "report.csv", "report.txt", "report.json",
            "baseline_recovery.csv", "recovery.png",
        ],
        settings={
            "scenario": dataclasses.asdict(scenario),
            "mcmc": dataclasses.asdict(config),
            "replicates": replicates,
            "jobs": args.jobs,
            "share_data_seed": bool(args.share_data_seed),
        },
    )
    print((out / "report.txt").read_text(encoding="utf-8"), end="")
    print(f"outputs in {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="statuscount",
        description="Joint modelling of single-inspection count and status data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate one synthetic dataset")
    ps.add_argument("--scenario", required=True, help="scenario JSON file")
    ps.add_argument("--out", required=True, help="output directory")
    ps.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fit", help="fit the joint model to a dataset")
    pf.add_argument("--data", required=True, help="dataset CSV file")
    pf.add_argument("--priors", default=None, help="prior JSON file (default: diffuse)")
    pf.add_argument("--mcmc", default=None, help="sampler JSON file (overrides defaults)")
    pf.add_argument("--out", required=True, help="output directory")
    pf.add_argument("--seed", type=int, default=None, help="override the sampler seed")
    pf.add_argument("--level", type=float, default=0.95,
                    help="credible interval level (default 0.95)")
    pf.add_argument("--paper-scale", action="store_true",
                    help="run the long-chain settings instead of the quick defaults")
    pf.set_defaults(func=cmd_fit)

    pd = sub.add_parser("diagnose", help="influence and convergence diagnostics")
    pd.add_argument("--data", required=True, help="dataset CSV file")
    pd.add_argument("--chain", action="append", required=True,
                    help="chain CSV (repeat for multi-chain PSRF)")
    pd.add_argument("--out", required=True, help="output directory")
    pd.add_argument("--max-lag", type=int, default=200,
                    help="largest autocorrelation lag (default 200)")
    pd.set_defaults(func=cmd_diagnose)

    pr = sub.add_parser("replicate", help="repeated simulate-and-fit study")
    pr.add_argument("--scenario", required=True, help="scenario JSON file")
    pr.add_argument("--mcmc", default=None, help="sampler JSON file (overrides defaults)")
    pr.add_argument("--out", required=True, help="output directory")
    pr.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    pr.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    pr.add_argument("--replicates", type=int, default=None,
                    help="number of replicates (default: scale preset)")
    pr.add_argument("--share-data-seed", action="store_true",
                    help="reuse one dataset seed so only sampler noise varies")
    pr.add_argument("--paper-scale", action="store_true",
                    help="full-size study instead of the quick defaults")
    pr.set_defaults(func=cmd_replicate)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NumericError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
