"""File formats: delimited data, chain storage, JSON configs, reports.

Everything is plain UTF-8.  Floats are written with shortest round-trip
formatting so that re-reading a file reproduces the in-memory values
bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .model import Dataset, ParamVector
from .priors import PriorSpec, ar1_correlation
from .sampler import Chain, MCMCConfig
from .simulate import Scenario

__all__ = [
    "read_dataset_csv",
    "write_dataset_csv",
    "write_chain",
    "read_chain",
    "read_mcmc_json",
    "read_prior_json",
    "read_scenario_json",
    "write_summary",
    "write_baseline_curves",
    "write_marginal_curves",
    "write_influence",
    "write_convergence",
    "write_replication_report",
    "write_manifest",
]


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_dataset_csv(data, path):
    """Write a dataset with header ``u, delta, n_count, x1_*, x2_*``."""
    path = Path(path)
    header = (
        ["u", "delta", "n_count"]
        + [f"x1_{j}" for j in range(1, data.p + 1)]
        + [f"x2_{j}" for j in range(1, data.q + 1)]
    )
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.n):
            row = [_fmt(data.u[i]), _fmt(data.delta[i]), _fmt(data.n_count[i])]
            row += [_fmt(v) for v in data.x1[i]]
            row += [_fmt(v) for v in data.x2[i]]
            w.writerow(row)


def read_dataset_csv(path, grid=None):
    """Read a dataset; the grid defaults to the sorted distinct times."""
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:3] != ["u", "delta", "n_count"]:
            raise ValueError(
                f"{path}: header must start with u, delta, n_count (got {header[:3]})"
            )
        p = sum(1 for h in header if h.startswith("x1_"))
        q = sum(1 for h in header if h.startswith("x2_"))
        expected = ["u", "delta", "n_count"]
        expected += [f"x1_{j}" for j in range(1, p + 1)]
        expected += [f"x2_{j}" for j in range(1, q + 1)]
        if header != expected:
            raise ValueError(f"{path}: unexpected column layout {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset.from_arrays(
        u=arr[:, 0],
        delta=arr[:, 1],
        n_count=arr[:, 2],
        x1=arr[:, 3:3 + p],
        x2=arr[:, 3 + p:3 + p + q],
        grid=grid,
    )


def write_chain(chain, path, meta_path=None):
    """Write draws as CSV plus a JSON sidecar with the run metadata."""
    path = Path(path)
    meta_path = path.with_suffix(".meta.json") if meta_path is None else Path(meta_path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(chain.labels)
        for row in chain.draws:
            w.writerow([_fmt(v) for v in row])
    meta = {
        "labels": chain.labels,
        "n_prime": chain.n_prime,
        "p": chain.p,
        "q": chain.q,
        "acceptance_rate": chain.acceptance_rate,
        "map_point": chain.map_point.flatten().tolist(),
        "config": dataclasses.asdict(chain.config),
        "warnings": list(chain.warnings),
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_chain(path, meta_path=None):
    """Rebuild a :class:`~statuscount.sampler.Chain` from disk."""
    path = Path(path)
    meta_path = path.with_suffix(".meta.json") if meta_path is None else Path(meta_path)
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValueError(f"{meta_path}: chain metadata sidecar not found") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{meta_path}: invalid JSON ({exc})") from None
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        draws = np.array([[float(v) for v in row] for row in reader if row])
    if header != meta["labels"]:
        raise ValueError(f"{path}: column labels do not match the sidecar")
    n_prime, p, q = int(meta["n_prime"]), int(meta["p"]), int(meta["q"])
    if draws.ndim != 2 or draws.shape[1] != 2 * n_prime + p + q + 1:
        raise ValueError(f"{path}: draw matrix shape does not match the sidecar")
    return Chain(
        draws=draws,
        labels=list(meta["labels"]),
        acceptance_rate=float(meta["acceptance_rate"]),
        map_point=ParamVector.from_flat(np.asarray(meta["map_point"]), n_prime, p, q),
        proposal_cov_final=np.empty((0, 0)),
        config=MCMCConfig(**meta["config"]),
        n_prime=n_prime,
        p=p,
        q=q,
        warnings=list(meta.get("warnings", [])),
    )


def _load_json(path, what):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValueError(f"{path}: {what} file not found") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None


def read_mcmc_json(path, base=None):
    """Sampler settings; fields present in the file override ``base``."""
    raw = _load_json(path, "sampler config")
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: sampler config must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(MCMCConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"{path}: unknown sampler fields {sorted(unknown)}")
    merged = dataclasses.asdict(base) if base is not None else {}
    merged.update(raw)
    try:
        return MCMCConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def read_scenario_json(path):
    raw = _load_json(path, "scenario")
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: scenario must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(Scenario)}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"{path}: unknown scenario fields {sorted(unknown)}")
    try:
        return Scenario(**raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def _block_moments(raw, name, size, path):
    block = raw.get(name)
    if block is None:
        return np.zeros(size), np.full(size, 100.0)
    if not isinstance(block, dict):
        raise ValueError(f"{path}: prior block {name!r} must be a JSON object")
    mean = np.asarray(block.get("mean", 0.0), dtype=float)
    if mean.ndim == 0:
        mean = np.full(size, float(mean))
    if mean.shape != (size,):
        raise ValueError(f"{path}: prior block {name!r} mean must have length {size}")
    var = np.asarray(block.get("var", 100.0), dtype=float)
    if var.ndim == 0:
        var = np.full(size, float(var))
    if var.shape != (size,):
        raise ValueError(f"{path}: prior block {name!r} var must have length {size}")
    return mean, var


def read_prior_json(path, n_prime, p, q):
    """Prior settings sized against the dataset dimensions.

    The hazard-jump block accepts ``cov`` (full matrix), or ``rho`` (AR(1)
    correlation, optionally scaled by ``var``), or plain ``var``; other
    blocks take ``mean``/``var`` scalars or vectors.  Missing blocks get
    the diffuse default N(0, 100).
    """
    raw = _load_json(path, "prior")
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: prior must be a JSON object")
    known = {"phi_star", "nu", "beta1", "beta2", "psi_star"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown prior blocks {sorted(unknown)}")

    phi_mean, phi_var = _block_moments(raw, "phi_star", n_prime, path)
    b1_mean, b1_var = _block_moments(raw, "beta1", p, path)
    b2_mean, b2_var = _block_moments(raw, "beta2", q, path)
    psi_mean, psi_var = _block_moments(raw, "psi_star", 1, path)

    nu_block = raw.get("nu", {})
    if not isinstance(nu_block, dict):
        raise ValueError(f"{path}: prior block 'nu' must be a JSON object")
    nu_mean = np.asarray(nu_block.get("mean", 0.0), dtype=float)
    if nu_mean.ndim == 0:
        nu_mean = np.full(n_prime, float(nu_mean))
    if nu_mean.shape != (n_prime,):
        raise ValueError(f"{path}: prior block 'nu' mean must have length {n_prime}")
    if "cov" in nu_block:
        nu_cov = np.asarray(nu_block["cov"], dtype=float)
    else:
        var = np.asarray(nu_block.get("var", 100.0), dtype=float)
        if var.ndim == 0:
            var = np.full(n_prime, float(var))
        if var.shape != (n_prime,):
            raise ValueError(f"{path}: prior block 'nu' var must have length {n_prime}")
        if "rho" in nu_block:
            corr = ar1_correlation(n_prime, float(nu_block["rho"]))
            sd = np.sqrt(var)
            nu_cov = corr * np.outer(sd, sd)
        else:
            nu_cov = np.diag(var)

    try:
        return PriorSpec(
            phi_star_mean=phi_mean, phi_star_var=phi_var,
            nu_mean=nu_mean, nu_cov=nu_cov,
            beta1_mean=b1_mean, beta1_var=b1_var,
            beta2_mean=b2_mean, beta2_var=b2_var,
            psi_star_mean=float(psi_mean[0]), psi_star_var=float(psi_var[0]),
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_summary(summary, csv_path, txt_path):
    """Parameter table as CSV and as an aligned text report."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "mean", "psd", "lower", "upper"])
        for j, name in enumerate(summary.names):
            w.writerow([
                name, _fmt(summary.mean[j]), _fmt(summary.psd[j]),
                _fmt(summary.lower[j]), _fmt(summary.upper[j]),
            ])
    lines = []
    pct = f"{summary.level * 100:g}%"
    lines.append(f"posterior summary ({summary.s0} retained draws, "
                 f"acceptance rate {summary.acceptance_rate:.4f})")
    lines.append("")
    lines.append(f"{'parameter':<12} {'mean':>12} {'psd':>12} "
                 f"{'lower ' + pct:>14} {'upper ' + pct:>14}")
    for j, name in enumerate(summary.names):
        lines.append(
            f"{name:<12} {summary.mean[j]:>12.4f} {summary.psd[j]:>12.4f} "
            f"{summary.lower[j]:>14.4f} {summary.upper[j]:>14.4f}"
        )
    Path(txt_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_baseline_curves(summary, csv_path):
    """Plot data: estimated baseline functions over the grid."""
    base = summary.baseline
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cumulative_mean", "cumulative_hazard"])
        for t in base.grid:
            w.writerow([
                _fmt(t),
                _fmt(base.cumulative_mean(float(t))),
                _fmt(base.cumulative_hazard(float(t))),
            ])


def write_marginal_curves(mesh, mean_curve, surv_curve, csv_path):
    """Plot data: marginal count mean and survival over a time mesh."""
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "marginal_mean", "marginal_survival"])
        for t, mc, sc in zip(mesh, mean_curve, surv_curve):
            w.writerow([_fmt(t), _fmt(mc), _fmt(sc)])


def write_influence(report, data, csv_path, txt_path):
    """Per-observation influence table plus the comparison scalars."""
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "u", "delta", "n_count", "cpo", "kl", "flagged"])
        for i in range(data.n):
            w.writerow([
                i + 1, _fmt(data.u[i]), _fmt(data.delta[i]), _fmt(data.n_count[i]),
                _fmt(report.cpo_values[i]), _fmt(report.kl[i]),
                int(report.flagged[i]),
            ])
    lines = [
        f"dic        {report.dic:.4f}",
        f"p_d        {report.p_d:.4f}",
        f"dev_bar    {report.dev_bar:.4f}",
        f"dev_at_mean {report.dev_at_mean:.4f}",
        f"lpml       {report.lpml:.4f}",
        f"kl_flagged {int(report.flagged.sum())} of {data.n} "
        f"(threshold {report.threshold})",
    ]
    Path(txt_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_convergence(rows, acf_rows, csv_path, acf_path):
    """Per-parameter convergence table and long-format ACF plot data.

    ``rows`` maps parameter label to a dict with ``ess`` and optionally
    ``psrf``; ``acf_rows`` maps label to the autocorrelation array.
    """
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "ess", "psrf"])
        for label, vals in rows.items():
            psrf = vals.get("psrf")
            w.writerow([
                label, _fmt(vals["ess"]),
                "" if psrf is None else _fmt(psrf),
            ])
    with Path(acf_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "lag", "acf"])
        for label, acf in acf_rows.items():
            for lag, val in enumerate(acf):
                w.writerow([label, lag, _fmt(val)])


def write_replication_report(report, csv_path, txt_path, json_path):
    """Replication aggregates in three shapes: table, text, raw JSON."""
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "truth", "mean", "abs_bias", "esd", "sse", "cp"])
        for name, s in report.parameters.items():
            w.writerow([name, _fmt(s.truth), _fmt(s.mean), _fmt(s.abs_bias),
                        _fmt(s.esd), _fmt(s.sse), _fmt(s.cp)])
        w.writerow(["mean_mse_lambda10", _fmt(report.mean_mse_lambda10),
                    "", "", "", "", ""])
        w.writerow(["mean_mse_lambda20", _fmt(report.mean_mse_lambda20),
                    "", "", "", "", ""])

    sc = report.scenario
    lines = [
        f"replication study: {report.n_completed} of {report.n_requested} "
        f"replicates completed",
        f"scenario: beta11={sc.beta11} beta21={sc.beta21} psi={sc.psi} "
        f"n={sc.n} censoring={sc.censoring} frailty={sc.frailty} seed={sc.seed}",
        f"sampler: iterations={report.mcmc.iterations} burn_in={report.mcmc.burn_in} "
        f"thin={report.mcmc.thin} ",
        "",
        f"{'parameter':<10} {'truth':>8} {'mean':>9} {'abs.bias':>9} "
        f"{'esd':>8} {'sse':>8} {'cp':>6}",
    ]
    for name, s in report.parameters.items():
        lines.append(
            f"{name:<10} {s.truth:>8.3f} {s.mean:>9.4f} {s.abs_bias:>9.4f} "
            f"{s.esd:>8.4f} {s.sse:>8.4f} {s.cp:>6.2f}"
        )
    lines.append("")
    lines.append(f"mean MSE, baseline cumulative rate:   {report.mean_mse_lambda10:.4f}")
    lines.append(f"mean MSE, baseline cumulative hazard: {report.mean_mse_lambda20:.4f}")
    if report.failures:
        lines.append("")
        lines.append(f"failed replicates: {[i for i, _ in report.failures]}")
    Path(txt_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    payload = {
        "scenario": dataclasses.asdict(sc),
        "mcmc": dataclasses.asdict(report.mcmc),
        "n_requested": report.n_requested,
        "n_completed": report.n_completed,
        "parameters": {
            name: dataclasses.asdict(s) for name, s in report.parameters.items()
        },
        "mean_mse_lambda10": report.mean_mse_lambda10,
        "mean_mse_lambda20": report.mean_mse_lambda20,
        "eval_times": report.eval_times.tolist(),
        "mean_lambda10": report.mean_lambda10.tolist(),
        "mean_lambda20": report.mean_lambda20.tolist(),
        "failures": report.failures,
    }
    Path(json_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_manifest(out_dir, command, inputs, outputs, settings):
    """Reproduction record written next to every command's outputs."""
    from . import __version__

    payload = {
        "command": command,
        "package_version": __version__,
        "argv": sys.argv[1:],
        "inputs": inputs,
        "outputs": sorted(outputs),
        "settings": settings,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
