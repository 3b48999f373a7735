"""Command-line interface: distance computation, post-processing, sampling,
and the full replication pipeline.

Measures travel as JSON objects {"d": int, "atoms": [[...], ...],
"weights": [...]}; result tables as CSV with headers (c, k, frequency) and
(k, frequency).
"""

from __future__ import annotations

import json
import sys
import time

import click
import numpy as np

from .dpmm import ChainConfig, DpmmModel, run_chain
from .experiments import (
    DEFAULT_ALPHA,
    DEFAULT_BOX,
    ExperimentCase,
    apply_mtm_sweep,
    derive_seed,
    generate_case_data,
    replicate,
    write_results,
)
from .measures import BoxDomain, MixingMeasure
from .mtm import MtmConfig, mtm, omega_n
from .wasserstein import cost_matrix, wasserstein


@click.group()
def main():
    """Discrete mixing measures: distances, post-processing, and sampling."""


@main.command("wasserstein")
@click.option("--g", "g_path", required=True, type=click.Path(exists=True), help="First measure (JSON).")
@click.option("--h", "h_path", required=True, type=click.Path(exists=True), help="Second measure (JSON).")
@click.option("--r", default=2.0, show_default=True, help="Order of the distance (>= 1).")
@click.option("--plan", "plan_path", default=None, help="Write the optimal coupling as CSV (use '-' for stdout).")
def wasserstein_cmd(g_path, h_path, r, plan_path):
    """Exact r-th order Wasserstein distance between two measures."""
    g = MixingMeasure.load(g_path)
    h = MixingMeasure.load(h_path)
    result = wasserstein(g, h, r=r)
    click.echo(f"{result.distance:.12g}")
    if plan_path is not None:
        costs = cost_matrix(
            MixingMeasure(atoms=g.atoms, weights=g.weights),
            MixingMeasure(atoms=h.atoms, weights=h.weights),
            r,
        )
        lines = ["i,j,mass,cost"]
        q = result.plan.q
        for i in range(q.shape[0]):
            for j in range(q.shape[1]):
                if q[i, j] > 0:
                    lines.append(f"{i},{j},{float(q[i, j])!r},{float(costs[i, j])!r}")
        text = "\n".join(lines) + "\n"
        if plan_path == "-":
            sys.stdout.write(text)
        else:
            with open(plan_path, "w") as fh:
                fh.write(text)


def _parse_omega(value: str) -> float:
    if value.startswith("auto:"):
        return omega_n(int(value.split(":", 1)[1]))
    return float(value)


@main.command("mtm")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True), help="Input measure (JSON).")
@click.option("--omega", required=True, help="Merge radius: a real, or 'auto:n' for the built-in rate at sample size n.")
@click.option("--c", default=0.5, show_default=True, help="Truncation tuning constant.")
@click.option("--r", default=2.0, show_default=True, help="Cost order (>= 1).")
@click.option("--seed", default=42, show_default=True, help="Seed for the random merge stage.")
@click.option("--output", "output_path", default=None, help="Write the post-processed measure (JSON).")
@click.option("--diagnostics", "diag_path", default=None, help="Write stage diagnostics (JSON).")
def mtm_cmd(input_path, omega, c, r, seed, output_path, diag_path):
    """Merge-truncate-merge post-processing of a measure."""
    g = MixingMeasure.load(input_path)
    omega_value = _parse_omega(omega)
    cfg = MtmConfig(omega=omega_value, c=c, r=r, seed=seed)
    result = mtm(g, cfg)
    click.echo(f"k_tilde={result.k_tilde}")
    if output_path:
        result.g_tilde.save(output_path)
    if diag_path:
        diag = {
            "omega": omega_value,
            "c": c,
            "r": r,
            "seed": seed,
            "k_tilde": result.k_tilde,
            "stage1_merge_count": result.stage1_merge_count,
            "stage2_truncated_count": result.stage2_truncated_count,
            "stage2_demoted_count": result.stage2_demoted_count,
            "fallback_atom_kept": result.fallback_atom_kept,
            "merged_measure": result.merged_measure.to_json_dict(),
        }
        with open(diag_path, "w") as fh:
            json.dump(diag, fh, indent=2)


def _chain_options(fn):
    fn = click.option("--burn-in", default=2000, show_default=True)(fn)
    fn = click.option("--iters", default=18000, show_default=True)(fn)
    fn = click.option("--thin", default=10, show_default=True)(fn)
    fn = click.option("--alpha", default=DEFAULT_ALPHA, show_default=True)(fn)
    return fn


@main.command("simulate")
@click.option("--case", "case_name", type=click.Choice(["A", "B", "C", "D"], case_sensitive=False), default=None)
@click.option("--data", "data_path", type=click.Path(exists=True), default=None, help="CSV of observations, one row per point (used instead of --case data).")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "outdir", required=True, type=click.Path())
@_chain_options
def simulate_cmd(case_name, data_path, seed, outdir, burn_in, iters, thin, alpha):
    """Run the posterior chain and write one measure JSON per retained draw."""
    import os

    if case_name is None and data_path is None:
        raise click.UsageError("provide --case or --data")
    case = ExperimentCase.by_name(case_name) if case_name else None
    if data_path is not None:
        points = np.loadtxt(data_path, delimiter=",", ndmin=2)
        kernel = case.kernel() if case else None
        if kernel is None:
            from .measures import GaussianKernel

            kernel = GaussianKernel.isotropic(0.05, points.shape[1])
        box = DEFAULT_BOX if points.shape[1] == 2 else BoxDomain(
            lower=np.full(points.shape[1], -6.0), upper=np.full(points.shape[1], 6.0)
        )
    else:
        points = generate_case_data(case, derive_seed(seed, 0)).points
        kernel = case.kernel()
        box = DEFAULT_BOX
    model = DpmmModel(alpha=alpha, base=box, kernel=kernel, data=points)
    cfg = ChainConfig(burn_in=burn_in, iterations=iters, thin=thin, seed=seed)
    start = time.perf_counter()
    draws = run_chain(model, cfg)
    elapsed = time.perf_counter() - start
    os.makedirs(outdir, exist_ok=True)
    for idx, draw in enumerate(draws):
        draw.save(os.path.join(outdir, f"draw_{idx:05d}.json"))
    manifest = {
        "case": case_name,
        "data": data_path,
        "n": int(points.shape[0]),
        "d": int(points.shape[1]),
        "alpha": alpha,
        "box": {"lower": box.lower.tolist(), "upper": box.upper.tolist()},
        "chain": {"burn_in": burn_in, "iterations": iters, "thin": thin, "scheme": list(cfg.scheme)},
        "seed": seed,
        "draws": len(draws),
        "wall_time_seconds": elapsed,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {len(draws)} draws to {outdir} in {elapsed:.1f}s")


@main.command("replicate")
@click.option("--case", "case_name", type=click.Choice(["A", "B", "C", "D"], case_sensitive=False), required=True)
@click.option("--c", "c_list", default="0.45,0.5,0.55,1.0", show_default=True, help="Comma-separated tuning constants.")
@click.option("--seed", default=7, show_default=True)
@click.option("--r", default=2.0, show_default=True)
@click.option("--out", "outdir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="JSON file overriding chain and sweep defaults.")
@click.option("--save-draws", is_flag=True, default=False, help="Also persist the retained draws.")
@_chain_options
def replicate_cmd(case_name, c_list, seed, r, outdir, config_path, save_draws, burn_in, iters, thin, alpha):
    """Full pipeline for one case: data, chain, post-processing c-sweep."""
    settings = {
        "burn_in": burn_in,
        "iterations": iters,
        "thin": thin,
        "seed": seed,
        "alpha": alpha,
        "r": r,
        "scheme": (5, 1, 1, 5),
        "c_values": [float(v) for v in c_list.split(",")],
    }
    if config_path:
        with open(config_path) as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(settings)
        if unknown:
            raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
        settings.update(overrides)
    case = ExperimentCase.by_name(case_name)
    cfg = ChainConfig(
        burn_in=int(settings["burn_in"]),
        iterations=int(settings["iterations"]),
        thin=int(settings["thin"]),
        scheme=tuple(settings["scheme"]),
        seed=int(settings["seed"]),
    )
    start = time.perf_counter()
    data = generate_case_data(case, derive_seed(cfg.seed, 0))
    model = DpmmModel(alpha=float(settings["alpha"]), base=DEFAULT_BOX, kernel=case.kernel(), data=data.points)
    draws = run_chain(model, cfg)
    table = apply_mtm_sweep(draws, omega_n(case.n), settings["c_values"], float(settings["r"]), cfg.seed)
    elapsed = time.perf_counter() - start
    manifest = {
        "case": case.name,
        "n": case.n,
        "omega": omega_n(case.n),
        "settings": {k: (list(v) if isinstance(v, tuple) else v) for k, v in settings.items()},
        "wall_time_seconds": elapsed,
        "draws": len(draws),
    }
    write_results(outdir, table, manifest, draws=draws if save_draws else None)
    for c in settings["c_values"]:
        click.echo(f"c={c}: mode k={table.mode(float(c))}")
    click.echo(f"raw mode k={table.raw_mode()}; results in {outdir}")


if __name__ == "__main__":
    main()
