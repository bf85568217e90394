"""
Command-line interface for grca.
"""

import dataclasses
import os
import sys
import time
import traceback
from typing import Callable, Dict, Optional

import click
import numpy as np

from grca.baselines import fcls_cube, ncls_cube, nm_cube
from grca.config import apply_overrides, config_to_dict, load_config
from grca.errors import FormatError
from grca.estimators import (
    detect,
    mmse_abundances,
    mmse_nonlin_energy,
    mmse_reconstruction,
    mmse_s,
    mmse_s2,
    nonlin_probability,
)
from grca.evaluation import evaluate
from grca.formats import (
    read_cube,
    read_endmembers,
    read_grid,
    read_int_grid,
    read_manifest,
    read_pgm,
    write_cube,
    write_endmembers,
    write_grid,
    write_int_grid,
    write_manifest,
    write_pgm,
    write_trace,
)
from grca.logger import Logger
from grca.mixing import build_interaction_basis
from grca.models import (
    AbundanceField,
    EndmemberSet,
    HyperCube,
    MetricReport,
    RunConfig,
    SignMode,
    UnmixMethod,
)
from grca.sampler import run_chain
from grca.synth import generate_scene
from grca.workers import worker_count

EXIT_ERROR = 1
EXIT_THRESHOLD = 3

CUBE = "cube"
ENDMEMBERS = "endmembers.csv"
CLASS_MAP = "class_map.txt"
NONLIN_MASK = "nonlin_mask.txt"
PHI_ENERGY_TRUE = "phi_energy_true.csv"
RECONSTRUCTION = "reconstruction"
PROB_MAP = "prob_map"
DECISION_MAP = "decision_map.pgm"
MANIFEST = "manifest.yaml"


def abundance_file(r: int, truth: bool = False) -> str:
    """CSV of material r (1-based)."""
    return f"abundance_true_{r}.csv" if truth else f"abundance_{r}.csv"


def _prob_map_stem(eta: float, default_eta: float) -> str:
    return PROB_MAP if eta == default_eta else f"{PROB_MAP}_eta{eta:g}"


def _write_abundances(directory: str, A: np.ndarray, truth: bool = False) -> None:
    for r in range(A.shape[0]):
        write_grid(os.path.join(directory, abundance_file(r + 1, truth)), A[r])


def _read_abundances(directory: str, n_endmembers: int, truth: bool = False) -> AbundanceField:
    layers = [
        read_grid(os.path.join(directory, abundance_file(r + 1, truth)))
        for r in range(n_endmembers)
    ]
    return AbundanceField(np.stack(layers))


def run_generate(cfg: RunConfig) -> str:
    """Generate the configured scene into paths.output."""
    started = time.perf_counter()
    out = cfg.paths.output
    Y, endmembers, truth = generate_scene(cfg.scene)

    write_cube(os.path.join(out, CUBE), Y)
    write_endmembers(os.path.join(out, ENDMEMBERS), endmembers)
    write_int_grid(os.path.join(out, CLASS_MAP), truth.class_map)
    write_int_grid(os.path.join(out, NONLIN_MASK), truth.nonlin_mask)
    _write_abundances(out, truth.A_true.values, truth=True)
    write_grid(os.path.join(out, PHI_ENERGY_TRUE), truth.phi_energy)
    write_manifest(
        os.path.join(out, MANIFEST),
        config_to_dict(cfg),
        cfg.scene.seed,
        time.perf_counter() - started,
        extra={"class_models": [m.value for m in truth.class_models]},
    )
    return out


def _sign_mode(method: UnmixMethod) -> SignMode:
    return SignMode.POSITIVE_ONLY if method is UnmixMethod.GRCA_PLUS else SignMode.UNCONSTRAINED


def _run_sampler(cfg: RunConfig, Y: HyperCube, endmembers: EndmemberSet, out: str) -> None:
    chain_cfg = dataclasses.replace(cfg.chain, sign_mode=_sign_mode(cfg.unmix.method))
    output = run_chain(Y, endmembers, chain_cfg)
    basis = build_interaction_basis(endmembers)

    _write_abundances(out, mmse_abundances(output).values)
    write_grid(os.path.join(out, "nonlin_energy.csv"), mmse_nonlin_energy(output, basis))
    write_grid(os.path.join(out, "s_map.csv"), mmse_s(output))
    write_grid(os.path.join(out, "s2_map.csv"), mmse_s2(output))
    write_cube(os.path.join(out, RECONSTRUCTION), HyperCube(mmse_reconstruction(output, basis)))
    write_trace(os.path.join(out, "alpha3_trace.txt"), output.alpha3_trace)
    write_trace(os.path.join(out, "loglik_trace.txt"), output.loglik_trace)

    etas = [cfg.unmix.eta] + [e for e in cfg.unmix.eta_sweep if e != cfg.unmix.eta]
    for eta in etas:
        prob_map = nonlin_probability(output, Y, endmembers, basis, eta)
        stem = os.path.join(out, _prob_map_stem(eta, cfg.unmix.eta))
        write_grid(f"{stem}.csv", prob_map)
        write_pgm(f"{stem}.pgm", prob_map)
        if eta == cfg.unmix.eta:
            result = detect(prob_map, cfg.unmix.a0, cfg.unmix.a1, eta)
            write_pgm(os.path.join(out, DECISION_MAP), result.decision_map)
            Logger.info(f"eta={eta:g}: {int(result.decision_map.sum())} pixels flagged nonlinear")


def _run_baseline(cfg: RunConfig, Y: HyperCube, endmembers: EndmemberSet, out: str) -> None:
    threads = worker_count()
    method = cfg.unmix.method
    if method is UnmixMethod.NM:
        abundances, fitted = nm_cube(Y, endmembers, threads)
        A = abundances.values
    else:
        solvers: Dict[UnmixMethod, Callable] = {UnmixMethod.NCLS: ncls_cube, UnmixMethod.FCLS: fcls_cube}
        A = solvers[method](Y, endmembers, threads).values
        fitted = np.einsum("lr,rij->lij", endmembers.M, A)
    _write_abundances(out, A)
    write_cube(os.path.join(out, RECONSTRUCTION), HyperCube(fitted))


def run_unmix(cfg: RunConfig) -> str:
    """Unmix the scene in paths.truth into paths.output."""
    started = time.perf_counter()
    out = cfg.paths.output
    Y = read_cube(os.path.join(cfg.paths.truth, CUBE))
    endmembers = read_endmembers(os.path.join(cfg.paths.truth, ENDMEMBERS))
    Logger.info(f"Unmixing {Y.n_row}x{Y.n_col} cube with {cfg.unmix.method.value}")

    if cfg.unmix.method.uses_sampler:
        _run_sampler(cfg, Y, endmembers, out)
    else:
        _run_baseline(cfg, Y, endmembers, out)
    write_manifest(
        os.path.join(out, MANIFEST),
        config_to_dict(cfg),
        cfg.chain.seed,
        time.perf_counter() - started,
        extra={"method": cfg.unmix.method.value},
    )
    return out


def _class_names(truth_dir: str) -> Dict[int, str]:
    path = os.path.join(truth_dir, MANIFEST)
    if not os.path.exists(path):
        return {}
    models = read_manifest(path).get("class_models") or []
    return {label: name for label, name in enumerate(models)}


def run_evaluate(cfg: RunConfig) -> MetricReport:
    """Score the estimates in paths.estimates against the scene in paths.truth."""
    truth_dir, estimates_dir = cfg.paths.truth, cfg.paths.estimates
    endmembers = read_endmembers(os.path.join(truth_dir, ENDMEMBERS))
    R = endmembers.n_endmembers
    class_names = _class_names(truth_dir)

    A_true = _read_abundances(truth_dir, R, truth=True)
    A_est = _read_abundances(estimates_dir, R)
    class_map = read_int_grid(os.path.join(truth_dir, CLASS_MAP))

    Y = Y_hat = None
    reconstruction = os.path.join(estimates_dir, RECONSTRUCTION)
    if os.path.exists(f"{reconstruction}.hdr"):
        Y = read_cube(os.path.join(truth_dir, CUBE))
        Y_hat = read_cube(reconstruction)

    decision_map = nonlin_mask = None
    decision_path = os.path.join(estimates_dir, DECISION_MAP)
    if os.path.exists(decision_path):
        decision_map = read_pgm(decision_path) > 0.5
        nonlin_mask = read_int_grid(os.path.join(truth_dir, NONLIN_MASK)).astype(bool)

    report = evaluate(
        A_true,
        A_est,
        class_map=class_map,
        Y=Y,
        Y_hat=Y_hat,
        decision_map=decision_map,
        nonlin_mask=nonlin_mask,
        n_classes=len(class_names) or None,
    )
    flat = report.as_flat_dict(class_names)
    out = cfg.paths.output
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "metrics.txt"), "w", encoding="utf-8") as f:
        for key, value in flat.items():
            f.write(f"{key} = {value:.17g}\n")
    with open(os.path.join(out, "metrics.csv"), "w", encoding="utf-8") as f:
        f.write("metric,value\n")
        for key, value in flat.items():
            f.write(f"{key},{value:.17g}\n")
    return report


def threshold_violations(cfg: RunConfig, report: MetricReport):
    """Human-readable list of failed acceptance checks."""
    limits = cfg.evaluate
    checks = [
        ("rnmse_global", report.rnmse_global, limits.rnmse_max, "max"),
        ("re_global", report.re_global, limits.re_max, "max"),
        ("p_fa", report.p_fa, limits.p_fa_max, "max"),
        ("p_d", report.p_d, limits.p_d_min, "min"),
    ]
    violations = []
    for name, value, limit, kind in checks:
        if limit is None:
            continue
        if value is None:
            violations.append(f"{name} is unavailable but has a {kind} threshold of {limit:g}")
        elif (kind == "max" and value > limit) or (kind == "min" and value < limit):
            violations.append(f"{name} = {value:.4g} violates {kind} {limit:g}")
    return violations


def run_detect(cfg: RunConfig) -> int:
    """Threshold the probability map of paths.estimates; returns the number of detections."""
    prob_map = read_grid(os.path.join(cfg.paths.estimates, f"{PROB_MAP}.csv"))
    if np.any(prob_map < 0) or np.any(prob_map > 1):
        raise FormatError("Probability map holds values outside [0, 1]")
    result = detect(prob_map, cfg.unmix.a0, cfg.unmix.a1, cfg.unmix.eta)
    write_pgm(os.path.join(cfg.paths.output, DECISION_MAP), result.decision_map)
    return int(result.decision_map.sum())


def _load(config: str, seed: Optional[int], out: Optional[str], log_level: str) -> RunConfig:
    Logger.set_level(log_level)
    return apply_overrides(load_config(config), seed=seed, out=out)


def _fail(e: Exception) -> None:
    click.echo(f"Error: {str(e)}", err=True)
    traceback.print_exc()
    sys.exit(EXIT_ERROR)


def run_options(f):
    """Options shared by every sub-command."""
    f = click.option("--log-level", default="INFO", show_default=True, help="Logging level")(f)
    f = click.option("--out", "-o", help="Output directory (overrides paths.output)")(f)
    f = click.option("--seed", type=int, help="Seed for both the scene and the chain")(f)
    f = click.option("--config", "-c", required=True, help="Path to config file")(f)
    return f


@click.group()
@click.version_option()
def cli():
    """grca: nonlinear hyperspectral unmixing with a gamma MRF prior."""
    pass


@cli.command()
@run_options
def generate(config: str, seed: Optional[int], out: Optional[str], log_level: str):
    """Generate a synthetic scene."""
    try:
        cfg = _load(config, seed, out, log_level)
        out_dir = run_generate(cfg)
        click.echo(f"Scene written to {out_dir}")
    except Exception as e:
        _fail(e)


@cli.command()
@run_options
def unmix(config: str, seed: Optional[int], out: Optional[str], log_level: str):
    """Unmix a cube with G-RCA+, G-RCA or a least-squares baseline."""
    try:
        cfg = _load(config, seed, out, log_level)
        out_dir = run_unmix(cfg)
        click.echo(f"Estimates written to {out_dir}")
    except Exception as e:
        _fail(e)


@cli.command(name="evaluate")
@run_options
def evaluate_cmd(config: str, seed: Optional[int], out: Optional[str], log_level: str):
    """Score estimates against the ground truth."""
    try:
        cfg = _load(config, seed, out, log_level)
        report = run_evaluate(cfg)
        violations = threshold_violations(cfg, report)
    except Exception as e:
        _fail(e)
        return

    for key, value in report.as_flat_dict().items():
        click.echo(f"{key} = {value:.6g}")
    if violations:
        for violation in violations:
            click.echo(f"Threshold violated: {violation}", err=True)
        sys.exit(EXIT_THRESHOLD)


@cli.command(name="detect")
@run_options
def detect_cmd(config: str, seed: Optional[int], out: Optional[str], log_level: str):
    """Re-threshold a probability map with the configured a0, a1."""
    try:
        cfg = _load(config, seed, out, log_level)
        n_detected = run_detect(cfg)
        click.echo(f"{n_detected} pixels flagged nonlinear; decision map in {cfg.paths.output}")
    except Exception as e:
        _fail(e)


def main():
    """Entry point for the CLI."""
    cli()
