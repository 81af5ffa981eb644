"""Command-line entry point: ``mrfamp {sample,se,run,verify,texture,dobrushin}``.

Exit codes: 0 success, 1 invalid input, 2 numerical divergence, 3 the verify
thresholds were not met.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DivergenceError, MrfAmpError
from ..lattice import LatticeShape
from ..mrf import MrfParams, dobrushin_coefficients, sample_field
from . import experiments as ex
from .config import ExperimentConfig, MrfConfig, load_config
from .io import read_grid, write_csv, write_grid, write_json
from .rng import stream
from .svg import heatmap_panel, line_plot, write_svg

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_FAILED = 0, 1, 2, 3

TRIAL_HEADER = ["trial", "t", "mse", "tau2", "onsager_sum", "residual2"]
AGGREGATE_HEADER = ["t", "mean_mse", "std_mse", "se_prediction"]
SE_HEADER = ["t", "sigma2", "tau2", "converged"]
VERIFY_HEADER = ["t", "mean_mse", "std_mse", "se_prediction", "relative_deviation", "within_band"]
TEXTURE_HEADER = ["denoiser", "t", "mse"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrfamp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("sample", "sample an MRF field and write it as a grid file"),
        ("se", "run state evolution"),
        ("run", "run AMP over the configured trials"),
        ("verify", "compare empirical MSE with the state-evolution prediction"),
        ("texture", "reconstruct a binary image with each denoiser"),
        ("dobrushin", "Dobrushin interdependence coefficients of the MRF"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, required=name != "dobrushin", help="YAML experiment config")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes (never changes results)")
        if name == "texture":
            p.add_argument("--input", type=Path, default=None, help="input grid (overrides texture.input)")
        if name == "dobrushin":
            p.add_argument("--params", type=float, nargs=4, metavar=("P", "Q", "R", "S"), default=None)
    return parser


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config is not None else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError([f"--seed: must be >= 0, got {args.seed}"])
        cfg = cfg.with_seed(args.seed)
    if args.threads < 1:
        raise ConfigError([f"--threads: must be >= 1, got {args.threads}"])
    return cfg


def cmd_sample(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    shape = LatticeShape(cfg.lattice.dim, cfg.lattice.N)
    field = sample_field(MrfParams(*cfg.mrf.as_tuple()), shape, stream(cfg.master_seed, "field", 0))
    path = write_grid(out / "field.grid", field, params=cfg.mrf.as_tuple(), seed=cfg.master_seed,
                      config=cfg.to_dict())
    print(f"wrote {path} (fraction of ones {field.mean():.4f})")
    return EXIT_OK


def _se_rows(se):
    conv = se.converged_at
    return [[t, float(se.sigma2[t]), float(se.tau2[t]), conv is not None and t >= conv]
            for t in range(len(se))]


def cmd_se(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    se = ex.compute_se(cfg)
    write_csv(out / "se.csv", SE_HEADER, _se_rows(se), config=cfg.to_dict())
    print(f"state evolution: sigma2[-1] = {se.sigma2[-1]:.6g}, converged at {se.converged_at}")
    return EXIT_OK


def _trial_rows(results):
    rows = []
    for res in results:
        for r in res.records:
            rows.append([res.trial, r.t, r.mse, r.tau2, r.onsager_sum, r.residual2])
    return rows


def _aggregate_rows(results, se):
    losses = np.stack([r.mse for r in results])
    rows = []
    for t in range(losses.shape[1]):
        pred = float(se.delta * se.sigma2[t + 1]) if se is not None and t + 1 < len(se) else None
        std = float(np.std(losses[:, t], ddof=1)) if losses.shape[0] > 1 else 0.0
        rows.append([t, float(np.mean(losses[:, t])), std, pred])
    return rows


def _pad_results(results):
    """Trials that stopped early repeat their last MSE so every trial has the same length."""
    longest = max(r.mse.size for r in results)
    for r in results:
        if r.mse.size < longest:
            r.mse = np.concatenate([r.mse, np.full(longest - r.mse.size, r.mse[-1])])
    return results


def cmd_run(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    se = ex.compute_se(cfg) if cfg.amp.tau_source == "state_evolution" else None
    results = _pad_results(ex.run_trials(cfg, threads=threads, se=se))
    conf = cfg.to_dict()
    write_csv(out / "trials.csv", TRIAL_HEADER, _trial_rows(results), config=conf)
    write_csv(out / "aggregate.csv", AGGREGATE_HEADER, _aggregate_rows(results, se), config=conf)
    for res in results:
        write_grid(out / "fields" / f"trial_{res.trial:03d}_truth.grid", res.truth, cfg.mrf.as_tuple(),
                   cfg.master_seed, conf)
        write_grid(out / "fields" / f"trial_{res.trial:03d}_estimate.grid", res.estimate, cfg.mrf.as_tuple(),
                   cfg.master_seed, conf)
    final = np.mean([r.mse[-1] for r in results])
    print(f"{len(results)} trials, final mean MSE {final:.6g}")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    if cfg.amp.tau_source != "state_evolution" and cfg.denoiser.kind == "total_variation":
        raise ConfigError(["verify needs a denoiser with a state evolution"])
    se = ex.compute_se(cfg)
    results = _pad_results(ex.run_trials(cfg, threads=threads, se=se))
    report = ex.verify_report(cfg, results, se)
    conf = cfg.to_dict()
    rows = [[r["t"], r["mean"], r["std"], r["prediction"], r["relative_deviation"], r["within_band"]]
            for r in report["rows"]]
    write_csv(out / "verify.csv", VERIFY_HEADER, rows, config=conf)
    write_json(out / "verify.json", {"config": conf, **report})
    t = [r["t"] for r in report["rows"]]
    svg = line_plot({"AMP (trial mean)": (t, [r["mean"] for r in report["rows"]]),
                     "state evolution|dashed": (t, [r["prediction"] for r in report["rows"]])},
                    title=f"{cfg.name}: empirical MSE vs state evolution", config=conf)
    write_svg(out / "verify.svg", svg)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} t={c['t']:2d} relative deviation {c['relative_deviation']:+.4f} (tolerance {c['tolerance']})")
    print("verify:", "PASS" if report["passed"] else "FAIL")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_texture(cfg: ExperimentConfig, out: Path, threads: int = 1, input_path=None) -> int:
    path = input_path or cfg.texture.input
    if path is None:
        raise ConfigError(["texture.input: no input grid given (use --input or texture.input)"])
    try:
        grid = read_grid(path)
    except OSError as exc:
        raise ConfigError([f"texture input {path}: {exc.strerror}"]) from exc
    cfg = replace(cfg, texture=replace(cfg.texture, input=str(path)))
    res = ex.run_texture(cfg, grid.values)
    conf = cfg.to_dict()
    write_grid(out / "texture_truth.grid", res["truth"], cfg.mrf.as_tuple(), cfg.master_seed, conf)
    rows = []
    for kind, est in res["estimates"].items():
        write_grid(out / f"texture_{kind}.grid", est, cfg.mrf.as_tuple(), cfg.master_seed, conf)
        rows.extend([kind, t, float(m)] for t, m in enumerate(res["mse"][kind]))
    write_csv(out / "texture.csv", TEXTURE_HEADER, rows, config=conf)
    panel = {"ground truth": res["truth"], **{k: v for k, v in res["estimates"].items()}}
    write_svg(out / "texture.svg", heatmap_panel(panel, title=cfg.name, config=conf))
    for kind in res["estimates"]:
        print(f"{kind}: final MSE {res['mse'][kind][-1]:.6g}")
    return EXIT_OK


def cmd_dobrushin(cfg: ExperimentConfig, out: Path, threads: int = 1, params=None) -> int:
    if params is not None:
        cfg = replace(cfg, mrf=MrfConfig(*params))
        problems = [f"--params: {n} must lie in (0, 1)" for n, v in zip("pqrs", params) if not 0 < v < 1]
        if problems:
            raise ConfigError(problems)
    res = dobrushin_coefficients(MrfParams(*cfg.mrf.as_tuple()))
    write_json(out / "dobrushin.json", {
        "config": cfg.to_dict(), "params": list(cfg.mrf.as_tuple()), "c": res.c, "c_star": res.c_star,
        "coefficients": res.coefficients, "satisfied": res.satisfied,
    })
    print(f"c = {res.c:.6f}, c* = {res.c_star:.6f}: {'PASS' if res.satisfied else 'FAIL'} (needs both < 1)")
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "se": cmd_se, "run": cmd_run, "verify": cmd_verify,
            "texture": cmd_texture, "dobrushin": cmd_dobrushin}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        extra = {}
        if args.command == "texture":
            extra["input_path"] = args.input
        if args.command == "dobrushin":
            extra["params"] = args.params
        return COMMANDS[args.command](cfg, args.out, threads=args.threads, **extra)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (MrfAmpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
