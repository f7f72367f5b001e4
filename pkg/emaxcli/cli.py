# file: emaxcli/cli.py
from __future__ import annotations
import argparse
import importlib
import logging
import os
import sys
from pathlib import Path
from typing import Any

import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError

from .core.firth import firth_solve
from .core.mle import mle_fit
from .core.model import d_optimal_design, d_optimal_x2
from .core.prob import power_function, shape_probabilities, sweep, x2_for_alpha
from .core.shape import classify, limiting_fit, reduce_frame
from .errors import EmaxError, InputError
from .models import *
from .output import AbstractOutputPipe, CsvTableOutput, JsonOutput
from .output.csv_table import table1_text
from .parsers import AbstractParser, DoseResponseCsvParser
from .processors import AbstractProcessor, guideline_run, run_table1
from .processors.guideline import observed_sigma
from .utils.manifest import build_manifest, load_manifest, manifest_path, write_manifest
from .utils.rng import SEED_ENV, default_seed

logger = logging.getLogger("emaxcli")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ESTIMATION = 3


def _import(name: str) -> Any:
    module_name, _, class_name = name.rpartition(".")
    module = importlib.import_module(module_name)
    return getattr(module, class_name)


# ──────────────────────────────────────────────────────────────────────────────
# YAML pipeline: parsers -> processors -> outputs
# ──────────────────────────────────────────────────────────────────────────────
def run_config(cfg: dict) -> list[BaseModel]:
    # 1. parsers (optional: simulation steps need none)
    frames = []
    for p_conf in cfg.get("parsers") or []:
        parser_cls: type[AbstractParser] = _import(p_conf["type"])
        parser = parser_cls(parser_cls.config_model(**p_conf.get("params", {})))
        frames.append(parser.load())
    observations = pd.concat(frames, ignore_index=True) if frames else None

    # 2. processors
    results: list[BaseModel] = []
    for pr_conf in cfg.get("processors") or []:
        proc_cls: type[AbstractProcessor] = _import(pr_conf["type"])
        processor = proc_cls(**pr_conf.get("params", {}))
        logger.info("running %s", pr_conf.get("name", proc_cls.__name__))
        results.append(processor.process(processor.build_input(observations)))

    # 3. outputs
    out_confs = cfg.get("output") or []
    for out_conf in [out_confs] if isinstance(out_confs, dict) else out_confs:
        out_cls: type[AbstractOutputPipe] = _import(out_conf["type"])
        out_pipe = out_cls(**out_conf.get("params", {}))
        dst = out_pipe.render(*results)
        print(f"✅  Report generated at {dst}")
    return results


def run(cfg_path: str | Path) -> list[BaseModel]:
    try:
        cfg = yaml.safe_load(Path(cfg_path).read_text())
    except FileNotFoundError:
        raise InputError(f"config file not found: {cfg_path}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{cfg_path}: expected a mapping at the top level")
    return run_config(cfg)


# ──────────────────────────────────────────────────────────────────────────────
# Helpers shared by the subcommands
# ──────────────────────────────────────────────────────────────────────────────
def _is_failure(result: BaseModel) -> bool:
    if isinstance(result, GuidelineReport):
        result = result.fit
    return isinstance(result, (NoMLE, FirthFailure))


def _scenario(args) -> Scenario:
    domain = DoseDomain(a=args.a, b=args.b)
    if args.x2 is not None:
        x2 = args.x2
    else:
        x2 = d_optimal_x2(domain, args.theta2_g if args.theta2_g is not None else args.theta2)
    return Scenario(
        truth=EmaxParams(theta0=args.theta0, theta1=args.theta1, theta2=args.theta2),
        design=ThreePointDesign(domain=domain, x2=x2),
        noise=NoiseModel(sigma=args.sigma),
        n_per_point=tuple(args.n),
    )


def _solver(args) -> SolverOpts:
    opts = dict(tol=args.tol, max_iter=args.max_iter, theta2_cap=args.theta2_cap)
    if args.starts:
        opts["starts"] = tuple(args.starts)
    return SolverOpts(**opts)


def _emit(args, *results: BaseModel) -> None:
    if getattr(args, "format", "json") == "text":
        text = "\n".join(str(r) for r in results)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        else:
            print(text)
    else:
        JsonOutput(args.out).render(*results)


def _observations(path: str) -> pd.DataFrame:
    return DoseResponseCsvParser(DoseResponseCsvConfig(path=path)).load()


# ──────────────────────────────────────────────────────────────────────────────
# Subcommands
# ──────────────────────────────────────────────────────────────────────────────
def cmd_classify(args) -> int:
    stats = DoseResponseCsvParser(DoseResponseCsvConfig(path=args.data)).stats()
    shape, st = classify(stats)
    limit = None if shape.case is ShapeCase.INCREASING_CONCAVE else limiting_fit(stats, shape)
    report = ShapeReport(stats=stats, shape=shape, shape_stats=st, limit=limit)
    _emit(args, report)
    if args.format == "json":
        # stdout stays machine-readable
        print(report, file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    frame = _observations(args.data)
    stats = reduce_frame(frame)
    sigma_hat = observed_sigma(frame)
    noise = NoiseModel(sigma=args.sigma) if args.sigma is not None else None
    guess = EmaxParams.from_array(args.guess) if args.guess else None

    if args.method == "mle":
        result = mle_fit(stats)
    elif args.method == "firth":
        if noise is None and sigma_hat is None:
            raise InputError("--method firth needs --sigma (no replicates to estimate it from)")
        noise = noise or NoiseModel(sigma=sigma_hat)
        result = firth_solve(stats, noise, init=guess, opts=_solver(args))
    else:
        cfg = GuidelineConfig(
            noise=noise, theta2_g=args.theta2_g, theta2_1=args.theta2_1,
            alpha=args.alpha, guess=guess, solver=_solver(args),
        )
        result = guideline_run(stats, cfg, sigma_hat)

    _emit(args, result)
    return EXIT_ESTIMATION if _is_failure(result) else EXIT_OK


def cmd_design(args) -> int:
    domain = DoseDomain(a=args.a, b=args.b)
    if args.mode == "dopt":
        report = DesignReport(mode="dopt", theta2=args.theta2, design=d_optimal_design(domain, args.theta2))
    else:
        if args.alpha is None:
            raise InputError("--mode alpha needs --alpha")
        base = Scenario(
            truth=EmaxParams(theta0=args.theta0, theta1=args.theta1, theta2=args.theta2),
            design=ThreePointDesign(domain=domain, x2=0.5 * (domain.a + domain.b)),
            noise=NoiseModel(sigma=args.sigma),
            n_per_point=tuple(args.n),
        )
        x2 = x2_for_alpha(args.theta2, args.alpha, base)
        report = DesignReport(
            mode="alpha", theta2=args.theta2, alpha=args.alpha,
            design=ThreePointDesign(domain=domain, x2=x2),
            power=power_function(args.theta2, x2, base),
        )
    _emit(args, report)
    return EXIT_OK


def cmd_prob(args) -> int:
    probs = shape_probabilities(
        _scenario(args), method=args.method, draws=args.draws, seed=args.seed, threads=args.threads
    )
    _emit(args, probs)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.config:
        run(args.config)
        return EXIT_OK
    cfg = SimConfig(
        scenario=_scenario(args),
        theta2_g_list=args.theta2_g_list,
        replicates=args.replicates,
        seed=args.seed,
        solver=_solver(args),
        theoretical=args.theory_method,
        threads=args.threads,
    )
    out = run_table1(cfg, threads=args.threads)
    dst = CsvTableOutput(args.out or "table1.csv").render(out)
    print(table1_text(out), end="")
    print(f"✅  Table written to {dst}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = SweepIn(
        scenario=_scenario(args),
        theta2_list=args.theta2_list,
        x2_grid=args.x2_grid,
        grid_points=args.grid_points,
        alpha_list=args.alpha_list or [],
        method=args.method,
        draws=args.draws,
        seed=args.seed,
    )
    dst = CsvTableOutput(args.out or "sweep.csv", text=False).render(sweep(cfg, threads=args.threads))
    print(f"✅  Sweep written to {dst}")
    return EXIT_OK


def cmd_run(args) -> int:
    results = run(args.config)
    return EXIT_ESTIMATION if any(_is_failure(r) for r in results) else EXIT_OK


def cmd_replay(args) -> int:
    m = load_manifest(args.manifest_file)
    if m.seed is not None:
        os.environ[SEED_ENV] = str(m.seed)
    logger.info("replaying %s from %s (recorded %s)", m.command, args.manifest_file, m.timestamp)
    return main(m.argv)


# ──────────────────────────────────────────────────────────────────────────────
# Argument parsing
# ──────────────────────────────────────────────────────────────────────────────
def _add_common(p: argparse.ArgumentParser, out_help: str = "output file (default: stdout)"):
    p.add_argument("--out", default=None, help=out_help)
    p.add_argument("--manifest", default=None, help="where to write the run manifest")
    p.add_argument("--threads", type=int, default=None,
                   help="parallel workers: processes for simulate, threads for Monte Carlo (default: all cores)")


def _add_scenario(p: argparse.ArgumentParser):
    g = p.add_argument_group("scenario")
    g.add_argument("--a", type=float, default=0.001, help="lowest dose")
    g.add_argument("--b", type=float, default=150.0, help="highest dose")
    g.add_argument("--theta0", type=float, default=2.0)
    g.add_argument("--theta1", type=float, default=0.467)
    g.add_argument("--theta2", type=float, default=50.0, help="true theta2")
    g.add_argument("--sigma", type=float, default=0.1)
    g.add_argument("--n", type=int, nargs=3, default=[6, 6, 6], metavar=("N1", "N2", "N3"))
    g.add_argument("--x2", type=float, default=None, help="central dose (default: D-optimal)")
    g.add_argument("--theta2-g", type=float, default=None,
                   help="guessed theta2 behind the D-optimal central dose (default: true theta2)")


def _add_solver(p: argparse.ArgumentParser):
    g = p.add_argument_group("Firth solver")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--max-iter", type=int, default=200)
    g.add_argument("--theta2-cap", type=float, default=None, help="default: 1e6 * (b - a)")
    g.add_argument("--starts", nargs="+", choices=["user", "interpolant", "grid"], default=None)


def _add_seed(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or built-in")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emaxcli", description="Emax dose-response estimation CLI")
    ap.add_argument("--log-level", default="WARNING",
                    choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="stderr logging level")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="shape of the three sample means")
    p.add_argument("--data", required=True, help="CSV with header dose,response")
    p.add_argument("--format", choices=["json", "text"], default="json")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fit", help="exact MLE, Firth estimate, or the full decision workflow")
    p.add_argument("--data", required=True, help="CSV with header dose,response")
    p.add_argument("--method", choices=["mle", "firth", "auto"], default="auto")
    p.add_argument("--sigma", type=float, default=None, help="known error SD (else pooled estimate)")
    p.add_argument("--guess", type=float, nargs=3, default=None, metavar=("T0", "T1", "T2"),
                   help="starting point / guessed parameters")
    p.add_argument("--theta2-g", type=float, default=None, help="guessed theta2 behind the design")
    p.add_argument("--theta2-1", type=float, default=None, help="smaller guess for the extra dose")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--format", choices=["json", "text"], default="json")
    _add_solver(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("design", help="D-optimal or alpha-calibrated three-point design")
    p.add_argument("--mode", choices=["dopt", "alpha"], default="dopt")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--format", choices=["json", "text"], default="json")
    _add_scenario(p)
    _add_common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("prob", help="probabilities of the shape classes")
    p.add_argument("--method", choices=["mc", "quad"], default="mc")
    p.add_argument("--draws", type=int, default=1_000_000)
    _add_seed(p)
    _add_scenario(p)
    _add_common(p)
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("simulate", help="simulation study table")
    p.add_argument("--config", default=None, help="YAML pipeline (overrides the flags)")
    p.add_argument("--theta2-g-list", type=float, nargs="+", default=[12.5, 25.0, 50.0, 75.0, 100.0])
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--theory-method", choices=["mc", "quad"], default="quad")
    _add_seed(p)
    _add_scenario(p)
    _add_solver(p)
    _add_common(p, out_help="CSV file (default: table1.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="probability curves against the central dose")
    p.add_argument("--theta2-list", type=float, nargs="+", default=[12.5, 25.0, 50.0, 75.0, 100.0])
    p.add_argument("--x2-grid", type=float, nargs="+", default=None)
    p.add_argument("--grid-points", type=int, default=64)
    p.add_argument("--alpha-list", type=float, nargs="+", default=None)
    p.add_argument("--method", choices=["mc", "quad"], default="quad")
    p.add_argument("--draws", type=int, default=100_000)
    _add_seed(p)
    _add_scenario(p)
    _add_common(p, out_help="CSV file (default: sweep.csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="run a YAML pipeline")
    p.add_argument("--config", default="config.yaml", help="YAML config file")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_replay)
    return ap


def _record(args, argv: list[str]) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    if getattr(args, "config", None):
        config["pipeline"] = yaml.safe_load(Path(args.config).read_text())
    seed = getattr(args, "seed", None)
    manifest = build_manifest(args.command, argv, config, seed if seed is not None else default_seed())
    write_manifest(manifest, manifest_path(args.manifest, args.out))


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level, stream=sys.stderr, force=True,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = default_seed()
        code = args.func(args)
        if args.command != "replay":
            _record(args, argv)
    except (EmaxError, ValidationError, yaml.YAMLError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return code


if __name__ == "__main__":
    raise SystemExit(main())
