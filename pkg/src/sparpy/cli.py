"""``sparpy`` command line: simulations, sweeps, theory checks, fit and predict.

Exit status is 0 on success, 1 on a configuration or input error (bad
config, missing file, wrong column count) and 2 on any other failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import bench
from .errors import ConfigError, DimensionMismatch, SparError
from .estimator import SparConfig, cross_validate
from .io import load_model, read_dataset, read_predictors, save_model

EXIT_OK, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2


def _grid(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc
    return [int(v) if v.is_integer() else v for v in vals]


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON or TOML experiment config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--out", help="output path (stdout when omitted)")
    sp.add_argument("--jobs", type=int, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparpy", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a simulation experiment to CSV")
    _common(sp)
    sp.add_argument("--timing", action="store_true", help="record wall-clock runtime_s")

    sp = sub.add_parser("sweep", help="vary one parameter over a grid")
    _common(sp)
    sp.add_argument("--parameter", required=True, choices=bench.SWEEP_PARAMETERS)
    sp.add_argument("--grid", required=True, type=_grid, help="comma separated values")
    sp.add_argument("--timing", action="store_true")

    sp = sub.add_parser("check-theorem1", help="random-sign vs oracle CW projection gap")
    _common(sp)
    for flag in ("n", "p", "m", "a"):
        sp.add_argument(f"--{flag}", type=int)
    sp.add_argument("--no-comparators", action="store_true")

    sp = sub.add_parser("check-lemmas", help="closed-form vs enumerated moments")
    _common(sp)
    sp.add_argument("--p-max", type=int, default=12)
    sp.add_argument("--m-max", type=int)
    sp.add_argument("--rows", action="store_true", help="include the full table")

    sp = sub.add_parser("spar-fit", help="fit SPAR on a CSV dataset and write model JSON")
    _common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--response", default="y")
    sp.add_argument("--rule", choices=("best", "1se"), default="best")
    sp.add_argument("--models", type=int, default=20)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--screen-factor", type=float, default=2.0)

    sp = sub.add_parser("predict", help="predict with a saved model")
    _common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--response", default="y")
    return ap


def _experiment(args) -> bench.ExperimentConfig:
    cfg = bench.ExperimentConfig.load(args.config) if args.config else bench.ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.reps is not None:
        if args.reps < 1:
            raise ConfigError("reps must be >= 1")
        cfg.reps = args.reps
    if args.out is not None:
        cfg.output = args.out
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        cfg.parallelism = args.jobs
    if getattr(args, "timing", False):
        cfg.timing = True
    return cfg


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=1, default=lambda o: o.item() if hasattr(o, "item") else str(o)) + "\n"


def _settings_file(args) -> dict:
    """Keyword overrides for the theory checks from an optional config file."""
    if not args.config:
        return {}
    path = Path(args.config)
    try:
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load {path}: {exc}") from exc


def _run(args) -> int:
    cmd = args.command
    if cmd == "simulate":
        cfg = _experiment(args)
        text = bench.rows_to_csv(bench.collect_rows(cfg))
        _write(text, cfg.output)
    elif cmd == "sweep":
        cfg = _experiment(args)
        out, cfg.output = cfg.output, None
        _write(bench.sweep(args.parameter, args.grid, cfg), out)
    elif cmd == "check-theorem1":
        kw = {"n": 50, "p": 500, "m": 20, "a": 25, "reps": 200, "seed": 0}
        file_kw = _settings_file(args)
        unknown = set(file_kw) - {*kw, "rho", "rho_snr", "n_test"}
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        kw.update(file_kw)
        kw.update({k: getattr(args, k) for k in ("n", "p", "m", "a", "reps", "seed")
                   if getattr(args, k) is not None})
        kw["comparators"] = not args.no_comparators
        rep = bench.check_theorem1(**kw)
        _write(_json(rep.to_dict()), args.out)
    elif cmd == "check-lemmas":
        rep = bench.check_lemma_moments(args.p_max, args.m_max)
        doc = rep.to_dict()
        if not args.rows:
            doc.pop("rows")
        _write(_json(doc), args.out)
    elif cmd == "spar-fit":
        data = read_dataset(args.data, response=args.response, with_truth=False)
        try:
            cfg = SparConfig(max_models=args.models, folds=args.folds, rule=args.rule,
                             screen_factor=args.screen_factor,
                             seed=args.seed if args.seed is not None else 0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        model = cross_validate(data, cfg)
        if args.out:
            save_model(model, args.out)
        else:
            sys.stdout.write(_json(model.to_dict()))
    elif cmd == "predict":
        model = load_model(args.model)
        X = read_predictors(args.data, model.p, response=args.response)
        y_hat = model.predict(X)
        _write("y_hat\n" + "".join(repr(float(v)) + "\n" for v in y_hat), args.out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return _run(args)
    except (ConfigError, DimensionMismatch, FileNotFoundError) as exc:
        print(f"sparpy: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SparError as exc:
        print(f"sparpy: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"sparpy: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
