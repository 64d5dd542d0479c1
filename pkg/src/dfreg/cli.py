"""Command-line surface: train, compare, analyze, gradcheck, export-plots.

Configuration precedence is file < flags. Exit codes: 0 success, 1
configuration or input error (including unknown flags), 2 numerical abort,
3 gradient-check failure. Every subcommand that produces artifacts writes
a config.json echo of its fully-resolved configuration next to them.
"""

import argparse
import json
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

from .density import EnergyConfig
from .errors import ConfigError, NumericError
from .gradsuite import THRESHOLD, run_suite
from .harness import (TrainConfig, analyze_checkpoint, run_comparison,
                      run_training)
from .model import PENALIZED_VARIANTS, VARIANTS
from .plots import export_plots

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_GRADCHECK = 3

_TRAIN_FIELDS = {f.name for f in dataclass_fields(TrainConfig)}
_ENERGY_FIELDS = {f.name for f in dataclass_fields(EnergyConfig)}


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so unknown flags and bad
    values map to exit code 1 rather than argparse's default 2."""

    def error(self, message):
        raise ConfigError(message)


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    if p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: invalid TOML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: config root must be a table/object")
    return data


def _add_train_flags(parser) -> None:
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument("--variant", choices=VARIANTS, help="model variant")
    parser.add_argument("--name", help="run directory name")
    parser.add_argument("--alpha", type=float, help="DFReg coefficient")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="L2 coefficient")
    parser.add_argument("--kinetic-coeff", dest="kinetic_coeff", type=float,
                        help="kinetic term coefficient")
    parser.add_argument("--bins", dest="num_bins", type=int,
                        help="histogram bin count")
    parser.add_argument("--range-lo", dest="range_lo", type=float,
                        help="histogram lower edge")
    parser.add_argument("--range-hi", dest="range_hi", type=float,
                        help="histogram upper edge")
    parser.add_argument("--binning", choices=("hard", "soft_triangular"),
                        help="training density mode")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--lr", type=float, help="peak learning rate")
    parser.add_argument("--lr-min", dest="lr_min", type=float,
                        help="final learning rate for cosine annealing")
    parser.add_argument("--optimizer", choices=("adam", "sgd_momentum"))
    parser.add_argument("--momentum", type=float,
                        help="sgd_momentum coefficient")
    parser.add_argument("--schedule",
                        choices=("constant", "cosine_annealing"))
    parser.add_argument("--smoothing", type=float, help="label smoothing")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--dataset", help="synth or mnist:<dir>")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--augment", action="store_const", const=True,
                        default=None, help="random horizontal flips")
    parser.add_argument("--train-limit", dest="train_limit", type=int,
                        help="cap training samples (0 = all)")
    parser.add_argument("--test-limit", dest="test_limit", type=int,
                        help="cap test samples (0 = all)")
    parser.add_argument("--synth-train", dest="synth_train", type=int,
                        help="synthetic training sample count")
    parser.add_argument("--synth-test", dest="synth_test", type=int,
                        help="synthetic test sample count")
    parser.add_argument("--synth-classes", dest="synth_classes", type=int,
                        help="synthetic class count")


_FLAG_FIELDS = ("variant", "name", "epochs", "batch_size", "lr", "lr_min",
                "optimizer", "momentum", "schedule", "smoothing", "seed",
                "dataset", "out_dir", "augment", "train_limit", "test_limit",
                "synth_train", "synth_test", "synth_classes")
_FLAG_ENERGY = ("alpha", "lam", "kinetic_coeff", "num_bins", "range_lo",
                "range_hi", "binning")


def _flag_overrides(args):
    plain = {k: getattr(args, k) for k in _FLAG_FIELDS
             if getattr(args, k, None) is not None}
    energy = {k: getattr(args, k) for k in _FLAG_ENERGY
              if getattr(args, k, None) is not None}
    return plain, energy


def _config_from_dict(base: dict, plain_over: dict, energy_over: dict) -> TrainConfig:
    cfg = dict(base)
    energy = dict(cfg.pop("energy", {}) or {})
    if "lambda" in energy:
        energy["lam"] = energy.pop("lambda")
    for key in cfg:
        if key not in _TRAIN_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
    for key in energy:
        if key not in _ENERGY_FIELDS:
            raise ConfigError(f"unknown energy config key {key!r}")
    cfg.update(plain_over)
    energy.update(energy_over)
    if "conv_channels" in cfg:
        cfg["conv_channels"] = tuple(cfg["conv_channels"])
    if energy:
        variant = cfg.get("variant", "plain")
        energy.setdefault(
            "alpha", 1e-3 if variant in PENALIZED_VARIANTS else 0.0)
        cfg["energy"] = EnergyConfig(**energy)
    return TrainConfig(**cfg)


def _build_train_config(args) -> TrainConfig:
    base = _load_config_file(args.config) if args.config else {}
    plain_over, energy_over = _flag_overrides(args)
    return _config_from_dict(base, plain_over, energy_over)


def cmd_train(args) -> int:
    config = _build_train_config(args)
    result = run_training(config)
    final = result.records[-1]
    print(f"run {config.name}: wrote {result.run_dir}")
    print(f"final epoch {final.epoch}: test_acc={final.test_acc:.4f} "
          f"test_loss={final.test_loss:.4f} entropy={final.entropy_global:.4f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    file_cfg = _load_config_file(args.config) if args.config else {}
    base = dict(file_cfg.get("base", {}))
    run_dicts = list(file_cfg.get("runs", []))
    if not isinstance(base, dict) or not all(isinstance(r, dict) for r in run_dicts):
        raise ConfigError("compare config needs a 'base' table and a 'runs' list")
    plain_over, energy_over = _flag_overrides(args)
    out_dir = plain_over.pop("out_dir", None) or "comparison"
    if args.variants:
        run_dicts = [{"variant": v} for v in args.variants.split(",") if v]
    if not run_dicts:
        raise ConfigError("no runs to compare: pass --variants or a config "
                          "file with a 'runs' list")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [None]
    configs = []
    for run in run_dicts:
        for seed in seeds:
            merged = dict(base)
            merged.update(run)
            overrides = dict(plain_over)
            overrides.pop("name", None)
            if seed is not None:
                overrides["seed"] = seed
            config = _config_from_dict(merged, overrides, dict(energy_over))
            configs.append(config)
    result = run_comparison(configs, out_dir)
    ok = sum(1 for o in result["outcomes"] if o["status"] == "ok")
    print(f"comparison: {ok}/{len(configs)} runs succeeded")
    print(f"wrote {result['comparison_csv']} and {result['summary_csv']}")
    for outcome in result["outcomes"]:
        if outcome["status"] != "ok":
            print(f"  failed {outcome['name']}: {outcome['error']}",
                  file=sys.stderr)
    return EXIT_OK if ok else EXIT_CONFIG


def cmd_analyze(args) -> int:
    checkpoint = Path(args.checkpoint)
    out_dir = Path(args.out) if args.out else checkpoint / "analysis"
    energy = EnergyConfig(alpha=0.0, num_bins=args.bins,
                          range_lo=args.range_lo, range_hi=args.range_hi,
                          binning="hard")
    layers = [s for s in args.layers.split(",") if s] if args.layers else None
    results = analyze_checkpoint(checkpoint, out_dir, energy, layers,
                                 args.radius, args.log_base)
    echo = {"checkpoint": str(checkpoint), "out": str(out_dir),
            "bins": args.bins, "range_lo": args.range_lo,
            "range_hi": args.range_hi, "layers": layers,
            "radius": args.radius, "log_base": args.log_base}
    (out_dir / "config.json").write_text(
        json.dumps(echo, indent=1, sort_keys=True) + "\n")
    print(f"analyzed {len(results)} layer group(s) into {out_dir}")
    for name in results:
        print(f"  {name}: entropy={results[name]['entropy']:.4f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    ops = [s for s in args.ops.split(",") if s] if args.ops else None
    results = run_suite(seed=args.seed, h=args.h, ops=ops, cases=args.cases)
    width = max(len(r.op) for r in results)
    print(f"{'op'.ljust(width)}  cases  max_rel_error  status")
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.op.ljust(width)}  {r.cases:5d}  {r.max_rel_error:13.3e}  {status}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = ["op,cases,max_rel_error,threshold,status"]
        for r in results:
            lines.append(f"{r.op},{r.cases},{r.max_rel_error!r},"
                         f"{r.threshold!r},{'ok' if r.passed else 'fail'}")
        (out_dir / "gradcheck.csv").write_text("\n".join(lines) + "\n")
        echo = {"seed": args.seed, "h": args.h, "cases": args.cases,
                "ops": ops or "all", "threshold": THRESHOLD}
        (out_dir / "config.json").write_text(
            json.dumps(echo, indent=1, sort_keys=True) + "\n")
    failing = [r.op for r in results if not r.passed]
    if failing:
        print(f"gradient check failed for: {', '.join(failing)}",
              file=sys.stderr)
        return EXIT_GRADCHECK
    return EXIT_OK


def cmd_export_plots(args) -> int:
    out_dir = Path(args.out) if args.out else Path(args.run) / "plots"
    written = export_plots(args.run, out_dir, args.spectrum_scale)
    echo = {"run": str(args.run), "out": str(out_dir),
            "spectrum_scale": args.spectrum_scale}
    (out_dir / "config.json").write_text(
        json.dumps(echo, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(written)} SVG file(s) to {out_dir}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="dfreg",
                     description="Density-functional weight regularization "
                                 "training and analysis toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p_train = sub.add_parser("train", help="train one variant")
    _add_train_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_compare = sub.add_parser("compare", help="train and compare variants")
    _add_train_flags(p_compare)
    p_compare.add_argument("--variants",
                           help="comma-separated variant list (overrides "
                                "the config file's runs)")
    p_compare.add_argument("--seeds",
                           help="comma-separated seeds; repeats every run")
    p_compare.set_defaults(func=cmd_compare)

    p_analyze = sub.add_parser("analyze",
                               help="histograms, entropy, and spectra of a "
                                    "checkpoint")
    p_analyze.add_argument("--checkpoint", required=True,
                           help="run directory containing model.json/model.bin")
    p_analyze.add_argument("--out", help="output directory "
                                         "(default <checkpoint>/analysis)")
    p_analyze.add_argument("--bins", type=int, default=80)
    p_analyze.add_argument("--range-lo", dest="range_lo", type=float,
                           default=-1.0)
    p_analyze.add_argument("--range-hi", dest="range_hi", type=float,
                           default=1.0)
    p_analyze.add_argument("--layers", help="comma-separated layer selectors")
    p_analyze.add_argument("--radius", type=float, default=1.0,
                           help="low-frequency ratio radius")
    p_analyze.add_argument("--log-base", dest="log_base",
                           choices=("e", "2", "10"), default="e",
                           help="entropy logarithm base")
    p_analyze.set_defaults(func=cmd_analyze)

    p_grad = sub.add_parser("gradcheck",
                            help="finite-difference gradient verification")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--h", type=float, default=1e-5,
                        help="finite-difference step")
    p_grad.add_argument("--cases", type=int, default=100,
                        help="random cases per op")
    p_grad.add_argument("--ops", help="comma-separated op subset")
    p_grad.add_argument("--out", help="write gradcheck.csv to this directory")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_plots = sub.add_parser("export-plots",
                             help="render SVG charts from run CSVs")
    p_plots.add_argument("--run", required=True,
                         help="run or comparison directory")
    p_plots.add_argument("--out", help="output directory "
                                       "(default <run>/plots)")
    p_plots.add_argument("--spectrum-scale", dest="spectrum_scale",
                         choices=("linear", "log", "both"), default="both",
                         help="heatmap magnitude scaling")
    p_plots.set_defaults(func=cmd_export_plots)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
