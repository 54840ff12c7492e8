"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 validation error (bad config, corpus
or model file), 4 no feasible configuration.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import channel
from .config_space import (
    DEFAULT_SNRS_DB,
    POLICY_KEYS,
    SPACE_KEYS,
    ArchPolicy,
    ConfigError,
    Configuration,
    ParameterSpace,
    read_key_values,
    space_and_policy_from_mapping,
)
from .dataset import DatasetError, OfflineDataset, format_records, load, save, train_test_split
from .engine import (
    ExactFlops,
    ForestAccuracy,
    ForestFlops,
    GAParams,
    NoFeasibleConfigurationError,
    StackFactory,
    optimize,
)
from .flops import device_flops
from .forest import ForestModel, ForestParams, fit, r2_score
from .oracle import OracleAccuracy, SyntheticOracle, brute_force_optimize, generate_corpus
from .sweep import SweepContext, SweepSpec, build_report, layers_flops_table, run_sweep, sweep_csv

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_INFEASIBLE = 0, 2, 3, 4

GA_KEYS = {"population": int, "generations": int, "tournament": int, "cxpb": float,
           "mutpb": float, "restarts": int, "seed": int, "init": str}
ORACLE_KEYS = {"a_min": float, "a_max": float, "snr_scale": float, "depth_gain": float,
               "capacity_scale": float, "noise_sd": float, "oracle_seed": int}
FOREST_KEYS = {"n_trees": int, "max_depth": int, "min_samples_leaf": int, "max_features": int}


class UsageError(Exception):
    pass


@dataclass
class Settings:
    space: ParameterSpace
    policy: ArchPolicy
    ga: GAParams
    oracle: SyntheticOracle
    forest: ForestParams

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "policy": self.policy.to_dict(),
                "ga": asdict(self.ga), "oracle": self.oracle.to_dict(),
                "forest": asdict(self.forest)}


def _resolve(args: argparse.Namespace) -> Settings:
    """Defaults, overridden by ``--config`` values, overridden by explicit flags."""
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = read_key_values(args.config)
        known = set(SPACE_KEYS) | set(POLICY_KEYS) | set(GA_KEYS) | set(ORACLE_KEYS) | set(FOREST_KEYS)
        unknown = set(file_values) - known
        if unknown:
            raise ConfigError(f"unknown keys in {args.config}: {sorted(unknown)}")
    space, policy = space_and_policy_from_mapping(file_values)

    def pick(key: str, conv, flag: str | None = None):
        value = getattr(args, flag or key, None)
        if value is not None:
            return value
        if key in file_values:
            try:
                return conv(file_values[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        return None

    def collect(keys: dict, rename: dict | None = None) -> dict:
        out = {}
        for key, conv in keys.items():
            value = pick(key, conv)
            if value is not None:
                out[(rename or {}).get(key, key)] = value
        return out

    try:
        ga = GAParams(**collect(GA_KEYS))
        oracle = SyntheticOracle(**collect(ORACLE_KEYS, {"oracle_seed": "seed"}))
        forest_kw = collect(FOREST_KEYS)
        forest_kw.setdefault("seed", ga.seed)
        forest = ForestParams(**forest_kw)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return Settings(space, policy, ga, oracle, forest)


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")


# --- argument groups -------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file overriding built-in defaults")


def _ga_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("genetic algorithm")
    g.add_argument("--seed", type=int)
    g.add_argument("--population", type=int)
    g.add_argument("--generations", type=int)
    g.add_argument("--tournament", type=int)
    g.add_argument("--cxpb", type=float)
    g.add_argument("--mutpb", type=float)
    g.add_argument("--restarts", type=int)
    g.add_argument("--init", choices=("uniform", "feasible"))
    g.add_argument("--track-best", action="store_true",
                   help="also report the best configuration seen during search")


def _oracle_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic oracle")
    g.add_argument("--noise-sd", dest="noise_sd", type=float)
    g.add_argument("--oracle-seed", dest="oracle_seed", type=int)


def _forest_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("random forest")
    g.add_argument("--n-trees", dest="n_trees", type=int)
    g.add_argument("--max-depth", dest="max_depth", type=int)
    g.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    g.add_argument("--max-features", dest="max_features", type=int)


def _source_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("evaluation sources")
    g.add_argument("--dataset", help="offline corpus CSV (exact-match lookups, surrogate training)")
    acc = g.add_mutually_exclusive_group()
    acc.add_argument("--acc-model", help="accuracy forest JSON")
    acc.add_argument("--oracle", choices=("synthetic",),
                     help="score accuracy with the synthetic oracle")
    g.add_argument("--flops-source", choices=("exact", "surrogate"), default="exact")
    g.add_argument("--flops-model", help="FLOPs forest JSON (with --flops-source surrogate)")
    g.add_argument("--per-snr", action="store_true",
                   help="train the accuracy forest only on records at the query SNR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitopt",
        description="Choose split point, filters, kernel size and latent dimension "
                    "for a device FLOPs budget and channel SNR.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the surrogate-guided GA for one budget/SNR")
    _common(p)
    p.add_argument("--budget", type=float, required=True, help="device FLOPs budget")
    p.add_argument("--snr", type=float, required=True, help="channel SNR in dB")
    _source_flags(p)
    _ga_flags(p)
    _oracle_flags(p)
    _forest_flags(p)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--no-timings", action="store_true", help="omit wall-clock timings")
    p.add_argument("--no-history", action="store_true", help="omit per-generation history")

    p = sub.add_parser("sweep", help="optimise across budgets, SNRs or split points")
    _common(p)
    p.add_argument("--axis", choices=("budget", "snr", "layers"), required=True)
    p.add_argument("--points", type=_float_list, required=True,
                   help="comma-separated, strictly increasing")
    p.add_argument("--budget", type=float, help="fixed budget (snr and layers sweeps)")
    p.add_argument("--snr", type=float, help="fixed SNR in dB (budget and layers sweeps)")
    _source_flags(p)
    _ga_flags(p)
    _oracle_flags(p)
    _forest_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="output prefix: writes PREFIX.json and PREFIX.csv")
    p.add_argument("--no-timings", action="store_true")
    p.add_argument("--no-history", action="store_true")

    p = sub.add_parser("flops", help="device FLOPs breakdown of one configuration")
    _common(p)
    _config_flags(p, with_m=True)

    p = sub.add_parser("layers-table", help="CSV of device FLOPs against split point")
    _common(p)
    _config_flags(p, with_m=False)
    p.add_argument("--out")

    p = sub.add_parser("fit-surrogate", help="train a forest on an offline corpus")
    _common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--target", choices=("accuracy", "flops"), required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--seed", type=int)
    p.add_argument("--test-fraction", type=float, default=0.0,
                   help="hold out this fraction and report R^2 on it")
    p.add_argument("--snr", type=float, help="train only on records at this SNR")
    _forest_flags(p)

    p = sub.add_parser("gen-corpus", help="write a synthetic offline corpus")
    _common(p)
    p.add_argument("--count", type=int, required=True, help="number of configurations")
    p.add_argument("--paper-protocol", action="store_true",
                   help="one random SNR per configuration instead of every SNR")
    p.add_argument("--snrs", type=_float_list, default=list(DEFAULT_SNRS_DB))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    _oracle_flags(p)

    p = sub.add_parser("brute-force", help="exhaustive optimum for one budget/SNR")
    _common(p)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--snr", type=float, required=True)
    _source_flags(p)
    _oracle_flags(p)
    _forest_flags(p)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("channel", help="AWGN calibration: target vs measured SNR")
    p.add_argument("--dim", type=int, required=True, help="complex symbols per latent")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true", help="scale latents to unit power")

    p = sub.add_parser("dataset", help="offline corpus utilities")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    v = dsub.add_parser("validate", help="check a corpus CSV against the schema")
    _common(v)
    v.add_argument("path")
    return parser


def _config_flags(p: argparse.ArgumentParser, with_m: bool) -> None:
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l-s", dest="l_s", type=int, required=True)
    if with_m:
        p.add_argument("--m", type=int, required=True)


# --- source wiring ----------------------------------------------------------------

def _load_dataset(args, settings: Settings) -> OfflineDataset:
    if not getattr(args, "dataset", None):
        return OfflineDataset()
    return load(args.dataset, settings.space)


def _fit_from(dataset: OfflineDataset, target: str, settings: Settings) -> ForestModel:
    if len(dataset) == 0:
        raise ConfigError(f"cannot train the {target} forest: corpus has no records")
    return fit(dataset, target, settings.forest)


def _stack_factory(args, settings: Settings, snr_for_filter: float | None,
                   ) -> tuple[StackFactory, dict]:
    dataset = _load_dataset(args, settings)
    desc: dict = {"dataset": args.dataset, "flops_source": args.flops_source}
    if args.acc_model:
        accuracy = ForestAccuracy(ForestModel.load(args.acc_model))
        desc["accuracy_source"] = {"model": args.acc_model}
    elif args.oracle == "synthetic" or len(dataset) == 0:
        accuracy = OracleAccuracy(settings.oracle, settings.policy)
        desc["accuracy_source"] = "synthetic"
    else:
        train = dataset
        if args.per_snr:
            if snr_for_filter is None:
                raise UsageError("--per-snr needs a fixed SNR")
            train = dataset.filter_snr(snr_for_filter)
        accuracy = ForestAccuracy(_fit_from(train, "accuracy", settings))
        desc["accuracy_source"] = {"fit_on": args.dataset, "per_snr": args.per_snr}
    if args.flops_source == "exact":
        flops = ExactFlops(settings.policy)
    elif args.flops_model:
        flops = ForestFlops(ForestModel.load(args.flops_model))
        desc["flops_model"] = args.flops_model
    elif len(dataset):
        flops = ForestFlops(_fit_from(dataset, "flops", settings))
        desc["flops_model"] = {"fit_on": args.dataset}
    else:
        raise UsageError("--flops-source surrogate needs --flops-model or --dataset")
    return StackFactory(flops, accuracy, dataset), desc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# --- commands ---------------------------------------------------------------------

def cmd_optimize(args) -> int:
    settings = _resolve(args)
    factory, desc = _stack_factory(args, settings, args.snr)
    stack = factory(args.budget, args.snr)
    start = time.perf_counter()
    result = optimize(settings.space, settings.policy, stack, settings.ga,
                      track_best=args.track_best)
    elapsed = time.perf_counter() - start
    config = {**settings.to_dict(), **desc, "budget": args.budget, "snr_db": args.snr,
              "track_best": args.track_best}
    report = build_report("optimize", config,
                          {"result": result.to_dict(include_history=not args.no_history)},
                          None if args.no_timings else {"optimize_seconds": elapsed})
    _emit(_dump(report), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    settings = _resolve(args)
    spec = SweepSpec(args.axis, tuple(args.points), budget=args.budget, snr_db=args.snr)
    factory, desc = _stack_factory(args, settings, args.snr if args.axis != "snr" else None)
    ctx = SweepContext(settings.space, settings.policy, settings.ga, factory, args.track_best)
    body = run_sweep(spec, ctx, jobs=max(1, args.jobs))
    timings = body.pop("timings")
    if args.no_history:
        for p in body["points"]:
            if p["status"] == "ok":
                p["result"].pop("history", None)
    report = build_report("sweep", {**settings.to_dict(), **desc,
                                    "track_best": args.track_best},
                          body, None if args.no_timings else timings)
    if args.out:
        Path(f"{args.out}.json").write_text(_dump(report), encoding="utf-8")
        Path(f"{args.out}.csv").write_text(sweep_csv(body["points"]), encoding="utf-8")
    else:
        sys.stdout.write(_dump(report))
    return EXIT_OK


def cmd_flops(args) -> int:
    settings = _resolve(args)
    c = Configuration(args.f, args.k, args.l_s, args.m)
    sys.stdout.write(_dump(device_flops(c, settings.policy).to_dict()))
    return EXIT_OK


def cmd_layers_table(args) -> int:
    settings = _resolve(args)
    _emit(layers_flops_table(settings.space, settings.policy, args.f, args.k, args.l_s), args.out)
    return EXIT_OK


def cmd_fit_surrogate(args) -> int:
    settings = _resolve(args)
    data = load(args.dataset, settings.space)
    if args.snr is not None:
        data = data.filter_snr(args.snr)
    train, test = data, None
    if args.test_fraction:
        train, test = train_test_split(data, args.test_fraction,
                                       random.Random(settings.forest.seed))
    model = _fit_from(train, args.target, settings)
    model.save(args.out)
    summary = {"target": args.target, "model": args.out, "n_train": len(train),
               "params": asdict(settings.forest)}
    if test is not None:
        summary.update(n_test=len(test), r2=r2_score(model, test))
    sys.stdout.write(_dump(summary))
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    settings = _resolve(args)
    corpus = generate_corpus(settings.space, settings.policy, settings.oracle,
                             snr_set=args.snrs, sample_count=args.count,
                             rng=random.Random(args.seed), paper_protocol=args.paper_protocol)
    if args.out:
        save(corpus, args.out)
        sys.stdout.write(_dump({"rows": len(corpus), "path": args.out,
                                "synthetic": True, "paper_protocol": args.paper_protocol}))
    else:
        sys.stdout.write(format_records(corpus))
    return EXIT_OK


def cmd_brute_force(args) -> int:
    settings = _resolve(args)
    factory, desc = _stack_factory(args, settings, args.snr)
    result = brute_force_optimize(settings.space, factory(args.budget, args.snr))
    body = {"feasible_count": result.feasible_count,
            "evaluated_count": result.evaluated_count,
            "best_fitness": result.best_fitness.to_json()}
    if result.best is not None:
        e = result.best_evaluation
        body.update(best=dict(zip(("f", "k", "l_s", "m"), result.best.as_tuple())),
                    predicted_accuracy=e.accuracy, device_flops=e.flops)
    config = {**settings.to_dict(), **desc, "budget": args.budget, "snr_db": args.snr}
    sys.stdout.write(_dump(build_report("brute-force", config, {"result": body})))
    return EXIT_OK if result.best is not None else EXIT_INFEASIBLE


def cmd_channel(args) -> int:
    if args.dim < 1 or args.trials < 1:
        raise UsageError("--dim and --trials must be >= 1")
    sys.stdout.write(_dump(channel.simulate(args.dim, args.snr, args.trials, args.seed,
                                            normalize=args.normalize)))
    return EXIT_OK


def cmd_dataset_validate(args) -> int:
    settings = _resolve(args)
    try:
        data = load(args.path, settings.space)
    except DatasetError as exc:
        for lineno, msg in exc.problems:
            print(f"{args.path}:{lineno}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{args.path}: ok, {len(data)} records")
    return EXIT_OK


COMMANDS = {"optimize": cmd_optimize, "sweep": cmd_sweep, "flops": cmd_flops,
            "layers-table": cmd_layers_table, "fit-surrogate": cmd_fit_surrogate,
            "gen-corpus": cmd_gen_corpus, "brute-force": cmd_brute_force,
            "channel": cmd_channel}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = cmd_dataset_validate if args.command == "dataset" else COMMANDS[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except NoFeasibleConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, DatasetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
