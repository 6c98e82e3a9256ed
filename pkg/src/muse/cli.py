"""Command-line pipeline around the search engine.

Subcommands: synth, corrupt, search, discretize, retrain, eval,
ablate-operators, ablate-paths, report. One key-value config file (see
muse.config for the schema) drives data generation and model settings;
the $MUSE_SEED environment variable overrides the config seed.

Exit codes: 0 success; 2 config or usage errors; 3 data or parse
errors; 4 numeric failures. Canonical CSV reports exclude wall-clock,
so replaying a pipeline with the same seed writes identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .config import (
    ConfigMap,
    build_data_config,
    build_model_config,
    load_config,
    render_config,
    resolve_seed,
)
from .data import (
    check_musef,
    corrupt_partial,
    generate_synthetic,
    read_features,
    write_features,
)
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DomainError,
    GraphError,
    NumericError,
    ParseError,
    RegistryError,
    ShapeError,
)
from .harness import (
    ExperimentReport,
    ReportRow,
    evaluate_model,
    merge_reports,
    run_operator_ablation,
    run_path_ablation,
)
from .model import (
    bilevel_search,
    config_to_dict,
    load_checkpoint,
    retrain_discrete,
    save_checkpoint,
)

__all__ = ["main"]


def _load_configs(path: str | None):
    """(kv echo text, data config, model config, seed) from one file."""
    kv = load_config(path) if path else {}
    cfg = ConfigMap(kv)
    seed = resolve_seed(cfg, os.environ.get("MUSE_SEED"))
    data_cfg = build_data_config(cfg, seed)
    model_cfg = build_model_config(cfg)
    cfg.reject_unknown()
    return render_config(kv), data_cfg, model_cfg, seed


def _echo_checkpoint_config(model) -> str:
    kv = {}
    for key, value in config_to_dict(model.config).items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        kv[f"model.{key}"] = str(value)
    kv["seed"] = str(model.seed)
    return render_config(kv)


def _write_text(path: str, content: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)


def _emit(report: ExperimentReport, out: str | None) -> None:
    if out:
        _write_text(out, report.to_csv())
        print(f"wrote {out}")
    sys.stdout.write(report.to_text())


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> int:
    echo, data_cfg, _, _ = _load_configs(args.config)
    ds = generate_synthetic(data_cfg)
    write_features(ds, args.out, version=args.format_version)
    info = check_musef(args.out)
    print(f"wrote {args.out}: {info['samples']} samples "
          f"({info['n_train']}/{info['n_valid']}/{info['n_test']}), "
          f"sha256 {info['sha256']}")
    return 0


def _cmd_corrupt(args) -> int:
    version = check_musef(args.input)["version"]
    ds = read_features(args.input)
    out = corrupt_partial(ds, seed=args.seed)
    write_features(out, args.out, version=version)
    print(f"wrote {args.out}: sha256 {check_musef(args.out)['sha256']}")
    return 0


def _cmd_search(args) -> int:
    echo, _, model_cfg, seed = _load_configs(args.config)
    ds = read_features(args.data)
    result = bilevel_search(ds.train, ds.valid, model_cfg, seed)
    save_checkpoint(args.out, result.model, extra={
        "train_losses": result.train_losses,
        "valid_losses": result.valid_losses,
        "genotypes": result.genotypes,
    })
    print(f"wrote {args.out}")
    print(result.model.genotype())
    return 0


def _cmd_discretize(args) -> int:
    model = load_checkpoint(args.input)
    if model.mode != "search":
        raise ContractError("discretize expects a searched (mixed) checkpoint")
    discrete = model.discretize()
    save_checkpoint(args.out, discrete)
    print(f"wrote {args.out}")
    print(discrete.genotype())
    return 0


def _cmd_retrain(args) -> int:
    state = load_checkpoint(args.input)
    ds = read_features(args.data)
    override = None
    if args.config:
        _, _, override, _ = _load_configs(args.config)
    result = retrain_discrete(state, ds.train, ds.valid, config=override)
    save_checkpoint(args.out, result.model, extra={
        "best_epoch": result.best_epoch,
        "best_accuracy": result.best_accuracy,
        "losses": result.losses,
    })
    print(f"wrote {args.out}")
    best = "warm start" if result.best_epoch < 0 else f"epoch {result.best_epoch}"
    print(f"best snapshot: {best}, validation accuracy {result.best_accuracy:.6f}")
    return 0


def _cmd_eval(args) -> int:
    t0 = time.perf_counter()
    model = load_checkpoint(args.input)
    ds = read_features(args.data)
    samples = ds.split(args.split)
    if not samples:
        raise DataError(f"split {args.split!r} is empty")
    label = args.label or ("MUSE" if model.mode == "search" else "MUSE-discrete")
    row = ReportRow(label, evaluate_model(model, samples))
    report = ExperimentReport(_echo_checkpoint_config(model), model.genotype(),
                              [row], model.seed, time.perf_counter() - t0)
    _emit(report, args.out)
    return 0


def _cmd_ablate_operators(args) -> int:
    searched = load_checkpoint(args.input)
    ds = read_features(args.data)
    override = None
    if args.config:
        _, _, override, _ = _load_configs(args.config)
    reports = run_operator_ablation(searched, ds, config=override, which=args.which,
                                    config_echo=_echo_checkpoint_config(searched))
    _emit(merge_reports(reports), args.out)
    return 0


def _cmd_ablate_paths(args) -> int:
    echo, data_cfg, model_cfg, seed = _load_configs(args.config)
    dataset = read_features(args.data) if args.data else None
    reports = run_path_ablation(data_cfg, model_cfg, seed=seed,
                                dataset=dataset, config_echo=echo)
    _emit(merge_reports(reports), args.out)
    return 0


def _checkpoint_extra(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"checkpoint is not valid JSON: {exc}") from exc
    if payload.get("format") != "muse-checkpoint":
        raise ParseError(f"not a model checkpoint: format={payload.get('format')!r}")
    return payload.get("extra", {}) or {}


def _render_csv_report(text: str) -> str:
    comments = []
    table = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            comments.append(line)
        else:
            table.append(line.split(","))
    if not table:
        raise ParseError("report has no table rows")
    widths = [max(len(row[i]) for row in table if i < len(row))
              for i in range(len(table[0]))]
    out = list(comments)
    for row in table:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"


def _cmd_report(args) -> int:
    if bool(args.input) == bool(args.losses):
        raise ConfigError("report needs exactly one of --input or --losses")
    if args.input:
        try:
            with open(args.input, "r", encoding="utf-8") as fh:
                rendered = _render_csv_report(fh.read())
        except OSError as exc:
            raise DataError(f"cannot read report {args.input!r}: {exc}") from exc
        if args.out:
            _write_text(args.out, rendered)
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(rendered)
        return 0
    extra = _checkpoint_extra(args.losses)
    train = extra.get("train_losses") or extra.get("losses")
    if train is None:
        raise DataError(f"checkpoint {args.losses!r} carries no loss history")
    valid = extra.get("valid_losses") or [float("nan")] * len(train)
    lines = ["# epoch train_loss valid_loss"]
    for i, (a, b) in enumerate(zip(train, valid)):
        lines.append(f"{i} {a:.6f} {b:.6f}")
    dump = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, dump)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(dump)
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muse",
        description="Multimodal architecture search pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted synthetic MUSEF dataset")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--out", required=True, help="output .musef path")
    p.add_argument("--format-version", type=int, default=1, choices=(1, 2))
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("corrupt", help="drop one modality per sample by fair coin")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("search", help="bilevel architecture search")
    p.add_argument("--config")
    p.add_argument("--data", required=True, help="MUSEF feature file")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("discretize", help="argmax-select one operator per edge")
    p.add_argument("--input", required=True, help="searched checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_discretize)

    p = sub.add_parser("retrain", help="discretize and retrain weights")
    p.add_argument("--input", required=True, help="searched checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="optional override config")
    p.set_defaults(func=_cmd_retrain)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--input", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--out", help="write canonical CSV report here")
    p.add_argument("--label", help="row label override")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate-operators",
                       help="prune lowest-weight operators down to one")
    p.add_argument("--input", required=True, help="searched checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--which", default="linear", choices=("linear", "sequence"))
    p.add_argument("--config", help="optional override config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ablate_operators)

    p = sub.add_parser("ablate-paths", help="search full and single-path knockouts")
    p.add_argument("--config")
    p.add_argument("--data", help="MUSEF file (generated from config when omitted)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ablate_paths)

    p = sub.add_parser("report", help="render a CSV report or dump loss curves")
    p.add_argument("--input", help="canonical CSV report to align")
    p.add_argument("--losses", help="checkpoint whose loss history to dump")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RegistryError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ParseError, ShapeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
