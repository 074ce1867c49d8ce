"""Command line interface.

Verbs::

    delala run            [--config FILE] [flags]   run a pipeline, print a report
    delala sweep          --param NAME --values V   one run per grid value, CSV table
    delala inspect-forest [--output FILE]           leading-forest edge list
    delala select         [--output FILE]           selection stage only, JSON

Every :class:`~delala.config.ExperimentConfig` field has a flag of the same
name with dashes (``--sigma-percentile``); flags override the config file.
Exit status: 0 ok, 2 config error, 3 data error, 4 training error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import fields
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, DelalaError
from .experiment import emit_report, forest_summary, parse_grid, resolve_dataset, run, select_only, sweep
from .leading_forest import dump_edge_list, edge_list_text

log = logging.getLogger("delala")


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", "-c", help="key = value config file")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())


def _config(args) -> ExperimentConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)}
    return load_config(args.config, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delala", description="Deterministic labeling and label propagation benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run a pipeline and print its report")
    _add_config_flags(p)
    p.add_argument("--format", choices=("human", "json", "csv"), default="human")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--canonical", action="store_true", help="omit timings so reports compare byte for byte")

    p = sub.add_parser("sweep", help="run once per value of one parameter")
    _add_config_flags(p)
    p.add_argument("--param", required=True, help="config field to vary")
    p.add_argument("--values", required=True, help="comma list or start:stop:step")
    p.add_argument("--output", "-o", help="CSV destination (default stdout)")
    p.add_argument("--json", dest="json_out", help="also write every run report as JSON here")

    p = sub.add_parser("inspect-forest", help="dump the leading forest as an edge list")
    _add_config_flags(p)
    p.add_argument("--output", "-o", help="edge list destination (default stdout)")

    p = sub.add_parser("select", help="selection stage only")
    _add_config_flags(p)
    p.add_argument("--output", "-o", help="JSON destination (default stdout)")
    return parser


def _write(text: str, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        cfg = _config(args)
        if args.verb == "run":
            report = run(cfg)
            text = emit_report(report, args.format, None, args.canonical)
            _write(text, args.output)
        elif args.verb == "sweep":
            rep = sweep(cfg, args.param, parse_grid(args.values))
            _write(rep.to_csv(), args.output)
            if args.json_out:
                _write(rep.to_json(), args.json_out)
        elif args.verb == "inspect-forest":
            ds = resolve_dataset(cfg.dataset)
            forest, gran, sigma = forest_summary(ds, cfg)
            log.info("sigma=%g, %d subtrees (N_max=%d)", sigma, gran.n_g, gran.n_max)
            if args.output is None:
                sys.stdout.write(edge_list_text(forest))
            else:
                dump_edge_list(forest, args.output)
        elif args.verb == "select":
            ds = resolve_dataset(cfg.dataset)
            _write(json.dumps(select_only(ds, cfg), indent=2) + "\n", args.output)
    except DelalaError as e:
        print(f"delala: error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
