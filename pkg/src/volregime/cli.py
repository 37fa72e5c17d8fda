"""Command line entry point: ``volregime {ingest,build-pool,evaluate,report}``.

Exit codes: 0 success, 1 a stage or method failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .config import load_config
from .errors import ConfigurationError, VolRegimeError
from .evaluator import read_metrics_csv, render_markdown

logger = logging.getLogger("volregime")


def _config(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides += [f"pool_seed={args.seed}", f"sampler_seed={args.seed}", f"garch_seed={args.seed}"]
    if args.backend is not None:
        overrides.append(f"backend={args.backend}")
    if args.output is not None:
        overrides.append(f"output_dir={args.output}")
    return load_config(args.config, overrides)


def cmd_ingest(args) -> int:
    config = _config(args)
    ds = experiment.load_dataset(config)
    meta = experiment.write_ingest(ds, config)
    print(f"{ds.name}: {len(ds.returns)} returns, {meta['n_train']} train / {meta['n_test']} test windows, "
          f"tau={ds.tau!r}")
    print(f"returns.csv sha256 {meta['sha256']['returns.csv']}")
    return 0


def cmd_build_pool(args) -> int:
    config = _config(args)
    ds = experiment.read_ingest(config)
    gateway = experiment.make_gateway(config, ds)
    pool = experiment.construct_pool(ds, config, gateway)
    path = experiment.write_pool(pool, config)
    if config.n > len(ds.train):
        print(f"warning: n={config.n} exceeds {len(ds.train)} training windows", file=sys.stderr)
    print(f"wrote {len(pool)} demonstrations ({len(pool.high)} high, {len(pool.low)} low) to {path}")
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    ds = experiment.read_ingest(config)
    gateway = experiment.make_gateway(config, ds) if config.needs_model else None
    pool = experiment.maybe_load_pool(config)
    result = experiment.evaluate(ds, config, pool, gateway)
    out = experiment.write_evaluation(result, ds, config)
    if result.reports:
        print(render_markdown(experiment.labelled(result.reports), ds.name), end="")
    for name, msg in result.failures.items():
        print(f"error: {name}: {msg}", file=sys.stderr)
    print(f"reports written to {out}")
    return 0 if result.ok else 1


def cmd_report(args) -> int:
    config = _config(args)
    out = Path(config.output_dir)
    path = out / "metrics.csv"
    if not path.exists():
        raise ConfigurationError(f"{path} not found; run `evaluate` first")
    dataset, reports = read_metrics_csv(path.read_text())
    markdown = render_markdown(experiment.labelled(reports), dataset)
    (out / "report.md").write_text(markdown)
    print(markdown, end="")
    return 0


COMMANDS = {"ingest": cmd_ingest, "build-pool": cmd_build_pool, "evaluate": cmd_evaluate, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volregime", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="experiment INI file")
        p.add_argument("--seed", type=int, help="override every named seed")
        p.add_argument("--backend", help="remote | mock:<variant>[:<value>]")
        p.add_argument("--output", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (VolRegimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
