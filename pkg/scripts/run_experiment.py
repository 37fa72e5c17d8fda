"""Run ingest, pool construction and evaluation in one go.

    python scripts/run_experiment.py configs/sim174.ini
    python scripts/run_experiment.py configs/sim174.ini --set methods=har,garch,gjr_garch

Equivalent to calling the ``volregime`` subcommands in order; stops at the
first stage that fails.
"""

import argparse
import sys

from volregime.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--skip-pool", action="store_true", help="classical baselines only")
    args = ap.parse_args()
    extra = ["--config", args.config] + [x for kv in args.set for x in ("--set", kv)]
    stages = ["ingest", "evaluate"] if args.skip_pool else ["ingest", "build-pool", "evaluate"]
    for stage in stages:
        code = cli([stage, *extra])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
