"""Convert a Yahoo-style daily CSV (M/D/YYYY dates, Adj Close column) to Date,Close.

    python scripts/convert_yahoo_csv.py sp500.csv.gz tests/data/spx_1999_2018.csv

The committed S&P 500 file was produced from the sample data bundled with the
``arch`` package (arch/data/sp500/sp500.csv.gz, 1999-01-04 .. 2018-12-31).
"""

import argparse
import csv
import datetime as dt
import gzip
from pathlib import Path


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source")
    ap.add_argument("dest")
    args = ap.parse_args()
    opener = gzip.open if args.source.endswith(".gz") else open
    with opener(args.source, "rt", newline="") as fh:
        rows = list(csv.DictReader(fh))
    with Path(args.dest).open("w", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["Date", "Close"])
        for row in rows:
            date = dt.datetime.strptime(row["Date"], "%m/%d/%Y").date()
            writer.writerow([date.isoformat(), row["Close"]])
    print(f"wrote {len(rows)} rows to {args.dest}")


if __name__ == "__main__":
    main()
