"""Regenerate the synthetic price fixtures under tests/data/.

Prices follow a GJR-GARCH return process on a business-day calendar, so
they look like an index series but are fully reproducible from the seed.
"""

import argparse
import csv
import datetime as dt
from pathlib import Path

import numpy as np

from volregime.baselines import GarchParams, simulate_garch

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"


def business_days(start, n):
    day = start
    while n:
        if day.weekday() < 5:
            yield day
            n -= 1
        day += dt.timedelta(days=1)


def write_prices(path, n_prices, seed, params, start=dt.date(2015, 1, 2), p0=2000.0, layout="stooq"):
    r = simulate_garch(params, n_prices - 1, seed=seed)
    closes = p0 * np.exp(np.concatenate(([0.0], np.cumsum(r))))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if layout == "stooq":
            w.writerow(["Date", "Open", "High", "Low", "Close", "Volume"])
        else:
            w.writerow(["Date", "Close"])
        for day, c in zip(business_days(start, n_prices), closes):
            c = round(float(c), 2)
            if layout == "stooq":
                w.writerow([day.isoformat(), c, round(c * 1.004, 2), round(c * 0.996, 2), c, 1_000_000])
            else:
                w.writerow([day.isoformat(), c])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20240101)
    args = ap.parse_args()
    gjr = GarchParams(omega=2e-6, alpha=0.03, beta=0.88, gamma=0.12)
    # 174 prices -> 173 returns -> 166 windows of w=7 -> 116 train / 50 test
    write_prices(DATA / "sim_index_174.csv", 174, args.seed, gjr)
    write_prices(DATA / "sim_index_600.csv", 600, args.seed + 1, gjr, layout="date_close")
    print("wrote", sorted(p.name for p in DATA.glob("sim_*.csv")))


if __name__ == "__main__":
    main()
