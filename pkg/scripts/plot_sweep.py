"""Plot a sweep.csv: mean error per level with a one-sd band and the grid mean.

Usage: python3 scripts/plot_sweep.py out/sweep_mu_zt/sweep.csv --x mu_zt --out sweep_mu_zt.png
Needs matplotlib (``pip install .[plot]``); not part of the library.
"""
import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    p = argparse.ArgumentParser()
    p.add_argument("csv")
    p.add_argument("--x", choices=("mu_zt", "mu_xy"), default="mu_zt")
    p.add_argument("--out", default="sweep.png")
    args = p.parse_args()

    series = defaultdict(list)
    with open(args.csv) as fh:
        for row in csv.DictReader(fh):
            series[(int(row["level"]), row["metric"])].append(
                (float(row[args.x]), float(row["mean"]), float(row["sd"]))
            )

    fig, axes = plt.subplots(1, len(series), figsize=(4.5 * len(series), 3.5), squeeze=False)
    for ax, ((level, metric), pts) in zip(axes[0], sorted(series.items())):
        pts.sort()
        xs, mean, sd = zip(*pts)
        lo = [m - s for m, s in zip(mean, sd)]
        hi = [m + s for m, s in zip(mean, sd)]
        ax.fill_between(xs, lo, hi, alpha=0.25)
        ax.plot(xs, mean)
        ax.axhline(sum(mean) / len(mean), color="gray", linestyle="--")
        ax.set_title(f"level {level}: {metric} error")
        ax.set_xlabel(args.x)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
