#!/usr/bin/env python3
"""Plot a summary CSV written by `dstorm run`.

    python3 scripts/plot.py out/summary_by_iteration.csv stationarity_exp
    python3 scripts/plot.py out/summary_by_samples.csv consensus --x samples
"""
import argparse
import csv
from collections import defaultdict

import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("summary")
    ap.add_argument("metric", help="loss, stationarity_def2, stationarity_exp, consensus, sparsity_pct or accuracy")
    ap.add_argument("--x", default="k", choices=["k", "samples", "grad_evals", "comm_rounds", "passes"])
    ap.add_argument("--linear", action="store_true", help="linear y axis")
    ap.add_argument("-o", "--output", help="write the figure here instead of showing it")
    args = ap.parse_args()

    series = defaultdict(lambda: ([], [], []))
    with open(args.summary, newline="") as f:
        for row in csv.DictReader(f):
            mean = row.get(f"{args.metric}_mean", "")
            if mean == "":
                continue
            xs, ys, sd = series[row["run"]]
            xs.append(float(row[args.x]))
            ys.append(float(mean))
            sd.append(float(row.get(f"{args.metric}_std") or 0.0))

    fig, ax = plt.subplots()
    for run, (xs, ys, sd) in series.items():
        order = sorted(range(len(xs)), key=xs.__getitem__)
        xs, ys, sd = [xs[i] for i in order], [ys[i] for i in order], [sd[i] for i in order]
        ax.plot(xs, ys, label=run)
        ax.fill_between(xs, [max(y - s, 1e-300) for y, s in zip(ys, sd)], [y + s for y, s in zip(ys, sd)], alpha=0.2)
    if not args.linear:
        ax.set_yscale("log")
    ax.set_xlabel(args.x)
    ax.set_ylabel(args.metric)
    ax.legend()
    if args.output:
        fig.savefig(args.output, bbox_inches="tight")
    else:
        plt.show()


if __name__ == "__main__":
    main()
