#!/usr/bin/env python3
"""Plot dual vs normalized iterations for one or more trace CSV files."""
import argparse
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [float(r["normalized_iterations"]) for r in rows], [float(r["dual"]) for r in rows]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("traces", nargs="+")
    ap.add_argument("--out", default="traces.png")
    args = ap.parse_args()
    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.traces:
        x, y = load(path)
        ax.plot(x, y, label=os.path.splitext(os.path.basename(path))[0])
    ax.set_xscale("symlog")
    ax.set_xlabel("normalized iterations")
    ax.set_ylabel("dual")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
