#!/usr/bin/env python3
"""Plot a performance-fairness tradeoff curve from a sweep CSV.

    python3 docs/plot_tradeoff.py sweep.csv --performance auc --fairness j
"""

import argparse

import matplotlib.pyplot as plt
import pandas as pd


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="sweep output written by the fairmaxcorr CLI")
    parser.add_argument("--performance", default="auc",
                        help="performance column (auc, accuracy, balanced_accuracy, mse)")
    parser.add_argument("--fairness", default="j",
                        help="fairness column (j, deo_abs, mi, cmi)")
    parser.add_argument("--out", default=None, help="save instead of showing")
    args = parser.parse_args()

    frame = pd.read_csv(args.csv)
    frame = frame[frame["error"].isna() | (frame["error"] == "")]
    grouped = frame.groupby("lambda")[[args.performance, args.fairness]].mean()

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(grouped[args.fairness], grouped[args.performance], "o-")
    for lam, row in grouped.iterrows():
        ax.annotate(f"{lam:g}", (row[args.fairness], row[args.performance]),
                    textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel(args.fairness)
    ax.set_ylabel(args.performance)
    ax.set_title("tradeoff curve (points labeled by lambda)")
    fig.tight_layout()
    if args.out:
        fig.savefig(args.out, dpi=150)
        print(f"saved {args.out}")
    else:
        plt.show()


if __name__ == "__main__":
    main()
