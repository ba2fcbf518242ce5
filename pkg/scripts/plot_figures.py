#!/usr/bin/env python3
"""Plot the figure CSVs written by ``reproduce_figures.py`` (needs matplotlib).

    python3 scripts/plot_figures.py results/
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from rwanon.experiments import read_csv_rows


def load(path):
    rows = read_csv_rows(Path(path).read_text())
    return {k: np.array([r[k] for r in rows]) for k in rows[0]}


def main(outdir):
    outdir = Path(outdir)
    f1 = load(outdir / "fig1.csv")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for col, label in [("H_assumption1", "designed (nsp model)"), ("H_exact", "designed (full pmf)"),
                       ("H_baseline", "uniform distances"), ("H_bound", "lower bound")]:
        ax.plot(f1["kappa_prime"], f1[col], label=label)
    ax.set_xlabel("observed return time $\\kappa'$")
    ax.set_ylabel("posterior entropy [nats]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(outdir / "fig1.png", dpi=150)

    f2 = load(outdir / "fig2.csv")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for col in ("alpha_theorem3", "alpha_corollary", "min_entropy_numeric", "min_entropy_exact",
                "min_entropy_baseline"):
        ax.plot(f2["prob"], f2[col], label=col)
    ax.set_xlabel("$1-\\delta'$")
    ax.set_ylabel("$\\alpha$ [nats]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(outdir / "fig2.png", dpi=150)

    f3 = load(outdir / "fig3.csv")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(f3["T_mean"], f3["entropy"], "o-")
    for l2, t, h in zip(f3["ell2"], f3["T_mean"], f3["entropy"]):
        ax.annotate(f"$\\ell_2$={int(l2)}", (t, h), fontsize=7, xytext=(3, -8), textcoords="offset points")
    ax.set_xlabel("mean iteration time")
    ax.set_ylabel("entropy [nats]")
    fig.tight_layout()
    fig.savefig(outdir / "fig3.png", dpi=150)
    print(f"wrote fig1.png, fig2.png, fig3.png to {outdir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "results")
