"""Plots the CSVs written by reproduce.sh into PNGs in the same directory."""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def read(path):
    return pd.read_csv(path, comment="#")


def toy_m(x):
    return 10.0 * np.sin(np.pi * x / 14.0)


def plot_quantiles(out):
    train = read(out / "toy_train.csv")
    qs = read(out / "toy_quantiles.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(train.x, train.y, s=2, alpha=0.2, color="grey")
    for q, group in qs.groupby("q"):
        ax.plot(group.x, group.value, label=f"q = {q:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "toy_quantiles.png", dpi=150)


def plot_effect(out):
    eff = read(out / "toy_effect.csv")
    truth = toy_m(np.minimum(eff.x + 1.0, 10.0)) - toy_m(eff.x)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(eff.x, eff.effect, label="estimate")
    ax.fill_between(eff.x, eff.effect - 2 * eff.std_error, eff.effect + 2 * eff.std_error, alpha=0.3)
    ax.plot(eff.x, truth, "--", label="truth")
    ax.set_xlabel("x")
    ax.set_ylabel("effect of x -> min(x + 1, 10)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "toy_effect.png", dpi=150)


def plot_couplings(out):
    names = ["comonotonic", "countermonotonic", "gaussian"]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4), sharex=True, sharey=True)
    for ax, name in zip(axes, names):
        t = read(out / f"coupling_{name}.csv")
        wide = t.pivot(index="sample", columns="world", values="y")
        ax.scatter(wide[0], wide[1], s=3, alpha=0.4)
        ax.set_title(name)
        ax.set_xlabel("y under do(x=4)")
    axes[0].set_ylabel("y under do(x=6)")
    fig.tight_layout()
    fig.savefig(out / "toy_couplings.png", dpi=150)


def plot_401k(out):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ["comonotonic", "countermonotonic", "gaussian"]:
        path = out / f"401k_effect_{name}.csv"
        if not path.exists():
            continue
        c = read(path)
        ax.errorbar(c.q, c.effect, yerr=2 * c.std_error, label=name, capsize=2)
    ax.set_xlabel("quantile of net_tfa without eligibility")
    ax.set_ylabel("effect of eligibility")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "401k_quantile_effect.png", dpi=150)


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "figures")
    plot_quantiles(out)
    plot_effect(out)
    plot_couplings(out)
    plot_401k(out)


if __name__ == "__main__":
    main()
