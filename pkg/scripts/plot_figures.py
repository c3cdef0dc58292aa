# scripts/plot_figures.py
# figures サブコマンドの CSV 一式を PNG にする。
# Usage:
#   python .\apps\main.py figures --out .\out\figs
#   python .\scripts\plot_figures.py --dir .\out\figs --save-dir .\out\figs
from __future__ import annotations

import argparse
import re
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def plot_fig1(df: pd.DataFrame, ax) -> None:
    alphas = sorted({m.group(1) for c in df.columns if (m := re.match(r"se_exact_alpha(.+)$", c))}, key=float)
    for a in alphas:
        line, = ax.plot(df["lambda_b"], df[f"se_exact_alpha{a}"], "-", label=f"exact, α={a}")
        ax.plot(df["lambda_b"], df[f"se_udn_alpha{a}"], "--", color=line.get_color(), label=f"closed form, α={a}")
    ax.set_xscale("log")
    ax.set_xlabel("BS density λ_b")
    ax.set_ylabel("SE [nats/s/Hz]")


def plot_fig3(df: pd.DataFrame, ax, x: str) -> None:
    for regime, marker in (("sparse", "o"), ("ultra_dense", "s")):
        ax.plot(df[x], df[f"lambda_b_{regime}"], marker + "-", label=f"λ_b*, {regime}")
        ax.plot(df[x], df[f"w_{regime}"], marker + "--", label=f"W*, {regime}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x)


def plot_fig4(df: pd.DataFrame, ax, x: str) -> None:
    for regime, marker in (("sparse", "o"), ("ultra_dense", "s")):
        ax.plot(df[x], df[f"surrogate_profit_{regime}"], marker + "-", label=regime)
    ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel("profit per unit area")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--dir", type=Path, required=True, help="fig*.csv のあるディレクトリ")
    ap.add_argument("--save-dir", type=Path, default=None, help="PNG 出力先（無ければ表示のみ）")
    args = ap.parse_args()

    jobs = {
        "fig1": lambda df, ax: plot_fig1(df, ax),
        "fig3a": lambda df, ax: plot_fig3(df, ax, "lambda_u"),
        "fig3b": lambda df, ax: plot_fig3(df, ax, "b"),
        "fig4a": lambda df, ax: plot_fig4(df, ax, "lambda_u"),
        "fig4b": lambda df, ax: plot_fig4(df, ax, "b"),
    }
    done = 0
    for name, draw in jobs.items():
        csv = args.dir / f"{name}.csv"
        if not csv.exists():
            continue
        df = pd.read_csv(csv, na_values=["NA"])
        fig, ax = plt.subplots(figsize=(7, 5))
        draw(df, ax)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        ax.set_title(name)
        fig.tight_layout()
        if args.save_dir:
            args.save_dir.mkdir(parents=True, exist_ok=True)
            out = args.save_dir / f"{name}.png"
            fig.savefig(out, dpi=150)
            print(f"saved: {out}")
            plt.close(fig)
        done += 1

    if done == 0:
        print(f"no fig*.csv in {args.dir}")
        return 1
    if not args.save_dir:
        plt.show()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
