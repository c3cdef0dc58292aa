# scripts/plot_realization.py
# montecarlo の配置ダンプ (realizations_*.csv) を散布図にする。
# Usage:
#   python .\apps\main.py montecarlo --trials 10 --out .\out\mc   (config の sim.dump_trials > 0)
#   python .\scripts\plot_realization.py --csv .\out\mc\realizations_000.csv --trial 0 --zoom 5 --save .\out\mc\trial0.png
from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--csv", type=Path, required=True)
    ap.add_argument("--trial", type=int, default=0)
    ap.add_argument("--zoom", type=float, default=None, help="原点まわりの表示半径")
    ap.add_argument("--save", type=Path, default=None)
    args = ap.parse_args()

    df = pd.read_csv(args.csv, na_values=["NA"])
    df = df[df["trial"] == args.trial]
    if df.empty:
        print(f"trial {args.trial} not found in {args.csv}")
        return 1

    bs = df[df["kind"] == "bs"]
    users = df[df["kind"] == "user"]
    active = bs["active"].astype(str) == "True"
    serving = bs["serving"].astype(str) == "True"
    typical = df[df["kind"] == "typical"].iloc[0]

    fig, ax = plt.subplots(figsize=(7, 7))
    ax.scatter(users["x"], users["y"], s=4, c="0.6", label="users")
    ax.scatter(bs.loc[~active, "x"], bs.loc[~active, "y"], s=18, marker="x", c="tab:gray", label="BS (off)")
    ax.scatter(bs.loc[active, "x"], bs.loc[active, "y"], s=18, marker="^", c="tab:blue", label="BS (on)")
    ax.scatter(bs.loc[serving, "x"], bs.loc[serving, "y"], s=80, marker="^", c="tab:red", label="serving BS")
    ax.scatter([0.0], [0.0], s=60, marker="*", c="k", label=f"typical user (SIR={typical['sir']:.3g})")
    if args.zoom:
        ax.set_xlim(-args.zoom, args.zoom)
        ax.set_ylim(-args.zoom, args.zoom)
    ax.set_aspect("equal", adjustable="box")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"{args.csv.name} trial {args.trial}")
    fig.tight_layout()

    if args.save:
        args.save.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(args.save, dpi=150)
        print(f"saved: {args.save}")
    else:
        plt.show()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
