# src/udn_se_economics/export.py
"""
結果テーブルのファイル出力（CSV / gnuplot 用 .dat / 描画スクリプトの雛形）。

CSV はカンマ区切り・ヘッダ付き・小数点 '.'・有効数字 12 桁の指数表記。
欠損は "NA"。同じ入力なら同じバイト列になる。
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping, Sequence

import pandas as pd

from .params import ProgressCb

CSV_FLOAT_FORMAT = "%.11e"
NA_REP = "NA"

REALIZATION_COLUMNS = ["trial", "kind", "index", "x", "y", "active", "serving", "sir"]


def to_frame(rows: Sequence[Mapping[str, object]], columns: Sequence[str]) -> pd.DataFrame:
    """行の順番と列の順番を固定して DataFrame にする。"""
    return pd.DataFrame(list(rows), columns=list(columns))


def write_csv(df: pd.DataFrame, output_path: Path) -> Path:
    output_path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(
        output_path,
        index=False,
        float_format=CSV_FLOAT_FORMAT,
        na_rep=NA_REP,
        lineterminator="\n",
        encoding="utf-8",
    )
    return output_path


def write_dat(df: pd.DataFrame, output_path: Path) -> Path:
    """
    gnuplot 用: 空白区切り、先頭行は '# ' 付きの列名。
    文字列列（regime 名など）はそのまま出す。
    """
    output_path.parent.mkdir(parents=True, exist_ok=True)
    body = df.to_csv(
        None,
        sep=" ",
        index=False,
        header=False,
        float_format=CSV_FLOAT_FORMAT,
        na_rep="NaN",
        lineterminator="\n",
    )
    output_path.write_text("# " + " ".join(df.columns) + "\n" + body, encoding="utf-8")
    return output_path


def write_realizations(records: Iterable[Mapping[str, object]], output_path: Path) -> Path:
    """1 回分の配置ダンプ（trial, kind, index, x, y, active, serving, sir）。"""
    return write_csv(to_frame(list(records), REALIZATION_COLUMNS), output_path)


_GNUPLOT_HEADER = """\
# 生成された .dat を描く雛形。必要に応じて書き換えて使う:
#   gnuplot plot_figures.gp
set datafile commentschars "#"
set logscale xy
set key left top
"""


def write_gnuplot_stub(out_dir: Path, plots: Mapping[str, tuple[str, Sequence[str]]]) -> Path:
    """
    plots: 図 ID → (x 列名, y 列名のリスト)。
    列番号は各 .dat の列順から引く。
    """
    lines = [_GNUPLOT_HEADER]
    for fig_id, (x_col, y_cols) in plots.items():
        dat = out_dir / f"{fig_id}.dat"
        header = dat.read_text(encoding="utf-8").splitlines()[0].lstrip("# ").split() if dat.exists() else []
        if x_col not in header:
            continue
        xi = header.index(x_col) + 1
        series = [
            f"'{fig_id}.dat' using {xi}:{header.index(y) + 1} with linespoints title '{y}'"
            for y in y_cols if y in header
        ]
        lines.append(f"set output '{fig_id}.png'\nset terminal pngcairo size 800,600\nset xlabel '{x_col}'")
        lines.append("plot " + ", \\\n     ".join(series) + "\n")
    path = out_dir / "plot_figures.gp"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def export_tables(
    tables: Mapping[str, pd.DataFrame],
    out_dir: Path,
    *,
    with_dat: bool = False,
    progress: ProgressCb | None = None,
) -> list[Path]:
    """名前 → DataFrame をまとめて out_dir に書く（名前順ではなく渡した順）。"""
    written: list[Path] = []
    total = len(tables)
    for i, (name, df) in enumerate(tables.items(), start=1):
        written.append(write_csv(df, out_dir / f"{name}.csv"))
        if with_dat:
            written.append(write_dat(df, out_dir / f"{name}.dat"))
        if progress:
            progress(i, total, f"{name} を書き込み")
    return written
