"""Render the figure set from CSV tables written by the roughsabr CLI.

Inputs are plain CSV files; when a `<name>.meta.json` sidecar (as written by
the CLI) sits next to an input it is used for labels only, never for numbers.
All numeric content comes from the CSV columns.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4-6", "fig7")

ODE_COLUMNS = ("y", "g", "G", "f")
SMILE_COLUMNS = ("tau", "y", "formula_iv_normalized", "mc_iv_normalized",
                 "norm_se", "flag")
FIG7_COLUMNS = ("tau", "k", "formula_iv_normalized", "mc_iv_normalized",
                "norm_se", "flag")

DPI = 120


class SchemaError(Exception):
    """An input CSV does not match the producer's schema."""


def load_table(path: str, required) -> dict:
    """Read a CSV into {column: array}; text columns stay as object arrays."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input {path} does not exist")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path} is missing column {col!r}")
        rows = list(reader)
    table = {}
    for col in header:
        vals = [row[col] for row in rows]
        try:
            table[col] = np.array([float(v) for v in vals])
        except ValueError:
            table[col] = np.array(vals, dtype=object)
    return table


def load_meta(path: str) -> dict:
    """Optional CLI sidecar next to the CSV; {} when absent or unreadable."""
    side = Path(path)
    if side.suffix == ".csv":
        side = side.with_suffix(".meta.json")
        try:
            return json.loads(side.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            pass
    return {}


def _label(meta: dict, key: str, fallback: str) -> str:
    if key in meta:
        return f"{key} = {meta[key]}"
    params = meta.get("params", {})
    if key in params:
        return f"{key} = {params[key]}"
    return fallback


def _pairs(inputs):
    if len(inputs) % 2 != 0:
        raise SchemaError("this figure needs inputs in pairs, got "
                          f"{len(inputs)} files")
    return [(inputs[2 * i], inputs[2 * i + 1]) for i in range(len(inputs) // 2)]


def render_fig1(inputs, out):
    """Panels of f(y), one per (H=0, H=1/2) input pair."""
    pairs = _pairs(inputs)
    fig, axes = plt.subplots(1, len(pairs), figsize=(5.0 * len(pairs), 4.0),
                             squeeze=False)
    for ax, (lo_path, hi_path) in zip(axes[0], pairs):
        lo = load_table(lo_path, ODE_COLUMNS)
        hi = load_table(hi_path, ODE_COLUMNS)
        ax.plot(lo["y"], lo["f"], color="tab:blue",
                label=_label(load_meta(lo_path), "H", "H = 0"))
        ax.plot(hi["y"], hi["f"], color="tab:red",
                label=_label(load_meta(hi_path), "H", "H = 1/2"))
        ax.set_title(_label(load_meta(lo_path), "rho", ""))
        ax.set_xlabel("y")
        ax.set_ylabel("f(y)")
        ax.grid(alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=DPI)
    plt.close(fig)


def render_fig2(inputs, out):
    """f(y) across H, grouped into panels by the sidecar's rho when present."""
    groups = {}
    for path in inputs:
        rho = load_meta(path).get("rho")
        groups.setdefault(rho, []).append(path)
    fig, axes = plt.subplots(1, len(groups), figsize=(5.0 * len(groups), 4.0),
                             squeeze=False)
    for ax, (rho, paths) in zip(axes[0], sorted(groups.items(),
                                                key=lambda kv: str(kv[0]))):
        for path in paths:
            t = load_table(path, ODE_COLUMNS)
            ax.plot(t["y"], t["f"], label=_label(load_meta(path), "H", path))
        if rho is not None:
            ax.set_title(f"rho = {rho}")
        ax.set_xlabel("y")
        ax.set_ylabel("f(y)")
        ax.grid(alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=DPI)
    plt.close(fig)


def render_fig3(inputs, out):
    """Numerical f (solid) vs its closed-form approximation (dashed)."""
    pairs = _pairs(inputs)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    colors = ("tab:blue", "tab:red", "tab:green", "tab:orange")
    for (num_path, approx_path), color in zip(pairs, colors):
        num = load_table(num_path, ODE_COLUMNS)
        approx = load_table(approx_path, ODE_COLUMNS)
        ax.plot(num["y"], num["f"], color=color,
                label=_label(load_meta(num_path), "H", num_path))
        ax.plot(approx["y"], approx["f"], color=color, linestyle="--")
    ax.set_xlabel("y")
    ax.set_ylabel("f(y)  (solid: numerical, dashed: approximation)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=DPI)
    plt.close(fig)


def _smile_panel(ax, table, x_col):
    """MC points with vol-SE error bars per tau, formula curve dashed."""
    ok = table["flag"] == "ok"
    taus = np.unique(table["tau"])
    first = table["tau"] == taus[0]
    order = np.argsort(table[x_col][first])
    ax.plot(table[x_col][first][order],
            table["formula_iv_normalized"][first][order],
            color="tab:red", linestyle="--", label="formula")
    markers = ("o", "s", "^", "d", "v", "*")
    for tau, marker in zip(taus, markers):
        sel = ok & (table["tau"] == tau)
        ax.errorbar(table[x_col][sel], table["mc_iv_normalized"][sel],
                    yerr=table["norm_se"][sel], fmt=marker, ms=3.5,
                    lw=0.8, capsize=2, label=f"MC tau = {tau:g}")
    ax.set_xlabel(x_col)
    ax.set_ylabel("normalized implied vol")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)


def render_fig46(inputs, out):
    """Normalized MC smiles vs the formula, x = y; one panel per input."""
    fig, axes = plt.subplots(1, len(inputs), figsize=(5.0 * len(inputs), 4.0),
                             squeeze=False)
    for ax, path in zip(axes[0], inputs):
        table = load_table(path, SMILE_COLUMNS)
        _smile_panel(ax, table, "y")
        meta = load_meta(path)
        ax.set_title(", ".join(filter(None, (_label(meta, "H", ""),
                                             _label(meta, "rho", "")))))
    fig.tight_layout()
    fig.savefig(out, dpi=DPI)
    plt.close(fig)


def render_fig7(inputs, out):
    """Normalized MC smile vs the formula, plotted against k."""
    fig, axes = plt.subplots(1, len(inputs), figsize=(6.0 * len(inputs), 4.5),
                             squeeze=False)
    for ax, path in zip(axes[0], inputs):
        table = load_table(path, FIG7_COLUMNS)
        _smile_panel(ax, table, "k")
        meta = load_meta(path)
        ax.set_title(", ".join(filter(None, (_label(meta, "H", ""),
                                             _label(meta, "rho", "")))))
    fig.tight_layout()
    fig.savefig(out, dpi=DPI)
    plt.close(fig)


RENDERERS = {
    "fig1": render_fig1,
    "fig2": render_fig2,
    "fig3": render_fig3,
    "fig4-6": render_fig46,
    "fig7": render_fig7,
}


def render_figure(figure: str, inputs, out: str) -> None:
    RENDERERS[figure](list(inputs), out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render smile figures from CLI CSV tables.")
    parser.add_argument("--figure", required=True, choices=FIGURE_IDS)
    parser.add_argument("--inputs", required=True,
                        help="comma-separated CSV paths")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    inputs = [p for p in args.inputs.split(",") if p]
    if not inputs:
        print("schema_error: --inputs lists no files", file=sys.stderr)
        return 2
    try:
        render_figure(args.figure, inputs, args.out)
    except SchemaError as exc:
        print(f"schema_error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"io_error: {exc}", file=sys.stderr)
        return 4
    print(f"wrote {args.out}")
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
