"""Tabular emission (json, csv, pretty) and optional matplotlib figures."""

import csv
import io
import json
import math


def fmt(x, digits=10):
    """Pretty-table number; at least 6 significant digits survive."""
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.{digits}g}"
    return str(x)


def _csv_value(x):
    # repr keeps every bit of a float
    return repr(x) if isinstance(x, float) else x


def to_json(payload):
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_value(v) for v in row])
    return buf.getvalue()


def to_pretty(header, rows):
    cells = [[str(h) for h in header]] + [[fmt(v) for v in row] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render(fmt_name, payload, header, rows):
    if fmt_name == "json":
        return to_json(payload)
    if fmt_name == "csv":
        return to_csv(header, rows)
    return to_pretty(header, rows)


# --- figures --------------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_sweep(path, alphas, values, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(alphas, values, marker="o")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel(r"$\alpha_l$")
    ax.set_ylabel(r"$\phi_0$")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_sequence(path, alphas, expansions):
    plt = _pyplot()
    layers = range(1, len(alphas) + 1)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.5))
    a1.plot(layers, alphas, marker="o")
    a1.set_xlabel("layer")
    a1.set_ylabel(r"$\alpha_i$")
    a2.plot(layers, expansions, marker="o")
    a2.set_xlabel("layer")
    a2.set_ylabel(r"$\alpha_i/\alpha_{i-1}$")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_phase(path, alphas, freqs, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(alphas, freqs, marker="s")
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel(r"$\alpha_l$")
    ax.set_ylabel("witness frequency")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
