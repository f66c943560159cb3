"""Static figures rendered from experiment CSV files (needs matplotlib)."""
from __future__ import annotations

import os

import numpy as np

from .experiments import read_csv

# experiment -> (x column, y columns, grouping columns)
LINE_PLOTS = {
    "fig1a": ("theta", ("j_star",), ("u_bar",)),
    "fig1b": ("theta", ("j_star",), ("u_bar",)),
    "fig3a": ("m", ("j_star",), ("kappa", "u_bar")),
    "fig3b": ("n", ("j_star",), ("kappa", "u_bar")),
    "bell": ("U", ("j_phi_plus", "j_psi_plus", "j_psi_minus"), ("local",)),
    "asymptotics": ("N", ("product", "ghz", "css", "dicke_center"), ()),
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _groups(table, cols):
    if not cols:
        yield "", np.ones(table.rows.shape[0], dtype=bool)
        return
    keys = np.unique(np.column_stack([table.column(c) for c in cols]), axis=0)
    for key in keys:
        mask = np.all(np.column_stack([table.column(c) for c in cols]) == key, axis=1)
        yield ", ".join(f"{c}={v:g}" for c, v in zip(cols, key)), mask


def plot_csv(path, out_path=None) -> str:
    """Render one experiment CSV to PNG next to it (or at ``out_path``)."""
    plt = _pyplot()
    table = read_csv(path)
    exp = table.meta.get("experiment", "")
    out_path = out_path or path[:-4] + ".png"
    fig, ax = plt.subplots(figsize=(6, 4))
    if exp in LINE_PLOTS:
        x, ys, groups = LINE_PLOTS[exp]
        for label, mask in _groups(table, groups):
            for y in ys:
                name = f"{y} {label}".strip() if len(ys) > 1 else label or y
                ax.plot(table.column(x)[mask], table.column(y)[mask], marker=".", label=name)
        ax.set_xlabel(x)
        ax.set_ylabel("J*")
        if exp == "asymptotics":
            ax.set_xscale("log")
    elif exp in ("fig2a", "fig2b"):
        ub = table.column("u_bar")
        sel = ub == ub.min()
        th, ph, j = (table.column(c)[sel] for c in ("theta", "phi", "j_star"))
        nt, npn = np.unique(th).size, np.unique(ph).size
        im = ax.pcolormesh(np.unique(ph), np.unique(th), j.reshape(nt, npn), shading="auto")
        fig.colorbar(im, ax=ax, label=f"J* (u_bar={ub.min():g})")
        ax.set_xlabel("phi")
        ax.set_ylabel("theta")
    elif exp == "fig1c" and table.meta.get("table") == "timeseries":
        for label, mask in _groups(table, ("gamma", "beta")):
            ax.plot(table.column("t")[mask], table.column("j_mean")[mask], label=f"J_t {label}")
        ax.set_xlabel("t")
        ax.set_ylabel("J_t")
    elif exp == "fig1c" or exp == "simulate":
        x, y = ("gamma", "j_inf") if exp == "fig1c" else ("t", "j_mean")
        ax.plot(table.column(x), table.column(y), marker="o", label=y)
        if exp == "fig1c":
            ax.plot(table.column(x), table.column("j_star"), marker="s", label="J*")
        ax.set_xlabel(x)
    else:
        plt.close(fig)
        raise ValueError(f"no plot recipe for experiment {exp!r}")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
