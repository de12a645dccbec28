"""The five figure kinds regenerated from simulation CSVs.

1. hysteresis        forward/backward magnetization branches vs bias
2. phase_diagram     order-parameter heatmap with the fitted critical curve
3. stability         largest fluctuation eigenvalue over momentum
4. island_maps       per-cluster magnetization snapshots of an island run
5. relaxation        relaxation times vs island size and velocity samples

Fitted constants (critical curve, velocities, slopes) are overlay
parameters supplied by the caller; nothing is refit here.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .recipes import FigureRecipe, load_columns

_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}


def render(recipe: FigureRecipe) -> Path:
    """Render one recipe to its output path; idempotent for fixed inputs."""
    out = Path(recipe.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig = _RENDERERS[recipe.kind](recipe)
    fig.savefig(out, **_SAVE_KW)
    plt.close(fig)
    return out


def _render_hysteresis(recipe: FigureRecipe):
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    cmap = plt.get_cmap("coolwarm")
    for path in recipe.inputs:
        cols = load_columns(path, ("T", "h", "mz_fwd", "mz_bwd"))
        t_values = sorted(set(cols["T"]))
        for t in t_values:
            sel = [i for i, tv in enumerate(cols["T"]) if tv == t]
            h = np.array([cols["h"][i] for i in sel])
            order = np.argsort(h)
            fwd = np.array([cols["mz_fwd"][i] for i in sel])[order]
            bwd = np.array([cols["mz_bwd"][i] for i in sel])[order]
            frac = 0.5 if len(t_values) == 1 else t_values.index(t) / (len(t_values) - 1)
            color = cmap(frac)
            h_sorted = h[order]
            ax.plot(h_sorted, fwd, "o-", color=color, ms=4, label=f"T={t:g}")
            ax.plot(h_sorted, bwd, "o--", color=color, ms=4, markerfacecolor="none")
    ax.set_xlabel("bias h")
    ax.set_ylabel(r"$m_z$")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return fig


def _render_phase_diagram(recipe: FigureRecipe):
    cols = load_columns(recipe.inputs[0], ("T", "h", "dmz"))
    t_vals = np.array(sorted(set(cols["T"])))
    h_vals = np.array(sorted(set(cols["h"])))
    grid = np.full((t_vals.size, h_vals.size), np.nan)
    t_idx = {t: i for i, t in enumerate(t_vals)}
    h_idx = {h: i for i, h in enumerate(h_vals)}
    for t, h, d in zip(cols["T"], cols["h"], cols["dmz"]):
        grid[t_idx[t], h_idx[h]] = d
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    mesh = ax.pcolormesh(h_vals, t_vals, grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=r"$\Delta m_z$")
    t_star = recipe.params.get("t_star")
    r = recipe.params.get("r")
    if t_star is not None and r is not None:
        h_fine = np.linspace(h_vals.min(), h_vals.max(), 257)
        t_c = r**2 * (1.0 - np.abs(h_fine)) ** 2 + t_star
        inside = (t_c >= t_vals.min()) & (t_c <= t_vals.max())
        ax.plot(h_fine[inside], t_c[inside], "r--", lw=1.5)
    ax.set_xlabel("bias h")
    ax.set_ylabel("noise amplitude T")
    fig.tight_layout()
    return fig


def _render_stability(recipe: FigureRecipe):
    cols = load_columns(recipe.inputs[0], ("kx", "ky", "mu"))
    kx = np.array(cols["kx"])
    ky = np.array(cols["ky"])
    mu = np.array(cols["mu"])
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ky_vals = np.unique(ky)
    if ky_vals.size == 1:
        ax.plot(kx, mu, "-o", ms=3)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xlabel(r"$k_x$")
        ax.set_ylabel(r"$\mu_k$")
    else:
        kx_vals = np.unique(kx)
        grid = np.full((ky_vals.size, kx_vals.size), np.nan)
        kxi = {v: i for i, v in enumerate(kx_vals)}
        kyi = {v: i for i, v in enumerate(ky_vals)}
        for x, y, m in zip(kx, ky, mu):
            grid[kyi[y], kxi[x]] = m
        mesh = ax.pcolormesh(kx_vals, ky_vals, grid, shading="nearest", cmap="magma")
        fig.colorbar(mesh, ax=ax, label=r"$\mu_k$")
        ax.set_xlabel(r"$k_x$")
        ax.set_ylabel(r"$k_y$")
    fig.tight_layout()
    return fig


def _render_island_maps(recipe: FigureRecipe):
    n = len(recipe.inputs)
    ncols = min(n, 5)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(2.2 * ncols, 2.2 * nrows), squeeze=False)
    titles = recipe.params.get("times", [None] * n)
    for k, path in enumerate(recipe.inputs):
        cols = load_columns(path, ("cx", "cy", "mz_cluster"))
        cx = np.array(cols["cx"], dtype=int)
        cy = np.array(cols["cy"], dtype=int)
        mz = np.array(cols["mz_cluster"])
        grid = np.full((cy.max() + 1, cx.max() + 1), np.nan)
        grid[cy, cx] = mz
        ax = axes[k // ncols][k % ncols]
        ax.imshow(grid, origin="lower", vmin=-1, vmax=1, cmap="RdBu_r")
        if titles[k] is not None:
            ax.set_title(f"t = {titles[k]:g}", fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    return fig


def _render_relaxation(recipe: FigureRecipe):
    panels = 2 if len(recipe.inputs) > 1 else 1
    fig, axes = plt.subplots(1, panels, figsize=(4.6 * panels, 3.6), squeeze=False)
    ax = axes[0][0]
    cols = load_columns(recipe.inputs[0], ("ell_down", "tau"))
    sizes = np.array(cols["ell_down"])
    taus = np.array(cols["tau"])
    ax.plot(sizes, taus, "s", ms=6)
    v = recipe.params.get("v")
    if v:
        xs = np.linspace(sizes.min(), sizes.max(), 64)
        intercept = recipe.params.get("tau_intercept", 0.0)
        ax.plot(xs, intercept + np.sqrt(2.0) * xs / v, "k--", lw=1)
    ax.set_xlabel(r"island size $\ell_\downarrow$")
    ax.set_ylabel(r"relaxation time $\tau$")
    if panels == 2:
        ax2 = axes[0][1]
        cols2 = load_columns(recipe.inputs[1], ("axis", "value", "v"))
        markers = {"T": ("o", "tab:red"), "omega": ("^", "tab:green")}
        for axis_name, (marker, color) in markers.items():
            sel = [i for i, a in enumerate(cols2["axis"]) if a == axis_name]
            if not sel:
                continue
            x = np.array([cols2["value"][i] for i in sel])
            y = np.array([cols2["v"][i] for i in sel])
            ax2.plot(x, y, marker, color=color, label=axis_name)
            slope_key = {"T": "thermal_slope", "omega": "drive_slope"}[axis_name]
            icept_key = {"T": "intercept_thermal_fit", "omega": "intercept_drive_fit"}[axis_name]
            if slope_key in recipe.params and icept_key in recipe.params:
                xs = np.linspace(x.min(), x.max(), 32)
                ax2.plot(
                    xs,
                    recipe.params[icept_key] + recipe.params[slope_key] * xs,
                    "--",
                    color=color,
                    lw=1,
                )
        ax2.set_xlabel("T or drive amplitude")
        ax2.set_ylabel("signed velocity")
        ax2.legend(fontsize=8)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "hysteresis": _render_hysteresis,
    "phase_diagram": _render_phase_diagram,
    "stability": _render_stability,
    "island_maps": _render_island_maps,
    "relaxation": _render_relaxation,
}
