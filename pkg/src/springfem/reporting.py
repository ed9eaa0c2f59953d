"""Report generation: per-spring CSV, Poisson-ratio sweeps, SVG colormaps.

All delimited output uses 17 significant digits so repeated runs with
the same inputs are byte-identical.  Sweep percentages are produced by
the same classification code path as the per-spring reports, so a
recount from the per-spring CSV always matches the sweep CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from matplotlib.figure import Figure

from .analysis import (
    MeshAnalysis,
    analyze_mesh,
    classify_springs,
    decompositions_all_cached,
)
from .elasticity import (
    IsotropicMaterial,
    material_from_poisson,
    plane_stress_material,
)
from .errors import MaterialError, MeshError, SpringFemError
from .mesh import Mesh, spring_adjacency

#: Ratio grid used by sweeps unless overridden: -0.95 to 0.49 in steps
#: of 0.01, built from integers so grid points like -0.5 and 0.25 are
#: the exact floats a user would type.
DEFAULT_NU_GRID = (np.arange(145) - 95) / 100.0
DEFAULT_NU_GRID.setflags(write=False)

SPRINGS_CSV_COLUMNS = (
    "i,j,interior_pair,gamma,eta_min,zeta_min,pd,angle_ok,"
    "theta_max_deg,nu_crit_lo,nu_crit_hi,sym_residual"
)

SWEEP_CSV_COLUMNS = "mesh,nu,springs_counted,springs_pd,percent_pd"


def _f(x: float) -> str:
    return f"{x:.17g}"


def springs_csv(analysis: MeshAnalysis) -> str:
    """One CSV row per spring, ordered by (i, j).

    Boolean columns are written as 0/1; an empty critical interval is
    encoded by nu_crit_lo > nu_crit_hi.
    """
    lines = [SPRINGS_CSV_COLUMNS]
    theta_deg = np.degrees(analysis.theta_max)
    for s, p in enumerate(analysis.pairs):
        lines.append(
            ",".join(
                [
                    str(p.i),
                    str(p.j),
                    str(int(p.interior_pair)),
                    _f(analysis.gamma[s]),
                    _f(analysis.eig_a[s, -1]),
                    _f(analysis.eig_k[s, -1]),
                    str(int(analysis.pd[s])),
                    str(int(analysis.angle_ok[s])),
                    _f(theta_deg[s]),
                    _f(analysis.nu_lo[s]),
                    _f(analysis.nu_hi[s]),
                    _f(analysis.sym_residual[s]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def poisson_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Ratio grid lo, lo+step, ... up to hi (inclusive within rounding).

    Each point is computed as lo + k*step in one multiplication, never
    by accumulation, so grids are reproducible.
    """
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)) or step <= 0.0:
        raise ValueError(f"bad grid parameters lo={lo}, hi={hi}, step={step}")
    if hi < lo:
        return np.empty(0)
    count = int(math.floor((hi - lo) / step + 1e-6)) + 1
    return lo + np.arange(count) * step


@dataclass(frozen=True)
class SweepResult:
    """Positive-definite spring counts of one mesh across a ratio grid.

    ``nu`` holds the grid points actually evaluated (under plane stress,
    ratios at or below -1/2 admit no reduced material and are skipped).
    ``all_gamma_positive`` is true when every counted spring has a
    positive trace of its geometric part, which makes the percentage a
    nonincreasing function of the ratio.
    """

    label: str
    count_all: bool
    plane_stress: bool
    nu: np.ndarray
    counted: np.ndarray
    pd_count: np.ndarray
    percent: np.ndarray
    all_gamma_positive: bool


def sweep_mesh(
    mesh: Mesh,
    label: str,
    nu_values=None,
    count_all: bool = False,
    plane_stress: bool = False,
) -> SweepResult:
    """Count positive-definite springs at every ratio of a grid.

    Only pairs with an interior endpoint are counted unless
    ``count_all`` is set.  The shear modulus is fixed at 1: at a given
    ratio the classification is invariant under scaling it.
    """
    if nu_values is None:
        nu_values = DEFAULT_NU_GRID
    nu_values = np.asarray(nu_values, dtype=float)
    if nu_values.size == 0:
        raise ValueError("empty ratio grid")
    if plane_stress and mesh.dim != 2:
        raise MaterialError("plane stress applies to 2D meshes only")

    pairs = spring_adjacency(mesh)
    a_stack, gamma = decompositions_all_cached(mesh, pairs)
    mask = (
        np.ones(len(pairs), dtype=bool)
        if count_all
        else np.array([p.interior_pair for p in pairs])
    )
    n_counted = int(mask.sum())

    rows_nu, rows_pd = [], []
    for nu in nu_values:
        material = material_from_poisson(float(nu))
        if plane_stress:
            try:
                material = plane_stress_material(material)
            except MaterialError:
                continue
        pd, _, _ = classify_springs(a_stack, gamma, material)
        rows_nu.append(float(nu))
        rows_pd.append(int(np.count_nonzero(pd & mask)))

    counted = np.full(len(rows_nu), n_counted, dtype=np.int64)
    pd_count = np.array(rows_pd, dtype=np.int64)
    percent = 100.0 * pd_count / counted if n_counted else np.zeros(len(rows_nu))
    return SweepResult(
        label=label,
        count_all=count_all,
        plane_stress=plane_stress,
        nu=np.array(rows_nu),
        counted=counted,
        pd_count=pd_count,
        percent=percent,
        all_gamma_positive=bool(np.all(gamma[mask] > 0.0)) if n_counted else False,
    )


def sweep_csv(results) -> str:
    """Combine sweep results into one CSV, one row per (mesh, ratio)."""
    lines = [SWEEP_CSV_COLUMNS]
    for res in results:
        for k in range(res.nu.size):
            lines.append(
                ",".join(
                    [
                        res.label,
                        _f(res.nu[k]),
                        str(int(res.counted[k])),
                        str(int(res.pd_count[k])),
                        _f(res.percent[k]),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def sweep_figure(results, path, dpi: int = 150) -> None:
    """Render the sweep curves (percent pd vs ratio) to an image file."""
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot()
    for res in results:
        ax.plot(res.nu, res.percent, marker=".", markersize=4, label=res.label)
    ax.set_xlabel("Poisson ratio")
    ax.set_ylabel("springs positive definite (%)")
    ax.set_ylim(-4.0, 104.0)
    ax.grid(True, alpha=0.3)
    if results:
        ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)


# ---------------------------------------------------------------------------
# SVG colormap


def _diverging_color(t: float) -> str:
    """Map t in [-1, 1] to red (negative) / white (zero) / blue (positive)."""
    t = min(1.0, max(-1.0, t))
    if t < 0.0:
        level = round(255.0 * (1.0 + t))
        return f"rgb(255,{level},{level})"
    level = round(255.0 * (1.0 - t))
    return f"rgb({level},{level},255)"


def colormap_svg(mesh: Mesh, material: IsotropicMaterial, plane_stress: bool = False) -> str:
    """Draw every spring as a line colored by its smallest eigenvalue.

    The color value is the smallest eigenvalue of the spring constant
    divided by lam + mu, normalized per mesh by the largest magnitude m:
    red below zero, white at zero, blue above.  2D meshes only.
    """
    if mesh.dim != 2:
        raise MeshError("colormap rendering requires a 2D mesh")
    analysis = analyze_mesh(mesh, material, plane_stress=plane_stress)
    comp = analysis.material
    values = analysis.margin / (comp.lam + comp.mu)
    m = float(np.max(np.abs(values))) if values.size else 0.0
    label = f"nu = {material.poisson:.6g}"
    if plane_stress:
        label += " (plane stress)"
    return _segments_svg(mesh, analysis.pairs, values, m, label)


def _segments_svg(mesh: Mesh, pairs, values, m: float, label: str) -> str:
    """Shared SVG builder: one <line> per pair, plus a gradient legend."""
    if m <= 0.0:
        raise SpringFemError(
            "colormap normalization is degenerate: every spring value is zero"
        )
    xy = mesh.nodes
    min_x, min_y = xy.min(axis=0)
    max_x, max_y = xy.max(axis=0)
    span = max(max_x - min_x, max_y - min_y)
    scale = 800.0 / span

    def sx(x):
        return (x - min_x) * scale

    def sy(y):
        return (max_y - y) * scale

    width = (max_x - min_x) * scale
    height = (max_y - min_y) * scale
    margin = 0.05 * max(width, height)
    legend_h = 90.0
    vb = (
        f"{-margin:.2f} {-margin:.2f} "
        f"{width + 2 * margin:.2f} {height + 2 * margin + legend_h:.2f}"
    )

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vb}">',
        "<defs>",
        '<linearGradient id="scale" x1="0" y1="0" x2="1" y2="0">',
        '<stop offset="0%" stop-color="rgb(255,0,0)"/>',
        '<stop offset="50%" stop-color="rgb(255,255,255)"/>',
        '<stop offset="100%" stop-color="rgb(0,0,255)"/>',
        "</linearGradient>",
        "</defs>",
        f'<rect x="{-margin:.2f}" y="{-margin:.2f}" width="{width + 2 * margin:.2f}" '
        f'height="{height + 2 * margin + legend_h:.2f}" fill="white"/>',
    ]
    for s, p in enumerate(pairs):
        color = _diverging_color(float(values[s]) / m)
        x1, y1 = sx(xy[p.i, 0]), sy(xy[p.i, 1])
        x2, y2 = sx(xy[p.j, 0]), sy(xy[p.j, 1])
        out.append(
            f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
            f'stroke="{color}" stroke-width="1.5" stroke-linecap="round"/>'
        )

    bar_y = height + margin + 30.0
    bar_w = 0.55 * width
    bar_x = 0.5 * (width - bar_w)
    out += [
        f'<rect x="{bar_x:.2f}" y="{bar_y:.2f}" width="{bar_w:.2f}" height="18" '
        'fill="url(#scale)" stroke="black" stroke-width="0.5"/>',
        f'<text x="{bar_x:.2f}" y="{bar_y + 38:.2f}" font-size="14" '
        f'font-family="sans-serif" text-anchor="middle">{-m:.4g}</text>',
        f'<text x="{bar_x + 0.5 * bar_w:.2f}" y="{bar_y + 38:.2f}" font-size="14" '
        'font-family="sans-serif" text-anchor="middle">0</text>',
        f'<text x="{bar_x + bar_w:.2f}" y="{bar_y + 38:.2f}" font-size="14" '
        f'font-family="sans-serif" text-anchor="middle">{m:.4g}</text>',
        f'<text x="{0.5 * width:.2f}" y="{bar_y - 10:.2f}" font-size="14" '
        f'font-family="sans-serif" text-anchor="middle">{label}</text>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"
