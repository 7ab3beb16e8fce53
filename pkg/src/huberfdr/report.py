"""Plot series for fitted Huber models and the list of non-null calls.

Four panels summarise a fit: histogram with the fitted marginal density,
QQ pairs against the fitted distribution and a naive normal, the local fdr
curve, and the alternative density.  Each is a ``PlotSeries`` that can be
written as CSV; ``render_svg`` draws the 2x2 layout.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .data import as_zdata
from .distribution import alt_density, density, fdr_local, null_density, quantile

SERIES_KINDS = ("histogram", "density_curve", "qq_pairs", "fdr_curve", "f1_curve")


@dataclass(frozen=True, eq=False)
class PlotSeries:
    kind: str
    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SERIES_KINDS:
            raise ValueError(f"unknown series kind {self.kind!r}")
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.size

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))


@dataclass(frozen=True, eq=False)
class CallTable:
    """Observations sorted by fdr, with ``called = fdr < threshold``."""

    index: np.ndarray
    z: np.ndarray
    u: np.ndarray
    fdr: np.ndarray
    called: np.ndarray
    threshold: float

    def __len__(self):
        return self.index.size

    @property
    def n_called(self):
        return int(np.sum(self.called))

    def rows(self):
        return [
            (int(i), float(z), float(f), bool(c))
            for i, z, f, c in zip(self.index, self.z, self.fdr, self.called)
        ]


def default_grid(p, n_points=512):
    """Equally spaced grid wide enough to show the exponential tails."""
    left = p.mu0 - 6.0 * p.sigma0 * max(1.0, p.ka / 1.5)
    right = p.mu0 + 6.0 * p.sigma0 * max(1.0, p.kb / 1.5)
    return np.linspace(left, right, n_points)


def _grid(p, grid):
    if grid is None:
        return default_grid(p)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 0 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing sequence of at least two points")
    return grid


def freedman_diaconis_bins(z, lo=20, hi=120):
    z = np.asarray(z, dtype=float)
    q75, q25 = np.percentile(z, [75, 25])
    iqr = q75 - q25
    span = np.ptp(z)
    if iqr <= 0 or span <= 0:
        return lo
    width = 2.0 * iqr / z.size ** (1 / 3)
    return int(min(max(math.ceil(span / width), lo), hi))


def histogram_series(data, bins=None):
    """Density-scaled histogram; x holds bin centres, meta the bin edges."""
    z = as_zdata(data).values
    if bins is None:
        bins = freedman_diaconis_bins(z)
    if bins < 5:
        raise ValueError(f"need at least 5 bins, got {bins}")
    heights, edges = np.histogram(z, bins=bins, density=True)
    width = float(edges[1] - edges[0])
    centres = 0.5 * (edges[:-1] + edges[1:])
    return PlotSeries("histogram", centres, heights,
                      meta={"bin_width": width, "bins": int(bins), "n": int(z.size),
                            "edges": [float(e) for e in edges]})


def density_curve(p, grid=None):
    grid = _grid(p, grid)
    return PlotSeries("density_curve", grid, np.atleast_1d(density(grid, p)),
                      meta={"curve_grid": [float(grid[0]), float(grid[-1]), int(grid.size)]})


def qq_points(data, p):
    """QQ pairs against the fitted Huber and against N(mu0, sigma0^2).

    Plotting positions are ``(i - 0.5) / n``.  Returns ``(huber, normal)``.
    """
    z = np.sort(as_zdata(data).values)
    n = z.size
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = np.atleast_1d(quantile(probs, p))
    naive = p.mu0 + p.sigma0 * special.ndtri(probs)
    meta = {"reference_line": "y = x", "plotting_position": "(i - 0.5) / n"}
    huber = PlotSeries("qq_pairs", theo, z, meta=dict(meta, reference="huber"))
    normal = PlotSeries("qq_pairs", naive, z, meta=dict(meta, reference="normal"))
    return huber, normal


def fdr_curve(p, grid=None):
    grid = _grid(p, grid)
    return PlotSeries("fdr_curve", grid, np.atleast_1d(fdr_local(grid, p)),
                      meta={"core": [p.mu0 - p.sigma0 * p.ka, p.mu0 + p.sigma0 * p.kb],
                            "pure_null": p.is_pure_null})


def f1_curve(p, grid=None):
    """Alternative density on the grid; ``extra['scaled']`` is ``(1 - p0) f1``."""
    grid = _grid(p, grid)
    if p.is_pure_null:
        return PlotSeries("f1_curve", [], [],
                          meta={"empty": True,
                                "reason": "p0 = 1: both knots at the boundary, no alternative"})
    f1 = np.atleast_1d(alt_density(grid, p))
    mass = 1.0 - p.p0
    return PlotSeries("f1_curve", grid, f1,
                      meta={"mass_scale": mass, "inverted": True, "empty": False},
                      extra={"scaled": mass * f1})


def null_component_curve(p, grid=None):
    """``p0 * f0`` on the grid, for overlays with ``f1_curve``."""
    grid = _grid(p, grid)
    return p.p0 * np.atleast_1d(null_density(grid, p))


def call_nonnull(data, p, threshold=0.2):
    """Call observations with ``fdr < threshold`` as non-null.

    Rows are sorted by fdr ascending, ties broken by ``|u|`` descending and
    then by original index.
    """
    z = as_zdata(data).values
    u = np.atleast_1d(p.standardize(z))
    fdr = np.atleast_1d(fdr_local(z, p))
    idx = np.arange(z.size)
    order = np.lexsort((idx, -np.abs(u), fdr))
    return CallTable(index=idx[order], z=z[order], u=u[order], fdr=fdr[order],
                     called=fdr[order] < threshold, threshold=float(threshold))


def build_report(data, p, bins=None, grid=None, threshold=0.2):
    """All series plus the call table for one fitted model."""
    grid = _grid(p, grid)
    qq_h, qq_n = qq_points(data, p)
    return {
        "histogram": histogram_series(data, bins),
        "density_curve": density_curve(p, grid),
        "qq_huber": qq_h,
        "qq_normal": qq_n,
        "fdr_curve": fdr_curve(p, grid),
        "f1_curve": f1_curve(p, grid),
        "calls": call_nonnull(data, p, threshold),
    }


def _fmt(v):
    return repr(float(v))


def series_to_csv(series):
    lines = [f"# kind: {series.kind}"]
    for key in sorted(series.meta):
        lines.append(f"# {key}: {json.dumps(series.meta[key], sort_keys=True)}")
    extra = sorted(series.extra)
    lines.append(",".join(["x", "y"] + extra))
    cols = [series.x, series.y] + [np.asarray(series.extra[k]) for k in extra]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def calls_to_csv(table):
    lines = [f"# threshold: {json.dumps(table.threshold)}", "index,z,fdr,called"]
    for i, z, f, c in table.rows():
        lines.append(f"{i},{_fmt(z)},{_fmt(f)},{int(c)}")
    return "\n".join(lines) + "\n"


def read_series_csv(text):
    """Parse the output of ``series_to_csv`` back into a ``PlotSeries``."""
    meta = {}
    kind = None
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            if key == "kind":
                kind = val
            else:
                meta[key] = json.loads(val)
        elif line.strip():
            body.append(line.split(","))
    header, rows = body[0], body[1:]
    cols = np.array(rows, dtype=float).reshape(-1, len(header)).T
    extra = {name: cols[j] for j, name in enumerate(header) if j >= 2}
    return PlotSeries(kind, cols[0], cols[1], meta=meta, extra=extra)


def render_svg(report, title=""):
    """Draw the four-panel layout and return the SVG document as text."""
    import io

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "huberfdr", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(2, 2, figsize=(9, 7))
        ax = axes[0, 0]
        hist = report["histogram"]
        ax.bar(hist.x, hist.y, width=hist.meta["bin_width"], color="0.8", edgecolor="0.5",
               linewidth=0.3)
        dens = report["density_curve"]
        ax.plot(dens.x, dens.y, color="k", linewidth=1)
        ax.set_title("z-values and fitted density")

        ax = axes[0, 1]
        for key, colour in (("qq_normal", "tab:red"), ("qq_huber", "k")):
            s = report[key]
            ax.plot(s.x, s.y, ".", markersize=2, color=colour, label=s.meta["reference"])
        lims = [min(report["qq_huber"].y.min(), report["qq_normal"].x.min()),
                max(report["qq_huber"].y.max(), report["qq_normal"].x.max())]
        ax.plot(lims, lims, color="0.5", linewidth=0.8)
        ax.legend(loc="upper left", frameon=False)
        ax.set_title("QQ plot")

        ax = axes[1, 0]
        fdr = report["fdr_curve"]
        ax.plot(fdr.x, fdr.y, color="k")
        ax.set_ylim(-0.02, 1.05)
        ax.set_title("local fdr")

        ax = axes[1, 1]
        f1 = report["f1_curve"]
        if len(f1):
            ax.plot(f1.x, -f1.extra["scaled"], color="k")
            ax.set_title("(1 - p0) f1, inverted")
        else:
            ax.text(0.5, 0.5, "p0 = 1: no alternative", ha="center", va="center",
                    transform=ax.transAxes)
            ax.set_title("f1")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
