"""PNG figures for CLI reports, drawn off-screen on the Agg canvas."""
from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.patches import Circle

DPI = 120


def _new(width=6.0, height=4.5, projection=None):
    fig = Figure(figsize=(width, height), dpi=DPI)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1, projection=projection)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png")
    return str(path)


def point_cloud(points, weights, path, title=""):
    """Scatter of cylinder representatives, coloured by weight."""
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    d = points.shape[1]
    if d >= 3:
        fig, ax = _new(projection="3d")
        sc = ax.scatter(points[:, 0], points[:, 1], points[:, 2], c=weights, s=2, cmap="viridis")
        ax.set_zlabel("x3")
    else:
        fig, ax = _new()
        ys = points[:, 1] if d == 2 else np.zeros(len(points))
        sc = ax.scatter(points[:, 0], ys, c=weights, s=3, cmap="viridis", linewidths=0)
        ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2" if d >= 2 else "")
    fig.colorbar(sc, ax=ax, label="weight")
    ax.set_title(title)
    return _save(fig, path)


def dimension_brackets(depths, lows, highs, path, reference=None, title=""):
    """t_minus and t_plus against depth."""
    fig, ax = _new()
    ax.fill_between(depths, lows, highs, alpha=0.25, label="bracket")
    ax.plot(depths, lows, "o-", label="t_minus")
    ax.plot(depths, highs, "s-", label="t_plus")
    if reference is not None:
        ax.axhline(reference, color="k", lw=0.8, ls="--", label=f"t = {reference:.6f}")
    ax.set_xlabel("depth n")
    ax.set_ylabel("t")
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, path)


def weak_tangent(results, path, title=""):
    """Quotient m(B(a,r) minus tube) / r^t against r, one curve per delta."""
    fig, ax = _new()
    for res in results:
        r, q = np.array(res["ratios"]).T
        ax.plot(r, q, "o-", label=f"delta = {res['delta']:g}")
    ax.set_xscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("ratio")
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, path)


def ahlfors(radii, ratios, floor, path, title=""):
    fig, ax = _new()
    ax.scatter(radii, ratios, s=8, label="m(B(x,r)) / r^t")
    ax.axhline(floor, color="r", lw=1, label=f"floor {floor:.4g}")
    ax.set_xscale("log")
    ax.set_xlabel("r")
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, path)


def _draw_plane(ax, apex, plane, r, **kw):
    v = np.asarray(plane, dtype=float)[:, 0]
    seg = np.array([apex - r * v, apex + r * v])
    ax.plot(seg[:, 0], seg[:, 1], **kw)


def verdict(points, report, path, title=""):
    """Limit-set cloud with the classifier's evidence.

    Planes are drawn for d = 2 and lines in the plane; witness balls are
    drawn as circles (their first two coordinates otherwise).
    """
    points = np.asarray(points, dtype=float)
    fig, ax = _new()
    ys = points[:, 1] if points.shape[1] > 1 else np.zeros(len(points))
    ax.scatter(points[:, 0], ys, s=1, c="0.5", linewidths=0)
    evidence = report.get("evidence", {})
    for cert in evidence.get("certificates", [])[:1]:
        c = cert["certificate"]
        for item in c["assignments"]:
            a = np.asarray(item["apex"])
            ax.plot(a[0], a[1] if len(a) > 1 else 0.0, "b^", ms=5)
            if len(a) == 2 and len(item["plane"][0]) == 1:
                _draw_plane(ax, a, item["plane"], c["r"], color="b", lw=0.8)
    w = evidence.get("witness")
    if w:
        a = np.asarray(w["apex"])
        ctr = np.asarray(w["center"])
        ax.plot(a[0], a[1], "r^", ms=6, label="apex")
        ax.add_patch(Circle((a[0], a[1]), w["r"], fill=False, ls="--", color="r", lw=0.8))
        ax.plot(ctr[0], ctr[1], "ko", ms=4, label="witness centre")
        if len(a) == 2:
            _draw_plane(ax, a, w["plane"], w["r"], color="r", lw=0.8)
        ax.legend(frameon=False, loc="best")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(f"{title} {report.get('kind', '')}".strip())
    return _save(fig, path)
