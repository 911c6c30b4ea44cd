"""Checks of the standing assumptions on an IFSystem."""
from __future__ import annotations

import numpy as np

from ..errors import SingularMapError
from .maps import Similarity, conorm, operator_norm
from .system import IFSystem, representatives


def validate_f1(system: IFSystem, sample_count: int, seed):
    """Two-sided derivative bounds s_low <= conorm <= norm <= s_up on Omega."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    pts = np.vstack([system.omega_probes(), system.sample_omega(sample_count, rng)])
    worst_upper, worst_lower = 0.0, np.inf
    for fmap in system.maps:
        jac = fmap.jacobian(pts)
        lo = conorm(jac)
        if np.any(lo <= 1e-300):
            raise SingularMapError(f"singular Jacobian for {fmap!r}")
        worst_upper = max(worst_upper, float(operator_norm(jac).max()))
        worst_lower = min(worst_lower, float(lo.min()))
    constants_ok = system.s_up**2 <= system.s_low and 0 < system.s_low and system.s_up < 1
    ok = bool(constants_ok and system.s_low <= worst_lower and worst_upper <= system.s_up)
    return {
        "ok": ok,
        "worst_upper": worst_upper,
        "worst_lower": worst_lower,
        "s_low": system.s_low,
        "s_up": system.s_up,
        "constants_ok": bool(constants_ok),
        "samples": int(len(pts)),
        "seed": seed,
    }


def conformality_defect(jac):
    sv = np.linalg.svd(jac, compute_uv=False)
    return sv[..., 0] / sv[..., -1] - 1.0


def validate_f3(system: IFSystem, depth: int, tol: float):
    """Largest sigma_max/sigma_min - 1 of every map at depth-n representatives."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    pts = representatives(system, depth)
    defect = max(float(conformality_defect(fmap.jacobian(pts)).max()) for fmap in system.maps)
    return {"ok": bool(defect <= tol), "max_defect": defect, "depth": depth, "tol": tol}


def _image_box(fmap: Similarity, box):
    corners = fmap(box.corners())
    return corners.min(axis=0), corners.max(axis=0)


def validate_osc(system: IFSystem, grid_resolution: int):
    """Open set condition on the interior of the seed set.

    Axis-aligned similarities of a box system are decided exactly by box
    intersection. Anything else is sampled: interior grid points are pushed
    through phi_i and pulled back through phi_j; a pull-back landing in the
    open seed set witnesses an overlap. Sampling never certifies.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    exact = system.chart is None and all(
        isinstance(m, Similarity) and m.is_axis_aligned() for m in system.maps
    )
    overlaps = []
    if exact:
        boxes = [_image_box(m, system.box) for m in system.maps]
        for i in range(system.size):
            for j in range(i + 1, system.size):
                lo = np.maximum(boxes[i][0], boxes[j][0])
                hi = np.minimum(boxes[i][1], boxes[j][1])
                if np.all(hi - lo > 1e-12):
                    overlaps.append({"pair": [i, j], "witness": (0.5 * (lo + hi)).tolist()})
        return {"ok": not overlaps, "overlap_pairs": overlaps, "mode": "certified"}

    # interior grid, kept off the boundary
    step = system.box.sides / (grid_resolution + 1)
    inner = system.box.__class__(system.box.lo + step, system.box.hi - step)
    grid = system.from_base(inner.grid(grid_resolution))
    for i in range(system.size):
        img = system.maps[i](grid)
        for j in range(system.size):
            if j == i:
                continue
            back = system.maps[j].inverse(img)
            inside = system.in_seed(back, strict=True, tol=1e-9)
            if np.any(inside):
                pair = sorted((i, j))
                if not any(o["pair"] == pair for o in overlaps):
                    k = int(np.argmax(inside))
                    overlaps.append({"pair": pair, "witness": img[k].tolist()})
    return {"ok": not overlaps, "overlap_pairs": overlaps, "mode": "sampled"}


def ball_fraction_inside(system: IFSystem, x, r, n, rng):
    """Monte-Carlo share of B(x, r) lying in the open seed set.

    Samples come in antithetic pairs (u, -u), which makes half-spaces
    exact.
    """
    d = system.d
    half = max(1, n // 2)
    u = rng.standard_normal((half, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u *= rng.random((half, 1)) ** (1.0 / d)
    pts = np.asarray(x, dtype=float) + r * np.vstack([u, -u])
    return float(np.mean(system.in_seed(pts, strict=True)))


def validate_boundary_density(system: IFSystem, radius_count: int, sample_count: int, seed,
                              mc_points=4000):
    """Infimum over boundary points and radii below rho0 of the interior share.

    Boundary points include every corner of the box (the worst case for a
    box) plus ``sample_count`` random face points.
    """
    rng = np.random.default_rng(seed)
    box = system.box
    d = system.d
    faces = []
    for _ in range(sample_count):
        u = box.sample(1, rng)[0]
        axis = rng.integers(d)
        u[axis] = box.lo[axis] if rng.random() < 0.5 else box.hi[axis]
        faces.append(u)
    base_pts = np.vstack([box.corners()] + ([np.array(faces)] if faces else []))
    pts = system.from_base(base_pts)
    radii = system.rho_zero * np.arange(1, radius_count + 1) / (radius_count + 1)
    ratios = np.array([[ball_fraction_inside(system, p, r, mc_points, rng) for r in radii] for p in pts])
    floor = 2.0 ** (-d)
    eps = 4.0 * np.sqrt((1.0 - floor) / (floor * mc_points))
    min_ratio = float(ratios.min())
    return {
        "ok": bool(min_ratio > 0 and min_ratio >= floor * (1.0 - eps)),
        "min_ratio": min_ratio,
        "floor": floor,
        "eps_mc": float(eps),
        "rho0": system.rho_zero,
        "radii": radii.tolist(),
        "boundary_points": int(len(pts)),
        "seed": seed,
    }
