"""Conjugated systems h o phi_i o h^{-1} built from a similarity system."""
from __future__ import annotations

import numpy as np

from ..errors import ConstructionRejectedError
from .maps import Conjugated, Deformation, Similarity, conorm, operator_norm
from .system import IFSystem

NORM_INFLATION = 1.01


def deformation_norms(h: Deformation, system: IFSystem, grid_resolution: int):
    """Grid estimates of sup ||h'|| and sup ||(h^{-1})'|| over Omega'.

    The grid lives in the base coordinates of Omega' and is augmented by
    the midplane of the transition band, where g' peaks.
    """
    dom = system.omega_prime_box
    pts = dom.grid(grid_resolution)
    lo, hi = dom.lo[:-1], dom.hi[:-1]
    axes = [np.linspace(a, b, grid_resolution) for a, b in zip(lo, hi)]
    mid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    mid = np.column_stack([mid, np.full(len(mid), 0.5)])
    pts = np.vstack([pts, mid])
    jac = h.jacobian(pts)
    return float(operator_norm(jac).max()), float((1.0 / conorm(jac)).max())


def build_conjugated(base: IFSystem, c2: float, s_low: float, s_up: float, grid_resolution: int = 21):
    """Conjugate a similarity system by h(p) = g(p_last) p.

    Accepts only when sup||h'|| * sup||(h^{-1})'|| (inflated by 1%) is at
    most min(s_up / max||phi_i'||, 1 / (s_low max||(phi_i^{-1})'||)).
    The returned system keeps the base box; its seed set is h(box).
    """
    if base.chart is not None or not all(isinstance(m, Similarity) for m in base.maps):
        raise ValueError("build_conjugated needs a plain similarity system")
    if not s_up**2 < s_low:
        raise ValueError("need s_up^2 < s_low")
    if c2 < 1.0:
        raise ValueError("c2 must be >= 1")
    h = Deformation(c2, dim=base.d)
    max_fwd = max(m.scale for m in base.maps)
    max_inv = max(1.0 / m.scale for m in base.maps)
    if not (max_fwd < s_up and s_low < 1.0 / max_inv):
        raise ValueError("need max||phi'|| < s_up and s_low < 1/max||(phi^-1)'||")
    hn, hin = deformation_norms(h, base, grid_resolution)
    product = hn * hin * NORM_INFLATION
    bound = min(s_up / max_fwd, 1.0 / (s_low * max_inv))
    norms = {
        "sup_h_prime": hn,
        "sup_h_inverse_prime": hin,
        "product": product,
        "bound": bound,
        "sup_g_prime": h.sup_dg,
        "c2": c2,
        "grid_resolution": grid_resolution,
    }
    if not 1.0 <= product <= bound:
        raise ConstructionRejectedError(
            f"norm product {product:.6g} exceeds the admissible bound {bound:.6g}", norms
        )
    maps = tuple(Conjugated(m, h) for m in base.maps)
    return IFSystem(
        maps=maps,
        box=base.box,
        omega_margin=base.omega_margin,
        s_low=s_low,
        s_up=s_up,
        chart=h,
        rho0=base.rho0,
        name=base.name,
        meta={"conjugation": norms},
    )
