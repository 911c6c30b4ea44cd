"""Sampled bounded-distortion constants and ball-inclusion checks."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .maps import conorm, operator_norm
from .system import IFSystem, SUP_INFLATION, _diameter, compose_batch, words_sup_norms

#: safety factor on sampled image diameters of non-similarity systems
DIAMETER_INFLATION = 1.02


@dataclass(frozen=True)
class DistortionConstants:
    c_hat: float
    k0_hat: float
    d_hat: float
    depth: int
    sample_count: int

    def inflated(self, factor=1.05):
        return replace(self, k0_hat=self.k0_hat * factor)

    def as_dict(self):
        return {
            "c_hat": self.c_hat,
            "k0_hat": self.k0_hat,
            "d_hat": self.d_hat,
            "depth": self.depth,
            "sample_count": self.sample_count,
        }


def _sample_words(system, depth, count, rng):
    """All length-1 words plus random words of every length up to depth."""
    groups = {1: np.arange(system.size)[:, None]}
    per_len = max(1, count // depth)
    for length in range(2, depth + 1):
        groups[length] = rng.integers(0, system.size, size=(per_len, length))
    return groups


def distortion_constants(system: IFSystem, depth: int, sample_count: int, seed) -> DistortionConstants:
    """Estimate c (Falconer), K0 and D by sampling words and point pairs."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if system.is_similarity:
        return DistortionConstants(0.0, 1.0, float(max(1.0, system.seed_diameter)), depth, sample_count)

    rng = np.random.default_rng(seed)
    n_pts = 8
    c_hat, k0_hat, d_hat = 0.0, 1.0, 1.0
    seed_grid = system.from_base(np.vstack([system.box.corners(), system.box.grid(4)]))
    for length, words in _sample_words(system, depth, sample_count, rng).items():
        m = len(words)
        x = system.sample_omega(m * n_pts, rng).reshape(m, n_pts, system.d)
        # half the partners are close to x so c sees small separations
        far = system.sample_omega(m * n_pts, rng).reshape(m, n_pts, system.d)
        scale = system.omega_margin * 10.0 ** rng.uniform(-4, 0, size=(m, n_pts, 1))
        near = x + scale * rng.standard_normal((m, n_pts, system.d))
        keep = system.in_omega(near)
        near = np.where(keep[..., None], near, far)
        y = np.concatenate([far[:, : n_pts // 2], near[:, n_pts // 2 :]], axis=1)

        _, jx = compose_batch(system, words, x)
        _, jy = compose_batch(system, words, y)
        nx, ny = operator_norm(jx), operator_norm(jy)
        cx, cy = conorm(jx), conorm(jy)
        sep = np.linalg.norm(x - y, axis=-1)
        diff = operator_norm(jx - jy)
        ok = sep > 0
        c_hat = max(c_hat, float(np.max(diff[ok] / (nx[ok] * sep[ok]), initial=0.0)))
        k0_hat = max(k0_hat, float(np.max(nx / cy)), float(np.max(ny / cx)))

        sup = words_sup_norms(system, words)
        imgs, _ = compose_batch(system, words, np.broadcast_to(seed_grid, (m,) + seed_grid.shape))
        for k in range(m):
            d_hat = max(d_hat, _diameter(imgs[k]) * DIAMETER_INFLATION / sup[k])
    return DistortionConstants(float(c_hat), float(k0_hat), float(d_hat), depth, sample_count)


def _unit_vectors(rng, shape, d):
    v = rng.standard_normal(shape + (d,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def deep_points(system: IFSystem, count, rng, length=12):
    """Random points of E (deep cylinder images of the anchor) with codes."""
    codes = rng.integers(0, system.size, size=(count, length))
    pts, _ = compose_batch(system, codes, np.broadcast_to(system.anchor, (count, system.d)))
    return pts, codes


def check_ball_inclusions(system: IFSystem, constants: DistortionConstants, trial_count: int, seed,
                          boundary_samples=48, rel_tol=1e-9):
    """Test both ball inclusions of the distortion lemma on random trials.

    (1) sphere samples of B(x, r) map outside B(phi(x), |phi'(x)| r / K0),
    so that ball sits inside phi(B(x, r)); x is a point of E.
    (2) samples of B(x, r) map into B(phi(x), ||phi'|| r); x is in X.
    Returns ``{"violations": [...], "trials": n}``.
    """
    rng = np.random.default_rng(seed)
    depth = max(1, constants.depth)
    violations = []
    lengths = rng.integers(1, depth + 1, size=trial_count)
    r_e = system.dist_e_boundary
    r_x = system.dist_e_boundary
    for length in np.unique(lengths):
        m = int(np.sum(lengths == length))
        words = rng.integers(0, system.size, size=(m, length))
        sup = words_sup_norms(system, words)

        x, _ = deep_points(system, m, rng)
        r = r_e * rng.uniform(0.01, 0.999, size=m)
        sphere = x[:, None, :] + r[:, None, None] * _unit_vectors(rng, (m, boundary_samples), system.d)
        pts = np.concatenate([x[:, None, :], sphere], axis=1)
        img, jac = compose_batch(system, words, pts)
        inner = operator_norm(jac[:, 0]) * r / constants.k0_hat
        dist = np.linalg.norm(img[:, 1:] - img[:, :1], axis=-1).min(axis=1)
        for k in np.nonzero(dist < inner * (1 - rel_tol))[0]:
            violations.append({
                "kind": "inner", "word": words[k].tolist(), "x": x[k].tolist(),
                "r": float(r[k]), "claimed": float(inner[k]), "observed": float(dist[k]),
            })

        x2 = system.sample_seed(m, rng)
        r2 = r_x * rng.uniform(0.01, 0.999, size=m)
        u = _unit_vectors(rng, (m, boundary_samples), system.d)
        rad = rng.random((m, boundary_samples, 1)) ** (1.0 / system.d)
        rad[:, : boundary_samples // 4] = 1.0
        ball = x2[:, None, :] + r2[:, None, None] * rad * u
        pts2 = np.concatenate([x2[:, None, :], ball], axis=1)
        img2, _ = compose_batch(system, words, pts2)
        reach = np.linalg.norm(img2[:, 1:] - img2[:, :1], axis=-1).max(axis=1)
        outer = sup * r2
        for k in np.nonzero(reach > outer * (1 + rel_tol))[0]:
            violations.append({
                "kind": "outer", "word": words[k].tolist(), "x": x2[k].tolist(),
                "r": float(r2[k]), "claimed": float(outer[k]), "observed": float(reach[k]),
            })
    return {"violations": violations, "trials": int(trial_count)}


__all__ = [
    "DistortionConstants",
    "distortion_constants",
    "check_ball_inclusions",
    "deep_points",
    "SUP_INFLATION",
]
