"""Finite-depth conformal measures, pressure brackets and the Ahlfors floor."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import CapacityError, PreconditionError, ResolutionError
from .ifs.distortion import DistortionConstants, deep_points
from .ifs.maps import operator_norm
from .ifs.system import (
    ENUMERATION_CAP,
    IFSystem,
    check_word,
    compose,
    compose_batch,
    level_inf_norms,
    level_sup_norms,
    level_table,
    representatives,
    words_sup_norms,
)
from .symbolic import word_index, words_array

BISECT_MAX_ITER = 200
#: smallest usable radius, in units of the largest cylinder radius bound
RESOLUTION_FACTOR = 8.0


@dataclass(frozen=True, eq=False)
class CylinderWeights:
    """Normalised depth-n cylinder weights approximating the conformal measure."""

    system: IFSystem = field(repr=False)
    depth: int
    t: float
    weights: np.ndarray
    anchor_points: np.ndarray
    radius_bounds: np.ndarray

    @property
    def words(self):
        return words_array(self.system.size, self.depth)

    @property
    def entries(self):
        return {tuple(w): float(x) for w, x in zip(self.words.tolist(), self.weights)}

    @property
    def resolution(self):
        return RESOLUTION_FACTOR * float(self.radius_bounds.max())

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class DimensionBracket:
    t_minus: float
    t_plus: float
    depth: int
    method: str
    moran_root: float | None = None

    @property
    def width(self):
        return self.t_plus - self.t_minus

    @property
    def midpoint(self):
        return 0.5 * (self.t_minus + self.t_plus)

    def as_dict(self):
        out = {
            "t_minus": self.t_minus,
            "t_plus": self.t_plus,
            "width": self.width,
            "midpoint": self.midpoint,
            "depth": self.depth,
            "method": self.method,
        }
        if self.moran_root is not None:
            out["moran_root"] = self.moran_root
        return out


@dataclass(frozen=True)
class AhlforsReport:
    c_formula: float
    min_observed_ratio: float
    samples: int
    radii: dict
    passed: bool
    t: float
    worst: dict

    def as_dict(self):
        return {
            "c_formula": self.c_formula,
            "min_observed_ratio": self.min_observed_ratio,
            "samples": self.samples,
            "radii": self.radii,
            "passed": self.passed,
            "t": self.t,
            "worst": self.worst,
        }


def _log_norms(system: IFSystem, n, constants: DistortionConstants | None = None):
    if system.size**n > ENUMERATION_CAP:
        raise CapacityError(f"{system.size}^{n} words exceed the enumeration cap")
    upper = np.log(level_sup_norms(system, n))
    if system.is_similarity:
        return upper, upper
    k0 = (constants or system.constants()).k0_hat
    lower = np.log(level_inf_norms(system, n) / k0)
    return lower, upper


def pressure_sums(system: IFSystem, t: float, n: int, constants=None):
    """(sum over |w|=n of inf-norm^t, sum of sup-norm^t)."""
    if t < 0 or n < 1:
        raise ValueError("need t >= 0 and n >= 1")
    lower, upper = _log_norms(system, n, constants)
    return float(np.exp(logsumexp(t * lower))), float(np.exp(logsumexp(t * upper)))


def _bisect_root(logs, n, d, tol):
    """Root in [0, d] of logsumexp(t * logs) / n = 0 (decreasing in t)."""
    f = lambda t: logsumexp(t * logs) / n
    lo, hi = 0.0, float(d)
    if f(hi) > 0:
        return hi
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def moran_root(ratios, d=None, tol=1e-14):
    """Root of sum r_i^t = 1 by Brent's method."""
    r = np.asarray(ratios, dtype=float)
    hi = float(d) if d is not None else 1.0
    while np.sum(r**hi) > 1.0:
        hi *= 2.0
    return brentq(lambda t: np.sum(r**t) - 1.0, 0.0, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def estimate_dimension(system: IFSystem, n: int, tol: float = 1e-10, constants=None) -> DimensionBracket:
    """Bracket [t_minus, t_plus] from the inf- and sup-norm pressure sums."""
    if n < 1 or tol <= 0:
        raise ValueError("need n >= 1 and tol > 0")
    lower, upper = _log_norms(system, n, constants)
    t_plus = _bisect_root(upper, n, system.d, tol)
    if system.is_similarity:
        return DimensionBracket(t_plus, t_plus, n, "exact-similarity", moran_root(system.ratios, system.d))
    t_minus = _bisect_root(lower, n, system.d, tol)
    return DimensionBracket(min(t_minus, t_plus), t_plus, n, "sup-inf-norms")


def conformal_weights(system: IFSystem, t: float, n: int) -> CylinderWeights:
    """Depth-n weights |phi_w'(y)|^t at a fixed point y of E, normalised."""
    if n < 1:
        raise ValueError("depth must be >= 1")
    if system.size**n > ENUMERATION_CAP:
        raise CapacityError(f"{system.size}^{n} words exceed the enumeration cap")
    if system.is_similarity:
        r = np.asarray(system.ratios) ** t
        raw = np.ones(1)
        for _ in range(n):
            raw = np.outer(r, raw).ravel()
    else:
        _, jac = level_table(system, n, system.reference_point())
        raw = operator_norm(jac) ** t
    total = raw.sum()
    weights = raw if abs(total - 1.0) <= 1e-12 else raw / total
    reps = representatives(system, n)
    bounds = system.constants().d_hat * level_sup_norms(system, n)
    return CylinderWeights(system, n, float(t), weights, reps, bounds)


def prefix_mass(weights: CylinderWeights, word) -> float:
    """Total weight of depth-n words starting with ``word`` (|word| <= n)."""
    word = check_word(word, weights.system.size)
    k = len(word)
    if k > weights.depth:
        raise PreconditionError("prefix longer than the weight table")
    span = weights.system.size ** (weights.depth - k)
    start = word_index(word, weights.system.size) * span
    return float(weights.weights[start : start + span].sum())


def cylinder_mass(weights: CylinderWeights, word) -> float:
    """m(phi_word(E)) at any length.

    Beyond the table depth the conformal identity is applied to the split
    word = u v with |v| = n: m = |phi_u'(phi_v(y))|^t m_n(v).
    """
    word = check_word(word, weights.system.size)
    n = weights.depth
    if len(word) <= n:
        return prefix_mass(weights, word)
    sys_ = weights.system
    u, v = word[:-n], word[-n:]
    if sys_.is_similarity:
        scale = float(np.prod([sys_.ratios[s] for s in u]))
    else:
        y, _ = compose(sys_, v, sys_.reference_point(), check=False)
        _, jac = compose(sys_, u, y, check=False)
        scale = float(operator_norm(jac))
    return scale**weights.t * float(weights.weights[word_index(v, sys_.size)])


def verify_conformal_identity(system: IFSystem, weights: CylinderWeights, word) -> float:
    """|m_n(cylinder word) - sum_k w_k |phi_word'(x_k)|^t|."""
    word = check_word(word, system.size)
    if system.size ** (len(word) + weights.depth) > ENUMERATION_CAP:
        raise CapacityError("word plus table depth exceeds the enumeration cap")
    lhs = cylinder_mass(weights, word)
    if system.is_similarity:
        factor = float(np.prod([system.ratios[s] for s in word])) ** weights.t
        rhs = factor * float(weights.weights.sum())
    else:
        _, jac = compose(system, word, weights.anchor_points, check=False)
        rhs = float(np.sum(weights.weights * operator_norm(jac) ** weights.t))
    return abs(lhs - rhs)


def ball_mass(weights: CylinderWeights, center, radius) -> float:
    """Inner sum: weight of cylinders whose representative ball lies in B(center, radius)."""
    dist = np.linalg.norm(weights.anchor_points - np.asarray(center, dtype=float), axis=1)
    return float(weights.weights[dist + weights.radius_bounds < radius].sum())


def ball_mass_adaptive(weights: CylinderWeights, center, radius, rel=1.0 / 16, max_depth=64):
    """Inner-sum mass of B(center, radius) refined below the table depth.

    Cylinders straddling the sphere are split until their radius bound
    drops below ``rel * radius``; anything still straddling is dropped,
    so the result never overstates the mass.
    """
    sys_ = weights.system
    center = np.asarray(center, dtype=float)
    d_hat = sys_.constants().d_hat
    dist = np.linalg.norm(weights.anchor_points - center, axis=1)
    inside = dist + weights.radius_bounds < radius
    total = float(weights.weights[inside].sum())
    straddle = (~inside) & (dist - weights.radius_bounds < radius)
    frontier = [tuple(w) for w in weights.words[straddle].tolist()]
    threshold = rel * radius
    while frontier:
        children = np.array([w + (i,) for w in frontier for i in range(sys_.size)], dtype=int)
        if children.shape[1] > max_depth:
            break
        pts, _ = compose_batch(sys_, children, np.broadcast_to(sys_.anchor, (len(children), sys_.d)))
        if sys_.is_similarity:
            sup = np.prod(np.asarray(sys_.ratios)[children], axis=1)
        else:
            sup = words_sup_norms(sys_, children)
        rb = d_hat * sup
        dist = np.linalg.norm(pts - center, axis=1)
        frontier = []
        for w, dd, b in zip(children.tolist(), dist, rb):
            if dd + b < radius:
                total += cylinder_mass(weights, w)
            elif dd - b < radius and b >= threshold:
                frontier.append(tuple(w))
    return total


def ahlfors_ratio(weights: CylinderWeights, x, r) -> float:
    if r < weights.resolution:
        raise ResolutionError(f"radius {r:g} below resolvable scale {weights.resolution:g}")
    return ball_mass(weights, x, r) / r**weights.t


def ahlfors_formula(system: IFSystem, constants: DistortionConstants, t: float) -> float:
    """D^{-t} K0^{-2t} (min_i inf-norm of phi_i')^t."""
    inf1 = level_inf_norms(system, 1)
    if not system.is_similarity:
        inf1 = inf1 / constants.k0_hat
    return float(constants.d_hat ** (-t) * constants.k0_hat ** (-2 * t) * inf1.min() ** t)


def ahlfors_lower_check(system: IFSystem, weights: CylinderWeights, constants: DistortionConstants,
                        sample_count: int, radii_per_sample: int, seed) -> AhlforsReport:
    """Compare sampled m_n(B(x, r)) / r^t against the lower-regularity constant."""
    t = weights.t
    c_formula = ahlfors_formula(system, constants, t)
    r_lo = weights.resolution
    r_hi = system.rho_zero
    if r_lo >= r_hi:
        raise ResolutionError("table too coarse for any radius below rho0")
    rng = np.random.default_rng(seed)
    per = max(1, sample_count // radii_per_sample)
    xs, _ = deep_points(system, per, rng)
    worst = {"ratio": math.inf}
    count = 0
    for x in xs:
        radii = np.exp(rng.uniform(math.log(r_lo), math.log(r_hi), size=radii_per_sample))
        for r in radii:
            ratio = ahlfors_ratio(weights, x, r)
            count += 1
            if ratio < worst["ratio"]:
                worst = {"ratio": ratio, "x": x.tolist(), "r": float(r)}
    return AhlforsReport(
        c_formula=c_formula,
        min_observed_ratio=float(worst["ratio"]),
        samples=count,
        radii={"min": r_lo, "max": r_hi, "per_sample": radii_per_sample, "spacing": "log-uniform"},
        passed=bool(worst["ratio"] >= c_formula),
        t=t,
        worst=worst,
    )


def export_weights_csv(weights: CylinderWeights, path):
    """Write word, weight, x1..xd with shortest round-trip floats."""
    d = weights.anchor_points.shape[1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["word", "weight"] + [f"x{k + 1}" for k in range(d)])
        for w, m, p in zip(weights.words.tolist(), weights.weights, weights.anchor_points):
            out.writerow([".".join(map(str, w)), repr(float(m))] + [repr(float(v)) for v in p])
