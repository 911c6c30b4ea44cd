"""Weak tangent planes, cone containment and the tangential/spread classifier."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateCloudError,
    InvalidWitnessError,
    PreconditionError,
    ResolutionError,
)
from .grassmann import Cone, Subspace, cone_contains, fit_plane, map_subspace, metric
from .ifs.distortion import DistortionConstants
from .ifs.maps import operator_norm
from .ifs.system import IFSystem, compose, compose_batch, words_sup_norms
from .measure import CylinderWeights, ahlfors_formula, ball_mass_adaptive

DEFAULT_DELTAS = (0.04, 0.1, 0.25, 0.5)
C1_PAIR_BOUND = 8.0 ** -0.5


# -- result types -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeakTangentResult:
    apex: np.ndarray
    plane: Subspace
    delta: float
    t: float
    ratios: tuple  # ((r, ratio), ...) with r decreasing
    min_ratio: float

    def as_dict(self):
        return {
            "apex": np.asarray(self.apex).tolist(),
            "plane": self.plane.as_list(),
            "delta": self.delta,
            "t": self.t,
            "ratios": [[r, q] for r, q in self.ratios],
            "min_ratio": self.min_ratio,
        }


@dataclass(frozen=True, eq=False)
class TangentialityCertificate:
    delta: float
    r: float
    assignments: tuple  # ((apex, plane, checked_count), ...)

    def as_dict(self):
        return {
            "delta": self.delta,
            "r": self.r,
            "assignments": [
                {"apex": np.asarray(a).tolist(), "plane": V.as_list(), "checked": int(k)}
                for a, V, k in self.assignments
            ],
        }


@dataclass(frozen=True, eq=False)
class TangentialityFailure:
    """No grid radius worked; the apex and plane that failed at the smallest one."""

    delta: float
    r: float
    apex: np.ndarray
    plane: Subspace
    violators: int

    def as_dict(self):
        return {
            "delta": self.delta,
            "r": self.r,
            "apex": np.asarray(self.apex).tolist(),
            "plane": self.plane.as_list(),
            "violators": self.violators,
        }


@dataclass(frozen=True)
class SmallAngleParams:
    delta: float
    rho: float
    r0: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.5 <= self.rho < 1.0:
            raise ValueError("rho must lie in [1/2, 1)")
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")

    @classmethod
    def compute(cls, delta, rho, c_hat, dist_boundary):
        """Admissible radius from the Falconer constant.

        Uses 1/(1 - c t) as the distortion function K(t), so K stays below
        ((rho+1)/2)^{-1/2} for t up to (1 - ((rho+1)/2)^{1/2}) / c. With c = 0
        every radius below dist(E, boundary) is admissible.
        """
        if not 0.5 <= rho < 1.0:
            raise ValueError("rho must lie in [1/2, 1)")
        half = math.sqrt((rho + 1.0) / 2.0)
        r0 = float(dist_boundary)
        if c_hat > 0:
            r0 = min(r0, math.sqrt(delta) / c_hat * (half - math.sqrt(rho)), (1.0 - half) / c_hat)
        return cls(float(delta), float(rho), r0)


@dataclass(frozen=True, eq=False)
class SpreadWitness:
    apex: np.ndarray
    code: tuple
    plane: Subspace
    r: float
    x: np.ndarray
    y: np.ndarray
    z_label: str
    n: int
    lam: float
    eta: float
    center: np.ndarray
    ball_radius: float
    distance_to_plane: float
    mass: float
    mass_floor: float
    disjoint_ok: bool
    inside_ok: bool
    mass_ok: bool

    @property
    def ok(self):
        return self.disjoint_ok and self.inside_ok and self.mass_ok

    def as_dict(self):
        return {
            "apex": np.asarray(self.apex).tolist(),
            "code_prefix": list(self.code[: max(self.n, 1)]),
            "plane": self.plane.as_list(),
            "r": self.r,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "z": self.z_label,
            "n": self.n,
            "lambda": self.lam,
            "eta": self.eta,
            "center": self.center.tolist(),
            "ball_radius": self.ball_radius,
            "distance_to_plane": self.distance_to_plane,
            "mass": self.mass,
            "mass_floor": self.mass_floor,
            "disjoint_ok": self.disjoint_ok,
            "inside_ok": self.inside_ok,
            "mass_ok": self.mass_ok,
        }


@dataclass(frozen=True, eq=False)
class RigidityVerdict:
    kind: str  # TANGENTIAL | SPREAD | INCONCLUSIVE
    l: int
    evidence: dict
    parameters: dict
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "kind": self.kind,
            "l": self.l,
            "evidence": self.evidence,
            "parameters": self.parameters,
            "diagnostics": self.diagnostics,
        }


# -- points of E --------------------------------------------------------------


def periodic_point(system: IFSystem, word, max_iter=400):
    """pi(word word word ...): the fixed point of phi_word."""
    x = system.reference_point()
    for _ in range(max_iter):
        nxt, _ = compose(system, word, x, check=False)
        if np.max(np.abs(nxt - x)) <= 1e-15:
            return nxt
        x = nxt
    return x


def e_points(system: IFSystem, codes):
    """phi_code(y*) for a fixed point y* of E, so every result lies on E."""
    codes = np.asarray(codes, dtype=int)
    y = np.broadcast_to(system.reference_point(), (len(codes), system.d))
    pts, _ = compose_batch(system, codes, y)
    return pts


def radius_grid(weights: CylinderWeights, r_max, floor=None):
    """r_max 2^-k for k = 0, 1, ... while r stays at or above the floor."""
    floor = weights.resolution if floor is None else floor
    if r_max < floor:
        raise ResolutionError(f"largest radius {r_max:g} below resolvable scale {floor:g}")
    k_max = int(math.floor(math.log2(r_max / floor)))
    return r_max * 2.0 ** -np.arange(k_max + 1)


# -- weak tangents ------------------------------------------------------------


def _check_radii(weights, radii):
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0:
        raise ValueError("need a nonempty radius grid")
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly decreasing")
    if radii[-1] < weights.resolution:
        raise ResolutionError(f"radius {radii[-1]:g} below resolvable scale {weights.resolution:g}")
    return radii


def _local(weights, a, r_max):
    """Cylinders whose representative ball fits in B(a, r_max)."""
    v = weights.anchor_points - a
    dist = np.linalg.norm(v, axis=1)
    keep = dist + weights.radius_bounds < r_max
    return v[keep], dist[keep], weights.radius_bounds[keep], weights.weights[keep]


def _tube_ratios(v, dist, rb, w, plane, deltas, radii, t):
    """Array [delta, r] of m_n(B(a,r) minus V_a(delta r)) / r^t."""
    off = plane.residual(v) if len(v) else np.zeros(0)
    inside = (dist + rb)[None, :] < radii[:, None]  # (R, k)
    out = off[None, None, :] >= np.asarray(deltas)[:, None, None] * radii[None, :, None]
    mass = np.einsum("drk,k->dr", (inside[None] & out).astype(float), w)
    return mass / radii[None, :] ** t


def weak_tangent_ratios(weights: CylinderWeights, a, V: Subspace, delta, t=None, radii=None) -> WeakTangentResult:
    """Tube-complement mass quotients on a decreasing radius grid."""
    a = np.asarray(a, dtype=float)
    t = weights.t if t is None else float(t)
    if radii is None:
        radii = radius_grid(weights, weights.system.rho_zero)
    radii = _check_radii(weights, radii)
    local = _local(weights, a, radii[0])
    q = _tube_ratios(*local, V, [delta], radii, t)[0]
    return WeakTangentResult(
        apex=a,
        plane=V,
        delta=float(delta),
        t=t,
        ratios=tuple((float(r), float(x)) for r, x in zip(radii, q)),
        min_ratio=float(q.min()),
    )


# -- cones --------------------------------------------------------------------


def cone_containment_check(weights_or_points, a, V: Subspace, delta, r, radius_bounds=None):
    """Does every representative in B(a, r) lie in X(a, V, delta)?

    Points within their radius bound of the apex are skipped, the cone
    being open there. Plain point arrays use zero radius bounds.
    """
    a = np.asarray(a, dtype=float)
    if isinstance(weights_or_points, CylinderWeights):
        pts = weights_or_points.anchor_points
        rb = weights_or_points.radius_bounds
    else:
        pts = np.atleast_2d(np.asarray(weights_or_points, dtype=float))
        rb = np.zeros(len(pts)) if radius_bounds is None else np.asarray(radius_bounds, dtype=float)
    dist = np.linalg.norm(pts - a, axis=1)
    test = (dist < r) & (dist > rb)
    ok = cone_contains(Cone(a, V, delta), pts[test])
    bad = pts[test][~ok]
    return {"holds": bool(ok.all()), "checked": int(test.sum()), "violators": bad.tolist()}


def _local_plane(weights, a, r, l, fallback):
    v = weights.anchor_points - a
    dist = np.linalg.norm(v, axis=1)
    sel = (dist < r) & (dist > weights.radius_bounds)
    try:
        return fit_plane(weights.anchor_points[sel], weights.weights[sel], a, l)
    except DegenerateCloudError:
        return fallback


def uniform_tangentiality(system: IFSystem, weights: CylinderWeights, l, delta, apex_sample=8, seed=0,
                          apexes=None, radii=None, threads=1):
    """Largest grid radius at which every sampled apex has a containing cone.

    Each apex gets the plane fitted to the weighted representatives of
    B(a, r). Returns a TangentialityCertificate, or a TangentialityFailure
    naming the apex that breaks containment at the smallest radius.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if apexes is None:
        apexes = sample_apexes(system, apex_sample, seed)[0]
    apexes = np.atleast_2d(np.asarray(apexes, dtype=float))
    if radii is None:
        radii = radius_grid(weights, system.rho_zero, floor=10.0 * float(weights.radius_bounds.max()))
    fallback = Subspace(np.eye(system.d)[:, :l])

    def at_apex(a):
        rows = []
        for r in radii:
            V = _local_plane(weights, a, r, l, fallback)
            rep = cone_containment_check(weights, a, V, delta, r)
            rows.append((V, rep))
        return rows

    table = _map(at_apex, list(apexes), threads)
    for k, r in enumerate(radii):
        if all(rows[k][1]["holds"] for rows in table):
            assign = tuple((a, rows[k][0], rows[k][1]["checked"]) for a, rows in zip(apexes, table))
            return TangentialityCertificate(float(delta), float(r), assign)
    k = len(radii) - 1
    for a, rows in zip(apexes, table):
        if not rows[k][1]["holds"]:
            return TangentialityFailure(float(delta), float(radii[k]), a, rows[k][0],
                                        len(rows[k][1]["violators"]))
    raise AssertionError("unreachable")


def small_angle_image_check(system: IFSystem, constants: DistortionConstants, word, a, V: Subspace,
                            params: SmallAngleParams, trials, seed, r=None, allow_large=False):
    """Map samples of X(a, r, V, rho delta) by phi_word and test the image cone.

    The target is X(phi(a), ||phi'|| r, phi'(a) V, delta). ``r`` defaults
    to a seeded value below r0; r >= r0 raises PreconditionError unless
    ``allow_large`` is set (for probing outside the hypothesis).
    """
    rng = np.random.default_rng(seed)
    a = np.asarray(a, dtype=float)
    word = tuple(int(s) for s in word)
    if r is None:
        r = params.r0 * rng.uniform(0.05, 0.999)
    if r >= params.r0 and not allow_large:
        raise PreconditionError(f"radius {r:g} is not below r0 = {params.r0:g}")
    x = sample_cone(rng, a, V, params.rho * params.delta, r, trials)
    fa, ja = compose(system, word, a, check=False)
    fx, _ = compose(system, word, x, check=False)
    sup = float(words_sup_norms(system, np.asarray([word]))[0])
    target = Cone(fa, map_subspace(ja, V), params.delta, sup * r)
    ok = cone_contains(target, fx)
    return {
        "violations": [{"x": x[k].tolist(), "image": fx[k].tolist()} for k in np.nonzero(~ok)[0]],
        "trials": int(trials),
        "r": float(r),
    }


def small_angle_sweep(system: IFSystem, constants: DistortionConstants, params: SmallAngleParams, l,
                      trial_count, seed, depth=3, points_per_trial=1):
    """Random (word, apex, plane, radius, cone point) trials of the lemma.

    Same test as small_angle_image_check, batched over trials that share
    a word length.
    """
    rng = np.random.default_rng(seed)
    d = system.d
    lengths = rng.integers(1, depth + 1, size=trial_count)
    apexes = e_points(system, rng.integers(0, system.size, size=(trial_count, 12)))
    planes = [Subspace.random(d, l, rng) for _ in range(trial_count)]
    radii = params.r0 * rng.uniform(0.05, 0.999, size=trial_count)
    samples = np.stack([
        sample_cone(rng, a, V, params.rho * params.delta, r, points_per_trial)
        for a, V, r in zip(apexes, planes, radii)
    ])  # (trials, points, d)
    violations = []
    for length in np.unique(lengths):
        idx = np.nonzero(lengths == length)[0]
        words = rng.integers(0, system.size, size=(len(idx), length))
        fa, ja = compose_batch(system, words, apexes[idx])
        fx, _ = compose_batch(system, words, samples[idx])
        sup = words_sup_norms(system, words)
        for row, k in enumerate(idx):
            target = Cone(fa[row], map_subspace(ja[row], planes[k]), params.delta, sup[row] * radii[k])
            ok = cone_contains(target, fx[row])
            for p in np.nonzero(~ok)[0]:
                violations.append({"x": samples[k, p].tolist(), "image": fx[row, p].tolist(),
                                   "word": words[row].tolist(), "apex": apexes[k].tolist(), "r": float(radii[k])})
    return {"violations": violations, "trials": trial_count * points_per_trial}


def sample_cone(rng, a, V: Subspace, delta, r, count):
    """Points of the truncated cone X(a, r, V, delta), apex excluded."""
    d = V.dim_ambient
    perp = V.perp()
    u = V.basis @ _unit(rng, V.dim, count).T
    w = perp.basis @ _unit(rng, d - V.dim, count).T
    theta = np.arcsin(math.sqrt(delta)) * rng.uniform(0.0, 1.0 - 1e-9, size=count)
    s = r * rng.uniform(1e-6, 1.0 - 1e-9, size=count)
    direction = (np.cos(theta) * u + np.sin(theta) * w).T
    return a + s[:, None] * direction


def _unit(rng, k, count):
    v = rng.standard_normal((count, k))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# -- spread witness -----------------------------------------------------------


def witness_level(system: IFSystem, code, r, d_hat):
    """Smallest n with ||phi_{code|n}'|| < r / (2 D)."""
    code = tuple(int(s) for s in code)
    target = r / (2.0 * d_hat)
    for n in range(1, len(code) + 1):
        norm = float(words_sup_norms(system, np.asarray([code[:n]]))[0])
        if norm < target:
            return n
    raise PreconditionError("code of the apex is too short for this radius")


def spread_witness(system: IFSystem, weights: CylinderWeights, constants: DistortionConstants, a, r, delta,
                   rho, x, y, code_of_a, V: Subspace) -> SpreadWitness:
    """Build the ball B(phi_{a|n}(z), lambda r / 8) far from the tube around V.

    ``x`` and ``y`` are points of E with y outside X(x, W, delta), W being V
    pulled back along the code of ``a`` at level n. Raises
    InvalidWitnessError when y sits inside that cone.
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 1.0 / (delta + 1.0) < rho < 1.0:
        raise PreconditionError("need 1/(delta+1) < rho < 1")
    sep = float(np.linalg.norm(x - y))
    if sep == 0.0:
        raise InvalidWitnessError("x and y coincide")
    r0 = SmallAngleParams.compute(1.0 / rho - delta, rho, constants.c_hat, system.dist_e_boundary).r0
    if sep >= r0 / 2.0:
        raise PreconditionError(f"|x - y| = {sep:g} is not below r0/2 = {r0 / 2:g}")

    n = witness_level(system, code_of_a, r, constants.d_hat)
    prefix = tuple(int(s) for s in code_of_a[:n])
    _, jx = compose(system, prefix, x, check=False)
    W = map_subspace(np.linalg.inv(jx), V)
    if cone_contains(Cone(x, W, delta), y[None])[0]:
        raise InvalidWitnessError("y lies inside the cone X(x, W, delta)")

    eta = min(0.5, (1.0 - math.sqrt(rho)) * math.sqrt(delta) / 2.0)
    r_prime = 2.0 * sep
    _, jy = compose_batch(system, np.arange(system.size)[:, None], np.broadcast_to(y, (system.size, system.d)))
    min_deriv = float(operator_norm(jy).min())
    lam = (0.5 * math.sqrt(delta - (1.0 / rho - 1.0)) * constants.k0_hat**-2 * eta * r_prime
           * min_deriv / constants.d_hat / 2.0)

    images = {lab: compose(system, prefix, p, check=False)[0] for lab, p in (("x", x), ("y", y))}
    dists = {lab: float(V.residual(img - a)) for lab, img in images.items()}
    z_label = max(("x", "y"), key=lambda lab: dists[lab])
    center = images[z_label]
    ball_radius = lam * r / 8.0
    t = weights.t
    floor = ahlfors_formula(system, constants, t) * (lam / 8.0) ** t * r**t
    mass = ball_mass_adaptive(weights, center, ball_radius)
    return SpreadWitness(
        apex=a,
        code=tuple(int(s) for s in code_of_a),
        plane=V,
        r=float(r),
        x=x,
        y=y,
        z_label=z_label,
        n=n,
        lam=float(lam),
        eta=float(eta),
        center=center,
        ball_radius=float(ball_radius),
        distance_to_plane=dists[z_label],
        mass=float(mass),
        mass_floor=float(floor),
        disjoint_ok=dists[z_label] >= lam * r / 2.0,
        inside_ok=float(np.linalg.norm(center - a)) + ball_radius < r,
        mass_ok=mass >= floor,
    )


# -- C^1 compatibility ---------------------------------------------------------


def c1_compatibility_check(points, r0, samples=None):
    """Plane agreement and half-cone containment among nearby apexes.

    ``points`` is a sequence of (a, V_a). Pairs closer than r0 must have
    metric(V_x, V_a) < 8^{-1/2}; every sample p and apex x in B(a, r0)
    must satisfy p in X(x, V_a, 1/2), except p within 1e-9 of x.
    """
    apex = np.array([np.asarray(a, dtype=float) for a, _ in points])
    planes = [V for _, V in points]
    cloud = apex if samples is None else np.vstack([apex, np.asarray(samples, dtype=float)])
    worst = 0.0
    pairwise_ok = True
    containment_ok = True
    bad = []
    for i in range(len(apex)):
        near = np.linalg.norm(apex - apex[i], axis=1) < r0
        for j in np.nonzero(near)[0]:
            if j <= i:
                continue
            dist = metric(planes[i], planes[j])
            worst = max(worst, dist)
            if dist >= C1_PAIR_BOUND:
                pairwise_ok = False
                bad.append({"kind": "pair", "i": int(i), "j": int(j), "metric": dist})
        ps = cloud[np.linalg.norm(cloud - apex[i], axis=1) < r0]
        for j in np.nonzero(near)[0]:
            keep = np.linalg.norm(ps - apex[j], axis=1) > 1e-9
            inside = cone_contains(Cone(apex[j], planes[i], 0.5), ps[keep])
            if not inside.all():
                containment_ok = False
                bad.append({"kind": "containment", "a": int(i), "x": int(j), "count": int((~inside).sum())})
    return {"pairwise_ok": pairwise_ok, "containment_ok": containment_ok, "max_metric": worst,
            "failures": bad}


# -- classifier ----------------------------------------------------------------


@dataclass(frozen=True)
class ClassifierConfig:
    deltas: tuple = DEFAULT_DELTAS
    apex_count: int = 6
    apex_word_length: int = 3
    plane_count: int | None = None
    threshold_factor: float = 1e-3
    witness_delta: float = 0.2
    witness_rho: float = 0.9
    pair_count: int = 48
    seed: int = 0
    threads: int = 1

    def planes_for(self, d):
        if self.plane_count is not None:
            return self.plane_count
        return 180 if d == 2 else 500

    def as_dict(self, d):
        return {
            "deltas": list(self.deltas),
            "apex_count": self.apex_count,
            "apex_word_length": self.apex_word_length,
            "plane_count": self.planes_for(d),
            "threshold_factor": self.threshold_factor,
            "witness_delta": self.witness_delta,
            "witness_rho": self.witness_rho,
            "pair_count": self.pair_count,
            "seed": self.seed,
        }


def sample_apexes(system: IFSystem, count, seed, word_length=3):
    """Periodic points pi(w w w ...) for distinct seeded words w."""
    rng = np.random.default_rng(seed)
    total = system.size**word_length
    idx = np.sort(rng.choice(total, size=min(count, total), replace=False))
    words = [tuple(int(i // system.size ** (word_length - 1 - k)) % system.size for k in range(word_length))
             for i in idx]
    pts = np.array([periodic_point(system, w) for w in words])
    return pts, words


def _map(func, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _apex_scan(weights, a, planes, deltas, radii, t):
    local = _local(weights, a, radii[0])
    return np.stack([_tube_ratios(*local, V, deltas, radii, t) for V in planes])  # (P, D, R)


def rigidity_classify(system: IFSystem, weights: CylinderWeights, l, config: ClassifierConfig | None = None,
                      constants: DistortionConstants | None = None) -> RigidityVerdict:
    """Empirical side of the tangential / spread-out dichotomy."""
    config = config or ClassifierConfig()
    if not 0 < l < system.d:
        raise ValueError(f"need 0 < l < d = {system.d}")
    constants = constants or system.constants()
    rng = np.random.default_rng(config.seed)
    deltas = np.asarray(config.deltas, dtype=float)
    radii = radius_grid(weights, system.rho_zero)
    apexes, apex_words = sample_apexes(system, config.apex_count, config.seed, config.apex_word_length)
    random_planes = [Subspace.random(system.d, l, rng) for _ in range(config.planes_for(system.d))]
    params = {
        **config.as_dict(system.d),
        "l": l,
        "depth": weights.depth,
        "t": weights.t,
        "radii": radii.tolist(),
        "resolution": weights.resolution,
    }

    def scan(k):
        a = apexes[k]
        try:
            fitted = _local_plane(weights, a, radii[0], l, None)
        except DegenerateCloudError:
            fitted = None
        planes = ([fitted] if fitted is not None else []) + random_planes
        return fitted, _apex_scan(weights, a, planes, deltas, radii, weights.t)

    scans = _map(scan, list(range(len(apexes))), config.threads)

    # threshold per delta: three decades below a generic plane's ratio. The
    # largest ratio on the grid is used, since at wide tubes the first radius
    # can see zero mass even for a generic plane.
    generic = np.array([s[1][-len(random_planes):].max(axis=2) for s in scans])  # (A, P, D)
    threshold = config.threshold_factor * np.median(generic.reshape(-1, len(deltas)), axis=0)

    apex_rows = []
    tangent_apexes = []
    for k, (fitted, table) in enumerate(scans):
        mins = table.min(axis=2)  # (P, D)
        passes = np.all(mins < threshold[None, :], axis=1)
        best = int(np.argmin(np.max(mins / np.maximum(threshold, 1e-300)[None, :], axis=1)))
        plane = fitted if (fitted is not None and best == 0) else random_planes[best - (fitted is not None)]
        row = {
            "apex": apexes[k].tolist(),
            "word": list(apex_words[k]),
            "fitted_plane": fitted.as_list() if fitted is not None else None,
            "best_plane": plane.as_list(),
            "best_min_ratio": mins[best].tolist(),
            "fitted_min_ratio": mins[0].tolist() if fitted is not None else None,
            "weak_tangent": bool(passes.any()),
        }
        apex_rows.append(row)
        if passes.any():
            tangent_apexes.append(k)

    diagnostics = {
        "thresholds": dict(zip([str(d) for d in deltas], threshold.tolist())),
        "apexes": apex_rows,
        "note": "every sampled apex is tested directly, which is stronger than a single tangent point",
    }

    if tangent_apexes:
        certs = []
        for delta in deltas:
            res = uniform_tangentiality(system, weights, l, float(delta), apexes=apexes, threads=config.threads)
            if isinstance(res, TangentialityFailure):
                diagnostics["tangentiality_failure"] = res.as_dict()
                return RigidityVerdict("INCONCLUSIVE", l, {}, params, diagnostics)
            c1 = c1_compatibility_check([(a, V) for a, V, _ in res.assignments], res.r,
                                        samples=_cloud_near(weights, apexes, res.r))
            certs.append({"certificate": res.as_dict(), "c1": c1})
            if not (c1["pairwise_ok"] and c1["containment_ok"]):
                diagnostics["c1_failure"] = c1
                return RigidityVerdict("INCONCLUSIVE", l, {}, params, diagnostics)
        return RigidityVerdict("TANGENTIAL", l, {"certificates": certs}, params, diagnostics)

    witness, attempts = _search_witness(system, weights, constants, apexes, apex_words, scans, radii, config)
    diagnostics["witness_attempts"] = attempts
    if witness is not None:
        return RigidityVerdict("SPREAD", l, {"witness": witness.as_dict()}, params, diagnostics)
    return RigidityVerdict("INCONCLUSIVE", l, {}, params, diagnostics)


def _cloud_near(weights, apexes, r):
    dist = np.min(np.linalg.norm(weights.anchor_points[:, None, :] - apexes[None], axis=2), axis=1)
    return weights.anchor_points[dist < r]


def _witness_pairs(system, count, seed, code_length=16):
    """Seeded pairs of E-points sharing a code prefix of varying length."""
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, system.size, size=(count, code_length))
    ys = xs.copy()
    split = rng.integers(1, 6, size=count)
    for k in range(count):
        tail = rng.integers(0, system.size, size=code_length - split[k])
        if tail[0] == xs[k, split[k]]:
            tail[0] = (tail[0] + 1) % system.size
        ys[k, split[k]:] = tail
    return e_points(system, xs), e_points(system, ys)


def _search_witness(system, weights, constants, apexes, apex_words, scans, radii, config):
    delta, rho = config.witness_delta, config.witness_rho
    r0 = SmallAngleParams.compute(1.0 / rho - delta, rho, constants.c_hat, system.dist_e_boundary).r0
    xs, ys = _witness_pairs(system, config.pair_count, config.seed + 1)
    sep = np.linalg.norm(xs - ys, axis=1)
    order = [k for k in np.argsort(-sep, kind="stable") if 0 < sep[k] < r0 / 2.0]
    attempts = []
    r = float(radii[0])
    for k, (fitted, _) in enumerate(scans):
        if fitted is None:
            continue
        word = apex_words[k]
        code = tuple(word) * (64 // len(word))
        for j in order:
            try:
                w = spread_witness(system, weights, constants, apexes[k], r, delta, rho, xs[j], ys[j], code, fitted)
            except (InvalidWitnessError, PreconditionError) as exc:
                attempts.append({"apex": k, "pair": int(j), "error": str(exc)})
                continue
            attempts.append({"apex": k, "pair": int(j), "ok": w.ok})
            if w.ok:
                return w, attempts[-20:]
    return None, attempts[-20:]
