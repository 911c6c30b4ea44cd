"""The IFSystem value type and chain-rule composition of its maps."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapacityError, DomainEscapeError, InvalidWordError
from .maps import Isometry, SmoothMap, conorm, operator_norm

#: refuse to enumerate more than this many words at one depth
ENUMERATION_CAP = 10**8
#: inflation applied to sampled sup-norms of non-similarity maps
SUP_INFLATION = 1.01


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box corners must be vectors of equal length")
        if np.any(hi <= lo):
            raise ValueError("box is degenerate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def sides(self):
        return self.hi - self.lo

    @property
    def diameter(self):
        return float(np.linalg.norm(self.sides))

    def dilate(self, margin):
        return Box(self.lo - margin, self.hi + margin)

    def corners(self):
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def grid(self, resolution):
        axes = [np.linspace(a, b, resolution) for a, b in zip(self.lo, self.hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def contains(self, x, strict=False, tol=0.0):
        x = np.asarray(x, dtype=float)
        if strict:
            return np.all((x > self.lo + tol) & (x < self.hi - tol), axis=-1)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def sample(self, n, rng):
        return self.lo + rng.random((n, self.dim)) * self.sides


@dataclass(frozen=True, eq=False)
class IFSystem:
    """Finite family of contractions with seed set ``chart(box)``.

    ``chart`` is None for plain box systems. Conjugated systems carry the
    conjugating diffeomorphism there, so the seed set, Omega and Omega'
    are images of boxes. Omega is the box dilated by ``omega_margin`` and
    Omega' the box dilated by twice that.
    """

    maps: tuple
    box: Box
    omega_margin: float
    s_low: float
    s_up: float
    chart: SmoothMap | None = None
    rho0: float | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise ValueError("a system needs at least one map")
        if any(m.dim != self.box.dim for m in self.maps):
            raise ValueError("map dimension does not match the seed box")
        if self.omega_margin <= 0:
            raise ValueError("omega_margin must be positive")

    @property
    def d(self):
        return self.box.dim

    @property
    def size(self):
        return len(self.maps)

    @property
    def is_similarity(self):
        return all(m.ratio is not None for m in self.maps) and (
            self.chart is None or isinstance(self.chart, Isometry)
        )

    @property
    def ratios(self):
        return tuple(m.ratio for m in self.maps)

    @property
    def omega_box(self):
        return self.box.dilate(self.omega_margin)

    @property
    def omega_prime_box(self):
        return self.box.dilate(2.0 * self.omega_margin)

    @property
    def rho_zero(self):
        return self.rho0 if self.rho0 is not None else 0.5 * float(np.min(self.box.sides))

    def to_base(self, x):
        return np.asarray(x, dtype=float) if self.chart is None else self.chart.inverse(x)

    def from_base(self, u):
        return np.asarray(u, dtype=float) if self.chart is None else self.chart(u)

    @property
    def anchor(self):
        """Barycentre of the seed set (image of the box centre)."""
        return self.from_base(self.box.center)

    def in_omega(self, x):
        return self.omega_box.contains(self.to_base(x))

    def in_omega_prime(self, x):
        return self.omega_prime_box.contains(self.to_base(x))

    def in_seed(self, x, strict=False, tol=0.0):
        return self.box.contains(self.to_base(x), strict=strict, tol=tol)

    def sample_omega(self, n, rng):
        return self.from_base(self.omega_box.sample(n, rng))

    def sample_seed(self, n, rng):
        return self.from_base(self.box.sample(n, rng))

    def omega_probes(self):
        """3^d grid of Omega used for sampled sup-norms."""
        return self.from_base(self.omega_box.grid(3))

    def seed_probes(self):
        """2^d corners plus centre of the seed box."""
        return self.from_base(np.vstack([self.box.corners(), self.box.center]))

    @property
    def seed_diameter(self):
        if self.chart is None or isinstance(self.chart, Isometry):
            return self.box.diameter
        pts = self.from_base(self.box.grid(5))
        return _diameter(pts) * SUP_INFLATION

    @property
    def dist_e_boundary(self):
        """Lower bound for dist(E, boundary of Omega)."""
        if self.chart is None or isinstance(self.chart, Isometry):
            return self.omega_margin
        return 0.5 * self.omega_margin

    def constants(self):
        """Distortion constants at the default depth (cached)."""
        if "constants" not in self._cache:
            from .distortion import distortion_constants

            self._cache["constants"] = distortion_constants(self, depth=3, sample_count=200, seed=0)
        return self._cache["constants"]

    def reference_point(self):
        """A point of E: the fixed point of the first map."""
        if "reference" not in self._cache:
            first = self.maps[0]
            if hasattr(first, "linear"):
                x = np.linalg.solve(np.eye(self.d) - first.linear, first.translation)
                self._cache["reference"] = x
                return x
            x = self.anchor
            for _ in range(400):
                nxt = self.maps[0](x)
                if np.max(np.abs(nxt - x)) == 0.0:
                    break
                x = nxt
            self._cache["reference"] = x
        return self._cache["reference"]


def _diameter(points):
    points = np.asarray(points, dtype=float)
    best = 0.0
    for k in range(0, len(points), 512):
        block = points[k : k + 512]
        dist = np.linalg.norm(block[:, None, :] - points[None, :, :], axis=-1)
        best = max(best, float(dist.max()))
    return best


def check_word(word, size):
    word = tuple(int(s) for s in word)
    for s in word:
        if not 0 <= s < size:
            raise InvalidWordError(f"symbol {s} outside alphabet of size {size}")
    return word


def compose(system: IFSystem, word, x, check=True):
    """Evaluate phi_word at ``x`` and its Jacobian by the chain rule.

    ``x`` may be a single point or a batch ``(..., d)``. The Jacobian is
    the ordered product of the per-map Jacobians at the intermediate
    points, innermost map first.
    """
    word = check_word(word, system.size)
    x = np.asarray(x, dtype=float)
    jac = np.broadcast_to(np.eye(system.d), x.shape[:-1] + (system.d, system.d)).copy()
    for sym in reversed(word):
        x, step = system.maps[sym].value_and_jacobian(x)
        jac = step @ jac
        if check and not np.all(system.in_omega_prime(x)):
            raise DomainEscapeError(f"composition of {word} left Omega' at map {sym}")
    return x, jac


def compose_batch(system: IFSystem, words, points):
    """Compose many equal-length words at once.

    ``words`` has shape ``(m, L)``; ``points`` has shape ``(m, d)`` or
    ``(m, P, d)``. Row ``k`` of the result is phi_{words[k]} applied to
    ``points[k]``.
    """
    words = np.asarray(words, dtype=int)
    if words.ndim != 2:
        raise ValueError("words must be a 2-d array")
    x = np.array(points, dtype=float)
    jac = np.broadcast_to(np.eye(system.d), x.shape[:-1] + (system.d, system.d)).copy()
    for col in range(words.shape[1] - 1, -1, -1):
        syms = words[:, col]
        for sym in np.unique(syms):
            rows = syms == sym
            val, step = system.maps[sym].value_and_jacobian(x[rows])
            jac[rows] = step @ jac[rows]
            x[rows] = val
    return x, jac


def check_capacity(size, n):
    if size**n > ENUMERATION_CAP:
        raise CapacityError(f"{size}^{n} words exceed the enumeration cap {ENUMERATION_CAP}")


def level_table(system: IFSystem, n, x=None):
    """phi_w(x) and phi_w'(x) for every word of length ``n``.

    Words are in lexicographic order. Built level by level, so each map
    is evaluated on whole blocks.
    """
    check_capacity(system.size, n)
    x = system.anchor if x is None else np.asarray(x, dtype=float)
    pts = x[None, :]
    jac = np.eye(system.d)[None]
    for _ in range(n):
        new_pts = []
        new_jac = []
        for fmap in system.maps:
            val, step = fmap.value_and_jacobian(pts)
            new_jac.append(step @ jac)
            new_pts.append(val)
        pts = np.concatenate(new_pts)
        jac = np.concatenate(new_jac)
    return pts, jac


def representatives(system: IFSystem, n):
    """Cylinder representatives phi_w(anchor) for all words of length n (cached)."""
    key = ("reps", n)
    if key not in system._cache:
        pts, _ = level_table(system, n)
        system._cache[key] = pts
    return system._cache[key]


def ratio_products(system: IFSystem, n):
    """Products of similarity ratios over all words of length n."""
    r = np.asarray(system.ratios, dtype=float)
    out = np.ones(1)
    for _ in range(n):
        out = np.outer(r, out).ravel()
    return out


def level_sup_norms(system: IFSystem, n):
    """Estimates of ||phi_w'|| = sup over Omega for all words of length n."""
    key = ("sup", n)
    if key not in system._cache:
        check_capacity(system.size, n)
        if system.is_similarity:
            val = ratio_products(system, n)
        else:
            val = None
            for probe in system.omega_probes():
                _, jac = level_table(system, n, probe)
                nrm = operator_norm(jac)
                val = nrm if val is None else np.maximum(val, nrm)
            val = val * SUP_INFLATION
        system._cache[key] = val
    return system._cache[key]


def level_inf_norms(system: IFSystem, n):
    """min over seed corners and centre of |(phi_w'(x))^{-1}|^{-1}."""
    key = ("inf", n)
    if key not in system._cache:
        check_capacity(system.size, n)
        if system.is_similarity:
            val = ratio_products(system, n)
        else:
            val = None
            for probe in system.seed_probes():
                _, jac = level_table(system, n, probe)
                nrm = conorm(jac)
                val = nrm if val is None else np.minimum(val, nrm)
        system._cache[key] = val
    return system._cache[key]


def word_sup_norm(system: IFSystem, word):
    """||phi_word'|| for a single word (exact for similarity systems)."""
    word = check_word(word, system.size)
    if system.is_similarity:
        return float(np.prod([system.ratios[s] for s in word])) if word else 1.0
    _, jac = compose(system, word, system.omega_probes(), check=False)
    return float(operator_norm(jac).max()) * SUP_INFLATION


def words_sup_norms(system: IFSystem, words):
    """Batched ``word_sup_norm`` for an ``(m, L)`` array of words."""
    words = np.asarray(words, dtype=int)
    if system.is_similarity:
        r = np.asarray(system.ratios)
        return np.prod(r[words], axis=1) if words.shape[1] else np.ones(len(words))
    probes = system.omega_probes()
    pts = np.broadcast_to(probes, (len(words),) + probes.shape)
    _, jac = compose_batch(system, words, pts)
    return operator_norm(jac).max(axis=1) * SUP_INFLATION
