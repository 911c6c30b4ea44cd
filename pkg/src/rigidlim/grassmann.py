"""Linear subspaces of R^d with the projection metric, cones and tubes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCloudError, DimensionMismatchError, SingularMapError

ORTHO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Subspace:
    """An element of G(d, l) stored as a d x l orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        d, l = b.shape
        if not 0 < l < d:
            raise DimensionMismatchError(f"need 0 < l < d, got l={l}, d={d}")
        if np.max(np.abs(b.T @ b - np.eye(l))) > ORTHO_TOL:
            b = np.linalg.qr(b)[0]
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors):
        """Orthonormalised span of the columns of ``vectors``."""
        a = np.asarray(vectors, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        q, r = np.linalg.qr(a)
        if np.min(np.abs(np.diag(r))) < 1e-12:
            raise DegenerateCloudError("spanning vectors are linearly dependent")
        return cls(q)

    @classmethod
    def random(cls, d, l, rng):
        return cls(np.linalg.qr(rng.standard_normal((d, l)))[0])

    @property
    def dim_ambient(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def P(self):
        return self.basis @ self.basis.T

    @property
    def Q(self):
        return np.eye(self.dim_ambient) - self.P

    def perp(self):
        u, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(u[:, self.dim :])

    def residual(self, v):
        """|Q_V v| along the last axis of ``v``."""
        v = np.asarray(v, dtype=float)
        # explicit difference; |v|^2 - |P v|^2 cancels badly near V
        return np.linalg.norm(v - (v @ self.basis) @ self.basis.T, axis=-1)

    def along(self, v):
        """|P_V v| along the last axis of ``v``."""
        return np.linalg.norm(np.asarray(v, dtype=float) @ self.basis, axis=-1)

    def as_list(self):
        return self.basis.tolist()


def _check_pair(V, W):
    if V.dim_ambient != W.dim_ambient or V.dim != W.dim:
        raise DimensionMismatchError(
            f"G({V.dim_ambient},{V.dim}) vs G({W.dim_ambient},{W.dim})"
        )


def metric(V: Subspace, W: Subspace) -> float:
    """Operator norm of Q_V - Q_W."""
    _check_pair(V, W)
    return float(np.linalg.norm(V.Q - W.Q, ord=2))


def salli_distance(V: Subspace, W: Subspace) -> float:
    """sup over unit x in V of dist(x, W): top singular value of Q_W on V."""
    _check_pair(V, W)
    return float(np.linalg.svd(W.Q @ V.basis, compute_uv=False)[0])


def principal_angles(V: Subspace, W: Subspace):
    _check_pair(V, W)
    s = np.linalg.svd(V.basis.T @ W.basis, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class Cone:
    """X(a, V, delta), truncated to B(a, radius) when ``radius`` is set."""

    apex: np.ndarray
    plane: Subspace
    delta: float
    radius: float | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("cone opening delta must lie in (0, 1)")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("truncation radius must be positive")
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float))


@dataclass(frozen=True, eq=False)
class Tube:
    """V_a(width): points within ``width`` of the affine plane V + a."""

    apex: np.ndarray
    plane: Subspace
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("tube width must be positive")
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float))


def cone_contains(cone: Cone, x):
    """|Q_V(x-a)| < delta^{1/2} |x-a|, and |x-a| < r if truncated.

    Vectorised over leading axes of ``x``. The apex itself is outside.
    """
    v = np.asarray(x, dtype=float) - cone.apex
    norm = np.linalg.norm(v, axis=-1)
    inside = cone.plane.residual(v) < np.sqrt(cone.delta) * norm
    if cone.radius is not None:
        inside &= norm < cone.radius
    return inside


def tube_contains(tube: Tube, x):
    v = np.asarray(x, dtype=float) - tube.apex
    return tube.plane.residual(v) < tube.width


def map_subspace(A, V: Subspace) -> Subspace:
    """A V, orthonormalised."""
    A = np.asarray(A, dtype=float)
    if A.shape != (V.dim_ambient, V.dim_ambient):
        raise DimensionMismatchError("matrix does not act on the ambient space")
    if np.linalg.svd(A, compute_uv=False)[-1] <= 1e-12:
        raise SingularMapError("map_subspace needs a nonsingular matrix")
    return Subspace(np.linalg.qr(A @ V.basis)[0])


def fit_plane(points, weights, apex, l) -> Subspace:
    """l-plane through the apex minimising the weighted squared residual.

    Uses the top-l eigenvectors of sum_k w_k (p_k - a)(p_k - a)^T.
    """
    p = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if p.ndim != 2 or len(w) != len(p):
        raise ValueError("points and weights must align")
    v = p - np.asarray(apex, dtype=float)
    keep = w > 0
    if keep.sum() < l:
        raise DegenerateCloudError(f"need at least {l} points with positive weight")
    moment = (v[keep] * w[keep, None]).T @ v[keep]
    evals, evecs = np.linalg.eigh(moment)
    top = evals[::-1][:l]
    if top[-1] <= 1e-12 * max(top[0], 1e-300):
        raise DegenerateCloudError("moment matrix has rank below l")
    return Subspace(evecs[:, ::-1][:, :l])


def plane_from_angle(theta):
    """Line in R^2 at angle ``theta`` to the first axis."""
    return Subspace(np.array([[np.cos(theta)], [np.sin(theta)]]))
