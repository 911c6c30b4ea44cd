"""C^2 maps used to build iterated function systems.

Every map works on batches: ``x`` has shape ``(..., d)``, ``__call__``
returns the same shape and ``jacobian`` returns ``(..., d, d)``.
"""
from __future__ import annotations

import numpy as np

ORTHO_TOL = 1e-12


class SmoothMap:
    """Base evaluation contract.

    Subclasses implement ``__call__`` and ``jacobian``. ``inverse`` falls
    back to a damped Newton iteration, which is adequate for the
    near-conformal contractions this package deals with.
    """

    dim: int
    #: similarity ratio when the map is a similarity, else None
    ratio: float | None = None

    def __call__(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def value_and_jacobian(self, x):
        return self(x), self.jacobian(x)

    def inverse(self, y, x0=None, tol=1e-13, max_iter=100):
        y = np.asarray(y, dtype=float)
        x = np.array(y if x0 is None else x0, dtype=float)
        for _ in range(max_iter):
            res = self(x) - y
            step = np.linalg.solve(self.jacobian(x), res[..., None])[..., 0]
            x = x - step
            if np.max(np.abs(step), initial=0.0) <= tol:
                break
        return x


class Similarity(SmoothMap):
    """x -> scale * orthogonal @ x + translation."""

    def __init__(self, scale, orthogonal=None, translation=None, dim=None):
        scale = float(scale)
        if not 0.0 < scale < 1.0:
            raise ValueError(f"similarity scale must lie in (0,1), got {scale}")
        if orthogonal is None:
            if dim is None:
                dim = len(translation) if translation is not None else 1
            orthogonal = np.eye(dim)
        orthogonal = np.atleast_2d(np.asarray(orthogonal, dtype=float))
        d = orthogonal.shape[0]
        if orthogonal.shape != (d, d):
            raise ValueError("orthogonal part must be square")
        if np.max(np.abs(orthogonal.T @ orthogonal - np.eye(d))) > ORTHO_TOL:
            raise ValueError("orthogonal part fails Q^T Q = I to 1e-12")
        translation = np.zeros(d) if translation is None else np.asarray(translation, dtype=float)
        if translation.shape != (d,):
            raise ValueError("translation has the wrong length")
        self.dim = d
        self.scale = scale
        self.orthogonal = orthogonal
        self.translation = translation
        self.ratio = scale
        self.linear = scale * orthogonal

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.linear.T + self.translation

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.linear, x.shape[:-1] + (self.dim, self.dim)).copy()

    def inverse(self, y, x0=None, tol=None, max_iter=None):
        y = np.asarray(y, dtype=float)
        return (y - self.translation) @ self.orthogonal / self.scale

    def is_axis_aligned(self):
        """True when the orthogonal part is a signed permutation."""
        q = np.abs(self.orthogonal)
        return bool(np.all((np.abs(q - 1.0) < ORTHO_TOL) | (q < ORTHO_TOL)))

    def __repr__(self):
        return f"Similarity(scale={self.scale!r}, translation={self.translation.tolist()!r})"


class Isometry(SmoothMap):
    """Rigid motion x -> orthogonal @ x + translation, used as a chart."""

    def __init__(self, orthogonal, translation=None):
        orthogonal = np.atleast_2d(np.asarray(orthogonal, dtype=float))
        d = orthogonal.shape[0]
        if np.max(np.abs(orthogonal.T @ orthogonal - np.eye(d))) > ORTHO_TOL:
            raise ValueError("isometry needs an orthogonal matrix")
        self.dim = d
        self.orthogonal = orthogonal
        self.translation = np.zeros(d) if translation is None else np.asarray(translation, dtype=float)
        self.ratio = 1.0

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.orthogonal.T + self.translation

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.orthogonal, x.shape[:-1] + (self.dim, self.dim)).copy()

    def inverse(self, y, x0=None, tol=None, max_iter=None):
        return (np.asarray(y, dtype=float) - self.translation) @ self.orthogonal


def smoothstep5(u):
    """Quintic smoothstep 6u^5 - 15u^4 + 10u^3 clamped to [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def smoothstep5_prime(u):
    inside = (u > 0.0) & (u < 1.0)
    uc = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * uc * uc * (1.0 - uc) ** 2, 0.0)


def smoothstep5_second(u):
    inside = (u > 0.0) & (u < 1.0)
    uc = np.clip(u, 0.0, 1.0)
    return np.where(inside, 60.0 * uc * (1.0 - uc) * (1.0 - 2.0 * uc), 0.0)


class Deformation(SmoothMap):
    """Radial inflation h(p) = g(p_last) * p.

    g is 1 below 1/3, ``c2`` above 2/3 and a quintic smoothstep in between,
    so g' and g'' vanish at both junctions. The last coordinate plays the
    role of ``z``.
    """

    bisect_tol = 1e-12
    bisect_max_iter = 200

    def __init__(self, c2, dim=3):
        c2 = float(c2)
        if c2 < 1.0:
            raise ValueError(f"plateau value c2 must be >= 1, got {c2}")
        self.c2 = c2
        self.dim = int(dim)

    def g(self, z):
        return 1.0 + (self.c2 - 1.0) * smoothstep5(3.0 * np.asarray(z, dtype=float) - 1.0)

    def dg(self, z):
        return 3.0 * (self.c2 - 1.0) * smoothstep5_prime(3.0 * np.asarray(z, dtype=float) - 1.0)

    def d2g(self, z):
        return 9.0 * (self.c2 - 1.0) * smoothstep5_second(3.0 * np.asarray(z, dtype=float) - 1.0)

    @property
    def sup_dg(self):
        return (self.c2 - 1.0) * 45.0 / 8.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.g(x[..., -1])[..., None] * x

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        z = x[..., -1]
        jac = self.g(z)[..., None, None] * np.eye(self.dim)
        jac[..., :, -1] += self.dg(z)[..., None] * x
        return jac

    def jacobian_inverse(self, x):
        """Closed-form inverse of the rank-one update g I + g' p e_last^T."""
        x = np.asarray(x, dtype=float)
        z = x[..., -1]
        g, dg = self.g(z), self.dg(z)
        inv = np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()
        inv[..., :, -1] -= (dg / (g + dg * z))[..., None] * x
        return inv / g[..., None, None]

    def invert_height(self, zt):
        """Solve g(z) z = zt for z; the left side is strictly increasing."""
        zt = np.asarray(zt, dtype=float)
        z = np.where(zt <= 1.0 / 3.0, zt, zt / self.c2)
        band = (zt > 1.0 / 3.0) & (zt < 2.0 * self.c2 / 3.0)
        if not np.any(band):
            return z
        lo = np.full(zt[band].shape, 1.0 / 3.0)
        hi = np.full(zt[band].shape, 2.0 / 3.0)
        target = zt[band]
        for _ in range(self.bisect_max_iter):
            mid = 0.5 * (lo + hi)
            above = self.g(mid) * mid > target
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
            if np.max(hi - lo) <= self.bisect_tol:
                break
        z = z.copy()
        z[band] = 0.5 * (lo + hi)
        return z

    def inverse(self, y, x0=None, tol=None, max_iter=None):
        y = np.asarray(y, dtype=float)
        z = self.invert_height(y[..., -1])
        return y / self.g(z)[..., None]

    def __repr__(self):
        return f"Deformation(c2={self.c2!r}, dim={self.dim})"


class Conjugated(SmoothMap):
    """h o inner o h^{-1} for a diffeomorphism ``h``."""

    def __init__(self, inner: SmoothMap, h: SmoothMap):
        if inner.dim != h.dim:
            raise ValueError("inner map and conjugating map disagree on dimension")
        self.inner = inner
        self.h = h
        self.dim = inner.dim
        # conjugating by a rigid motion keeps a similarity a similarity
        self.ratio = inner.ratio if isinstance(h, Isometry) else None

    def __call__(self, x):
        u = self.h.inverse(x)
        return self.h(self.inner(u))

    def jacobian(self, x):
        return self.value_and_jacobian(x)[1]

    def value_and_jacobian(self, x):
        u = self.h.inverse(x)
        v = self.inner(u)
        hv, jv = self.h.value_and_jacobian(v)
        if hasattr(self.h, "jacobian_inverse"):
            hinv = self.h.jacobian_inverse(u)
        else:
            hinv = np.linalg.inv(self.h.jacobian(u))
        return hv, jv @ self.inner.jacobian(u) @ hinv

    def inverse(self, y, x0=None, tol=None, max_iter=None):
        return self.h(self.inner.inverse(self.h.inverse(y)))

    def __repr__(self):
        return f"Conjugated({self.inner!r}, {self.h!r})"


class FunctionMap(SmoothMap):
    """User-supplied C^2 map given by vectorised callables."""

    def __init__(self, func, jac, dim, inverse=None):
        self._func = func
        self._jac = jac
        self._inv = inverse
        self.dim = int(dim)

    def __call__(self, x):
        return self._func(np.asarray(x, dtype=float))

    def jacobian(self, x):
        return self._jac(np.asarray(x, dtype=float))

    def inverse(self, y, x0=None, tol=1e-13, max_iter=100):
        if self._inv is not None:
            return self._inv(np.asarray(y, dtype=float))
        return super().inverse(y, x0=x0, tol=tol, max_iter=max_iter)


def _gram_eigs(jac):
    jac = np.asarray(jac, dtype=float)
    gram = np.swapaxes(jac, -1, -2) @ jac
    return np.clip(np.linalg.eigvalsh(gram), 0.0, None)


def operator_norm(jac):
    """Largest singular value, batched over leading axes."""
    jac = np.asarray(jac, dtype=float)
    if jac.shape[-1] == 1:
        return np.abs(jac[..., 0, 0])
    return np.sqrt(_gram_eigs(jac)[..., -1])


def conorm(jac):
    """Smallest singular value |A^{-1}|^{-1}, batched."""
    jac = np.asarray(jac, dtype=float)
    if jac.shape[-1] == 1:
        return np.abs(jac[..., 0, 0])
    return np.linalg.svd(jac, compute_uv=False)[..., -1]
