"""
Feasible sets, mirror maps and Bregman projections.

Supported (mirror map, set) pairs all have closed-form regularized Bregman
projections:

    euclidean        x  box, ball, simplex
    negative_entropy x  simplex (floored at ``eps`` so the gradient stays finite)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, xlogy

SET_KINDS = ("box", "ball", "simplex")
MAP_KINDS = ("euclidean", "negative_entropy")

ENTROPY_EPS = 1e-6


class DomainError(ValueError):
    """Point outside the domain of a mirror map or set."""


# ---------------------------------------------------------------------------
# Feasible sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeasibleSet:
    """A box, Euclidean ball or probability simplex in R^dim."""

    kind: str
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center_point: np.ndarray | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ValueError(f"unknown feasible set kind {self.kind!r}; expected one of {SET_KINDS}")
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        if self.kind == "box":
            if self.lo.shape != (self.dim,) or self.hi.shape != (self.dim,):
                raise ValueError("box bounds must have shape (dim,)")
            if np.any(self.lo > self.hi):
                raise ValueError("box lower bound exceeds upper bound")
        elif self.kind == "ball":
            if self.radius is None or self.radius <= 0:
                raise ValueError("ball radius must be positive")
        elif self.dim < 2:
            raise ValueError("simplex needs dimension >= 2")

    @classmethod
    def box(cls, lo, hi) -> "FeasibleSet":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls("box", lo.size, lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "FeasibleSet":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("ball", c.size, center_point=c, radius=float(radius))

    @classmethod
    def simplex(cls, dim: int) -> "FeasibleSet":
        return cls("simplex", int(dim))

    @classmethod
    def from_spec(cls, spec: dict, dim: int) -> "FeasibleSet":
        """Build from a config mapping, e.g. ``{"kind": "box", "lo": 0, "hi": 1}``."""
        kind = spec.get("kind")
        if kind == "box":
            lo = np.broadcast_to(np.asarray(spec.get("lo", 0.0), dtype=float), (dim,))
            hi = np.broadcast_to(np.asarray(spec.get("hi", 1.0), dtype=float), (dim,))
            return cls.box(lo.copy(), hi.copy())
        if kind == "ball":
            c = np.broadcast_to(np.asarray(spec.get("center", 0.0), dtype=float), (dim,))
            return cls.ball(c.copy(), spec.get("radius", 1.0))
        if kind == "simplex":
            return cls.simplex(dim)
        raise ValueError(f"unknown feasible set kind {kind!r}; expected one of {SET_KINDS}")

    def to_spec(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}
        if self.kind == "ball":
            return {"kind": "ball", "center": self.center_point.tolist(), "radius": self.radius}
        return {"kind": "simplex"}

    @property
    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.hi - self.lo))
        if self.kind == "ball":
            return 2.0 * self.radius
        return float(np.sqrt(2.0))

    @property
    def center(self) -> np.ndarray:
        """Box midpoint, ball center or uniform simplex point."""
        if self.kind == "box":
            return 0.5 * (self.lo + self.hi)
        if self.kind == "ball":
            return self.center_point.copy()
        return np.full(self.dim, 1.0 / self.dim)

    @property
    def inradius(self) -> float:
        """Radius of the largest ball around `center` inside the set (within its affine hull)."""
        if self.kind == "box":
            return float(0.5 * np.min(self.hi - self.lo))
        if self.kind == "ball":
            return self.radius
        return float(1.0 / np.sqrt(self.dim * (self.dim - 1)))

    @property
    def max_norm(self) -> float:
        """sup over the set of ||x||."""
        if self.kind == "box":
            return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))
        if self.kind == "ball":
            return float(np.linalg.norm(self.center_point) + self.radius)
        return 1.0

    def tangent(self, v) -> np.ndarray:
        """Component of `v` parallel to the set's affine hull."""
        v = np.asarray(v, dtype=float)
        if self.kind == "simplex":
            return v - v.mean(axis=-1, keepdims=True)
        return v

    def initial_point(self) -> np.ndarray:
        """The origin when it belongs to the set, otherwise `center`."""
        zero = np.zeros(self.dim)
        return zero if self.contains(zero) else self.center

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return False
        if self.kind == "box":
            return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))
        if self.kind == "ball":
            return bool(np.linalg.norm(x - self.center_point) <= self.radius + tol)
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)

    def project(self, y) -> np.ndarray:
        return project(self, y)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Random points of the set, shape (size, dim)."""
        if self.kind == "box":
            return self.lo + (self.hi - self.lo) * rng.random((size, self.dim))
        if self.kind == "ball":
            dirs = rng.standard_normal((size, self.dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            r = self.radius * rng.random(size) ** (1.0 / self.dim)
            return self.center_point + dirs * r[:, None]
        return rng.dirichlet(np.ones(self.dim), size)


def _simplex_projection(y: np.ndarray) -> np.ndarray:
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def project(X: FeasibleSet, y) -> np.ndarray:
    """Euclidean projection argmin_{x in X} ||x - y||^2."""
    y = np.asarray(y, dtype=float)
    if y.shape != (X.dim,):
        raise ValueError(f"expected a vector of length {X.dim}, got shape {y.shape}")
    if X.kind == "box":
        return np.clip(y, X.lo, X.hi)
    if X.kind == "ball":
        offset = y - X.center_point
        dist = np.linalg.norm(offset)
        if dist <= X.radius:
            return y.copy()
        return X.center_point + offset * (X.radius / dist)
    return _simplex_projection(y)


def nonneg_project(v) -> np.ndarray:
    """Projection onto the nonnegative orthant, [v]_+."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


# ---------------------------------------------------------------------------
# Mirror maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MirrorMap:
    """Generating function R with its strong-convexity modulus and Bregman Lipschitz constant.

    `K` is valid on the paired feasible set; for the entropy map that is the
    floored simplex {x in simplex : x_k >= eps}.
    """

    kind: str
    dim: int
    mu: float
    K: float
    eps: float = 0.0
    set_kind: str = field(default="box")

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return 0.5 * float(x @ x)
        if np.any(x < 0):
            raise DomainError("negative entropy is undefined for negative coordinates")
        return float(np.sum(xlogy(x, x)))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return x.copy()
        if np.any(x <= 0):
            raise DomainError("negative-entropy gradient needs strictly positive coordinates")
        return np.log(x) + 1.0

    def bregman(self, x, y) -> float:
        return bregman(self, x, y)


def make_mirror_map(kind: str, X: FeasibleSet, eps: float = ENTROPY_EPS) -> MirrorMap:
    """Mirror map of `kind` paired with `X`, with K computed for that set."""
    if kind == "euclidean":
        return MirrorMap("euclidean", X.dim, mu=1.0, K=X.diameter + X.max_norm, set_kind=X.kind)
    if kind == "negative_entropy":
        if X.kind != "simplex":
            raise ValueError(f"negative_entropy mirror map is only supported on the simplex, not {X.kind!r}")
        d = X.dim
        if not 0 < eps < 1.0 / d:
            raise ValueError(f"entropy floor eps must lie in (0, 1/{d}), got {eps}")
        # grad_x D(x, y) = log x - log y; each coordinate ratio is bounded on the floored simplex
        top = 1.0 - (d - 1) * eps
        K = float(np.sqrt(d) * np.log(top / eps))
        return MirrorMap("negative_entropy", d, mu=1.0, K=K, eps=eps, set_kind="simplex")
    raise ValueError(f"unknown mirror map {kind!r}; expected one of {MAP_KINDS}")


def bregman(mirror: MirrorMap, x, y) -> float:
    """D_R(x, y) = R(x) - R(y) - <x - y, grad R(y)>."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if mirror.kind == "euclidean":
        diff = x - y
        return 0.5 * float(diff @ diff)
    if np.any(y <= 0):
        raise DomainError("negative-entropy Bregman divergence needs y strictly positive")
    if np.any(x < 0):
        raise DomainError("negative-entropy Bregman divergence needs x nonnegative")
    return float(np.sum(xlogy(x, x) - xlogy(x, y) - x + y))


def floor_to_simplex(w: np.ndarray, eps: float) -> np.ndarray:
    """Solve y_k = max(eps, s * w_k) with sum(y) = 1 for the scalar s > 0.

    For w proportional to z * exp(-alpha * a) this is the exact entropic
    regularized projection onto the floored simplex.
    """
    w = np.asarray(w, dtype=float)
    d = w.size
    if eps <= 0:
        return w / w.sum()
    floored = np.zeros(d, dtype=bool)
    while True:
        free = ~floored
        s = (1.0 - eps * np.count_nonzero(floored)) / w[free].sum()
        newly = free & (s * w < eps)
        if not newly.any():
            break
        floored |= newly
    y = np.where(floored, eps, s * w)
    return y


def regularized_projection(mirror: MirrorMap, X: FeasibleSet, z, a, alpha: float) -> np.ndarray:
    """argmin_{x in X} alpha * <x, a> + D_R(x, z)."""
    if not alpha > 0:
        raise ValueError(f"step size alpha must be positive, got {alpha}")
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    if z.shape != (X.dim,) or a.shape != (X.dim,):
        raise ValueError(f"expected vectors of length {X.dim}, got {z.shape} and {a.shape}")
    if mirror.kind == "euclidean":
        return project(X, z - alpha * a)
    if mirror.kind == "negative_entropy" and X.kind == "simplex":
        if np.any(z <= 0):
            raise DomainError("entropic projection needs a strictly positive anchor point")
        logits = np.log(z) - alpha * a
        w = np.exp(logits - logsumexp(logits))
        return floor_to_simplex(w, mirror.eps)
    raise ValueError(f"unsupported (mirror map, set) pair ({mirror.kind}, {X.kind})")


def three_point_gap(mirror: MirrorMap, z, a, alpha: float, y, xs) -> float:
    """Largest violation over rows of `xs` of

        <y - x, alpha * a> <= D(x, z) - D(x, y) - D(y, z)

    for y the regularized projection of z. Nonpositive means it holds everywhere.
    """
    y = np.asarray(y, dtype=float)
    dyz = bregman(mirror, y, z)
    worst = -np.inf
    for x in np.atleast_2d(xs):
        lhs = alpha * float((y - x) @ a)
        rhs = bregman(mirror, x, z) - bregman(mirror, x, y) - dyz
        worst = max(worst, lhs - rhs)
    return float(worst)
