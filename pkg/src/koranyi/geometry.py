"""Points of the closed unit ball of C^n, the pseudo-metric d(x,y)=|1-<x,y>|,
its square-root metric rho, and seeded samplers for the normalized surface
measure sigma and volume measure V, including samplers restricted to the
non-isotropic balls B(x,r) = {d(.,x) <= r}."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .util import substream

MEMBERSHIP_TOL = 1e-12
TRIANGLE_CONSTANT = math.sqrt(2.0)


def as_coords(x) -> np.ndarray:
    """Coerce a BallPoint or coordinate sequence to a complex array."""
    if isinstance(x, BallPoint):
        return x.coords
    return np.asarray(x, dtype=complex)


class BallPoint:
    """A point z of the closed unit ball of C^n; caches |z|."""

    __slots__ = ("coords", "norm")

    def __init__(self, coords):
        z = np.asarray(coords, dtype=complex).reshape(-1)
        if z.size < 1:
            raise ValueError("point needs at least one coordinate")
        nrm = float(np.linalg.norm(z))
        if nrm > 1.0 + MEMBERSHIP_TOL:
            raise ValueError(f"|z| = {nrm} exceeds 1")
        self.coords = z
        self.norm = nrm

    @property
    def n(self) -> int:
        return self.coords.size

    def __repr__(self):
        return f"BallPoint({self.coords.tolist()})"


class SpherePoint(BallPoint):
    """A point of the unit sphere S; | |z|-1 | <= 1e-12."""

    def __init__(self, coords):
        super().__init__(coords)
        if abs(self.norm - 1.0) > MEMBERSHIP_TOL:
            raise ValueError(f"|z| = {self.norm} is not on the sphere")


def hermitian_inner(z, w) -> np.ndarray:
    """<z,w> = sum_j z_j conj(w_j), broadcasting over leading axes."""
    return np.sum(as_coords(z) * np.conj(as_coords(w)), axis=-1)


def pseudo_dist(x, y):
    """d(x,y) = |1 - <x,y>|; symmetric, quasi-triangle constant sqrt(2)."""
    xz, yz = as_coords(x), as_coords(y)
    if xz.shape[-1] != yz.shape[-1]:
        raise ValueError(f"dimension mismatch: {xz.shape[-1]} vs {yz.shape[-1]}")
    d = np.abs(1.0 - np.sum(xz * np.conj(yz), axis=-1))
    return float(d) if np.ndim(d) == 0 else d


def rho(x, y):
    """The genuine metric rho = sqrt(d)."""
    return np.sqrt(pseudo_dist(x, y))


def dist_to_points(z, points) -> np.ndarray:
    """d(z, p) for a batch of z against a batch of reference points.

    z: (..., n), points: (m, n); returns (..., m).
    """
    z = as_coords(z)
    points = as_coords(points)
    return np.abs(1.0 - z @ points.conj().T)


@dataclass(frozen=True)
class MetricContext:
    """Ambient dimension plus the seeded sampler context."""

    n: int
    seed: int = 0
    triangle_constant: float = TRIANGLE_CONSTANT

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")


def sample_sphere(ctx: MetricContext, count: int, seed: int | None = None) -> np.ndarray:
    """count sigma-uniform points on S, shape (count, n); unit norm to 1e-15.

    Deterministic for fixed (seed, count): normalized complex Gaussians.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = substream(ctx.seed if seed is None else seed, "sphere")
    g = rng.standard_normal((count, ctx.n)) + 1j * rng.standard_normal((count, ctx.n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_ball(ctx: MetricContext, count: int, seed: int | None = None) -> np.ndarray:
    """count V-uniform points of the open ball, shape (count, n).

    Direction from the sphere sampler, radius with density ~ r^(2n-1).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    base = ctx.seed if seed is None else seed
    dirs_rng = substream(base, "ball-dir")
    g = dirs_rng.standard_normal((count, ctx.n)) + 1j * dirs_rng.standard_normal((count, ctx.n))
    dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    radii = substream(base, "ball-rad").random(count) ** (1.0 / (2 * ctx.n))
    return dirs * radii[:, None]


# --- non-isotropic caps -----------------------------------------------------
#
# For unit x, the map y -> <y,x> pushes sigma forward to
# (n-1)/pi (1-|lam|^2)^(n-2) dA(lam) on the disc, and V forward to
# n/pi (1-|lam|^2)^(n-1) dA(lam).  Writing lam = 1-w, the cap
# {d(.,x) <= r} is {|w| <= r, |1-w| <= 1}, where 1-|lam|^2 = 2Re w - |w|^2.


def _cap_density_integral(exponent: int, r: float) -> float:
    """Integral of (2 rho cos t - rho^2)^exponent * rho over the cap region."""
    r = min(float(r), 2.0)
    if r <= 0:
        return 0.0

    def inner(t):
        p = min(r, 2.0 * math.cos(t))
        if p <= 0:
            return 0.0
        val, _ = integrate.quad(
            lambda q: (2.0 * q * math.cos(t) - q * q) ** exponent * q, 0.0, p, limit=100
        )
        return val

    val, _ = integrate.quad(inner, -math.pi / 2, math.pi / 2, limit=100)
    return val


@lru_cache(maxsize=4096)
def sphere_cap_measure(n: int, r: float) -> float:
    """sigma(B(x,r) cap S); independent of the center x."""
    r = float(min(r, 2.0))
    if r <= 0:
        return 0.0
    if n == 1:
        # arc |1 - e^{i t}| <= r, i.e. |t| <= 2 asin(r/2)
        return 2.0 * math.asin(r / 2.0) / math.pi
    return (n - 1) / math.pi * _cap_density_integral(n - 2, r)


@lru_cache(maxsize=4096)
def ball_cap_measure(n: int, r: float) -> float:
    """V(B(x,r) cap B^n) for x on the sphere, normalized so V(B^n)=1."""
    r = float(min(r, 2.0))
    if r <= 0:
        return 0.0
    return n / math.pi * _cap_density_integral(n - 1, r)


def _tangential_unit(x: np.ndarray, count: int, rng) -> np.ndarray:
    """Unit vectors in the complex orthogonal complement of x, shape (count, n)."""
    n = x.size
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    g -= np.outer(g @ np.conj(x), x)
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero projection is a measure-zero event; resample defensively
    bad = nrm[:, 0] < 1e-12
    while np.any(bad):
        g2 = rng.standard_normal((int(bad.sum()), n)) + 1j * rng.standard_normal((int(bad.sum()), n))
        g2 -= np.outer(g2 @ np.conj(x), x)
        g[bad] = g2
        nrm = np.linalg.norm(g, axis=1, keepdims=True)
        bad = nrm[:, 0] < 1e-12
    return g / nrm


def _sample_cap_w(r: float, exponent: int, count: int, rng) -> np.ndarray:
    """w-values on {|w|<=r, |1-w|<=1} with density ~ (2Re w - |w|^2)^exponent."""
    out = np.empty(count, dtype=complex)
    got = 0
    r = min(r, 2.0)
    while got < count:
        m = max(2 * (count - got), 64)
        w = (rng.random(m) * 2 - 1 + 1j * (rng.random(m) * 2 - 1)) * r
        u = rng.random(m)
        h = 2.0 * w.real - np.abs(w) ** 2
        ok = (np.abs(w) <= r) & (h > 0)
        if exponent > 0:
            ok &= u <= (h / (2.0 * r)) ** exponent
        take = w[ok][: count - got]
        out[got : got + take.size] = take
        got += take.size
    return out


def sample_sphere_cap(x, r: float, count: int, rng) -> np.ndarray:
    """sigma-uniform points of B(x,r) cap S, shape (count, n)."""
    x = as_coords(x).reshape(-1)
    n = x.size
    if n == 1:
        tmax = 2.0 * math.asin(min(r, 2.0) / 2.0)
        t = rng.uniform(-tmax, tmax, count)
        return (x[0] * np.exp(1j * t))[:, None]
    w = _sample_cap_w(r, n - 2, count, rng)
    lam = 1.0 - w
    tang = _tangential_unit(x, count, rng)
    rad = np.sqrt(np.maximum(0.0, 1.0 - np.abs(lam) ** 2))
    return lam[:, None] * x[None, :] + rad[:, None] * tang


def sample_ball_cap(x, r: float, count: int, rng) -> np.ndarray:
    """V-uniform points of B(x,r) cap B^n for x on S, shape (count, n)."""
    x = as_coords(x).reshape(-1)
    n = x.size
    w = _sample_cap_w(r, n - 1, count, rng)
    lam = 1.0 - w
    if n == 1:
        return lam[:, None] * x[None, :]
    # tangential part: uniform in the complex (n-1)-ball, scaled by sqrt(1-|lam|^2)
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    g -= np.outer(g @ np.conj(x), x)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = rng.random(count) ** (1.0 / (2 * (n - 1)))
    rad = np.sqrt(np.maximum(0.0, 1.0 - np.abs(lam) ** 2)) * radius
    return lam[:, None] * x[None, :] + rad[:, None] * g
