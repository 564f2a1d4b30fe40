"""Generators for the example boundary sets E on the unit sphere and a
uniform distance-oracle interface d(z, E).

Every set carries a finite net covering E plus, where the kind allows it,
an exact parametric distance; downstream code only ever needs d(z,E), the
net (for probes and packing counts), and the thickening predicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .util import substream

SET_KINDS = (
    "finite",
    "cantor-arc",
    "transverse-circle",
    "tangential-torus",
    "cantor-fiber",
    "full-sphere",
)


def cantor_endpoints(ratio: float, depth: int) -> np.ndarray:
    """Endpoints of the depth-k construction intervals of the ratio-r Cantor
    set in [0,1]; 2^(depth+1) sorted values, no RNG."""
    if not 0.0 < ratio < 0.5:
        raise ValueError("cantor ratio must lie in (0, 1/2)")
    if depth < 1:
        raise ValueError("cantor depth must be >= 1")
    starts = np.array([0.0])
    length = 1.0
    for _ in range(depth):
        starts = np.concatenate([starts, starts + (1.0 - ratio) * length])
        length *= ratio
    return np.sort(np.concatenate([starts, starts + length]))


@dataclass
class CantorFiberParams:
    """Parameters of the union of rotated real spheres over a Cantor set."""

    ratio: float
    depth: int
    n: int

    def __post_init__(self):
        if not 0.0 < self.ratio < 0.5:
            raise ValueError("ratio must lie in (0, 1/2)")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.n < 2:
            raise ValueError("cantor-fiber sets need n >= 2")

    @property
    def delta(self) -> float:
        return math.log(2.0) / math.log(1.0 / self.ratio)

    def t_values(self) -> np.ndarray:
        return cantor_endpoints(self.ratio, self.depth) - 0.5


def real_sphere_net(n: int, count: int, seed: int) -> np.ndarray:
    """Net on the real sphere {z in S : Im z_j = 0}; exact grid for n=2."""
    if n == 2:
        t = 2.0 * math.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1).astype(complex)
    rng = substream(seed, "real-sphere", n, count)
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g.astype(complex)


def _torus_distance_n2(z: np.ndarray, grid: int = 512, refine: int = 3) -> np.ndarray:
    """Exact parametric d(z, {(cos u, sin u)}) for z of shape (..., 2).

    Dense grid on the 1-d parameter followed by local three-point
    refinement; error ~ (grid step / 4^refine)^2.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape[:-1]
    flat = z.reshape(-1, 2)
    u = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
    step = 2.0 * math.pi / grid
    c = np.cos(u)[None, :]
    s = np.sin(u)[None, :]
    vals = np.abs(1.0 - flat[:, :1] * c - flat[:, 1:2] * s)
    best = np.argmin(vals, axis=1)
    u0 = u[best]
    for _ in range(refine):
        step /= 8.0
        offs = np.linspace(-4.0, 4.0, 9) * step
        cand = u0[:, None] + offs[None, :]
        vals = np.abs(1.0 - flat[:, :1] * np.cos(cand) - flat[:, 1:2] * np.sin(cand))
        u0 = np.take_along_axis(cand, np.argmin(vals, axis=1)[:, None], axis=1)[:, 0]
    d = np.abs(1.0 - flat[:, 0] * np.cos(u0) - flat[:, 1] * np.sin(u0))
    return d.reshape(shape)


@dataclass
class BoundarySet:
    """A closed subset of S given by a net plus a distance oracle."""

    kind: str
    n: int
    params: dict
    seed: int
    net: np.ndarray = field(repr=False)
    h_net: float
    exact: bool

    def distance(self, z):
        """d(z, E); exact closed form where available, else net minimum."""
        z = geo.as_coords(z)
        if z.shape[-1] != self.n:
            raise ValueError(f"dimension mismatch: point has n={z.shape[-1]}, set has n={self.n}")
        if self.kind == "full-sphere":
            d = np.abs(1.0 - np.linalg.norm(z, axis=-1))
        elif self.kind == "transverse-circle":
            d = np.abs(1.0 - np.abs(z[..., 0]))
        elif self.kind == "tangential-torus" and self.n == 2:
            d = _torus_distance_n2(z)
        elif self.kind == "cantor-fiber" and self.n == 2:
            d = self._fiber_distance(z)
        else:
            d = self.net_distance(z)
        return float(d) if np.ndim(d) == 0 else d

    def net_distance(self, z):
        """min over net points of d(z, .); within 2*h_net of the truth."""
        z = geo.as_coords(z)
        d = geo.dist_to_points(z, self.net).min(axis=-1)
        return float(d) if np.ndim(d) == 0 else d

    def nearest_net_index(self, z):
        """Index of the nearest net point; ties break to the lowest index."""
        d = geo.dist_to_points(geo.as_coords(z), self.net)
        return np.argmin(d, axis=-1)

    def _fiber_distance(self, z):
        t = self.params["_t_values"]
        z = np.asarray(z, dtype=complex)
        shape = z.shape[:-1]
        flat = z.reshape(-1, self.n)
        out = np.full(flat.shape[0], np.inf)
        block = max(1, int(2e6 // max(t.size, 1)))
        rot = np.exp(-1j * t)
        for lo in range(0, flat.shape[0], block):
            zz = flat[lo : lo + block]
            w = zz[:, None, :] * rot[None, :, None]
            d = _torus_distance_n2(w.reshape(-1, 2), grid=256, refine=2)
            out[lo : lo + zz.shape[0]] = d.reshape(zz.shape[0], t.size).min(axis=1)
        return out.reshape(shape)

    def in_thickening(self, z, eps: float):
        """Indicator of the eps-thickening E_eps = {d(z,E) < eps}."""
        return self.distance(z) < eps

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Seeded draw of count points of E (from the net)."""
        rng = substream(seed, "set-sample", self.kind)
        idx = rng.integers(0, self.net.shape[0], size=count)
        return self.net[idx]

    def refine(self) -> "BoundarySet":
        """Same set at the next finer resolution (depth+1 or doubled net)."""
        p = {k: v for k, v in self.params.items() if not k.startswith("_")}
        if self.kind in ("cantor-arc", "cantor-fiber"):
            p["depth"] = p["depth"] + 1
        elif self.kind in ("transverse-circle", "tangential-torus", "full-sphere"):
            p["count"] = 2 * p.get("count", self.net.shape[0])
        else:
            return self
        return make_set(self.kind, n=self.n, seed=self.seed, **p)

    def descriptor(self) -> dict:
        p = {k: v for k, v in self.params.items() if not k.startswith("_")}
        return {"kind": self.kind, "n": self.n, "seed": self.seed, "params": p}

    @property
    def diameter(self) -> float:
        if self.kind == "finite" and self.net.shape[0] == 1:
            return 0.0
        return 2.0


def from_descriptor(desc: dict) -> BoundarySet:
    return make_set(desc["kind"], n=desc["n"], seed=desc.get("seed", 0), **desc.get("params", {}))


def make_set(kind: str, n: int | None = None, seed: int = 0, **params) -> BoundarySet:
    """Build one of the example boundary sets; deterministic per seed."""
    if kind not in SET_KINDS:
        raise ValueError(f"unknown set kind {kind!r}; expected one of {SET_KINDS}")

    if kind == "finite":
        pts = np.asarray(params["points"], dtype=complex)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = pts.shape[1]
        nrm = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(nrm - 1.0) > geo.MEMBERSHIP_TOL):
            raise ValueError("finite-set points must lie on the sphere")
        return BoundarySet(kind, n, {"points": pts.tolist()}, seed, pts, 0.0, True)

    if kind == "cantor-arc":
        n = 1 if n is None else n
        if n != 1:
            raise ValueError("cantor-arc lives on the circle (n=1)")
        ratio = float(params.get("ratio", 1.0 / 3.0))
        depth = int(params.get("depth", 8))
        arc = float(params.get("arc", 1.0))
        t = cantor_endpoints(ratio, depth)
        net = np.exp(1j * arc * t)[:, None]
        h = arc * ratio**depth
        return BoundarySet(
            kind, 1, {"ratio": ratio, "depth": depth, "arc": arc}, seed, net, h, False
        )

    if kind == "transverse-circle":
        n = 2 if n is None else n
        count = int(params.get("count", 512))
        t = 2.0 * math.pi * np.arange(count) / count
        net = np.zeros((count, n), dtype=complex)
        net[:, 0] = np.exp(1j * t)
        h = abs(1.0 - np.exp(1j * 2.0 * math.pi / count)) / 2.0
        return BoundarySet(kind, n, {"count": count}, seed, net, h, True)

    if kind == "tangential-torus":
        n = 2 if n is None else n
        count = int(params.get("count", 512))
        net = real_sphere_net(n, count, seed)
        if n == 2:
            gap = 2.0 * math.pi / count
            h = 1.0 - math.cos(gap / 2.0)
        else:
            h = float(params.get("h_net", 0.05))
        return BoundarySet(kind, n, {"count": count}, seed, net, h, n == 2)

    if kind == "cantor-fiber":
        n = 2 if n is None else n
        cf = CantorFiberParams(
            ratio=float(params.get("ratio", 1.0 / 3.0)),
            depth=int(params.get("depth", 8)),
            n=n,
        )
        per_fiber = int(params.get("count", 64))
        t = cf.t_values()
        base = real_sphere_net(n, per_fiber, seed)
        net = (np.exp(1j * t)[:, None, None] * base[None, :, :]).reshape(-1, n)
        gap = 2.0 * math.pi / per_fiber
        h = cf.ratio**cf.depth + (1.0 - math.cos(gap / 2.0))
        p = {
            "ratio": cf.ratio,
            "depth": cf.depth,
            "count": per_fiber,
            "delta": cf.delta,
            "_t_values": t,
        }
        return BoundarySet(kind, n, p, seed, net, h, n == 2)

    if kind == "full-sphere":
        n = 2 if n is None else n
        count = int(params.get("count", 1000))
        ctx = geo.MetricContext(n, seed=seed)
        net = geo.sample_sphere(ctx, count, seed=seed)
        h = (1.0 / count) ** (1.0 / n)
        return BoundarySet(kind, n, {"count": count}, seed, net, h, True)

    raise AssertionError
