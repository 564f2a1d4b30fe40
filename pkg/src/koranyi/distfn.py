"""The explicit holomorphic-distance-function constructions (atomic kernel
ratio, covering sum, rotated-peak-function sum for the Cantor-fiber set)
and a verifier for the two defining bounds |h| ~ d(.,E) and
|Xh| <= C d(.,E)^(1-omega(X)).

All fractional powers are principal-branch; every construction first
checks its argument stays in a sector avoiding the negative real axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .dyadic import AtomicMeasure
from .jets import PoleError, frame_at
from .sets import BoundarySet, CantorFiberParams, cantor_endpoints
from .util import substream

SECTOR_MARGIN = 5e-3


class SectorError(ValueError):
    """A ratio crossed the negative real axis; carries the offending z."""

    def __init__(self, z):
        super().__init__(f"branch sector violated at z = {np.asarray(z).tolist()}")
        self.z = z


def h_q_eval(mu: AtomicMeasure, q: float, z):
    """sum_i w_i (1 - <z, atom_i>)^(-q), principal branch.

    Single-valued on the ball: Re(1 - <z, atom>) >= 0 with equality only
    at the atom itself (a pole).
    """
    if q <= 0:
        raise ValueError("q must be positive")
    z = geo.as_coords(z)
    c = 1.0 - z @ np.conj(mu.atoms).T  # (..., m)
    if np.any(np.abs(c) < 1e-14):
        raise PoleError("z coincides with an atom of the measure")
    vals = np.sum(mu.weights * c ** (-q), axis=-1)
    return complex(vals) if np.ndim(vals) == 0 else vals


@dataclass
class HoloDistanceFn:
    """Evaluator z -> h(z) with |h| comparable to d(z, E)."""

    kind: str
    params: dict
    bset: BoundarySet | None
    _eval: callable = field(repr=False)

    def __call__(self, z):
        return self._eval(z)


def ratio_distance_fn(mu: AtomicMeasure, q1: float, q2: float, bset: BoundarySet | None = None) -> HoloDistanceFn:
    """h = (h_{q2}/h_{q1})^(1/(q1-q2)); |h| = d exactly on one atom.

    Requires s < q1 < q2 < 1 for the measure's upper exponent s; the
    ratio stays in the sector |arg| < (q1+q2) pi/2 < pi, so the
    principal root is single-valued.  A sector violation raises
    SectorError with the offending point.
    """
    if not 0 < q1 < q2 < 1:
        raise ValueError("need 0 < q1 < q2 < 1")
    if mu.s_target is not None and q1 <= mu.s_target:
        raise ValueError(f"q1 = {q1} must exceed the measure exponent s = {mu.s_target}")

    def evaluate(z):
        ratio = h_q_eval(mu, q2, z) / h_q_eval(mu, q1, z)
        arg = np.angle(ratio)
        if np.any(np.abs(arg) > math.pi - SECTOR_MARGIN):
            bad = np.argmax(np.abs(arg))
            zz = np.asarray(z)
            raise SectorError(zz if zz.ndim <= 1 else zz.reshape(-1, zz.shape[-1])[bad])
        return np.exp(np.log(ratio) / (q1 - q2))

    return HoloDistanceFn("ratio", {"q1": q1, "q2": q2}, bset, evaluate)


def build_coverings(bset: BoundarySet, k_max: int) -> list[np.ndarray]:
    """Greedy 2^-k covers of the set's net for k = 1..k_max, index order."""
    covers = []
    for k in range(1, k_max + 1):
        r = 2.0**-k
        kept: list[int] = []
        covered = np.zeros(bset.net.shape[0], dtype=bool)
        d = geo.dist_to_points(bset.net, bset.net)
        for i in range(bset.net.shape[0]):
            if not covered[i]:
                kept.append(i)
                covered |= d[:, i] <= r
        covers.append(bset.net[kept])
    return covers


def chaumat_chollet_phi(coverings: list[np.ndarray], a: float, n: int, bset: BoundarySet | None = None):
    """Covering-sum construction: phi(z) = sum_k sum_j 2^(-k(n-a)) /
    (2^-k + (1 - <z, zeta_jk>)), truncated at the supplied levels.

    Each term has positive real part, so Re phi > 0 exactly and
    h = phi^(1/(a-n)) is single-valued.  Returns (phi_eval, h_fn,
    tail_bound_fn); the tail bound extrapolates the last two levels'
    geometric ratio.
    """
    if not n - 1 < a < n:
        raise ValueError("need n-1 < a < n")
    if any(c.shape[0] == 0 for c in coverings):
        raise ValueError("empty covering level")
    k_max = len(coverings)

    def level_sum(z, k, cover):
        c = 1.0 - geo.as_coords(z) @ np.conj(cover).T
        return np.sum(2.0 ** (-k * (n - a)) / (2.0**-k + c), axis=-1)

    def phi(z):
        total = level_sum(z, 1, coverings[0])
        for k in range(2, k_max + 1):
            total = total + level_sum(z, k, coverings[k - 1])
        return total

    def tail_bound(z):
        last = np.abs(level_sum(z, k_max, coverings[-1]))
        prev = np.abs(level_sum(z, k_max - 1, coverings[-2])) if k_max >= 2 else last
        ratio = np.where(prev > 0, np.minimum(last / np.maximum(prev, 1e-300), 0.95), 0.5)
        return last * ratio / (1.0 - ratio)

    def h_eval(z):
        val = phi(z)
        if np.any(val.real <= 0):
            raise SectorError(z)
        return np.exp(np.log(val) / (a - n))

    h = HoloDistanceFn("chaumat-chollet", {"a": a, "k_max": k_max}, bset, h_eval)
    return phi, h, tail_bound


def cantor_fiber_h(params: CantorFiberParams, q: float):
    """Kernel sum over the rotated peak functions of the Cantor-fiber set:
    h_q(z) = sum_t w_t (1 - f(e^{-it} z))^(-q) with
    f(z) = (1 + z_1^2 + ... + z_n^2)/2, plus the companion distance
    function h = h_q^(1/(delta-q)).

    1 - f(e^{-it}z) = (1 - e^{-2it} sum z_j^2)/2 has positive real part
    on the open ball, so each term lies in the sector |arg| < q pi/2 and
    Re h_q > 0 for q < 1.
    """
    delta = params.delta
    if not delta < q < 1:
        raise ValueError(f"need delta = {delta:.4f} < q < 1")
    t = params.t_values()
    w = np.full(t.size, 1.0 / t.size)
    rot = np.exp(-2j * t)

    def hq(z):
        z = geo.as_coords(z)
        s2 = np.sum(z * z, axis=-1)
        base = 0.5 * (1.0 - np.tensordot(s2, rot, axes=0))
        if np.any(np.abs(base) < 1e-14):
            raise PoleError("z lies on a fiber (peak value 1)")
        vals = np.sum(w * base ** (-q), axis=-1)
        return complex(vals) if np.ndim(vals) == 0 else vals

    def h_eval(z):
        val = hq(z)
        if np.any(np.real(val) <= 0):
            raise SectorError(z)
        return np.exp(np.log(val) / (delta - q))

    h = HoloDistanceFn("cantor-fiber", {"q": q, "delta": delta, "depth": params.depth}, None, h_eval)
    return hq, h


def peak_distance_fn(zeta0) -> HoloDistanceFn:
    """h(z) = 1 - <z, zeta0> for the singleton set {zeta0}; |h| = d exactly."""
    zeta0 = geo.as_coords(zeta0).reshape(-1)

    def evaluate(z):
        return 1.0 - geo.as_coords(z) @ np.conj(zeta0)

    return HoloDistanceFn("peak-based", {}, None, evaluate)


def cr_residual(fn, z, step: float = 1e-5) -> float:
    """Max Cauchy-Riemann residual |dbar_j fn| at z by central differences."""
    z = geo.as_coords(z).reshape(-1)
    worst = 0.0
    for j in range(z.size):
        e = np.zeros(z.size, dtype=complex)
        e[j] = step
        dx = (fn(z + e) - fn(z - e)) / (2 * step)
        dy = (fn(z + 1j * e) - fn(z - 1j * e)) / (2 * step)
        worst = max(worst, abs(0.5 * (dx + 1j * dy)))
    return worst


@dataclass
class DistanceVerification:
    verdict: str
    decades: dict  # decade -> {"ratio": (lo, hi), "normal": (lo, hi), "tangential": (lo, hi), "count": k}
    band: float
    skipped: int

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "band": self.band,
            "skipped": self.skipped,
            "decades": {str(k): v for k, v in self.decades.items()},
        }


def verify_distance_fn(
    h: HoloDistanceFn,
    bset: BoundarySet,
    decades=(1, 2, 3),
    probes_per_decade: int = 60,
    fd_step_rel: float = 0.02,
    band: float = 50.0,
    seed: int = 0,
) -> DistanceVerification:
    """Stratified check of |h|/d and the frame-derivative ratios.

    Probes approach the set radially from net points; each probe is
    binned by its actual oracle distance.  The verdict holds iff every
    ratio family stays inside a fixed multiplicative band across at
    least three populated decades.  Probes whose finite-difference step
    would exceed d/10 are skipped and counted.
    """
    rng = substream(seed, "distfn-verify")
    rows = {dec: {"ratio": [], "normal": [], "tangential": []} for dec in decades}
    skipped = 0
    for dec in decades:
        base_idx = rng.integers(0, bset.net.shape[0], size=probes_per_decade)
        taus = 10.0 ** (-dec - rng.random(probes_per_decade))
        for bi, tau in zip(base_idx, taus):
            zeta = bset.net[bi]
            z = (1.0 - tau) * zeta
            d = float(bset.distance(z))
            if d <= 0:
                skipped += 1
                continue
            dec_actual = int(math.floor(-math.log10(d)))
            if dec_actual not in rows:
                continue
            hv = complex(np.asarray(h(z)).reshape(()))
            rows[dec_actual]["ratio"].append(abs(hv) / d)
            step = fd_step_rel * d
            if step >= d / 10.0:
                step = d / 20.0
            near = bset.net[int(bset.nearest_net_index(z))]
            frame = frame_at(near)
            dirs = {"normal": near}
            if bset.n > 1:
                dirs["tangential"] = frame.tangents[:, 0]
            for name, v in dirs.items():
                v = np.asarray(v, dtype=complex).reshape(-1)
                v = v / np.linalg.norm(v)
                try:
                    der = (h(z + step * v) - h(z - step * v)) / (2 * step)
                except (SectorError, PoleError):
                    skipped += 1
                    continue
                wgt = 1.0 if name == "normal" else 0.5
                der = complex(np.asarray(der).reshape(()))
                rows[dec_actual][name].append(abs(der) / d ** (1.0 - wgt))
    table = {}
    families = ["ratio", "normal"] + (["tangential"] if bset.n > 1 else [])
    ok = True
    populated = 0
    fam_ranges = {f: [math.inf, -math.inf] for f in families}
    for dec in decades:
        entry = {}
        any_data = False
        for fam in families:
            vals = rows[dec][fam]
            if not vals:
                continue
            any_data = True
            lo, hi = float(min(vals)), float(max(vals))
            entry[fam] = (lo, hi)
            fam_ranges[fam][0] = min(fam_ranges[fam][0], lo)
            fam_ranges[fam][1] = max(fam_ranges[fam][1], hi)
        entry["count"] = len(rows[dec]["ratio"])
        table[dec] = entry
        if any_data:
            populated += 1
    if populated < 3:
        return DistanceVerification("inconclusive", table, band, skipped)
    for fam in families:
        lo, hi = fam_ranges[fam]
        if not (lo > 0 and hi / lo <= band):
            ok = False
    return DistanceVerification("holds" if ok else "fails", table, band, skipped)
