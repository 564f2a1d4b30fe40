"""Dyadic decomposition of a finite net in the metric rho = sqrt(d), and
construction plus a-posteriori verification of doubling measures carried
by the tree's leaves.

Tree contract (exact on the net, set arithmetic):
  (i)   B_rho(x_j^k, lam^k) cap net  subset of  X_j^k  subset of  B_rho(x_j^k, lam^(k+1))
  (ii)  each level's cells partition the net
  (iii) cells nest across levels

Construction: nested center sets, greedy (lam-1)*lam^k separation per
level, each finer cell attached to the nearest coarser center.  The
separation margin makes (i) a theorem for lam >= 6 (the greedy cover
radius sums to at most lam^(k+1) - lam^(k_min+1), and a point within
lam^k of a center is strictly closer to it than to any competitor);
`verify_tree_invariants` re-checks all three exactly on every build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .util import ls_slope, substream

WEIGHT_TOL = 1e-12


@dataclass
class TreeLevel:
    k: int
    centers: np.ndarray  # net indices of the cell centers, in creation order
    cell_of_point: np.ndarray  # (m,) cell id per net point
    parent_of_cell: np.ndarray | None = None  # cell id at level k+1, filled later


@dataclass
class DyadicTree:
    points: np.ndarray  # (m, n) the net
    lam: float
    k_min: int
    levels: list  # TreeLevel, finest first

    @property
    def k_max(self) -> int:
        return self.levels[-1].k

    def cells_at(self, level_index: int):
        """List of member-index arrays for each cell of the level."""
        lvl = self.levels[level_index]
        ncell = lvl.centers.size
        members = [[] for _ in range(ncell)]
        for p, c in enumerate(lvl.cell_of_point):
            members[c].append(p)
        return [np.array(m, dtype=int) for m in members]


def _rho_to_points(z, pts) -> np.ndarray:
    return np.sqrt(geo.dist_to_points(z, pts))


def build_dyadic_cubes(net, lam: float = 8.0, k_min: int | None = None, validate: bool = True) -> DyadicTree:
    """Build the nested cell structure on a finite net of sphere points.

    k_min defaults to the largest integer with lam^k_min strictly below
    the minimal net separation, so the finest cells are singletons and
    the atoms of any measure carried by the tree are well-defined.
    """
    net = np.asarray(net, dtype=complex)
    if net.ndim == 1:
        net = net[:, None]
    m = net.shape[0]
    if m == 0:
        raise ValueError("net must be nonempty")
    if lam <= 2.0:
        raise ValueError("lam must exceed 2 (cell nesting fails otherwise)")
    if m > 6000:
        raise ValueError("net too large for the dense pairwise construction")

    if m == 1:
        min_sep = 1.0
    else:
        dmat = _rho_to_points(net, net)
        np.fill_diagonal(dmat, np.inf)
        min_sep = float(dmat.min())
        if min_sep <= 0.0:
            raise ValueError("net contains duplicate points")
    if k_min is None:
        k_min = int(math.floor(math.log(min_sep, lam)))
        while lam**k_min >= min_sep:
            k_min -= 1

    levels = [TreeLevel(k_min, np.arange(m), np.arange(m))]
    k = k_min
    while levels[-1].centers.size > 1:
        k += 1
        prev = levels[-1]
        prev_pts = net[prev.centers]
        sep = (lam - 1.0) * lam**k
        if sep <= min_sep:
            # every candidate survives; the level is a copy of the one below
            prev.parent_of_cell = np.arange(prev.centers.size)
            levels.append(TreeLevel(k, prev.centers.copy(), prev.cell_of_point.copy()))
            continue
        chosen: list[int] = [0]
        mind = _rho_to_points(prev_pts, prev_pts[0][None, :])[:, 0]
        for cand in range(1, prev_pts.shape[0]):
            if mind[cand] >= sep:
                chosen.append(cand)
                mind = np.minimum(mind, _rho_to_points(prev_pts, prev_pts[cand][None, :])[:, 0])
        centers_pts = prev_pts[chosen]
        attach = np.argmin(_rho_to_points(prev_pts, centers_pts), axis=1)
        cell_of_point = attach[prev.cell_of_point]
        prev.parent_of_cell = attach
        levels.append(TreeLevel(k, prev.centers[chosen], cell_of_point))

    tree = DyadicTree(net, float(lam), int(k_min), levels)
    if validate:
        ok, msg = verify_tree_invariants(tree)
        if not ok:
            raise RuntimeError(f"dyadic construction violated an invariant: {msg}")
    return tree


def verify_tree_invariants(tree: DyadicTree) -> tuple[bool, str]:
    """Exact check of (i) inner/outer ball containment, (ii) partition,
    (iii) nesting, on the net."""
    net = tree.points
    m = net.shape[0]
    for li, lvl in enumerate(tree.levels):
        if lvl.cell_of_point.shape[0] != m:
            return False, f"level {lvl.k}: partition incomplete"
        if np.any(lvl.cell_of_point < 0) or np.any(lvl.cell_of_point >= lvl.centers.size):
            return False, f"level {lvl.k}: cell id out of range"
        rad_in = tree.lam**lvl.k
        rad_out = tree.lam ** (lvl.k + 1)
        centers_pts = net[lvl.centers]
        rho = _rho_to_points(net, centers_pts)  # (m, ncells)
        for j in range(lvl.centers.size):
            members = lvl.cell_of_point == j
            inside = rho[:, j] <= rad_in
            if np.any(inside & ~members):
                return False, f"level {lvl.k} cell {j}: inner ball leaks"
            if np.any(members & (rho[:, j] > rad_out)):
                return False, f"level {lvl.k} cell {j}: outer ball exceeded"
        if li + 1 < len(tree.levels):
            nxt = tree.levels[li + 1]
            if lvl.parent_of_cell is None:
                return False, f"level {lvl.k}: missing parent links"
            if np.any(nxt.cell_of_point != lvl.parent_of_cell[lvl.cell_of_point]):
                return False, f"level {lvl.k}: nesting broken"
    if tree.levels[-1].centers.size != 1:
        return False, "top level is not a single cell"
    return True, "ok"


@dataclass
class AtomicMeasure:
    """Probability measure as weighted atoms on sphere points."""

    atoms: np.ndarray  # (m, n)
    weights: np.ndarray  # (m,), positive, sums to 1
    tree: DyadicTree | None = None
    s_target: float | None = None
    d_target: float | None = None

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=complex)
        if self.atoms.ndim == 1:
            self.atoms = self.atoms[:, None]
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights <= 0):
            raise ValueError("atom weights must be positive")
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, expected 1")
        self.weights = self.weights / total

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def to_rows(self):
        for i in range(self.size):
            yield (i, *(repr(c) for c in self.atoms[i].tolist()), repr(float(self.weights[i])))


def uniform_measure(points, tree: DyadicTree | None = None, **targets) -> AtomicMeasure:
    points = np.asarray(points, dtype=complex)
    if points.ndim == 1:
        points = points[:, None]
    m = points.shape[0]
    return AtomicMeasure(points, np.full(m, 1.0 / m), tree, **targets)


def self_similar_cantor_measure(bset) -> AtomicMeasure:
    """Natural self-similar measure on a cantor-arc net.

    Endpoint atoms are uniform: each depth-j construction interval holds
    2^(depth-j+1) of the 2^(depth+1) endpoints, hence carries mass 2^-j.
    """
    if bset.kind != "cantor-arc":
        raise ValueError("self-similar measure is defined for cantor-arc sets")
    delta = math.log(2.0) / math.log(1.0 / bset.params["ratio"])
    return uniform_measure(bset.net, s_target=delta, d_target=delta)


def build_doubling_measure(tree: DyadicTree, s: float, d: float) -> AtomicMeasure:
    """Distribute unit mass down the tree; leaves become atoms.

    At each node the children receive fractions proportional to their
    diameter estimate lam^(k+1) raised to s, clipped into
    [c^-s, c^-d] (c = child count) and renormalized.  Since siblings
    share a level the raw fractions are equal and the splitting is
    uniform per node; the clip window only validates the exponent
    order.  The output is verified a posteriori, not proven.
    """
    if not 0.0 <= d <= s:
        raise ValueError("need 0 <= d <= s")
    levels = tree.levels
    top = len(levels) - 1
    mass = {(top, 0): 1.0}
    for li in range(top, 0, -1):
        lvl_below = levels[li - 1]
        parent = lvl_below.parent_of_cell
        ncell_below = levels[li - 1].centers.size
        counts = np.bincount(parent, minlength=levels[li].centers.size)
        diam = tree.lam ** (levels[li - 1].k + 1)
        for j in range(ncell_below):
            p = int(parent[j])
            c = int(counts[p])
            raw = diam**s
            lo, hi = c ** (-float(s)), c ** (-float(d))
            frac = min(max(raw, lo), hi) if c > 1 else 1.0
            mass[(li - 1, j)] = mass[(li, p)] * frac
        # renormalize siblings so each node's children sum to the node mass
        sums = np.zeros(levels[li].centers.size)
        for j in range(ncell_below):
            sums[parent[j]] += mass[(li - 1, j)]
        for j in range(ncell_below):
            p = int(parent[j])
            mass[(li - 1, j)] *= mass[(li, p)] / sums[p]
    leaf_cell = levels[0].cell_of_point
    weights = np.array([mass[(0, int(leaf_cell[i]))] for i in range(tree.points.shape[0])])
    # k_min makes leaves singletons, so the leaf mass is the atom weight
    return AtomicMeasure(tree.points, weights, tree, s_target=s, d_target=d)


def measure_ball(mu: AtomicMeasure, x, r: float) -> float:
    """mu(B(x,r)) with the closed-ball convention (tolerance 1e-12)."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    d = geo.dist_to_points(geo.as_coords(x), mu.atoms)
    return float(mu.weights[d <= r + WEIGHT_TOL].sum())


def mu_bracket(mu: AtomicMeasure, x, y) -> float:
    """mu[x,y]: mass strictly inside radius d(x,y) around x.

    The strict interior keeps the two-point fixtures exact (the far atom
    sits exactly on the sphere of radius d(x,y)) while staying positive,
    since x itself always contributes.
    """
    r = geo.pseudo_dist(x, y)
    d = geo.dist_to_points(geo.as_coords(x), mu.atoms)
    return float(mu.weights[d < r - WEIGHT_TOL].sum()) if r > 0 else 0.0


def bracket_matrix(mu: AtomicMeasure) -> np.ndarray:
    """mu[x_i, x_j] for all atom pairs, via per-row sorting."""
    d = geo.dist_to_points(mu.atoms, mu.atoms)
    m = mu.size
    out = np.zeros((m, m))
    for i in range(m):
        order = np.argsort(d[i], kind="stable")
        csum = np.concatenate([[0.0], np.cumsum(mu.weights[order])])
        pos = np.searchsorted(d[i][order], d[i] - WEIGHT_TOL, side="left")
        out[i] = csum[pos]
    return out


@dataclass
class DoublingReport:
    c_upper: float
    c_lower: float
    verdict: str
    per_scale_upper: dict
    per_scale_lower: dict
    probes: int

    def to_dict(self):
        return {
            "c_upper": self.c_upper,
            "c_lower": self.c_lower,
            "verdict": self.verdict,
            "per_scale_upper": {str(k): v for k, v in self.per_scale_upper.items()},
            "per_scale_lower": {str(k): v for k, v in self.per_scale_lower.items()},
            "probes": self.probes,
        }


def verify_doubling_exponents(
    mu: AtomicMeasure,
    s: float,
    d: float,
    probes: int = 24,
    seed: int = 0,
    r_grid=None,
    k_grid=(2, 4, 8, 16),
) -> DoublingReport:
    """Empirical check that mu(B(x,kR)) scales between k^d and k^s.

    C_upper = max ratio/k^s, C_lower = min ratio/k^d over probes with
    kR <= 1; the verdict additionally needs both per-scale tables to
    stay within a factor 2 per halving of R (|log2 slope| <= 1 would be
    2x per halving; we require <= 0.5, i.e. 2x across two halvings).
    """
    rng = substream(seed, "doubling")
    m = mu.size
    idx = rng.choice(m, size=min(probes, m), replace=False)
    r_grid = [2.0**-j for j in range(2, 8)] if r_grid is None else list(r_grid)
    c_u, c_l = -math.inf, math.inf
    per_u: dict[float, float] = {}
    per_l: dict[float, float] = {}
    for i in idx:
        x = mu.atoms[i]
        dists = geo.dist_to_points(x, mu.atoms)
        for r in r_grid:
            base = float(mu.weights[dists <= r + WEIGHT_TOL].sum())
            if base <= 0.0:
                continue
            for k in k_grid:
                if k * r > 1.0:
                    continue
                grown = float(mu.weights[dists <= k * r + WEIGHT_TOL].sum())
                ratio = grown / base
                ru = ratio / k**s
                rl = ratio / k**d
                c_u = max(c_u, ru)
                c_l = min(c_l, rl)
                per_u[r] = max(per_u.get(r, -math.inf), ru)
                per_l[r] = min(per_l.get(r, math.inf), rl)
    if not per_u:
        return DoublingReport(math.nan, math.nan, "inconclusive", {}, {}, len(idx))

    def drift(table):
        rs = sorted(table)
        if len(rs) < 3:
            return math.inf
        slope, _, _ = ls_slope([math.log2(r) for r in rs], [math.log2(table[r]) for r in rs])
        return abs(slope)

    stable = drift(per_u) <= 0.5 and drift(per_l) <= 0.5
    verdict = "holds" if stable and math.isfinite(c_u) and c_l > 0 else "fails"
    return DoublingReport(c_u, c_l, verdict, per_u, per_l, len(idx))
