"""Hardy-Sobolev and Triebel-Lizorkin norms of holomorphic polynomials,
Besov jet norms with respect to an atomic measure, and the restriction
map polynomial -> jet.

The Besov seminorm uses the general form with the bracket mass
mu[x,y]^2 in the denominator and the distance exponent
(alpha - omega(gamma)) p - d; the Ahlfors-regular variant with +d in the
exponent and no bracket is equivalent in that case and not implemented
separately.  Diagonal atom pairs are excluded (they carry no mass in the
continuum double integral and d(x,x) = 0 would be singular).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .dyadic import AtomicMeasure, bracket_matrix
from .jets import (
    TangentFrame,
    check_alpha,
    d_gamma_all,
    frame_at,
    taylor_poly,
    truncation_order,
    weight,
    weight_indices,
)
from .poly import HoloPolynomial, multi_factorial
from .util import substream


@dataclass
class NormReport:
    space: str
    params: dict
    value: float
    quadrature: dict = field(default_factory=dict)
    notes: str = ""

    def to_dict(self):
        return {
            "space": self.space,
            "params": self.params,
            "value": self.value,
            "quadrature": self.quadrature,
            "notes": self.notes,
        }


def fractional_radial_derivative(f: HoloPolynomial, beta: float) -> HoloPolynomial:
    """R^beta f = sum_k (k+1)^beta f_k on the homogeneous expansion; exact."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    out = HoloPolynomial(f.nvars, {})
    for k, part in f.homogeneous_parts().items():
        out = out + part * float((k + 1) ** beta)
    return out


DEFAULT_R_GRID = (0.25, 0.5, 0.75, 0.9, 0.99, 1.0 - 1e-6)


def hardy_sobolev_norm(
    f: HoloPolynomial,
    p: float,
    beta: float,
    r_grid=DEFAULT_R_GRID,
    sphere_samples: int = 200_000,
    seed: int = 0,
) -> NormReport:
    """sup over the r grid of the sigma mean of |R^beta f(r .)|^p, ^(1/p).

    For polynomials the integrand increases in r, so the sup sits at the
    top of the grid (max r = 1 - 1e-6); the report records where.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    g = fractional_radial_derivative(f, beta)
    ctx = geo.MetricContext(f.nvars, seed=seed)
    z = geo.sample_sphere(ctx, sphere_samples, seed=seed)
    best, best_r = -math.inf, None
    for r in r_grid:
        val = float(np.mean(np.abs(g(r * z)) ** p))
        if val > best:
            best, best_r = val, r
    return NormReport(
        "H^p_beta",
        {"p": p, "beta": beta},
        best ** (1.0 / p),
        {"sphere_samples": sphere_samples, "r_grid": list(r_grid), "sup_at": best_r},
    )


def _radial_integral(h_values_at, c_exp: float, nodes: int = 96):
    """integral_0^1 (1-r)^c_exp H(r) dr for vector-valued smooth H.

    Substituting s = (1-r)^(c_exp+1) removes the endpoint singularity
    (c_exp > -1), then fixed Gauss-Legendre; H receives an array of r
    values and must return (len(r), ...) arrays.
    """
    if c_exp <= -1:
        raise ValueError("radial weight must be integrable")
    u, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (u + 1.0)
    ws = 0.5 * w
    r = 1.0 - s ** (1.0 / (c_exp + 1.0))
    vals = h_values_at(r)
    return np.tensordot(ws / (c_exp + 1.0), vals, axes=(0, 0))


def triebel_lizorkin_norm(
    f: HoloPolynomial,
    p: float,
    q: float,
    beta: float,
    sphere_samples: int = 4000,
    radial_nodes: int = 96,
    seed: int = 0,
) -> NormReport:
    """Mixed norm with inner radial q-integral against
    (1-r^2)^(([beta]+1-beta) q - 1) of |R^([beta]+1) f|^q."""
    if p <= 0 or q <= 0 or beta < 0:
        raise ValueError("need p, q > 0 and beta >= 0")
    ell = int(math.floor(beta)) + 1
    g = fractional_radial_derivative(f, float(ell))
    c_exp = (ell - beta) * q - 1.0
    ctx = geo.MetricContext(f.nvars, seed=seed)
    z = geo.sample_sphere(ctx, sphere_samples, seed=seed)
    parts = {k: pk(z) for k, pk in g.homogeneous_parts().items()}

    def h_values(r):
        acc = np.zeros((r.size, z.shape[0]), dtype=complex)
        for k, vals in parts.items():
            acc += r[:, None] ** float(k) * vals[None, :]
        return (1.0 + r)[:, None] ** c_exp * np.abs(acc) ** q

    inner = _radial_integral(h_values, c_exp, radial_nodes)
    if not np.all(np.isfinite(inner)):
        return NormReport(
            "HF^{p,q}_beta",
            {"p": p, "q": q, "beta": beta},
            math.inf,
            notes="inner radial integral did not converge",
        )
    value = float(np.mean(inner ** (p / q)) ** (1.0 / p))
    return NormReport(
        "HF^{p,q}_beta",
        {"p": p, "q": q, "beta": beta},
        value,
        {"sphere_samples": sphere_samples, "radial_nodes": radial_nodes},
    )


@dataclass
class Jet:
    """Family {F_gamma : omega(gamma) < alpha} of values on the atoms of a
    measure, with the tangent frame stored per base point."""

    alpha: float
    atoms: np.ndarray
    frames: list
    values: dict  # gamma -> (m,) complex

    def __post_init__(self):
        check_alpha(self.alpha)
        expected = set(weight_indices(self.atoms.shape[1], self.alpha))
        got = set(self.values)
        if got != expected:
            raise ValueError(f"jet index set mismatch: missing {expected - got}, extra {got - expected}")
        for g, arr in self.values.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"jet values for {g} are not finite")

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    def gammas(self):
        return sorted(self.values)

    def at_atom(self, i: int) -> dict:
        return {g: complex(v[i]) for g, v in self.values.items()}

    def to_rows(self):
        for g in self.gammas():
            for i in range(self.size):
                v = self.values[g][i]
                yield (i, "g" + "_".join(str(e) for e in g), repr(v.real), repr(v.imag))


def constant_jet(mu: AtomicMeasure, alpha: float, value: complex) -> Jet:
    n = mu.atoms.shape[1]
    frames = [frame_at(a) for a in mu.atoms]
    vals = {}
    for g in weight_indices(n, alpha):
        vals[g] = np.full(mu.size, value if sum(g) == 0 else 0.0, dtype=complex)
    return Jet(alpha, mu.atoms, frames, vals)


def restrict_to_jet(f: HoloPolynomial, mu: AtomicMeasure, alpha: float, frames=None) -> Jet:
    """F_gamma(atom) = D^gamma f(atom) in that atom's frame, for all
    gamma of weight below alpha."""
    check_alpha(alpha)
    n = mu.atoms.shape[1]
    if f.nvars != n:
        raise ValueError("polynomial and measure dimensions differ")
    gammas = weight_indices(n, alpha)
    frames = [frame_at(a) for a in mu.atoms] if frames is None else frames
    vals = {g: np.zeros(mu.size, dtype=complex) for g in gammas}
    for i, fr in enumerate(frames):
        derivs = d_gamma_all(f, fr, gammas)
        for g in gammas:
            vals[g][i] = derivs[g]
    return Jet(alpha, mu.atoms, frames, vals)


def _operator_terms(gamma: tuple, n: int):
    """Expansion of prod_j (sum_a M[a,j] d_a)^gamma_j as
    [(kappa, ((a,j,power), ...), integer coefficient), ...]."""
    terms = {((0,) * n, ()): 1}
    for j, gj in enumerate(gamma):
        for _ in range(gj):
            new: dict = {}
            for (kappa, entries), c in terms.items():
                for a in range(n):
                    nk = tuple(kappa[i] + (1 if i == a else 0) for i in range(n))
                    ent = dict(entries)
                    ent[(a, j)] = ent.get((a, j), 0) + 1
                    key = (nk, tuple(sorted(ent.items())))
                    new[key] = new.get(key, 0) + c
            terms = new
    return [
        (kappa, tuple((a, j, pw) for (a, j), pw in entries), c)
        for (kappa, entries), c in sorted(terms.items())
    ]


def frame_derivatives_at_atoms(
    poly: HoloPolynomial, matrices: np.ndarray, atoms: np.ndarray, gammas
) -> dict:
    """D^gamma poly(atom_i) in atom i's own frame, vectorized over atoms.

    matrices: (m, n, n) stacked frame matrices.  Uses the multinomial
    expansion of the frame vector fields in ambient partials, so each
    gamma costs a handful of vectorized polynomial evaluations.
    """
    n = atoms.shape[1]
    needed = set()
    term_table = {}
    for g in gammas:
        term_table[g] = _operator_terms(g, n)
        for kappa, _, _ in term_table[g]:
            needed.add(kappa)
    evals = {kappa: poly.derivative(kappa)(atoms) for kappa in needed}
    out = {}
    for g in gammas:
        acc = np.zeros(atoms.shape[0], dtype=complex)
        for kappa, entries, c in term_table[g]:
            factor = np.full(atoms.shape[0], float(c), dtype=complex)
            for a, j, pw in entries:
                factor = factor * matrices[:, a, j] ** pw
            acc += factor * evals[kappa]
        out[g] = acc
    return out


def besov_jet_norm(
    jet: Jet,
    mu: AtomicMeasure,
    p: float,
    d_exponent: float,
    alpha: float | None = None,
) -> NormReport:
    """L^p part plus the Taylor-compatibility double sum over atom pairs:

      sum_gamma sum_{x != y} w_x w_y |F_gamma(x) - D^gamma(T_y F)(x)|^p
                / ( d(x,y)^((alpha-omega(gamma)) p - d) mu[x,y]^2 )

    reported as (total)^(1/p).
    """
    alpha = jet.alpha if alpha is None else alpha
    if abs(alpha - jet.alpha) > 1e-12:
        raise ValueError("alpha must match the jet")
    if jet.size != mu.size or not np.array_equal(jet.atoms, mu.atoms):
        raise ValueError("jet and measure must share atoms")
    m = jet.size
    n = jet.n
    gammas = jet.gammas()
    w = mu.weights
    lp = 0.0
    for g in gammas:
        lp += float(np.sum(w * np.abs(jet.values[g]) ** p))
    if m == 1:
        return NormReport(
            "B^p_alpha(mu)",
            {"p": p, "alpha": alpha, "d": d_exponent},
            lp ** (1.0 / p),
            {"atoms": m},
        )
    dmat = geo.dist_to_points(jet.atoms, jet.atoms)
    mb = bracket_matrix(mu)
    matrices = np.stack([fr.matrix for fr in jet.frames])
    exps = {g: (alpha - float(weight(g))) * p - d_exponent for g in gammas}
    dbl = 0.0
    offdiag = ~np.eye(m, dtype=bool)
    for yi in range(m):
        ty = taylor_poly(jet.at_atom(yi), jet.atoms[yi], alpha, jet.frames[yi])
        derivs = frame_derivatives_at_atoms(ty, matrices, jet.atoms, gammas)
        mask = offdiag[:, yi]
        for g in gammas:
            diff = np.abs(jet.values[g] - derivs[g])[mask]
            dbl += float(
                np.sum(
                    w[mask] * w[yi] * diff**p / (dmat[mask, yi] ** exps[g] * mb[mask, yi] ** 2)
                )
            )
    total = lp + dbl
    return NormReport(
        "B^p_alpha(mu)",
        {"p": p, "alpha": alpha, "d": d_exponent, "lp_part": lp, "double_sum": dbl},
        total ** (1.0 / p),
        {"atoms": m},
    )


def random_cubic(n: int, seed: int) -> HoloPolynomial:
    """Random polynomial of total degree 3, normalized coefficients."""
    f = HoloPolynomial.random(n, 3, seed)
    scale = math.sqrt(sum(abs(c) ** 2 for c in f.coeffs.values()))
    return f * (1.0 / scale)
