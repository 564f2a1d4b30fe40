"""Weighted multi-indices, complex-tangential frames, frame-coordinate
derivatives of polynomials, the non-isotropic Taylor polynomial (twice as
long tangentially as normally), and the closed-form expansion of Taylor
polynomials of reciprocal kernel powers together with its recursion
identity.

Conventions: for gamma = (g_1, ..., g_n) the last slot is the normal
index (weight 1), the leading n-1 slots are complex-tangential (weight
1/2 each).  Frame coordinates at a base point y are w_j(z) = <z-y, e_j>
for tangential e_j and w_n(z) = 1 - <z,y>, i.e. z = y + M v with
M = [e_1 ... e_{n-1}, -y], which is a unitary (hence holomorphic affine)
change of variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import geometry as geo
from .poly import HoloPolynomial, multi_factorial

POLE_TOL = 1e-14
HALF_INTEGER_TOL = 1e-9


class PoleError(ValueError):
    pass


def weight(gamma) -> Fraction:
    """omega(gamma) = gamma_n + (gamma_1 + ... + gamma_{n-1})/2, exact."""
    gamma = tuple(int(g) for g in gamma)
    return Fraction(sum(gamma[:-1]), 2) + gamma[-1]


def check_alpha(alpha: float) -> float:
    """Reject orders with 2*alpha within 1e-9 of an integer."""
    if abs(2.0 * alpha - round(2.0 * alpha)) < HALF_INTEGER_TOL:
        raise ValueError(f"2*alpha = {2 * alpha} must not be an integer")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return float(alpha)


def truncation_order(alpha: float) -> int:
    """ell = [2 alpha]."""
    check_alpha(alpha)
    return int(math.floor(2.0 * alpha))


def weight_indices(n: int, alpha: float) -> list[tuple]:
    """All gamma with omega(gamma) < alpha, i.e. 2*omega <= [2 alpha]."""
    ell = truncation_order(alpha)
    out = []

    def rec(prefix, budget):
        pos = len(prefix)
        if pos == n - 1:
            for gn in range(budget // 2 + 1):
                out.append(prefix + (gn,))
            return
        for g in range(budget + 1):
            rec(prefix + (g,), budget - g)

    rec((), ell)
    return sorted(out)


@dataclass
class TangentFrame:
    """Orthonormal complex-tangential frame at a sphere point.

    matrix columns are e_1, ..., e_{n-1}, -base; z = base + matrix @ v
    maps frame coordinates v to ambient points, and matrix is unitary so
    the inverse rows give w(z) = matrix^H (z - base).
    """

    base: np.ndarray
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.base.size

    @property
    def tangents(self) -> np.ndarray:
        return self.matrix[:, : self.n - 1]

    def w_coords(self, z) -> np.ndarray:
        z = geo.as_coords(z)
        return (z - self.base) @ np.conj(self.matrix)

    def w_polynomials(self) -> list[HoloPolynomial]:
        """The n coordinate functions z -> w_j(z) as affine polynomials."""
        W = np.conj(self.matrix).T  # rows: conj(e_j)^T, last row -conj(base)^T
        return [
            HoloPolynomial.affine(-(W[j] @ self.base), W[j]) for j in range(self.n)
        ]


def frame_at(zeta, phase: complex = 1.0) -> TangentFrame:
    """Gram-Schmidt frame from the standard basis projected onto the
    complex tangent space; deterministic pivot order.  `phase` rotates
    the first tangential vector (used by frame-covariance tests)."""
    zeta = geo.as_coords(zeta).reshape(-1)
    n = zeta.size
    if abs(np.linalg.norm(zeta) - 1.0) > 1e-9:
        raise ValueError("frame base must lie on the sphere")
    cols = []
    for i in range(n):
        if len(cols) == n - 1:
            break
        v = np.zeros(n, dtype=complex)
        v[i] = 1.0
        v = v - (v @ np.conj(zeta)) * zeta
        for e in cols:
            v = v - (v @ np.conj(e)) * e
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            cols.append(v / nrm)
    if len(cols) != n - 1:
        raise RuntimeError("frame construction lost rank")
    if n > 1 and phase != 1.0:
        cols[0] = cols[0] * phase
    matrix = np.empty((n, n), dtype=complex)
    for j, e in enumerate(cols):
        matrix[:, j] = e
    matrix[:, n - 1] = -zeta
    return TangentFrame(zeta, matrix)


def d_gamma(f: HoloPolynomial, zeta, gamma, frame: TangentFrame | None = None) -> complex:
    """Frame-coordinate derivative D^gamma f(zeta) of a polynomial; exact."""
    frame = frame_at(zeta) if frame is None else frame
    comp = f.compose_affine(frame.base, frame.matrix)
    c = comp.coeffs.get(tuple(int(g) for g in gamma), 0.0)
    return complex(c * multi_factorial(gamma))


def d_gamma_all(f: HoloPolynomial, frame: TangentFrame, gammas) -> dict[tuple, complex]:
    """All requested frame derivatives at one base point in one pass."""
    comp = f.compose_affine(frame.base, frame.matrix)
    return {
        g: complex(comp.coeffs.get(g, 0.0) * multi_factorial(g)) for g in gammas
    }


def taylor_poly(
    source,
    y,
    alpha: float,
    frame: TangentFrame | None = None,
) -> HoloPolynomial:
    """Non-isotropic Taylor polynomial at y, truncated by weight < alpha.

    `source` is a HoloPolynomial, a KernelReciprocalPower, or a mapping
    gamma -> derivative value (a jet's slice at one atom).  The result
    is an ordinary polynomial in z, coefficient-exact.
    """
    frame = frame_at(y) if frame is None else frame
    n = frame.n
    gammas = weight_indices(n, alpha)
    if isinstance(source, HoloPolynomial):
        derivs = d_gamma_all(source, frame, gammas)
    elif isinstance(source, KernelReciprocalPower):
        derivs = source.frame_derivs(frame, gammas)
    else:
        derivs = {g: complex(source[g]) for g in gammas}
    wpolys = frame.w_polynomials()
    out = HoloPolynomial(n, {})
    for g in gammas:
        c = derivs.get(g, 0.0)
        if c == 0.0:
            continue
        term = HoloPolynomial.constant(n, c / multi_factorial(g))
        for j, e in enumerate(g):
            for _ in range(e):
                term = term * wpolys[j]
        out = out + term
    return out


@dataclass
class KernelReciprocalPower:
    """The function z -> (1 - <z, zeta>)^(-a) for integer a >= 1."""

    a: int
    zeta: np.ndarray

    def __post_init__(self):
        self.zeta = geo.as_coords(self.zeta).reshape(-1)
        if self.a < 1 or self.a != int(self.a):
            raise ValueError("kernel power a must be an integer >= 1")
        self.a = int(self.a)

    def __call__(self, z):
        z = geo.as_coords(z)
        base = 1.0 - np.sum(z * np.conj(self.zeta), axis=-1)
        if np.any(np.abs(base) < POLE_TOL):
            raise PoleError("evaluation at the kernel pole")
        return base ** (-self.a)

    def frame_derivs(self, frame: TangentFrame, gammas) -> dict[tuple, complex]:
        """Exact D^gamma of (c0 + c.v)^(-a): the kernel is affine in the
        frame coordinates, so derivatives are rising-factorial products."""
        c0 = 1.0 - np.sum(frame.base * np.conj(self.zeta))
        if abs(c0) < POLE_TOL:
            raise PoleError("frame base sits on the kernel pole")
        lin = -(frame.matrix.T @ np.conj(self.zeta))  # coefficient of v_j
        out = {}
        for g in gammas:
            tot = sum(g)
            rising = 1.0
            for t in range(tot):
                rising *= self.a + t
            val = ((-1.0) ** tot) * rising * c0 ** (-self.a - tot)
            for j, e in enumerate(g):
                val = val * lin[j] ** e
            out[g] = complex(val)
        return out


def binom_real(x: float, k: int) -> float:
    """Binomial coefficient with real upper argument, via products."""
    if k < 0:
        return 0.0
    out = 1.0
    for i in range(1, k + 1):
        out *= (x - i + 1) / i
    return out


def _zvt(x, y, zeta):
    """The symbols Z = (<x,y>-1)<y,zeta>, V = <x-y,zeta> - Z, T = 1-<y,zeta>."""
    x = geo.as_coords(x)
    y = geo.as_coords(y)
    zeta = geo.as_coords(zeta)
    t = 1.0 - np.sum(y * np.conj(zeta), axis=-1)
    z_sym = (np.sum(x * np.conj(y), axis=-1) - 1.0) * np.sum(y * np.conj(zeta), axis=-1)
    v_sym = np.sum((x - y) * np.conj(zeta), axis=-1) - z_sym
    return z_sym, v_sym, t


def taylor_kernel_power(a: int, y, zeta, alpha: float):
    """Closed-form evaluator of the weight-alpha Taylor polynomial of
    z -> (1-<z,zeta>)^(-a) based at y, as a function of x.

    Two sums: the isotropic part in powers of <x-y,zeta> minus the
    correction removing the terms of weight >= alpha.
    """
    a = int(a)
    if a < 1:
        raise ValueError("a must be an integer >= 1")
    ell = truncation_order(alpha)
    m = ell // 2
    y = geo.as_coords(y).reshape(-1)
    zeta = geo.as_coords(zeta).reshape(-1)
    t = 1.0 - np.sum(y * np.conj(zeta))
    if abs(t) < POLE_TOL:
        raise PoleError("1 - <y, zeta> vanishes")

    def evaluate(x):
        z_sym, v_sym, _ = _zvt(x, y, zeta)
        vz = v_sym + z_sym
        total = np.zeros(np.shape(z_sym), dtype=complex) if np.ndim(z_sym) else 0.0 + 0.0j
        for k in range(ell + 1):
            total = total + binom_real(a + k - 1, k) * vz**k / t ** (a + k)
        for k in range(m + 1, ell + 1):
            coef = binom_real(a + k - 1, k)
            inner = 0.0
            for j in range(ell - k + 1, k + 1):
                cb = binom_real(k, j)
                if cb == 0.0:
                    continue
                inner = inner + cb * z_sym**j * v_sym ** (k - j)
            total = total - coef * inner / t ** (a + k)
        return total

    return evaluate


def claim_residual(a: int, y, zeta, alpha: float, x) -> complex:
    """Residual of the one-step recursion satisfied by the kernel Taylor
    polynomials:

      (1-<x,zeta>) T_y(F_a)(x) - T_y(F_{a-1})(x)
        = - sum_{k=m}^{ell} C(a+k-1,k) C(k+1,ell-k) Z^(ell-k) V^(2k-ell+1) / T^(a+k)
          - sum_{k=m}^{ell} C(a+k-1,k) C(k,ell-k)   Z^(ell-k+1) V^(2k-ell) / T^(a+k)

    with Z, V, T as in taylor_kernel_power, ell = [2 alpha], m = [ell/2].
    Exact identity; |residual| <= 1e-10 * (1 + |LHS|) is the contract.
    """
    a = int(a)
    if a < 2:
        raise ValueError("need a >= 2 so that F_(a-1) is a kernel power")
    ell = truncation_order(alpha)
    m = ell // 2
    ta = taylor_kernel_power(a, y, zeta, alpha)
    tam1 = taylor_kernel_power(a - 1, y, zeta, alpha)
    x = geo.as_coords(x).reshape(-1)
    zeta_c = geo.as_coords(zeta).reshape(-1)
    lhs = (1.0 - np.sum(x * np.conj(zeta_c))) * ta(x) - tam1(x)
    z_sym, v_sym, t = _zvt(x, geo.as_coords(y).reshape(-1), zeta_c)
    rhs = 0.0 + 0.0j
    for k in range(m, ell + 1):
        coef = binom_real(a + k - 1, k)
        c1 = binom_real(k + 1, ell - k)
        if c1 != 0.0 and 2 * k - ell + 1 >= 0:
            rhs -= coef * c1 * z_sym ** (ell - k) * v_sym ** (2 * k - ell + 1) / t ** (a + k)
        c2 = binom_real(k, ell - k)
        if c2 != 0.0 and 2 * k - ell >= 0:
            rhs -= coef * c2 * z_sym ** (ell - k + 1) * v_sym ** (2 * k - ell) / t ** (a + k)
    return complex(lhs - rhs)


# --- first-order frame fields on kernel powers (closed forms) ---------------


def radial_field_on_power(a: float, zeta, x) -> complex:
    """N_x (1-<z,zeta>)^a at x: a(<x,zeta>-1+1-1)... the two-term closed form.

    N = sum_i z_i d/dz_i applied to (1-<z,zeta>)^a gives
    -a <x,zeta> (1-<x,zeta>)^(a-1).
    """
    x = geo.as_coords(x).reshape(-1)
    zeta = geo.as_coords(zeta).reshape(-1)
    base = 1.0 - x @ np.conj(zeta)
    return complex(-a * (x @ np.conj(zeta)) * base ** (a - 1))


def tangential_field_on_power(a: float, zeta, x, direction) -> complex:
    """(Y_v)_x (1-<z,zeta>)^a for a complex-tangential direction v at x:
    Y_v = sum_i v_i (d/dz_i - conj(x_i) N)."""
    x = geo.as_coords(x).reshape(-1)
    zeta = geo.as_coords(zeta).reshape(-1)
    v = geo.as_coords(direction).reshape(-1)
    base = 1.0 - x @ np.conj(zeta)
    grad = -a * np.conj(zeta) * base ** (a - 1)
    nx = radial_field_on_power(a, zeta, x)
    return complex(v @ grad - (v @ np.conj(x)) * nx)
