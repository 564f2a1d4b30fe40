"""Holomorphic polynomials of n complex variables as sparse coefficient maps.

Supports exact coefficient arithmetic (add, multiply, differentiate),
composition with affine maps z = c + M v (used for frame-coordinate
derivatives), and vectorized evaluation on point batches.
"""

from __future__ import annotations

import math

import numpy as np

from .util import substream


class HoloPolynomial:
    """Polynomial sum_gamma coeffs[gamma] z^gamma with finite support."""

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars: int, coeffs: dict | None = None):
        self.nvars = int(nvars)
        self.coeffs: dict[tuple, complex] = {}
        if coeffs:
            for g, c in coeffs.items():
                if c != 0:
                    self.coeffs[tuple(int(e) for e in g)] = complex(c)

    # --- constructors ---
    @classmethod
    def constant(cls, nvars, value):
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def coordinate(cls, nvars, i):
        g = [0] * nvars
        g[i] = 1
        return cls(nvars, {tuple(g): 1.0})

    @classmethod
    def affine(cls, const, linear):
        """const + sum_i linear[i] z_i."""
        linear = np.asarray(linear, dtype=complex)
        coeffs = {(0,) * linear.size: complex(const)}
        for i, c in enumerate(linear):
            if c != 0:
                g = [0] * linear.size
                g[i] = 1
                coeffs[tuple(g)] = complex(c)
        return cls(linear.size, coeffs)

    @classmethod
    def random(cls, nvars, degree, seed, scale=1.0):
        """Dense random polynomial of total degree <= degree."""
        rng = substream(seed, "poly", nvars, degree)
        coeffs = {}
        for g in monomials_up_to(nvars, degree):
            coeffs[g] = scale * (rng.standard_normal() + 1j * rng.standard_normal())
        return cls(nvars, coeffs)

    # --- algebra ---
    def __add__(self, other):
        if not isinstance(other, HoloPolynomial):
            other = HoloPolynomial.constant(self.nvars, other)
        out = dict(self.coeffs)
        for g, c in other.coeffs.items():
            out[g] = out.get(g, 0.0) + c
        return HoloPolynomial(self.nvars, out)

    def __sub__(self, other):
        return self + (other * -1.0 if isinstance(other, HoloPolynomial) else -other)

    def __mul__(self, other):
        if not isinstance(other, HoloPolynomial):
            return HoloPolynomial(self.nvars, {g: c * other for g, c in self.coeffs.items()})
        out: dict[tuple, complex] = {}
        for g1, c1 in self.coeffs.items():
            for g2, c2 in other.coeffs.items():
                g = tuple(a + b for a, b in zip(g1, g2))
                out[g] = out.get(g, 0.0) + c1 * c2
        return HoloPolynomial(self.nvars, out)

    __rmul__ = __mul__

    def power(self, k: int):
        out = HoloPolynomial.constant(self.nvars, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def scale_coefficients(self, factor):
        return self * factor

    # --- calculus ---
    def derivative(self, kappa):
        """partial^kappa; exact on coefficients."""
        out = {}
        for g, c in self.coeffs.items():
            if all(gi >= ki for gi, ki in zip(g, kappa)):
                fac = 1.0
                for gi, ki in zip(g, kappa):
                    for t in range(ki):
                        fac *= gi - t
                ng = tuple(gi - ki for gi, ki in zip(g, kappa))
                out[ng] = out.get(ng, 0.0) + c * fac
        return HoloPolynomial(self.nvars, out)

    def compose_affine(self, const, matrix):
        """The polynomial v -> self(const + matrix @ v), expanded exactly."""
        const = np.asarray(const, dtype=complex).reshape(-1)
        matrix = np.asarray(matrix, dtype=complex)
        forms = [HoloPolynomial.affine(const[i], matrix[i, :]) for i in range(self.nvars)]
        out = HoloPolynomial(matrix.shape[1], {})
        for g, c in sorted(self.coeffs.items()):
            term = HoloPolynomial.constant(matrix.shape[1], c)
            for i, e in enumerate(g):
                for _ in range(e):
                    term = term * forms[i]
            out = out + term
        return out

    # --- structure ---
    def total_degree(self) -> int:
        return max((sum(g) for g in self.coeffs), default=0)

    def homogeneous_parts(self) -> dict[int, "HoloPolynomial"]:
        parts: dict[int, dict] = {}
        for g, c in self.coeffs.items():
            parts.setdefault(sum(g), {})[g] = c
        return {k: HoloPolynomial(self.nvars, d) for k, d in sorted(parts.items())}

    # --- evaluation ---
    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 1
        pts = z[None, :] if scalar else z
        out = np.zeros(pts.shape[:-1], dtype=complex)
        for g, c in self.coeffs.items():
            term = np.full(pts.shape[:-1], c, dtype=complex)
            for i, e in enumerate(g):
                if e:
                    term = term * pts[..., i] ** e
            out += term
        return complex(out[0]) if scalar else out

    def __repr__(self):
        return f"HoloPolynomial(nvars={self.nvars}, terms={len(self.coeffs)})"


def monomials_up_to(nvars: int, degree: int):
    """All exponent tuples with total degree <= degree, lexicographic."""
    if nvars == 0:
        yield ()
        return
    for head in range(degree + 1):
        for tail in monomials_up_to(nvars - 1, degree - head):
            yield (head,) + tail


def multi_factorial(gamma) -> float:
    out = 1.0
    for g in gamma:
        out *= math.factorial(g)
    return out


def parse_poly(expr: str, nvars: int) -> HoloPolynomial:
    """Parse simple polynomial strings like "z1^2 + 2*z2 - 0.5*z1*z2".

    Terms are separated by +/-, each term a product of an optional
    numeric coefficient and z<i>^<e> factors.  Enough for CLI use.
    """
    expr = expr.replace(" ", "").replace("**", "^")
    if not expr:
        raise ValueError("empty polynomial")
    terms = []
    cur, sign = "", 1
    if expr[0] in "+-":
        sign = -1 if expr[0] == "-" else 1
        expr = expr[1:]
    for ch in expr:
        if ch in "+-":
            terms.append((sign, cur))
            sign = -1 if ch == "-" else 1
            cur = ""
        else:
            cur += ch
    terms.append((sign, cur))
    coeffs: dict[tuple, complex] = {}
    for sign, term in terms:
        if not term:
            raise ValueError(f"malformed polynomial near {expr!r}")
        coeff = complex(sign)
        gamma = [0] * nvars
        for factor in term.split("*"):
            if factor.startswith("z"):
                if "^" in factor:
                    name, e = factor.split("^")
                else:
                    name, e = factor, "1"
                idx = int(name[1:]) - 1
                if not 0 <= idx < nvars:
                    raise ValueError(f"variable {name} out of range for n={nvars}")
                gamma[idx] += int(e)
            else:
                coeff *= complex(factor.replace("i", "j"))
        g = tuple(gamma)
        coeffs[g] = coeffs.get(g, 0.0) + coeff
    return HoloPolynomial(nvars, coeffs)
