"""Bivariate kernel construction and per-point root classification.

The kernel is ``Ktilde(s1, z) = 1 - f(s1,z)/g(s1,z)`` with
``f/g = H(-z, s1/c1, (z-s1)/c2)``, denominators cleared exactly.  For each
fixed s1 with Re s1 > 0, the zeros of g - f and of g in the z-plane are found
numerically and split by the sign of their real part; that split is all the
factorization downstream ever needs.  No symbolic radicals, no branch-cut
bookkeeping: the negative-root *set* is continuous on Re s1 > 0 even where
closed-form branches jump, so per-point classification computes the same
glued object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import CountMismatch, DegreeViolation, RootOnAxis
from .model import ModelSpec
from .ratfun import MultiPoly, poly_compose_affine, roots_univariate, trim_coeffs

# Roots with |Re| inside this band are refused, not silently classified.
EPS_AXIS = 1e-9

# |z| tolerance for the single structural zero of g-f at the origin when s1=0.
_ORIGIN_TOL = 1e-7


@dataclass
class KernelRep:
    """Exact polynomials f, g in (s1, z) plus float coefficient tables.

    ``cg[k, j]`` is the float coefficient of z**k * s1**j in g (``cgf`` for
    g - f), used for fast specialization at numeric s1.
    """

    f: MultiPoly
    g: MultiPoly
    deg_z_f: int
    deg_z_g: int
    cg: np.ndarray
    cgf: np.ndarray
    model: ModelSpec
    _cache: dict = field(default_factory=dict, repr=False)

    def g_coeffs_at(self, s1: complex) -> np.ndarray:
        """Ascending-degree z-coefficients of g(s1, .)."""
        powers = s1 ** np.arange(self.cg.shape[1])
        return self.cg @ powers

    def gmf_coeffs_at(self, s1: complex) -> np.ndarray:
        """Ascending-degree z-coefficients of (g - f)(s1, .)."""
        powers = s1 ** np.arange(self.cgf.shape[1])
        return self.cgf @ powers

    def value(self, s1: complex, z: complex) -> complex:
        """Ktilde(s1, z) = 1 - f/g, by direct float evaluation."""
        pg = np.polyval(self.g_coeffs_at(s1)[::-1], z)
        pgmf = np.polyval(self.gmf_coeffs_at(s1)[::-1], z)
        return pgmf / pg


@dataclass(frozen=True)
class RootSplit:
    """Zeros of g and of g - f at fixed s1, split by sign of real part.

    Arrays are multiplicity-expanded and sorted by (Re, Im); the zeros with
    negative real part are the roots entering the positive Wiener-Hopf factor.
    """

    s1: complex
    poles_neg: np.ndarray
    poles_nonneg: np.ndarray
    zeros_neg: np.ndarray
    zeros_nonneg: np.ndarray
    axis_margin: float


def _poly_matrix(p: MultiPoly) -> np.ndarray:
    """Coefficient table C[k_z, k_s1] as float-converted rationals."""
    dz = max(p.degree(1), 0)
    ds = max(p.degree(0), 0)
    out = np.zeros((dz + 1, ds + 1), dtype=complex)
    for (i_s, i_z), c in p.terms.items():
        out[i_z, i_s] = float(c)
    return out


def build_kernel(M: ModelSpec) -> KernelRep:
    """Exact f, g via affine substitution q0 <- -z, q1 <- s1/c1, q2 <- (z-s1)/c2.

    Normalized so g(0,0) = f(0,0) > 0.  Raises DegreeViolation when the
    z-degree of f is not strictly below that of g.
    """
    c1, c2 = M.c
    zero = Fraction(0)
    sub = [
        (zero, (zero, Fraction(-1))),          # q0 -> -z
        (zero, (1 / c1, zero)),                # q1 -> s1/c1
        (zero, (Fraction(-1) / c2, 1 / c2)),   # q2 -> (z - s1)/c2
    ]
    f = poly_compose_affine(M.H.num, sub, 2)
    g = poly_compose_affine(M.H.den, sub, 2)
    if f.constant_term() != g.constant_term():
        raise ValueError("kernel normalization failed: f(0,0) != g(0,0)")
    if g.constant_term() < 0:
        f = -f
        g = -g
    deg_z_f, deg_z_g = f.degree(1), g.degree(1)
    if deg_z_f >= deg_z_g:
        raise DegreeViolation(
            f"deg_z f = {deg_z_f} >= deg_z g = {deg_z_g}; A > 0 a.s. is violated"
        )
    return KernelRep(
        f=f,
        g=g,
        deg_z_f=deg_z_f,
        deg_z_g=deg_z_g,
        cg=_poly_matrix(g),
        cgf=_poly_matrix(g - f),
        model=M,
    )


def _classify(roots: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray, float]:
    margin = float(np.min(np.abs(roots.real))) if roots.size else np.inf
    if margin <= eps:
        offender = roots[np.argmin(np.abs(roots.real))]
        raise RootOnAxis(f"root {offender} within {eps:.1e} of the imaginary axis")
    neg = roots[roots.real < 0]
    nonneg = roots[roots.real > 0]
    return np.sort_complex(neg), np.sort_complex(nonneg), margin


def roots_in_z(K: KernelRep, s1: complex, use_cache: bool = True) -> RootSplit:
    """Specialize g and g - f at s1, root them, classify by sign of Re.

    Requires Re s1 >= 0.  At s1 = 0 exactly, the kernel numerator always has
    one structural zero at z = 0 (since Ktilde(0,0) = 0); it is the limit of
    the drift root that lives in Re z > 0 for Re s1 > 0 and is assigned to the
    nonnegative class.  Any other root inside the axis band raises RootOnAxis.
    """
    s1 = complex(s1)
    if s1.real < 0:
        raise ValueError("roots_in_z requires Re s1 >= 0")
    if use_cache and s1 in K._cache:
        return K._cache[s1]

    pole_list = roots_univariate(K.g_coeffs_at(s1))
    zero_list = roots_univariate(K.gmf_coeffs_at(s1))
    poles = pole_list.flat()
    zeros = zero_list.flat()

    origin_extras = 0
    if s1 == 0:
        k = int(np.argmin(np.abs(zeros)))
        if abs(zeros[k]) > _ORIGIN_TOL:
            raise RootOnAxis(
                f"expected structural zero at the origin for s1=0, nearest root {zeros[k]}"
            )
        zeros = np.delete(zeros, k)
        origin_extras = 1

    poles_neg, poles_nonneg, m1 = _classify(poles, EPS_AXIS)
    zeros_neg, zeros_nonneg, m2 = _classify(zeros, EPS_AXIS)
    if origin_extras:
        zeros_nonneg = np.sort_complex(np.append(zeros_nonneg, 0j))

    split = RootSplit(
        s1=s1,
        poles_neg=poles_neg,
        poles_nonneg=poles_nonneg,
        zeros_neg=zeros_neg,
        zeros_nonneg=zeros_nonneg,
        axis_margin=min(m1, m2),
    )
    if use_cache:
        K._cache[s1] = split
    return split


def argument_principle_count(
    coeffs: np.ndarray, left: float, radius: float, nodes: int = 4096
) -> int:
    """Number of zeros of the polynomial inside the rectangle
    [left, radius] x [-radius, radius], by trapezoidal quadrature of p'/p.

    The winding number is rounded to the nearest integer; a residual above
    0.25 raises CountMismatch (contour too close to a zero or under-resolved).
    """
    c = trim_coeffs(coeffs)
    p = c[::-1]
    dp = np.polyder(p)
    corners = [
        complex(left, -radius),
        complex(radius, -radius),
        complex(radius, radius),
        complex(left, radius),
        complex(left, -radius),
    ]
    total = 0j
    for a, b in zip(corners[:-1], corners[1:]):
        t = np.linspace(0.0, 1.0, nodes)
        zpts = a + (b - a) * t
        vals = np.polyval(dp, zpts) / np.polyval(p, zpts)
        total += np.trapezoid(vals, zpts)
    w = total / (2j * np.pi)
    count = int(np.round(w.real))
    if abs(w - count) > 0.25:
        raise CountMismatch(f"argument-principle winding {w} did not settle")
    return count


def rouche_check(K: KernelRep, s1: complex, argument_principle: bool = False) -> bool:
    """Check that g - f and g have equally many zeros in Re z >= 0 at this s1.

    Requires Re s1 > 0 and rho2 < 1 for the guarantee to hold.  With
    ``argument_principle=True`` the g - f count is recomputed by a contour
    integral over a rectangle enclosing the closed right half-plane roots.
    Raises CountMismatch on disagreement.
    """
    split = roots_in_z(K, s1)
    nz, npole = len(split.zeros_nonneg), len(split.poles_nonneg)
    if nz != npole:
        raise CountMismatch(
            f"at s1={s1}: {nz} zeros vs {npole} poles in the right half-plane"
        )
    if argument_principle:
        all_roots = np.concatenate(
            [split.zeros_neg, split.zeros_nonneg, split.poles_neg, split.poles_nonneg]
        )
        radius = 2.0 * (1.0 + float(np.max(np.abs(all_roots))))
        recount = argument_principle_count(
            K.gmf_coeffs_at(complex(s1)), left=-EPS_AXIS / 2, radius=radius
        )
        if recount != nz:
            raise CountMismatch(
                f"argument principle counts {recount} right-half-plane zeros, "
                f"classification found {nz}"
            )
    return True
