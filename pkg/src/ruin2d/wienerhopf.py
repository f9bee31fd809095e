"""One-parameter Wiener-Hopf factor, projected factorization, and the
survival-function transform.

For fixed s1 with Re s1 > 0 the positive factor is

    Kplus_{s1}(z) = prod_{Re v_i(s1) < 0} (z - v_i(s1)) / prod_{Re xi_i(s1) < 0} (z - xi_i(s1)),

with v_i the zeros of g - f and xi_i the zeros of g.  The projected kernel
K(s1, 0) = Ktilde(s1, s1) is a univariate rational function whose negative
zeros/poles give the marginal factor K_pr and the atom at zero of the first
line's stationary waiting time.  The survival transform is then

    psi(s1, s2) = [K_pr(0) / K_pr(s1)] * [Kplus_{s1}(s1) / Kplus_{s1}(s1 + s2)].
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import BoundFailure, NotStable, RootOnAxis
from .kernel import EPS_AXIS, KernelRep, RootSplit, roots_in_z
from .model import moments
from .ratfun import poly_compose_affine, roots_univariate

_ORIGIN_TOL = 1e-7


@dataclass(frozen=True)
class ProjectedFactorization:
    """Negative zeros/poles of the projected kernel s1 -> Ktilde(s1, s1).

    ``atom`` is K_pr(0), the probability the first line's stationary waiting
    time is zero; complex roots come in conjugate pairs so it is real, and it
    lies in (0, 1] for a stable model.  The zero and pole counts need not be
    equal.
    """

    zeros_neg: np.ndarray
    poles_neg: np.ndarray
    atom: float


def projected_factorization(K: KernelRep) -> ProjectedFactorization:
    """Root the numerator and denominator of Ktilde(s1, s1); keep Re < 0.

    The numerator always vanishes at s1 = 0 (drift root, tied to
    E A * (1 - rho1)); exactly one zero root is removed before classification,
    and a multiplicity other than one under rho1 < 1 raises NotStable.
    """
    mom = moments(K.model)
    if mom.rho1 >= 1:
        raise NotStable(f"rho1 = {float(mom.rho1):.6g} >= 1, no proper stationary law")

    diag = [(Fraction(0), (Fraction(1),)), (Fraction(0), (Fraction(1),))]
    num_poly = poly_compose_affine(K.g - K.f, diag, 1)
    den_poly = poly_compose_affine(K.g, diag, 1)

    def coeffs(p):
        top = p.degree(0)
        return np.array([float(p.terms.get((k,), 0)) for k in range(top + 1)], dtype=complex)

    nroots = roots_univariate(coeffs(num_poly)).flat()
    k = int(np.argmin(np.abs(nroots)))
    if abs(nroots[k]) > _ORIGIN_TOL:
        raise NotStable(f"projected kernel lacks its structural zero at 0 (nearest {nroots[k]})")
    nroots = np.delete(nroots, k)
    if nroots.size and np.min(np.abs(nroots)) <= _ORIGIN_TOL:
        raise NotStable("origin zero of the projected kernel has multiplicity != 1")

    for r in nroots:
        if abs(r.real) <= EPS_AXIS:
            raise RootOnAxis(f"projected-kernel zero {r} on the imaginary axis")
    proots = roots_univariate(coeffs(den_poly)).flat()
    for r in proots:
        if abs(r.real) <= EPS_AXIS:
            raise RootOnAxis(f"projected-kernel pole {r} on the imaginary axis")

    zeros_neg = np.sort_complex(nroots[nroots.real < 0])
    poles_neg = np.sort_complex(proots[proots.real < 0])

    atom_c = complex(np.prod(-zeros_neg) / np.prod(-poles_neg))
    if abs(atom_c.imag) > 1e-9 * max(1.0, abs(atom_c.real)):
        raise NotStable(f"atom came out non-real: {atom_c}")
    atom = float(atom_c.real)
    if not 0.0 < atom <= 1.0 + 1e-9:
        raise NotStable(f"atom {atom} outside (0, 1]")
    return ProjectedFactorization(zeros_neg=zeros_neg, poles_neg=poles_neg, atom=min(atom, 1.0))


def K_pr_eval(PF: ProjectedFactorization, s1) -> np.ndarray | complex:
    """K_pr(s1) = prod (s1 - zeros_neg) / prod (s1 - poles_neg), vectorized."""
    s = np.asarray(s1, dtype=complex)
    num = np.ones_like(s)
    for r in PF.zeros_neg:
        num = num * (s - r)
    den = np.ones_like(s)
    for r in PF.poles_neg:
        den = den * (s - r)
    out = num / den
    return complex(out) if np.isscalar(s1) or s.ndim == 0 else out


def wh_plus_split(split: RootSplit, z) -> np.ndarray | complex:
    """Positive factor from an existing RootSplit, vectorized over z."""
    zz = np.asarray(z, dtype=complex)
    num = np.ones_like(zz)
    for r in split.zeros_neg:
        num = num * (zz - r)
    den = np.ones_like(zz)
    for r in split.poles_neg:
        den = den * (zz - r)
    out = num / den
    return complex(out) if np.isscalar(z) or zz.ndim == 0 else out


def wh_plus(K: KernelRep, s1: complex, z) -> np.ndarray | complex:
    """One-parameter positive Wiener-Hopf factor Kplus_{s1}(z).

    Analytic and zero-free in Re z > 0 by construction.  Requires Re s1 > 0,
    or s1 = 0 exactly (evaluated with the limiting s1 = 0 root split).
    """
    return wh_plus_split(roots_in_z(K, s1), z)


def C_eval(K: KernelRep, PF: ProjectedFactorization, s1: complex) -> complex:
    """C(s1) = K_pr(0) * K_pr(s1)^-1 * Kplus_{s1}(s1)."""
    return PF.atom / K_pr_eval(PF, s1) * wh_plus(K, s1, s1)


@dataclass(frozen=True)
class TransformPoint:
    s1: complex
    s2: complex
    value: complex
    split: Optional[RootSplit] = None


def psi(K: KernelRep, PF: ProjectedFactorization, s1: complex, s2: complex) -> TransformPoint:
    """Survival-function LST psi(s1, s2); psi(0,0) = 1 for a stable model.

    Raises BoundFailure when |psi| exceeds 1 + 1e-6 in the closed right
    quadrant, which signals upstream root misclassification.
    """
    s1 = complex(s1)
    s2 = complex(s2)
    if s1.real < 0 or s2.real < 0:
        raise ValueError("psi requires Re s1 >= 0 and Re s2 >= 0")
    split = roots_in_z(K, s1)
    value = (
        PF.atom
        / K_pr_eval(PF, s1)
        * (wh_plus_split(split, s1) / wh_plus_split(split, s1 + s2))
    )
    if abs(value) > 1.0 + 1e-6:
        raise BoundFailure(f"|psi({s1},{s2})| = {abs(value):.8f} > 1")
    return TransformPoint(s1=s1, s2=s2, value=complex(value), split=split)


def tail_transform(K: KernelRep, PF: ProjectedFactorization, s1: complex, s2: complex) -> complex:
    """Laplace transform of the joint tail P(W1 > u1, W2 > u2):

        [1 - psi(s1,0) - psi(0,s2) + psi(s1,s2)] / (s1*s2),

    for Re s1 > 0, Re s2 > 0 (inversion contours never touch the axes).
    """
    s1 = complex(s1)
    s2 = complex(s2)
    if s1.real <= 0 or s2.real <= 0:
        raise ValueError("tail_transform requires Re s1 > 0 and Re s2 > 0")
    ev = TransformEvaluator(K, PF)
    return complex(ev.tail_row(s1, np.array([s2]))[0])


class TransformEvaluator:
    """Vectorized transform evaluation shared by the inversion engine.

    One root split per distinct s1; all s2 values at that s1 are then cheap
    factor products.  Marginal slices reuse the cancellation identities
    psi(s1, 0) = atom / K_pr(s1) and psi(0, s2) = Kplus_0(0) / Kplus_0(s2).
    """

    def __init__(self, K: KernelRep, PF: ProjectedFactorization):
        self.K = K
        self.PF = PF
        self.atom = PF.atom  # P(W1 = 0)
        self._split0: Optional[RootSplit] = None

    @property
    def split0(self) -> RootSplit:
        if self._split0 is None:
            self._split0 = roots_in_z(self.K, 0.0)
        return self._split0

    @property
    def atom2(self) -> float:
        """P(W2 = 0) = Kplus_0(0), the limit of psi(0, s2) as s2 -> infinity."""
        return float(wh_plus_split(self.split0, 0.0).real)

    def psi_s1_0(self, s1) -> np.ndarray | complex:
        return self.atom / K_pr_eval(self.PF, s1)

    def psi_0_s2(self, s2) -> np.ndarray | complex:
        w0 = wh_plus_split(self.split0, 0.0)
        return w0 / wh_plus_split(self.split0, s2)

    def C(self, s1: complex) -> complex:
        split = roots_in_z(self.K, s1)
        return complex(self.psi_s1_0(s1) * wh_plus_split(split, s1))

    def psi_row(self, s1: complex, s2: np.ndarray) -> np.ndarray:
        """psi(s1, s2) for one s1 and an array of s2."""
        split = roots_in_z(self.K, s1)
        c = self.psi_s1_0(s1) * wh_plus_split(split, s1)
        return np.asarray(c / wh_plus_split(split, s1 + s2))

    def tail_row(self, s1: complex, s2: np.ndarray) -> np.ndarray:
        """Tail transform for one s1 and an array of s2 (all with Re > 0)."""
        vals = self.psi_row(s1, s2)
        m1 = self.psi_s1_0(s1)
        m2 = self.psi_0_s2(s2)
        return (1.0 - m1 - m2 + vals) / (s1 * s2)

    def check_bound(self, values: np.ndarray) -> None:
        worst = float(np.max(np.abs(values))) if values.size else 0.0
        if worst > 1.0 + 1e-6:
            raise BoundFailure(f"|psi| reached {worst:.8f} > 1 on the contour")

    # -- pieces for the jump-corrected inversion ------------------------

    def marginal1_transform(self, s1: np.ndarray) -> np.ndarray:
        """Transform of u1 -> P(W1 > u1): [1 - psi(s1, 0)] / s1."""
        return (1.0 - self.psi_s1_0(s1)) / s1

    def marginal2_transform(self, s2: np.ndarray) -> np.ndarray:
        """Transform of u2 -> P(W2 > u2): [1 - psi(0, s2)] / s2."""
        return (1.0 - self.psi_0_s2(s2)) / s2

    def edge1_transform(self, s1: np.ndarray) -> np.ndarray:
        """Transform of u1 -> P(W1 > u1, W2 > 0): [1 - psi(s1,0) - p2 + C(s1)] / s1.

        C(s1) = E[exp(-s1 W1); W2 = 0] is the large-s2 limit of psi(s1, s2).
        """
        s1 = np.asarray(s1, dtype=complex)
        cvals = np.array([self.C(complex(s)) for s in s1.ravel()]).reshape(s1.shape)
        return (1.0 - self.psi_s1_0(s1) - self.atom2 + cvals) / s1
