"""Exact multivariate polynomial arithmetic and complex univariate root finding.

Polynomials carry exact ``Fraction`` coefficients so that kernel construction
introduces no rounding; only root finding is floating point.  The scope is
deliberately narrow: ring operations, affine substitution, partial derivatives
and evaluation — just what the kernel pipeline needs.  No gcd, no factorization.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NonConvergent

# Leading coefficients below TAU_DEG (relative to the largest coefficient
# modulus) are treated as degenerate and trimmed.
TAU_DEG = 1e-12

# Roots closer than this are merged into one cluster with a multiplicity.
CLUSTER_RADIUS = 1e-7

# Backward-error style residual tolerance for accepted root sets.
EPS_ROOT = 1e-8

Exponent = tuple[int, ...]
Rational = Fraction | int


class MultiPoly:
    """Dense-map multivariate polynomial over the rationals (1 to 3 variables).

    Invariant: no stored coefficient is zero; the zero polynomial is the
    empty map.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Exponent, Rational] | None = None):
        if not 1 <= nvars <= 3:
            raise ValueError(f"nvars must be 1..3, got {nvars}")
        self.nvars = nvars
        clean: dict[Exponent, Fraction] = {}
        if terms:
            for exps, c in terms.items():
                if len(exps) != nvars:
                    raise ValueError(f"exponent tuple {exps} does not match nvars={nvars}")
                c = Fraction(c)
                if c != 0:
                    clean[tuple(int(e) for e in exps)] = clean.get(exps, Fraction(0)) + c
            clean = {e: c for e, c in clean.items() if c != 0}
        self.terms = clean

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "MultiPoly":
        return cls(nvars)

    @classmethod
    def const(cls, nvars: int, value: Rational) -> "MultiPoly":
        value = Fraction(value)
        if value == 0:
            return cls(nvars)
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def var(cls, nvars: int, index: int) -> "MultiPoly":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range for nvars={nvars}")
        e = [0] * nvars
        e[index] = 1
        return cls(nvars, {tuple(e): Fraction(1)})

    @classmethod
    def affine(cls, nvars: int, c0: Rational, coeffs: Sequence[Rational]) -> "MultiPoly":
        """c0 + sum_i coeffs[i] * x_i."""
        if len(coeffs) != nvars:
            raise ValueError("affine coefficient count must equal nvars")
        terms: dict[Exponent, Rational] = {(0,) * nvars: Fraction(c0)}
        for i, c in enumerate(coeffs):
            e = [0] * nvars
            e[i] = 1
            terms[tuple(e)] = Fraction(c)
        return cls(nvars, terms)

    # -- ring operations -------------------------------------------------

    def _check_same(self, other: "MultiPoly") -> None:
        if self.nvars != other.nvars:
            raise ValueError("polynomial arity mismatch")

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        self._check_same(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return MultiPoly(self.nvars, terms)

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        self._check_same(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) - c
        return MultiPoly(self.nvars, terms)

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __mul__(self, other: "MultiPoly | Rational") -> "MultiPoly":
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            return MultiPoly(self.nvars, {e: c * other for e, c in self.terms.items()})
        self._check_same(other)
        terms: dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return MultiPoly(self.nvars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "MultiPoly":
        if k < 0:
            raise ValueError("negative power")
        result = MultiPoly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, MultiPoly)
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self, var: int) -> int:
        """Degree in one variable; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(e[var] for e in self.terms)

    def total_degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def coeff_of(self, var: int, power: int) -> "MultiPoly":
        """Coefficient of var**power, as a polynomial in the same variables
        with that variable's exponent zeroed."""
        terms = {}
        for e, c in self.terms.items():
            if e[var] == power:
                e2 = list(e)
                e2[var] = 0
                terms[tuple(e2)] = c
        return MultiPoly(self.nvars, terms)

    def __repr__(self):
        if not self.terms:
            return "MultiPoly(0)"
        names = "xyz"[: self.nvars]
        parts = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(
                f"{names[i]}^{k}" if k > 1 else names[i] for i, k in enumerate(e) if k
            )
            parts.append(f"{c}*{mono}" if mono else f"{c}")
        return "MultiPoly(" + " + ".join(parts) + ")"


def poly_eval(p: MultiPoly, point: Sequence[complex]) -> complex:
    """Evaluate with coefficients converted to complex doubles.

    Horner-style: recursively groups on the first variable so each coefficient
    is touched once.
    """
    if len(point) != p.nvars:
        raise ValueError(f"point has {len(point)} coordinates, polynomial has {p.nvars}")
    return _eval_rec(p.terms, p.nvars, tuple(complex(x) for x in point))


def _eval_rec(terms: Mapping[Exponent, Fraction], nvars: int, point: tuple[complex, ...]) -> complex:
    if not terms:
        return 0j
    if nvars == 1:
        top = max(e[0] for e in terms)
        acc = 0j
        x = point[0]
        coeffs = {e[0]: c for e, c in terms.items()}
        for k in range(top, -1, -1):
            acc = acc * x + complex(coeffs.get(k, 0))
        return acc
    # group by exponent of the first variable
    groups: dict[int, dict[Exponent, Fraction]] = {}
    for e, c in terms.items():
        groups.setdefault(e[0], {})[e[1:]] = c
    top = max(groups)
    acc = 0j
    x = point[0]
    for k in range(top, -1, -1):
        acc = acc * x
        if k in groups:
            acc += _eval_rec(groups[k], nvars - 1, point[1:])
    return acc


def poly_compose_affine(
    p: MultiPoly,
    sub: Sequence[tuple[Rational, Sequence[Rational]]],
    new_nvars: int,
) -> MultiPoly:
    """Substitute each variable by an affine expression in new variables.

    ``sub[i] = (c0, coeffs)`` stands for ``x_i -> c0 + sum_j coeffs[j]*y_j``.
    The result is the exact expanded polynomial in the y variables.
    """
    if len(sub) != p.nvars:
        raise ValueError("substitution arity mismatch")
    if not 1 <= new_nvars <= 3:
        raise ValueError("target variable count must be 1..3")
    images = [MultiPoly.affine(new_nvars, c0, coeffs) for c0, coeffs in sub]
    # cache powers of each image
    powers: list[list[MultiPoly]] = [[MultiPoly.const(new_nvars, 1)] for _ in images]
    result = MultiPoly.zero(new_nvars)
    for e, c in p.terms.items():
        term = MultiPoly.const(new_nvars, c)
        for i, k in enumerate(e):
            while len(powers[i]) <= k:
                powers[i].append(powers[i][-1] * images[i])
            term = term * powers[i][k]
        result = result + term
    return result


def poly_diff(p: MultiPoly, var: int) -> MultiPoly:
    """Exact partial derivative."""
    if not 0 <= var < p.nvars:
        raise ValueError(f"variable index {var} out of range")
    terms: dict[Exponent, Fraction] = {}
    for e, c in p.terms.items():
        k = e[var]
        if k == 0:
            continue
        e2 = list(e)
        e2[var] = k - 1
        terms[tuple(e2)] = c * k
    return MultiPoly(p.nvars, terms)


# ---------------------------------------------------------------------------
# Univariate complex polynomials (floating point)
# ---------------------------------------------------------------------------


def trim_coeffs(coeffs: Sequence[complex], tau: float = TAU_DEG) -> np.ndarray:
    """Drop degenerate leading coefficients, relative to the largest modulus.

    Input and output are ascending-degree complex arrays.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.size == 0:
        return c
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(0, dtype=complex)
    cut = c.size
    while cut > 0 and abs(c[cut - 1]) <= tau * scale:
        cut -= 1
    return c[:cut]


@dataclass(frozen=True)
class RootList:
    """All roots of a univariate polynomial, clustered into multiplicities.

    ``roots`` is sorted by (Re, Im); ``residual`` is a backward-error style
    figure: max over roots of |p(r)| divided by sum_k |c_k| |r|^k.
    """

    roots: tuple[tuple[complex, int], ...]
    residual: float

    def flat(self) -> np.ndarray:
        """Roots repeated according to multiplicity."""
        out = []
        for r, m in self.roots:
            out.extend([r] * m)
        return np.array(out, dtype=complex)

    @property
    def total(self) -> int:
        return sum(m for _, m in self.roots)


def roots_univariate(coeffs: Sequence[complex], tau: float = TAU_DEG) -> RootList:
    """All complex roots with multiplicity, via companion-matrix eigenvalues.

    Deterministic: fixed scheme, output ordered by (Re, Im) lexicographic.
    Raises NonConvergent when the scaled residual exceeds EPS_ROOT.
    """
    c = trim_coeffs(coeffs, tau)
    if c.size < 2:
        raise ValueError("degree must be >= 1 after trimming")
    c = c / np.max(np.abs(c))
    n = c.size - 1
    if n == 1:
        roots = np.array([-c[0] / c[1]])
    else:
        companion = np.zeros((n, n), dtype=complex)
        companion[1:, :-1] = np.eye(n - 1)
        companion[:, -1] = -c[:-1] / c[-1]
        roots = np.linalg.eigvals(companion)
    order = np.lexsort((roots.imag, roots.real))
    roots = roots[order]

    # residual before clustering
    powers = np.abs(roots)[:, None] ** np.arange(n + 1)[None, :]
    denom = np.maximum(powers @ np.abs(c), 1e-300)
    vals = np.polyval(c[::-1], roots)
    residual = float(np.max(np.abs(vals) / denom))
    if residual > EPS_ROOT:
        raise NonConvergent(f"root residual {residual:.3e} exceeds {EPS_ROOT:.1e}")

    clustered: list[tuple[complex, int]] = []
    i = 0
    while i < len(roots):
        j = i + 1
        acc = roots[i]
        while j < len(roots) and abs(roots[j] - acc / (j - i)) <= CLUSTER_RADIUS:
            acc += roots[j]
            j += 1
        clustered.append((complex(acc / (j - i)), j - i))
        i = j
    clustered.sort(key=lambda rm: (rm[0].real, rm[0].imag))
    return RootList(roots=tuple(clustered), residual=residual)
