"""Model specification and builders.

A model is the joint transform ``H(q0,q1,q2) = E exp(-q0*A - q1*B1 - q2*B2)``
of inter-arrival time and the two claim amounts, given as an exact rational
function, together with the two income rates.  Builders cover the two
structural families used throughout:

* correlated mixtures — conditional on a latent index, (A, D, B2) are
  independent Erlangs, where D = B1/c1 - B2/c2 is the extra claim amount;
* proportional reinsurance — a single claim B split in fixed proportions
  (alpha, 1-alpha), with (A, B) a correlated Erlang mixture.

Both builders certify the a.s. ordering B1/c1 >= B2/c2 by construction.
Raw rational input is accepted but cannot be certified (or sampled).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .ratfun import MultiPoly, poly_diff, poly_eval

Rational = Fraction | int


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class Erlang:
    """Erlang(order, rate) component; order 0 means the variable is identically 0."""

    order: int
    rate: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "rate", _frac(self.rate))
        if self.order < 0:
            raise ValueError("Erlang order must be >= 0")
        if self.order > 0 and self.rate <= 0:
            raise ValueError("Erlang rate must be positive")

    @property
    def mean(self) -> Fraction:
        return Fraction(self.order) / self.rate if self.order else Fraction(0)


@dataclass(frozen=True)
class MixtureSpec:
    """Latent-index mixture: conditional on outcome k, (A, D, B2) are
    independent Erlangs with the listed orders and rates.

    ``components[k] = (a, d, b2)``.  A must have order >= 1 (inter-arrival
    times are strictly positive); D and B2 may be degenerate (order 0).
    """

    weights: tuple[Fraction, ...]
    components: tuple[tuple[Erlang, Erlang, Erlang], ...]
    income_rates: tuple[Fraction, Fraction] = (Fraction(1), Fraction(1))

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(_frac(w) for w in self.weights))
        object.__setattr__(
            self, "income_rates", tuple(_frac(c) for c in self.income_rates)
        )
        if len(self.weights) != len(self.components) or not self.weights:
            raise ValueError("weights and components must have equal positive length")
        if sum(self.weights) != 1 or any(w < 0 or w > 1 for w in self.weights):
            raise ValueError("weights must lie in [0,1] and sum to 1")
        if any(c <= 0 for c in self.income_rates):
            raise ValueError("income rates must be positive")
        for a, _, _ in self.components:
            if a.order < 1:
                raise ValueError("inter-arrival Erlang order must be >= 1")


@dataclass(frozen=True)
class ProportionalSpec:
    """Proportional reinsurance: one claim B per event, line 1 pays alpha*B,
    line 2 pays (1-alpha)*B; (A, B) mix over a latent index.

    ``components[k] = (a, b)``.
    """

    weights: tuple[Fraction, ...]
    components: tuple[tuple[Erlang, Erlang], ...]
    alpha: Fraction
    income_rates: tuple[Fraction, Fraction] = (Fraction(1), Fraction(1))

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(_frac(w) for w in self.weights))
        object.__setattr__(self, "alpha", _frac(self.alpha))
        object.__setattr__(
            self, "income_rates", tuple(_frac(c) for c in self.income_rates)
        )
        if len(self.weights) != len(self.components) or not self.weights:
            raise ValueError("weights and components must have equal positive length")
        if sum(self.weights) != 1 or any(w < 0 or w > 1 for w in self.weights):
            raise ValueError("weights must lie in [0,1] and sum to 1")
        c1, c2 = self.income_rates
        if c1 <= 0 or c2 <= 0:
            raise ValueError("income rates must be positive")
        if not Fraction(1, 2) <= self.alpha <= 1:
            raise ValueError("alpha must lie in [1/2, 1]")
        if self.alpha / c1 < (1 - self.alpha) / c2:
            raise ValueError("ordering requires alpha/c1 >= (1-alpha)/c2")
        for a, _ in self.components:
            if a.order < 1:
                raise ValueError("inter-arrival Erlang order must be >= 1")


@dataclass(frozen=True)
class RationalLST3:
    """The trivariate transform H = num/den with exact rational coefficients."""

    num: MultiPoly
    den: MultiPoly

    def __post_init__(self):
        if self.num.nvars != 3 or self.den.nvars != 3:
            raise ValueError("H must be trivariate")
        if self.den.constant_term() == 0:
            raise ValueError("H denominator vanishes at the origin")
        if self.num.constant_term() != self.den.constant_term():
            raise ValueError("H(0,0,0) must equal 1 exactly")

    def eval(self, q0: complex, q1: complex, q2: complex) -> complex:
        return poly_eval(self.num, (q0, q1, q2)) / poly_eval(self.den, (q0, q1, q2))

    def q0_degree_ok(self) -> bool:
        return self.num.degree(0) < self.den.degree(0)


@dataclass(frozen=True)
class ModelSpec:
    """A model ready for kernel construction.

    ``ordering_certified`` is True only when produced by a structural builder,
    which guarantees B1/c1 >= B2/c2 almost surely.
    """

    H: RationalLST3
    c: tuple[Fraction, Fraction]
    ordering_certified: bool
    sampler: Optional[MixtureSpec | ProportionalSpec] = None
    name: str = "model"

    def __post_init__(self):
        if any(ci <= 0 for ci in self.c):
            raise ValueError("income rates must be positive")

    def stable_key(self) -> str:
        """Deterministic hash of the exact model data."""
        blob = repr(
            (
                sorted(self.H.num.terms.items()),
                sorted(self.H.den.terms.items()),
                self.c,
            )
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

# A factor is (order, rate, linear form in (q0,q1,q2)); the LST contribution
# is (rate / (rate + l0*q0 + l1*q1 + l2*q2))**order.
_Factor = tuple[int, Fraction, tuple[Fraction, Fraction, Fraction]]


def _assemble(outcomes: Sequence[tuple[Fraction, Sequence[_Factor]]]) -> RationalLST3:
    """Sum of per-outcome Erlang products over the least common denominator.

    The common denominator is the product over distinct (rate, linform) bases
    raised to their maximal order, which keeps degrees minimal without any
    gcd machinery.
    """
    max_ord: dict[tuple[Fraction, tuple], int] = {}
    used: list[dict[tuple[Fraction, tuple], int]] = []
    for _, factors in outcomes:
        u: dict[tuple[Fraction, tuple], int] = {}
        for order, rate, lin in factors:
            if order == 0:
                continue
            key = (rate, tuple(lin))
            u[key] = u.get(key, 0) + order
        used.append(u)
        for key, order in u.items():
            max_ord[key] = max(max_ord.get(key, 0), order)

    bases = {key: MultiPoly.affine(3, key[0], list(key[1])) for key in max_ord}
    den = MultiPoly.const(3, 1)
    for key, m in sorted(max_ord.items(), key=lambda kv: repr(kv[0])):
        den = den * bases[key] ** m

    num = MultiPoly.zero(3)
    for (weight, factors), u in zip(outcomes, used):
        const = Fraction(weight)
        for order, rate, _ in factors:
            if order:
                const *= rate**order
        term = MultiPoly.const(3, const)
        for key, m in max_ord.items():
            rem = m - u.get(key, 0)
            if rem:
                term = term * bases[key] ** rem
        num = num + term
    return RationalLST3(num=num, den=den)


def build_H_mixture(m: MixtureSpec, name: str = "mixture") -> ModelSpec:
    """Transform of (A, B1, B2) for a latent-index (A, D, B2) Erlang mixture.

    With B1 = c1*(D + B2/c2), the exponent -q0*A - q1*B1 - q2*B2 becomes
    -q0*A - (c1*q1)*D - (c1/c2*q1 + q2)*B2, so each conditional factor stays
    a rational function of (q0, q1, q2) with exact coefficients.
    """
    c1, c2 = m.income_rates
    one = Fraction(1)
    zero = Fraction(0)
    lin_a = (one, zero, zero)
    lin_d = (zero, c1, zero)
    lin_b2 = (zero, c1 / c2, one)
    outcomes = []
    for w, (a, d, b2) in zip(m.weights, m.components):
        outcomes.append(
            (
                w,
                [
                    (a.order, a.rate, lin_a),
                    (d.order, d.rate, lin_d),
                    (b2.order, b2.rate, lin_b2),
                ],
            )
        )
    H = _assemble(outcomes)
    return ModelSpec(H=H, c=m.income_rates, ordering_certified=True, sampler=m, name=name)


def build_H_proportional(p: ProportionalSpec, name: str = "proportional") -> ModelSpec:
    """Transform for the proportional split: H(q0,q1,q2) = H_{A,B}(q0, a*q1+(1-a)*q2)."""
    lin_a = (Fraction(1), Fraction(0), Fraction(0))
    lin_b = (Fraction(0), p.alpha, 1 - p.alpha)
    outcomes = []
    for w, (a, b) in zip(p.weights, p.components):
        outcomes.append((w, [(a.order, a.rate, lin_a), (b.order, b.rate, lin_b)]))
    H = _assemble(outcomes)
    return ModelSpec(H=H, c=p.income_rates, ordering_certified=True, sampler=p, name=name)


def build_H_raw(
    num: MultiPoly, den: MultiPoly, c: tuple[Rational, Rational], name: str = "raw"
) -> ModelSpec:
    """Accept a raw rational transform.  Ordering cannot be verified from H
    alone; the model is flagged uncertified and cannot be sampled."""
    return ModelSpec(
        H=RationalLST3(num=num, den=den),
        c=(_frac(c[0]), _frac(c[1])),
        ordering_certified=False,
        sampler=None,
        name=name,
    )


# ---------------------------------------------------------------------------
# Moments and validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Moments:
    ea: Fraction
    eb1: Fraction
    eb2: Fraction
    ed: Fraction
    rho1: Fraction
    rho2: Fraction


def moments(M: ModelSpec) -> Moments:
    """Exact first moments from partial derivatives of H at the origin.

    E A = -dH/dq0 |_0 etc., computed with the quotient rule on exact
    rationals; rho_i = E B_i / (c_i * E A).
    """
    N, D = M.H.num, M.H.den
    d0 = D.constant_term()
    if d0 == 0:
        raise ValueError("H denominator vanishes at the origin")
    n0 = N.constant_term()

    def neg_partial(var: int) -> Fraction:
        dn = poly_diff(N, var).constant_term()
        dd = poly_diff(D, var).constant_term()
        return -(dn * d0 - n0 * dd) / (d0 * d0)

    ea = neg_partial(0)
    eb1 = neg_partial(1)
    eb2 = neg_partial(2)
    c1, c2 = M.c
    if ea <= 0:
        raise ValueError("E A must be positive")
    return Moments(
        ea=ea,
        eb1=eb1,
        eb2=eb2,
        ed=eb1 / c1 - eb2 / c2,
        rho1=eb1 / (c1 * ea),
        rho2=eb2 / (c2 * ea),
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    level: str  # "pass" | "warn" | "fail" | "fatal"
    detail: str


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, name: str, level: str, detail: str = "") -> None:
        self.checks.append(CheckResult(name, level, detail))

    @property
    def fatal(self) -> bool:
        return any(c.level == "fatal" for c in self.checks)

    @property
    def warnings(self) -> list[CheckResult]:
        return [c for c in self.checks if c.level == "warn"]

    def lines(self) -> list[str]:
        tags = {"pass": "PASS", "warn": "WARN", "fail": "FAIL", "fatal": "FATAL"}
        return [
            f"[{tags[c.level]}] {c.name}" + (f": {c.detail}" if c.detail else "")
            for c in self.checks
        ]


def check_model(M: ModelSpec) -> ValidationReport:
    """Structural and stability checks.

    Failure of rho_1 < 1 is fatal for transform work; an uncertified ordering
    on raw input is a warning, not an error (it is caught downstream by the
    root-count check and the simulation cross-validation).
    """
    rep = ValidationReport()
    try:
        ok = abs(M.H.eval(0.0, 0.0, 0.0) - 1.0) < 1e-14
        rep.add(
            "rationality",
            "pass" if ok else "fail",
            "H(0,0,0) = 1, den(0) != 0" if ok else "H(0,0,0) != 1",
        )
    except ZeroDivisionError:
        rep.add("rationality", "fatal", "den(0,0,0) = 0")
        return rep

    if M.H.q0_degree_ok():
        rep.add("q0_degree", "pass", "deg_q0 num < deg_q0 den (A > 0 a.s.)")
    else:
        rep.add("q0_degree", "fatal", "deg_q0 num >= deg_q0 den")

    try:
        mom = moments(M)
    except ValueError as exc:
        rep.add("moments", "fatal", str(exc))
        return rep

    if mom.rho1 < 1:
        rep.add("stability_rho1", "pass", f"rho1 = {float(mom.rho1):.6g} < 1")
    else:
        rep.add("stability_rho1", "fatal", f"rho1 = {float(mom.rho1):.6g} >= 1: NotStable")

    if mom.rho2 < 1:
        rep.add("loading_rho2", "pass", f"rho2 = {float(mom.rho2):.6g} < 1")
    else:
        rep.add(
            "loading_rho2",
            "fail",
            f"rho2 = {float(mom.rho2):.6g} >= 1: factorization root counts will fail",
        )

    if M.ordering_certified:
        rep.add("ordering", "pass", "certified by structural builder")
    else:
        rep.add(
            "ordering",
            "warn",
            "raw transform: a.s. ordering B1/c1 >= B2/c2 not verifiable from H",
        )
    return rep
