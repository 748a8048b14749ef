"""Approximate-subgroup statistics and bounded-generation predicates on quotients."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any, Optional, Union

import sympy

from .errors import EnumerationGuardError, ValidationError
from .groupgen import Quotient, commutator_set, congruence_filter, derived_subgroup
from .modring import ResidueMatrix, valuation
from .spectral import walk_distribution

MAX_C = 64
COMMUTATOR_ORDER_GUARD = 100_000


@dataclass(frozen=True, eq=False)
class SubsetView:
    """A subset of a quotient, stored as sorted element positions."""

    quotient: Quotient
    positions: tuple[int, ...]
    symmetric: bool = False

    def __post_init__(self) -> None:
        order = self.quotient.order
        if any(not 0 <= i < order for i in self.positions):
            raise ValidationError(f"subset positions must lie in [0, {order})")
        if list(self.positions) != sorted(set(self.positions)):
            raise ValidationError("subset positions must be sorted and distinct")
        if self.symmetric:
            members = set(self.positions)
            if any(self.quotient.inverse(i) not in members for i in self.positions):
                raise ValidationError("subset flagged symmetric is not closed under inverse")

    @classmethod
    def of(cls, quotient: Quotient, positions: Iterable[int], symmetric: bool = False) -> SubsetView:
        return cls(quotient, tuple(sorted({int(i) for i in positions})), symmetric)

    @classmethod
    def whole(cls, quotient: Quotient) -> SubsetView:
        return cls(quotient, tuple(range(quotient.order)), True)

    @classmethod
    def generators(cls, quotient: Quotient, include_identity: bool = True) -> SubsetView:
        """π_Q(Ω), optionally with the identity adjoined."""
        positions = set(quotient.generator_positions)
        if include_identity:
            positions.add(0)
        return cls.of(quotient, positions, symmetric=True)

    def __len__(self) -> int:
        return len(self.positions)

    def __contains__(self, position: object) -> bool:
        return position in set(self.positions)

    def as_set(self) -> frozenset[int]:
        return frozenset(self.positions)


def product_set(X: SubsetView, Y: SubsetView) -> SubsetView:
    """``X·Y = {xy}``."""
    if X.quotient is not Y.quotient:
        raise ValidationError("subsets live in different quotients")
    G = X.quotient
    return SubsetView.of(G, {G.multiply(x, y) for x in X.positions for y in Y.positions})


def iterated_product(A: SubsetView, C: int) -> SubsetView:
    """∏_C A; the empty product is ``{identity}``."""
    if C < 0:
        raise ValidationError("product length must be nonnegative")
    result = SubsetView(A.quotient, (0,), True)
    for _ in range(C):
        result = product_set(result, A)
    return result


@dataclass(frozen=True)
class PredicateReport:
    mass: float
    mass_threshold: float
    conjunct1: bool
    length: int
    length_threshold: float
    conjunct2: bool
    size: int
    tripled_size: int
    conjunct3: bool

    @property
    def overall(self) -> bool:
        return self.conjunct1 and self.conjunct2 and self.conjunct3

    def to_payload(self) -> dict[str, Any]:
        return {**asdict(self), "overall": self.overall}


def pq_predicate(A: SubsetView, delta: Union[Fraction, int, str], length: int) -> PredicateReport:
    """
    ``P(A) > Q^-δ``, ``l > ln(Q)/δ`` and ``|AAA| <= |A|^(1+δ)`` at level Q.

    Q is the modulus of A's quotient; the walk runs on its generators.
    """
    d = Fraction(delta)
    if d <= 0:
        raise ValidationError(f"delta must be positive, got {d}")
    G = A.quotient
    Q = G.modulus.value
    mass = float(walk_distribution(G, length)[list(A.positions)].sum())
    mass_threshold = Q ** (-float(d))
    length_threshold = math.log(Q) / float(d)
    tripled = product_set(product_set(A, A), A)
    size, tripled_size = len(A), len(tripled)
    return PredicateReport(
        mass=mass,
        mass_threshold=mass_threshold,
        conjunct1=mass > mass_threshold,
        length=length,
        length_threshold=length_threshold,
        conjunct2=length > length_threshold,
        size=size,
        tripled_size=tripled_size,
        conjunct3=tripled_size**d.denominator <= size ** (d.numerator + d.denominator),
    )


def bounded_gen_check(A: SubsetView, C: int, level: int) -> bool:
    """Whether ∏_C A contains the congruence kernel of level ``level``."""
    if not 1 <= C <= MAX_C:
        raise EnumerationGuardError(f"C must lie in [1, {MAX_C}], got {C}")
    kernel = congruence_filter(A.quotient, level).member_positions
    covered = iterated_product(A, C).as_set()
    return all(i in covered for i in kernel)


def minimal_bounded_generation(A: SubsetView, level: int, max_C: int = MAX_C) -> Optional[int]:
    """Least C with ``G[p^level] ⊆ ∏_C A``, or None when none up to ``max_C`` works."""
    if not 1 <= max_C <= MAX_C:
        raise EnumerationGuardError(f"max_C must lie in [1, {MAX_C}], got {max_C}")
    kernel = set(congruence_filter(A.quotient, level).member_positions)
    product = SubsetView(A.quotient, (0,), True)
    for C in range(1, max_C + 1):
        product = product_set(product, A)
        if kernel <= product.as_set():
            return C
    return None


@dataclass(frozen=True)
class CommutatorFill:
    t_min: Optional[int]
    bound_ok: Optional[bool]
    order: int
    commutator_count: int
    derived_order: int
    closure_agrees: bool
    p_group_exponents: Optional[tuple[int, int]] = None

    def to_payload(self) -> dict[str, Any]:
        return asdict(self)


def _p_group_exponents(order: int, abelianization: int) -> Optional[tuple[int, int]]:
    """``(n, m)`` with ``|G| = p^n`` and ``|G/[G,G]| = p^m``, or None if G is no p-group."""
    factors = sympy.factorint(order)
    if len(factors) != 1:
        return None
    ((p, n),) = factors.items()
    return int(n), valuation(abelianization, int(p))


def commutator_fill(G: Quotient, max_order: int = COMMUTATOR_ORDER_GUARD) -> CommutatorFill:
    """
    Least t with ∏_t w(G) = [G, G], where w(G) is the set of commutators.

    [G, G] is taken from the commutator products themselves and checked against
    the normal closure of the generator commutators.
    """
    if G.order > max_order:
        raise EnumerationGuardError(f"commutator fill is limited to |G| <= {max_order}")
    words = SubsetView.of(G, commutator_set(G), symmetric=True)
    derived = derived_subgroup(G)
    product = SubsetView(G, (0,), True)
    t = 0
    while product.as_set() != derived:
        grown = product_set(product, words)
        if len(grown) == len(product):
            break
        product = grown
        t += 1
    closure_agrees = product.as_set() == derived
    exponents = _p_group_exponents(G.order, G.order // len(derived))
    bound_ok = None
    if exponents is not None and closure_agrees:
        n, m = exponents
        bound_ok = t <= n - m
    return CommutatorFill(
        t_min=t if closure_agrees else None,
        bound_ok=bound_ok,
        order=G.order,
        commutator_count=len(words),
        derived_order=len(derived),
        closure_agrees=closure_agrees,
        p_group_exponents=exponents,
    )


@dataclass(frozen=True)
class TriplingStats:
    size: int
    tripled_size: int
    tripling_exponent: Optional[float]
    group_order: int
    threshold: float
    crosses_threshold: bool

    def to_payload(self) -> dict[str, Any]:
        return asdict(self)


def tripling_stats(A: SubsetView, epsilon: Union[Fraction, int, str]) -> TriplingStats:
    """Raw approximate-subgroup diagnostics against the ``|G|^(1-ε)`` threshold."""
    eps = Fraction(epsilon)
    G = A.quotient
    tripled = len(product_set(product_set(A, A), A))
    size = len(A)
    exponent = math.log(tripled) / math.log(size) if size > 1 else None
    threshold = G.order ** (1 - float(eps))
    return TriplingStats(
        size=size,
        tripled_size=tripled,
        tripling_exponent=exponent,
        group_order=G.order,
        threshold=threshold,
        crosses_threshold=size >= threshold,
    )


def resolve_subset(
    G: Quotient,
    positions: Optional[Sequence[int]] = None,
    matrices: Optional[Sequence[Sequence[Sequence[int]]]] = None,
    include_generators: bool = False,
    include_identity: bool = False,
) -> SubsetView:
    """Build a subset from positions, matrices (resolved through the index) or generators."""
    members: set[int] = set(int(i) for i in positions or ())
    for rows in matrices or ():
        members.add(G.position(ResidueMatrix.from_rows(rows, G.modulus)))
    if include_generators:
        members.update(G.generator_positions)
    if include_identity:
        members.add(0)
    if not members:
        raise ValidationError("subset is empty")
    return SubsetView.of(G, members)
