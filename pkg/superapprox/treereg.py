"""
Regularization of leaf sets of the rooted k-regular tree of depth n.

Leaves are digit tuples of length n. Every bound that decides correctness is
compared in exact integer arithmetic: ``x >= k**(r)`` for rational ``r = a/b``
becomes ``x**b >= k**a``, and ``x >= y / (2 log2 k)`` becomes
``2**y <= k**(2x)``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Union

from scipy.optimize import brentq

from .errors import EmptyLeafSetError, ValidationError
from .observability import get_logger, log_event

LOGGER = get_logger(__name__)

Prefix = tuple[int, ...]
Rational = Union[Fraction, int, str]

THRESHOLD_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TreeShape:
    k: int
    n: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValidationError(f"branching factor must be at least 2, got {self.k}")
        if self.n < 1:
            raise ValidationError(f"depth must be at least 1, got {self.n}")


@dataclass(frozen=True)
class LeafSet:
    """A sorted, deduplicated set of leaves of T_{k,n}."""

    shape: TreeShape
    leaves: tuple[Prefix, ...]

    def __post_init__(self) -> None:
        k, n = self.shape.k, self.shape.n
        previous: Optional[Prefix] = None
        for leaf in self.leaves:
            if len(leaf) != n or any(not 0 <= d < k for d in leaf):
                raise ValidationError(f"leaf {leaf} is not a digit sequence of T_{{{k},{n}}}")
            if previous is not None and leaf <= previous:
                raise ValidationError("leaves must be sorted and distinct")
            previous = leaf

    @classmethod
    def of(cls, shape: TreeShape, leaves: Iterable[Iterable[int]]) -> LeafSet:
        return cls(shape, tuple(sorted({tuple(int(d) for d in leaf) for leaf in leaves})))

    def __len__(self) -> int:
        return len(self.leaves)

    def __iter__(self) -> Iterator[Prefix]:
        return iter(self.leaves)

    @classmethod
    def from_text(cls, text: str) -> LeafSet:
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines:
            raise ValidationError("leaf set text is empty")
        header = dict(part.split("=", 1) for part in lines[0].split() if "=" in part)
        try:
            shape = TreeShape(int(header["k"]), int(header["n"]))
        except (KeyError, ValueError) as exc:
            raise ValidationError("leaf set header must read 'k=<k> n=<n>'") from exc
        try:
            leaves = [tuple(int(d) for d in line.split(",")) for line in lines[1:]]
        except ValueError as exc:
            raise ValidationError("leaf digits must be comma-separated integers") from exc
        return cls.of(shape, leaves)

    def to_text(self) -> str:
        body = "".join(",".join(map(str, leaf)) + "\n" for leaf in self.leaves)
        return f"k={self.shape.k} n={self.shape.n}\n{body}"


def project(A: LeafSet, level: int) -> tuple[Prefix, ...]:
    """π_{level,n}(A): the distinct length-``level`` prefixes, sorted."""
    if not 0 <= level <= A.shape.n:
        raise ValidationError(f"level {level} outside [0, {A.shape.n}]")
    prefixes: list[Prefix] = []
    for leaf in A.leaves:
        prefix = leaf[:level]
        if not prefixes or prefixes[-1] != prefix:
            prefixes.append(prefix)
    return tuple(prefixes)


def _children(prefixes: Iterable[Prefix]) -> dict[Prefix, list[Prefix]]:
    groups: dict[Prefix, list[Prefix]] = {}
    for prefix in prefixes:
        groups.setdefault(prefix[:-1], []).append(prefix)
    return groups


def parents_bound_holds(before: int, after: int, k: int) -> bool:
    """``after >= before / (2 log2 k)``."""
    return 2**before <= k ** (2 * after)


@dataclass(frozen=True)
class ParentsResult:
    k_prime: int
    leaves: LeafSet


def parents_regularize(A: LeafSet) -> ParentsResult:
    """Keep one dyadic degree class of parents, each with exactly ``k'`` children."""
    if not A.leaves:
        raise EmptyLeafSetError("empty leaf set")
    groups = _children(A.leaves)
    mass: dict[int, int] = {}
    for children in groups.values():
        i = len(children).bit_length() - 1
        mass[i] = mass.get(i, 0) + 2**i
    best = min(mass, key=lambda i: (-mass[i], i))
    k_prime = 2**best
    kept = [
        child
        for children in groups.values()
        if len(children).bit_length() - 1 == best
        for child in children[:k_prime]
    ]
    return ParentsResult(k_prime, LeafSet(A.shape, tuple(kept)))


@dataclass(frozen=True)
class RegularizationResult:
    """
    Regularized subset B of A.

    ``degrees`` holds ``k_m .. k_{n-1}``. For block results the tree levels are
    blocks of ``block_size`` digits and ``m`` counts digits, so ``m`` is
    ``block_size`` times the block level.
    """

    leaves: LeafSet
    m: int
    v: Prefix
    degrees: tuple[int, ...]
    all_degrees: tuple[int, ...]
    chain_sizes: tuple[int, ...]
    epsilon: Fraction
    block_size: int = 1
    threshold_log2: Optional[float] = None

    @property
    def B(self) -> LeafSet:
        return self.leaves

    def to_payload(self) -> dict[str, Any]:
        return {
            "k": self.leaves.shape.k,
            "n": self.leaves.shape.n,
            "epsilon": str(self.epsilon),
            "m": self.m,
            "v": list(self.v),
            "degrees": list(self.degrees),
            "all_degrees": list(self.all_degrees),
            "chain_sizes": list(self.chain_sizes),
            "size": len(self.leaves),
            "block_size": self.block_size,
            "threshold_log2": self.threshold_log2,
            "leaves": [list(leaf) for leaf in self.leaves],
        }


def as_epsilon(value: Rational) -> Fraction:
    epsilon = Fraction(value)
    if not 0 < epsilon <= 1:
        raise ValidationError(f"epsilon must lie in (0, 1], got {epsilon}")
    return epsilon


def _power_below(product: int, k: int, level: int, epsilon: Fraction) -> bool:
    """``product < k**(level * epsilon / 2)``."""
    a, b = epsilon.numerator, epsilon.denominator
    return product ** (2 * b) < k ** (level * a)


def regularize(A: LeafSet, epsilon: Rational) -> RegularizationResult:
    eps = as_epsilon(epsilon)
    if not A.leaves:
        raise EmptyLeafSetError("empty leaf set")
    k, n = A.shape.k, A.shape.n
    degrees = [0] * n
    sizes = [0] * (n + 1)
    sizes[n] = len(A)
    current = A.leaves
    for i in range(n, 0, -1):
        level_set = LeafSet(TreeShape(k, i), project(LeafSet(A.shape, current), i))
        kept = parents_regularize(level_set)
        degrees[i - 1] = kept.k_prime
        selected = set(kept.leaves.leaves)
        current = tuple(a for a in current if a[:i] in selected)
        sizes[i - 1] = len(current)

    m = 0
    product = 1
    for i in range(1, n + 1):
        product *= degrees[i - 1]
        if _power_below(product, k, i, eps):
            m = i

    bottom = LeafSet(A.shape, current)
    v = project(bottom, m)[0]
    chosen = tuple(a for a in current if a[:m] == v)
    log_event(LOGGER, "regularization_completed", k=k, n=n, m=m, size=len(chosen))
    return RegularizationResult(
        leaves=LeafSet(A.shape, chosen),
        m=m,
        v=v,
        degrees=tuple(degrees[m:]),
        all_degrees=tuple(degrees),
        chain_sizes=tuple(sizes),
        epsilon=eps,
    )


def k_threshold_log2(epsilon: Rational) -> float:
    """
    log2 of K(ε), the larger root of ``K^(ε/4) = 2 log2 K``.

    In ``x = log2 K`` the root solves ``(ε/4) x = 1 + log2 x``; the left side
    overtakes the right only once past the minimum at ``x = 4 / (ε ln 2)``.
    """
    eps = float(as_epsilon(epsilon))

    def excess(x: float) -> float:
        return eps / 4 * x - 1 - math.log2(x)

    lo = 4 / (eps * math.log(2))
    hi = 2 * lo
    while excess(hi) <= 0:
        lo, hi = hi, 2 * hi
    return float(brentq(excess, lo, hi, xtol=THRESHOLD_TOLERANCE))


def _block(leaf: Prefix, k: int, s: int, blocks: int) -> Prefix:
    out = []
    for j in range(blocks):
        value = 0
        for digit in leaf[j * s : (j + 1) * s]:
            value = value * k + digit
        out.append(value)
    return tuple(out)


def _unblock(prefix: Prefix, k: int, s: int) -> Prefix:
    digits: list[int] = []
    for value in prefix:
        chunk = []
        for _ in range(s):
            value, digit = divmod(value, k)
            chunk.append(digit)
        digits.extend(reversed(chunk))
    return tuple(digits)


def block_regularize(A: LeafSet, epsilon: Rational) -> RegularizationResult:
    """Regularize on T_{k^s, ⌊n/s⌋} at ε/2 with ``k^s >= K(ε)`` and lift back to A."""
    eps = as_epsilon(epsilon)
    if not A.leaves:
        raise EmptyLeafSetError("empty leaf set")
    k, n = A.shape.k, A.shape.n
    threshold = k_threshold_log2(eps)
    s = max(1, math.ceil(threshold / math.log2(k) - THRESHOLD_TOLERANCE))
    blocks = n // s
    if blocks == 0:
        log_event(LOGGER, "block_regularization_degenerate", k=k, n=n, block_size=s)
        return RegularizationResult(
            leaves=A,
            m=0,
            v=(),
            degrees=(),
            all_degrees=(),
            chain_sizes=(len(A),),
            epsilon=eps,
            block_size=s,
            threshold_log2=threshold,
        )
    blocked = LeafSet.of(TreeShape(k**s, blocks), (_block(a, k, s, blocks) for a in A))
    inner = regularize(blocked, eps / 2)
    selected = set(inner.leaves.leaves)
    chosen = tuple(a for a in A.leaves if _block(a, k, s, blocks) in selected)
    return RegularizationResult(
        leaves=LeafSet(A.shape, chosen),
        m=s * inner.m,
        v=_unblock(inner.v, k, s),
        degrees=inner.degrees,
        all_degrees=inner.all_degrees,
        chain_sizes=inner.chain_sizes,
        epsilon=eps,
        block_size=s,
        threshold_log2=threshold,
    )


@dataclass
class RegularizationChecks:
    """Outcome of every bound; conditional bounds stay None unless hypotheses hold."""

    extends_v: bool
    degree_regular: bool
    growth: bool
    chain: bool
    product: bool
    hypotheses_hold: bool
    level_bound: Optional[bool] = None
    size_bound: Optional[bool] = None
    details: list[str] = field(default_factory=list)

    def violations(self) -> list[str]:
        names = ["extends_v", "degree_regular", "growth", "chain", "product"]
        failed = [name for name in names if not getattr(self, name)]
        failed += [
            name for name in ("level_bound", "size_bound") if getattr(self, name) is False
        ]
        return failed


def _degree_regular(B: LeafSet, levels: Iterable[int], degrees: Iterable[int], step: int) -> bool:
    for level, degree in zip(levels, degrees):
        groups: dict[Prefix, set[Prefix]] = {}
        for leaf in B.leaves:
            groups.setdefault(leaf[:level], set()).add(leaf[: level + step])
        if any(len(children) != degree for children in groups.values()):
            return False
    return True


def _hypotheses(A: LeafSet, eps: Fraction) -> bool:
    k, n = A.shape.k, A.shape.n
    large = len(A) ** eps.denominator >= k ** (n * eps.numerator)
    return large and k ** (float(eps) / 4) > 2 * math.log2(k)


def check_regularization(
    A: LeafSet, result: RegularizationResult, epsilon: Rational
) -> RegularizationChecks:
    eps = as_epsilon(epsilon)
    k, n, m = A.shape.k, A.shape.n, result.m
    B = result.leaves
    a, b = eps.numerator, eps.denominator

    growth = True
    size = 1
    for level in range(m + 1, n + 1):
        size *= result.all_degrees[level - 1]
        if len(project(B, level)) != size or size ** (2 * b) < k ** ((level - m) * a):
            growth = False
    chain = all(
        parents_bound_holds(result.chain_sizes[i], result.chain_sizes[i - 1], k)
        for i in range(1, n + 1)
    )
    checks = RegularizationChecks(
        extends_v=all(leaf[:m] == result.v for leaf in B.leaves),
        degree_regular=_degree_regular(B, range(m, n), result.degrees, 1),
        growth=growth,
        chain=chain,
        product=result.chain_sizes[0] == math.prod(result.all_degrees),
        hypotheses_hold=_hypotheses(A, eps),
    )
    if checks.hypotheses_hold:
        checks.level_bound = m <= n * (1 - eps / 4)
        checks.size_bound = len(B) ** (8 * b * b) >= k ** (n * a * a)
    return checks


def check_block_regularization(
    A: LeafSet, result: RegularizationResult, epsilon: Rational
) -> RegularizationChecks:
    """Structural checks on block levels plus the growth bound when its hypotheses hold."""
    eps = as_epsilon(epsilon)
    k, n, m, s = A.shape.k, A.shape.n, result.m, result.block_size
    B = result.leaves
    blocks = n // s
    log2_threshold = (
        result.threshold_log2
        if result.threshold_log2 is not None
        else k_threshold_log2(eps)
    )
    block_levels = range(m, s * blocks, s)
    checks = RegularizationChecks(
        extends_v=all(leaf[:m] == result.v for leaf in B.leaves),
        degree_regular=_degree_regular(B, block_levels, result.degrees, s),
        growth=True,
        chain=True,
        product=True,
        hypotheses_hold=False,
    )
    large = len(A) ** eps.denominator >= k ** (n * eps.numerator)
    exponent = max(64 / float(eps) ** 2, 2 / float(eps))
    checks.hypotheses_hold = large and n * math.log2(k) >= exponent * log2_threshold
    if checks.hypotheses_hold:
        for level in range(m, n + 1):
            lhs = math.log2(len(project(B, level)))
            rhs = -2 * log2_threshold + (level - m) * float(eps) / 4 * math.log2(k)
            if lhs < rhs - THRESHOLD_TOLERANCE:
                checks.growth = False
                checks.details.append(f"block growth fails at level {level}")
    return checks
