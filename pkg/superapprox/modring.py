"""
Exact arithmetic over Z, Z[1/q0] and Z/qZ.

Residues are always stored canonically in ``[0, q)`` so that group elements can
be hashed and deduplicated by plain tuple equality. Matrices inside quotients
are carried as flat row-major tuples; :class:`ResidueMatrix` is the validated
public wrapper around the same representation.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import sympy
from sympy.ntheory.modular import crt
from sympy.polys.domains import GF
from sympy.polys.matrices import DomainMatrix

from .errors import ModulusError, ValidationError, ZeroValuationError

TRIAL_DIVISION_LIMIT = 10**6

Flat = tuple[int, ...]


def valuation(x: int, p: int) -> int:
    """Return the largest ``v`` with ``p**v`` dividing ``x``."""
    if x == 0:
        raise ZeroValuationError("valuation of zero")
    if p < 2:
        raise ValidationError(f"valuation base must be a prime, got {p}")
    x = abs(x)
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def _factor(value: int) -> dict[int, int]:
    if value < 1:
        raise ModulusError(f"modulus must be a positive integer, got {value}")
    factors = sympy.factorint(value, limit=TRIAL_DIVISION_LIMIT)
    for prime in factors:
        if not sympy.isprime(prime):
            raise ModulusError(
                f"cannot factor {value}: cofactor {prime} has no prime factor "
                f"below {TRIAL_DIVISION_LIMIT}"
            )
    return {int(p): int(n) for p, n in factors.items()}


@dataclass(frozen=True)
class Modulus:
    """A modulus ``q`` stored by its factorization ``((p_1, n_1), ...)``."""

    factors: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        previous = 1
        for prime, exponent in self.factors:
            if prime <= previous:
                raise ModulusError("modulus primes must be strictly increasing")
            if not sympy.isprime(prime):
                raise ModulusError(f"{prime} is not prime")
            if exponent < 1:
                raise ModulusError(f"exponent of {prime} must be positive")
            previous = prime

    @cached_property
    def value(self) -> int:
        return math.prod(p**n for p, n in self.factors)

    @classmethod
    def of(cls, value: int) -> Modulus:
        """Factor a plain integer modulus."""
        return cls(tuple(sorted(_factor(value).items())))

    @classmethod
    def parse(cls, text: str) -> Modulus:
        """Parse ``"p1^n1*p2^n2"`` or a plain integer such as ``"45"``."""
        text = text.strip().replace("**", "^")
        if not text:
            raise ModulusError("empty modulus")
        exponents: dict[int, int] = {}
        for part in text.split("*"):
            base, _, power = part.strip().partition("^")
            try:
                base_value = int(base)
                power_value = int(power) if power else 1
            except ValueError as exc:
                raise ModulusError(f"cannot parse modulus component '{part}'") from exc
            if power_value < 1:
                raise ModulusError(f"exponent must be positive in '{part}'")
            for prime, exponent in _factor(base_value).items():
                exponents[prime] = exponents.get(prime, 0) + exponent * power_value
        return cls(tuple(sorted(exponents.items())))

    @property
    def components(self) -> tuple[int, ...]:
        """The prime-power components ``p_i**n_i``."""
        return tuple(p**n for p, n in self.factors)

    def prime_power(self) -> tuple[int, int]:
        """Return ``(p, n)`` for a prime-power modulus."""
        if len(self.factors) != 1:
            raise ModulusError(f"modulus {self} is not a prime power")
        return self.factors[0]

    def is_coprime_to(self, q0: int) -> bool:
        return math.gcd(self.value, q0) == 1

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        return "*".join(f"{p}^{n}" if n > 1 else str(p) for p, n in self.factors)


def crt_split(x: int, q: Modulus) -> tuple[int, ...]:
    """Split a residue mod ``q`` into its residues mod each ``p_i**n_i``."""
    if not 0 <= x < q.value:
        raise ValidationError(f"residue {x} is not in [0, {q.value})")
    return tuple(x % component for component in q.components)


def crt_combine(residues: Sequence[int], q: Modulus) -> int:
    """Inverse of :func:`crt_split`."""
    components = q.components
    if len(residues) != len(components):
        raise ValidationError(
            f"expected {len(components)} residues for modulus {q}, got {len(residues)}"
        )
    if not components:
        return 0
    combined = crt(list(components), [int(r) for r in residues])
    if combined is None:
        raise ValidationError(f"residues {tuple(residues)} are inconsistent mod {q}")
    return int(combined[0]) % q.value


def mat_mul(a: Flat, b: Flat, n: int, q: int) -> Flat:
    """Multiply two flat ``n x n`` matrices mod ``q``."""
    if n == 2:
        a0, a1, a2, a3 = a
        b0, b1, b2, b3 = b
        return (
            (a0 * b0 + a1 * b2) % q,
            (a0 * b1 + a1 * b3) % q,
            (a2 * b0 + a3 * b2) % q,
            (a2 * b1 + a3 * b3) % q,
        )
    return tuple(
        sum(a[i * n + t] * b[t * n + j] for t in range(n)) % q
        for i in range(n)
        for j in range(n)
    )


def mat_identity(n: int, q: int) -> Flat:
    return tuple((1 if i == j else 0) % q for i in range(n) for j in range(n))


def mat_det(a: Flat, n: int, q: int) -> int:
    return int(sympy.Matrix(n, n, list(a)).det(method="bareiss")) % q


def mat_inv(a: Flat, n: int, q: int) -> Flat:
    """Inverse of a flat matrix mod ``q``; raises when the determinant is not a unit."""
    if q == 1:
        return (0,) * (n * n)
    try:
        inverse = sympy.Matrix(n, n, list(a)).inv_mod(q)
    except ValueError as exc:
        raise ValidationError(f"matrix is not invertible mod {q}") from exc
    return tuple(int(x) % q for x in inverse)


def rank_mod_p(rows: Sequence[Sequence[int]], p: int) -> int:
    """Rank of an integer matrix over the prime field F_p."""
    materialized = [list(row) for row in rows]
    if not materialized or not materialized[0]:
        return 0
    field = GF(p)
    matrix = DomainMatrix(
        [[field(int(x) % p) for x in row] for row in materialized],
        (len(materialized), len(materialized[0])),
        field,
    )
    return int(matrix.rank())


@dataclass(frozen=True)
class RationalMatrix:
    """An ``n0 x n0`` matrix ``numerators / q0**exponent`` over Z[1/q0]."""

    numerators: tuple[tuple[int, ...], ...]
    exponent: int = 0
    q0: int = 1

    def __post_init__(self) -> None:
        size = len(self.numerators)
        if size == 0 or any(len(row) != size for row in self.numerators):
            raise ValidationError("matrix numerators must form a nonempty square")
        if self.exponent < 0:
            raise ValidationError("denominator exponent must be nonnegative")
        if self.q0 < 1:
            raise ValidationError("q0 must be a positive integer")

    @classmethod
    def from_rows(
        cls, rows: Iterable[Iterable[int]], exponent: int = 0, q0: int = 1
    ) -> RationalMatrix:
        numerators = tuple(tuple(int(x) for x in row) for row in rows)
        return cls(numerators, exponent, q0).normalized()

    @property
    def size(self) -> int:
        return len(self.numerators)

    @property
    def denominator(self) -> int:
        return int(self.q0**self.exponent)

    def normalized(self) -> RationalMatrix:
        """Cancel common factors of ``q0`` between numerators and denominator."""
        if self.q0 == 1:
            return RationalMatrix(self.numerators, 0, 1) if self.exponent else self
        numerators = self.numerators
        exponent = self.exponent
        while exponent > 0 and all(x % self.q0 == 0 for row in numerators for x in row):
            numerators = tuple(tuple(x // self.q0 for x in row) for row in numerators)
            exponent -= 1
        return RationalMatrix(numerators, exponent, self.q0)

    def to_sympy(self) -> sympy.Matrix:
        return sympy.Matrix(self.numerators) / self.denominator

    @classmethod
    def from_sympy(cls, matrix: sympy.Matrix, q0: int = 1) -> RationalMatrix:
        """Convert a rational sympy matrix, requiring denominators dividing a power of ``q0``."""
        entries = [sympy.Rational(x) for x in matrix]
        common = math.lcm(*(int(x.q) for x in entries)) if entries else 1
        residual = common
        while residual > 1:
            shared = math.gcd(residual, q0)
            if shared == 1:
                raise ValidationError(
                    f"denominator {common} is not a divisor of a power of q0={q0}"
                )
            residual //= shared
        exponent = 0
        while q0**exponent % common:
            exponent += 1
        scale = q0**exponent
        size = matrix.rows
        numerators = tuple(
            tuple(int(entries[i * size + j] * scale) for j in range(size))
            for i in range(size)
        )
        return cls(numerators, exponent, q0).normalized()

    def __matmul__(self, other: RationalMatrix) -> RationalMatrix:
        if self.q0 != other.q0 or self.size != other.size:
            raise ValidationError("cannot multiply matrices over different rings")
        n = self.size
        numerators = tuple(
            tuple(
                sum(self.numerators[i][t] * other.numerators[t][j] for t in range(n))
                for j in range(n)
            )
            for i in range(n)
        )
        return RationalMatrix(numerators, self.exponent + other.exponent, self.q0).normalized()

    def determinant(self) -> Fraction:
        det = sympy.Matrix(self.numerators).det(method="bareiss")
        return Fraction(int(det), self.denominator**self.size)

    def inverse(self) -> RationalMatrix:
        """Exact inverse, which must again lie in GL_n(Z[1/q0])."""
        if self.determinant() == 0:
            raise ValidationError("matrix is singular over Q")
        return RationalMatrix.from_sympy(self.to_sympy().inv(), self.q0)


@dataclass(frozen=True)
class ResidueMatrix:
    """An ``n0 x n0`` matrix with entries canonically reduced to ``[0, q)``."""

    size: int
    entries: Flat
    modulus: Modulus

    def __post_init__(self) -> None:
        q = self.modulus.value
        if len(self.entries) != self.size * self.size:
            raise ValidationError("entry count does not match matrix size")
        if any(not 0 <= x < q for x in self.entries):
            raise ValidationError(f"entries must be reduced to [0, {q})")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int]], modulus: Modulus) -> ResidueMatrix:
        materialized = [list(row) for row in rows]
        q = modulus.value
        entries = tuple(int(x) % q for row in materialized for x in row)
        return cls(len(materialized), entries, modulus)

    @classmethod
    def identity(cls, size: int, modulus: Modulus) -> ResidueMatrix:
        return cls(size, mat_identity(size, modulus.value), modulus)

    def rows(self) -> tuple[tuple[int, ...], ...]:
        n = self.size
        return tuple(self.entries[i * n : (i + 1) * n] for i in range(n))

    def __matmul__(self, other: ResidueMatrix) -> ResidueMatrix:
        if self.modulus != other.modulus or self.size != other.size:
            raise ValidationError("cannot multiply residues over different rings")
        return ResidueMatrix(
            self.size,
            mat_mul(self.entries, other.entries, self.size, self.modulus.value),
            self.modulus,
        )

    def determinant(self) -> int:
        return mat_det(self.entries, self.size, self.modulus.value)

    def is_invertible(self) -> bool:
        return math.gcd(self.determinant(), self.modulus.value) == 1

    def inverse(self) -> ResidueMatrix:
        return ResidueMatrix(
            self.size, mat_inv(self.entries, self.size, self.modulus.value), self.modulus
        )

    def is_identity(self) -> bool:
        return self.entries == mat_identity(self.size, self.modulus.value)

    def reduce(self, modulus: Modulus) -> ResidueMatrix:
        """Reduce to a modulus dividing the current one."""
        if self.modulus.value % modulus.value:
            raise ModulusError(f"{modulus} does not divide {self.modulus}")
        return ResidueMatrix.from_rows(self.rows(), modulus)


def reduce_matrix(matrix: RationalMatrix, q: Modulus) -> ResidueMatrix:
    """Entry-wise image of ``matrix`` in ``M_n(Z/qZ)``."""
    qv = q.value
    if math.gcd(matrix.denominator, qv) != 1:
        raise ModulusError("modulus not coprime to q0")
    inverse = pow(matrix.denominator, -1, qv)
    entries = tuple(x * inverse % qv for row in matrix.numerators for x in row)
    return ResidueMatrix(matrix.size, entries, q)
