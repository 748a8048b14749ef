"""
Truncated p-adic machinery for polynomial maps ``O^n0 -> O^d0`` over Z_p.

Scalars carry their working precision: a :class:`PadicScalar` is a residue mod
``p^M`` together with ``M``. Dividing by ``p^v`` lowers ``M`` by ``v``, and a
computation that drives ``M`` to zero raises :class:`PrecisionError`.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any, Optional, Union

import numpy as np
import sympy

from .errors import (
    ConstantInSpanError,
    EnumerationGuardError,
    HenselError,
    PrecisionError,
    ValidationError,
)
from .modring import valuation
from .observability import get_logger, log_event

LOGGER = get_logger(__name__)

MultiIndex = tuple[int, ...]
Matrix = Sequence[Sequence[int]]

DEFAULT_MARGIN = 4
MAX_AXIS = 3**7
MAX_SUMMANDS = 3
GRID_LIMIT = 2**24
ENUMERATION_LIMIT = 10**6
SORTED_CHUNK = 1 << 22


@dataclass(frozen=True)
class PadicScalar:
    """A residue mod ``p^precision``."""

    value: int
    precision: int
    p: int

    def __post_init__(self) -> None:
        if self.precision < 1:
            raise PrecisionError("insufficient truncation")
        if not 0 <= self.value < self.p**self.precision:
            raise ValidationError("scalar value must be reduced mod p^precision")

    @classmethod
    def of(cls, value: int, p: int, precision: int) -> PadicScalar:
        if precision < 1:
            raise PrecisionError("insufficient truncation")
        return cls(value % p**precision, precision, p)

    @property
    def modulus(self) -> int:
        return int(self.p**self.precision)

    def valuation(self) -> Optional[int]:
        """Exact valuation, or None when the value vanishes at this precision."""
        return None if self.value == 0 else valuation(self.value, self.p)

    def _coerce(self, other: Union[PadicScalar, int]) -> PadicScalar:
        if isinstance(other, PadicScalar):
            if other.p != self.p:
                raise ValidationError("scalars over different primes")
            return other
        return PadicScalar.of(other, self.p, self.precision)

    def __add__(self, other: Union[PadicScalar, int]) -> PadicScalar:
        rhs = self._coerce(other)
        return PadicScalar.of(self.value + rhs.value, self.p, min(self.precision, rhs.precision))

    def __sub__(self, other: Union[PadicScalar, int]) -> PadicScalar:
        rhs = self._coerce(other)
        return PadicScalar.of(self.value - rhs.value, self.p, min(self.precision, rhs.precision))

    def __mul__(self, other: Union[PadicScalar, int]) -> PadicScalar:
        rhs = self._coerce(other)
        return PadicScalar.of(self.value * rhs.value, self.p, min(self.precision, rhs.precision))

    def divide(self, other: PadicScalar) -> PadicScalar:
        """Exact quotient; precision drops by the divisor's valuation."""
        v = other.valuation()
        if v is None:
            raise PrecisionError("insufficient truncation: divisor vanishes at working precision")
        precision = min(self.precision, other.precision) - v
        if precision < 1:
            raise PrecisionError("insufficient truncation")
        pv = self.p**v
        if self.value % pv:
            raise ValidationError("quotient is not p-integral")
        modulus = self.p**precision
        unit = other.value // pv
        return PadicScalar.of(self.value // pv * pow(unit, -1, modulus), self.p, precision)


@dataclass(frozen=True)
class TruncatedPoint:
    p: int
    precision: int
    coordinates: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.precision < 1:
            raise PrecisionError("insufficient truncation")
        if any(not 0 <= x < self.p**self.precision for x in self.coordinates):
            raise ValidationError("coordinates must be reduced mod p^precision")

    @classmethod
    def of(cls, p: int, precision: int, coordinates: Iterable[int]) -> TruncatedPoint:
        modulus = p**precision
        return cls(p, precision, tuple(int(x) % modulus for x in coordinates))

    @property
    def modulus(self) -> int:
        return int(self.p**self.precision)


@dataclass(frozen=True)
class AnalyticMap:
    """``F(x) = Σ_i c_i x^i`` with integer coefficient rows ``c_i ∈ Z^d0``."""

    p: int
    n0: int
    d0: int
    terms: tuple[tuple[MultiIndex, tuple[int, ...]], ...]

    def __post_init__(self) -> None:
        if not sympy.isprime(self.p):
            raise ValidationError(f"{self.p} is not prime")
        if self.n0 < 1 or self.d0 < 1:
            raise ValidationError("map dimensions must be positive")
        for exps, coeffs in self.terms:
            if len(exps) != self.n0 or any(e < 0 for e in exps):
                raise ValidationError(f"multi-index {exps} does not match n0={self.n0}")
            if len(coeffs) != self.d0:
                raise ValidationError(f"coefficient row {coeffs} does not match d0={self.d0}")

    @classmethod
    def from_terms(
        cls,
        p: int,
        n0: int,
        d0: int,
        terms: Iterable[tuple[Sequence[int], Sequence[int]]],
    ) -> AnalyticMap:
        """Merge repeated multi-indices and drop zero rows."""
        merged: dict[MultiIndex, list[int]] = {}
        for exps, coeffs in terms:
            key = tuple(int(e) for e in exps)
            row = merged.setdefault(key, [0] * len(coeffs))
            if len(row) != len(coeffs):
                raise ValidationError("coefficient rows have inconsistent lengths")
            for j, c in enumerate(coeffs):
                row[j] += int(c)
        return cls(
            p,
            n0,
            d0,
            tuple((exps, tuple(row)) for exps, row in sorted(merged.items()) if any(row)),
        )

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> AnalyticMap:
        try:
            return cls.from_terms(
                int(payload["p"]),
                int(payload["n0"]),
                int(payload["d0"]),
                [(term["exps"], term["coeffs"]) for term in payload["terms"]],
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed analytic map payload: {exc}") from exc

    @classmethod
    def monomial_curve(cls, p: int, degrees: Sequence[int]) -> AnalyticMap:
        """``x -> (x^d_1, ..., x^d_r)``."""
        r = len(degrees)
        return cls.from_terms(
            p, 1, r, [((d,), [1 if j == i else 0 for j in range(r)]) for i, d in enumerate(degrees)]
        )

    def to_payload(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "n0": self.n0,
            "d0": self.d0,
            "terms": [{"exps": list(e), "coeffs": list(c)} for e, c in self.terms],
        }

    @property
    def degree(self) -> int:
        return max((sum(exps) for exps, _ in self.terms), default=0)

    def evaluate(self, x: Sequence[int]) -> tuple[int, ...]:
        """Exact integer value at an integer point."""
        if len(x) != self.n0:
            raise ValidationError(f"point must have {self.n0} coordinates")
        out = [0] * self.d0
        for exps, coeffs in self.terms:
            mono = math.prod(xi**e for xi, e in zip(x, exps))
            for j, c in enumerate(coeffs):
                out[j] += c * mono
        return tuple(out)

    def jacobian_at(self, x: Sequence[int]) -> tuple[tuple[int, ...], ...]:
        """Exact ``d0 x n0`` matrix ``[∂_k f_j(x)]``."""
        rows = [[0] * self.n0 for _ in range(self.d0)]
        for exps, coeffs in self.terms:
            for k, e in enumerate(exps):
                if e == 0:
                    continue
                lowered = list(exps)
                lowered[k] -= 1
                mono = e * math.prod(xi**ei for xi, ei in zip(x, lowered))
                for j, c in enumerate(coeffs):
                    rows[j][k] += c * mono
        return tuple(tuple(row) for row in rows)

    def constant_row(self) -> tuple[int, ...]:
        zero = (0,) * self.n0
        for exps, coeffs in self.terms:
            if exps == zero:
                return coeffs
        return (0,) * self.d0

    def coefficient_rows(self) -> list[tuple[int, ...]]:
        zero = (0,) * self.n0
        return [coeffs for exps, coeffs in self.terms if exps != zero]

    def component(self, j: int) -> dict[int, int]:
        """Univariate coefficients ``degree -> c`` of ``f_j``."""
        if self.n0 != 1:
            raise ValidationError("component extraction needs a univariate map")
        if not 0 <= j < self.d0:
            raise ValidationError(f"component {j} outside [0, {self.d0})")
        return {exps[0]: coeffs[j] for exps, coeffs in self.terms if coeffs[j]}


def jacobian(F: AnalyticMap, x: TruncatedPoint) -> tuple[tuple[int, ...], ...]:
    """``dF(x)`` reduced mod ``p^M``."""
    if x.p != F.p:
        raise ValidationError("point and map use different primes")
    modulus = x.modulus
    return tuple(tuple(v % modulus for v in row) for row in F.jacobian_at(x.coordinates))


def _evaluate_univariate(coefficients: Mapping[int, int], x: int) -> int:
    return sum(c * x**d for d, c in coefficients.items())


def _complete_homogeneous(points: Sequence[int], degree: int) -> list[int]:
    """``[h_0, ..., h_degree]`` of ``points``."""
    h = [1] + [0] * degree
    for x in points:
        for r in range(1, degree + 1):
            h[r] += x * h[r - 1]
    return h


def symmetric_divided_difference(
    F: AnalyticMap, j: int, points: Sequence[int], precision: int
) -> PadicScalar:
    """Continuous extension ``Φ̄^k f_j`` through ``Σ_d c_d h_{d-k}(points)``."""
    coefficients = F.component(j)
    k = len(points) - 1
    if k < 0:
        raise ValidationError("at least one point is required")
    top = max(coefficients, default=0)
    h = _complete_homogeneous(points, max(top - k, 0))
    value = sum(c * h[d - k] for d, c in coefficients.items() if d >= k)
    return PadicScalar.of(value, F.p, precision)


def divided_difference(
    F: AnalyticMap, j: int, points: Sequence[int], precision: int
) -> PadicScalar:
    """
    ``Φ^k f_j`` at ``k + 1`` points mod ``p^precision``.

    Distinct points go through the recursive quotient, losing the valuation of
    every denominator; coincident points use the symmetric extension.
    """
    if not points:
        raise ValidationError("at least one point is required")
    coefficients = F.component(j)
    modulus = F.p**precision
    reduced = tuple(int(x) % modulus for x in points)
    if len(set(reduced)) < len(reduced):
        return symmetric_divided_difference(F, j, reduced, precision)

    memo: dict[tuple[int, ...], PadicScalar] = {}

    def phi(xs: tuple[int, ...]) -> PadicScalar:
        if xs in memo:
            return memo[xs]
        if len(xs) == 1:
            result = PadicScalar.of(_evaluate_univariate(coefficients, xs[0]), F.p, precision)
        else:
            numerator = phi(xs[:1] + xs[2:]) - phi(xs[1:])
            result = numerator.divide(PadicScalar.of(xs[0] - xs[1], F.p, precision))
        memo[xs] = result
        return result

    return phi(reduced)


@dataclass(frozen=True)
class MinorNorm:
    """N(X) = |p^valuation|; valuation None means every minor vanishes mod p^precision."""

    valuation: Optional[int]
    columns: Optional[tuple[int, ...]]
    precision: int
    exact_zero: bool

    @property
    def is_zero(self) -> bool:
        return self.valuation is None

    def norm(self, p: int) -> float:
        return 0.0 if self.valuation is None else float(p) ** (-self.valuation)


def _det(rows: Matrix) -> int:
    return int(sympy.Matrix([list(r) for r in rows]).det(method="bareiss"))


def _shape(X: Matrix) -> tuple[int, int]:
    d = len(X)
    m = len(X[0]) if d else 0
    if d == 0 or any(len(row) != m for row in X):
        raise ValidationError("matrix must be nonempty and rectangular")
    if d > m:
        raise ValidationError(f"max-minor norm needs d <= m, got {d} x {m}")
    return d, m


def max_minor_norm(X: Matrix, p: int, precision: int) -> MinorNorm:
    """Minimal valuation over all ``d x d`` minors of a ``d x m`` matrix."""
    d, m = _shape(X)
    modulus = p**precision
    best: Optional[tuple[int, tuple[int, ...]]] = None
    exact_zero = True
    for cols in itertools.combinations(range(m), d):
        det = _det([[row[c] for c in cols] for row in X])
        if det:
            exact_zero = False
        residue = det % modulus
        if residue == 0:
            continue
        v = valuation(residue, p)
        if best is None or v < best[0]:
            best = (v, cols)
    if best is None:
        return MinorNorm(None, None, precision, exact_zero)
    return MinorNorm(best[0], best[1], precision, False)


def wedge_valuation(X: Matrix, p: int, precision: int) -> Optional[int]:
    """Valuation of ``w_1 ∧ ... ∧ w_d`` expanded in the basis ``e_I`` of the exterior power."""
    _shape(X)
    modulus = p**precision
    wedge: dict[tuple[int, ...], int] = {(): 1}
    for row in X:
        expanded: dict[tuple[int, ...], int] = {}
        for basis, coeff in wedge.items():
            for c, x in enumerate(row):
                if x == 0 or c in basis:
                    continue
                slot = bisect.bisect(basis, c)
                sign = -1 if (len(basis) - slot) % 2 else 1
                key = basis[:slot] + (c,) + basis[slot:]
                expanded[key] = expanded.get(key, 0) + sign * coeff * x
        wedge = expanded
    residues = [value % modulus for value in wedge.values()]
    nonzero = [valuation(r, p) for r in residues if r]
    return min(nonzero) if nonzero else None


def linear_lift(X: Matrix, y: Sequence[int], k0: int, p: int, precision: int) -> tuple[int, ...]:
    """
    Solve ``X x ≡ p^k0 y (mod p^precision)`` through the adjugate of the best minor.

    Requires ``N(X) >= |p^k0|``; the solution is supported on that minor's columns.
    """
    d, m = _shape(X)
    if len(y) != d:
        raise ValidationError(f"target must have {d} coordinates")
    norm = max_minor_norm(X, p, precision)
    if norm.valuation is None or norm.columns is None or norm.valuation > k0:
        raise HenselError(f"N(X) is smaller than |p^{k0}|: {norm.valuation}")
    modulus = p**precision
    sub = sympy.Matrix([[row[c] for c in norm.columns] for row in X])
    det = int(sub.det(method="bareiss"))
    v = valuation(det, p)
    unit_inverse = pow(det // p**v, -1, modulus)
    scale = p ** (k0 - v) * unit_inverse
    partial = sub.adjugate() * sympy.Matrix([int(t) for t in y])
    x = [0] * m
    for slot, c in enumerate(norm.columns):
        x[c] = int(partial[slot]) * scale % modulus
    return tuple(x)


@dataclass(frozen=True)
class HenselStep:
    scheduled: int
    observed: int


@dataclass(frozen=True)
class HenselResult:
    point: TruncatedPoint
    trace: tuple[HenselStep, ...]
    l: int
    k0: int

    def to_payload(self) -> dict[str, Any]:
        return {
            "p": self.point.p,
            "precision": self.point.precision,
            "point": list(self.point.coordinates),
            "l": self.l,
            "k0": self.k0,
            "trace": [asdict(step) for step in self.trace],
        }


def _residual_valuation(residual: Sequence[int], p: int, precision: int) -> int:
    modulus = p**precision
    values = [valuation(r % modulus, p) for r in residual if r % modulus]
    return min(values) if values else precision


def hensel_solve(
    F: AnalyticMap,
    x0: TruncatedPoint,
    y: Sequence[int],
    l: int,
    k0: int,
    margin: int = DEFAULT_MARGIN,
) -> HenselResult:
    """
    Find ``x ≡ x0 (mod p^l)`` with ``F(x) ≡ F(x0) + p^(l+k0) y (mod p^M)``.

    The first correction solves ``dF(x0) x' = p^k0 y``; later corrections bring
    the residual from ``p^(l_i)`` to ``p^(l_{i+1})`` with ``l_1 = 2l`` and
    ``l_{i+1} = 2(l_i - k0)``.
    """
    p, M = x0.p, x0.precision
    if F.p != p or len(x0.coordinates) != F.n0:
        raise ValidationError("point does not match the map")
    if len(y) != F.d0:
        raise ValidationError(f"target must have {F.d0} coordinates")
    if k0 < 0 or l < k0 + 1:
        raise HenselError(f"need l >= k0 + 1, got l={l}, k0={k0}")
    if M <= l + k0 + margin:
        raise PrecisionError(f"insufficient truncation: need precision > {l + k0 + margin}")
    modulus = p**M
    base = F.evaluate(x0.coordinates)
    target = [b + p ** (l + k0) * int(t) for b, t in zip(base, y)]

    correction = linear_lift(F.jacobian_at(x0.coordinates), y, k0, p, M)
    x = [(xi + p**l * di) % modulus for xi, di in zip(x0.coordinates, correction)]
    scheduled = 2 * l
    trace: list[HenselStep] = []
    while True:
        residual = [v - t for v, t in zip(F.evaluate(x), target)]
        observed = _residual_valuation(residual, p, M)
        trace.append(HenselStep(min(scheduled, M), observed))
        if observed < min(scheduled, M):
            raise HenselError(
                f"residual valuation {observed} fell behind the schedule {scheduled}"
            )
        if observed >= M:
            break
        step = scheduled
        lifted = [-r // p**step for r in residual]
        correction = linear_lift(F.jacobian_at(x), lifted, k0, p, M)
        x = [(xi + p ** (step - k0) * di) % modulus for xi, di in zip(x, correction)]
        scheduled = 2 * (step - k0)
        if scheduled <= step:
            raise HenselError("non-increasing residual; precision exhausted")
    log_event(LOGGER, "hensel_converged", steps=len(trace), precision=M, p=p)
    return HenselResult(TruncatedPoint.of(p, M, x), tuple(trace), l, k0)


@dataclass(frozen=True)
class OpenImageReport:
    covered: bool
    image_size: int
    target_size: int


def _ball(p: int, level: int, precision: int, dimension: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(0, p**precision, p**level), repeat=dimension)


def open_image_check(
    F: AnalyticMap, x0: TruncatedPoint, l: int, k0: int
) -> OpenImageReport:
    """Exhaustively test ``F(x0 + p^l O) ⊇ F(x0) + p^(l+k0) O^d0`` mod ``p^M``."""
    p, M = x0.p, x0.precision
    if p ** ((M - l) * F.n0) > ENUMERATION_LIMIT:
        raise EnumerationGuardError("ball enumeration exceeds the guard")
    modulus = p**M
    image = {
        tuple(v % modulus for v in F.evaluate([a + b for a, b in zip(x0.coordinates, z)]))
        for z in _ball(p, l, M, F.n0)
    }
    base = F.evaluate(x0.coordinates)
    shift = l + k0
    if shift >= M:
        return OpenImageReport(tuple(v % modulus for v in base) in image, len(image), 1)
    targets = [
        tuple((b + w) % modulus for b, w in zip(base, offset))
        for offset in _ball(p, shift, M, F.d0)
    ]
    return OpenImageReport(all(t in image for t in targets), len(image), len(targets))


def curve_reduce(F: AnalyticMap, x0: Union[TruncatedPoint, Sequence[int]], s: int) -> AnalyticMap:
    """``f ∘ r`` for ``r(t) = x0 + p (t, t^s, t^(s^2), ...)``."""
    if s < 2:
        raise ValidationError(f"curve exponent s must be at least 2, got {s}")
    base = x0.coordinates if isinstance(x0, TruncatedPoint) else tuple(int(v) for v in x0)
    if len(base) != F.n0:
        raise ValidationError(f"base point must have {F.n0} coordinates")
    p = F.p
    terms: list[tuple[tuple[int], list[int]]] = []
    for exps, coeffs in F.terms:
        poly: dict[int, int] = {0: 1}
        for k, e in enumerate(exps):
            step = s**k
            factor = {step * j: math.comb(e, j) * base[k] ** (e - j) * p**j for j in range(e + 1)}
            product: dict[int, int] = {}
            for d1, c1 in poly.items():
                for d2, c2 in factor.items():
                    product[d1 + d2] = product.get(d1 + d2, 0) + c1 * c2
            poly = product
        for degree, c in poly.items():
            if c:
                terms.append(((degree,), [c * coeff for coeff in coeffs]))
    return AnalyticMap.from_terms(p, 1, F.d0, terms)


def curve_coefficient_matrix(f: AnalyticMap) -> tuple[tuple[int, ...], ...]:
    """``d0 x r`` matrix of the nonconstant coefficients of a univariate map."""
    if f.n0 != 1:
        raise ValidationError("curve coefficient matrix needs a univariate map")
    rows = f.coefficient_rows()
    return tuple(tuple(row[j] for row in rows) for j in range(f.d0))


@dataclass(frozen=True)
class NondegeneracyReport:
    minor_valuation: Optional[int]
    separation: int


def nondegeneracy_gap(F: AnalyticMap, points: Sequence[int], precision: int = 64) -> NondegeneracyReport:
    """Valuation of ``N([f_i'(x_j)])`` next to ``Σ_{i<j} v(x_i - x_j)``."""
    if F.n0 != 1:
        raise ValidationError("nondegeneracy needs a univariate map")
    if len(set(points)) != len(points):
        raise ValidationError("points must be distinct")
    columns = [F.jacobian_at([x]) for x in points]
    matrix = [[column[i][0] for column in columns] for i in range(F.d0)]
    norm = max_minor_norm(matrix, F.p, precision)
    separation = sum(valuation(a - b, F.p) for a, b in itertools.combinations(points, 2))
    return NondegeneracyReport(norm.valuation, separation)


def _fraction_valuation(x: Fraction, p: int) -> int:
    return valuation(x.numerator, p) - valuation(x.denominator, p)


def saturated_basis(rows: Sequence[Sequence[int]], p: int) -> list[list[Fraction]]:
    """
    A Z_p-basis of ``span(rows) ∩ Z_p^d``.

    Each step pivots on an entry of minimal valuation; the returned rows have
    p-integral entries and an identity block on their pivot columns.
    """
    work = [[Fraction(x) for x in row] for row in rows if any(row)]
    if not work:
        return []
    free = set(range(len(work[0])))
    basis: list[tuple[int, list[Fraction]]] = []
    while work:
        best: Optional[tuple[int, int, int]] = None
        for r, row in enumerate(work):
            for c in sorted(free):
                if row[c]:
                    v = _fraction_valuation(row[c], p)
                    if best is None or v < best[0]:
                        best = (v, r, c)
        if best is None:
            break
        _, r, c = best
        pivot_row = [x / work[r][c] for x in work.pop(r)]
        work = [[x - row[c] * y for x, y in zip(row, pivot_row)] for row in work]
        work = [row for row in work if any(row)]
        basis = [(pc, [x - b[c] * y for x, y in zip(b, pivot_row)]) for pc, b in basis]
        basis.append((c, pivot_row))
        free.discard(c)
    return [row for _, row in sorted(basis)]


@dataclass(frozen=True)
class CoverageResult:
    exponent: Optional[int]
    precision: int
    level: int
    summands: int
    lattice_rank: int
    image_size: int
    difference_size: int
    method: str
    difference_digest: str

    @property
    def covered(self) -> bool:
        return self.exponent is not None

    def to_payload(self) -> dict[str, Any]:
        return {**asdict(self), "covered": self.covered}


def _constant_in_span(F: AnalyticMap) -> bool:
    rows = F.coefficient_rows()
    constant = F.constant_row()
    if not any(constant):
        return False
    if not rows:
        return True
    return sympy.Matrix(rows + [constant]).rank() > sympy.Matrix(rows).rank()


def _encode(coords: np.ndarray, axis: int) -> np.ndarray:
    weights = axis ** np.arange(coords.shape[1], dtype=np.int64)
    return (coords.astype(np.int64) * weights).sum(axis=1)


def _decode(codes: np.ndarray, axis: int, dimension: int) -> np.ndarray:
    out = np.empty((codes.shape[0], dimension), dtype=np.int64)
    rest = codes.copy()
    for j in range(dimension):
        out[:, j] = rest % axis
        rest //= axis
    return out


def _image_points(F: AnalyticMap, level: int, axis: int) -> np.ndarray:
    """``F(p^level O^n0) mod axis`` as an ``(N, d0)`` integer array (with repeats)."""
    grid = np.arange(0, axis, F.p**level, dtype=np.int64)
    variables = np.meshgrid(*([grid] * F.n0), indexing="ij")
    xs = [v.reshape(-1) for v in variables]
    out = np.zeros((xs[0].shape[0], F.d0), dtype=np.int64)
    for exps, coeffs in F.terms:
        mono = np.ones_like(xs[0])
        for x, e in zip(xs, exps):
            for _ in range(e):
                mono = mono * x % axis
        for j, c in enumerate(coeffs):
            out[:, j] = (out[:, j] + (c % axis) * mono) % axis
    return out


def _difference_set_fft(points: np.ndarray, summands: int, axis: int, d0: int) -> np.ndarray:
    shape = (axis,) * d0
    plus = np.zeros(shape)
    plus[tuple(points.T)] = 1.0
    minus = np.zeros(shape)
    minus[tuple((-points % axis).T)] = 1.0
    plus_hat, minus_hat = np.fft.fftn(plus), np.fft.fftn(minus)
    current = plus
    for step in range(2 * summands - 1):
        kernel = plus_hat if step < summands - 1 else minus_hat
        current = (np.fft.ifftn(np.fft.fftn(current) * kernel).real > 0.5).astype(np.float64)
    coords = np.argwhere(current > 0.5)
    return np.sort(_encode(coords, axis))


def _sumset_sorted(left: np.ndarray, right: np.ndarray, axis: int, d0: int) -> np.ndarray:
    a = _decode(left, axis, d0)
    b = _decode(right, axis, d0)
    chunk = max(1, SORTED_CHUNK // max(1, a.shape[0]))
    result = np.zeros(0, dtype=np.int64)
    for start in range(0, b.shape[0], chunk):
        block = (a[:, None, :] + b[None, start : start + chunk, :]) % axis
        result = np.union1d(result, _encode(block.reshape(-1, d0), axis))
    return result


def _difference_set_sorted(points: np.ndarray, summands: int, axis: int, d0: int) -> np.ndarray:
    plus = np.unique(_encode(points, axis))
    minus = np.unique(_encode(-points % axis, axis))
    current = plus
    for step in range(2 * summands - 1):
        current = _sumset_sorted(current, plus if step < summands - 1 else minus, axis, d0)
    return current


def _lattice_points(basis: list[list[int]], exponent: int, p: int, axis: int, d0: int) -> np.ndarray:
    points = np.zeros((1, d0), dtype=np.int64)
    coefficients = np.arange(0, axis, p**exponent, dtype=np.int64)
    for vector in basis:
        steps = coefficients[:, None] * np.asarray(vector, dtype=np.int64)[None, :] % axis
        points = ((points[:, None, :] + steps[None, :, :]) % axis).reshape(-1, d0)
    return points


def sumset_coverage(
    F: AnalyticMap, l: int, C: int, precision: int, method: str = "fft"
) -> CoverageResult:
    """
    Least e such that ``span(F) ∩ p^e O^d0`` lies in ``Σ_C F(p^l O) - Σ_C F(p^l O)`` mod ``p^M``.

    ``method`` selects the difference-set path: ``"fft"`` convolves indicator
    arrays on ``(Z/p^M)^d0``; ``"sorted"`` merges encoded sums with sorted unions.
    """
    p, M = F.p, precision
    axis = p**M
    if method not in ("fft", "sorted"):
        raise ValidationError(f"unknown sumset method '{method}'")
    if not 1 <= C <= MAX_SUMMANDS:
        raise EnumerationGuardError(f"C must lie in [1, {MAX_SUMMANDS}], got {C}")
    if axis > MAX_AXIS or axis**F.d0 > GRID_LIMIT:
        raise EnumerationGuardError(f"p^M = {axis} exceeds the enumeration guard")
    if not 0 <= l < M:
        raise ValidationError(f"level l={l} must lie in [0, {M})")
    if p ** ((M - l) * F.n0) > ENUMERATION_LIMIT:
        raise EnumerationGuardError("domain enumeration exceeds the guard")
    if _constant_in_span(F):
        raise ConstantInSpanError("constant in span")

    points = np.unique(_image_points(F, l, axis), axis=0)
    if method == "fft":
        differences = _difference_set_fft(points, C, axis, F.d0)
    else:
        differences = _difference_set_sorted(points, C, axis, F.d0)

    basis = [
        [x.numerator * pow(x.denominator, -1, axis) % axis for x in row]
        for row in saturated_basis(F.coefficient_rows(), p)
    ]
    exponent: Optional[int] = None
    for e in range(M):
        if p ** ((M - e) * len(basis)) > GRID_LIMIT:
            continue
        codes = _encode(_lattice_points(basis, e, p, axis, F.d0), axis)
        slots = np.searchsorted(differences, codes)
        slots = np.minimum(slots, differences.shape[0] - 1)
        if differences.shape[0] and np.all(differences[slots] == codes):
            exponent = e
            break
    return CoverageResult(
        exponent=exponent,
        precision=M,
        level=l,
        summands=C,
        lattice_rank=len(basis),
        image_size=int(points.shape[0]),
        difference_size=int(differences.shape[0]),
        method=method,
        difference_digest=hashlib.sha256(differences.astype("<i8").tobytes()).hexdigest(),
    )


def minimal_summands(
    F: AnalyticMap, l: int, precision: int, method: str = "fft"
) -> Optional[CoverageResult]:
    """First C in ``[1, MAX_SUMMANDS]`` whose difference set covers a lattice, or None."""
    for C in range(1, MAX_SUMMANDS + 1):
        result = sumset_coverage(F, l, C, precision, method=method)
        if result.covered:
            return result
    return None
