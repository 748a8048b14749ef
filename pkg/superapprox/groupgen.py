"""
Finite congruence quotients of finitely generated matrix groups.

A :class:`Quotient` is built by breadth-first closure from the identity under
right multiplication by the reduced generators. Each BFS layer is sorted
lexicographically before positions are assigned, so element indices depend
only on the generator list and the modulus.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import networkx as nx
import numpy as np

from .errors import (
    ConfigurationError,
    LevelError,
    NotInKernelError,
    QuotientTooLargeError,
    ValidationError,
)
from .modring import (
    Flat,
    Modulus,
    RationalMatrix,
    ResidueMatrix,
    mat_identity,
    mat_inv,
    mat_mul,
    rank_mod_p,
    reduce_matrix,
)
from .observability import get_logger, timed_event

LOGGER = get_logger(__name__)

DEFAULT_MAX_ORDER = 2_000_000
MAX_ORDER_ENV = "SUPERAPPROX_MAX_ORDER"


def default_max_order() -> int:
    """Quotient size guard, overridable through ``SUPERAPPROX_MAX_ORDER``."""
    raw = os.getenv(MAX_ORDER_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_MAX_ORDER
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{MAX_ORDER_ENV} must be an integer, got '{raw}'") from exc
    if value < 1:
        raise ConfigurationError(f"{MAX_ORDER_ENV} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class GeneratorSet:
    """A symmetric generator multiset Ω of GL_n0(Z[1/q0])."""

    generators: tuple[RationalMatrix, ...]
    symmetric_closure: bool = False

    def __post_init__(self) -> None:
        if not self.generators:
            raise ValidationError("generator set must be nonempty")
        first = self.generators[0]
        for matrix in self.generators:
            if matrix.size != first.size or matrix.q0 != first.q0:
                raise ValidationError("generators must share dimension and q0")

    @classmethod
    def symmetric(cls, matrices: Sequence[RationalMatrix]) -> GeneratorSet:
        """Adjoin inverses until every matrix and its inverse have equal multiplicity."""
        if not matrices:
            raise ValidationError("generator set must be nonempty")
        counts = Counter(matrices)
        result = list(matrices)
        added = False
        for matrix in dict.fromkeys(matrices):
            inverse = matrix.inverse()
            if inverse == matrix:
                continue
            missing = counts[matrix] - counts[inverse]
            if missing > 0:
                result.extend([inverse] * missing)
                counts[inverse] += missing
                added = True
        return cls(tuple(result), symmetric_closure=added)

    @property
    def dimension(self) -> int:
        return self.generators[0].size

    @property
    def q0(self) -> int:
        return self.generators[0].q0

    @property
    def denominator(self) -> int:
        """Least common denominator of the generators, a power of ``q0``."""
        return math.lcm(*(m.denominator for m in self.generators))

    def __len__(self) -> int:
        return len(self.generators)

    def is_symmetric(self) -> bool:
        counts = Counter(self.generators)
        return all(counts[m] == counts[m.inverse()] for m in counts)

    def reduce(self, q: Modulus) -> tuple[ResidueMatrix, ...]:
        return tuple(reduce_matrix(m, q) for m in self.generators)

    def to_payload(self) -> dict[str, object]:
        """The JSON document form read by :func:`contracts.load_generator_set`."""
        return {
            "q0": self.q0,
            "dimension": self.dimension,
            "denominator_exponents": [m.exponent for m in self.generators],
            "matrices": [[list(row) for row in m.numerators] for m in self.generators],
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def elementary_matrix(n0: int, row: int, col: int, value: int = 1) -> RationalMatrix:
    return RationalMatrix.from_rows(
        [
            [(1 if i == j else 0) + (value if (i, j) == (row, col) else 0) for j in range(n0)]
            for i in range(n0)
        ]
    )


def sl2_generators() -> GeneratorSet:
    """±[[1,1],[0,1]] and ±[[1,0],[1,1]] (exponents ±1)."""
    return GeneratorSet.symmetric([elementary_matrix(2, 0, 1), elementary_matrix(2, 1, 0)])


def unipotent_generators() -> GeneratorSet:
    """±[[1,1],[0,1]]; its quotients are the cyclic groups Z/q."""
    return GeneratorSet.symmetric([elementary_matrix(2, 0, 1)])


def unitriangular_generators(n0: int) -> GeneratorSet:
    """Superdiagonal elementary matrices and their inverses."""
    if n0 < 2:
        raise ValidationError("unitriangular groups need dimension at least 2")
    return GeneratorSet.symmetric([elementary_matrix(n0, i, i + 1) for i in range(n0 - 1)])


PRESETS = {
    "sl2": sl2_generators,
    "unipotent": unipotent_generators,
    "unitriangular2": lambda: unitriangular_generators(2),
    "unitriangular3": lambda: unitriangular_generators(3),
    "heisenberg": lambda: unitriangular_generators(3),
}


@dataclass(frozen=True, eq=False)
class Quotient:
    """A finite matrix group mod q with right-multiplication action tables."""

    modulus: Modulus
    dimension: int
    elements: tuple[Flat, ...]
    index: Mapping[Flat, int]
    generators: tuple[Flat, ...]
    gen_action: tuple[np.ndarray, ...]
    inverse_positions: np.ndarray

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def generator_count(self) -> int:
        return len(self.generators)

    @property
    def generator_positions(self) -> tuple[int, ...]:
        return tuple(int(action[0]) for action in self.gen_action)

    def element(self, position: int) -> ResidueMatrix:
        return ResidueMatrix(self.dimension, self.elements[position], self.modulus)

    def position(self, matrix: Union[ResidueMatrix, Flat]) -> int:
        entries = matrix.entries if isinstance(matrix, ResidueMatrix) else tuple(matrix)
        try:
            return self.index[entries]
        except KeyError as exc:
            raise ValidationError(f"matrix {entries} is not an element of the quotient") from exc

    def multiply(self, i: int, j: int) -> int:
        return self.index[
            mat_mul(self.elements[i], self.elements[j], self.dimension, self.modulus.value)
        ]

    def inverse(self, i: int) -> int:
        return int(self.inverse_positions[i])

    def power(self, i: int, exponent: int) -> int:
        result = 0
        base = i
        while exponent:
            if exponent & 1:
                result = self.multiply(result, base)
            exponent >>= 1
            if exponent:
                base = self.multiply(base, base)
        return result

    def commutator(self, i: int, j: int) -> int:
        """``[x, y] = x^-1 y^-1 x y``."""
        left = self.multiply(self.inverse(i), self.inverse(j))
        return self.multiply(self.multiply(left, i), j)


def close_subgroup(
    generators: Sequence[ResidueMatrix],
    modulus: Modulus,
    max_order: Optional[int] = None,
) -> Quotient:
    """Enumerate the subgroup of GL_n(Z/qZ) generated by residue matrices."""
    limit = default_max_order() if max_order is None else max_order
    if not generators:
        raise ValidationError("at least one generator is required")
    n = generators[0].size
    q = modulus.value
    for g in generators:
        if g.size != n or g.modulus != modulus:
            raise ValidationError("generators must share size and modulus")
        if not g.is_invertible():
            raise ValidationError(f"generator {g.entries} is not invertible mod {q}")

    gens = [g.entries for g in generators]
    gen_inverses = [mat_inv(g, n, q) for g in gens]
    identity = mat_identity(n, q)

    elements: list[Flat] = [identity]
    index: dict[Flat, int] = {identity: 0}
    parent: list[tuple[int, int]] = [(-1, -1)]
    action: list[list[int]] = [[] for _ in gens]
    frontier = [0]

    with timed_event(
        LOGGER, "quotient_enumerated", modulus=str(modulus), generators=len(gens)
    ) as fields:
        while frontier:
            discovered: dict[Flat, tuple[int, int]] = {}
            pending: list[tuple[int, Flat]] = []
            for i in frontier:
                x = elements[i]
                for s, g in enumerate(gens):
                    y = mat_mul(x, g, n, q)
                    pending.append((s, y))
                    if y not in index and y not in discovered:
                        discovered[y] = (i, s)
            if len(elements) + len(discovered) > limit:
                raise QuotientTooLargeError(len(elements) + len(discovered), limit)
            start = len(elements)
            for y in sorted(discovered):
                index[y] = len(elements)
                elements.append(y)
                parent.append(discovered[y])
            for s, y in pending:
                action[s].append(index[y])
            frontier = list(range(start, len(elements)))
        fields["order"] = len(elements)

    inverses = np.zeros(len(elements), dtype=np.int64)
    for i in range(1, len(elements)):
        before, s = parent[i]
        # x_i = x_before * g_s, so x_i^-1 = g_s^-1 * x_before^-1
        inverses[i] = index[mat_mul(gen_inverses[s], elements[inverses[before]], n, q)]

    return Quotient(
        modulus=modulus,
        dimension=n,
        elements=tuple(elements),
        index=index,
        generators=tuple(gens),
        gen_action=tuple(np.asarray(table, dtype=np.int64) for table in action),
        inverse_positions=inverses,
    )


def enumerate_quotient(
    omega: GeneratorSet, q: Modulus, max_order: Optional[int] = None
) -> Quotient:
    """π_q(Γ) for Γ = ⟨Ω⟩."""
    return close_subgroup(omega.reduce(q), q, max_order)


def cayley_graph(G: Quotient) -> nx.MultiDiGraph:
    """
    Cayley multigraph with one arc ``x -> x*s`` per vertex and generator.

    Every vertex has in- and out-degree ``|Ω|``. Since Ω is symmetric the
    non-loop arcs pair up into undirected edges; a generator that is trivial
    mod q leaves one self-loop per vertex.
    """
    graph = nx.MultiDiGraph(modulus=str(G.modulus))
    graph.add_nodes_from(range(G.order))
    for s, table in enumerate(G.gen_action):
        graph.add_edges_from(
            (i, int(j), s, {"generator": s}) for i, j in enumerate(table)
        )
    return graph


def undirected_edge_count(graph: nx.MultiDiGraph) -> int:
    """Edges of the underlying multigraph, each self-loop counted once."""
    loops = nx.number_of_selfloops(graph)
    return loops + (graph.number_of_edges() - loops) // 2


def edge_list_lines(G: Quotient) -> list[str]:
    """Edge-list export, one ``"u v gen_index"`` line per arc."""
    return [
        f"{i} {int(table[i])} {s}"
        for i in range(G.order)
        for s, table in enumerate(G.gen_action)
    ]


@dataclass(frozen=True)
class KernelFilter:
    """Positions of ``G[p^m]``, the elements congruent to the identity mod ``p^m``."""

    quotient: Quotient
    level: int
    member_positions: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.member_positions)


def congruence_filter(G: Quotient, m: int) -> KernelFilter:
    p, n = G.modulus.prime_power()
    if m < 0 or m > n:
        raise LevelError(f"level exceeds modulus: m={m}, modulus {G.modulus}")
    pm = p**m
    identity = mat_identity(G.dimension, G.modulus.value)
    members = tuple(
        i
        for i, x in enumerate(G.elements)
        if all((a - b) % pm == 0 for a, b in zip(x, identity))
    )
    return KernelFilter(G, m, members)


def finite_log(g: ResidueMatrix, a: int) -> ResidueMatrix:
    """``(g - I) / p^a mod p`` for ``g ≡ I mod p^a``."""
    p, n = g.modulus.prime_power()
    if a < 1 or n < a + 1:
        raise LevelError(f"finite log at level {a} needs modulus p^{a + 1}, got {g.modulus}")
    top = p ** (a + 1)
    pa = p**a
    identity = mat_identity(g.size, top)
    shifted = [(x - e) % top for x, e in zip(g.entries, identity)]
    if any(x % pa for x in shifted):
        raise NotInKernelError(f"not in congruence kernel of level {a}")
    return ResidueMatrix(g.size, tuple(x // pa % p for x in shifted), Modulus.of(p))


def subgroup_closure(G: Quotient, seeds: Iterable[int]) -> frozenset[int]:
    """Positions of the subgroup generated by ``seeds``."""
    generators = sorted(set(seeds))
    members = {0}
    frontier = [0]
    while frontier:
        found = []
        for x in frontier:
            for s in generators:
                y = G.multiply(x, s)
                if y not in members:
                    members.add(y)
                    found.append(y)
        frontier = found
    return frozenset(members)


def derived_subgroup(G: Quotient) -> frozenset[int]:
    """Normal closure of the commutators of the generators."""
    gens = sorted(set(G.generator_positions))
    seeds = {G.commutator(a, b) for a in gens for b in gens}
    members = subgroup_closure(G, seeds)
    while True:
        conjugates = {
            G.multiply(G.multiply(G.inverse(g), c), g) for c in seeds for g in gens
        }
        extra = conjugates - members
        if not extra:
            return members
        seeds |= extra
        members = subgroup_closure(G, seeds)


def abelianization_order(G: Quotient) -> int:
    return G.order // len(derived_subgroup(G))


def conjugacy_classes(G: Quotient) -> list[frozenset[int]]:
    gens = sorted(set(G.generator_positions))
    seen: set[int] = set()
    classes = []
    for x in range(G.order):
        if x in seen:
            continue
        members = {x}
        frontier = [x]
        while frontier:
            found = []
            for y in frontier:
                for g in gens:
                    z = G.multiply(G.multiply(G.inverse(g), y), g)
                    if z not in members:
                        members.add(z)
                        found.append(z)
            frontier = found
        seen |= members
        classes.append(frozenset(members))
    return classes


def commutator_set(G: Quotient) -> frozenset[int]:
    """All commutators ``[x, y] = x^-1 (y^-1 x y)``, enumerated class by class."""
    result: set[int] = set()
    for cls in conjugacy_classes(G):
        for x in cls:
            inverse = G.inverse(x)
            result.update(G.multiply(inverse, y) for y in cls)
    return frozenset(result)


def _is_upper_unitriangular(entries: Flat, n: int) -> bool:
    return all(
        entries[i * n + j] == (1 if i == j else 0)
        for i in range(n)
        for j in range(i + 1)
    )


def unipotent_power_images(G: Quotient, m: int) -> tuple[frozenset[int], frozenset[int]]:
    """The ``p^m``-th powers of the unitriangular quotient and its level-m kernel."""
    p, n = G.modulus.prime_power()
    if m < 0 or m >= n:
        raise LevelError(f"level {m} must be below the modulus exponent {n}")
    d = G.dimension
    expected = p ** (n * d * (d - 1) // 2)
    if G.order != expected or not all(_is_upper_unitriangular(x, d) for x in G.elements):
        raise ValidationError("quotient is not the full upper-unitriangular group")
    exponent = p**m
    powers = frozenset(G.power(i, exponent) for i in range(G.order))
    kernel = frozenset(congruence_filter(G, m).member_positions)
    return powers, kernel


def non_torsion_subgroup_order(G: Quotient, p: int) -> int:
    """Order of the subgroup generated by the elements with ``g^p != 1``."""
    seeds = [i for i in range(G.order) if G.power(i, p) != 0]
    return len(subgroup_closure(G, seeds))


def product_decomposition_index(
    omega: GeneratorSet, q: Modulus, max_order: Optional[int] = None
) -> Fraction:
    """``∏_i |π_{p_i^{n_i}}(Γ)| / |π_q(Γ)|``; equals 1 exactly when π_q(Γ) is the full product."""
    whole = enumerate_quotient(omega, q, max_order).order
    parts = math.prod(
        enumerate_quotient(omega, Modulus(((p, e),)), max_order).order
        for p, e in q.factors
    )
    return Fraction(parts, whole)


def sl_kernel_order(n0: int, p: int, n: int, level: int) -> int:
    """``|SL_n0(Z/p^n)[p^level]|`` for ``1 <= level <= n``."""
    return p ** ((n0 * n0 - 1) * (n - level))


def sl2_congruence_kernel(p: int, n: int, level: int = 1) -> list[ResidueMatrix]:
    """Every element of SL2(Z/p^n) congruent to the identity mod ``p^level``."""
    if not 1 <= level <= n:
        raise LevelError(f"level {level} outside [1, {n}]")
    modulus = Modulus(((p, n),))
    q = modulus.value
    step = p**level
    kernel = []
    for a in range(1, q, step):
        a_inv = pow(a, -1, q)
        for b in range(0, q, step):
            for c in range(0, q, step):
                d = (1 + b * c) * a_inv % q
                kernel.append(ResidueMatrix(2, (a, b, c, d), modulus))
    return kernel


@dataclass(frozen=True)
class FrattiniReport:
    log_rank: int
    spans: bool
    closure_order: int
    kernel_order: int

    @property
    def generates(self) -> bool:
        return self.closure_order == self.kernel_order


def frattini_check(
    subset: Sequence[ResidueMatrix], level: int = 1, max_order: Optional[int] = None
) -> FrattiniReport:
    """
    Compare the finite-log rank of ``subset`` with what its closure generates.

    ``subset`` lives in ``SL_n0(Z/p^n)[p^level]``; it spans when its logs span
    the trace-zero matrices mod p, in which case the closure must be the whole
    truncated kernel.
    """
    if not subset:
        raise ValidationError("subset must be nonempty")
    modulus = subset[0].modulus
    p, n = modulus.prime_power()
    n0 = subset[0].size
    lifted = Modulus(((p, level + 1),))
    logs = [finite_log(g.reduce(lifted), level).entries for g in subset]
    rank = rank_mod_p(logs, p)
    closure = close_subgroup(subset, modulus, max_order)
    return FrattiniReport(
        log_rank=rank,
        spans=rank == n0 * n0 - 1,
        closure_order=closure.order,
        kernel_order=sl_kernel_order(n0, p, n, level),
    )
