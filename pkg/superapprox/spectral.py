"""
Random walks on quotients and the spectral gap of the averaging operator.

``T f(x) = (1/k) Σ_s f(x s)`` is symmetric in the element basis because Ω is a
symmetric multiset. λ is the largest |eigenvalue| of T on mean-zero functions.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from functools import partial
from typing import Any, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ModulusError, QuotientTooLargeError, SpectralError
from .groupgen import GeneratorSet, Quotient, default_max_order, enumerate_quotient
from .modring import Modulus
from .observability import get_logger, log_event, timed_event

LOGGER = get_logger(__name__)

DENSE_LIMIT = 4000
DEFAULT_SEED = 0xC0FFEE
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
EQUIDISTRIBUTION_SLACK = 1e-9


class SpectralMethod(str, Enum):
    DENSE = "dense"
    POWER_ITERATION = "power-iteration"


@dataclass(frozen=True)
class WalkSpec:
    """Uniform measure on a generator multiset of size k, walked for l steps."""

    generator_count: int
    length: int

    def __post_init__(self) -> None:
        if self.generator_count < 1:
            raise SpectralError("a walk needs at least one generator")
        if self.length < 0:
            raise SpectralError("walk length must be nonnegative")

    @property
    def weight(self) -> float:
        return 1.0 / self.generator_count

    @classmethod
    def for_quotient(cls, G: Quotient, length: int) -> WalkSpec:
        return cls(G.generator_count, length)


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    method: SpectralMethod
    iterations: int
    residual: float
    converged: bool = True


def transition_counts(G: Quotient) -> scipy.sparse.csr_matrix:
    """Integer matrix ``C[x, y] = #{s : x s = y}``."""
    n = G.order
    rows = np.tile(np.arange(n, dtype=np.int64), G.generator_count)
    cols = np.concatenate(G.gen_action) if G.gen_action else np.zeros(0, dtype=np.int64)
    data = np.ones(rows.shape[0], dtype=np.int64)
    return scipy.sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def transition_matrix(
    G: Quotient, sparse: bool = True
) -> Union[scipy.sparse.csr_matrix, np.ndarray]:
    counts = transition_counts(G)
    _assert_symmetric(counts)
    T = counts.astype(np.float64) / G.generator_count
    return T if sparse else T.toarray()


def _assert_symmetric(counts: scipy.sparse.csr_matrix) -> None:
    if (counts != counts.T).nnz:
        raise SpectralError("walk operator is not symmetric; generator set is not symmetric")


def walk_distribution(G: Quotient, length: int) -> np.ndarray:
    """Law of the product of ``length`` uniform generators, as a vector over positions."""
    spec = WalkSpec.for_quotient(G, length)
    dist = np.zeros(G.order)
    dist[0] = 1.0
    for _ in range(spec.length):
        step = np.zeros(G.order)
        for table in G.gen_action:
            step[table] += dist
        dist = step * spec.weight
    return dist


def _dense_gap(G: Quotient) -> SpectralResult:
    T = transition_matrix(G, sparse=False)
    eigenvalues = scipy.linalg.eigvalsh(T)
    principal = int(np.sum(eigenvalues > 1.0 - 1e-9))
    if principal != 1:
        raise SpectralError(
            f"eigenvalue 1 has multiplicity {principal}; the Cayley graph is disconnected"
        )
    lam = float(np.max(np.abs(eigenvalues[:-1])))
    return SpectralResult(min(lam, 1.0), SpectralMethod.DENSE, 0, 0.0)


def _power_gap(G: Quotient, tol: float, max_iter: int, seed: int) -> SpectralResult:
    T = transition_matrix(G, sparse=True)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(G.order)
    x -= x.mean()
    x /= np.linalg.norm(x)
    rayleigh = 0.0
    residual = math.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        # iterate on T^2 so that eigenvalues near -1 are not missed
        y = T @ (T @ x)
        y -= y.mean()
        rayleigh = float(x @ y)
        residual = float(np.linalg.norm(y - rayleigh * x))
        if residual < tol:
            converged = True
            break
        norm = np.linalg.norm(y)
        if norm == 0.0:
            rayleigh, residual, converged = 0.0, 0.0, True
            break
        x = y / norm
    if rayleigh < -tol:
        raise SpectralError(f"negative Rayleigh quotient {rayleigh} for T^2")
    lam = min(math.sqrt(max(rayleigh, 0.0)), 1.0)
    return SpectralResult(lam, SpectralMethod.POWER_ITERATION, iterations, residual, converged)


def spectral_gap(
    G: Quotient,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
    dense_limit: int = DENSE_LIMIT,
    method: Optional[SpectralMethod] = None,
) -> SpectralResult:
    """λ(μ; G) by dense eigensolve up to ``dense_limit`` elements, power iteration above."""
    if G.order == 1:
        result = SpectralResult(0.0, SpectralMethod.DENSE, 0, 0.0)
    else:
        chosen = method or (
            SpectralMethod.DENSE if G.order <= dense_limit else SpectralMethod.POWER_ITERATION
        )
        if chosen is SpectralMethod.DENSE:
            result = _dense_gap(G)
        else:
            result = _power_gap(G, tol, max_iter, seed)
    log_event(
        LOGGER,
        "spectral_gap_computed",
        order=G.order,
        method=result.method.value,
        lam=result.lam,
        iterations=result.iterations,
        residual=result.residual,
        converged=result.converged,
    )
    return result


@dataclass(frozen=True)
class SurveyRow:
    """One survey line; failed rows keep ``error`` and leave the numbers empty."""

    q: int
    order: Optional[int]
    lam: Optional[float]
    method: str
    iterations: Optional[int]
    seconds: float
    residual: Optional[float] = None
    converged: Optional[bool] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def as_record(self) -> dict[str, Any]:
        record = asdict(self)
        record["lambda"] = record.pop("lam")
        return record

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> SurveyRow:
        fields = dict(record)
        fields["lam"] = fields.pop("lambda")
        return cls(**fields)


def survey_row(
    omega: GeneratorSet,
    q: Modulus,
    max_order: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
) -> SurveyRow:
    with timed_event(LOGGER, "survey_row_completed", q=q.value) as fields:
        try:
            G = enumerate_quotient(omega, q, max_order)
        except QuotientTooLargeError as exc:
            fields["error"] = str(exc)
            failure: Optional[str] = str(exc)
        else:
            failure = None
            result = spectral_gap(G, tol=tol, max_iter=max_iter, seed=seed)
            fields["order"] = G.order
    if failure is not None:
        return SurveyRow(q.value, None, None, "failed", None, fields["seconds"], error=failure)
    return SurveyRow(
        q=q.value,
        order=G.order,
        lam=result.lam,
        method=result.method.value,
        iterations=result.iterations,
        seconds=fields["seconds"],
        residual=result.residual,
        converged=result.converged,
    )


def expander_survey(
    omega: GeneratorSet,
    moduli: Sequence[Modulus],
    max_order: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
    jobs: int = 1,
) -> list[SurveyRow]:
    """One row per modulus, in input order; rows run in a process pool when ``jobs > 1``."""
    for q in moduli:
        if not q.is_coprime_to(omega.denominator):
            raise ModulusError(f"modulus not coprime to q0: {q} vs q0={omega.q0}")
    limit = default_max_order() if max_order is None else max_order
    row = partial(survey_row, omega, max_order=limit, tol=tol, max_iter=max_iter, seed=seed)
    if jobs > 1 and len(moduli) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(row, moduli))
    return [row(q) for q in moduli]


@dataclass(frozen=True)
class EquidistributionReport:
    lhs: float
    rhs: float
    orbit_size: int
    passed: bool


def _spanning_tree(G: Quotient) -> tuple[np.ndarray, np.ndarray]:
    """BFS parents with ``elements[g] = elements[parent[g]] * generators[via[g]]``."""
    parent = np.full(G.order, -1, dtype=np.int64)
    via = np.full(G.order, -1, dtype=np.int64)
    visited = np.zeros(G.order, dtype=bool)
    visited[0] = True
    queue = deque([0])
    while queue:
        g = queue.popleft()
        for s, table in enumerate(G.gen_action):
            h = int(table[g])
            if not visited[h]:
                visited[h] = True
                parent[h] = g
                via[h] = s
                queue.append(h)
    return parent, via


def _right_translation(G: Quotient, parent: np.ndarray, via: np.ndarray, g: int) -> np.ndarray:
    """The permutation ``x ↦ x g`` of positions, composed along the tree path to ``g``."""
    word: list[int] = []
    while g != 0:
        word.append(int(via[g]))
        g = int(parent[g])
    perm = np.arange(G.order)
    for s in reversed(word):
        perm = G.gen_action[s][perm]
    return perm


def translation_orbit_size(G: Quotient, f: np.ndarray) -> int:
    """
    Size of the orbit of ``f`` under right translations ``f ↦ f(· g)``.

    Counted as ``|G| / |Stab(f)|``; only positions where ``f`` equals ``f(e)``
    can stabilize.
    """
    values = np.asarray(f, dtype=np.float64)
    if values.shape != (G.order,):
        raise SpectralError(f"function must have {G.order} values, got shape {values.shape}")
    candidates = np.flatnonzero(values == values[0])
    if candidates.size == G.order:
        return 1
    parent, via = _spanning_tree(G)
    stabilizer = sum(
        1
        for g in candidates
        if np.array_equal(values[_right_translation(G, parent, via, int(g))], values)
    )
    return G.order // stabilizer


def equidistribution_check(
    G: Quotient,
    f: Sequence[float],
    length: int,
    lam: float,
    orbit_size: Optional[int] = None,
) -> EquidistributionReport:
    """
    Compare ``|E_walk f - mean f|`` with ``‖f - mean f‖₂ √|orbit| λ^l``.

    The L² norm is taken against the uniform probability measure on G.
    """
    values = np.asarray(f, dtype=np.float64)
    if values.shape != (G.order,):
        raise SpectralError(f"function must have {G.order} values, got shape {values.shape}")
    mean = float(values.mean())
    lhs = abs(float(walk_distribution(G, length) @ values) - mean)
    centered = values - mean
    norm = math.sqrt(float(np.mean(centered * centered)))
    orbit = translation_orbit_size(G, values) if orbit_size is None else orbit_size
    rhs = norm * math.sqrt(orbit) * lam**length
    return EquidistributionReport(lhs, rhs, orbit, lhs <= rhs + EQUIDISTRIBUTION_SLACK)
