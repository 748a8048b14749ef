import itertools
import json
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

from superapprox.groupgen import enumerate_quotient, sl2_generators
from superapprox.modring import Modulus
from superapprox.padic import AnalyticMap, sumset_coverage
from superapprox.spectral import expander_survey
from superapprox.treereg import LeafSet, TreeShape, check_regularization, regularize

pytestmark = pytest.mark.slow


def test_quotient_enumeration_budget_seconds():
    budget_seconds = 10.0
    expected = {3: 24, 5: 120, 7: 336, 11: 1320, 13: 2184, 9: 648, 25: 15000}
    start = time.perf_counter()
    orders = {q: enumerate_quotient(sl2_generators(), Modulus.of(q)).order for q in expected}
    elapsed = time.perf_counter() - start
    assert orders == expected
    assert elapsed < budget_seconds, f"Enumeration exceeded budget: {elapsed:.3f}s"


def test_survey_budget_seconds():
    budget_seconds = 60.0
    fixture_path = Path(__file__).parents[1] / "tests" / "fixtures" / "sl2_gaps.json"
    fixture = json.loads(fixture_path.read_text(encoding="utf-8"))
    moduli = [Modulus.of(row["q"]) for row in fixture["rows"]]
    start = time.perf_counter()
    rows = expander_survey(sl2_generators(), moduli)
    elapsed = time.perf_counter() - start
    for row, expected in zip(rows, fixture["rows"]):
        assert row.order == expected["order"]
        assert abs(row.lam - expected["lambda"]) <= fixture["tolerance"], row.q
    assert elapsed < budget_seconds, f"Survey exceeded budget: {elapsed:.3f}s"


def test_regularization_budget_seconds():
    budget_seconds = 30.0
    rng = random.Random(2024)
    start = time.perf_counter()
    for _ in range(10_000):
        k = rng.randint(2, 64)
        n = rng.randint(1, 6)
        size = rng.randint(1, min(5000, k**n))
        leaves = {tuple(rng.randrange(k) for _ in range(n)) for _ in range(size)}
        A = LeafSet.of(TreeShape(k, n), leaves)
        eps = Fraction(rng.randint(1, 8), 8)
        assert check_regularization(A, regularize(A, eps), eps).violations() == []
    elapsed = time.perf_counter() - start
    assert elapsed < budget_seconds, f"Regularization exceeded budget: {elapsed:.3f}s"


def test_sumset_budget_seconds():
    budget_seconds = 120.0
    F = AnalyticMap.monomial_curve(3, [1, 2])
    start = time.perf_counter()
    exponents = {}
    for level, method in itertools.product((1, 2), ("fft", "sorted")):
        result = sumset_coverage(F, level, 2, 6, method=method)
        exponents[level, method] = (result.exponent, result.difference_digest)
    elapsed = time.perf_counter() - start
    for level in (1, 2):
        assert exponents[level, "fft"] == exponents[level, "sorted"]
        assert exponents[level, "fft"][0] is not None
    assert exponents[2, "fft"][0] - exponents[1, "fft"][0] <= 3
    assert elapsed < budget_seconds, f"Sumset coverage exceeded budget: {elapsed:.3f}s"
