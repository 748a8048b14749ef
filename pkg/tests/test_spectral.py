import json
import math
from pathlib import Path

import numpy as np
import pytest

from superapprox.errors import ModulusError, SpectralError
from superapprox.groupgen import (
    GeneratorSet,
    close_subgroup,
    derived_subgroup,
    enumerate_quotient,
    sl2_generators,
    unipotent_generators,
    unitriangular_generators,
)
from superapprox.modring import Modulus, RationalMatrix, ResidueMatrix
from superapprox.spectral import (
    SpectralMethod,
    SurveyRow,
    WalkSpec,
    equidistribution_check,
    expander_survey,
    spectral_gap,
    transition_matrix,
    translation_orbit_size,
    walk_distribution,
)


SL2_GAPS = json.loads(
    (Path(__file__).parent / "fixtures" / "sl2_gaps.json").read_text(encoding="utf-8")
)


def _cyclic(q):
    return enumerate_quotient(unipotent_generators(), Modulus.of(q))


def _brute_orbit_size(G, values):
    """Distinct right translates, one per group element."""
    translates = set()
    for g in range(G.order):
        moved = values[[G.multiply(x, g) for x in range(G.order)]]
        translates.add(moved.tobytes())
    return len(translates)


class TestTransitionOperator:
    def test_rows_are_stochastic(self):
        """Test: Every row of T sums to one."""
        T = transition_matrix(_cyclic(7), sparse=False)
        assert np.allclose(T.sum(axis=1), 1.0)
        assert np.allclose(T, T.T)

    def test_non_symmetric_generators_rejected(self):
        """Test: A single non-involutive generator gives a non-symmetric operator."""
        q = Modulus.of(5)
        G = close_subgroup([ResidueMatrix.from_rows([[1, 1], [0, 1]], q)], q)
        with pytest.raises(SpectralError, match="not symmetric"):
            transition_matrix(G)

    def test_walk_spec_validation(self):
        """Test: Negative walk lengths are refused."""
        with pytest.raises(SpectralError):
            WalkSpec(2, -1)


class TestWalkDistribution:
    def test_two_steps_on_cycle(self):
        """Test: Two ±1 steps on Z/5 land on 0, 2, 3 with mass 1/2, 1/4, 1/4."""
        G = _cyclic(5)
        dist = walk_distribution(G, 2)
        by_residue = {x[1]: dist[i] for i, x in enumerate(G.elements)}
        assert by_residue[0] == pytest.approx(0.5)
        assert by_residue[2] == pytest.approx(0.25)
        assert by_residue[3] == pytest.approx(0.25)
        assert by_residue[1] == by_residue[4] == 0.0

    def test_length_zero_is_identity(self):
        """Test: The empty walk sits on the identity."""
        dist = walk_distribution(_cyclic(5), 0)
        assert dist[0] == 1.0
        assert dist.sum() == 1.0

    @pytest.mark.parametrize("q", [3, 5])
    @pytest.mark.parametrize("length", [1, 5, 20])
    def test_matches_matrix_power(self, q, length):
        """Test: The walk law is the identity row of T^l within 1e-10."""
        G = enumerate_quotient(sl2_generators(), Modulus.of(q))
        assert G.order <= 200
        T = transition_matrix(G, sparse=False)
        expected = np.linalg.matrix_power(T, length)[0]
        assert np.max(np.abs(walk_distribution(G, length) - expected)) <= 1e-10


class TestSpectralGap:
    def test_five_cycle(self):
        """Test: λ of the 5-cycle is cos(π/5)."""
        assert spectral_gap(_cyclic(5)).lam == pytest.approx(0.8090170, abs=1e-7)

    def test_cyclic_four_with_three_generators(self):
        """Test: Z/4 with {1, 2, 3} has λ = 1/3."""
        q = Modulus.of(4)
        gens = [ResidueMatrix.from_rows([[1, a], [0, 1]], q) for a in (1, 2, 3)]
        G = close_subgroup(gens, q)
        assert spectral_gap(G).lam == pytest.approx(1 / 3, abs=1e-9)

    def test_trivial_group(self):
        """Test: The trivial quotient has λ = 0."""
        assert spectral_gap(_cyclic(1)).lam == 0.0

    @pytest.mark.parametrize("p", [5, 31, 101])
    def test_cycles_follow_cosine(self, p):
        """Test: λ(Z/p, ±1) = cos(π/p) within 1e-9."""
        assert abs(spectral_gap(_cyclic(p)).lam - math.cos(math.pi / p)) < 1e-9

    def test_cycle_gap_closes(self):
        """Test: λ(Z/p, ±1) increases with p, so no uniform gap exists."""
        lams = [spectral_gap(_cyclic(p)).lam for p in (5, 31, 101)]
        assert lams == sorted(lams)
        assert lams[-1] > 0.999

    @pytest.mark.parametrize(
        "omega,q",
        [
            (sl2_generators(), 5),
            (sl2_generators(), 7),
            (sl2_generators(), 11),
            (sl2_generators(), 13),
            (unitriangular_generators(3), 9),
        ],
    )
    def test_power_iteration_agrees_with_dense(self, omega, q):
        """Test: Both eigen-solvers agree within 1e-7 on quotients of 100 to 4000 elements."""
        G = enumerate_quotient(omega, Modulus.of(q))
        assert 100 <= G.order <= 4000
        dense = spectral_gap(G, method=SpectralMethod.DENSE)
        power = spectral_gap(G, method=SpectralMethod.POWER_ITERATION)
        assert power.converged
        assert abs(power.lam - dense.lam) <= 1e-7

    @pytest.mark.parametrize("method", list(SpectralMethod))
    @pytest.mark.parametrize("q", [4, 6, 8])
    def test_even_cycles_are_bipartite(self, q, method):
        """Test: Z/q with ±1 and q even has eigenvalue -1, so λ = 1 within 1e-9."""
        assert spectral_gap(_cyclic(q), method=method).lam == pytest.approx(1.0, abs=1e-9)

    def test_dense_limit_switches_method(self):
        """Test: Quotients above the dense limit use power iteration."""
        G = enumerate_quotient(sl2_generators(), Modulus.of(5))
        assert spectral_gap(G, dense_limit=50).method is SpectralMethod.POWER_ITERATION
        assert spectral_gap(G).method is SpectralMethod.DENSE

    @pytest.mark.parametrize(
        "row",
        [
            row if row["order"] <= 4000 else pytest.param(row, marks=pytest.mark.slow)
            for row in SL2_GAPS["rows"]
        ],
        ids=lambda row: f"q{row['q']}",
    )
    def test_sl2_gaps_match_fixture(self, row):
        """Test: λ(SL2 mod p) reproduces the frozen value within the fixture tolerance."""
        G = enumerate_quotient(sl2_generators(), Modulus.of(row["q"]))
        assert G.order == row["order"]
        assert abs(spectral_gap(G).lam - row["lambda"]) <= SL2_GAPS["tolerance"]

    def test_sl2_gap_stays_away_from_one(self):
        """Test: The frozen SL2 gaps stay below 0.97 while the cycle family passes 0.999."""
        lams = [row["lambda"] for row in SL2_GAPS["rows"]]
        assert max(lams) < 0.97
        assert spectral_gap(_cyclic(101)).lam > 0.999


class TestSurvey:
    def test_rows_follow_input_order(self):
        """Test: One row per modulus, in the given order."""
        moduli = [Modulus.of(q) for q in (7, 3, 5)]
        rows = expander_survey(unipotent_generators(), moduli)
        assert [row.q for row in rows] == [7, 3, 5]
        assert [row.order for row in rows] == [7, 3, 5]
        assert all(row.method == "dense" for row in rows)

    def test_empty_moduli(self):
        """Test: No moduli means no rows."""
        assert expander_survey(sl2_generators(), []) == []

    def test_oversized_quotient_becomes_failed_row(self):
        """Test: A quotient past max_order is reported, not raised."""
        rows = expander_survey(sl2_generators(), [Modulus.of(3), Modulus.of(7)], max_order=100)
        assert not rows[0].failed
        assert rows[1].failed
        assert rows[1].method == "failed"
        assert rows[1].lam is None

    def test_modulus_sharing_q0(self):
        """Test: Moduli sharing a prime with q0 are refused before any work."""
        half = RationalMatrix.from_rows([[2, 1], [0, 2]], exponent=1, q0=2)
        omega = GeneratorSet.symmetric([half])
        with pytest.raises(ModulusError, match="not coprime to q0"):
            expander_survey(omega, [Modulus.of(3), Modulus.of(4)])

    def test_integral_generators_with_q0(self):
        """Test: Generators with no remaining denominator accept moduli sharing q0."""
        omega = GeneratorSet.symmetric([RationalMatrix.from_rows([[1, 1], [0, 1]], q0=2)])
        rows = expander_survey(omega, [Modulus.of(4)])
        assert rows[0].order == 4

    def test_record_round_trip(self):
        """Test: Survey rows survive their cache record form."""
        row = expander_survey(unipotent_generators(), [Modulus.of(5)])[0]
        record = row.as_record()
        assert "lambda" in record
        assert SurveyRow.from_record(record) == row


class TestEquidistribution:
    def setup_method(self):
        self.G = enumerate_quotient(sl2_generators(), Modulus.of(5))
        self.lam = spectral_gap(self.G).lam

    @pytest.mark.parametrize("q", [3, 5, 7])
    def test_random_functions_satisfy_bound(self, q):
        """Test: 100 random functions obey the walk bound for lengths 1..20."""
        G = enumerate_quotient(sl2_generators(), Modulus.of(q))
        lam = spectral_gap(G).lam
        rng = np.random.default_rng(q)
        for _ in range(100):
            f = rng.standard_normal(G.order)
            orbit = translation_orbit_size(G, f)
            for length in range(1, 21):
                report = equidistribution_check(G, f, length, lam, orbit)
                assert report.passed, (length, report)

    def test_point_indicator_on_five_cycle(self):
        """Test: The indicator of 0 on Z/5 after three steps gives 1/5 against (5 + 2√5)/20."""
        G = _cyclic(5)
        f = np.zeros(G.order)
        f[0] = 1.0
        report = equidistribution_check(G, f, 3, math.cos(math.pi / 5))
        assert report.orbit_size == 5
        assert report.lhs == pytest.approx(0.2, abs=1e-12)
        assert report.rhs == pytest.approx((5 + 2 * math.sqrt(5)) / 20, abs=1e-12)
        assert report.passed

    def test_constant_function_is_invariant(self):
        """Test: A constant has orbit size one and zero deviation."""
        f = np.full(self.G.order, 3.0)
        report = equidistribution_check(self.G, f, 4, self.lam)
        assert report.orbit_size == 1
        assert report.lhs == pytest.approx(0.0)

    def test_shape_mismatch(self):
        """Test: Functions must be defined on every element."""
        with pytest.raises(SpectralError):
            equidistribution_check(self.G, [1.0, 2.0], 1, self.lam)


class TestTranslationOrbit:
    def test_subgroup_indicator(self):
        """Test: The indicator of [G, G] in SL2 mod 3 has one translate per coset."""
        G = enumerate_quotient(sl2_generators(), Modulus.of(3))
        f = np.zeros(G.order)
        f[list(derived_subgroup(G))] = 1.0
        assert translation_orbit_size(G, f) == 3
        assert _brute_orbit_size(G, f) == 3

    def test_generic_function_has_regular_orbit(self):
        """Test: Distinct values leave only the identity in the stabilizer."""
        G = enumerate_quotient(sl2_generators(), Modulus.of(5))
        f = np.arange(G.order, dtype=float)
        assert translation_orbit_size(G, f) == G.order

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_all_translates(self, seed):
        """Test: Two-valued functions on Z/6 and SL2 mod 3 agree with the brute-force count."""
        rng = np.random.default_rng(seed)
        for G in (_cyclic(6), enumerate_quotient(sl2_generators(), Modulus.of(3))):
            f = rng.integers(0, 2, G.order).astype(float)
            assert translation_orbit_size(G, f) == _brute_orbit_size(G, f)

    def test_periodic_function_on_cycle(self):
        """Test: A parity function on Z/6 has two translates."""
        G = _cyclic(6)
        f = np.array([float(x[1] % 2) for x in G.elements])
        assert translation_orbit_size(G, f) == 2
