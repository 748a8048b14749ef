import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superapprox.errors import EmptyLeafSetError, ValidationError
from superapprox.treereg import (
    LeafSet,
    TreeShape,
    block_regularize,
    check_block_regularization,
    check_regularization,
    k_threshold_log2,
    parents_bound_holds,
    parents_regularize,
    project,
    regularize,
)


def _full(k, n):
    return LeafSet.of(TreeShape(k, n), itertools.product(range(k), repeat=n))


def _random_leaf_set(rng, k, n, size):
    leaves = {tuple(rng.randrange(k) for _ in range(n)) for _ in range(size)}
    return LeafSet.of(TreeShape(k, n), leaves)


class TestLeafSet:
    def test_leaves_are_sorted_and_deduplicated(self):
        """Test: LeafSet.of normalizes its input."""
        A = LeafSet.of(TreeShape(2, 2), [(1, 0), (0, 1), (1, 0)])
        assert A.leaves == ((0, 1), (1, 0))

    def test_digit_out_of_range(self):
        """Test: Digits must lie in [0, k)."""
        with pytest.raises(ValidationError):
            LeafSet.of(TreeShape(2, 2), [(0, 2)])

    def test_shape_validation(self):
        """Test: Trees need k >= 2 and n >= 1."""
        with pytest.raises(ValidationError):
            TreeShape(1, 3)
        with pytest.raises(ValidationError):
            TreeShape(2, 0)

    def test_text_round_trip(self):
        """Test: The text form restores the same leaf set."""
        A = LeafSet.of(TreeShape(3, 2), [(0, 1), (2, 2)])
        text = A.to_text()
        assert text.splitlines()[0] == "k=3 n=2"
        assert LeafSet.from_text(text) == A

    def test_text_without_header(self):
        """Test: A missing header is a validation error."""
        with pytest.raises(ValidationError, match="header"):
            LeafSet.from_text("0,1\n1,0\n")


class TestProjection:
    def test_identity_projection(self):
        """Test: Projecting to depth n gives A."""
        A = LeafSet.of(TreeShape(2, 2), [(0, 0), (0, 1), (1, 0)])
        assert project(A, 2) == A.leaves

    def test_root_projection(self):
        """Test: Level 0 is the empty prefix, or nothing for an empty set."""
        A = LeafSet.of(TreeShape(2, 2), [(0, 0)])
        assert project(A, 0) == ((),)
        assert project(LeafSet(TreeShape(2, 2), ()), 0) == ()

    def test_prefixes(self):
        """Test: {00, 01, 10} projects to {0, 1} at level 1."""
        A = LeafSet.of(TreeShape(2, 2), [(0, 0), (0, 1), (1, 0)])
        assert project(A, 1) == ((0,), (1,))

    def test_level_out_of_range(self):
        """Test: Levels above n are refused."""
        with pytest.raises(ValidationError):
            project(_full(2, 2), 3)


class TestParentsRegularize:
    def test_three_children(self):
        """Test: Three children of the root keep two."""
        A = LeafSet.of(TreeShape(4, 1), [(0,), (1,), (2,)])
        result = parents_regularize(A)
        assert result.k_prime == 2
        assert len(result.leaves) == 2

    def test_regular_input_is_fixed(self):
        """Test: A 2-regular level keeps every child."""
        A = LeafSet.of(TreeShape(4, 2), [(0, 0), (0, 3), (2, 1), (2, 2)])
        result = parents_regularize(A)
        assert result.k_prime == 2
        assert result.leaves == A

    def test_mixed_classes(self):
        """Test: Classes of mass 2 and 1 resolve to k' = 2."""
        A = LeafSet.of(TreeShape(4, 2), [(0, 0), (0, 1), (0, 2), (1, 0)])
        result = parents_regularize(A)
        assert result.k_prime == 2
        assert result.leaves.leaves == ((0, 0), (0, 1))

    def test_empty_input(self):
        """Test: The empty leaf set is rejected."""
        with pytest.raises(EmptyLeafSetError, match="empty leaf set"):
            parents_regularize(LeafSet(TreeShape(2, 1), ()))

    @given(
        k=st.integers(min_value=2, max_value=64),
        n=st.integers(min_value=1, max_value=6),
        size=st.integers(min_value=1, max_value=500),
        seed=st.integers(min_value=0, max_value=2**32),
    )
    @settings(max_examples=300)
    def test_retained_mass(self, k, n, size, seed):
        """Property: |A'| >= |A| / (2 log2 k) and every kept parent has k' children."""
        A = _random_leaf_set(random.Random(seed), k, n, size)
        result = parents_regularize(A)
        assert parents_bound_holds(len(A), len(result.leaves), k)
        counts = {}
        for leaf in result.leaves:
            counts[leaf[:-1]] = counts.get(leaf[:-1], 0) + 1
        assert set(counts.values()) == {result.k_prime}


class TestRegularize:
    def test_full_binary_tree(self):
        """Test: The full depth-3 binary tree is already regular."""
        A = _full(2, 3)
        result = regularize(A, 1)
        assert result.m == 0
        assert result.B == A
        assert result.degrees == (2, 2, 2)
        assert [len(project(result.B, level)) for level in range(4)] == [1, 2, 4, 8]

    def test_full_quaternary_tree(self):
        """Test: The full depth-2 4-ary tree keeps all 16 leaves."""
        result = regularize(_full(4, 2), 1)
        assert result.all_degrees == (4, 4)
        assert result.m == 0
        assert len(result.B) == 16

    def test_singleton(self):
        """Test: A single leaf has unit degrees and m = n."""
        A = LeafSet.of(TreeShape(3, 4), [(0, 2, 1, 1)])
        result = regularize(A, Fraction(1, 2))
        assert result.all_degrees == (1, 1, 1, 1)
        assert result.m == 4
        assert result.v == (0, 2, 1, 1)
        assert result.B == A

    def test_epsilon_range(self):
        """Test: ε must lie in (0, 1]."""
        with pytest.raises(ValidationError):
            regularize(_full(2, 2), 0)
        with pytest.raises(ValidationError):
            regularize(_full(2, 2), Fraction(3, 2))

    def test_checks_pass_on_full_tree(self):
        """Test: No bound is violated on a full tree."""
        A = _full(2, 6)
        result = regularize(A, 1)
        assert check_regularization(A, result, 1).violations() == []

    def test_payload(self):
        """Test: The payload carries the leaves and ε as text."""
        payload = regularize(_full(2, 2), Fraction(1, 2)).to_payload()
        assert payload["epsilon"] == "1/2"
        assert payload["size"] == len(payload["leaves"])

    def test_randomized_instances(self):
        """Test: Random instances (k <= 64, n <= 6, |A| <= 5000) violate no bound."""
        rng = random.Random(5)
        epsilons = [Fraction(1), Fraction(1, 2), Fraction(1, 3), Fraction(3, 4)]
        for _ in range(400):
            k = rng.randint(2, 64)
            n = rng.randint(1, 6)
            size = rng.randint(1, min(5000, k**n))
            A = _random_leaf_set(rng, k, n, size)
            eps = rng.choice(epsilons)
            result = regularize(A, eps)
            checks = check_regularization(A, result, eps)
            assert checks.violations() == [], (k, n, size, eps, checks)

    @pytest.mark.slow
    def test_randomized_instances_full_count(self):
        """Test: Ten thousand random instances violate no bound."""
        rng = random.Random(10_000)
        for _ in range(10_000):
            k = rng.randint(2, 64)
            n = rng.randint(1, 6)
            A = _random_leaf_set(rng, k, n, rng.randint(1, min(5000, k**n)))
            eps = Fraction(rng.randint(1, 8), 8)
            assert check_regularization(A, regularize(A, eps), eps).violations() == []

    def test_conditional_bounds_stay_unasserted(self):
        """Test: Without the size hypotheses the level and size bounds are not judged."""
        A = _full(3, 4)
        checks = check_regularization(A, regularize(A, 1), 1)
        assert not checks.hypotheses_hold
        assert checks.level_bound is None
        assert checks.size_bound is None


class TestBlockRegularize:
    def test_threshold_root(self):
        """Test: K(1) solves K^(1/4) = 2 log2 K on the larger branch."""
        x = k_threshold_log2(1)
        assert 2 ** (x / 4) == pytest.approx(2 * x, rel=1e-6)
        assert x > 4 / math.log(2)

    def test_threshold_grows_as_epsilon_shrinks(self):
        """Test: Smaller ε needs a larger K."""
        assert k_threshold_log2(Fraction(1, 2)) > k_threshold_log2(1)

    def test_wide_tree_uses_unit_blocks(self):
        """Test: With k >= K(ε) blocks are single digits and match regularize at ε/2."""
        k = 2**23
        rng = random.Random(7)
        A = _random_leaf_set(rng, k, 2, 300)
        blocked = block_regularize(A, 1)
        plain = regularize(A, Fraction(1, 2))
        assert blocked.block_size == 1
        assert blocked.B == plain.B
        assert blocked.m == plain.m

    def test_binary_depth_twelve(self):
        """Test: The full depth-12 binary tree satisfies the structural checks."""
        A = _full(2, 12)
        result = block_regularize(A, 1)
        assert result.block_size == math.ceil(k_threshold_log2(1))
        checks = check_block_regularization(A, result, 1)
        assert checks.extends_v
        assert checks.degree_regular

    def test_binary_tree_with_two_blocks(self):
        """Test: Depth 2s binary leaves form two blocks of 64 children each."""
        s = math.ceil(k_threshold_log2(1))
        digits = [tuple(int(b) for b in format(value, f"0{s}b")) for value in range(64)]
        A = LeafSet.of(TreeShape(2, 2 * s), (hi + lo for hi in digits for lo in digits))
        result = block_regularize(A, 1)
        assert result.block_size == s
        assert result.m == 0
        assert result.v == ()
        assert result.degrees == (64, 64)
        assert result.B == A
        checks = check_block_regularization(A, result, 1)
        assert checks.extends_v
        assert checks.degree_regular
        assert checks.violations() == []

    def test_singleton(self):
        """Test: A singleton sits at the deepest full block level."""
        k = 2**23
        A = LeafSet.of(TreeShape(k, 3), [(5, 6, 7)])
        result = block_regularize(A, 1)
        assert result.B == A
        assert result.m == result.block_size * (3 // result.block_size)

    def test_blocks_lift_back_to_digits(self):
        """Test: The prefix v is reported in original digits."""
        A = LeafSet.of(TreeShape(2**12, 4), [(1, 2, 3, 4)])
        result = block_regularize(A, 1)
        assert result.block_size == 2
        assert result.v == (1, 2, 3, 4)
        assert result.m == 4

    def test_empty_input(self):
        """Test: The empty leaf set is rejected."""
        with pytest.raises(EmptyLeafSetError):
            block_regularize(LeafSet(TreeShape(2, 3), ()), 1)
