import pytest
from hypothesis import given, strategies as st

from popcount import BitString, EMPTY, RandomSource, append, lex_precedes, rand_bits

bitstrings = st.text(alphabet="01", max_size=24).map(BitString.from01)


class TestBitString:
    def test_roundtrip(self):
        for s in ("", "0", "1", "0110", "00001111"):
            assert BitString.from01(s).to01() == s

    def test_validation(self):
        with pytest.raises(ValueError):
            BitString(4, 2)
        with pytest.raises(ValueError):
            BitString.from01("012")

    def test_indexing_and_slicing(self):
        b = BitString.from01("0110")
        assert [b[i] for i in range(4)] == [0, 1, 1, 0]
        assert b[1:3] == BitString.from01("11")
        assert b[2:2] == EMPTY
        with pytest.raises(IndexError):
            b[4]

    def test_immutable(self):
        b = BitString.from01("01")
        with pytest.raises(AttributeError):
            b.value = 3

    @given(bitstrings, bitstrings)
    def test_startswith_matches_strings(self, a, b):
        assert a.startswith(b) == a.to01().startswith(b.to01())


class TestAppend:
    def test_examples(self):
        assert append(BitString.from01("01"), BitString.from01("10")).to01() == "0110"
        assert append(EMPTY, BitString.from01("1")).to01() == "1"
        assert append(BitString.from01("1"), EMPTY).to01() == "1"

    @given(bitstrings, bitstrings, bitstrings)
    def test_associative(self, a, b, c):
        assert append(append(a, b), c) == append(a, append(b, c))

    @given(bitstrings, bitstrings)
    def test_length_and_prefix(self, a, b):
        out = append(a, b)
        assert len(out) == len(a) + len(b)
        assert out.startswith(a)


class TestLexPrecedes:
    def test_examples(self):
        assert lex_precedes(BitString.from01("01"), BitString.from01("10"))
        assert not lex_precedes(BitString.from01("10"), BitString.from01("1011"))
        assert not lex_precedes(EMPTY, BitString.from01("111"))

    @given(bitstrings, bitstrings)
    def test_never_both(self, a, b):
        assert not (lex_precedes(a, b) and lex_precedes(b, a))

    @given(bitstrings)
    def test_irreflexive(self, a):
        assert not lex_precedes(a, a)

    @given(st.integers(1, 12), st.data())
    def test_equal_length_total_order(self, width, data):
        mk = lambda: BitString(data.draw(st.integers(0, 2**width - 1)), width)
        a, b, c = mk(), mk(), mk()
        # trichotomy with equality
        assert (a == b) + lex_precedes(a, b) + lex_precedes(b, a) == 1
        # transitivity
        if lex_precedes(a, b) and lex_precedes(b, c):
            assert lex_precedes(a, c)

    @given(bitstrings, bitstrings)
    def test_matches_string_comparison_on_common_prefix(self, a, b):
        p = min(len(a), len(b))
        assert lex_precedes(a, b) == (a.to01()[:p] < b.to01()[:p])


class TestRandomSource:
    def test_same_seed_same_stream(self):
        a, b = RandomSource(7), RandomSource(7)
        assert rand_bits(a, 4) == rand_bits(b, 4)
        assert [a.rand_below(10) for _ in range(20)] == [b.rand_below(10) for _ in range(20)]

    def test_rand_bits_length_and_no_reuse(self):
        src = RandomSource(5)
        first, second = src.rand_bits(8), src.rand_bits(8)
        replay = RandomSource(5)
        assert (replay.rand_bits(8), replay.rand_bits(8)) == (first, second)
        assert len(first) == len(second) == 8
        long = RandomSource(5, None).rand_bits(100)
        assert len(long) == 100

    def test_rejects_zero_bits(self):
        with pytest.raises(ValueError):
            RandomSource(1).rand_bits(0)

    def test_children_are_independent_and_deterministic(self):
        root = RandomSource(11)
        c0, c1 = root.child(0), root.child(1)
        again = RandomSource(11)
        assert c0.rand_bits(32) == again.child(0).rand_bits(32)
        assert c0._seq.spawn_key != c1._seq.spawn_key
        assert RandomSource.for_trial(11, 5, 0).rand_bits(32) != RandomSource.for_trial(
            11, 5, 1
        ).rand_bits(32)

    def test_single_bit_frequency(self):
        # binomial bound from the contract: 10^6 draws, fraction of ones
        # within [0.497, 0.503]
        src = RandomSource(123)
        draws = 10**6
        chunks = draws // 1000
        ones = sum(src.rand_bits(1000).value.bit_count() for _ in range(chunks))
        assert 0.497 <= ones / draws <= 0.503
