"""Bit strings and deterministic randomness.

Everything stochastic in this package flows through :class:`RandomSource`,
so a run is fully reproducible from its seed.  Codes are variable-length
binary strings compared lexicographically on their common-length prefix.
"""

from __future__ import annotations

import numpy as np


class BitString:
    """Immutable binary string, packed as (integer value, bit length).

    The first (leftmost) bit is the most significant bit of ``value``, so
    integer comparison of equal-length strings coincides with lexicographic
    comparison.  The empty string has length 0.
    """

    __slots__ = ("value", "length")

    def __init__(self, value: int = 0, length: int = 0):
        if length < 0:
            raise ValueError("negative length")
        if not 0 <= value < (1 << length if length else 1):
            raise ValueError(f"value {value} does not fit in {length} bits")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "length", length)

    def __setattr__(self, name, val):
        raise AttributeError("BitString is immutable")

    @classmethod
    def from01(cls, s: str) -> "BitString":
        """Build from a string like ``"0110"`` (empty string allowed)."""
        if s and set(s) - {"0", "1"}:
            raise ValueError(f"not a binary string: {s!r}")
        return cls(int(s, 2) if s else 0, len(s))

    def to01(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def __len__(self) -> int:
        return self.length

    def __bool__(self) -> bool:
        return self.length > 0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitString)
            and self.value == other.value
            and self.length == other.length
        )

    def __hash__(self) -> int:
        return hash((self.value, self.length))

    def __getitem__(self, idx):
        """0-based indexing/slicing from the left; slices must be contiguous."""
        if isinstance(idx, slice):
            start, stop, step = idx.indices(self.length)
            if step != 1:
                raise ValueError("BitString slices must have step 1")
            if stop <= start:
                return BitString()
            width = stop - start
            return BitString((self.value >> (self.length - stop)) & ((1 << width) - 1), width)
        if not 0 <= idx < self.length:
            raise IndexError(idx)
        return (self.value >> (self.length - 1 - idx)) & 1

    def startswith(self, prefix: "BitString") -> bool:
        if prefix.length > self.length:
            return False
        return (self.value >> (self.length - prefix.length)) == prefix.value

    def __repr__(self) -> str:
        return f"BitString('{self.to01()}')"


EMPTY = BitString()


def append(a: BitString, b: BitString) -> BitString:
    """Concatenation ``ab``; the empty string is a two-sided identity."""
    if not b.length:
        return a
    if not a.length:
        return b
    return BitString((a.value << b.length) | b.value, a.length + b.length)


def lex_precedes(a: BitString, b: BitString) -> bool:
    """True iff ``a`` strictly precedes ``b`` lexicographically on the
    common-length prefix (0 < 1, position by position).

    Only the first ``p = min(|a|, |b|)`` bits of each side are compared;
    equal prefixes give False regardless of the remaining bits.
    """
    p = a.length if a.length < b.length else b.length
    return (a.value >> (a.length - p)) < (b.value >> (b.length - p))


class RandomSource:
    """Seeded random-bit and bounded-integer stream (PCG64 behind the scenes).

    Same seed, same call sequence => bit-identical results.  Child sources
    derived with distinct keys from one master seed give statistically
    independent streams (hash-based derivation via ``numpy.random.SeedSequence``).
    """

    __slots__ = ("_seq", "_gen")

    def __init__(self, seed, _seq: np.random.SeedSequence | None = None):
        self._seq = _seq if _seq is not None else np.random.SeedSequence(seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    @classmethod
    def for_trial(cls, master_seed: int, *keys: int) -> "RandomSource":
        """Independent stream for one trial, keyed by e.g. (n, trial_index)."""
        return cls(None, _seq=np.random.SeedSequence(master_seed, spawn_key=tuple(keys)))

    def child(self, key: int) -> "RandomSource":
        """Derived independent source; key disambiguates siblings."""
        return RandomSource(
            None,
            _seq=np.random.SeedSequence(self._seq.entropy, spawn_key=self._seq.spawn_key + (key,)),
        )

    def rand_bits(self, m: int) -> BitString:
        """m fresh uniform bits (m >= 1), consuming exactly m bits of the stream."""
        if m < 1:
            raise ValueError("rand_bits requires m >= 1")
        gen = self._gen
        v = 0
        for _ in range(m // 32):
            v = (v << 32) | int(gen.integers(0, 1 << 32))
        rem = m % 32
        if rem:
            v = (v << rem) | int(gen.integers(0, 1 << rem))
        return BitString(v, m)

    def rand_below(self, k: int) -> int:
        """Uniform integer in [0, k)."""
        return int(self._gen.integers(0, k))

    def kernel_seed(self) -> int:
        """Fresh 32-bit seed for handing off to a compiled simulation kernel."""
        return int(self._gen.integers(0, 1 << 32))


def rand_bits(src: RandomSource, m: int) -> BitString:
    """Functional spelling of :meth:`RandomSource.rand_bits`."""
    return src.rand_bits(m)
