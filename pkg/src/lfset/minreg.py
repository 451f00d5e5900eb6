"""Wait-free linearizable bounded min registers.

A bounded min register holds an integer that only ever decreases:
``min_write(v)`` lowers the value to ``v`` if ``v`` is smaller,
``min_read()`` returns the current value.

Two constructions live here. ``FlatMinRegister`` keeps its value in unary
inside one atomic word, so both operations are a single shared-memory
step; it is limited by the word width. ``TreeMinRegister`` combines flat
registers into a perfect k-ary tree for larger bounds; a read performs
exactly one step per tree level and a write at most two steps per level
minus one.
"""

from __future__ import annotations

from .atomics import TRACE, lock_of


class FlatMinRegister:
    """(bits+1)-bounded min register over a single word.

    Value ``i`` is encoded as ``0^(bits-i) 1^i`` (a suffix of ones), so a
    write is one atomic AND with a mask and a read is one load followed by
    a local trailing-ones count. The word starts all ones, i.e. at value
    ``bits``.
    """

    __slots__ = ("word", "bits")

    MAX_BITS = 64

    def __init__(self, bits: int):
        if not 1 <= bits <= self.MAX_BITS:
            raise ValueError(f"bits must be in [1, {self.MAX_BITS}], got {bits}")
        self.bits = bits
        self.word = (1 << bits) - 1

    @property
    def bound(self) -> int:
        return self.bits + 1

    def min_read(self) -> int:
        w = self.word
        # trailing-ones count without looping over bits
        return (w ^ (w + 1)).bit_length() - 1

    def min_write(self, v: int) -> None:
        if not 0 <= v <= self.bits:
            raise ValueError(f"value {v} outside [0, {self.bits}]")
        t = TRACE
        if t is not None:
            t("and", self)
        with lock_of(self):
            self.word &= (1 << v) - 1


class TreeMinRegister:
    """``arity**levels``-bounded min register as a k-ary tree of flat ones.

    Every node of the perfect tree, internal switches and leaves alike, is
    an ``arity``-bounded FlatMinRegister. A read follows switch values
    from the root down, one step per level. A write descends while the
    switch value allows it, writes the leaf, then lowers the switches it
    passed on the way back up.

    ``limit`` rejects writes of ``limit`` or above at the API edge, for
    callers whose bound is not an exact power of the arity; reads may
    still return up to ``capacity - 1`` until something is written.
    """

    __slots__ = ("arity", "levels", "capacity", "limit", "_flat")

    def __init__(self, arity: int, levels: int, limit: int | None = None):
        if arity < 2 or arity - 1 > FlatMinRegister.MAX_BITS:
            raise ValueError(f"arity must be in [2, {FlatMinRegister.MAX_BITS + 1}]")
        if levels < 1:
            raise ValueError("levels must be >= 1")
        self.arity = arity
        self.levels = levels
        self.capacity = arity**levels
        self.limit = self.capacity if limit is None else limit
        if not 1 <= self.limit <= self.capacity:
            raise ValueError("limit outside (0, capacity]")
        nnodes = (self.capacity - 1) // (arity - 1)
        self._flat = [FlatMinRegister(arity - 1) for _ in range(nnodes)]

    def min_read(self) -> int:
        return self._read_counted()[0]

    def min_write(self, v: int) -> None:
        self._write_counted(v)

    def _read_counted(self) -> tuple[int, int]:
        """Returns (value, number of shared-memory steps performed)."""
        k = self.arity
        flat = self._flat
        span = self.capacity // k
        idx = 0
        base = 0
        steps = 0
        while span >= k:
            i = flat[idx].min_read()
            steps += 1
            base += i * span
            idx = idx * k + 1 + i
            span //= k
        v = flat[idx].min_read()
        steps += 1
        return base + v, steps

    def _write_counted(self, v: int) -> int:
        """Performs the write; returns the number of shared steps."""
        if not 0 <= v < self.limit:
            raise ValueError(f"value {v} outside [0, {self.limit})")
        k = self.arity
        flat = self._flat
        span = self.capacity // k
        idx = 0
        steps = 0
        pending = []  # switches to lower after the subtree write lands
        while True:
            if span < k:
                flat[idx].min_write(v)
                steps += 1
                break
            i, j = divmod(v, span)
            d = flat[idx].min_read()
            steps += 1
            if d < i:
                break  # subtree left of here already holds something smaller
            if d > i:
                pending.append((idx, i))
            idx = idx * k + 1 + i
            v = j
            span //= k
        while pending:
            nidx, ni = pending.pop()
            flat[nidx].min_write(ni)
            steps += 1
        return steps


def make_min_register(bound: int, arity: int = 64):
    """A min register holding values ``0 .. bound-1``.

    Uses a single flat word whenever the bound fits one (bound <= 65 on a
    64-bit word), otherwise a tree of the given arity rounded up to the
    next power, with writes >= ``bound`` rejected.
    """
    if bound < 2:
        raise ValueError("bound must be >= 2")
    if bound - 1 <= FlatMinRegister.MAX_BITS:
        return FlatMinRegister(bound - 1)
    levels = 1
    cap = arity
    while cap < bound:
        cap *= arity
        levels += 1
    return TreeMinRegister(arity, levels, limit=bound)
