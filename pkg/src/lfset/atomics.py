"""Single-word atomic cells built on striped locks.

CPython's GIL makes a plain attribute load or store indivisible, so reads
of a cell go straight through the ``v`` slot. Read-modify-write steps
(CAS, swap, fetch-and-add) take a lock from a small shared pool so that
they are indivisible with respect to each other and to ``store``.

Discipline for users: once a record is visible to other threads, a field
that is ever the target of a CAS must only be written through ``store``
or an RMW method. Fields that are single-writer (or write-once) may be
plain attributes; the GIL totally orders those writes with everything
else.

``cas`` returns the value held immediately before the step, which is the
convention the list and trie protocols are written against: a call
succeeded iff the returned value equals the expected one.
"""

from __future__ import annotations

import threading

_NSTRIPES = 2048
_MASK = _NSTRIPES - 1
_STRIPES = tuple(threading.Lock() for _ in range(_NSTRIPES))

# Test instrumentation. When not None, TRACE(kind, payload) is invoked
# right before every RMW step ("cas", "swap", "faa", "and") and at a few
# named protocol points. Production runs pay one global load per RMW.
TRACE = None


def set_trace(fn) -> None:
    """Install (or clear, with None) the global RMW trace hook."""
    global TRACE
    TRACE = fn


def trace_point(site: str, payload=None) -> None:
    """Named protocol point; no-op unless a trace hook is installed."""
    t = TRACE
    if t is not None:
        t(site, payload)


def lock_of(obj):
    """The stripe lock guarding RMW steps on ``obj``."""
    return _STRIPES[id(obj) >> 4 & _MASK]


class Atomic:
    """One atomic word. Load via ``.v`` (or ``load()``), RMW via methods."""

    __slots__ = ("v",)

    def __init__(self, v=None):
        self.v = v

    def load(self):
        return self.v

    def store(self, x) -> None:
        with _STRIPES[id(self) >> 4 & _MASK]:
            self.v = x

    def cas(self, expected, new):
        """Compare-and-swap. Returns the value immediately before the step."""
        t = TRACE
        if t is not None:
            t("cas", self)
        with _STRIPES[id(self) >> 4 & _MASK]:
            old = self.v
            if old == expected:
                self.v = new
            return old

    def swap(self, new):
        """Unconditional exchange. Returns the previous value."""
        t = TRACE
        if t is not None:
            t("swap", self)
        with _STRIPES[id(self) >> 4 & _MASK]:
            old = self.v
            self.v = new
            return old

    def add(self, delta):
        """Fetch-and-add. Returns the value immediately before the step."""
        t = TRACE
        if t is not None:
            t("faa", self)
        with _STRIPES[id(self) >> 4 & _MASK]:
            old = self.v
            self.v = old + delta
            return old
