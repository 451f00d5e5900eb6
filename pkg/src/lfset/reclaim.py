"""Epoch-based reclamation: distributed epochs with five limbo bags.

Every structure owns one :class:`ReclaimDomain`. A thread brackets each
operation with ``start_op``/``end_op``. ``start_op`` reads the global
epoch; on seeing a new value it rotates to its least recently used limbo
bag and reclaims that bag's contents, then checks one other process's
announcement, advancing the epoch once everyone has been seen quiescent
or current. Records retired with ``reclaim_later`` therefore sit through
``nbags`` rotations, which guarantees at least ``nbags - 1`` epoch
increments between retirement and reclamation; with five bags that covers
every operation within distance three in the contention graph of the one
that retired the record.

Reclamation in this runtime just severs the record from the allocator's
point of view; in debug mode it additionally poisons the record so any
later touch is detectable. Reference-counted removal records go through
``dcount_adjust``, which retires them on the transition to zero.

Debug toggle: pass ``debug=True`` (or set the ``LFSET_DEBUG`` environment
variable to a non-empty value) to enable poisoning. The bagging
instrumentation (single-bagging flag, epoch tags) is always on; it is
cheap and keeps accounting honest.
"""

from __future__ import annotations

import os

from .atomics import Atomic

NBAGS = 5

# Global count of observed touches of poisoned records, incremented from
# the traversal checkpoints in the list/trie modules.
POISON_HITS = Atomic(0)

POISON_KEY = -(1 << 62) - 0xDEAD


def note_poison_hit(record) -> None:
    POISON_HITS.add(1)


def poison_hits() -> int:
    return POISON_HITS.v


def reset_poison_hits() -> None:
    POISON_HITS.store(0)


def _debug_default() -> bool:
    return bool(os.environ.get("LFSET_DEBUG"))


class _ProcState:
    """Single-writer per-process reclamation state."""

    __slots__ = (
        "epoch", "checked", "bag", "bags",
        "bagged", "drained", "double_bag", "gap_violations", "negative_dcount",
    )

    def __init__(self, nbags: int):
        self.epoch = None  # last epoch announced; None before first start_op
        self.checked = 1
        self.bag = nbags - 1
        self.bags = [[] for _ in range(nbags)]
        self.bagged = 0
        self.drained = 0
        self.double_bag = 0
        self.gap_violations = 0
        self.negative_dcount = 0


class ReclaimDomain:
    def __init__(self, nprocs: int, nbags: int = NBAGS, debug: bool | None = None):
        if nprocs < 1:
            raise ValueError("nprocs must be >= 1")
        if nbags < 3:
            raise ValueError("nbags must be >= 3")
        self.nprocs = nprocs
        self.nbags = nbags
        self.debug = _debug_default() if debug is None else debug
        self.epoch = Atomic(0)
        self.announce = [Atomic((0, True)) for _ in range(nprocs)]
        self._procs = [_ProcState(nbags) for _ in range(nprocs)]
        self._log = None  # optional (event, ...) trace for invariant tests

    # -- operation brackets ----------------------------------------------

    def start_op(self, pid: int) -> None:
        p = self._procs[pid]
        e = self.epoch.v
        if e != p.epoch:
            self._rotate(p, e)
            p.checked = 1
            p.epoch = e
        other = (pid + p.checked) % self.nprocs
        ae, aq = self.announce[other].v
        if ae == e or aq:
            p.checked += 1
            # The pseudocode compares for equality here, which can never
            # fire with one process (checked starts past N); >= keeps the
            # single-process case advancing and is identical otherwise.
            if p.checked >= self.nprocs:
                old = self.epoch.cas(e, e + 1)
                if self._log is not None and old == e:
                    self._log_event(("incr", pid, e + 1))
        self.announce[pid].v = (e, False)
        if self._log is not None:
            self._log_event(("announce", pid, e, False))

    def end_op(self, pid: int) -> None:
        p = self._procs[pid]
        self.announce[pid].v = (p.epoch, True)
        if self._log is not None:
            self._log_event(("announce", pid, p.epoch, True))

    # -- retirement --------------------------------------------------------

    def reclaim_later(self, pid: int, record) -> None:
        """Place a retired record into the caller's current limbo bag."""
        p = self._procs[pid]
        if record.bagged:
            p.double_bag += 1
            return
        record.bagged = True
        record.bag_epoch = p.epoch if p.epoch is not None else 0
        p.bags[p.bag].append(record)
        p.bagged += 1

    def dcount_adjust(self, pid: int, dnode, delta: int) -> int:
        """Fetch-and-add on a removal record's reference count; the
        thread that drops it to zero retires the record."""
        post = dnode.dcount.add(delta) + delta
        if post == 0:
            self.reclaim_later(pid, dnode)
        elif post < 0:
            self._procs[pid].negative_dcount += 1
        return post

    # -- draining ----------------------------------------------------------

    def _rotate(self, p: _ProcState, new_epoch: int) -> None:
        p.bag = (p.bag + 1) % self.nbags
        bag = p.bags[p.bag]
        if not bag:
            return
        min_gap = self.nbags - 1
        for record in bag:
            if new_epoch - record.bag_epoch < min_gap:
                p.gap_violations += 1
            self._reclaim(record)
            p.drained += 1
        bag.clear()

    def drain_all(self, pid: int) -> None:
        """Reclaim everything this process retired. Only safe once the
        structure is quiescent (e.g. worker exit or teardown)."""
        p = self._procs[pid]
        for bag in p.bags:
            for record in bag:
                self._reclaim(record)
                p.drained += 1
            bag.clear()

    def teardown(self) -> None:
        for pid in range(self.nprocs):
            self.drain_all(pid)

    def _reclaim(self, record) -> None:
        if not self.debug:
            return
        nn = getattr(record, "notify_head", None)
        if nn is not None:
            n = nn.v
            while n is not None:
                n.poisoned = True
                n.key = POISON_KEY
                n = n.next
        record.poisoned = True
        record.key = POISON_KEY

    # -- introspection -----------------------------------------------------

    def stats(self) -> dict:
        procs = self._procs
        pending = sum(len(b) for p in procs for b in p.bags)
        return {
            "bagged": sum(p.bagged for p in procs),
            "drained": sum(p.drained for p in procs),
            "pending": pending,
            "double_bag": sum(p.double_bag for p in procs),
            "gap_violations": sum(p.gap_violations for p in procs),
            "negative_dcount": sum(p.negative_dcount for p in procs),
        }

    # -- event log (used by the epoch-soundness tests) ----------------------

    def enable_log(self) -> None:
        import threading

        self._log = ([], threading.Lock())

    def _log_event(self, ev) -> None:
        events, lock = self._log
        with lock:
            events.append(ev)

    def log_events(self):
        return list(self._log[0]) if self._log else []
