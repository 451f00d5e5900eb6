"""Record types shared by the announcement lists and the trie.

Update records announce in-flight inserts and removes; predecessor
records announce in-flight predecessor queries; notify records carry
messages from updaters to predecessor queries. All of them are reclaimed
through the epoch domain in :mod:`lfset.reclaim`, so each carries a
``bagged``/``poisoned`` pair of debug flags.

List linkage words are tuples ``(link, state)`` held in one atomic cell.
For ``INSFLAG`` the link part is a ``(seq, pid)`` pair naming a process's
insertion descriptor; in every other state it is a node reference. CAS on
the cell compares tuples element-wise, which is exactly word equality:
identity for node references, value for the packed pair.
"""

from __future__ import annotations

from .atomics import Atomic
from .minreg import FlatMinRegister

# Update record types
INS = 0
DEL = 1

# LatestList activation states
INACTIVE = 0
ACTIVE = 1

# Linkage word states (low bits of the packed word)
NORMAL = 0
INSFLAG = 1
DELFLAG = 2
MARKED = 3

# Sentinel keys outside any usable universe
KEY_NEG_INF = -(1 << 63)
KEY_POS_INF = (1 << 63) - 1


class UpdateNode:
    """Base update record: LatestList fields plus both lists' linkage.

    ``unext``/``rnext`` are the packed (link, state) words for the
    ascending and descending announcement lists; ``ubl``/``rbl`` the
    matching backlinks. ``latest_next`` is the swap cell chaining the
    (at most two) records of one key's LatestList.
    """

    __slots__ = (
        "key",
        "ntype",
        "state",
        "latest_next",
        "unext",
        "ubl",
        "rnext",
        "rbl",
        "bagged",
        "bag_epoch",
        "poisoned",
    )

    def __init__(self, key: int, ntype: int, state: int = INACTIVE):
        self.key = key
        self.ntype = ntype
        self.state = state
        self.latest_next = Atomic(None)
        self.unext = Atomic((None, NORMAL))
        self.ubl = Atomic(None)
        self.rnext = Atomic((None, NORMAL))
        self.rbl = Atomic(None)
        self.bagged = False
        self.bag_epoch = 0
        self.poisoned = False

    def __repr__(self):
        kind = "INS" if self.ntype == INS else "DEL"
        return f"<{kind} key={self.key} at {id(self):#x}>"


class InsertNode(UpdateNode):
    """Insert announcement; also remembers which remove it may be stalling."""

    __slots__ = ("target", "target_key")

    def __init__(self, key: int):
        super().__init__(key, INS)
        self.target = None
        self.target_key = -1


class DelNode(UpdateNode):
    """Remove announcement with the interpreted-bit boundary fields.

    ``lower1`` only decreases (insert instances write trie-node heights
    into it), ``upper0`` only increases (written by the owning remove).
    ``dcount`` counts shared references and triggers retirement at zero.
    """

    __slots__ = (
        "stop",
        "upper0",
        "lower1",
        "delpred",
        "delpred2",
        "delpred_node",
        "dcount",
    )

    def __init__(self, key: int, trie_height: int):
        super().__init__(key, DEL)
        self.stop = False
        self.upper0 = 0
        self.lower1 = FlatMinRegister(trie_height + 1)  # bound k+2, starts k+1
        self.delpred = -1
        self.delpred2 = -1
        self.delpred_node = None
        self.dcount = Atomic(0)


class InsertDescNode:
    """Per-process reusable descriptor for list insertions.

    Fields change only while the descriptor is out of its list, and only
    by the owner; ``seq`` increments after every placement so stale helper
    CAS steps can never take effect.
    """

    __slots__ = ("new_node", "next", "seq")

    def __init__(self):
        self.new_node = None
        self.next = None
        self.seq = 0


class PredecessorNode:
    """Predecessor-query announcement.

    ``succ``/``backlink`` are its linkage in the query list (no INSFLAG
    state there), ``notify_head`` the grow-only message stack, ``cursor``
    the atomic-copy position within the descending announcement list.
    """

    __slots__ = (
        "key",
        "succ",
        "backlink",
        "notify_head",
        "cursor",
        "bagged",
        "bag_epoch",
        "poisoned",
    )

    def __init__(self, key: int, ruall_head):
        self.key = key
        self.succ = Atomic((None, NORMAL))
        self.backlink = Atomic(None)
        self.notify_head = Atomic(None)
        self.cursor = Atomic((ruall_head, 0))
        self.bagged = False
        self.bag_epoch = 0
        self.poisoned = False

    def __repr__(self):
        return f"<Pred key={self.key} at {id(self):#x}>"


class NotifyNode:
    """Message describing one update, pushed onto a query's notify stack.

    Mutable while owned by a process; immutable once a push succeeds. A
    node whose push was abandoned may be reused for a later update.
    """

    __slots__ = ("update_node", "key", "update_node_max", "threshold", "next", "poisoned")

    def __init__(self):
        self.update_node = None
        self.key = -1
        self.update_node_max = -1
        self.threshold = KEY_POS_INF
        self.next = None
        self.poisoned = False
