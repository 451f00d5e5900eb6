"""Lock-free binary trie over a bounded integer universe.

The structure is a perfect binary trie of height ``k`` over the universe
``{0 .. 2^k - 1}``. Leaves are per-key LatestLists (at most two update
records, the last one active); membership of ``x`` is simply whether the
first active record for ``x`` is an insert record, which makes ``search``
O(1). Internal nodes hold no stored bit: each references a removal record
and its *interpreted bit* is derived from that record's two boundary
fields, so updates flip whole root paths by writing a min register or
swinging one pointer.

Linearizable ``predecessor`` needs more than the trie bits, which are only
eventually consistent while updates are in flight. Updates announce
themselves in two sorted lists (ascending and descending by key) and
actively push notify records at every in-flight query; a query aggregates
the relaxed trie walk with what it finds in the announcement lists and its
own notify stack, falling back to a small reachability computation over
remove announcements when the walk was torn by concurrent removes.

Threads register once (getting a process id) and every public operation is
bracketed by the epoch domain, which reclaims retired records after enough
epoch advances.
"""

from __future__ import annotations

import threading
from bisect import bisect_left

from .alist import AnnounceList
from .atomics import Atomic, trace_point
from .nodes import (
    ACTIVE,
    DEL,
    INACTIVE,
    INS,
    KEY_NEG_INF,
    MARKED,
    NORMAL,
    DelNode,
    InsertNode,
    NotifyNode,
    PredecessorNode,
)
from .pall import PredecessorList, cursor_copy_next, cursor_read
from .reclaim import ReclaimDomain, note_poison_hit
from .pall import PredecessorList

MAX_K = 24

# Distinct from None: "the relaxed walk could not finish".
BOTTOM = object()


class _ThreadCtx:
    """Per-registered-thread state: process id, reusable update records
    (a record that lost its placement CAS is recycled for the next
    attempt of the same type) and a pool of reusable notify records."""

    __slots__ = ("pid", "ins_node", "del_node", "notify_pool")

    def __init__(self, pid: int):
        self.pid = pid
        self.ins_node = None
        self.del_node = None
        self.notify_pool = []


class LockFreeTrie:
    """Concurrent ordered set of integers from ``{0 .. 2^k - 1}``."""

    def __init__(self, k: int, nprocs: int = 512, debug: bool | None = None):
        if not 1 <= k <= MAX_K:
            raise ValueError(f"k must be in [1, {MAX_K}]")
        if nprocs < 1:
            raise ValueError("nprocs must be >= 1")
        self.k = k
        self.nprocs = nprocs
        self.universe = 1 << k
        self.domain = ReclaimDomain(nprocs, debug=debug)
        self.uall = AnnounceList(nprocs, "unext", "ubl", descending=False)
        self.ruall = AnnounceList(nprocs, "rnext", "rbl", descending=True)
        self.pall = PredecessorList()
        self._tls = threading.local()
        self._next_pid = Atomic(0)

        size = self.universe
        # Initial state: every key holds one active removal record whose
        # upper boundary is k, so every interpreted bit reads 0. The
        # reference count is one for the leaf plus one per internal node
        # pointing at the record (internal nodes start at their leftmost
        # leaf's record).
        latest = []
        for x in range(size):
            d = DelNode(x, k)
            d.state = ACTIVE
            d.upper0 = k
            refs = 1 + (min((x & -x).bit_length() - 1, k) if x else k)
            d.dcount.v = refs
            latest.append(Atomic(d))
        self.latest = latest
        tnodes = [None] * size  # heap slots 1 .. 2^k - 1
        for m in range(1, size):
            depth = m.bit_length() - 1
            leftmost = (m << (k - depth)) - size
            tnodes[m] = Atomic(latest[leftmost].v)
        self.tnodes = tnodes

    # -- registration and op bracketing -----------------------------------

    def register_thread(self) -> int:
        ctx = getattr(self._tls, "ctx", None)
        if ctx is not None:
            return ctx.pid
        pid = self._next_pid.add(1)
        if pid >= self.nprocs:
            raise RuntimeError(f"thread registration overflow: capacity {self.nprocs}")
        ctx = _ThreadCtx(pid)
        self._tls.ctx = ctx
        return pid

    def _ctx(self) -> _ThreadCtx:
        ctx = getattr(self._tls, "ctx", None)
        if ctx is None:
            self.register_thread()
            ctx = self._tls.ctx
        return ctx

    def _check_key(self, x: int) -> None:
        if not 0 <= x < self.universe:
            raise ValueError(f"key {x} outside universe [0, {self.universe})")

    # -- public operations -------------------------------------------------

    def search(self, x: int) -> bool:
        self._check_key(x)
        ctx = self._ctx()
        dom = self.domain
        dom.start_op(ctx.pid)
        try:
            return self._first_active(x).ntype == INS
        finally:
            dom.end_op(ctx.pid)

    def insert(self, x: int) -> bool:
        self._check_key(x)
        ctx = self._ctx()
        dom = self.domain
        dom.start_op(ctx.pid)
        try:
            return self._insert(ctx, x)
        finally:
            dom.end_op(ctx.pid)

    def remove(self, x: int) -> bool:
        self._check_key(x)
        ctx = self._ctx()
        dom = self.domain
        dom.start_op(ctx.pid)
        try:
            return self._remove(ctx, x)
        finally:
            dom.end_op(ctx.pid)

    def predecessor(self, x: int) -> int:
        """Largest key smaller than ``x`` currently in the set, or -1."""
        self._check_key(x)
        ctx = self._ctx()
        dom = self.domain
        dom.start_op(ctx.pid)
        try:
            pnode = PredecessorNode(x, self.ruall.head)
            result = self._predecessor_impl(ctx, x, pnode)
            self.pall.remove(pnode)
            dom.reclaim_later(ctx.pid, pnode)
            return result
        finally:
            dom.end_op(ctx.pid)

    def relaxed_predecessor(self, x: int):
        """The bare trie walk: correct when quiescent, may return a stale
        answer or None under concurrent updates."""
        self._check_key(x)
        ctx = self._ctx()
        dom = self.domain
        dom.start_op(ctx.pid)
        try:
            r = self._relaxed_pred(x)
            return None if r is BOTTOM else r
        finally:
            dom.end_op(ctx.pid)

    # -- LatestLists --------------------------------------------------------

    def _first_active(self, x: int):
        head = self.latest[x].v
        if head.poisoned:
            note_poison_hit(head)
        if head.state == ACTIVE:
            return head
        nxt = head.latest_next.v
        return head if nxt is None else nxt

    def _activate(self, ctx, u) -> None:
        """Make a freshly placed record active: announce it in both lists,
        flip its state, then detach the record it displaced. Owner and
        helpers all run this; the swap hands the displaced record to
        exactly one of them."""
        self.uall.insert(u, ctx.pid)
        self.ruall.insert(u, ctx.pid)
        u.state = ACTIVE
        old = u.latest_next.swap(None)
        if old is not None:
            if old.ntype == INS:
                self.domain.reclaim_later(ctx.pid, old)
            else:
                self.domain.dcount_adjust(ctx.pid, old, -1)

    # -- insert --------------------------------------------------------------

    def _insert(self, ctx, x: int) -> bool:
        fa = self._first_active(x)
        if fa.ntype == INS:
            return False
        inode = ctx.ins_node
        if inode is None:
            inode = InsertNode(x)
        else:
            self._reset_update(inode, x)
        inode.target = None
        inode.target_key = -1
        inode.latest_next.v = fa
        old = self.latest[x].cas(fa, inode)
        if old is not fa:
            ctx.ins_node = inode  # keep for the next attempt
            winner = self.latest[x].v
            if winner.latest_next.v is fa:
                self._activate(ctx, winner)
            return False
        ctx.ins_node = None
        self._activate(ctx, inode)

        # Turn on interpreted bits up the root path.
        k = self.k
        leaf = self.universe + x
        tnodes = self.tnodes
        for h in range(1, k + 1):
            t = tnodes[leaf >> h]
            dn0 = t.v
            if dn0.poisoned:
                note_poison_hit(dn0)
            fz = self._first_active(dn0.key)
            if fz.ntype == INS:
                continue  # bit already 1
            if h >= fz.lower1.min_read() or h > fz.upper0:
                continue  # bit already 1
            inode.target_key = fz.key
            inode.target = fz
            if self._first_active(x) is not inode:
                break  # displaced: the key is being removed again
            fz.lower1.min_write(h)

        self._notify(ctx, inode)
        self.uall.remove(inode)
        self.ruall.remove(inode)
        return True

    # -- remove ----------------------------------------------------------------

    def _remove(self, ctx, x: int) -> bool:
        fa = self._first_active(x)
        if fa.ntype == DEL:
            return False
        inode = fa
        k = self.k

        pn1 = PredecessorNode(x, self.ruall.head)
        pred1 = self._predecessor_impl(ctx, x, pn1)

        dnode = ctx.del_node
        if dnode is None:
            dnode = DelNode(x, k)
        else:
            self._reset_update(dnode, x)
            dnode.stop = False
            dnode.upper0 = 0
            dnode.lower1.word = (1 << (k + 1)) - 1
        dnode.dcount.v = 2  # leaf reference + the owner's pending ascent
        dnode.delpred = pred1
        dnode.delpred_node = pn1
        dnode.delpred2 = -1
        dnode.latest_next.v = inode

        # The insert that owns ``inode`` may not have finished telling
        # in-flight queries about it; do it on its behalf before
        # displacing it.
        if inode.unext.v[1] != MARKED:
            self._notify(ctx, inode)

        old = self.latest[x].cas(inode, dnode)
        if old is not inode:
            ctx.del_node = dnode
            winner = self.latest[x].v
            if winner.latest_next.v is inode:
                self._activate(ctx, winner)
            self.pall.remove(pn1)
            self.domain.reclaim_later(ctx.pid, pn1)
            return False
        ctx.del_node = None
        self._activate(ctx, dnode)

        tgt = inode.target
        if tgt is not None and self._first_active(inode.target_key) is tgt:
            tgt.stop = True  # performance hint for the stalled remove

        pn2 = PredecessorNode(x, self.ruall.head)
        dnode.delpred2 = self._predecessor_impl(ctx, x, pn2)

        # Try to turn off interpreted bits up the root path.
        leaf = self.universe + x
        tnodes = self.tnodes
        dom = self.domain
        pid = ctx.pid
        lower1 = dnode.lower1
        full = (1 << (k + 1)) - 1
        for h in range(1, k + 1):
            idx = leaf >> h
            t = tnodes[idx]
            left = idx << 1
            right = left | 1
            done = False
            installed = False
            for _attempt in (0, 1):
                if (
                    dnode.stop
                    or lower1.word != full
                    or self._int_bit(left)
                    or self._int_bit(right)
                    or self._first_active(x) is not dnode
                ):
                    done = True
                    break
                dnode.dcount.add(1)
                old_d = t.v
                if t.cas(old_d, dnode) is old_d:
                    dom.dcount_adjust(pid, old_d, -1)
                    if not (self._int_bit(left) or self._int_bit(right)):
                        dnode.upper0 = h
                    installed = True
                    break
                dom.dcount_adjust(pid, dnode, -1)  # cancel the increment
            if done or not installed:
                break

        self._notify(ctx, dnode)
        self.uall.remove(dnode)
        self.ruall.remove(dnode)
        dom.dcount_adjust(pid, dnode, -1)  # ascent finished for good
        self.pall.remove(pn1)
        dom.reclaim_later(pid, pn1)
        self.pall.remove(pn2)
        dom.reclaim_later(pid, pn2)
        return True

    def _reset_update(self, node, x: int) -> None:
        """Recycle a record that lost its placement CAS (still private)."""
        node.key = x
        node.state = INACTIVE
        node.unext.v = (None, NORMAL)
        node.ubl.v = None
        node.rnext.v = (None, NORMAL)
        node.rbl.v = None

    # -- interpreted bits ----------------------------------------------------

    def _int_bit(self, idx: int) -> int:
        """Interpreted bit of heap slot ``idx`` (internal node or leaf)."""
        if idx >= self.universe:
            return 1 if self._first_active(idx - self.universe).ntype == INS else 0
        dn0 = self.tnodes[idx].v
        if dn0.poisoned:
            note_poison_hit(dn0)
        fa = self._first_active(dn0.key)
        if fa.ntype == INS:
            return 1
        h = self.k - idx.bit_length() + 1
        if h >= fa.lower1.min_read() or h > fa.upper0:
            return 1
        return 0

    def _relaxed_pred(self, x: int):
        """Sequential predecessor walk over interpreted bits."""
        size = self.universe
        leaf = size + x
        int_bit = self._int_bit
        for h in range(1, self.k + 1):
            if not (x >> (h - 1)) & 1:
                continue  # x lies in the left subtree: nothing smaller here
            left = (leaf >> h) << 1
            if not int_bit(left):
                continue
            cur = left
            while cur < size:
                right = (cur << 1) | 1
                if int_bit(right):
                    cur = right
                    continue
                lchild = cur << 1
                if int_bit(lchild):
                    cur = lchild
                    continue
                return BOTTOM  # a concurrent remove tore the path
            return cur - size
        return -1

    # -- notification ----------------------------------------------------------

    def _take_notify(self, ctx) -> NotifyNode:
        pool = ctx.notify_pool
        return pool.pop() if pool else NotifyNode()

    def _notify(self, ctx, u) -> None:
        """Tell every in-flight predecessor query about ``u``.

        Runs only while ``u`` stays the first active record for its key;
        a displaced record's story is over and its notify record goes back
        to the pool for a later update."""
        key = u.key
        if self._first_active(key) is not u:
            return
        ikeys = []
        uall = self.uall
        n = uall.first()
        while n is not None:
            if n.ntype == INS and self._first_active(n.key) is n:
                ikeys.append(n.key)
            n = uall.read_next(n)
        pall = self.pall
        ruall = self.ruall
        pnode = pall.first()
        while pnode is not None:
            if self._first_active(key) is not u:
                return
            nn = self._take_notify(ctx)
            nn.update_node = u
            nn.key = key
            i = bisect_left(ikeys, pnode.key)
            nn.update_node_max = ikeys[i - 1] if i else -1
            nn.threshold = cursor_read(pnode, ruall).key
            head_cell = pnode.notify_head
            while True:
                trace_point("trie.notify_push", pnode)
                head = head_cell.v
                nn.next = head
                if head_cell.cas(head, nn) is head:
                    break
                if self._first_active(key) is not u:
                    ctx.notify_pool.append(nn)
                    return
            pnode = pall.read_next(pnode)

    # -- predecessor -------------------------------------------------------------

    def _predecessor_impl(self, ctx, x: int, pnode) -> int:
        pall = self.pall
        ruall = self.ruall
        pall.insert(pnode)

        # Queries announced before ours, most recently inserted first.
        pall_seen = []
        q = pall.read_next(pnode)
        while q is not None:
            pall_seen.append(q)
            q = pall.read_next(q)

        # Walk the descending announcement list through our cursor,
        # keeping the in-flight updates of smaller keys that currently
        # define their key's membership.
        i_ruall = []
        d_ruall = []
        rtail = ruall.tail
        u = cursor_copy_next(pnode, ruall.head, ruall)
        while u is not rtail:
            if u.poisoned:
                note_poison_hit(u)
            if u.key < x and self._first_active(u.key) is u:
                (i_ruall if u.ntype == INS else d_ruall).append(u)
            u = cursor_copy_next(pnode, u, ruall)

        r = self._relaxed_pred(x)

        # Ascending announcement list: best insert and remove keys < x.
        imax_uall = dmax_uall = -1
        d_ruall_ids = {id(d) for d in d_ruall}
        uall = self.uall
        n = uall.first()
        while n is not None:
            nk = n.key
            if nk >= x:
                break  # sorted ascending: nothing smaller further on
            if self._first_active(nk) is n:
                if n.ntype == INS:
                    if nk > imax_uall:
                        imax_uall = nk
                elif id(n) not in d_ruall_ids and nk > dmax_uall:
                    dmax_uall = nk
            n = uall.read_next(n)

        # Our own notify stack.
        imax_n = dmax_n = -1
        i_ruall_ids = {id(i) for i in i_ruall}
        nn = pnode.notify_head.v
        while nn is not None:
            nk = nn.key
            if nk < x:
                un = nn.update_node
                if un.ntype == INS:
                    if nn.threshold <= nk and nk > imax_n:
                        imax_n = nk
                elif nn.threshold < nk and nk > dmax_n:
                    dmax_n = nk
                if (
                    nn.threshold == KEY_NEG_INF
                    and id(un) not in i_ruall_ids
                    and id(un) not in d_ruall_ids
                    and nn.update_node_max > imax_n
                ):
                    imax_n = nn.update_node_max
            nn = nn.next

        if not d_ruall or r is not BOTTOM:
            base = -1 if r is BOTTOM else r
            return max(base, imax_uall, dmax_uall, imax_n, dmax_n)

        # The walk was torn and removes were in flight: reconstruct a
        # sound answer from the notify history around those removes.
        rprime = self._torn_walk_answer(x, pnode, pall_seen, d_ruall)
        return max(rprime, imax_uall, dmax_uall, imax_n, dmax_n)

    def _torn_walk_answer(self, x, pnode, pall_seen, d_ruall) -> int:
        # The most recently announced query that one of the in-flight
        # removes used for its own embedded predecessor.
        dpn_ids = {id(d.delpred_node) for d in d_ruall}
        anchor = None
        for q in pall_seen:  # encounter order: most recent first
            if id(q) in dpn_ids:
                anchor = q
                break
        l1 = []
        if anchor is not None:
            nn = anchor.notify_head.v
            while nn is not None:
                if nn.key < x:
                    l1.append(nn.update_node)
                nn = nn.next
        lrem_ids = set()
        l2 = []
        nn = pnode.notify_head.v
        while nn is not None:
            if nn.key < x:
                lrem_ids.add(id(nn.update_node))
                if nn.threshold >= nn.key:
                    l2.append(nn.update_node)
            nn = nn.next
        lp = [un for un in reversed(l1) if id(un) not in lrem_ids]
        lp.extend(reversed(l2))
        # Keep a remove announcement only if it is the last word on its key.
        last = {}
        for i, un in enumerate(lp):
            last[un.key] = i
        kept = [un for i, un in enumerate(lp) if un.ntype == INS or last[un.key] == i]
        # Edges key -> second embedded predecessor of that key's remove.
        edges = {}
        for un in kept:
            if un.ntype == DEL:
                edges.setdefault(un.key, set()).add(un.delpred2)
        sources = {d.delpred for d in d_ruall}
        sources.update(un.key for un in kept if un.ntype == INS)
        d_keys = {d.key for d in d_ruall}
        best = -1
        seen = set()
        stack = list(sources)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            outs = edges.get(v)
            if outs:
                stack.extend(outs)
            elif v not in d_keys and v > best:
                best = v
        return best

    # -- quiescent-only helpers ------------------------------------------------

    def quiescent_keys(self):
        """Current membership; only meaningful with no ops in flight."""
        first_active = self._first_active
        return [x for x in range(self.universe) if first_active(x).ntype == INS]
