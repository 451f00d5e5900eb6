"""Announcement list for predecessor queries, plus the position cursor.

The query list is an unsorted Fomitchev-Ruppert linked list: each query
record is pushed right behind the head by its owner, so traversal order
is most recent first. Only the owner inserts or removes its record, hence
no insertion descriptors are needed; the flag/mark/splice removal with
backlinks is the same as in the sorted lists.

``cursor_copy_next``/``cursor_read`` implement the single-writer atomic
copy of a record's successor in the descending announcement list into the
query's cursor word. The owner signals the copy by writing (node, 1);
either the owner or any reader resolves the successor (reading through
pending insertion descriptors) and lands it with a CAS back to copying=0.
Since the cursor only ever advances along successor chains, a bare
pointer word is ABA-safe here.
"""

from __future__ import annotations

from .atomics import trace_point
from .nodes import DELFLAG, INSFLAG, MARKED, NORMAL, PredecessorNode
from .reclaim import note_poison_hit


class PredecessorList:
    def __init__(self):
        self.head = PredecessorNode(-1, None)
        self.tail = PredecessorNode(-2, None)
        self.head.succ.v = (self.tail, NORMAL)

    # -- helping ----------------------------------------------------------

    def help_marked(self, prev, del_node):
        del_next = del_node.succ.v[0]
        old = prev.succ.cas((del_node, DELFLAG), (del_next, NORMAL))
        if old == (del_node, DELFLAG):
            return (del_next, NORMAL)
        return old

    def help_remove(self, prev, del_node):
        stack = [(prev, del_node)]
        del_node.backlink.v = prev
        cur = del_node.succ.v
        while True:
            pr, dn = stack[-1]
            nxt, st = cur
            if st == MARKED:
                stack.pop()
                ret = self.help_marked(pr, dn)
                if not stack:
                    return ret
                cur = ret
            elif st == DELFLAG:
                stack.append((dn, nxt))
                nxt.backlink.v = dn
                cur = nxt.succ.v
            else:  # NORMAL
                old = dn.succ.cas((nxt, NORMAL), (nxt, MARKED))
                if old == (nxt, NORMAL):
                    cur = (nxt, MARKED)
                else:
                    cur = old

    # -- owner operations ---------------------------------------------------

    def insert(self, pnode) -> None:
        """Push the owner's record immediately after the head."""
        head = self.head
        while True:
            nxt, st = head.succ.v
            if st == NORMAL:
                pnode.succ.v = (nxt, NORMAL)  # pnode still private
                old = head.succ.cas((nxt, NORMAL), (pnode, NORMAL))
                if old == (nxt, NORMAL):
                    return
            else:  # DELFLAG: first record is being removed, help out
                self.help_remove(head, nxt)

    def remove(self, pnode) -> None:
        """Owner-only removal of a record it previously inserted."""
        curr = self.head
        nxt, st = curr.succ.v
        while True:
            if st == NORMAL:
                if nxt is pnode:
                    old = curr.succ.cas((pnode, NORMAL), (pnode, DELFLAG))
                    if old == (pnode, NORMAL):
                        self.help_remove(curr, pnode)
                        return
                    nxt, st = old
                elif nxt is self.tail:
                    return
                else:
                    if nxt.poisoned:
                        note_poison_hit(nxt)
                    curr = nxt
                    nxt, st = curr.succ.v
            elif st == DELFLAG:
                target = nxt
                nxt, st = self.help_remove(curr, target)
                if target is pnode:
                    return
            else:  # curr marked
                prev = curr.backlink.v
                w = prev.succ.v
                if w == (curr, DELFLAG):
                    nxt, st = self.help_marked(prev, curr)
                else:
                    nxt, st = w
                curr = prev

    # -- queries -------------------------------------------------------------

    def read_next(self, pnode):
        """Successor at some instant during the call (frozen at removal
        time for removed records), or None at the tail."""
        nxt = pnode.succ.v[0]
        if nxt is self.tail:
            return None
        if nxt.poisoned:
            note_poison_hit(nxt)
        return nxt

    def first(self):
        return self.read_next(self.head)

    def snapshot(self):
        """Quiescent-only: current records, most recent first."""
        out = []
        n = self.head.succ.v[0]
        while n is not self.tail:
            out.append(n)
            n = n.succ.v[0]
        return out


# -- the ruallPosition cursor -------------------------------------------------


def _resolve_next(unode, ruall):
    """Successor of ``unode`` in the descending list, reading through any
    pending insertion descriptor (revalidated by sequence number)."""
    word = ruall._word
    descs = ruall.descs
    nxt, st = word(unode).v
    while st == INSFLAG:
        seq, j = nxt
        d = descs[j]
        cand = d.next
        if d.seq == seq:
            nxt = cand
            break
        nxt, st = word(unode).v
    return nxt


def cursor_copy_next(pnode, unode, ruall):
    """Owner-only: advance the cursor from ``unode`` to its successor,
    atomically; returns the successor that actually landed (a concurrent
    reader may have completed the copy first)."""
    data = pnode.cursor
    data.store((unode, 1))
    trace_point("cursor.copy_started", pnode)
    nxt = _resolve_next(unode, ruall)
    old = data.cas((unode, 1), (nxt, 0))
    if old == (unode, 1):
        return nxt
    return old[0]


def cursor_read(pnode, ruall):
    """Current cursor value; helps complete an in-progress copy first."""
    ptr, copying = pnode.cursor.v
    if not copying:
        return ptr
    nxt = _resolve_next(ptr, ruall)
    old = pnode.cursor.cas((ptr, 1), (nxt, 0))
    if old == (ptr, 1):
        return nxt
    return old[0]
