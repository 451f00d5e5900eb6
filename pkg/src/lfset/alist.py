"""Sorted lock-free announcement lists with multi-inserter support.

The same update record may be handed to ``insert`` by several threads at
once (an updater plus any number of helpers); it must end up in the list
exactly once and, once removed, must never reappear. Plain
Fomitchev-Ruppert insertion cannot promise that, so placement goes
through per-process reusable insertion descriptors: a thread flags the
predecessor with its descriptor's (seq, pid), and whoever resolves the
flag either splices the new record in or, if the record is already
marked, drops the descriptor without inserting. The sequence number makes
stale helper CAS steps harmless.

One implementation serves both directions: the ascending list and the
descending list are two instances over different linkage fields of the
same records. Removal is classic flag/mark/splice with backlinks.

Nothing here frees records; retirement is the callers' business.
"""

from __future__ import annotations

from operator import attrgetter

from .atomics import trace_point
from .nodes import (
    DELFLAG,
    INSFLAG,
    KEY_NEG_INF,
    KEY_POS_INF,
    MARKED,
    NORMAL,
    InsertDescNode,
    UpdateNode,
)
from .reclaim import note_poison_hit


class AnnounceList:
    """One sorted announcement list over a chosen linkage field set.

    ``word_attr``/``backlink_attr`` name the Atomic fields of UpdateNode
    this instance drives (``unext``/``ubl`` or ``rnext``/``rbl``), so the
    ascending and descending lists can coexist on the same records.
    """

    def __init__(self, nprocs: int, word_attr: str = "unext",
                 backlink_attr: str = "ubl", descending: bool = False):
        self._word = attrgetter(word_attr)
        self._bl = attrgetter(backlink_attr)
        self._neg = descending
        self.descs = tuple(InsertDescNode() for _ in range(nprocs))
        hkey, tkey = (KEY_NEG_INF, KEY_POS_INF)
        if descending:
            hkey, tkey = tkey, hkey
        self.head = UpdateNode(hkey, 1, state=1)
        self.tail = UpdateNode(tkey, 1, state=1)
        self._word(self.head).v = (self.tail, NORMAL)

    # -- helping ---------------------------------------------------------

    def help_marked(self, prev, del_node):
        """Splice a marked node out from behind its flagged predecessor.

        Returns prev's (link, state) word whether or not the splice won.
        """
        word = self._word
        del_next = word(del_node).v[0]
        old = word(prev).cas((del_node, DELFLAG), (del_next, NORMAL))
        if old == (del_node, DELFLAG):
            return (del_next, NORMAL)
        return old

    def help_insert(self, prev, seq, pid):
        """Resolve the descriptor placed after ``prev`` by process ``pid``.

        If the descriptor's record was never in the list it is installed
        in the descriptor's place; if it was already marked the
        descriptor is dropped without reinsertion. Stale sequence numbers
        make this a no-op. Returns prev's resulting word.
        """
        word = self._word
        desc = self.descs[pid]
        new_node = desc.new_node
        nxt = desc.next
        if desc.seq != seq:
            return word(prev).v  # that insertion already completed
        old = word(new_node).cas((None, NORMAL), (nxt, NORMAL))
        if old[1] == MARKED:
            new_next = nxt  # record was inserted and removed before: drop
        else:
            new_next = new_node
        old = word(prev).cas(((seq, pid), INSFLAG), (new_next, NORMAL))
        if old == ((seq, pid), INSFLAG):
            return (new_next, NORMAL)
        return old

    def help_remove(self, prev, del_node):
        """Mark ``del_node`` (helping out of any nested flag first) and
        splice it. Returns prev's resulting word.

        The paper-style recursion over chained flags is realized with an
        explicit stack so long chains cannot exhaust the interpreter
        stack.
        """
        word = self._word
        bl = self._bl
        stack = [(prev, del_node)]
        bl(del_node).v = prev
        cur = word(del_node).v
        while True:
            pr, dn = stack[-1]
            nxt, st = cur
            if st == MARKED:
                stack.pop()
                ret = self.help_marked(pr, dn)
                if not stack:
                    return ret
                cur = ret
            elif st == INSFLAG:
                seq, j = nxt
                cur = self.help_insert(dn, seq, j)
            elif st == DELFLAG:
                stack.append((dn, nxt))
                bl(nxt).v = dn
                cur = word(nxt).v
            else:  # NORMAL: try to mark dn
                old = word(dn).cas((nxt, NORMAL), (nxt, MARKED))
                if old == (nxt, NORMAL):
                    cur = (nxt, MARKED)
                else:
                    cur = old

    # -- operations ------------------------------------------------------

    def insert(self, u, pid: int) -> None:
        """Insert ``u`` unless it has ever been in the list before.

        Sorted position: after every record with key <= u.key, so equal
        keys come out oldest first. Any number of threads may call this
        concurrently for the same record.
        """
        word = self._word
        bl = self._bl
        if word(u).v[1] == MARKED:
            return
        desc = self.descs[pid]
        desc.new_node = u
        seq = desc.seq
        neg = self._neg
        ukey = -u.key if neg else u.key
        curr = self.head
        nxt, st = word(curr).v
        while True:
            if st == NORMAL:
                if nxt is u:
                    return
                if nxt.poisoned:
                    note_poison_hit(nxt)
                if (-nxt.key if neg else nxt.key) <= ukey:
                    curr = nxt
                    nxt, st = word(curr).v
                else:
                    if word(u).v[1] == MARKED:
                        return
                    desc.next = nxt
                    old = word(curr).cas((nxt, NORMAL), ((seq, pid), INSFLAG))
                    if old == (nxt, NORMAL):
                        trace_point("alist.desc_placed", u)
                        self.help_insert(curr, seq, pid)
                        desc.seq = seq + 1
                        return
                    nxt, st = old
            elif st == INSFLAG:
                seq2, j = nxt
                nxt, st = self.help_insert(curr, seq2, j)
            elif nxt is u:
                return
            elif st == DELFLAG:
                nxt, st = self.help_remove(curr, nxt)
            else:  # curr is marked: recover via its backlink
                prev = bl(curr).v
                w = word(prev).v
                if w == (curr, DELFLAG):
                    nxt, st = self.help_marked(prev, curr)
                else:
                    nxt, st = w
                curr = prev

    def remove(self, u) -> None:
        """Remove ``u`` if present; no-op once its key region is passed."""
        word = self._word
        bl = self._bl
        neg = self._neg
        ukey = -u.key if neg else u.key
        curr = self.head
        nxt, st = word(curr).v
        while True:
            if st == NORMAL:
                if nxt is not u:
                    if nxt.poisoned:
                        note_poison_hit(nxt)
                    if (-nxt.key if neg else nxt.key) > ukey:
                        return
                    curr = nxt
                    nxt, st = word(curr).v
                else:
                    old = word(curr).cas((u, NORMAL), (u, DELFLAG))
                    if old == (u, NORMAL):
                        self.help_remove(curr, u)
                        return
                    nxt, st = old
            elif st == INSFLAG:
                seq, j = nxt
                nxt, st = self.help_insert(curr, seq, j)
            elif (-nxt.key if neg else nxt.key) > ukey:
                return
            elif st == DELFLAG:
                target = nxt
                nxt, st = self.help_remove(curr, target)
                if target is u:
                    return  # another remover had it flagged; now done
            else:  # curr is marked
                prev = bl(curr).v
                w = word(prev).v
                if w == (curr, DELFLAG):
                    nxt, st = self.help_marked(prev, curr)
                else:
                    nxt, st = w
                curr = prev

    def read_next(self, u):
        """Successor of ``u`` at some instant during the call, or None at
        the tail. Pending descriptors are read through, revalidated by
        sequence number."""
        word = self._word
        descs = self.descs
        nxt, st = word(u).v
        while st == INSFLAG:
            seq, j = nxt
            d = descs[j]
            cand = d.next
            if d.seq == seq:
                nxt = cand
                break
            nxt, st = word(u).v
        if nxt is self.tail:
            return None
        if nxt.poisoned:
            note_poison_hit(nxt)
        return nxt

    def first(self):
        """The record following head, or None when the list is empty."""
        return self.read_next(self.head)

    # -- debug helpers (not part of the concurrent protocol) -------------

    def snapshot(self):
        """Quiescent-only: the records currently in the list, in order."""
        out = []
        word = self._word
        n = word(self.head).v[0]
        while n is not self.tail:
            out.append(n)
            n = word(n).v[0]
        return out
