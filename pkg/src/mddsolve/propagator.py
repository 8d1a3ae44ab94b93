"""Incremental GAC propagator over one compiled diagram.

State per constraint: a mutable copy of the diagram's adjacency, doubly
linked support lists per (variable, value), counters and per-layer max-heaps
over the intervals skipped by live long edges, current and supported value
sets, and an inverse-operation trail so one phase can be undone exactly.

The ``remove`` cascade follows the classic invalidate-and-propagate scheme:
edges losing their source value are unlinked; a node with no outgoing edges
invalidates its incoming edges, a node with no incoming edges its outgoing
ones.  Long edges crossing a restricted layer are deliberately left alone —
the values they over-support were removed from the current domain by the
caller, so reporting stays exact.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .mdd import Mdd, MddError, Node
from .reduction import MASK, BoundViolation, Reducer, TabulatedKeys


class StateError(MddError):
    """Operation not permitted in the current propagator state."""


@dataclass
class PropagatorConfig:
    full_reduce: bool = True
    validate_invariants: bool = False
    hash_seed: int = 0


@dataclass
class PropagatorStats:
    """Cumulative instrumentation; never rewound by backtracking."""
    remove_edge_calls: int = 0
    edges_retired: int = 0
    merges: int = 0
    redirects: int = 0
    collapses: int = 0
    entailments: int = 0
    fails: int = 0

    def as_dict(self):
        return {
            "remove_edge_calls": self.remove_edge_calls,
            "edges_retired": self.edges_retired,
            "merges": self.merges,
            "redirects": self.redirects,
            "collapses": self.collapses,
            "entailments": self.entailments,
            "fails": self.fails,
        }


class _Edge:
    """Live edge; doubles as its own support-list cell (sup_prev/sup_next)."""

    __slots__ = ("src", "dst", "value", "live", "sup_prev", "sup_next", "redirects")

    def __init__(self, src, dst, value):
        self.src = src
        self.dst = dst
        self.value = value
        self.live = True
        self.sup_prev = None
        self.sup_next = None
        self.redirects = 0

    def __repr__(self):
        return f"Edge({self.src}->{self.dst}, v={self.value}, live={self.live})"


class _PNode:
    """Mutable node of the live graph."""

    __slots__ = ("nid", "layer", "children", "parents", "live", "sig", "vsig",
                 "dst_count", "one_target", "dirty")

    def __init__(self, nid, layer):
        self.nid = nid
        self.layer = layer
        self.children = {}    # value -> _Edge
        self.parents = set()  # {_Edge}
        self.live = True
        self.sig = 0          # sum of edge keys over children (mod 2^128)
        self.vsig = 0         # sum of value keys over children values
        self.dst_count = {}   # child node id -> number of parallel edges
        self.one_target = False
        self.dirty = False


def _sentinel():
    s = _Edge(None, None, None)
    s.sup_prev = s
    s.sup_next = s
    return s


class Propagator:
    """GAC engine for one diagram; build with :meth:`Propagator.init`."""

    def __init__(self):
        raise TypeError("use Propagator.init(mdd, domains, config)")

    # -- construction ---------------------------------------------------------

    @classmethod
    def init(cls, mdd: Mdd, domains=None, config: PropagatorConfig | None = None):
        """Copy the diagram, build all incremental structures, then run the
        initial propagation against the given domains (defaults to the
        compile-time domains).  Check ``failed`` afterwards; the pruning the
        diagram performed on top of the given domains is in
        ``initial_pruned``."""
        self = object.__new__(cls)
        self.cfg = config or PropagatorConfig()
        self.keys = TabulatedKeys(self.cfg.hash_seed)
        self.reducer = Reducer(self)
        self.stats = PropagatorStats()
        self.n = mdd.n
        self.domains = mdd.domains  # compile-time, 1-based
        self.trail = []
        self.failed = False
        self.entailed = False
        self.dirty_layers = [set() for _ in range(self.n + 2)]
        self.collapse_queue = set()
        self.pending_unsupported = []
        self.in_reduction = False
        self.branch_removed = 0
        self.initial_pruned = []

        if domains is None:
            given = [set(mdd.domains[i]) for i in range(1, self.n + 1)]
        else:
            given = [set(d) for d in domains]
            if len(given) != self.n:
                raise MddError(f"expected {self.n} domains, got {len(given)}")
            for k, d in enumerate(given):
                if not d <= mdd.domains[k + 1]:
                    raise MddError(f"domain of variable {k + 1} exceeds "
                                   f"the compile-time domain")
        self.D = [None] + given
        self.domain_sigs = [0] * (self.n + 1)
        for i in range(1, self.n + 1):
            s = 0
            for v in self.D[i]:
                s = (s + self.keys.value_key(v)) & MASK
            self.domain_sigs[i] = s

        self.nodes = {}
        self.layer_nodes = [set() for _ in range(self.n + 2)]
        self.layer_counts = [0] * (self.n + 2)
        self.support = {}
        for i in range(1, self.n + 1):
            for v in mdd.domains[i]:
                self.support[(i, v)] = _sentinel()
        self.supported = [None] + [set() for _ in range(self.n)]
        self.skip_counts = {}
        self.skip_heaps = [None] + [[] for _ in range(self.n)]
        self.live_edges = 0
        self.one_target_index = {}

        if mdd.failed or any(not d for d in given):
            self.root_id = None
            self.terminal_id = None
            self.initial_edges = 0
            self.initial_nodes = 0
            self.redirect_limit = 0
            self.covered = set()
            self.failed = True
            self.stats.fails += 1
            return self

        self.root_id = mdd.root
        self.terminal_id = mdd.terminal
        for nid in sorted(mdd.nodes):
            src = mdd.nodes[nid]
            node = _PNode(nid, src.layer)
            self.nodes[nid] = node
            self.layer_nodes[src.layer].add(nid)
            self.layer_counts[src.layer] += 1
        for nid in sorted(mdd.nodes):
            src = mdd.nodes[nid]
            node = self.nodes[nid]
            for v in sorted(src.children):
                cid = src.children[v]
                e = _Edge(nid, cid, v)
                node.children[v] = e
                self.nodes[cid].parents.add(e)
                node.sig = (node.sig + self.keys.edge_key(v, cid)) & MASK
                node.vsig = (node.vsig + self.keys.value_key(v)) & MASK
                node.dst_count[cid] = node.dst_count.get(cid, 0) + 1
                self._support_append(e)
                self.supported[node.layer].add(v)
                self.live_edges += 1
                lo, hi = node.layer + 1, self.nodes[cid].layer - 1
                if lo <= hi:
                    self._skip_count_raw(lo, hi, +1)
        for node in self.nodes.values():
            if node.nid != self.terminal_id and len(node.dst_count) == 1:
                node.one_target = True
                self.one_target_index.setdefault(
                    (node.layer, node.vsig), set()).add(node.nid)
        root_layer = self.nodes[self.root_id].layer
        if root_layer > 1:
            self._skip_count_raw(1, root_layer - 1, +1)

        self.initial_edges = self.live_edges
        self.initial_nodes = len(self.nodes)
        self.redirect_limit = max(2, self.initial_nodes).bit_length() - 1
        if 2 ** self.redirect_limit < max(2, self.initial_nodes):
            self.redirect_limit += 1

        # initial propagation: everything absent from the given domains is
        # treated as already removed; starting from full coverage makes the
        # first coverage sweep prune every unsupported value
        self.covered = set(range(1, self.n + 1))
        pruned = self.remove(
            [(i, v) for i in range(1, self.n + 1)
             for v in sorted(mdd.domains[i] - self.D[i])])
        self.initial_pruned = pruned if pruned is not None else []
        return self

    def _support_append(self, e):
        head = self.support[(self.nodes[e.src].layer, e.value)]
        last = head.sup_prev
        e.sup_prev, e.sup_next = last, head
        last.sup_next = e
        head.sup_prev = e

    def _skip_count_raw(self, lo, hi, delta):
        key = (lo, hi)
        old = self.skip_counts.get(key, 0)
        new = old + delta
        if new:
            self.skip_counts[key] = new
        else:
            self.skip_counts.pop(key, None)
        if old == 0 and new > 0:
            heapq.heappush(self.skip_heaps[lo], -hi)

    # -- trail primitives ------------------------------------------------------
    # Every mutation pushes one inverse record; pop_to_mark undoes them in
    # LIFO order, which in particular re-splices list cells correctly.

    def push_phase(self):
        self._assert_quiescent()
        self.trail.append(("MARK", self.branch_removed, self.failed,
                           self.entailed, self.root_id))

    def backtrack(self):
        """Rewind every structure to the state at the last phase mark."""
        trail = self.trail
        while trail:
            rec = trail.pop()
            tag = rec[0]
            if tag == "MARK":
                self.branch_removed = rec[1]
                self.failed = rec[2]
                self.entailed = rec[3]
                self.root_id = rec[4]
                self.covered = self._recompute_covered()
                if self.cfg.validate_invariants:
                    self.validate()
                return
            self._undo(rec)
        raise StateError("backtrack without an open phase")

    def _undo(self, rec):
        tag = rec[0]
        if tag == "D":
            _, i, v = rec
            self.D[i].add(v)
            self.domain_sigs[i] = (self.domain_sigs[i] + self.keys.value_key(v)) & MASK
        elif tag == "DS":
            _, i, v = rec
            self.supported[i].add(v)
        elif tag == "UNL":
            e = rec[1]
            e.sup_prev.sup_next = e
            e.sup_next.sup_prev = e
        elif tag == "ELIVE":
            rec[1].live = True
            self.live_edges += 1
        elif tag == "NLIVE":
            node = rec[1]
            node.live = True
            self.layer_nodes[node.layer].add(node.nid)
            self.layer_counts[node.layer] += 1
        elif tag == "CDEL":
            _, node, v, e = rec
            node.children[v] = e
        elif tag == "PADD":
            _, node, e = rec
            node.parents.discard(e)
        elif tag == "PDIS":
            _, node, e = rec
            node.parents.add(e)
        elif tag == "EDST":
            _, e, old = rec
            e.dst = old
        elif tag == "SIG":
            _, node, old = rec
            node.sig = old
        elif tag == "VSIG":
            _, node, old = rec
            node.vsig = old
        elif tag == "DSTC":
            _, node, dst, old = rec
            if old:
                node.dst_count[dst] = old
            else:
                node.dst_count.pop(dst, None)
        elif tag == "VR":
            _, node, old = rec
            node.one_target = old
        elif tag == "VRT":
            _, key, nid, added = rec
            if added:
                bucket = self.one_target_index.get(key)
                if bucket is not None:
                    bucket.discard(nid)
                    if not bucket:
                        del self.one_target_index[key]
            else:
                self.one_target_index.setdefault(key, set()).add(nid)
        elif tag == "CNT":
            _, key, old = rec
            if old:
                self.skip_counts[key] = old
            else:
                self.skip_counts.pop(key, None)
        elif tag == "HPOP":
            _, lo, hi = rec
            heapq.heappush(self.skip_heaps[lo], -hi)
        elif tag == "ERED":
            _, e, old = rec
            e.redirects = old
        else:  # pragma: no cover - exhaustive above
            raise AssertionError(f"unknown trail record {tag}")

    def _assert_quiescent(self):
        if self.collapse_queue or any(self.dirty_layers):
            raise StateError("reduction queues not empty at a phase boundary")

    # trail-aware mutators, shared with the reducer ---------------------------

    def dom_remove(self, i, v):
        self.D[i].discard(v)
        self.domain_sigs[i] = (self.domain_sigs[i] - self.keys.value_key(v)) & MASK
        self.trail.append(("D", i, v))

    def set_edge_dst(self, e, new_dst):
        self.trail.append(("EDST", e, e.dst))
        e.dst = new_dst

    def pset_add(self, node, e):
        node.parents.add(e)
        self.trail.append(("PADD", node, e))

    def pset_discard(self, node, e):
        node.parents.discard(e)
        self.trail.append(("PDIS", node, e))

    def shift_sig(self, node, delta):
        self.trail.append(("SIG", node, node.sig))
        node.sig = (node.sig + delta) & MASK

    def _shift_vsig(self, node, delta):
        old_key = (node.layer, node.vsig)
        self.trail.append(("VSIG", node, node.vsig))
        node.vsig = (node.vsig + delta) & MASK
        if node.one_target:
            self._index_remove(old_key, node.nid)
            self._index_add((node.layer, node.vsig), node.nid)
            self._maybe_queue_collapse(node)

    def _index_add(self, key, nid):
        self.one_target_index.setdefault(key, set()).add(nid)
        self.trail.append(("VRT", key, nid, True))

    def _index_remove(self, key, nid):
        bucket = self.one_target_index.get(key)
        if bucket is not None:
            bucket.discard(nid)
            if not bucket:
                del self.one_target_index[key]
        self.trail.append(("VRT", key, nid, False))

    def dst_count_change(self, node, dst, delta):
        old = node.dst_count.get(dst, 0)
        self.trail.append(("DSTC", node, dst, old))
        new = old + delta
        if new:
            node.dst_count[dst] = new
        else:
            node.dst_count.pop(dst, None)
        self._refresh_one_target(node)

    def _refresh_one_target(self, node):
        want = (node.live and node.nid != self.terminal_id
                and len(node.dst_count) == 1)
        if want and not node.one_target:
            self.trail.append(("VR", node, False))
            node.one_target = True
            self._index_add((node.layer, node.vsig), node.nid)
            self._maybe_queue_collapse(node)
        elif not want and node.one_target:
            self.trail.append(("VR", node, True))
            node.one_target = False
            self._index_remove((node.layer, node.vsig), node.nid)

    def _maybe_queue_collapse(self, node):
        if self.cfg.full_reduce and node.vsig == self.domain_sigs[node.layer]:
            self.collapse_queue.add(node.nid)

    def skip_count_change(self, lo, hi, delta):
        key = (lo, hi)
        old = self.skip_counts.get(key, 0)
        self.trail.append(("CNT", key, old))
        new = old + delta
        assert new >= 0, "skip counter went negative"
        if new:
            self.skip_counts[key] = new
        else:
            self.skip_counts.pop(key, None)
        if old == 0 and new > 0:
            # push without an undo record: a stale or duplicate heap entry is
            # harmless under lazy deletion, unlike a missing one
            heapq.heappush(self.skip_heaps[lo], -hi)

    def bump_redirect(self, e):
        self.trail.append(("ERED", e, e.redirects))
        e.redirects += 1
        if e.redirects > self.redirect_limit:
            raise BoundViolation(
                f"edge redirected {e.redirects} times, limit {self.redirect_limit}")

    def mark_dirty(self, node):
        if node.live and not node.dirty:
            node.dirty = True
            self.dirty_layers[node.layer].add(node.nid)

    def kill_node(self, node):
        self.trail.append(("NLIVE", node))
        node.live = False
        self.layer_nodes[node.layer].discard(node.nid)
        self.layer_counts[node.layer] -= 1
        if node.dirty:
            node.dirty = False
            self.dirty_layers[node.layer].discard(node.nid)
        self.collapse_queue.discard(node.nid)
        self._refresh_one_target(node)

    def move_root(self, new_root):
        old = self.nodes[self.root_id]
        if old.layer > 1:
            self.skip_count_change(1, old.layer - 1, -1)
        new_layer = self.nodes[new_root].layer
        if new_layer > 1:
            self.skip_count_change(1, new_layer - 1, +1)
        self.root_id = new_root  # restored from the phase mark on backtrack

    def retire_edge(self, e, count_branch=False):
        """Unlink one live edge from every structure (no cascades)."""
        self.stats.edges_retired += 1
        if count_branch:
            self.branch_removed += 1
            if self.branch_removed > self.initial_edges:
                raise BoundViolation(
                    f"{self.branch_removed} edge removals on one branch exceed "
                    f"the initial edge count {self.initial_edges}")
        u = self.nodes[e.src]
        c = self.nodes[e.dst]
        # unlink the support cell; prev/next stay valid for the undo splice
        e.sup_prev.sup_next = e.sup_next
        e.sup_next.sup_prev = e.sup_prev
        self.trail.append(("UNL", e))
        head = self.support[(u.layer, e.value)]
        if head.sup_next is head and e.value in self.supported[u.layer]:
            self.supported[u.layer].discard(e.value)
            self.trail.append(("DS", u.layer, e.value))
            if not self.in_reduction:
                self.pending_unsupported.append((u.layer, e.value))
        self.trail.append(("ELIVE", e))
        e.live = False
        self.live_edges -= 1
        del u.children[e.value]
        self.trail.append(("CDEL", u, e.value, e))
        self.pset_discard(c, e)
        self.shift_sig(u, -self.keys.edge_key(e.value, c.nid))
        self._shift_vsig(u, -self.keys.value_key(e.value))
        self.dst_count_change(u, c.nid, -1)
        lo, hi = u.layer + 1, c.layer - 1
        if lo <= hi:
            self.skip_count_change(lo, hi, -1)

    # -- the Remove operation --------------------------------------------------

    def remove(self, pairs):
        """Apply restrictions ``(variable, value)`` and re-establish GAC.

        Returns the sorted list of additional (variable, value) prunings the
        diagram itself derived, for the host's fixpoint loop, or None when a
        domain wiped out (state flagged failed; backtrackable).  Values
        already absent are ignored silently.
        """
        if self.failed:
            raise StateError("remove on a failed state")
        structure_dead = False
        changed = set()
        for i, v in pairs:
            if (i, v) not in self.support:
                raise MddError(f"({i}, {v}) is not a compile-time assignment")
            if v in self.D[i]:
                self.dom_remove(i, v)
                changed.add(i)
            head = self.support[(i, v)]
            while head.sup_next is not head:
                if self._remove_edge(head.sup_next):
                    structure_dead = True

        fresh = self._recompute_covered()
        newly = []
        for layer in sorted(self.covered - fresh):
            for v in sorted(self.D[layer] - self.supported[layer]):
                self.dom_remove(layer, v)
                newly.append((layer, v))
                changed.add(layer)
        for i, v in self.pending_unsupported:
            if i not in fresh and v in self.D[i]:
                self.dom_remove(i, v)
                newly.append((i, v))
                changed.add(i)
        self.pending_unsupported.clear()
        self.covered = fresh

        if structure_dead or any(not self.D[i] for i in range(1, self.n + 1)):
            self.failed = True  # restored from the phase mark on backtrack
            self.stats.fails += 1
            for bucket in self.dirty_layers:
                bucket.clear()
            for node in self.nodes.values():
                node.dirty = False
            self.collapse_queue.clear()
            return None

        self.in_reduction = True
        try:
            if self.cfg.full_reduce:
                for i in sorted(changed):
                    self.reducer.queue_candidates_for_variable(i)
            self.reducer.run_to_quiescence()
        finally:
            self.in_reduction = False
            self.pending_unsupported.clear()
        self.covered = self._recompute_covered()
        self._update_entailed()
        if self.cfg.validate_invariants:
            self.validate()
        return sorted(newly)

    def assign(self, i, v):
        """Restrict variable i to value v; same contract as :meth:`remove`."""
        if self.failed:
            raise StateError("assign on a failed state")
        if v not in self.D[i]:
            raise MddError(f"value {v} not in the current domain of variable {i}")
        return self.remove([(i, w) for w in sorted(self.D[i]) if w != v])

    def _remove_edge(self, e):
        """Fig-style cascade for one invalidated edge; returns True if the
        root or terminal died (constraint structurally unsatisfiable)."""
        self.stats.remove_edge_calls += 1
        self.retire_edge(e, count_branch=True)
        dead = False
        u = self.nodes[e.src]
        c = self.nodes[e.dst]
        if c.live and not c.parents:
            self.kill_node(c)
            if c.nid == self.terminal_id:
                dead = True
            else:
                for v in sorted(c.children):
                    ce = c.children[v]
                    if ce.live and self._remove_edge(ce):
                        dead = True
        if u.live and not u.children:
            self.kill_node(u)
            if u.nid == self.root_id:
                dead = True
            else:
                for pe in sorted(u.parents, key=lambda x: (x.src, x.value)):
                    if pe.live and self._remove_edge(pe):
                        dead = True
        if u.live:
            self.mark_dirty(u)
        return dead

    def _recompute_covered(self):
        """Layers currently crossed by a live long edge, from the heap tops.

        Stale heap entries (their counter is gone) are purged lazily; each
        purge leaves a re-insert token on the trail because the counter may
        come back on backtrack."""
        covered = set()
        reach = 0
        for lo in range(1, self.n + 1):
            heap = self.skip_heaps[lo]
            while heap:
                hi = -heap[0]
                if self.skip_counts.get((lo, hi), 0) > 0:
                    break
                heapq.heappop(heap)
                self.trail.append(("HPOP", lo, hi))
            if heap:
                reach = max(reach, -heap[0])
            if reach >= lo:
                covered.add(lo)
        return covered

    # -- queries ----------------------------------------------------------------

    def valid_domains(self):
        """Per-variable supported values: the current domain for layers under
        a live long edge, otherwise the support-list-backed values."""
        if self.failed:
            raise StateError("valid_domains on a failed state")
        out = []
        for i in range(1, self.n + 1):
            if i in self.covered:
                out.append(set(self.D[i]))
            else:
                out.append(self.D[i] & self.supported[i])
        return out

    def is_domain_entailed(self):
        """True iff every assignment over the current domains is accepted.

        With full reduction the live graph of an entailed constraint is the
        terminal alone.  In uniqueness-only mode a per-layer count of at most
        one node gates an exact confirmation: each live non-terminal node
        must fan out on its whole current domain to a single target."""
        if self.failed:
            raise StateError("is_domain_entailed on a failed state")
        if self.cfg.full_reduce:
            return all(self.layer_counts[i] == 0 for i in range(1, self.n + 1))
        if any(self.layer_counts[i] > 1 for i in range(1, self.n + 1)):
            return False
        for i in range(1, self.n + 1):
            for nid in self.layer_nodes[i]:
                node = self.nodes[nid]
                if len(node.dst_count) != 1:
                    return False
                if set(node.children) != self.D[i]:
                    return False
        return True

    def _update_entailed(self):
        now = not self.failed and self.is_domain_entailed()
        if now and not self.entailed:
            self.stats.entailments += 1
        self.entailed = now  # restored from the phase mark on backtrack

    def live_mdd(self) -> Mdd:
        """Snapshot the live graph as a compile-level diagram."""
        if self.failed:
            raise StateError("live_mdd on a failed state")
        nodes = {}
        for layer in range(1, self.n + 2):
            for nid in self.layer_nodes[layer]:
                node = Node(nid, layer)
                src = self.nodes[nid]
                node.children = {v: e.dst for v, e in src.children.items()}
                nodes[nid] = node
        for nid, node in nodes.items():
            for v, c in node.children.items():
                nodes[c].parents.add((nid, v))
        return Mdd(self.n, [set(d) for d in self.domains[1:]], nodes,
                   self.root_id, self.terminal_id)

    def deep_state(self):
        """Canonical snapshot of every semantically relevant structure, for
        exact-backtracking comparisons.  Heap arrays are excluded: under lazy
        deletion they may hold stale or duplicate entries whose liveness the
        counters decide."""
        node_view = {}
        for nid, node in self.nodes.items():
            if not node.live:
                continue
            node_view[nid] = (
                node.layer,
                tuple(sorted((v, e.dst) for v, e in node.children.items())),
                tuple(sorted((e.src, e.value) for e in node.parents)),
                node.sig,
                node.vsig,
                node.one_target,
                tuple(sorted(node.dst_count.items())),
            )
        support_view = {}
        for key in sorted(self.support):
            head = self.support[key]
            cells = []
            e = head.sup_next
            while e is not head:
                cells.append((e.src, e.dst, e.value))
                e = e.sup_next
            support_view[key] = tuple(cells)
        return {
            "nodes": node_view,
            "support": support_view,
            "D": tuple(frozenset(d) for d in self.D[1:]),
            "supported": tuple(frozenset(d) for d in self.supported[1:]),
            "domain_sigs": tuple(self.domain_sigs[1:]),
            "skip_counts": dict(self.skip_counts),
            "covered": frozenset(self.covered),
            "layer_counts": tuple(self.layer_counts),
            "one_target_index": {k: frozenset(v) for k, v in
                                 self.one_target_index.items() if v},
            "root": self.root_id,
            "failed": self.failed,
            "entailed": self.entailed,
            "live_edges": self.live_edges,
            "branch_removed": self.branch_removed,
        }

    # -- debug validation --------------------------------------------------------

    def validate(self):
        """Full from-scratch rescan of every incremental structure."""
        if self.failed:
            return
        live_nodes = {nid: n for nid, n in self.nodes.items() if n.live}
        for i in range(1, self.n + 2):
            expect = {nid for nid, n in live_nodes.items() if n.layer == i}
            if expect != self.layer_nodes[i] or len(expect) != self.layer_counts[i]:
                raise AssertionError(f"layer index out of sync at layer {i}")
        edge_count = 0
        expected_skips = {}
        root_layer = live_nodes[self.root_id].layer
        if root_layer > 1:
            expected_skips[(1, root_layer - 1)] = 1
        for nid, node in live_nodes.items():
            sig = 0
            vsig = 0
            dstc = {}
            for v, e in node.children.items():
                if not e.live or e.src != nid or e.value != v:
                    raise AssertionError(f"edge bookkeeping broken at node {nid}")
                if e not in self.nodes[e.dst].parents:
                    raise AssertionError(f"parent set missing edge {e}")
                sig = (sig + self.keys.edge_key(v, e.dst)) & MASK
                vsig = (vsig + self.keys.value_key(v)) & MASK
                dstc[e.dst] = dstc.get(e.dst, 0) + 1
                edge_count += 1
                lo, hi = node.layer + 1, self.nodes[e.dst].layer - 1
                if lo <= hi:
                    expected_skips[(lo, hi)] = expected_skips.get((lo, hi), 0) + 1
            if sig != node.sig or vsig != node.vsig or dstc != node.dst_count:
                raise AssertionError(f"signature drift at node {nid}")
            for e in node.parents:
                if not e.live or e.dst != nid:
                    raise AssertionError(f"stale parent edge at node {nid}")
            if node.nid != self.terminal_id and not node.children:
                raise AssertionError(f"live node {nid} without outgoing edges")
            if node.nid != self.root_id and not node.parents:
                raise AssertionError(f"live node {nid} without incoming edges")
            want_vr = node.nid != self.terminal_id and len(node.dst_count) == 1
            if node.one_target != want_vr:
                raise AssertionError(f"single-target flag wrong at node {nid}")
            if want_vr:
                bucket = self.one_target_index.get((node.layer, node.vsig), set())
                if nid not in bucket:
                    raise AssertionError(f"single-target index missing node {nid}")
        if edge_count != self.live_edges:
            raise AssertionError("live edge count out of sync")
        if expected_skips != self.skip_counts:
            raise AssertionError("skip counters out of sync")
        for key, bucket in self.one_target_index.items():
            for nid in bucket:
                node = self.nodes[nid]
                if not (node.live and node.one_target
                        and (node.layer, node.vsig) == key):
                    raise AssertionError("stale single-target index entry")
        for (i, v), head in self.support.items():
            cells = []
            e = head.sup_next
            while e is not head:
                if not e.live or self.nodes[e.src].layer != i or e.value != v:
                    raise AssertionError(f"support list ({i},{v}) holds a bad cell")
                cells.append(e)
                e = e.sup_next
            lives = [e for node in live_nodes.values() if node.layer == i
                     for e in [node.children.get(v)] if e is not None]
            if len(cells) != len(lives) or set(map(id, cells)) != set(map(id, lives)):
                raise AssertionError(f"support list ({i},{v}) out of sync")
            if (v in self.supported[i]) != bool(cells):
                raise AssertionError(f"supported-value set wrong at ({i},{v})")
        covered = set()
        for (lo, hi), cnt in self.skip_counts.items():
            if cnt > 0:
                covered.update(range(lo, hi + 1))
        if covered != self.covered:
            raise AssertionError("covered-layer set out of sync")
        # uniqueness at quiescence
        if not any(self.dirty_layers) and not self.collapse_queue:
            for i in range(1, self.n + 1):
                seen = {}
                for nid in self.layer_nodes[i]:
                    key = tuple(sorted((v, e.dst) for v, e in
                                       self.nodes[nid].children.items()))
                    if key in seen:
                        raise AssertionError(
                            f"nodes {seen[key]} and {nid} of layer {i} "
                            f"have equal child sets")
                    seen[key] = nid
                if self.cfg.full_reduce:
                    for nid in self.layer_nodes[i]:
                        node = self.nodes[nid]
                        if node.one_target and set(node.children) == self.D[i]:
                            raise AssertionError(
                                f"node {nid} should have been collapsed")
