"""Dynamic reduction: incremental signatures, node merging, domain collapse.

Keeps the live graph of a propagator uniqueness reduced after every
propagation step, and (when full reduction is enabled) also fully reduced
with respect to the *current* domains by turning full-domain single-target
nodes into long edges.  All structure changes go through the propagator's
trail primitives so a backtrack restores them exactly.
"""

from __future__ import annotations

import hashlib

MASK = (1 << 128) - 1


class TabulatedKeys:
    """Deterministic 128-bit mixing keys for incremental set signatures.

    A node signature is the sum (mod 2^128) of ``edge_key(value, child)``
    over its outgoing edges, so single-edge changes update it in O(1).
    ``value_key`` plays the same role for plain value sets (supported-value
    sets and current domains).  Keys are derived from the seed alone, so two
    engines with equal seeds agree regardless of request order.
    """

    __slots__ = ("seed", "_edge", "_value")

    def __init__(self, seed=0):
        self.seed = seed
        self._edge = {}
        self._value = {}

    def _derive(self, tag, payload):
        raw = f"{tag}|{self.seed}|{payload}".encode()
        return int.from_bytes(hashlib.blake2b(raw, digest_size=16).digest(), "big")

    def edge_key(self, value, child):
        key = (value, child)
        got = self._edge.get(key)
        if got is None:
            got = self._edge[key] = self._derive("e", f"{value}|{child}")
        return got

    def value_key(self, value):
        got = self._value.get(value)
        if got is None:
            got = self._value[value] = self._derive("v", value)
        return got


class BoundViolation(AssertionError):
    """An amortized-complexity hard bound was exceeded (indicates a bug)."""


class Reducer:
    """Merge/collapse engine bound to one propagator state."""

    def __init__(self, state):
        self.state = state

    # -- uniqueness reduction ------------------------------------------------

    def run_to_quiescence(self):
        """Drain pending collapses and dirty-node merges until both are empty.

        Collapses for changed domains run first (they shrink what the merge
        pass must scan); merges can put parents into single-target shape and
        thereby queue new collapses, so the two passes alternate.
        """
        st = self.state
        while st.collapse_queue or any(st.dirty_layers):
            if st.cfg.full_reduce:
                self._drain_collapses()
            self._merge_pass()

    def _merge_pass(self):
        """One bottom-up sweep: later layers first, so child sets are final
        before their parents are compared."""
        st = self.state
        for layer in range(st.n, 0, -1):
            bucket = st.dirty_layers[layer]
            if not bucket:
                continue
            for nid in sorted(bucket):
                node = st.nodes.get(nid)
                if node is not None:
                    node.dirty = False
            bucket.clear()
            # full-signature table over every live node of the layer: a dirty
            # node may have become equal to an untouched one
            table = {}
            for nid in sorted(st.layer_nodes[layer]):
                node = st.nodes[nid]
                if not node.live:
                    continue
                entries = table.setdefault(node.sig, [])
                merged = False
                for pos, other_id in enumerate(entries):
                    other = st.nodes[other_id]
                    if not other.live:
                        continue
                    if self._children_equal(node, other):
                        survivor = self.merge_nodes(nid, other_id)
                        if survivor != other_id:
                            entries[pos] = survivor
                        merged = True
                        break
                if not merged:
                    entries.append(nid)

    @staticmethod
    def _children_equal(a, b):
        if len(a.children) != len(b.children):
            return False
        for v, e in a.children.items():
            other = b.children.get(v)
            if other is None or other.dst != e.dst:
                return False
        return True

    def merge_nodes(self, uid, qid):
        """Merge two live same-layer nodes with equal child sets.

        The node with more parents subsumes (ties: smaller id); the
        subsumee's incoming edges are redirected to the survivor and its
        outgoing edges retired without cascades — each child keeps the
        survivor's parallel edge, so no support or skip coverage is lost.
        Returns the surviving node id.
        """
        st = self.state
        u, q = st.nodes[uid], st.nodes[qid]
        if len(u.parents) > len(q.parents):
            survivor, absorbed = u, q
        elif len(u.parents) < len(q.parents):
            survivor, absorbed = q, u
        else:
            survivor, absorbed = (u, q) if u.nid < q.nid else (q, u)
        st.stats.merges += 1
        for e in sorted(absorbed.parents, key=lambda e: (e.src, e.value)):
            self._redirect(e, absorbed, survivor)
        for v in sorted(absorbed.children):
            st.retire_edge(absorbed.children[v])
        st.kill_node(absorbed)
        return survivor.nid

    def _redirect(self, e, old_dst, new_dst):
        """Move one incoming edge between same-layer nodes; the support-list
        cell is reused since source layer and value are unchanged."""
        st = self.state
        p = st.nodes[e.src]
        st.stats.redirects += 1
        st.bump_redirect(e)
        st.set_edge_dst(e, new_dst.nid)
        st.pset_discard(old_dst, e)
        st.pset_add(new_dst, e)
        keys = st.keys
        st.shift_sig(p, keys.edge_key(e.value, new_dst.nid)
                     - keys.edge_key(e.value, old_dst.nid))
        st.dst_count_change(p, old_dst.nid, -1)
        st.dst_count_change(p, new_dst.nid, +1)
        st.mark_dirty(p)

    # -- full reduction on current domains ------------------------------------

    def queue_candidates_for_variable(self, i):
        """Queue the single-target nodes of layer i whose supported value set
        matches the current domain (via the value-set signature index)."""
        st = self.state
        bucket = st.one_target_index.get((i, st.domain_sigs[i]))
        if bucket:
            st.collapse_queue.update(bucket)

    def _drain_collapses(self):
        st = self.state
        while st.collapse_queue:
            nid = min(st.collapse_queue, key=lambda x: (-st.nodes[x].layer, x))
            st.collapse_queue.discard(nid)
            node = st.nodes[nid]
            if not node.live or not node.one_target:
                continue
            if set(node.children) != st.domains[node.layer]:
                continue  # signature shortlist; confirm exactly
            self._collapse(node)

    def _collapse(self, u):
        """Replace a full-domain single-target node by long edges.

        Every incoming edge is extended to the unique child (same source
        layer and value, so the support cell is reused); the node's own
        edges are retired.  The freed values stay covered because the
        extended edges skip this layer.
        """
        st = self.state
        keys = st.keys
        c = st.nodes[next(iter(u.children.values())).dst]
        st.stats.collapses += 1
        for e in sorted(u.parents, key=lambda e: (e.src, e.value)):
            p = st.nodes[e.src]
            if u.layer - p.layer > 1:
                st.skip_count_change(p.layer + 1, u.layer - 1, -1)
            st.skip_count_change(p.layer + 1, c.layer - 1, +1)
            st.set_edge_dst(e, c.nid)
            st.pset_discard(u, e)
            st.pset_add(c, e)
            st.shift_sig(p, keys.edge_key(e.value, c.nid)
                         - keys.edge_key(e.value, u.nid))
            st.dst_count_change(p, u.nid, -1)
            st.dst_count_change(p, c.nid, +1)
            st.mark_dirty(p)
        for v in sorted(u.children):
            st.retire_edge(u.children[v])
        st.kill_node(u)
        if st.root_id == u.nid:
            st.move_root(c.nid)
