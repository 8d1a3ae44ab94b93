"""Layered multi-valued decision diagram (MDD) model and compile-time operations.

A constraint over variables x_1..x_n with finite integer domains is stored as
a layered DAG with one root, one terminal (layer n+1) and value-labelled
edges.  An edge leaving layer i carries a value of D_i; an edge that jumps
more than one layer ("long edge") leaves the skipped variables unconstrained.
A diagram is *uniqueness reduced* when no two nodes of a layer have the same
outgoing edge set, and *fully reduced* when additionally no node fans out on
its entire domain to a single child.  Fully reduced diagrams are canonical
for a fixed variable order, which the tests rely on.

Variable indices are 1-based everywhere (matching the text formats); plain
sequences such as ``domains`` and solution tuples are positional, i.e.
``domains[k]`` belongs to variable ``k+1``.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Optional, Sequence


class MddError(Exception):
    """Base class for diagram construction and usage errors."""


class ParseError(MddError):
    """Malformed text input; carries the offending 1-based line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(MddError):
    """A structural invariant of a diagram does not hold."""


class Node:
    """One diagram node: a layer plus value-keyed outgoing edges."""

    __slots__ = ("nid", "layer", "children", "parents")

    def __init__(self, nid, layer):
        self.nid = nid
        self.layer = layer
        self.children = {}   # value -> child node id (values distinct per node)
        self.parents = set()  # {(parent id, value)}

    def __repr__(self):
        return f"Node({self.nid}, layer={self.layer}, out={len(self.children)})"


class Mdd:
    """Immutable-by-convention compiled diagram.

    ``failed`` marks the unsatisfiable constraint: no nodes, no root.  All
    other diagrams have exactly one root (unique node of the minimum occupied
    layer) and one terminal at layer n+1; ``root is terminal`` encodes the
    constant-true constraint.
    """

    __slots__ = ("n", "domains", "nodes", "root", "terminal", "failed")

    def __init__(self, n, domains, nodes, root, terminal, failed=False):
        self.n = n
        # index 0 unused so that domains[i] belongs to variable/layer i
        self.domains = (None,) + tuple(frozenset(d) for d in domains)
        self.nodes = nodes
        self.root = root
        self.terminal = terminal
        self.failed = failed

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_edges(self):
        return sum(len(u.children) for u in self.nodes.values())

    def edges(self):
        """Yield (src id, dst id, value) for every edge, sorted for determinism."""
        for nid in sorted(self.nodes):
            u = self.nodes[nid]
            for v in sorted(u.children):
                yield nid, u.children[v], v

    def long_edges(self):
        """Yield (src, dst, value, lo, hi) for edges skipping layers lo..hi."""
        for src, dst, v in self.edges():
            s, d = self.nodes[src].layer, self.nodes[dst].layer
            if d - s > 1:
                yield src, dst, v, s + 1, d - 1

    def layer_counts(self):
        counts = [0] * (self.n + 2)
        for u in self.nodes.values():
            counts[u.layer] += 1
        return counts

    @property
    def is_terminal_only(self):
        return not self.failed and self.root == self.terminal

    def __repr__(self):
        if self.failed:
            return f"Mdd(n={self.n}, failed)"
        return f"Mdd(n={self.n}, nodes={self.num_nodes}, edges={self.num_edges})"


def _failed_mdd(n, domains):
    return Mdd(n, domains, {}, None, None, failed=True)


def validate_mdd(m: Mdd) -> None:
    """Check every structural invariant; raise ValidationError on the first hit."""
    if m.failed:
        if m.nodes or m.root is not None:
            raise ValidationError("failed diagram must be empty")
        return
    if m.n < 1:
        raise ValidationError("need at least one variable")
    if len(m.domains) != m.n + 1 or any(not d for d in m.domains[1:]):
        raise ValidationError("every variable needs a non-empty domain")
    if not m.nodes:
        raise ValidationError("non-failed diagram must have nodes")
    terminals = [u for u in m.nodes.values() if u.layer == m.n + 1]
    if len(terminals) != 1 or terminals[0].nid != m.terminal:
        raise ValidationError("exactly one terminal required at layer n+1")
    min_layer = min(u.layer for u in m.nodes.values())
    roots = [u for u in m.nodes.values() if u.layer == min_layer]
    if len(roots) != 1 or roots[0].nid != m.root:
        raise ValidationError("exactly one root required at the minimum layer")
    seen_parents = {nid: set() for nid in m.nodes}
    for u in m.nodes.values():
        if not 1 <= u.layer <= m.n + 1:
            raise ValidationError(f"node {u.nid} has layer {u.layer} out of range")
        if u.nid != m.terminal and not u.children:
            raise ValidationError(f"non-terminal node {u.nid} has no outgoing edge")
        if u.nid == m.terminal and u.children:
            raise ValidationError("terminal must not have outgoing edges")
        for v, c in u.children.items():
            if c not in m.nodes:
                raise ValidationError(f"edge from {u.nid} into undeclared node {c}")
            cn = m.nodes[c]
            if cn.layer <= u.layer:
                raise ValidationError(
                    f"edge {u.nid}->{c} does not descend ({u.layer}->{cn.layer})")
            if v not in m.domains[u.layer]:
                raise ValidationError(
                    f"edge {u.nid}->{c} value {v} outside domain of layer {u.layer}")
            seen_parents[c].add((u.nid, v))
    for u in m.nodes.values():
        if u.parents != seen_parents[u.nid]:
            raise ValidationError(f"parent set of node {u.nid} out of sync")
        if u.nid != m.root and not u.parents:
            raise ValidationError(f"node {u.nid} is unreachable (no incoming edge)")


class _Builder:
    """Hash-consing constructor producing fully reduced diagrams.

    ``node`` applies both reduction rules on the fly: merge equal
    (layer, child set) nodes, and collapse a full-domain fan to a single
    child into that child (creating long edges implicitly).
    """

    def __init__(self, n, domains, max_edges=None):
        self.n = n
        self.domains = (None,) + tuple(frozenset(d) for d in domains)
        self.nodes = {}      # id -> (layer, {value: child id})
        self.table = {}      # (layer, frozenset(children.items())) -> id
        self.next_id = 0
        self.num_edges = 0
        self.max_edges = max_edges
        self.terminal = self._alloc(n + 1, {})

    def _alloc(self, layer, children):
        nid = self.next_id
        self.next_id += 1
        self.nodes[nid] = (layer, children)
        self.num_edges += len(children)
        if self.max_edges is not None and self.num_edges > self.max_edges:
            raise MddError(f"edge limit {self.max_edges} exceeded during construction")
        return nid

    def node(self, layer, children):
        if not children:
            raise MddError("internal: node without children")
        targets = set(children.values())
        if len(targets) == 1 and set(children) == self.domains[layer]:
            return next(iter(targets))
        key = (layer, frozenset(children.items()))
        nid = self.table.get(key)
        if nid is None:
            nid = self._alloc(layer, dict(children))
            self.table[key] = nid
        return nid

    def finish(self, root):
        reachable = set()
        stack = [root]
        while stack:
            nid = stack.pop()
            if nid in reachable:
                continue
            reachable.add(nid)
            stack.extend(self.nodes[nid][1].values())
        nodes = {}
        for nid in reachable:
            layer, children = self.nodes[nid]
            node = Node(nid, layer)
            node.children = dict(children)
            nodes[nid] = node
        for nid, node in nodes.items():
            for v, c in node.children.items():
                nodes[c].parents.add((nid, v))
        m = Mdd(self.n, [set(d) for d in self.domains[1:]], nodes, root, self.terminal)
        return m


def from_tuples(n: int, domains: Sequence[Iterable[int]], tuples) -> Mdd:
    """Compile an explicit solution set into the canonical fully reduced diagram.

    Builds the layered trie of the tuples and runs it through
    :func:`reduce_full`.  An empty tuple set yields the failed marker.
    Raises MddError naming the 0-based index of a malformed tuple.
    """
    doms = [frozenset(d) for d in domains]
    if len(doms) != n:
        raise MddError(f"expected {n} domains, got {len(doms)}")
    if any(not d for d in doms):
        raise MddError("empty variable domain")
    tuples = list(tuples)
    for idx, t in enumerate(tuples):
        t = tuple(t)
        if len(t) != n:
            raise MddError(f"tuple {idx} has arity {len(t)}, expected {n}")
        for k, v in enumerate(t):
            if v not in doms[k]:
                raise MddError(f"tuple {idx} assigns {v} to variable {k + 1}, "
                               f"outside its domain")
    if not tuples:
        return _failed_mdd(n, doms)

    # layered trie: one node per distinct prefix, shared terminal
    nodes = {}
    next_id = itertools.count()
    terminal = Node(next(next_id), n + 1)
    nodes[terminal.nid] = terminal
    root = Node(next(next_id), 1)
    nodes[root.nid] = root
    for t in sorted(set(map(tuple, tuples))):
        u = root
        for k, v in enumerate(t):
            if k == n - 1:
                child = terminal
            elif v in u.children:
                child = nodes[u.children[v]]
                u = child
                continue
            else:
                child = Node(next(next_id), k + 2)
                nodes[child.nid] = child
            u.children.setdefault(v, child.nid)
            u = child
    for nid, node in nodes.items():
        for v, c in node.children.items():
            nodes[c].parents.add((nid, v))
    trie = Mdd(n, doms, nodes, root.nid, terminal.nid)
    return reduce_full(trie)


def reduce_full(m: Mdd) -> Mdd:
    """Return the canonical fully reduced equivalent of ``m`` (pure)."""
    if m.failed:
        return _failed_mdd(m.n, m.domains[1:])
    b = _Builder(m.n, m.domains[1:])
    memo = {m.terminal: b.terminal}

    def conv(uid):
        done = memo.get(uid)
        if done is not None:
            return done
        u = m.nodes[uid]
        children = {v: conv(c) for v, c in sorted(u.children.items())}
        nid = b.node(u.layer, children)
        memo[uid] = nid
        return nid

    return b.finish(conv(m.root))


def conjoin(a: Mdd, b: Mdd, max_edges: Optional[int] = None) -> Mdd:
    """Fully reduced diagram of the intersection of two solution sets.

    Product construction on the two diagrams; inputs must agree on arity and
    compile-time domains.  ``max_edges`` aborts oversized intermediate
    results with an MddError.
    """
    if a.n != b.n:
        raise MddError(f"arity mismatch: {a.n} vs {b.n}")
    if a.domains != b.domains:
        raise MddError("domain mismatch between operands")
    if a.failed or b.failed:
        return _failed_mdd(a.n, a.domains[1:])
    out = _Builder(a.n, a.domains[1:], max_edges=max_edges)
    n = a.n
    memo = {}

    def layer_of(m, uid):
        return m.nodes[uid].layer

    def cofactor(m, uid, layer, v):
        # above the node every variable is unconstrained
        if layer_of(m, uid) > layer:
            return uid
        return m.nodes[uid].children.get(v)

    def apply(ua, ub):
        key = (ua, ub)
        if key in memo:
            return memo[key]
        layer = min(layer_of(a, ua), layer_of(b, ub))
        if layer == n + 1:
            memo[key] = out.terminal
            return out.terminal
        children = {}
        for v in sorted(a.domains[layer]):
            ca = cofactor(a, ua, layer, v)
            cb = cofactor(b, ub, layer, v)
            if ca is None or cb is None:
                continue
            r = apply(ca, cb)
            if r is not None:
                children[v] = r
        result = out.node(layer, children) if children else None
        memo[key] = result
        return result

    root = apply(a.root, b.root)
    if root is None:
        return _failed_mdd(a.n, a.domains[1:])
    return out.finish(root)


def enumerate_solutions(m: Mdd, current_domains=None) -> set:
    """Expand every root-terminal path into full assignments (test scale).

    Long edges and layers above the root range over the whole (current)
    domain of the skipped variables.  With ``current_domains`` given, edge
    values outside them are dropped and skipped layers range over them.
    """
    if m.failed:
        return set()
    if current_domains is None:
        cur = m.domains
    else:
        cur = (None,) + tuple(frozenset(d) & m.domains[i + 1]
                              for i, d in enumerate(current_domains))
    if any(not cur[i] for i in range(1, m.n + 1)):
        return set()
    suffixes = {m.terminal: [()]}

    def walk(uid):
        got = suffixes.get(uid)
        if got is not None:
            return got
        u = m.nodes[uid]
        acc = []
        for v in sorted(u.children):
            if v not in cur[u.layer]:
                continue
            c = u.children[v]
            c_layer = m.nodes[c].layer
            mids = itertools.product(
                *(sorted(cur[k]) for k in range(u.layer + 1, c_layer)))
            tails = walk(c)
            for mid in mids:
                for tail in tails:
                    acc.append((v,) + mid + tail)
        suffixes[uid] = acc
        return acc

    root_layer = m.nodes[m.root].layer
    prefixes = itertools.product(*(sorted(cur[k]) for k in range(1, root_layer)))
    tails = walk(m.root)
    return {p + t for p in prefixes for t in tails}


def count_solutions(m: Mdd) -> int:
    """Number of full assignments accepted, by layered DP over edge weights."""
    if m.failed:
        return 0
    sizes = [0] + [len(m.domains[i]) for i in range(1, m.n + 1)] + [1]
    ways = {m.terminal: 1}
    for u in sorted(m.nodes.values(), key=lambda x: -x.layer):
        if u.nid == m.terminal:
            continue
        total = 0
        for v, c in u.children.items():
            factor = 1
            for k in range(u.layer + 1, m.nodes[c].layer):
                factor *= sizes[k]
            total += factor * ways[c]
        ways[u.nid] = total
    root_factor = 1
    for k in range(1, m.nodes[m.root].layer):
        root_factor *= sizes[k]
    return root_factor * ways[m.root]


def _canon_key(m: Mdd):
    keys = {m.terminal: "T"}

    def key(uid):
        got = keys.get(uid)
        if got is not None:
            return got
        u = m.nodes[uid]
        k = (u.layer, tuple(sorted((v, key(c)) for v, c in u.children.items())))
        keys[uid] = k
        return k

    return key(m.root)


def structural_equal(a: Mdd, b: Mdd) -> bool:
    """Layer/value/root/terminal-respecting isomorphism via canonical keys."""
    if a.failed or b.failed:
        return a.failed and b.failed and a.n == b.n
    if a.n != b.n:
        return False
    return _canon_key(a) == _canon_key(b)


def accepts(m: Mdd, assignment: Sequence[int]) -> bool:
    """Membership test for one full assignment (positional tuple)."""
    if m.failed:
        return False
    if len(assignment) != m.n:
        raise MddError(f"assignment arity {len(assignment)} != {m.n}")
    uid = m.root
    while uid != m.terminal:
        u = m.nodes[uid]
        nxt = u.children.get(assignment[u.layer - 1])
        if nxt is None:
            return False
        uid = nxt
    return True


def serialize(m: Mdd) -> str:
    """Render the line-based text format (``mdd``/``dom``/``node``/``edge``/``end``)."""
    lines = [f"mdd {m.n}"]
    for i in range(1, m.n + 1):
        lines.append("dom %d %s" % (i, " ".join(map(str, sorted(m.domains[i])))))
    for u in sorted(m.nodes.values(), key=lambda x: (x.layer, x.nid)):
        lines.append(f"node {u.nid} {u.layer}")
    for src, dst, v in m.edges():
        lines.append(f"edge {src} {dst} {v}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> Mdd:
    """Parse the text format back into a validated diagram.

    Zero ``node`` lines decode the failed (unsatisfiable) marker.  Errors
    carry 1-based line numbers; an edge naming an undeclared node reports
    that node id.
    """
    n = None
    domains = {}
    nodes = {}
    edges = []
    ended = False
    end_line = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ended:
            raise ParseError(line_no, "content after 'end'")
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "mdd":
                if n is not None:
                    raise ParseError(line_no, "duplicate 'mdd' header")
                n = int(parts[1])
                if n < 1 or len(parts) != 2:
                    raise ParseError(line_no, "want 'mdd <n>' with n >= 1")
            elif kind == "dom":
                i = int(parts[1])
                values = [int(x) for x in parts[2:]]
                if n is None:
                    raise ParseError(line_no, "'dom' before 'mdd' header")
                if not 1 <= i <= n:
                    raise ParseError(line_no, f"variable {i} out of range 1..{n}")
                if i in domains:
                    raise ParseError(line_no, f"duplicate domain for variable {i}")
                if not values:
                    raise ParseError(line_no, f"empty domain for variable {i}")
                domains[i] = set(values)
            elif kind == "node":
                if len(parts) != 3:
                    raise ParseError(line_no, "want 'node <id> <layer>'")
                nid, layer = int(parts[1]), int(parts[2])
                if nid < 0:
                    raise ParseError(line_no, "node ids are non-negative")
                if nid in nodes:
                    raise ParseError(line_no, f"duplicate node id {nid}")
                nodes[nid] = Node(nid, layer)
            elif kind == "edge":
                if len(parts) != 4:
                    raise ParseError(line_no, "want 'edge <src> <dst> <value>'")
                edges.append((line_no, int(parts[1]), int(parts[2]), int(parts[3])))
            elif kind == "end":
                ended = True
                end_line = line_no
            else:
                raise ParseError(line_no, f"unknown directive '{kind}'")
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(line_no, f"malformed '{kind}' line") from None
    if n is None:
        raise ParseError(1, "missing 'mdd' header")
    if not ended:
        raise ParseError(len(text.splitlines()) or 1, "missing 'end'")
    missing = [i for i in range(1, n + 1) if i not in domains]
    if missing:
        raise ParseError(end_line, f"missing domain for variable {missing[0]}")
    doms = [domains[i] for i in range(1, n + 1)]
    if not nodes:
        if edges:
            raise ParseError(edges[0][0], "edge without any declared nodes")
        return _failed_mdd(n, doms)
    for line_no, src, dst, v in edges:
        for nid in (src, dst):
            if nid not in nodes:
                raise ParseError(line_no, f"edge refers to undeclared node {nid}")
        if v in nodes[src].children:
            raise ParseError(line_no, f"node {src} already has an edge for value {v}")
        nodes[src].children[v] = dst
        nodes[dst].parents.add((src, v))
    terminals = [u.nid for u in nodes.values() if u.layer == n + 1]
    if len(terminals) != 1:
        raise ParseError(end_line, f"need exactly one node at layer {n + 1}, "
                                   f"found {len(terminals)}")
    min_layer = min(u.layer for u in nodes.values())
    roots = [u.nid for u in nodes.values() if u.layer == min_layer]
    if len(roots) != 1:
        raise ParseError(end_line, f"need exactly one node at the minimum layer, "
                                   f"found {len(roots)}")
    m = Mdd(n, doms, nodes, roots[0], terminals[0])
    try:
        validate_mdd(m)
    except ValidationError as exc:
        raise ParseError(end_line, str(exc)) from None
    return m
