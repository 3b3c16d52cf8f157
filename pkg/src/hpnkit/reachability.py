"""Exact state-space construction and the property checks defined on it.

The builder is a breadth-first closure of the initial marking under the
firing rule, with markings deduplicated in a hash-indexed store. Node
numbering is the BFS discovery order, so identical inputs give identical
graphs byte for byte.

Two modes: structural treats every guard as true; valued branches over
valuations of the guard atoms (all assignments by default, or a supplied
subset) and keeps an edge if any branch allows it.

Priorities declared on transitions are ignored unless the caller passes
`respect_priorities=True`. The suppression rule is deliberately narrow: a
transition yields only to a strictly-higher-priority transition whose
input places are a superset of its own, i.e. to a more specific competitor
for the same tokens.
"""

from __future__ import annotations

import json
import os
from array import array
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .errors import HpnError, ValuationExplosionError
from .guards import all_valuations
from .net import Marking, PetriNet, fire, incidence_matrix

DEFAULT_STATE_LIMIT = 1_000_000
VALUATION_ATOM_CAP = 20  # 2**20 branch combinations per node


def default_state_limit() -> int:
    env = os.environ.get("HPN_STATE_LIMIT")
    if env:
        try:
            value = int(env)
            if value >= 1:
                return value
        except ValueError:
            pass
    return DEFAULT_STATE_LIMIT


@dataclass
class ReachabilityGraph:
    net: PetriNet
    nodes: list[Marking]
    edges: list[tuple[int, int, int]]  # (from node, transition index, to node)
    out_degree: array
    truncated: bool
    state_limit: int
    mode: str

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def successors(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for src, t, dst in self.edges:
            adj[src].append((t, dst))
        return adj


@dataclass(frozen=True)
class PropertyVerdict:
    deadlock_free: bool
    deadlock_marking: Marking | None
    safe: bool
    safety_offender: tuple[Marking, int] | None
    bounds: tuple[int, ...]
    live: bool | None
    liveness_counterexample: tuple[int, int] | None
    invariant_sums_constant: bool | None
    invariant_violation: tuple[tuple[int, ...], int] | None
    definitive: bool
    mode: str


def build_graph(
    net: PetriNet,
    mode: str = "structural",
    state_limit: int | None = None,
    valuations: Sequence[dict] | None = None,
    respect_priorities: bool = False,
    record_edges: bool = True,
) -> ReachabilityGraph:
    """Breadth-first closure of the initial marking under firing.

    Truncation at `state_limit` is a flagged result, not an error: the
    graph carries `truncated=True` and verdicts derived from it are
    reported as non-definitive.
    """
    if mode not in ("structural", "valued"):
        raise ValueError(f"mode must be 'structural' or 'valued', got {mode!r}")
    if state_limit is None:
        state_limit = default_state_limit()
    if state_limit < 1:
        raise ValueError("state_limit must be >= 1")

    pre = net.pre
    post = net.post
    ntrans = len(net.transitions)

    if mode == "valued":
        if valuations is None:
            atom_names = list(net.atoms())
            if len(atom_names) > VALUATION_ATOM_CAP:
                raise ValuationExplosionError(
                    f"{len(atom_names)} guard atoms exceed the cap of "
                    f"{VALUATION_ATOM_CAP} (2^{VALUATION_ATOM_CAP} branches)"
                )
            valuation_list = list(all_valuations(atom_names))
        else:
            valuation_list = list(valuations)
        guards = [t.guard for t in net.transitions]
    else:
        valuation_list = [None]
        guards = [None] * ntrans

    priorities = [t.priority or 0 for t in net.transitions]
    has_priorities = respect_priorities and any(
        t.priority is not None for t in net.transitions
    )
    presets = [frozenset(p for p, _ in pre[t]) for t in range(ntrans)]

    m0 = net.initial_marking
    index: dict[Marking, int] = {m0: 0}
    nodes: list[Marking] = [m0]
    queue: deque[int] = deque((0,))
    edges: list[tuple[int, int, int]] = []
    out_degree = array("i", (0,))
    truncated = False

    while queue:
        src = queue.popleft()
        m = nodes[src]

        struct_enabled = []
        for t in range(ntrans):
            ok = True
            for p, w in pre[t]:
                if m[p] < w:
                    ok = False
                    break
            if ok:
                struct_enabled.append(t)

        if mode == "structural":
            firing = struct_enabled
            if has_priorities and firing:
                firing = _apply_priorities(firing, priorities, presets)
        else:
            fired: set[int] = set()
            for valuation in valuation_list:
                allowed = [
                    t
                    for t in struct_enabled
                    if guards[t] is None or guards[t].evaluate(valuation)
                ]
                if has_priorities and allowed:
                    allowed = _apply_priorities(allowed, priorities, presets)
                fired.update(allowed)
            firing = sorted(fired)

        for t in firing:
            mm = list(m)
            for p, w in pre[t]:
                mm[p] -= w
            for p, w in post[t]:
                mm[p] += w
            target = tuple(mm)
            dst = index.get(target)
            if dst is None:
                if len(nodes) >= state_limit:
                    truncated = True
                    continue
                dst = len(nodes)
                index[target] = dst
                nodes.append(target)
                out_degree.append(0)
                queue.append(dst)
            out_degree[src] += 1
            if record_edges:
                edges.append((src, t, dst))

    return ReachabilityGraph(
        net=net,
        nodes=nodes,
        edges=edges,
        out_degree=out_degree,
        truncated=truncated,
        state_limit=state_limit,
        mode=mode,
    )


def _apply_priorities(enabled_list, priorities, presets):
    kept = []
    for t in enabled_list:
        suppressed = False
        for t2 in enabled_list:
            if priorities[t2] > priorities[t] and presets[t] <= presets[t2]:
                suppressed = True
                break
        if not suppressed:
            kept.append(t)
    return kept


def check_properties(
    graph: ReachabilityGraph,
    invariants: Sequence[Sequence[int]] | None = None,
    check_liveness: bool = True,
) -> PropertyVerdict:
    """Exact verdicts over the explored graph.

    Deadlock-freedom: every node has an outgoing edge. Safety: no place
    ever holds more than one token. Liveness (L4) via SCC condensation:
    a transition is live iff every bottom SCC fires it. When the graph is
    truncated the verdicts only cover the explored prefix
    (`definitive=False`).
    """
    deadlock_marking = None
    for i in range(len(graph.nodes)):
        if graph.out_degree[i] == 0:
            deadlock_marking = graph.nodes[i]
            break

    nplaces = len(graph.net.places)
    bounds = [0] * nplaces
    safety_offender = None
    for m in graph.nodes:
        for p in range(nplaces):
            v = m[p]
            if v > bounds[p]:
                bounds[p] = v
                if v > 1 and safety_offender is None:
                    safety_offender = (m, p)

    invariant_sums_constant = None
    invariant_violation = None
    if invariants is not None:
        invariant_sums_constant = True
        for weights in invariants:
            expected = sum(w * v for w, v in zip(weights, graph.nodes[0]))
            for i, m in enumerate(graph.nodes):
                if sum(w * v for w, v in zip(weights, m)) != expected:
                    invariant_sums_constant = False
                    invariant_violation = (tuple(weights), i)
                    break
            if not invariant_sums_constant:
                break

    live = None
    liveness_counterexample = None
    if check_liveness and graph.edges:
        live, liveness_counterexample = _liveness_via_sccs(graph)
    elif check_liveness:
        # no edges recorded: a single-node edgeless graph is trivially dead
        live = False if graph.out_degree[0] == 0 else None
        if live is False:
            liveness_counterexample = (0, 0)

    return PropertyVerdict(
        deadlock_free=deadlock_marking is None,
        deadlock_marking=deadlock_marking,
        safe=safety_offender is None,
        safety_offender=safety_offender,
        bounds=tuple(bounds),
        live=live,
        liveness_counterexample=liveness_counterexample,
        invariant_sums_constant=invariant_sums_constant,
        invariant_violation=invariant_violation,
        definitive=not graph.truncated,
        mode=graph.mode,
    )


def _tarjan_sccs(n: int, adj: list[list[int]]) -> list[list[int]]:
    index_of = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index_of[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index_of[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(adj[v]):
                w = adj[v][pi]
                pi += 1
                if index_of[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index_of[w])
            if advanced:
                continue
            work.pop()
            if lowlink[v] == index_of[v]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    scc.append(w)
                    if w == v:
                        break
                sccs.append(scc)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return sccs


def _liveness_via_sccs(graph: ReachabilityGraph):
    n = len(graph.nodes)
    adj: list[list[int]] = [[] for _ in range(n)]
    for src, _, dst in graph.edges:
        adj[src].append(dst)
    sccs = _tarjan_sccs(n, adj)
    component = [0] * n
    for ci, scc in enumerate(sccs):
        for v in scc:
            component[v] = ci

    leaves = set(range(len(sccs)))
    fired_in_component: list[set[int]] = [set() for _ in sccs]
    for src, t, dst in graph.edges:
        if component[src] != component[dst]:
            leaves.discard(component[src])
        else:
            fired_in_component[component[src]].add(t)

    ntrans = len(graph.net.transitions)
    for ci in sorted(leaves):
        fired = fired_in_component[ci]
        for t in range(ntrans):
            if t not in fired:
                return False, (t, min(sccs[ci]))
    return True, None


def find_cycle_realizing(
    graph: ReachabilityGraph,
    x: Sequence[int],
    search_limit: int = 1_000_000,
) -> tuple[int, ...] | None:
    """A firing sequence from m0 back to m0 with exactly the counts `x`.

    Invariants fix the counts but not the order; this search supplies an
    order or reports that none exists within the explored graph. Returns
    the empty tuple for x = 0.
    """
    x = tuple(x)
    net = graph.net
    if len(x) != len(net.transitions):
        raise ValueError("count vector length does not match |T|")
    if any(c < 0 for c in x):
        raise ValueError("count vector must be non-negative")
    if not any(x):
        return ()

    # state equation precheck: the counts must lead back to m0 algebraically
    matrix = incidence_matrix(net)
    delta = [0] * len(net.places)
    for t, count in enumerate(x):
        if count:
            for p, v in enumerate(matrix.rows[t]):
                delta[p] += count * v
    if any(delta):
        return None

    adj = graph.successors()
    seen: set[tuple[int, tuple[int, ...]]] = set()
    # DFS over (node, remaining counts); path reconstructed via parent links
    stack: list[tuple[int, tuple[int, ...], tuple]] = [(0, x, ())]
    while stack:
        node, remaining, path = stack.pop()
        if not any(remaining):
            if node == 0:
                return _unroll(path)
            continue
        key = (node, remaining)
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > search_limit:
            raise HpnError(
                f"realizability search exceeded {search_limit} states"
            )
        for t, dst in adj[node]:
            if remaining[t] > 0:
                rem = list(remaining)
                rem[t] -= 1
                stack.append((dst, tuple(rem), (path, t)))
    return None


def _unroll(path) -> tuple[int, ...]:
    out = []
    while path:
        path, t = path
        out.append(t)
    out.reverse()
    return tuple(out)


def export_dot(graph: ReachabilityGraph) -> str:
    """GraphViz text for the graph; node order is BFS discovery order."""
    lines = ["digraph reachability {", "  rankdir=LR;", '  node [shape=box];']
    for i, m in enumerate(graph.nodes):
        label = "M%d = (%s)" % (i, ",".join(str(v) for v in m))
        lines.append(f'  n{i} [label="{label}"];')
    tnames = graph.net.transition_names()
    for src, t, dst in graph.edges:
        lines.append(f'  n{src} -> n{dst} [label="{tnames[t]}"];')
    if graph.truncated:
        lines.append('  truncated [shape=plaintext, label="truncated"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(graph: ReachabilityGraph, verdict: PropertyVerdict | None = None) -> str:
    """JSON rendering with stable key order."""
    tnames = graph.net.transition_names()
    payload: dict = {
        "edges": [[src, tnames[t], dst] for src, t, dst in graph.edges],
        "mode": graph.mode,
        "nodes": [list(m) for m in graph.nodes],
        "places": list(graph.net.place_names()),
        "state_limit": graph.state_limit,
        "transitions": list(tnames),
        "truncated": graph.truncated,
    }
    if verdict is not None:
        payload["verdict"] = {
            "bounds": list(verdict.bounds),
            "deadlock_free": verdict.deadlock_free,
            "definitive": verdict.definitive,
            "live": verdict.live,
            "mode": verdict.mode,
            "safe": verdict.safe,
        }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
