"""Hierarchical nets: panels, pages, fusion places, and the reductions
that turn any panel into a flat analyzable net.

A page is an ordinary place carrying a binding to a child panel, so
collapsing pages to places is a relabelling rather than a graph surgery.
A panel normally has one input place (no incoming arcs) and one output
place (no outgoing arcs); communication-model panels are closed nets and
declare neither. A panel whose input and output place coincide is treated
as already closed.

`flatten` is the inverse of the reduction pipeline: it substitutes each
page by its child panel's net and merges fusion-set members into single
shared places. It exists chiefly so tests can cross-check compositional
verdicts against whole-model analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import StructuralError
from .net import Arc, PetriNet, Place, Transition


class Layer(str, Enum):
    SYSTEM = "System"
    AGENT = "Agent"
    SUBSYSTEM = "Subsystem"
    BEHAVIOUR = "Behaviour"
    ACTION_F = "ActionF"
    ACTION_SND = "ActionSnd"
    ACTION_RCV = "ActionRcv"
    COMM_MODEL = "CommModel"
    OTHER = "Other"


@dataclass
class Panel:
    """One page's underlying net plus its boundary and layer tag."""

    id: str
    net: PetriNet
    layer: Layer = Layer.OTHER
    input_place: str | None = None
    output_place: str | None = None
    page_bindings: dict[str, str] = field(default_factory=dict)

    @property
    def closed(self) -> bool:
        if self.input_place is None and self.output_place is None:
            return True
        return self.input_place == self.output_place

    def validate(self) -> None:
        names = set(self.net.place_names())
        for attr in ("input_place", "output_place"):
            value = getattr(self, attr)
            if value is not None and value not in names:
                raise StructuralError(
                    f"panel {self.id!r}: {attr} {value!r} is not a place"
                )
        if (self.input_place is None) != (self.output_place is None):
            raise StructuralError(
                f"panel {self.id!r}: input and output place must be declared together"
            )
        if self.input_place is not None and not self.closed:
            inputs = {self.net.places[i].name for i in self.net.input_places()}
            outputs = {self.net.places[i].name for i in self.net.output_places()}
            if self.input_place not in inputs:
                raise StructuralError(
                    f"panel {self.id!r}: input place {self.input_place!r} has incoming arcs"
                )
            if self.output_place not in outputs:
                raise StructuralError(
                    f"panel {self.id!r}: output place {self.output_place!r} has outgoing arcs"
                )
        for page in self.page_bindings:
            if page not in names:
                raise StructuralError(
                    f"panel {self.id!r}: page {page!r} is not a place"
                )


@dataclass
class HierarchicalNet:
    """Panels linked by page bindings (a tree) plus fusion sets.

    Fusion sets identify places of different panels as one shared place
    under a global name. Panels not bound as pages anywhere (for example
    communication-model panels) are standalone analysis roots.
    """

    panels: dict[str, Panel]
    root: str
    fusion_sets: dict[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)

    def validate(self) -> None:
        if self.root not in self.panels:
            raise StructuralError(f"root panel {self.root!r} does not exist")
        bound: dict[str, str] = {}
        for panel in self.panels.values():
            panel.validate()
            for page, child in panel.page_bindings.items():
                if child not in self.panels:
                    raise StructuralError(
                        f"panel {panel.id!r}: page {page!r} binds unknown panel {child!r}"
                    )
                if child in bound:
                    raise StructuralError(
                        f"panel {child!r} is bound as a page twice "
                        f"(by {bound[child]!r} and {panel.id!r})"
                    )
                bound[child] = panel.id
        if self.root in bound:
            raise StructuralError(f"root panel {self.root!r} is bound as a page")
        self._check_acyclic()
        for name, members in self.fusion_sets.items():
            if len(members) < 2:
                raise StructuralError(f"fusion set {name!r} has fewer than 2 members")
            for pid, place in members:
                if pid not in self.panels:
                    raise StructuralError(f"fusion set {name!r}: unknown panel {pid!r}")
                if place not in self.panels[pid].net.place_names():
                    raise StructuralError(
                        f"fusion set {name!r}: {pid}.{place} is not a place"
                    )

    def _check_acyclic(self) -> None:
        visiting: set[str] = set()
        done: set[str] = set()

        def visit(pid: str, trail: tuple[str, ...]) -> None:
            if pid in done:
                return
            if pid in visiting:
                raise StructuralError(
                    "cyclic panel references: " + " -> ".join(trail + (pid,))
                )
            visiting.add(pid)
            for child in self.panels[pid].page_bindings.values():
                visit(child, trail + (pid,))
            visiting.discard(pid)
            done.add(pid)

        for pid in sorted(self.panels):
            visit(pid, ())


@dataclass(frozen=True)
class CollapseResult:
    net: PetriNet
    page_to_place: dict[str, str]


@dataclass(frozen=True)
class PurifyResult:
    net: PetriNet
    removed_pairs: tuple[tuple[str, str], ...]


def close_loop(panel: Panel) -> PetriNet:
    """Add one synthetic transition from the output place back to the input.

    This isolates the panel from its parent for standalone analysis: the
    parent's only effect is to re-inject the token the panel emitted. The
    added transition is unguarded. Adds exactly one transition, no places.
    """
    if panel.input_place is None or panel.output_place is None:
        raise StructuralError(
            f"panel {panel.id!r} lacks input/output places; cannot close the loop"
        )
    net = panel.net
    existing = set(net.transition_names()) | set(net.place_names())
    name = f"t{len(net.transitions) + 1}"
    while name in existing:
        name += "_loop"
    transitions = list(net.transitions) + [Transition(name)]
    arcs = list(net.arcs) + [
        Arc(panel.output_place, name),
        Arc(name, panel.input_place),
    ]
    return PetriNet(net.places, transitions, arcs)


def collapse_pages(panel: Panel) -> CollapseResult:
    """Turn every page into an ordinary place.

    Pages already are places carrying a binding annotation, so the net is
    unchanged; the result records the page-to-place correspondence for
    traceability.
    """
    return CollapseResult(
        net=panel.net,
        page_to_place={page: page for page in sorted(panel.page_bindings)},
    )


def purify(net: PetriNet) -> PurifyResult:
    """Remove every self-loop arc pair, yielding a pure net.

    Each removed pair (transition <-> place, equal weight both ways) is
    reported as a read-arc side note. A self-loop with unequal weights has
    no pure counterpart here and is an error. For nets whose loop places
    are 1-bounded the pure net's incidence matrix loses no information.
    """
    loops = net.self_loop_pairs()
    if not loops:
        return PurifyResult(net=net, removed_pairs=())
    removed = []
    drop: set[tuple[int, int]] = set()
    for t, p in loops:
        w_in = dict(net.pre[t])[p]
        w_out = dict(net.post[t])[p]
        if w_in != w_out:
            raise StructuralError(
                f"self-loop {net.transitions[t].name!r} <-> {net.places[p].name!r} "
                f"has unequal weights ({w_in} in, {w_out} out)"
            )
        drop.add((t, p))
        removed.append((net.transitions[t].name, net.places[p].name))

    arcs = []
    for t in range(len(net.transitions)):
        tname = net.transitions[t].name
        for p, w in net.pre[t]:
            if (t, p) not in drop:
                arcs.append(Arc(net.places[p].name, tname, w))
        for p, w in net.post[t]:
            if (t, p) not in drop:
                arcs.append(Arc(tname, net.places[p].name, w))
    pure = PetriNet(net.places, net.transitions, arcs)
    return PurifyResult(net=pure, removed_pairs=tuple(removed))


def flatten(h: HierarchicalNet, root: str | None = None) -> PetriNet:
    """Substitute pages by child nets and merge fusion places.

    Node names are qualified as "<panel id>.<node>"; fusion places keep
    their global fusion name. Arcs around a page move to the child's
    boundary: incoming arcs target the child's input place, outgoing arcs
    leave the child's output place, matching the activation reading that a
    token in a page is a token travelling through the child. Initial
    tokens of page-substituted panels are dropped (the parent injects the
    activation token); the root and fusion-joined standalone panels keep
    theirs.
    """
    h.validate()
    root = root or h.root
    if root not in h.panels:
        raise StructuralError(f"unknown panel {root!r}")

    fusion_of: dict[tuple[str, str], str] = {}
    partners: dict[str, set[str]] = {}
    for name, members in h.fusion_sets.items():
        for pid, place in members:
            fusion_of[(pid, place)] = name
            partners.setdefault(pid, set()).update(p for p, _ in members)

    # include the page tree below root plus fusion partners, transitively
    included: list[str] = []
    seen: set[str] = set()
    frontier = [root]
    while frontier:
        pid = frontier.pop(0)
        if pid in seen:
            continue
        seen.add(pid)
        included.append(pid)
        panel = h.panels[pid]
        for page in sorted(panel.page_bindings):
            frontier.append(panel.page_bindings[page])
        frontier.extend(sorted(partners.get(pid, ())))

    page_children = {
        child for pid in included for child in h.panels[pid].page_bindings.values()
    }

    def boundary(pid: str, which: str) -> tuple[str, str]:
        # descend through pages used as boundary places, if any
        panel = h.panels[pid]
        place = panel.input_place if which == "in" else panel.output_place
        if place is None:
            raise StructuralError(
                f"panel {pid!r} is closed and cannot be substituted for a page"
            )
        if place in panel.page_bindings:
            return boundary(panel.page_bindings[place], which)
        return pid, place

    def resolve(pid: str, place: str, direction: str) -> str:
        panel = h.panels[pid]
        if place in panel.page_bindings:
            child = panel.page_bindings[place]
            cpid, cplace = boundary(child, "in" if direction == "in" else "out")
            return resolve(cpid, cplace, direction)
        key = (pid, place)
        if key in fusion_of:
            return fusion_of[key]
        return f"{pid}.{place}"

    places: dict[str, Place] = {}
    transitions: list[Transition] = []
    arcs: list[Arc] = []
    fusion_tokens: dict[str, dict[str, int]] = {}

    for pid in included:
        panel = h.panels[pid]
        net = panel.net
        keep_tokens = pid not in page_children
        for place in net.places:
            if place.name in panel.page_bindings:
                if keep_tokens and place.tokens:
                    # activation token in a page lands on the child's entry
                    target = resolve(pid, place.name, "in")
                    prev = places.get(target)
                    if prev is not None:
                        places[target] = Place(
                            target, prev.tokens + place.tokens, prev.operation
                        )
                    else:
                        places[target] = Place(target, place.tokens)
                continue
            name = resolve(pid, place.name, "in")
            tokens = place.tokens if keep_tokens else 0
            if (pid, place.name) in fusion_of and keep_tokens:
                fusion_tokens.setdefault(name, {})[pid] = tokens
            if name in places:
                prev = places[name]
                places[name] = Place(
                    name, max(prev.tokens, tokens), prev.operation or place.operation
                )
            else:
                places[name] = Place(name, tokens, place.operation)
        for t in net.transitions:
            transitions.append(
                Transition(f"{pid}.{t.name}", guard=t.guard, priority=t.priority)
            )
        for arc in net.arcs:
            if arc.source in net._place_index:
                src = resolve(pid, arc.source, "out")
                dst = f"{pid}.{arc.target}"
            else:
                src = f"{pid}.{arc.source}"
                dst = resolve(pid, arc.target, "in")
            arcs.append(Arc(src, dst, arc.weight))

    for name, per_panel in fusion_tokens.items():
        declared = {v for v in per_panel.values()}
        if len(declared) > 1:
            raise StructuralError(
                f"fusion place {name!r}: members declare different token counts "
                f"{sorted(per_panel.items())}"
            )

    return PetriNet(list(places.values()), transitions, arcs)
