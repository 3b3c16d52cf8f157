"""Flat place/transition nets: structure, firing semantics, incidence matrix.

A net is immutable after construction. Markings are plain tuples of
non-negative ints, indexed by place, so they hash cheaply and can be used
directly as dictionary keys during state-space exploration. All arithmetic
is exact integer arithmetic.

The incidence matrix follows the convention that row i is the marking
change caused by firing transition i (a |T| x |P| matrix). For a pure net
(no place that is both input and output of one transition) the matrix
captures the firing rule exactly; for impure nets it is lossy, which the
`is_pure` flag records, and token-level firing must use `fire`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import MarkingEquationError, NotEnabledError, StructuralError
from .guards import Guard

Marking = tuple[int, ...]
FiringCountVector = tuple[int, ...]


@dataclass(frozen=True)
class Place:
    """A token holder. `operation` is an opaque activity label."""

    name: str
    tokens: int = 0
    operation: str | None = None

    def __post_init__(self):
        if self.tokens < 0:
            raise StructuralError(f"place {self.name!r}: negative initial tokens")


@dataclass(frozen=True)
class Transition:
    """An event. Guard and priority are optional annotations.

    Priorities are not part of plain enabling; the reachability builder
    applies them only when explicitly asked to (see
    `reachability.build_graph(respect_priorities=...)`).
    """

    name: str
    guard: Guard | None = None
    priority: int | None = None


@dataclass(frozen=True)
class Arc:
    """Directed weighted arc between a place and a transition.

    `source`/`target` are node names; exactly one of them must be a place
    and the other a transition of the owning net.
    """

    source: str
    target: str
    weight: int = 1

    def __post_init__(self):
        if self.weight < 1:
            raise StructuralError(
                f"arc {self.source}->{self.target}: weight must be >= 1"
            )


@dataclass(frozen=True)
class IncidenceMatrix:
    """|T| x |P| integer matrix; rows are per-transition marking changes."""

    rows: tuple[tuple[int, ...], ...]
    is_pure: bool
    self_loops: tuple[tuple[str, str], ...] = ()

    @property
    def transition_count(self) -> int:
        return len(self.rows)

    @property
    def place_count(self) -> int:
        return len(self.rows[0]) if self.rows else 0


class PetriNet:
    """An ordinary weighted place/transition net with an initial marking."""

    def __init__(
        self,
        places: Sequence[Place | str],
        transitions: Sequence[Transition | str],
        arcs: Iterable[Arc | tuple],
    ):
        self.places: tuple[Place, ...] = tuple(
            p if isinstance(p, Place) else Place(p) for p in places
        )
        self.transitions: tuple[Transition, ...] = tuple(
            t if isinstance(t, Transition) else Transition(t) for t in transitions
        )
        self.arcs: tuple[Arc, ...] = tuple(
            a if isinstance(a, Arc) else Arc(*a) for a in arcs
        )

        self._place_index = {p.name: i for i, p in enumerate(self.places)}
        self._transition_index = {t.name: i for i, t in enumerate(self.transitions)}
        if len(self._place_index) != len(self.places):
            raise StructuralError("duplicate place name")
        if len(self._transition_index) != len(self.transitions):
            raise StructuralError("duplicate transition name")
        overlap = set(self._place_index) & set(self._transition_index)
        if overlap:
            raise StructuralError(f"name used for both place and transition: {sorted(overlap)}")

        # pre[t] / post[t]: aggregated (place index, weight) pairs
        pre: list[dict[int, int]] = [dict() for _ in self.transitions]
        post: list[dict[int, int]] = [dict() for _ in self.transitions]
        for arc in self.arcs:
            if arc.source in self._place_index and arc.target in self._transition_index:
                d = pre[self._transition_index[arc.target]]
                p = self._place_index[arc.source]
            elif arc.source in self._transition_index and arc.target in self._place_index:
                d = post[self._transition_index[arc.source]]
                p = self._place_index[arc.target]
            else:
                raise StructuralError(
                    f"arc {arc.source}->{arc.target}: endpoints must be one "
                    "existing place and one existing transition"
                )
            d[p] = d.get(p, 0) + arc.weight
        self.pre: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(sorted(d.items())) for d in pre
        )
        self.post: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(sorted(d.items())) for d in post
        )

        self.initial_marking: Marking = tuple(p.tokens for p in self.places)
        self._incidence: IncidenceMatrix | None = None

    # --- lookups -----------------------------------------------------------

    def place_index(self, name: str) -> int:
        return self._place_index[name]

    def transition_index(self, name: str) -> int:
        return self._transition_index[name]

    def place_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.places)

    def transition_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.transitions)

    def atoms(self) -> tuple[str, ...]:
        """Sorted names of all atoms appearing in transition guards."""
        names: set[str] = set()
        for t in self.transitions:
            if t.guard is not None:
                names |= t.guard.atoms()
        return tuple(sorted(names))

    def marking_as_dict(self, m: Marking) -> dict[str, int]:
        return {p.name: m[i] for i, p in enumerate(self.places)}

    # --- derived structure ---------------------------------------------------

    def input_places(self) -> list[int]:
        """Places with no incoming arc (not produced by any transition)."""
        produced = {p for ps in self.post for p, _ in ps}
        return [i for i in range(len(self.places)) if i not in produced]

    def output_places(self) -> list[int]:
        """Places with no outgoing arc (not consumed by any transition)."""
        consumed = {p for ps in self.pre for p, _ in ps}
        return [i for i in range(len(self.places)) if i not in consumed]

    def self_loop_pairs(self) -> list[tuple[int, int]]:
        """(transition, place) pairs where the place is both input and output."""
        pairs = []
        for t in range(len(self.transitions)):
            inputs = dict(self.pre[t])
            for p, _ in self.post[t]:
                if p in inputs:
                    pairs.append((t, p))
        return pairs

    def __repr__(self) -> str:
        return (
            f"PetriNet(|P|={len(self.places)}, |T|={len(self.transitions)}, "
            f"|arcs|={len(self.arcs)})"
        )


def incidence_matrix(net: PetriNet) -> IncidenceMatrix:
    """Incidence matrix N: N[i][j] = tokens added to place j by firing t_i."""
    if net._incidence is not None:
        return net._incidence
    nplaces = len(net.places)
    rows = []
    for t in range(len(net.transitions)):
        row = [0] * nplaces
        for p, w in net.pre[t]:
            row[p] -= w
        for p, w in net.post[t]:
            row[p] += w
        rows.append(tuple(row))
    loops = tuple(
        (net.transitions[t].name, net.places[p].name)
        for t, p in net.self_loop_pairs()
    )
    matrix = IncidenceMatrix(rows=tuple(rows), is_pure=not loops, self_loops=loops)
    net._incidence = matrix
    return matrix


def enabled(
    net: PetriNet,
    marking: Marking,
    valuation: Mapping[str, bool] | None = None,
) -> list[int]:
    """Indices of transitions enabled at `marking`, ascending.

    With `valuation=None` (structural mode) guards are treated as True.
    Otherwise a transition is enabled only if its input arcs are covered
    and its guard evaluates true; a guard atom missing from the valuation
    raises `MissingAtomError` naming the atom.
    """
    result = []
    for t in range(len(net.transitions)):
        ok = True
        for p, w in net.pre[t]:
            if marking[p] < w:
                ok = False
                break
        if not ok:
            continue
        if valuation is not None:
            guard = net.transitions[t].guard
            if guard is not None and not guard.evaluate(valuation):
                continue
        result.append(t)
    return result


def fire(net: PetriNet, marking: Marking, t: int | str) -> Marking:
    """Fire transition `t`, subtracting inputs then adding outputs.

    The explicit subtract-then-add order makes impure (self-loop) nets fire
    correctly: the loop place must hold the token and keeps it. Firing a
    structurally disabled transition raises `NotEnabledError`; the result
    is never clamped at zero.
    """
    if isinstance(t, str):
        t = net.transition_index(t)
    for p, w in net.pre[t]:
        if marking[p] < w:
            raise NotEnabledError(
                f"transition {net.transitions[t].name!r} is not enabled: "
                f"place {net.places[p].name!r} holds {marking[p]} < {w}"
            )
    out = list(marking)
    for p, w in net.pre[t]:
        out[p] -= w
    for p, w in net.post[t]:
        out[p] += w
    return tuple(out)


def apply_firing_count(
    net: PetriNet, m0: Marking, x: Sequence[int]
) -> Marking:
    """State equation: m0 + N^T x.

    Purely algebraic; a non-negative result does NOT imply the counts are
    realizable as an actual firing sequence (see
    `reachability.find_cycle_realizing` for that question).
    """
    if len(x) != len(net.transitions):
        raise StructuralError(
            f"firing count vector length {len(x)} != |T| = {len(net.transitions)}"
        )
    matrix = incidence_matrix(net)
    out = list(m0)
    for t, count in enumerate(x):
        if count == 0:
            continue
        row = matrix.rows[t]
        for p in range(len(out)):
            out[p] += count * row[p]
    for p, v in enumerate(out):
        if v < 0:
            raise MarkingEquationError(
                f"marking equation violated: place {net.places[p].name!r} "
                f"would hold {v} tokens"
            )
    return tuple(out)
