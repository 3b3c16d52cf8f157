"""Layer templates, structural validity rules, and property inheritance.

The six-layer meta-model fixes the shape of most nets in a full model:
system and agent layers are fork/join nets over pages, the behaviour layer
is one fixed six-node pattern, action sublayers are sequential or parallel
page arrangements (or user-defined hybrids), and inter-subsystem
communication is one shared net whose nine modes differ only in the guards
of the two stop-waiting transitions.

Because those shapes are fixed, their verdicts are computed once by this
module's own analysis pipeline and attached to every conforming instance;
only task-dependent nets (subsystem layer, hybrid arrangements, and the
blocking-blocking communication mode) are analyzed fresh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Sequence

from . import invariants as inv
from . import reachability as reach
from .errors import StructuralError
from .guards import FALSE, Atom, Const, Guard, Not, Or, all_valuations
from .hierarchy import (
    HierarchicalNet,
    Layer,
    Panel,
    close_loop,
    collapse_pages,
    purify,
)
from .net import Arc, PetriNet, Place, Transition, incidence_matrix


class Timeout(str, Enum):
    """Send/receive waiting policy: zero (non-blocking), infinite
    (blocking), finite (blocking with timeout)."""

    ZERO = "NB"
    INFINITE = "B"
    FINITE = "BT"


@dataclass(frozen=True)
class CommMode:
    send_timeout: Timeout
    recv_timeout: Timeout

    @classmethod
    def from_codes(cls, send: str, recv: str) -> "CommMode":
        return cls(Timeout(send), Timeout(recv))

    @property
    def code(self) -> str:
        return f"{self.send_timeout.value}-{self.recv_timeout.value}"


ALL_COMM_MODES = tuple(
    CommMode(s, r) for s, r in product(Timeout, Timeout)
)

SEND_TIMEOUT_ATOM = "t_out_1"
RECV_TIMEOUT_ATOM = "t_out_2"


# --- templates ---------------------------------------------------------------


def system_template(agent_count: int, panel_id: str = "system") -> Panel:
    """Top layer: one running place forking to one page per agent.

    The start place doubles as the return place, so the net is closed by
    construction and its closed-loop analysis has exactly two markings.
    """
    if agent_count < 1:
        raise StructuralError("agent_count must be >= 1")
    places = [Place("p1", tokens=1)] + [Place(f"a{i}") for i in range(1, agent_count + 1)]
    transitions = [Transition("t1"), Transition("t2")]
    arcs = [Arc("p1", "t1"), Arc("t2", "p1")]
    for i in range(1, agent_count + 1):
        arcs.append(Arc("t1", f"a{i}"))
        arcs.append(Arc(f"a{i}", "t2"))
    net = PetriNet(places, transitions, arcs)
    return Panel(
        id=panel_id,
        net=net,
        layer=Layer.SYSTEM,
        input_place="p1",
        output_place="p1",
    )


def agent_template(subsystem_count: int, panel_id: str = "agent") -> Panel:
    """Agent layer: fork to one page per subsystem, join to the output."""
    if subsystem_count < 1:
        raise StructuralError("subsystem_count must be >= 1")
    places = (
        [Place("p_in", tokens=1)]
        + [Place(f"s{i}") for i in range(1, subsystem_count + 1)]
        + [Place("p_out")]
    )
    transitions = [Transition("t1"), Transition("t2")]
    arcs = [Arc("p_in", "t1"), Arc("t2", "p_out")]
    for i in range(1, subsystem_count + 1):
        arcs.append(Arc("t1", f"s{i}"))
        arcs.append(Arc(f"s{i}", "t2"))
    net = PetriNet(places, transitions, arcs)
    return Panel(
        id=panel_id,
        net=net,
        layer=Layer.AGENT,
        input_place="p_in",
        output_place="p_out",
    )


def behaviour_template(panel_id: str = "behaviour") -> Panel:
    """The fixed behaviour pattern.

    One iteration computes the transition function (page p2), sends the
    results (page p3), advances the time stamp (operation at p4) and
    receives fresh data (page p5). If neither the error nor the terminal
    condition holds, control loops back for the next iteration; otherwise
    the behaviour terminates into the output place.
    """
    exit_cond = Or(Atom("err"), Atom("term"))
    places = [
        Place("p1", tokens=1),
        Place("p2", operation="compute transition function"),
        Place("p3", operation="send results"),
        Place("p4", operation="advance time stamp"),
        Place("p5", operation="receive data"),
        Place("p6"),
    ]
    transitions = [
        Transition("t1"),
        Transition("t2"),
        Transition("t3"),
        Transition("t4"),
        Transition("t5", guard=Not(exit_cond)),
        Transition("t6", guard=exit_cond),
    ]
    arcs = [
        Arc("p1", "t1"), Arc("t1", "p2"),
        Arc("p2", "t2"), Arc("t2", "p3"),
        Arc("p3", "t3"), Arc("t3", "p4"),
        Arc("p4", "t4"), Arc("t4", "p5"),
        Arc("p5", "t5"), Arc("t5", "p2"),
        Arc("p5", "t6"), Arc("t6", "p6"),
    ]
    net = PetriNet(places, transitions, arcs)
    return Panel(
        id=panel_id,
        net=net,
        layer=Layer.BEHAVIOUR,
        input_place="p1",
        output_place="p6",
    )


def sequential_action_template(
    page_count: int, layer: Layer = Layer.ACTION_F, panel_id: str = "action"
) -> Panel:
    """Action sublayer, sequential arrangement: a chain of pages."""
    if page_count < 1:
        raise StructuralError("page_count must be >= 1")
    places = (
        [Place("p_in", tokens=1)]
        + [Place(f"q{i}") for i in range(1, page_count + 1)]
        + [Place("p_out")]
    )
    transitions = [Transition(f"t{i}") for i in range(1, page_count + 2)]
    chain = ["p_in"] + [f"q{i}" for i in range(1, page_count + 1)] + ["p_out"]
    arcs = []
    for i in range(len(chain) - 1):
        arcs.append(Arc(chain[i], f"t{i + 1}"))
        arcs.append(Arc(f"t{i + 1}", chain[i + 1]))
    net = PetriNet(places, transitions, arcs)
    return Panel(
        id=panel_id, net=net, layer=layer, input_place="p_in", output_place="p_out"
    )


def parallel_action_template(
    page_count: int, layer: Layer = Layer.ACTION_SND, panel_id: str = "action"
) -> Panel:
    """Action sublayer, parallel arrangement: fork/join over the pages."""
    if page_count < 1:
        raise StructuralError("page_count must be >= 1")
    places = (
        [Place("p_in", tokens=1)]
        + [Place(f"q{i}") for i in range(1, page_count + 1)]
        + [Place("p_out")]
    )
    transitions = [Transition("t1"), Transition("t2")]
    arcs = [Arc("p_in", "t1"), Arc("t2", "p_out")]
    for i in range(1, page_count + 1):
        arcs.append(Arc("t1", f"q{i}"))
        arcs.append(Arc(f"q{i}", "t2"))
    net = PetriNet(places, transitions, arcs)
    return Panel(
        id=panel_id, net=net, layer=layer, input_place="p_in", output_place="p_out"
    )


def hybrid_action_template(
    net: PetriNet,
    input_place: str,
    output_place: str,
    layer: Layer = Layer.ACTION_F,
    panel_id: str = "action",
) -> Panel:
    """Action sublayer, user-supplied arrangement; validated, analyzed fresh."""
    panel = Panel(
        id=panel_id,
        net=net,
        layer=layer,
        input_place=input_place,
        output_place=output_place,
    )
    panel.validate()
    return panel


def comm_model_template(mode: CommMode, panel_id: str = "comm") -> Panel:
    """The shared communication net realizing all nine mode pairs.

    Sender side: p1 idle, t2 begins a send (t1 skips it), t4 writes the
    data flag p6, p3 waits for the receiver's acknowledgement p7. If the
    buffer still holds unread data at write time, t3+t16 replace it through
    the staging place p12; a stale acknowledgement is cleared by t5+t17
    through p13. t6 stops waiting (per the send timeout policy), t7
    completes on acknowledgement, t9 starts the next cycle.

    Receiver side: p8 idle, t10 consumes the data flag (t12 when a stale
    acknowledgement must be cleared first), t13 acknowledges into p7,
    t11 stops waiting per the receive timeout policy.

    The marking-dependent choices (replace rather than duplicate the data
    flag, clear rather than duplicate the acknowledgement) are what the
    priorities on t3 and t12 encode; reachability honours them when asked
    to respect priorities. The three read arcs (self-loops) on t3 and t8
    mirror the drawn model and are removed by purification before any
    matrix-based analysis, which is the only analysis route used.
    """
    send_guard = _timeout_guard(mode.send_timeout, SEND_TIMEOUT_ATOM)
    recv_guard = _timeout_guard(mode.recv_timeout, RECV_TIMEOUT_ATOM)

    places = [
        Place("p1", tokens=1, operation="sender idle"),
        Place("p2", operation="write buffer"),
        Place("p3", operation="await acknowledgement"),
        Place("p4"),
        Place("p5", operation="send finished"),
        Place("p6", operation="fresh data flag"),
        Place("p7", operation="acknowledgement flag"),
        Place("p8", tokens=1, operation="receiver idle"),
        Place("p9", operation="data received"),
        Place("p10"),
        Place("p11", operation="receive finished"),
        Place("p12", operation="replace buffer"),
        Place("p13", operation="refresh buffer"),
    ]
    transitions = [
        Transition("t1"),
        Transition("t2"),
        Transition("t3", priority=1),
        Transition("t4"),
        Transition("t5"),
        Transition("t6", guard=send_guard),
        Transition("t7"),
        Transition("t8"),
        Transition("t9"),
        Transition("t10"),
        Transition("t11", guard=recv_guard),
        Transition("t12", priority=1),
        Transition("t13"),
        Transition("t14"),
        Transition("t15"),
        Transition("t16"),
        Transition("t17"),
    ]
    arcs = [
        Arc("p1", "t1"), Arc("t1", "p5"),
        Arc("p1", "t2"), Arc("t2", "p2"),
        Arc("p2", "t3"), Arc("p6", "t3"), Arc("t3", "p12"),
        Arc("p2", "t4"), Arc("t4", "p3"), Arc("t4", "p6"),
        Arc("p3", "t5"), Arc("p6", "t5"), Arc("p7", "t5"), Arc("t5", "p13"),
        Arc("p3", "t6"), Arc("t6", "p4"),
        Arc("p3", "t7"), Arc("p7", "t7"), Arc("t7", "p5"),
        Arc("p4", "t8"), Arc("t8", "p5"),
        Arc("p5", "t9"), Arc("t9", "p1"),
        Arc("p6", "t10"), Arc("p8", "t10"), Arc("t10", "p9"),
        Arc("p8", "t11"), Arc("t11", "p10"),
        Arc("p6", "t12"), Arc("p7", "t12"), Arc("p8", "t12"), Arc("t12", "p9"),
        Arc("p9", "t13"), Arc("t13", "p7"), Arc("t13", "p11"),
        Arc("p10", "t14"), Arc("t14", "p11"),
        Arc("p11", "t15"), Arc("t15", "p8"),
        Arc("p12", "t16"), Arc("t16", "p3"), Arc("t16", "p6"),
        Arc("p13", "t17"), Arc("t17", "p3"), Arc("t17", "p6"),
        # read arcs of the drawn model; purification strips them
        Arc("p7", "t3"), Arc("t3", "p7"),
        Arc("p3", "t8"), Arc("t8", "p3"),
        Arc("p7", "t8"), Arc("t8", "p7"),
    ]
    net = PetriNet(places, transitions, arcs)
    return Panel(id=panel_id, net=net, layer=Layer.COMM_MODEL)


def _timeout_guard(timeout: Timeout, atom: str) -> Guard | None:
    if timeout is Timeout.ZERO:
        return None  # stop waiting immediately: unguarded
    if timeout is Timeout.INFINITE:
        return FALSE  # never stop waiting
    return Atom(atom)


def comm_model_halves(
    mode: CommMode,
    send_panel_id: str = "snd",
    recv_panel_id: str = "rcv",
    channel: str = "chan",
) -> HierarchicalNet:
    """The communication model as two panels joined by fusion places.

    Flattening this hierarchy reproduces the single shared net (up to node
    naming), which is how the send and receive sublayers of two
    communicating subsystems form one analyzable net.
    """
    whole = comm_model_template(mode).net
    send_transitions = {f"t{i}" for i in (1, 2, 3, 4, 5, 6, 7, 8, 9, 16, 17)}
    send_places = {"p1", "p2", "p3", "p4", "p5", "p12", "p13", "p6", "p7"}
    recv_places = {"p8", "p9", "p10", "p11", "p6", "p7"}

    def subnet(place_names, transition_names):
        places = [p for p in whole.places if p.name in place_names]
        transitions = [t for t in whole.transitions if t.name in transition_names]
        arcs = [
            a
            for a in whole.arcs
            if (a.source in place_names or a.source in transition_names)
            and (a.target in place_names or a.target in transition_names)
        ]
        return PetriNet(places, transitions, arcs)

    snd = Panel(
        id=send_panel_id,
        net=subnet(send_places, send_transitions),
        layer=Layer.COMM_MODEL,
    )
    rcv = Panel(
        id=recv_panel_id,
        net=subnet(recv_places, {f"t{i}" for i in range(10, 16)}),
        layer=Layer.COMM_MODEL,
    )
    fusion = {
        f"{channel}.data": ((send_panel_id, "p6"), (recv_panel_id, "p6")),
        f"{channel}.ack": ((send_panel_id, "p7"), (recv_panel_id, "p7")),
    }
    return HierarchicalNet(
        panels={snd.id: snd, rcv.id: rcv}, root=send_panel_id, fusion_sets=fusion
    )


def generate_template(kind: str, **params) -> Panel:
    """Dispatch by template kind name (as used in the model format)."""
    kind = kind.lower()
    panel_id = params.pop("panel_id", None)
    if kind == "system":
        return system_template(int(params.pop("agents")), panel_id or "system")
    if kind == "agent":
        return agent_template(int(params.pop("subsystems")), panel_id or "agent")
    if kind == "behaviour":
        return behaviour_template(panel_id or "behaviour")
    if kind == "sequential":
        layer = Layer(params.pop("layer", Layer.ACTION_F))
        return sequential_action_template(
            int(params.pop("pages")), layer, panel_id or "action"
        )
    if kind == "parallel":
        layer = Layer(params.pop("layer", Layer.ACTION_SND))
        return parallel_action_template(
            int(params.pop("pages")), layer, panel_id or "action"
        )
    if kind == "comm":
        mode = CommMode.from_codes(params.pop("send"), params.pop("recv"))
        return comm_model_template(mode, panel_id or "comm")
    raise StructuralError(f"unknown template kind {kind!r}")


# --- structural rules --------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return self.message


def validate_subsystem_net(net: PetriNet) -> list[Violation]:
    """Check the task-net structure rules.

    Every incidence row must contain exactly one -1 and one +1 (each
    transition moves exactly one token), the net must have no self-loops,
    and an open net must have exactly one input and one output place. A
    closed task net (output already looped back to the input) passes the
    boundary check vacuously.
    """
    violations: list[Violation] = []
    for t, p in net.self_loop_pairs():
        violations.append(
            Violation(
                code="self-loop",
                message=(
                    f"self-loop {net.transitions[t].name} <-> {net.places[p].name}"
                ),
            )
        )
    matrix = incidence_matrix(net)
    looped = {t for t, _ in matrix.self_loops}
    for i, row in enumerate(matrix.rows):
        name = net.transitions[i].name
        negatives = [v for v in row if v < 0]
        positives = [v for v in row if v > 0]
        if sum(row) != 0:
            violations.append(
                Violation(
                    code="token-nonconservation",
                    message=f"row {name}: token non-conservation",
                )
            )
        elif negatives == [-1] and positives == [1]:
            continue
        elif not negatives and not positives:
            if not any(
                loop_t == name for loop_t, _ in matrix.self_loops
            ):
                violations.append(
                    Violation(
                        code="disconnected-row",
                        message=f"row {name}: transition moves no token",
                    )
                )
        else:
            violations.append(
                Violation(
                    code="row-shape",
                    message=(
                        f"row {name}: expected exactly one -1 and one +1, "
                        f"got {tuple(row)}"
                    ),
                )
            )
    inputs = net.input_places()
    outputs = net.output_places()
    if inputs or outputs:
        if len(inputs) != 1:
            names = [net.places[i].name for i in inputs]
            violations.append(
                Violation(
                    code="input-place",
                    message=f"expected exactly one input place, found {names}",
                )
            )
        if len(outputs) != 1:
            names = [net.places[i].name for i in outputs]
            violations.append(
                Violation(
                    code="output-place",
                    message=f"expected exactly one output place, found {names}",
                )
            )
    return violations


@dataclass(frozen=True)
class DeterminismVerdict:
    complete: bool
    exclusive: bool
    incompleteness_example: dict[str, bool] | None = None
    exclusivity_example: tuple[int, int, dict[str, bool]] | None = None
    aborted: bool = False

    @property
    def deterministic(self) -> bool:
        return self.complete and self.exclusive and not self.aborted


GUARD_ATOM_CAP = 20


def check_guard_determinism(
    guards: Sequence[Guard | None], atoms: Sequence[str] | None = None
) -> DeterminismVerdict:
    """Exhaustively check a choice's guards for completeness and exclusivity.

    Completeness: in every valuation at least one guard holds (no deadlock
    at the choice). Exclusivity: no valuation satisfies two guards at once
    (the next step is deterministic). Unguarded transitions count as
    constantly true. Enumeration is over all 2^k valuations and aborts
    explicitly beyond 20 atoms.
    """
    trees = [g if g is not None else Const(True) for g in guards]
    names: set[str] = set()
    for g in trees:
        names |= g.atoms()
    if atoms is not None:
        names |= set(atoms)
    if len(names) > GUARD_ATOM_CAP:
        return DeterminismVerdict(complete=False, exclusive=False, aborted=True)

    complete = True
    exclusive = True
    incompleteness = None
    exclusivity = None
    for valuation in all_valuations(sorted(names)):
        values = [g.evaluate(valuation) for g in trees]
        if complete and not any(values):
            complete = False
            incompleteness = dict(valuation)
        if exclusive:
            hot = [i for i, v in enumerate(values) if v]
            if len(hot) > 1:
                exclusive = False
                exclusivity = (hot[0], hot[1], dict(valuation))
        if not complete and not exclusive:
            break
    return DeterminismVerdict(
        complete=complete,
        exclusive=exclusive,
        incompleteness_example=incompleteness,
        exclusivity_example=exclusivity,
    )


# --- inheritance engine ------------------------------------------------------


@dataclass(frozen=True)
class AnalysisConfig:
    state_limit: int | None = None
    invariant_row_cap: int = inv.DEFAULT_ROW_CAP
    check_liveness: bool = False


@dataclass(frozen=True)
class PanelVerdict:
    conservativeness: inv.Conservativeness
    witness: tuple[int, ...] | None
    weighted_sum: int | None
    safe: bool
    deadlock_free: bool
    definitive: bool
    node_count: int


@dataclass
class PanelReportRow:
    panel_id: str
    layer: Layer
    user_defined: bool
    method: str  # "inherited" | "fresh" | "fresh (template mismatch: ...)"
    verdict: PanelVerdict | None
    violations: tuple[Violation, ...] = ()
    guard_deterministic: bool | None = None
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        if self.verdict is None:
            return False
        if self.violations:
            return False
        if self.guard_deterministic is False:
            return False
        v = self.verdict
        expected = _EXPECTED_CLASS.get(self.layer)
        if expected is not None and not _class_acceptable(
            v.conservativeness, v.witness, expected
        ):
            return False
        return v.safe and v.deadlock_free


@dataclass
class InheritanceReport:
    rows: list[PanelReportRow]
    footnotes: tuple[str, ...] = ()

    @property
    def overall_ok(self) -> bool:
        return all(row.ok for row in self.rows)

    @property
    def attention(self) -> list[str]:
        return [row.panel_id for row in self.rows if not row.ok]


_EXPECTED_CLASS = {
    Layer.SYSTEM: inv.Conservativeness.CONSERVATIVE,
    Layer.AGENT: inv.Conservativeness.CONSERVATIVE,
    Layer.SUBSYSTEM: inv.Conservativeness.STRICT,
    Layer.BEHAVIOUR: inv.Conservativeness.STRICT,
    Layer.COMM_MODEL: inv.Conservativeness.PARTIAL,
}


def _class_acceptable(actual, witness, expected) -> bool:
    if actual == expected:
        return True
    # a one-page fork/join or one-element chain degenerates to all-ones
    if (
        expected == inv.Conservativeness.CONSERVATIVE
        and actual == inv.Conservativeness.STRICT
    ):
        return True
    return False


PARALLEL_FOOTNOTE = (
    "parallel arrangement: the meta-model table prints weight vector "
    "(mu,1,...,1,mu) with weighted sum nu, where mu counts one buffer set "
    "and nu the other; for a concrete instance both equal the page count"
)


def analyze_hierarchy(
    h: HierarchicalNet, config: AnalysisConfig | None = None
) -> InheritanceReport:
    """Top-down pass attaching inherited or freshly computed verdicts.

    Every panel whose net matches its layer's fixed template inherits the
    meta-model verdict (computed once per template signature by the same
    pipeline and cached); user-defined panels (subsystem layer, hybrid
    arrangements, unrecognized shapes) and blocking-blocking communication
    models are analyzed fresh: close the loop, collapse pages, purify,
    then invariants plus reachability. Reachability runs in valued mode
    and honours declared priorities, so guard-encoded timeout policies and
    the communication net's marking-dependent choices are respected.
    """
    config = config or AnalysisConfig()
    h.validate()
    rows = []
    any_parallel = False
    for pid in sorted(h.panels):
        panel = h.panels[pid]
        row = _analyze_panel(panel, config)
        if panel.layer in (Layer.ACTION_F, Layer.ACTION_SND, Layer.ACTION_RCV):
            match = _recognize(panel)
            if match and match[0] == "parallel":
                any_parallel = True
        rows.append(row)
    footnotes = (PARALLEL_FOOTNOTE,) if any_parallel else ()
    return InheritanceReport(rows=rows, footnotes=footnotes)


_meta_cache: dict = {}


def _meta_verdict(key, builder, config) -> PanelVerdict:
    cached = _meta_cache.get(key)
    if cached is None:
        cached = _fresh_verdict(builder(), config)
        _meta_cache[key] = cached
    return cached


def _analyze_panel(panel: Panel, config: AnalysisConfig) -> PanelReportRow:
    match = _recognize(panel)
    user_defined = panel.layer in (Layer.SUBSYSTEM, Layer.OTHER) or match is None or (
        match is not None and match[0] == "hybrid"
    )

    notes: list[str] = []
    violations: tuple[Violation, ...] = ()
    guard_ok: bool | None = None

    if panel.layer == Layer.SUBSYSTEM:
        analysis_net = close_loop(panel) if not panel.closed else panel.net
        violations = tuple(validate_subsystem_net(purify(analysis_net).net))
        guard_ok = _choice_determinism(panel)

    inheritable = (
        match is not None
        and match[0] not in ("hybrid",)
        and panel.layer
        in (
            Layer.SYSTEM,
            Layer.AGENT,
            Layer.BEHAVIOUR,
            Layer.ACTION_F,
            Layer.ACTION_SND,
            Layer.ACTION_RCV,
            Layer.COMM_MODEL,
        )
    )
    if inheritable and match[0] == "comm":
        mode: CommMode = match[1]
        if mode.code == "B-B":
            inheritable = False
            notes.append("blocking-blocking communication: analyzed fresh")

    if inheritable:
        kind, param = match
        verdict = _meta_verdict((kind, param), lambda: _template_panel(kind, param), config)
        method = "inherited"
    else:
        if match is None and panel.layer not in (Layer.SUBSYSTEM, Layer.OTHER):
            method = "fresh (template mismatch)"
            notes.append(
                f"net does not match the fixed {panel.layer.value} template; analyzed fresh"
            )
        else:
            method = "fresh"
        verdict = _fresh_verdict(panel, config)

    return PanelReportRow(
        panel_id=panel.id,
        layer=panel.layer,
        user_defined=user_defined,
        method=method,
        verdict=verdict,
        violations=violations,
        guard_deterministic=guard_ok,
        notes=tuple(notes),
    )


def _template_panel(kind: str, param) -> Panel:
    if kind == "system":
        return system_template(param)
    if kind == "agent":
        return agent_template(param)
    if kind == "behaviour":
        return behaviour_template()
    if kind == "sequential":
        return sequential_action_template(param)
    if kind == "parallel":
        return parallel_action_template(param)
    if kind == "comm":
        return comm_model_template(param)
    raise AssertionError(kind)


def _fresh_verdict(panel: Panel, config: AnalysisConfig) -> PanelVerdict:
    net = panel.net if panel.closed else close_loop(panel)
    net = collapse_pages(
        Panel(
            id=panel.id,
            net=net,
            layer=panel.layer,
            input_place=panel.input_place,
            output_place=panel.output_place,
            page_bindings=panel.page_bindings,
        )
    ).net
    pure = purify(net).net
    matrix = incidence_matrix(pure)
    verdict = inv.classify_conservativeness(
        matrix, pure.initial_marking, max_rows=config.invariant_row_cap
    )
    graph = reach.build_graph(
        pure,
        mode="valued",
        state_limit=config.state_limit,
        respect_priorities=True,
    )
    basis = inv.minimal_place_invariants(matrix, max_rows=config.invariant_row_cap)
    props = reach.check_properties(
        graph,
        invariants=[i.weights for i in basis],
        check_liveness=config.check_liveness,
    )
    return PanelVerdict(
        conservativeness=verdict.classification,
        witness=verdict.witness,
        weighted_sum=verdict.weighted_sum,
        safe=props.safe,
        deadlock_free=props.deadlock_free,
        definitive=props.definitive,
        node_count=graph.node_count,
    )


def _choice_determinism(panel: Panel) -> bool | None:
    """Determinism of guarded choices at each place with several outgoing
    transitions; None when the panel has no guarded choice."""
    net = panel.net
    by_place: dict[int, list[int]] = {}
    for t in range(len(net.transitions)):
        for p, _ in net.pre[t]:
            by_place.setdefault(p, []).append(t)
    checked = False
    for p, ts in sorted(by_place.items()):
        if len(ts) < 2:
            continue
        guards = [net.transitions[t].guard for t in ts]
        if all(g is None for g in guards):
            continue
        checked = True
        if not check_guard_determinism(guards).deterministic:
            return False
    return True if checked else None


# --- template shape recognition ----------------------------------------------


def _recognize(panel: Panel):
    """Match a panel's net against its layer's fixed template shape.

    Returns (kind, param) or None. Recognition is structural: it compares
    places, transitions, arcs, guards and priorities against a freshly
    generated template, ignoring panel ids and bindings.
    """
    layer = panel.layer
    if layer == Layer.SYSTEM:
        n = len(panel.net.places) - 1
        if n >= 1 and _same_shape(panel, system_template(n)):
            return ("system", n)
        return None
    if layer == Layer.AGENT:
        n = len(panel.net.places) - 2
        if n >= 1 and _same_shape(panel, agent_template(n)):
            return ("agent", n)
        return None
    if layer == Layer.BEHAVIOUR:
        if _same_shape(panel, behaviour_template()):
            return ("behaviour", None)
        return None
    if layer in (Layer.ACTION_F, Layer.ACTION_SND, Layer.ACTION_RCV):
        n = len(panel.net.places) - 2
        if n >= 1 and _same_shape(panel, sequential_action_template(n)):
            return ("sequential", n)
        if n >= 1 and _same_shape(panel, parallel_action_template(n)):
            return ("parallel", n)
        return ("hybrid", None)
    if layer == Layer.COMM_MODEL:
        for mode in ALL_COMM_MODES:
            if _same_shape(panel, comm_model_template(mode)):
                return ("comm", mode)
        return None
    return None


def _same_shape(panel: Panel, template: Panel) -> bool:
    """Structural equality up to a name bijection.

    Uses an exact isomorphism search seeded by degree/annotation
    signatures; template nets are small and highly asymmetric, so the
    search is effectively linear.
    """
    a, b = panel.net, template.net
    if len(a.places) != len(b.places) or len(a.transitions) != len(b.transitions):
        return False
    if len(a.arcs) != len(b.arcs):
        return False
    if (panel.input_place is None) != (template.input_place is None):
        return False

    def place_sig(net, boundary_in, boundary_out):
        sigs = []
        pre_of: dict[int, list[int]] = {}
        post_of: dict[int, list[int]] = {}
        for t in range(len(net.transitions)):
            for p, w in net.pre[t]:
                post_of.setdefault(p, []).append(t)
            for p, w in net.post[t]:
                pre_of.setdefault(p, []).append(t)
        for i, p in enumerate(net.places):
            sigs.append(
                (
                    len(pre_of.get(i, ())),
                    len(post_of.get(i, ())),
                    p.tokens,
                    p.name == boundary_in,
                    p.name == boundary_out,
                )
            )
        return sigs

    def trans_sig(net):
        sigs = []
        for t in range(len(net.transitions)):
            tr = net.transitions[t]
            guard = None if tr.guard is None else tr.guard.to_text()
            sigs.append(
                (
                    tuple(sorted(w for _, w in net.pre[t])),
                    tuple(sorted(w for _, w in net.post[t])),
                    len(net.pre[t]),
                    len(net.post[t]),
                    guard,
                    tr.priority,
                )
            )
        return sigs

    pa = place_sig(a, panel.input_place, panel.output_place)
    pb = place_sig(b, template.input_place, template.output_place)
    ta = trans_sig(a)
    tb = trans_sig(b)
    if sorted(pa) != sorted(pb) or sorted(ta) != sorted(tb):
        return False
    return _isomorphic(a, b, pa, pb, ta, tb)


def _isomorphic(a, b, pa, pb, ta, tb) -> bool:
    # backtracking over transition assignment; place mapping follows arcs
    nb_trans = len(b.transitions)
    candidates = [
        [j for j in range(nb_trans) if tb[j] == ta[i]] for i in range(nb_trans)
    ]
    order = sorted(range(nb_trans), key=lambda i: len(candidates[i]))
    place_map: dict[int, int] = {}
    trans_used: set[int] = set()

    def try_map_places(t_a: int, t_b: int, undo: list[int]) -> bool:
        for (arcs_a, arcs_b) in ((a.pre[t_a], b.pre[t_b]), (a.post[t_a], b.post[t_b])):
            remaining = list(range(len(arcs_b)))
            for p, w in arcs_a:
                if p in place_map:
                    hit = next(
                        (
                            k
                            for k in remaining
                            if arcs_b[k][0] == place_map[p] and arcs_b[k][1] == w
                        ),
                        None,
                    )
                    if hit is None:
                        return False
                    remaining.remove(hit)
                else:
                    hit = next(
                        (
                            k
                            for k in remaining
                            if arcs_b[k][1] == w
                            and arcs_b[k][0] not in place_map.values()
                            and pb[arcs_b[k][0]] == pa[p]
                        ),
                        None,
                    )
                    if hit is None:
                        return False
                    place_map[p] = arcs_b[hit][0]
                    undo.append(p)
                    remaining.remove(hit)
        return True

    def backtrack(idx: int) -> bool:
        if idx == len(order):
            return True
        i = order[idx]
        for j in candidates[i]:
            if j in trans_used:
                continue
            undo: list[int] = []
            trans_used.add(j)
            if try_map_places(i, j, undo) and backtrack(idx + 1):
                return True
            trans_used.discard(j)
            for p in undo:
                del place_map[p]
        return False

    return backtrack(0)
