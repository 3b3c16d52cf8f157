"""Place and transition invariants, and the verdicts built on them.

Minimal semi-positive invariants are enumerated with the Farkas-style
elimination procedure: start from unit vectors, eliminate one equation at
a time by combining rows of opposite residual sign, keep only rows with
componentwise-minimal gcd-normalized weights and minimal supports. Exact
integer arithmetic throughout; an explicit cap on intermediate rows guards
against exponential blowup (exceeding it raises, never silently returns a
wrong basis).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import gcd
from typing import Sequence

from .errors import InvariantEnumerationAborted, StructuralError
from .net import IncidenceMatrix, Marking, PetriNet, incidence_matrix

DEFAULT_ROW_CAP = 10_000


@dataclass(frozen=True)
class PlaceInvariant:
    """Semi-positive weight vector y with N y = 0."""

    weights: tuple[int, ...]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, w in enumerate(self.weights) if w)

    def weighted_sum(self, marking: Marking) -> int:
        return sum(w * m for w, m in zip(self.weights, marking))


@dataclass(frozen=True)
class TransitionInvariant:
    """Semi-positive firing-count vector x with N^T x = 0."""

    counts: tuple[int, ...]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, c in enumerate(self.counts) if c)


class Conservativeness(str, Enum):
    STRICT = "strictly conservative"
    CONSERVATIVE = "conservative"
    PARTIAL = "partially conservative"
    NOT_CONSERVATIVE = "not conservative"


@dataclass(frozen=True)
class ConservativenessVerdict:
    classification: Conservativeness
    witness: tuple[int, ...] | None
    weighted_sum: int | None
    basis_linearly_independent: bool

    @property
    def conservative(self) -> bool:
        return self.classification in (
            Conservativeness.STRICT,
            Conservativeness.CONSERVATIVE,
            Conservativeness.PARTIAL,
        )


@dataclass(frozen=True)
class InvariantCheck:
    holds: bool
    trivial: bool

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class SafetyEstimate:
    """Invariant-based bound; `unknown` defers to exact reachability."""

    kind: str  # "safe" | "bounded" | "unknown"
    bound: int | None
    uncovered: tuple[int, ...] = ()


@dataclass(frozen=True)
class LivenessEvidence:
    found: bool
    witness_counts: tuple[int, ...] | None = None
    witness_sequence: tuple[int, ...] | None = None


def _normalize(vec: list[int]) -> tuple[int, ...]:
    g = 0
    for v in vec:
        g = gcd(g, v)
    if g > 1:
        return tuple(v // g for v in vec)
    return tuple(vec)


def _minimal_semiflows(
    columns: Sequence[Sequence[int]], max_rows: int
) -> list[tuple[int, ...]]:
    """Minimal-support semi-positive integer solutions of sum_j y_j*columns[j] = 0."""
    nvar = len(columns)
    neq = len(columns[0]) if nvar else 0
    rows: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    for j in range(nvar):
        y = [0] * nvar
        y[j] = 1
        rows.append((tuple(y), tuple(columns[j])))

    for k in range(neq):
        positive = [r for r in rows if r[1][k] > 0]
        negative = [r for r in rows if r[1][k] < 0]
        combined = [r for r in rows if r[1][k] == 0]
        for yp, rp in positive:
            for yn, rn in negative:
                a, b = -rn[k], rp[k]
                y = [a * u + b * v for u, v in zip(yp, yn)]
                g = 0
                for v in y:
                    g = gcd(g, v)
                if g > 1:
                    y = [v // g for v in y]
                    resid = tuple(
                        (a * u + b * v) // g for u, v in zip(rp, rn)
                    )
                else:
                    resid = tuple(a * u + b * v for u, v in zip(rp, rn))
                combined.append((tuple(y), resid))
        rows = _prune(combined)
        if len(rows) > max_rows:
            raise InvariantEnumerationAborted(
                f"invariant enumeration aborted: {len(rows)} intermediate rows "
                f"exceed the cap of {max_rows}"
            )

    solutions = sorted({y for y, resid in rows})
    return _minimal_support_only(solutions)


def _prune(rows):
    # drop duplicates and rows whose support strictly contains another row's
    unique = {}
    for y, r in rows:
        unique.setdefault(y, (y, r))
    supports = {
        y: frozenset(i for i, v in enumerate(y) if v) for y in unique
    }
    kept = []
    items = list(unique.values())
    for y, r in items:
        s = supports[y]
        dominated = any(
            supports[y2] < s for y2, _ in items if y2 != y
        )
        if not dominated:
            kept.append((y, r))
    return kept


def _minimal_support_only(vectors: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    out = []
    supports = [frozenset(i for i, v in enumerate(vec) if v) for vec in vectors]
    for i, vec in enumerate(vectors):
        if not supports[i]:
            continue
        if any(j != i and supports[j] < supports[i] for j in range(len(vectors))):
            continue
        out.append(vec)
    return sorted(out, key=lambda v: (sorted(frozenset(i for i, x in enumerate(v) if x)), v))


def minimal_place_invariants(
    source: IncidenceMatrix | PetriNet, max_rows: int = DEFAULT_ROW_CAP
) -> list[PlaceInvariant]:
    """Complete minimal-support semi-positive basis of N y = 0.

    The caller is expected to purify impure nets first; the matrix of an
    impure net still yields correct invariants (self-loops cancel), but the
    downstream safety reasoning assumes purity.
    """
    matrix = incidence_matrix(source) if isinstance(source, PetriNet) else source
    nt, np_ = matrix.transition_count, matrix.place_count
    columns = [[matrix.rows[i][j] for i in range(nt)] for j in range(np_)]
    return [PlaceInvariant(weights=v) for v in _minimal_semiflows(columns, max_rows)]


def minimal_transition_invariants(
    source: IncidenceMatrix | PetriNet, max_rows: int = DEFAULT_ROW_CAP
) -> list[TransitionInvariant]:
    """Complete minimal-support semi-positive basis of N^T x = 0."""
    matrix = incidence_matrix(source) if isinstance(source, PetriNet) else source
    nt, np_ = matrix.transition_count, matrix.place_count
    columns = [[matrix.rows[i][j] for j in range(np_)] for i in range(nt)]
    return [TransitionInvariant(counts=v) for v in _minimal_semiflows(columns, max_rows)]


def verify_invariant(
    source: IncidenceMatrix | PetriNet,
    vector: Sequence[int],
    kind: str,
) -> InvariantCheck:
    """Check a candidate vector against its defining equation.

    kind="place" checks N y = 0, kind="transition" checks N^T x = 0.
    The zero vector satisfies either equation algebraically and is flagged
    trivial.
    """
    matrix = incidence_matrix(source) if isinstance(source, PetriNet) else source
    nt, np_ = matrix.transition_count, matrix.place_count
    if kind == "place":
        if len(vector) != np_:
            raise StructuralError(f"place vector length {len(vector)} != |P| = {np_}")
        holds = all(
            sum(matrix.rows[i][j] * vector[j] for j in range(np_)) == 0
            for i in range(nt)
        )
    elif kind == "transition":
        if len(vector) != nt:
            raise StructuralError(f"transition vector length {len(vector)} != |T| = {nt}")
        holds = all(
            sum(matrix.rows[i][j] * vector[i] for i in range(nt)) == 0
            for j in range(np_)
        )
    else:
        raise ValueError(f"kind must be 'place' or 'transition', got {kind!r}")
    return InvariantCheck(holds=holds, trivial=not any(vector))


def _linearly_independent(vectors: list[tuple[int, ...]]) -> bool:
    # rank over the rationals via fraction Gaussian elimination
    if not vectors:
        return True
    matrix = [[Fraction(v) for v in vec] for vec in vectors]
    rank = 0
    cols = len(matrix[0])
    for col in range(cols):
        pivot = next(
            (r for r in range(rank, len(matrix)) if matrix[r][col] != 0), None
        )
        if pivot is None:
            continue
        matrix[rank], matrix[pivot] = matrix[pivot], matrix[rank]
        inv = 1 / matrix[rank][col]
        matrix[rank] = [x * inv for x in matrix[rank]]
        for r in range(len(matrix)):
            if r != rank and matrix[r][col] != 0:
                factor = matrix[r][col]
                matrix[r] = [a - factor * b for a, b in zip(matrix[r], matrix[rank])]
        rank += 1
    return rank == len(vectors)


def classify_conservativeness(
    source: IncidenceMatrix | PetriNet,
    m0: Marking,
    max_rows: int = DEFAULT_ROW_CAP,
) -> ConservativenessVerdict:
    """Classify by summing the minimal invariant basis.

    Sum s of the basis: all-ones (after gcd rescaling) means strictly
    conservative, all-positive means conservative, any zero component with
    s != 0 means partially conservative, empty basis means not conservative.
    The weighted sum is s . m0.
    """
    invariants = minimal_place_invariants(source, max_rows=max_rows)
    independent = _linearly_independent([inv.weights for inv in invariants])
    if not invariants:
        return ConservativenessVerdict(
            classification=Conservativeness.NOT_CONSERVATIVE,
            witness=None,
            weighted_sum=None,
            basis_linearly_independent=independent,
        )
    nplaces = len(invariants[0].weights)
    total = [0] * nplaces
    for inv in invariants:
        for i, w in enumerate(inv.weights):
            total[i] += w
    witness = _normalize(total)
    weighted_sum = sum(w * m for w, m in zip(witness, m0))
    if all(w == 1 for w in witness):
        classification = Conservativeness.STRICT
    elif all(w > 0 for w in witness):
        classification = Conservativeness.CONSERVATIVE
    else:
        classification = Conservativeness.PARTIAL
    return ConservativenessVerdict(
        classification=classification,
        witness=witness,
        weighted_sum=weighted_sum,
        basis_linearly_independent=independent,
    )


def safety_from_invariants(
    invariants: Sequence[PlaceInvariant], m0: Marking
) -> SafetyEstimate:
    """Bound token counts from invariant supports, if every place is covered.

    Place p covered by invariant y is bounded by floor(y.m0 / y_p). If some
    place lies outside every support the estimate is unknown and exact
    reachability has to decide.
    """
    nplaces = len(m0)
    bounds: list[int | None] = [None] * nplaces
    for inv in invariants:
        total = inv.weighted_sum(m0)
        for p in inv.support:
            b = total // inv.weights[p]
            if bounds[p] is None or b < bounds[p]:
                bounds[p] = b
    uncovered = tuple(p for p in range(nplaces) if bounds[p] is None)
    if uncovered:
        return SafetyEstimate(kind="unknown", bound=None, uncovered=uncovered)
    worst = max((b for b in bounds if b is not None), default=0)
    if worst <= 1:
        return SafetyEstimate(kind="safe", bound=1)
    return SafetyEstimate(kind="bounded", bound=worst)


def liveness_evidence(
    t_invariants: Sequence[TransitionInvariant],
    net: PetriNet,
    m0: Marking,
    graph=None,
    state_limit: int = 100_000,
) -> LivenessEvidence:
    """Look for a full-support invariant combination realizable from m0.

    The basis sum is the natural candidate: if its support covers every
    transition and a firing sequence realizing it from m0 back to m0 exists
    in the reachability graph, the net can exercise every transition and
    return, which rules out deadlock along that cycle. Absence of evidence
    is not a disproof.
    """
    from . import reachability

    if not t_invariants:
        return LivenessEvidence(found=False)
    ntrans = len(net.transitions)
    total = [0] * ntrans
    for inv in t_invariants:
        for i, c in enumerate(inv.counts):
            total[i] += c
    if any(c == 0 for c in total):
        return LivenessEvidence(found=False)
    if graph is None:
        graph = reachability.build_graph(net, state_limit=state_limit)
    sequence = reachability.find_cycle_realizing(graph, tuple(total))
    if sequence is None:
        return LivenessEvidence(found=False)
    return LivenessEvidence(
        found=True, witness_counts=tuple(total), witness_sequence=tuple(sequence)
    )
