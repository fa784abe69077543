# app/services/kz_residues.py

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Tuple

from app.models.errors import GraphError, KZError
from app.services.graph_core import Branch, StableGraph, contract_edge, split_vertex, type_of
from app.services.ncseries import NCSeries, bracket, bernoulli_expansion, nc_ad_series

logger = logging.getLogger(__name__)


def loop_letters(loop: str) -> Tuple[str, str]:
    return f"T_{loop}", f"A_{loop}"


def tail_letter(tail: str) -> str:
    return f"X_{tail}"


def loop_substitution(loop: str, weight: int) -> Tuple[NCSeries, NCSeries, NCSeries]:
    """
    Residues around a degenerate elliptic tail: X_l = T/(e^T - 1) . A,
    X_-l = T/(e^-T - 1) . A and X_e = -[T, A], with T . A = [T, A].
    """
    if weight < 1:
        raise KZError("weight cutoff must be at least 1")
    T, A = loop_letters(loop)
    b = bernoulli_expansion(weight)
    x_plus = nc_ad_series({(k, 0): b[k] for k in range(weight)}, T, A, weight)
    x_minus = -nc_ad_series({(k, 0): b[k] * (-1) ** k for k in range(weight)}, T, A, weight)
    x_edge = -bracket(NCSeries.letter(T, weight), NCSeries.letter(A, weight))
    return x_plus, x_minus, x_edge


@dataclass
class ResidueAssignment:
    graph: StableGraph
    weight: int
    residues: Dict[Branch, NCSeries]
    eliminated: Optional[str] = None
    alphabet: List[str] = field(default_factory=list)

    def __getitem__(self, h: Branch) -> NCSeries:
        try:
            return self.residues[h]
        except KeyError:
            raise KZError(f"no residue assigned to {h}") from None


def _lollipop_shape(graph: StableGraph) -> Tuple[str, List[Tuple[str, str]]]:
    """(v0, [(loop id, connecting edge id)]) or an error when the graph is not of that shape."""
    if not graph.tails:
        raise KZError("tail required to realize the defining relation")
    centres = {t.vertex for t in graph.tails}
    if len(centres) != 1:
        raise KZError("all tails must sit on one vertex")
    v0 = centres.pop()
    pairs = []
    for v in graph.vertices:
        if v == v0:
            continue
        at_v = [e for e in graph.edges if v in (e.source, e.target)]
        loops = [e for e in at_v if e.is_loop]
        links = [e for e in at_v if not e.is_loop]
        if len(loops) != 1 or len(links) != 1 or v0 not in (links[0].source, links[0].target):
            raise KZError(f"vertex {v} is not a loop vertex attached to {v0}")
        pairs.append((loops[0].id, links[0].id))
    if any(e.is_loop and e.source == v0 for e in graph.edges):
        raise KZError(f"loops at {v0} are not supported; attach each loop through its own vertex")
    return v0, pairs


def base_assignment(graph: StableGraph, weight: int, eliminated: Optional[str] = None) -> ResidueAssignment:
    """
    Residues on the lollipop graph: tails get their letters, one tail letter
    is eliminated through sum X_t = sum [T_i, A_i], loops and connecting edges
    get the elliptic substitution.
    """
    v0, pairs = _lollipop_shape(graph)
    type_of(graph)
    if eliminated is None:
        eliminated = max(graph.tails, key=lambda t: t.nu).id
    graph.tail(eliminated)

    residues: Dict[Branch, NCSeries] = {}
    alphabet: List[str] = []
    commutators = NCSeries.zero(weight)
    for loop, link in sorted(pairs):
        x_plus, x_minus, x_edge = loop_substitution(loop, weight)
        residues[Branch(loop, 1)] = x_plus
        residues[Branch(loop, -1)] = x_minus
        toward = Branch(link, 1) if graph.terminal(Branch(link, 1)) == v0 else Branch(link, -1)
        residues[toward] = x_edge
        residues[-toward] = -x_edge
        commutators = commutators - x_edge
        alphabet += list(loop_letters(loop))

    others = NCSeries.zero(weight)
    for t in graph.tails:
        if t.id == eliminated:
            continue
        letter = NCSeries.letter(tail_letter(t.id), weight)
        residues[Branch(t.id, 0)] = letter
        others = others + letter
        alphabet.append(tail_letter(t.id))
    residues[Branch(eliminated, 0)] = commutators - others
    logger.info(f"base assignment on {len(graph.vertices)} vertices at weight {weight}, eliminated {eliminated}")
    return ResidueAssignment(graph, weight, residues, eliminated, sorted(alphabet))


def vertex_sums(assignment: ResidueAssignment) -> Dict[str, NCSeries]:
    graph = assignment.graph
    return {
        v: sum((assignment[h] for h in graph.branches_at(v)), NCSeries.zero(assignment.weight))
        for v in graph.vertices
    }


def edge_antisymmetry(assignment: ResidueAssignment) -> Dict[str, NCSeries]:
    """X_e + X_-e per non-loop edge; a loop l carries X_l + X_-l = -[T_l, A_l] instead."""
    return {
        e.id: assignment[Branch(e.id, 1)] + assignment[Branch(e.id, -1)]
        for e in assignment.graph.edges
        if not e.is_loop
    }


def is_balanced(assignment: ResidueAssignment) -> bool:
    return all(not s.terms for s in vertex_sums(assignment).values()) and all(
        not s.terms for s in edge_antisymmetry(assignment).values()
    )


def apply_expansion_rule(assignment: ResidueAssignment, h0: str) -> ResidueAssignment:
    """
    Residues on the graph obtained by contracting the edge h0: every branch
    other than +-h0 keeps its residue.
    """
    graph = assignment.graph
    try:
        contracted = contract_edge(graph, h0)
    except GraphError as e:
        raise KZError(f"cannot contract {h0}: {e}") from e
    residues = {h: x for h, x in assignment.residues.items() if h.id != h0 or h.is_tail}
    out = ResidueAssignment(contracted, assignment.weight, residues, assignment.eliminated, list(assignment.alphabet))
    logger.debug(f"contracted {h0}; {len(contracted.vertices)} vertices remain")
    return out


def expand_assignment(
    assignment: ResidueAssignment,
    v0: str,
    h1: Branch,
    h2: Branch,
    new_vertex: Optional[str] = None,
    new_edge: Optional[str] = None,
) -> Tuple[ResidueAssignment, str]:
    """Split v0 keeping h1, h2; the new edge gets X_h0 = -(X_h1 + X_h2)."""
    try:
        split, h0 = split_vertex(assignment.graph, v0, h1, h2, new_vertex, new_edge)
    except GraphError as e:
        raise KZError(f"cannot split {v0}: {e}") from e
    kept = assignment[h1] + assignment[h2]
    residues = dict(assignment.residues)
    residues[Branch(h0, 1)] = -kept
    residues[Branch(h0, -1)] = kept
    return ResidueAssignment(split, assignment.weight, residues, assignment.eliminated, list(assignment.alphabet)), h0


# KZ forms on components ---------------------------------------------------

@dataclass
class KZForm:
    """d - sum R_p dz/(z - p) on one component; a pole at None is infinity."""

    component: str
    poles: List[Tuple[Optional[Any], NCSeries]]

    def finite(self) -> List[Tuple[Any, NCSeries]]:
        return [(p, r) for p, r in self.poles if p is not None]

    def residue_sum(self) -> NCSeries:
        weight = min((r.weight for _, r in self.poles), default=0)
        return sum((r for _, r in self.poles), NCSeries.zero(weight))


def kz_form_on_component(assignment: ResidueAssignment, v: str, coordinates: Mapping[Branch, Any]) -> KZForm:
    """Poles x_h with residues X_h for the branches h ending at v."""
    graph = assignment.graph
    graph.require_vertex(v)
    poles: List[Tuple[Optional[Any], NCSeries]] = []
    seen = set()
    for h in graph.branches_at(v):
        if h not in coordinates:
            raise KZError(f"no coordinate for branch {h}")
        at = coordinates[h]
        key = None if at is None else complex(at)
        if key in seen:
            raise KZError(f"coincident poles at {at} on {v}")
        seen.add(key)
        poles.append((at, assignment[h]))
    form = KZForm(v, poles)
    if form.residue_sum().terms:
        raise KZError(f"residues on {v} do not sum to zero")
    return form


def standard_form(x0: str = "X0", x1: str = "X1", weight: int = 4) -> KZForm:
    """d - X0 dz/z - X1 dz/(z - 1) on P^1, with residue -X0 - X1 at infinity."""
    a, b = NCSeries.letter(x0, weight), NCSeries.letter(x1, weight)
    return KZForm("P1", [(Fraction(0), a), (Fraction(1), b), (None, -(a + b))])
