# app/services/differentials.py

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.models.errors import InputError, SchottkyError
from app.services.graph_core import Branch, tree_path
from app.services.moebius import ProjectivePoint
from app.services.rings import ComplexRing, SeriesRing, is_unit, is_zero
from app.services.schottky_engine import SchottkyGroup

logger = logging.getLogger(__name__)

KINDS = ("first", "second", "third")


# Pole data ----------------------------------------------------------------

def first_kind_poles(group: SchottkyGroup, i: int, length: Optional[int] = None) -> List[Tuple[ProjectivePoint, int]]:
    """Simple poles delta(alpha_i) (+1) and delta(alpha_-i) (-1) over the cosets of <gamma_i>."""
    poles = []
    for word, m in group.coset_reps(i, length):
        poles.append((group.fixed_point_image(word, i, m), 1))
        poles.append((group.fixed_point_image(word, -i, m), -1))
    return poles


def third_kind_poles(group: SchottkyGroup, t1: str, t2: str, length: Optional[int] = None) -> List[Tuple[ProjectivePoint, int]]:
    poles = []
    for word, m in group.enumerate_reduced_words(length):
        poles.append((group.tail_point_image(word, t1, m), 1))
        poles.append((group.tail_point_image(word, t2, m), -1))
    return poles


def _require_finite_base(group: SchottkyGroup) -> None:
    for h in group.graph.branches_at(group.base):
        if not h.is_tail and h in group.graph.infinity:
            raise SchottkyError(
                f"base vertex {group.base} carries the infinity branch {h}; choose another base"
            )


# Differentials ------------------------------------------------------------

@dataclass
class Differential:
    """
    A Poincare series differential f(z) dz of the first, second or third kind,
    summed over reduced words up to the group's cutoff.
    """

    kind: str
    group: SchottkyGroup
    index: int = 0
    tail: str = ""
    order: int = 0
    tails: Tuple[str, str] = ("", "")

    @property
    def label(self) -> str:
        if self.kind == "first":
            return f"omega_{self.index}"
        if self.kind == "second":
            return f"omega_{self.tail},{self.order}"
        return f"omega_{self.tails[0]},{self.tails[1]}"

    def simple_poles(self) -> List[Tuple[ProjectivePoint, int]]:
        if self.kind == "first":
            return first_kind_poles(self.group, self.index)
        if self.kind == "third":
            return third_kind_poles(self.group, *self.tails)
        raise InputError("second-kind differentials have no residues")

    @cached_property
    def _pole_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        points, residues = [], []
        for p, r in self.simple_poles():
            z = p.as_complex()
            if np.isfinite(z.real):
                points.append(z)
                residues.append(r)
        return np.array(points, dtype=complex), np.array(residues, dtype=float)

    @cached_property
    def _word_arrays(self) -> np.ndarray:
        entries = [[complex(x) for x in m.entries()] for _, m in self.group.enumerate_reduced_words()]
        return np.array(entries, dtype=complex).reshape(-1, 4)

    def __call__(self, z: Any) -> Any:
        if isinstance(self.group.ring, ComplexRing):
            return self._eval_complex(complex(self.group.ring.coerce(z)))
        return self._eval_exact(self.group.ring.coerce(z))

    def _eval_complex(self, z: complex) -> complex:
        guard = self.group.settings.pole_guard
        if self.kind in ("first", "third"):
            points, residues = self._pole_arrays
            gaps = z - points
            if gaps.size and np.min(np.abs(gaps)) < guard:
                raise SchottkyError(f"evaluation at pole near z = {z}")
            return complex(np.sum(residues / gaps))
        a, b, c, d = (self._word_arrays[:, k] for k in range(4))
        det = a * d - b * c
        k = self.order
        x = self.group.params.point(Branch(self.tail, 0))
        if x.is_infinite():
            den = c * z + d
            if np.min(np.abs(den)) < guard:
                raise SchottkyError(f"evaluation at pole near z = {z}")
            return complex(np.sum(det * (a * z + b) ** (k - 2) / den ** k))
        xt = x.as_complex()
        q = c * z + d
        den = (a * z + b) - xt * q
        if np.min(np.abs(den / q)) < guard:
            raise SchottkyError(f"evaluation at pole near z = {z}")
        return complex(np.sum(det * q ** (k - 2) / den ** k))

    def _eval_exact(self, z: Any) -> Any:
        ring = self.group.ring
        total = ring.zero()
        if self.kind in ("first", "third"):
            for p, r in self.simple_poles():
                den = z * p.w - p.u
                if not is_unit(den):
                    raise SchottkyError(f"evaluation at pole z = {z}")
                total = total + p.w * r / den
            return total
        x = self.group.params.point(Branch(self.tail, 0))
        k = self.order
        for word, raw in self.group.enumerate_reduced_words():
            m = self.group.path_matrix(word, raw)
            q = m.c * z + m.d
            if x.is_infinite():
                if not is_unit(q):
                    raise SchottkyError(f"evaluation at pole z = {z}")
                total = total + m.det * (m.a * z + m.b) ** (k - 2) / q ** k
                continue
            den = x.w * (m.a * z + m.b) - x.u * q
            if not is_unit(den):
                raise SchottkyError(f"evaluation at pole z = {z}")
            term = m.det * x.w ** k / den ** k
            total = total + term * q ** (k - 2)
        return total


def first_kind(group: SchottkyGroup, i: int) -> Differential:
    if not 1 <= i <= group.genus:
        raise InputError(f"first-kind index {i} outside 1..{group.genus}")
    return Differential("first", group, index=i)


def second_kind(group: SchottkyGroup, t: str, k: int) -> Differential:
    if k <= 1:
        raise InputError("second-kind differentials need order k >= 2")
    tail = group.graph.tail(t)
    if tail.vertex != group.base:
        raise SchottkyError(f"tail {t} is not at the base vertex {group.base}")
    _require_finite_base(group)
    return Differential("second", group, tail=t, order=k)


def third_kind(group: SchottkyGroup, t1: str, t2: str) -> Differential:
    if t1 == t2:
        raise InputError("third-kind differentials need two distinct tails")
    group.graph.tail(t1)
    group.graph.tail(t2)
    _require_finite_base(group)
    return Differential("third", group, tails=(t1, t2))


def eval_first_kind(group: SchottkyGroup, i: int, z: Any) -> Any:
    return first_kind(group, i)(z)


def eval_second_kind(group: SchottkyGroup, t: str, k: int, z: Any) -> Any:
    return second_kind(group, t, k)(z)


def eval_third_kind(group: SchottkyGroup, t1: str, t2: str, z: Any) -> Any:
    return third_kind(group, t1, t2)(z)


def parse_kind(group: SchottkyGroup, spec: str) -> Differential:
    """'first:i', 'second:t:k' or 'third:t1:t2'."""
    parts = [p.strip() for p in spec.split(":")]
    try:
        if parts[0] == "first" and len(parts) == 2:
            return first_kind(group, int(parts[1]))
        if parts[0] == "second" and len(parts) == 3:
            return second_kind(group, parts[1], int(parts[2]))
        if parts[0] == "third" and len(parts) == 3:
            return third_kind(group, parts[1], parts[2])
    except ValueError as e:
        raise InputError(f"bad differential spec {spec!r}: {e}") from e
    raise InputError(f"unknown differential kind {spec!r} (expected first:i, second:t:k or third:t1:t2)")


# Restriction to components ------------------------------------------------

@dataclass(frozen=True)
class PoleTerm:
    at: Optional[Fraction]  # None is infinity
    order: int
    coefficient: Fraction


@dataclass
class ComponentForm:
    """
    Rational 1-form on a component. A finite term c/(z - p)^k dz; an infinite
    term of order k >= 2 stands for c z^(k-2) dz.
    """

    component: str
    terms: List[PoleTerm] = field(default_factory=list)

    def __call__(self, z: Any) -> Fraction:
        z = Fraction(z)
        total = Fraction(0)
        for term in self.terms:
            if term.at is None:
                # a simple pole at infinity only records the residue
                if term.order > 1:
                    total += term.coefficient * z ** (term.order - 2)
            else:
                if z == term.at:
                    raise SchottkyError(f"evaluation at pole z = {z}")
                total += term.coefficient / (z - term.at) ** term.order
        return total

    def residue_at(self, at: Optional[Fraction]) -> Fraction:
        finite = sum((t.coefficient for t in self.terms if t.order == 1 and t.at is not None), Fraction(0))
        if at is None:
            return -finite
        return sum((t.coefficient for t in self.terms if t.order == 1 and t.at == at), Fraction(0))

    def key(self) -> Tuple[Tuple[Any, int, Fraction], ...]:
        return tuple(sorted(((t.at is None, t.at or 0), t.order, t.coefficient) for t in self.terms))

    def same_as(self, other: "ComponentForm") -> bool:
        return self.key() == other.key()


def _constant_location(p: ProjectivePoint) -> Optional[Fraction]:
    q = p.constant()
    if is_zero(q.w):
        return None
    return Fraction(q.u)


def _collect(component: str, items: Iterable[Tuple[Optional[Fraction], int, Fraction]]) -> ComponentForm:
    merged: Dict[Tuple[Optional[Fraction], int], Fraction] = {}
    for at, order, coeff in items:
        merged[(at, order)] = merged.get((at, order), Fraction(0)) + coeff
    terms = [PoleTerm(at, order, c) for (at, order), c in merged.items() if c != 0]
    terms.sort(key=lambda t: (t.at is None, t.at or 0, t.order))
    return ComponentForm(component, terms)


def restrict_to_component(diff: Differential, v: str) -> ComponentForm:
    """The y = 0 specialisation of the differential on the component P_v."""
    group = diff.group
    if not isinstance(group.ring, SeriesRing):
        raise InputError("restriction to components needs the series ring")
    group.graph.require_vertex(v)
    if diff.kind == "first":
        local = group.rebased(v)
        poles = first_kind_poles(local, diff.index)
        return _collect(v, ((_constant_location(p), 1, Fraction(r)) for p, r in poles))
    if diff.kind == "third":
        local = group.rebased(v)
        poles = third_kind_poles(local, *diff.tails)
        return _collect(v, ((_constant_location(p), 1, Fraction(r)) for p, r in poles))
    return _restrict_second_kind(diff, v)


def _restrict_second_kind(diff: Differential, v: str) -> ComponentForm:
    # Pull each word back to P_v through the tree path; only words whose
    # determinant is a unit survive the specialisation.
    group = diff.group
    chart = tree_path(group.graph, v, group.base)
    x = group.params.point(Branch(diff.tail, 0)).constant()
    items = []
    for word, m in group.enumerate_reduced_words():
        pulled = group.path_matrix(word, m, chart).constant()
        if is_unit(pulled.det):
            if not (is_zero(pulled.b) and is_zero(pulled.c)) or pulled.a != pulled.d:
                raise SchottkyError(f"unexpected invertible word {word} in the special fibre")
            items.append((None if is_zero(x.w) else Fraction(x.u), diff.order, Fraction(1)))
            continue
        # the image collapses to a point; the term vanishes unless that point is x_t
        den = (x.w * pulled.a - x.u * pulled.c, x.w * pulled.b - x.u * pulled.d)
        if is_zero(den[0]) and is_zero(den[1]):
            raise SchottkyError(f"indeterminate restriction of {diff.label} along word {word}")
    return _collect(v, items)


def closed_form_restriction(diff: Differential, v: str) -> ComponentForm:
    """The special-fibre form read off the graph combinatorics alone."""
    group = diff.group
    graph = group.graph
    x = group.params.x
    items: List[Tuple[Optional[Fraction], int, Fraction]] = []
    if diff.kind == "first":
        kappa = group.generators[diff.index - 1].kappa
        for h in kappa:
            if graph.terminal(h) == v:
                items.append((_constant_location(x[h]), 1, Fraction(1)))
            if graph.terminal(-h) == v:
                items.append((_constant_location(x[-h]), 1, Fraction(-1)))
    elif diff.kind == "third":
        for t, sign in zip(diff.tails, (1, -1)):
            start = graph.tail(t).vertex
            if start == v:
                h = Branch(t, 0)
            else:
                h = tree_path(graph, start, v).branches[-1]
            items.append((_constant_location(x[h]), 1, Fraction(sign)))
    else:
        if graph.tail(diff.tail).vertex == v:
            items.append((_constant_location(x[Branch(diff.tail, 0)]), diff.order, Fraction(1)))
    return _collect(v, items)


def node_residue_balance(diff: Differential) -> Dict[str, Fraction]:
    """Residue at x_e plus residue at x_-e, per edge, on the special fibre."""
    graph = diff.group.graph
    forms = {v: restrict_to_component(diff, v) for v in graph.vertices}
    out = {}
    for e in graph.edges:
        total = Fraction(0)
        for h in (Branch(e.id, 1), Branch(e.id, -1)):
            total += forms[graph.terminal(h)].residue_at(_constant_location(diff.group.params.x[h]))
        out[e.id] = total
    return out


# Partial degeneration -----------------------------------------------------

@dataclass
class DegeneratePole:
    point: ProjectivePoint
    residue: int


def vertex_classes(group: SchottkyGroup, edges: Sequence[str]) -> List[List[str]]:
    """Vertices joined by edges whose parameters stay alive."""
    graph = group.graph
    dead = set(edges)
    G = nx.MultiGraph()
    G.add_nodes_from(graph.vertices)
    for e in graph.edges:
        if e.id not in dead:
            G.add_edge(e.source, e.target, key=e.id)
    return sorted(sorted(c) for c in nx.connected_components(G))


def degenerate_forms(group: SchottkyGroup, edges: Sequence[str]) -> List[Tuple[List[str], str, List[DegeneratePole]]]:
    """First-kind poles with y_e = 0 for e in edges, per class of still-joined vertices."""
    if not isinstance(group.ring, SeriesRing):
        raise InputError("degeneration needs the series ring")
    for eid in edges:
        if eid not in group.graph.edge_ids:
            raise InputError(f"unknown edge {eid!r}")
    out = []
    for members in vertex_classes(group, edges):
        local = group.rebased(members[0])
        for i in range(1, group.genus + 1):
            merged: Dict[ProjectivePoint, int] = {}
            for p, r in first_kind_poles(local, i):
                q = ProjectivePoint(p.u.substitute_zero(edges), p.w.substitute_zero(edges)).normalized()
                merged[q] = merged.get(q, 0) + r
            poles = [DegeneratePole(p, r) for p, r in merged.items() if r != 0]
            out.append((members, f"omega_{i}", poles))
        logger.debug(f"degenerated class {members}")
    return out
