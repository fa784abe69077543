# app/services/splitting.py

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from app.models.errors import InputError, SchottkyError
from app.models.schemas import ParamsFile
from app.services.graph_core import Branch, EdgePath, StableGraph, reduce_path, split_vertex
from app.services.moebius import ProjectivePoint, delta, fixed_points, multiplier, word_to_map
from app.services.params import EdgeParameters, default_base
from app.services.rings import SeriesRing, TruncatedSeries
from app.services.schottky_engine import SchottkyGroup, Word, reduce_word
from app.services.serialization import decode_scalar, encode_scalar

logger = logging.getLogger(__name__)

# (relation, constant term of the quotient or None when the monomial does not divide, is a unit)
Relation = Tuple[str, Optional[Fraction], bool]


@dataclass(frozen=True)
class Split:
    """
    The wider graph replaces `vertex` of `graph` by the edge h0: h1, h2 and h0
    end at `vertex`, every other branch of it moves to `moved_to` = v_-h0.
    """

    graph: StableGraph
    wider: StableGraph
    vertex: str
    moved_to: str
    h0: str
    h1: Branch
    h2: Branch

    @property
    def inverse_pair(self) -> bool:
        return not self.h1.is_tail and self.h2 == -self.h1

    @property
    def kept_edges(self) -> List[str]:
        return [h.id for h in (self.h1, self.h2) if not h.is_tail]

    def chart(self, v: str) -> str:
        """Vertex of the wider graph whose chart serves as the chart of v."""
        return self.moved_to if v == self.vertex else v

    def bridge(self, here: str, there: str) -> Branch:
        if (here, there) == (self.moved_to, self.vertex):
            return Branch(self.h0, 1)
        if (here, there) == (self.vertex, self.moved_to):
            return Branch(self.h0, -1)
        raise SchottkyError(f"no bridge from {here} to {there} across {self.h0}")

    def atom_path(self, h: Branch) -> Tuple[Branch, ...]:
        """The path of the wider graph that plays the part of the branch h."""
        path = (h,)
        if self.wider.terminal(-h) == self.vertex:
            path = (Branch(self.h0, 1),) + path
        if self.wider.terminal(h) == self.vertex:
            path = path + (Branch(self.h0, -1),)
        return path


def make_split(
    graph: StableGraph,
    v0: str,
    h1: Branch,
    h2: Branch,
    new_vertex: Optional[str] = None,
    new_edge: Optional[str] = None,
) -> Split:
    wider, h0 = split_vertex(graph, v0, h1, h2, new_vertex, new_edge)
    return Split(graph, wider, v0, wider.terminal(Branch(h0, -1)), h0, h1, h2)


# --- parameters -------------------------------------------------------------

def _is_infinite(value: Any) -> bool:
    return isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞")


def _number(value: Any) -> Any:
    if isinstance(value, float):
        return complex(value)
    return decode_scalar(value)


def default_scale(split: Split, model: ParamsFile) -> Any:
    """sqrt of the largest |y| among the edges of h1, h2 (all edges if both are tails), at most 1/10."""
    names = split.kept_edges or list(model.y)
    sizes = [abs(_number(model.y[n])) for n in names if n in model.y]
    if not sizes:
        return Fraction(1, 10)
    return min(0.1, math.sqrt(float(max(sizes))))


def params_for_split(split: Split, model: ParamsFile, scale: Optional[Any] = None) -> ParamsFile:
    """
    Parameters for the wider graph. Branches that move keep their points; h1
    and h2 keep theirs in the chart of the small vertex, where x[h0] is the
    reflection of x[h1] in x[h2]; x[-h0] takes the place of the pair next to
    the moved branches. The new edge gets y = scale and, unless h1 = -h2, the
    edges of h1 and h2 are divided by it, so that y[e_i] ~ s[h0] s[e_i].
    """
    pair = []
    for h in (split.h1, split.h2):
        raw = model.x.get(str(h))
        if raw is None:
            raise InputError(f"missing parameter x[{h}]")
        if _is_infinite(raw):
            raise InputError(f"x[{h}] = inf: the branches kept at {split.vertex} need finite points")
        pair.append(_number(raw))
    x1, x2 = pair

    taken = [
        _number(model.x[str(h)])
        for h in split.wider.branches_at(split.moved_to)
        if str(h) in model.x and not _is_infinite(model.x[str(h)])
    ]
    candidates = [(x1 + x2) / 2, (x1 + 2 * x2) / 3, (2 * x1 + x2) / 3]
    candidates += [Fraction(k) for k in range(len(taken) + 1)]
    x_minus = next(c for c in candidates if all(c != t for t in taken))

    x = dict(model.x)
    x[split.h0] = encode_scalar(2 * x2 - x1)
    x[f"-{split.h0}"] = encode_scalar(x_minus)

    y = dict(model.y)
    if model.y:
        s = default_scale(split, model) if scale is None else _number(scale)
        y[split.h0] = encode_scalar(s)
        if not split.inverse_pair:
            for name in split.kept_edges:
                if name in model.y:
                    y[name] = encode_scalar(_number(model.y[name]) / s)

    base = split.chart(default_base(split.graph, model))
    logger.debug(f"split parameters: x[{split.h0}] = {x[split.h0]}, x[-{split.h0}] = {x[f'-{split.h0}']}, base {base}")
    return ParamsFile(x=x, y=y, base=base, z0=model.z0)


def derived_parameters(split: Split, wide: SchottkyGroup) -> EdgeParameters:
    """
    Parameters of the original graph read off the group of the wider one, in
    the chart of v_-h0 for the split vertex: each edge atom is the atom path of
    its branch, so both parameter sets give the same group.
    """
    if wide.graph != split.wider:
        raise InputError("the group does not belong to the split graph")
    ring = wide.ring
    pull = wide.atoms[Branch(split.h0, -1)]
    margin = wide.settings.loxodromy_margin
    x: Dict[Branch, ProjectivePoint] = {}
    y: Dict[str, Any] = {}
    for e in split.graph.edges:
        plus, minus = Branch(e.id, 1), Branch(e.id, -1)
        path = split.atom_path(plus)
        if path == (plus,):
            x[plus], x[minus] = wide.params.point(plus), wide.params.point(minus)
            y[e.id] = wide.params.y[e.id]
        elif path[0].id == path[-1].id == split.h0:
            # a loop at the small vertex: conjugate by the atom of -h0
            x[plus] = pull.apply(wide.params.point(plus)).normalized()
            x[minus] = pull.apply(wide.params.point(minus)).normalized()
            y[e.id] = wide.params.y[e.id]
        else:
            m = word_to_map(path, wide.atoms, ring)
            starts = (wide.params.point(path[-1]), wide.params.point(-path[0]))
            points = fixed_points(m, ring, margin, starts)
            x[plus], x[minus] = points
            y[e.id] = multiplier(m, ring, margin, points=points)
    for t in split.graph.tails:
        h = Branch(t.id, 0)
        p = wide.params.point(h)
        x[h] = pull.apply(p).normalized() if split.wider.terminal(h) == split.vertex else p
    return EdgeParameters(ring, x, y)


# --- paths and words --------------------------------------------------------

def widen_path(split: Split, path: EdgePath, base: str) -> EdgePath:
    """A closed path of the original graph as a closed path at `base` of the wider one."""
    out: List[Branch] = []
    here = base
    for h in path:
        start = split.wider.terminal(-h)
        if start != here:
            out.append(split.bridge(here, start))
        out.append(h)
        here = split.wider.terminal(h)
    if here != base:
        out.append(split.bridge(here, base))
    return EdgePath(reduce_path(out))


def path_to_word(group: SchottkyGroup, path: EdgePath) -> Word:
    """The group word of a closed path at the base: its non-tree branches, last traversed first."""
    index = {gen.edge: gen.index for gen in group.generators}
    letters = [index[h.id] * h.sign for h in path if h.id in index]
    return reduce_word(letters[::-1])


def split_letters(split: Split, narrow: SchottkyGroup, wide: SchottkyGroup) -> Dict[int, Word]:
    """Generators of the original group as words in the generators of the wider one."""
    if split.chart(narrow.base) != wide.base:
        raise InputError(f"base {wide.base} of the split group does not serve base {narrow.base}")
    return {gen.index: path_to_word(wide, widen_path(split, gen.path, wide.base)) for gen in narrow.generators}


# --- relations of the degeneration --------------------------------------------

def _quotient_constant(value: TruncatedSeries, divisor: Sequence[str]) -> Optional[Fraction]:
    need = [0] * len(value.vars)
    for name in divisor:
        need[value.vars.index(name)] += 1
    for exp in value.terms:
        if any(e < n for e, n in zip(exp, need)):
            return None
    return value.terms.get(tuple(need), Fraction(0))


def _relation(label: str, value: TruncatedSeries, divisor: Sequence[str]) -> Relation:
    leading = _quotient_constant(value, divisor)
    return label, leading, leading is not None and leading != 0


def unit_relations(split: Split, narrow: EdgeParameters) -> List[Relation]:
    """
    The quotients that must be units when the original parameters are read
    off the split group: (x[h1] - x[h2]) / s[h0], y[e_i] / (s[h0] s[e_i]) for
    the edges of h1, h2 and y[e] / s[e] otherwise, or y[e] / s[e] for every
    edge when h1 = -h2.
    """
    if not isinstance(narrow.ring, SeriesRing):
        raise InputError("unit relations need the series ring")
    h0 = split.h0
    gap = delta(narrow.point(split.h1), narrow.point(split.h2))
    out = [_relation(f"(x[{split.h1}]-x[{split.h2}])/s[{h0}]", gap, [h0])]
    paired = [] if split.inverse_pair else split.kept_edges
    for e in split.graph.edges:
        if e.id in paired:
            out.append(_relation(f"y[{e.id}]/(s[{h0}]*s[{e.id}])", narrow.y[e.id], [h0, e.id]))
        else:
            out.append(_relation(f"y[{e.id}]/s[{e.id}]", narrow.y[e.id], [e.id]))
    for label, leading, unit in out:
        if not unit:
            logger.warning(f"{label} is not a unit (constant term {leading})")
    return out
