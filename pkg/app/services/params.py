# app/services/params.py

import logging
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

from app.models.errors import InputError, MoebiusError
from app.models.schemas import ParamsFile
from app.services.graph_core import Branch, StableGraph
from app.services.moebius import MoebiusMap, ProjectivePoint, delta, same_point
from app.services.rings import ComplexRing, Ring, SeriesRing, is_unit, is_zero
from app.services.serialization import parse_point

logger = logging.getLogger(__name__)


@dataclass
class EdgeParameters:
    """Evaluated parameters: a point x_h per branch and a multiplier y_e per edge."""

    ring: Ring
    x: Dict[Branch, ProjectivePoint]
    y: Dict[str, Any]

    def point(self, h: Branch) -> ProjectivePoint:
        try:
            return self.x[h]
        except KeyError:
            raise InputError(f"no parameter x[{h}]") from None

    def transformed(self, g: MoebiusMap) -> "EdgeParameters":
        """Parameters of the conjugate group g Γ g^-1."""
        return EdgeParameters(self.ring, {h: g.apply(p).normalized() for h, p in self.x.items()}, dict(self.y))

    def shifted(self, direction: Mapping[str, Any], s: Any) -> "EdgeParameters":
        """Move along a direction {"x:<branch>" | "y:<edge>": delta} by the amount s."""
        x = dict(self.x)
        y = dict(self.y)
        for key, amount in direction.items():
            kind, _, name = key.partition(":")
            step = self.ring.coerce(amount) * s
            if kind == "y":
                if name not in y:
                    raise InputError(f"unknown edge in direction: {name}")
                y[name] = y[name] + step
            elif kind == "x":
                match = [h for h in x if str(h) == name]
                if not match:
                    raise InputError(f"unknown branch in direction: {name}")
                p = x[match[0]]
                if p.is_infinite():
                    raise InputError(f"cannot move the point at infinity x[{name}]")
                x[match[0]] = ProjectivePoint(p.affine() + step, self.ring.one())
            else:
                raise InputError(f"direction keys look like 'x:<branch>' or 'y:<edge>', got {key!r}")
        return EdgeParameters(self.ring, x, y)


def parse_params(graph: StableGraph, model: ParamsFile, ring: Ring) -> EdgeParameters:
    x: Dict[Branch, ProjectivePoint] = {}
    for label, value in model.x.items():
        try:
            h = graph.parse_branch(label)
        except Exception as e:
            raise InputError(f"x names unknown branch {label!r}") from e
        p = parse_point(value, ring)
        if p.is_infinite() and h not in graph.infinity:
            raise InputError(f"x[{label}] = inf but {label} is not in the infinity set")
        if h in graph.infinity and not p.is_infinite():
            raise InputError(f"{label} is in the infinity set but x[{label}] is finite")
        x[h] = p
    for h in graph.infinity:
        x.setdefault(h, ProjectivePoint.infinity(ring))

    for e in graph.edges:
        for h in (Branch(e.id, 1), Branch(e.id, -1)):
            if h not in x:
                raise InputError(f"missing parameter x[{h}]")

    y: Dict[str, Any] = {}
    if isinstance(ring, SeriesRing):
        if model.y:
            logger.debug("series ring: y values in the params file are replaced by formal variables")
        for e in graph.edges:
            y[e.id] = ring.variable(e.id)
    else:
        for e in graph.edges:
            if e.id not in model.y:
                raise InputError(f"missing parameter y[{e.id}]")
            value = ring.coerce(model.y[e.id])
            if is_zero(value):
                raise InputError(f"y[{e.id}] must be nonzero")
            y[e.id] = value

    params = EdgeParameters(ring, x, y)
    check_generic(graph, params)
    return params


def check_generic(graph: StableGraph, params: EdgeParameters) -> None:
    """Branch points at a common vertex must be pairwise distinct."""
    for v in graph.vertices:
        placed = [h for h in graph.branches_at(v) if h in params.x]
        for i, h in enumerate(placed):
            for k in placed[i + 1:]:
                p, q = params.x[h], params.x[k]
                if isinstance(params.ring, ComplexRing):
                    if same_point(p, q, params.ring):
                        raise MoebiusError(f"degenerate edge parameters: x[{h}] = x[{k}] at vertex {v}")
                elif not is_unit(delta(p, q)):
                    raise MoebiusError(f"degenerate edge parameters: x[{h}] = x[{k}] at vertex {v}")


def series_ring_for(graph: StableGraph, cutoff: int) -> SeriesRing:
    return SeriesRing(graph.edge_ids, cutoff)


def default_base(graph: StableGraph, model: Optional[ParamsFile] = None) -> str:
    if model is not None and model.base:
        graph.require_vertex(model.base)
        return model.base
    for t in graph.tails:
        return t.vertex
    return graph.vertices[0]
