# app/agents/orchestrator.py

import cmath
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
from pydantic import BaseModel, ValidationError

from app.config import Settings, load_settings
from app.models.errors import GraphError, InputError
from app.models.schemas import (
    AssignmentReport,
    ComponentTable,
    DegenerateClass,
    DegenerateReport,
    DifferentialReport,
    EtaReport,
    GaussManinReport,
    GraphFile,
    GraphValidationReport,
    InvariantEntry,
    InvariantReport,
    LimitReport,
    MonodromyReport,
    MZVReport,
    ParamsFile,
    PeriodReport,
    PoleRecord,
    RationalityEntry,
    SampleValue,
    UnitRelation,
)
from app.services.differentials import (
    closed_form_restriction,
    degenerate_forms,
    node_residue_balance,
    parse_kind,
    restrict_to_component,
)
from app.services.graph_core import (
    Branch,
    StableGraph,
    is_connected,
    parse_branches,
    type_of,
    validate_stable,
)
from app.services.invariants import conjugation_invariant_report
from app.services.kz_monodromy import (
    Leg,
    kz_monodromy,
    limit_unipotent_period,
    rationality_report,
)
from app.services.kz_residues import (
    ResidueAssignment,
    base_assignment,
    edge_antisymmetry,
    expand_assignment,
    standard_form,
    vertex_sums,
)
from app.services.moebius import MoebiusMap
from app.services.mzv import mzv
from app.services.params import default_base, parse_params, series_ring_for
from app.services.periods import (
    a_cycle_integral,
    default_base_point,
    eta_basis,
    gauss_manin_check,
    is_symmetric,
    period_matrix,
    period_oracle_residuals,
    vandermonde_check,
    verify_eta_normalisation,
)
from app.services.rings import ComplexRing, SeriesRing, make_ring
from app.services.schottky_engine import SchottkyGroup, build_group
from app.services.splitting import (
    derived_parameters,
    make_split,
    params_for_split,
    split_letters,
    unit_relations,
)
from app.services.serialization import encode_scalar, encode_value

Source = Union[str, Path, Dict[str, Any], BaseModel]


def parse_scalar_text(text: str) -> Any:
    """'p/q' or an integer is exact; anything else is read as a complex number."""
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        pass
    try:
        return complex(text.replace("i", "j").replace(" ", ""))
    except ValueError as e:
        raise InputError(f"cannot read the number {text!r}") from e


def parse_split(graph: StableGraph, text: str) -> Tuple[str, Branch, Branch]:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"split must look like vertex:h1:h2, got {text!r}")
    h1, h2 = parse_branches(graph, parts[1:])
    return parts[0], h1, h2


def parse_legs(graph: StableGraph, text: str) -> List[Leg]:
    """'component:from:to[:turns[:end_turns]]' separated by ';'."""
    legs = []
    for chunk in (c.strip() for c in text.split(";")):
        if not chunk:
            continue
        parts = chunk.split(":")
        if not 3 <= len(parts) <= 5:
            raise InputError(f"leg must look like component:from:to[:turns[:end_turns]], got {chunk!r}")
        start, end = parse_branches(graph, parts[1:3])
        try:
            turns = [int(p) for p in parts[3:]] + [0, 0]
        except ValueError as e:
            raise InputError(f"turn counts must be integers in {chunk!r}") from e
        legs.append(Leg(parts[0], start, end, turns[0], turns[1]))
    if not legs:
        raise InputError("no legs given")
    return legs


class ForgeOrchestrator:
    """
    Runs every engine command step by step:
    1. Read and validate the graph and parameter files
    2. Build the Schottky group over the requested ring
    3. Compute, cross-check and assemble the report
    """

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or load_settings()
        self.logger = logging.getLogger(__name__)

    # --- inputs -----------------------------------------------------------

    def _read(self, source: Source) -> Any:
        if isinstance(source, (str, Path)):
            try:
                return json.loads(Path(source).read_text())
            except OSError as e:
                raise InputError(f"cannot read {source}: {e}") from e
            except json.JSONDecodeError as e:
                raise InputError(f"parse error in {source}: {e}") from e
        if isinstance(source, BaseModel):
            return source.model_dump(by_alias=True)
        return source

    def graph_model(self, source: Source) -> GraphFile:
        try:
            return GraphFile.model_validate(self._read(source))
        except ValidationError as e:
            raise InputError(f"parse error: {e}") from e

    def load_graph(self, source: Source) -> StableGraph:
        graph = StableGraph.from_model(self.graph_model(source))
        issues = validate_stable(graph)
        if issues:
            raise GraphError("invalid graph: " + "; ".join(f"{i.field}: {i.issue}" for i in issues))
        return graph

    def load_params(self, source: Source) -> ParamsFile:
        try:
            return ParamsFile.model_validate(self._read(source))
        except ValidationError as e:
            raise InputError(f"parse error: {e}") from e

    def build(
        self,
        graph: StableGraph,
        params: ParamsFile,
        ring: str,
        wordlen: Optional[int] = None,
        degree: Optional[int] = None,
        check: bool = True,
    ) -> SchottkyGroup:
        wordlen = wordlen or self.settings.wordlen
        degree = degree or self.settings.degree
        if ring == "series":
            if wordlen < degree:
                raise InputError("formal jobs need wordlen >= degree")
            r = series_ring_for(graph, degree)
        else:
            r = make_ring(ring, tol=self.settings.tol)
        values = parse_params(graph, params, r)
        base = default_base(graph, params)
        self.logger.info(f"building group over {ring} with L={wordlen} at base {base}")
        return build_group(graph, values, base, wordlen, self.settings, check)

    # --- validate -----------------------------------------------------------

    def validate(self, source: Source) -> GraphValidationReport:
        graph = StableGraph.from_model(self.graph_model(source))
        issues = validate_stable(graph)
        genus = tails = None
        if is_connected(graph) and not any(i.field == "vertices" for i in issues):
            genus, tails = type_of(graph)
        self.logger.info(f"validated graph: {len(issues)} issues")
        return GraphValidationReport(is_valid=not issues, genus=genus, tails=tails, issues=issues)

    # --- periods ------------------------------------------------------------

    def periods(
        self,
        graph_source: Source,
        params_source: Source,
        ring: str = "complex",
        wordlen: Optional[int] = None,
        degree: Optional[int] = None,
    ) -> PeriodReport:
        graph = self.load_graph(graph_source)
        params = self.load_params(params_source)
        group = self.build(graph, params, ring, wordlen, degree)

        P = period_matrix(group)
        report = PeriodReport(
            ring=ring,
            wordlen=group.wordlen,
            degree=group.ring.cutoff if isinstance(group.ring, SeriesRing) else None,
            base=group.base,
            generators=[gen.edge for gen in group.generators],
            paths=[str(gen.path) for gen in group.generators],
            multipliers=[encode_value(group.beta(i)) for i in range(1, group.genus + 1)],
            P=[[encode_value(v) for v in row] for row in P],
            symmetric=is_symmetric(P, group.ring),
            schottky_check=group.schottky_check,
        )
        if isinstance(group.ring, ComplexRing) and group.genus:
            z0 = complex(parse_scalar_text(str(params.z0))) if params.z0 is not None else default_base_point(group)
            residuals = period_oracle_residuals(group, P, z0)
            report.oracle_residuals = residuals
            report.max_oracle_residual = max(max(row) for row in residuals)
            report.a_cycle_residual = max(
                abs(a_cycle_integral(group, i, j) - (2j * cmath.pi if i == j else 0))
                for i in range(1, group.genus + 1)
                for j in range(1, group.genus + 1)
            )
            self.logger.info(f"oracle residual {report.max_oracle_residual:.2e}, a-cycle residual {report.a_cycle_residual:.2e}")
        return report

    # --- differentials ------------------------------------------------------

    def _poles(self, form) -> List[PoleRecord]:
        return [
            PoleRecord(at="inf" if t.at is None else encode_scalar(t.at), order=t.order, residue=encode_scalar(t.coefficient))
            for t in form.terms
        ]

    def differentials(
        self,
        graph_source: Source,
        params_source: Source,
        kind: str,
        ring: str = "series",
        component: Optional[str] = None,
        at: Sequence[str] = (),
    ) -> DifferentialReport:
        graph = self.load_graph(graph_source)
        params = self.load_params(params_source)
        group = self.build(graph, params, ring)
        diff = parse_kind(group, kind)
        report = DifferentialReport(kind=diff.kind, label=diff.label, components=[])

        if isinstance(group.ring, SeriesRing):
            vertices = [component] if component else list(graph.vertices)
            for v in vertices:
                form = restrict_to_component(diff, v)
                closed = closed_form_restriction(diff, v)
                report.components.append(
                    ComponentTable(component=v, poles=self._poles(form), matches_closed_form=form.same_as(closed))
                )
            if diff.kind != "second":
                balance = node_residue_balance(diff)
                report.node_balance = {e: encode_scalar(r) for e, r in balance.items()}
                report.balanced = all(r == 0 for r in balance.values())
        elif component:
            raise InputError("component tables need the series ring")

        for text in at:
            z = parse_scalar_text(text)
            report.samples.append(SampleValue(z=encode_scalar(z), value=encode_value(diff(z))))
        self.logger.info(f"{diff.label}: {len(report.components)} component tables, {len(report.samples)} samples")
        return report

    # --- degenerate ---------------------------------------------------------

    def degenerate(self, graph_source: Source, params_source: Source, edges: Sequence[str]) -> DegenerateReport:
        graph = self.load_graph(graph_source)
        params = self.load_params(params_source)
        group = self.build(graph, params, "series")
        classes = [
            DegenerateClass(
                vertices=members,
                differential=label,
                poles=[PoleRecord(at=encode_value(p.point), order=1, residue=encode_scalar(p.residue)) for p in poles],
            )
            for members, label, poles in degenerate_forms(group, list(edges))
        ]
        return DegenerateReport(edges=sorted(edges), degenerated=bool(edges), classes=classes)

    # --- invariants ---------------------------------------------------------

    def invariants(
        self,
        graph_source: Source,
        params_source: Source,
        ring: str = "rational",
        conjugator: Optional[Sequence[str]] = None,
        split: Optional[str] = None,
        order: Optional[int] = None,
        max_length: int = 3,
    ) -> InvariantReport:
        graph = self.load_graph(graph_source)
        params = self.load_params(params_source)
        g = letters = None
        relations: List[UnitRelation] = []
        if conjugator is not None:
            first = self.build(graph, params, ring)
            if len(conjugator) != 4:
                raise InputError("conjugator needs four entries a,b,c,d")
            a, b, c, d = (first.ring.coerce(parse_scalar_text(x)) for x in conjugator)
            g = MoebiusMap(a, b, c, d)
            second = first.conjugated(g)
        elif split is not None:
            if ring not in ("complex", "series"):
                raise InputError("split comparison needs the complex or series ring")
            v, h1, h2 = parse_split(graph, split)
            cut = make_split(graph, v, h1, h2)
            # the circle test depends on the chart; loxodromy is still checked per word
            second = self.build(cut.wider, params_for_split(cut, params), ring, check=False)
            narrow = derived_parameters(cut, second)
            if isinstance(second.ring, SeriesRing):
                # the original group degenerates over the split ring; compare parameters instead
                relations = [
                    UnitRelation(relation=label, leading=None if c is None else encode_scalar(c), unit=unit)
                    for label, c, unit in unit_relations(cut, narrow)
                ]
                return InvariantReport(
                    ring=ring,
                    max_length=max_length,
                    order=order,
                    compared=len(relations),
                    passed=all(r.unit for r in relations),
                    discrepancies=[],
                    entries=[],
                    unit_relations=relations,
                )
            base = default_base(graph, params)
            first = build_group(graph, narrow, base, second.wordlen, self.settings, check=False)
            letters = split_letters(cut, first, second)
        else:
            raise InputError("give either a conjugator or a split")

        result = conjugation_invariant_report(first, second, g, order, max_length, letters)

        def value(v: Any) -> Any:
            return [encode_value(x) for x in v] if isinstance(v, list) else encode_value(v)

        def entry(c) -> InvariantEntry:
            return InvariantEntry(
                kind=c.kind, item=c.item, first=value(c.first), second=value(c.second), agrees=c.agrees, note=c.note
            )

        return InvariantReport(
            ring=ring,
            max_length=max_length,
            order=order,
            compared=result["compared"],
            skipped=result["skipped"],
            passed=result["passed"],
            discrepancies=[entry(c) for c in result["discrepancies"]],
            entries=[entry(c) for c in result["entries"]],
            unit_relations=relations,
        )

    # --- eta basis and Gauss-Manin -----------------------------------------

    def eta(
        self,
        graph_source: Source,
        params_source: Source,
        tail: Optional[str] = None,
        ring: str = "complex",
        convention: str = "fixed_point",
    ) -> EtaReport:
        graph = self.load_graph(graph_source)
        params = self.load_params(params_source)
        group = self.build(graph, params, ring)
        t0 = tail or (graph.tail_ids[0] if graph.tails else "")
        C, det, _ = eta_basis(group, t0, convention)
        report = EtaReport(
            convention=convention,
            tail=t0,
            coefficients=[[encode_value(v) for v in row] for row in C],
            system_determinant=encode_value(det),
        )
        if isinstance(group.ring, SeriesRing):
            direct, formula = vandermonde_check(group, t0)
            report.vandermonde_ok = direct == formula
        if isinstance(group.ring, ComplexRing):
            report.normalisation_residual = verify_eta_normalisation(group, t0, C)
        return report

    def gauss_manin(
        self,
        graph_source: Source,
        params_source: Source,
        direction: Dict[str, Any],
        tail: Optional[str] = None,
        step: float = 1e-4,
    ) -> GaussManinReport:
        graph = self.load_graph(graph_source)
        params = self.load_params(params_source)
        group = self.build(graph, params, "complex")
        t0 = tail or (graph.tail_ids[0] if graph.tails else "")
        result = gauss_manin_check(graph, group.params, group.base, group.wordlen, self.settings, t0, direction, step)
        return GaussManinReport(**result)

    # --- KZ -----------------------------------------------------------------

    def assignment(
        self,
        graph_source: Source,
        weight: Optional[int] = None,
        eliminated: Optional[str] = None,
        splits: Sequence[str] = (),
    ) -> ResidueAssignment:
        graph = self.load_graph(graph_source)
        current = base_assignment(graph, weight or self.settings.weight, eliminated)
        for text in splits:
            v, h1, h2 = parse_split(current.graph, text)
            current, h0 = expand_assignment(current, v, h1, h2)
            self.logger.info(f"expanded {v} along new edge {h0}")
        return current

    def assignment_report(self, assignment: ResidueAssignment) -> AssignmentReport:
        genus, tails = type_of(assignment.graph)
        sums = vertex_sums(assignment)
        return AssignmentReport(
            genus=genus,
            tails=tails,
            weight=assignment.weight,
            eliminated_tail=assignment.eliminated,
            residues={str(h): x.to_json() for h, x in sorted(assignment.residues.items(), key=lambda i: i[0].sort_key)},
            vertex_sums={v: s.to_json() for v, s in sums.items()},
            vertex_sums_vanish=all(not s.terms for s in sums.values()),
            antisymmetric=all(not s.terms for s in edge_antisymmetry(assignment).values()),
        )

    def kz_assignment(
        self,
        graph_source: Source,
        weight: Optional[int] = None,
        eliminated: Optional[str] = None,
        splits: Sequence[str] = (),
    ) -> AssignmentReport:
        return self.assignment_report(self.assignment(graph_source, weight, eliminated, splits))

    def kz_monodromy(self, weight: Optional[int] = None, loop: Optional[int] = None) -> MonodromyReport:
        weight = weight or self.settings.weight
        form = standard_form("X0", "X1", weight)
        if loop is None:
            transport = kz_monodromy(form, 0, 1, weight, self.settings)
        else:
            transport = kz_monodromy(form, loop, None, weight, self.settings)
        return MonodromyReport(
            weight=weight,
            transport=transport.series.to_json(),
            grouplike=transport.grouplike(self.settings.extrapolation_tol),
            extrapolation_residual=transport.residual,
        )

    def kz_mzv(self, indices: Sequence[int]) -> MZVReport:
        dps = self.settings.mzv_dps
        value = mzv(indices, dps)
        return MZVReport(indices=list(indices), value=mpmath.nstr(value, dps), digits=dps)

    def kz_limit(
        self,
        graph_source: Source,
        legs: str,
        weight: Optional[int] = None,
        eliminated: Optional[str] = None,
        splits: Sequence[str] = (),
    ) -> LimitReport:
        assignment = self.assignment(graph_source, weight, eliminated, splits)
        path = parse_legs(assignment.graph, legs)
        transport = limit_unipotent_period(assignment, path, self.settings)
        entries = [
            RationalityEntry(**{**e, "coefficient": encode_scalar(e["coefficient"])})
            for e in rationality_report(transport.series, self.settings.extrapolation_tol)
        ]
        return LimitReport(
            weight=assignment.weight,
            legs=len(path),
            transport=transport.series.to_json(),
            rationality=entries,
            all_rational=all(e.rational for e in entries),
        )
