# app/services/invariants.py

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from app.models.errors import InputError, MoebiusError
from app.services.moebius import MoebiusMap, ProjectivePoint, conjugate, cross_ratio, same_point
from app.services.rings import ComplexRing, RationalRing, SeriesRing, TruncatedSeries
from app.services.schottky_engine import SchottkyGroup, Word, inverse_word, reduce_word, word_label

logger = logging.getLogger(__name__)

# cross-ratio pairs (a, c), (b, d), (a, d), (b, c) of [a, b; c, d]
_PAIRS = ((0, 2), (1, 3), (0, 3), (1, 2))


@dataclass
class Comparison:
    kind: str  # "multiplier", "cross_ratio", "fixed_point", "fixed_point_quadratic"
    item: str
    first: Any
    second: Any
    agrees: bool
    note: Optional[str] = None


def _letter_map(g1: SchottkyGroup, g2: SchottkyGroup) -> Dict[int, Word]:
    """Generators are identified through their non-tree edge ids."""
    index = {gen.edge: gen.index for gen in g2.generators}
    out = {}
    for gen in g1.generators:
        if gen.edge not in index:
            raise InputError(
                f"generator edge {gen.edge} is not a generator of the second group; "
                "choose ids so that the same edges lie outside both spanning trees"
            )
        out[gen.index] = (index[gen.edge],)
    return out


def translate(word: Sequence[int], letters: Dict[int, Word]) -> Word:
    out: List[int] = []
    for s in word:
        image = letters[abs(s)]
        out.extend(image if s > 0 else inverse_word(image))
    return reduce_word(out)


def _monomials(value: TruncatedSeries, order: Optional[int], shared: Sequence[str]) -> Dict[Tuple[Tuple[str, int], ...], Any]:
    """Coefficients keyed by variable names, restricted to shared variables and total degree <= order."""
    out = {}
    for exp, c in value.terms.items():
        if order is not None and sum(exp) > order:
            continue
        mono = tuple((name, k) for name, k in zip(value.vars, exp) if k)
        if any(name not in shared for name, _ in mono):
            continue
        out[mono] = c
    return out


def window_condition(points: Sequence[ProjectivePoint]) -> float:
    """
    Amplification of relative point errors in [a, b; c, d]: the log-derivative
    of the cross-ratio sums 1/|z_i - z_j| over its four pairs. Points at
    infinity do not contribute.
    """
    zs = [p.as_complex() for p in points]
    finite = [z for z in zs if math.isfinite(z.real) and math.isfinite(z.imag)]
    scale = max([1.0] + [abs(z) for z in finite])
    total = 0.0
    for i, j in _PAIRS:
        a, b = zs[i], zs[j]
        if a in finite and b in finite and a != b:
            total += 1.0 / abs(a - b)
    return max(1.0, scale * total)


def fixed_point_quadratic(m: MoebiusMap) -> Tuple[Any, Any, Any]:
    """Coefficients of c z^2 + (d - a) z - b, whose roots are the fixed points."""
    return (m.c, m.d - m.a, -m.b)


def _proportional(p: Sequence[Any], q: Sequence[Any]) -> bool:
    return all(p[i] * q[j] == p[j] * q[i] for i in range(len(p)) for j in range(i + 1, len(p)))


def _monic(q: Sequence[Any]) -> List[Any]:
    lead = next((c for c in q if c != 0), 1)
    return [c / lead for c in q]


class InvariantComparer:
    """Compares conjugation invariants of two groups with matched generators."""

    def __init__(
        self,
        g1: SchottkyGroup,
        g2: SchottkyGroup,
        order: Optional[int] = None,
        letters: Optional[Dict[int, Word]] = None,
    ):
        if type(g1.ring) is not type(g2.ring):
            raise InputError("both groups must live over the same ring")
        self.g1, self.g2 = g1, g2
        self.ring = g1.ring
        self.order = order
        self.letters = letters if letters is not None else _letter_map(g1, g2)
        shared = set(getattr(g1.ring, "vars", ())) & set(getattr(g2.ring, "vars", ()))
        self.shared = sorted(shared)

    def agree(self, a: Any, b: Any, condition: float = 1.0) -> bool:
        if isinstance(self.ring, ComplexRing):
            a, b = complex(a), complex(b)
            return abs(a - b) <= self.ring.tol * condition * max(1.0, abs(a), abs(b))
        if isinstance(self.ring, SeriesRing):
            return _monomials(a, self.order, self.shared) == _monomials(b, self.order, self.shared)
        return a == b

    def multiplier_invariant(self, group: SchottkyGroup, word: Word) -> Any:
        if isinstance(self.ring, RationalRing):
            # tr^2/det is rational even when the multiplier is not
            m = group.word_matrix(word)
            return m.trace * m.trace / m.det
        return group.word_multiplier(word)

    def coincide(self, p: ProjectivePoint, q: ProjectivePoint) -> bool:
        if isinstance(self.ring, SeriesRing):
            return same_point(p.constant(), q.constant(), RationalRing())
        return same_point(p, q, self.ring)

    def attractive_point(self, group: SchottkyGroup, word: Word) -> Optional[ProjectivePoint]:
        try:
            return group.word_fixed_points(word)[0]
        except MoebiusError as e:
            logger.debug(f"no fixed point for {word_label(word)}: {e}")
            return None

    def quadratic_comparison(self, word: Word, other: Word, conjugator: MoebiusMap) -> Comparison:
        """For words without rational fixed points: g carries the pair over exactly when it carries one quadratic to the other."""
        expected = fixed_point_quadratic(conjugate(self.g1.word_matrix(word), conjugator))
        actual = fixed_point_quadratic(self.g2.word_matrix(other))
        return Comparison(
            "fixed_point_quadratic",
            word_label(word),
            _monic(expected),
            _monic(actual),
            _proportional(expected, actual),
            note="no rational fixed points",
        )


def conjugation_invariant_report(
    g1: SchottkyGroup,
    g2: SchottkyGroup,
    conjugator: Optional[MoebiusMap] = None,
    order: Optional[int] = None,
    max_length: int = 3,
    letters: Optional[Dict[int, Word]] = None,
) -> Dict[str, Any]:
    """
    Multipliers of matched words and cross-ratios of attractive fixed-point
    quadruples, for all reduced words up to max_length. With a conjugator g the
    fixed points of the second group are also checked against g applied to the
    first. letters sends each generator of g1 to its word in g2; by default the
    generators are matched through their edge ids.
    """
    cmp = InvariantComparer(g1, g2, order, letters)
    rational = isinstance(cmp.ring, RationalRing)
    entries: List[Comparison] = []
    skipped = 0
    words = [w for w, _ in g1.enumerate_reduced_words(max_length) if w]

    for word in words:
        other = translate(word, cmp.letters)
        try:
            a = cmp.multiplier_invariant(g1, word)
            b = cmp.multiplier_invariant(g2, other)
        except MoebiusError as e:
            skipped += 1
            logger.debug(f"multiplier skipped for {word_label(word)}: {e}")
            continue
        entries.append(Comparison("multiplier", word_label(word), a, b, cmp.agree(a, b)))

    points: List[Tuple[Word, ProjectivePoint, ProjectivePoint]] = []
    for word in words:
        other = translate(word, cmp.letters)
        p = cmp.attractive_point(g1, word)
        q = cmp.attractive_point(g2, other)
        if p is None or q is None:
            if rational and conjugator is not None:
                entries.append(cmp.quadratic_comparison(word, other, conjugator))
            else:
                skipped += 1
            continue
        # quadruples need pairwise distinct points, on the special fibre for series
        if any(cmp.coincide(p, seen) for _, seen, _ in points):
            continue
        points.append((word, p, q))
        if conjugator is not None:
            expected = conjugator.apply(p).normalized()
            entries.append(
                Comparison("fixed_point", word_label(word), expected, q, same_point(expected, q, cmp.ring))
            )

    for k in range(len(points) - 3):
        window = points[k:k + 4]
        label = " | ".join(word_label(w) for w, _, _ in window)
        try:
            a = cross_ratio(*(p for _, p, _ in window))
            b = cross_ratio(*(q for _, _, q in window))
        except MoebiusError as e:
            skipped += 1
            logger.debug(f"cross-ratio skipped for {label}: {e}")
            continue
        condition = 1.0
        if isinstance(cmp.ring, ComplexRing):
            condition = max(window_condition([p for _, p, _ in window]), window_condition([q for _, _, q in window]))
        entries.append(Comparison("cross_ratio", label, a, b, cmp.agree(a, b, condition)))

    discrepancies = [e for e in entries if not e.agrees]
    logger.info(f"compared {len(entries)} invariants, {len(discrepancies)} discrepancies, {skipped} skipped")
    return {
        "compared": len(entries),
        "skipped": skipped,
        "passed": not discrepancies and bool(entries),
        "entries": entries,
        "discrepancies": discrepancies,
    }
