# app/services/kz_monodromy.py

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from app.config import Settings
from app.models.errors import InputError, KZError
from app.services.graph_core import Branch
from app.services.kz_residues import KZForm, ResidueAssignment, standard_form
from app.services.ncseries import NCSeries, nc_grouplike_test

logger = logging.getLogger(__name__)

IntWord = Tuple[int, ...]

RTOL = 1e-12
ATOL = 1e-14
RATIONAL_DENOMINATOR = 24


@dataclass
class Transport:
    series: NCSeries
    residual: float = 0.0

    @property
    def weight(self) -> int:
        return self.series.weight

    def __matmul__(self, other: "Transport") -> "Transport":
        # path order: self first, then other
        return Transport(self.series * other.series, max(self.residual, other.residual))

    def reversed(self) -> "Transport":
        return Transport(self.series.inverse(), self.residual)

    def grouplike(self, tol: float) -> bool:
        return nc_grouplike_test(self.series, tol)


def _words(n: int, weight: int) -> List[IntWord]:
    words: List[IntWord] = [()]
    layer: List[IntWord] = [()]
    for _ in range(weight):
        layer = [w + (k,) for w in layer for k in range(n)]
        words += layer
    return words


def _iterated_integrals(
    forms: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    words: List[IntWord],
) -> np.ndarray:
    """
    All iterated integrals I_w of the scalar forms along [t0, t1], with
    dI_w/dt = I_{w without last letter} * f_{last letter}(t); earliest letter leftmost.
    """
    index = {w: k for k, w in enumerate(words)}
    parent = np.array([index[w[:-1]] for w in words[1:]], dtype=int)
    last = np.array([w[-1] for w in words[1:]], dtype=int)

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        f = forms(t)
        out = np.zeros_like(state)
        out[1:] = state[parent] * f[last]
        return out

    y0 = np.zeros(len(words), dtype=complex)
    y0[0] = 1.0
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise KZError(f"iterated integration failed: {sol.message}")
    return sol.y[:, -1]


def _as_series(values: np.ndarray, words: List[IntWord], residues: Sequence[NCSeries], weight: int) -> NCSeries:
    raw = NCSeries({tuple(f"#{k}" for k in w): complex(v) for w, v in zip(words, values)}, weight)
    return raw.substitute({f"#{k}": r for k, r in enumerate(residues)}, weight)


def _scaled_residues(form: KZForm, settings: Settings) -> Tuple[np.ndarray, List[NCSeries]]:
    finite = form.finite()
    poles = np.array([complex(p) for p, _ in finite], dtype=complex)
    return poles, [r.scale(settings.kz_sign) for _, r in finite]


def _guard(poles: np.ndarray, z: complex, settings: Settings, skip: Sequence[int] = ()) -> None:
    for k, p in enumerate(poles):
        if k not in skip and abs(z - p) < settings.pole_guard:
            raise KZError(f"path passes through the pole {p}")


def polyline_transport(form: KZForm, points: Sequence[complex], weight: int, settings: Settings) -> Transport:
    """Transport along straight pieces between regular points."""
    poles, residues = _scaled_residues(form, settings)
    words = _words(len(poles), weight)
    total = NCSeries.one(weight)
    for a, b in zip(points[:-1], points[1:]):
        a, b = complex(a), complex(b)
        for s in np.linspace(0.0, 1.0, 65):
            _guard(poles, a + s * (b - a), settings)
        values = _iterated_integrals(lambda t: (b - a) / (a + t * (b - a) - poles), 0.0, 1.0, words)
        total = total * _as_series(values, words, residues, weight)
    return Transport(total)


def loop_transport(
    form: KZForm,
    index: int,
    weight: int,
    settings: Settings,
    radius: Optional[float] = None,
) -> Transport:
    """Counterclockwise circle around the index-th finite pole, based at p + r."""
    poles, residues = _scaled_residues(form, settings)
    if not 0 <= index < len(poles):
        raise InputError(f"no finite pole with index {index}")
    p = poles[index]
    others = [abs(q - p) for k, q in enumerate(poles) if k != index]
    if radius is None:
        radius = min(others) / 2 if others else 1.0
    if others and radius >= min(others):
        raise KZError(f"loop radius {radius} encloses another pole")
    words = _words(len(poles), weight)

    def forms(theta: float) -> np.ndarray:
        w = radius * cmath.exp(1j * theta)
        return 1j * w / (p + w - poles)

    values = _iterated_integrals(forms, 0.0, 2 * math.pi, words)
    return Transport(_as_series(values, words, residues, weight))


def _truncated_segment(
    poles: np.ndarray,
    residues: List[NCSeries],
    a: int,
    b: int,
    eps: float,
    words: List[IntWord],
    weight: int,
) -> NCSeries:
    """Transport on [eps, 1 - eps] of z = p_a + s (p_b - p_a), with log-substituted ends."""
    pa, pb = poles[a], poles[b]
    d = pb - pa

    def head(u: float) -> np.ndarray:
        s = math.exp(u)
        return d * s / (pa + s * d - poles)

    def tail(u: float) -> np.ndarray:
        r = math.exp(u)
        return -d * r / (pa + (1 - r) * d - poles)

    mid, low = math.log(0.5), math.log(eps)
    first = _as_series(_iterated_integrals(head, low, mid, words), words, residues, weight)
    second = _as_series(_iterated_integrals(tail, mid, low, words), words, residues, weight)
    # cancel the log(eps) growth at both tangential ends
    left = residues[a].scale(math.log(eps)).exp()
    right = residues[b].scale(-math.log(eps)).exp()
    return left * first * second * right


def _extrapolate(values: Sequence[NCSeries], eps: Sequence[float]) -> NCSeries:
    """Lagrange extrapolation of T(eps) to eps = 0, coefficientwise."""
    total = NCSeries.zero(values[0].weight)
    for i, (v, e) in enumerate(zip(values, eps)):
        w = 1.0
        for j, f in enumerate(eps):
            if j != i:
                w *= f / (f - e)
        total = total + v.scale(w)
    return total


def segment_transport(form: KZForm, start: int, end: int, weight: int, settings: Settings) -> Transport:
    """
    Transport along the straight segment between two finite poles, between the
    tangential base points p_start + (p_end - p_start) and p_end + (p_start - p_end).
    """
    poles, residues = _scaled_residues(form, settings)
    for k in (start, end):
        if not 0 <= k < len(poles):
            raise InputError(f"no finite pole with index {k}")
    if start == end:
        raise InputError("segment endpoints must be distinct poles")
    for s in np.linspace(0.0, 1.0, 65)[1:-1]:
        _guard(poles, poles[start] + s * (poles[end] - poles[start]), settings, skip=(start, end))

    words = _words(len(poles), weight)
    eps = list(settings.epsilons)

    def run(e: float) -> NCSeries:
        return _truncated_segment(poles, residues, start, end, e, words, weight)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=min(settings.threads, len(eps))) as pool:
            values = list(pool.map(run, eps))
    else:
        values = [run(e) for e in eps]

    limit = _extrapolate(values, eps)
    residual = limit.distance(values[int(np.argmin(eps))])
    logger.debug(f"segment {start}->{end}: extrapolation residual {residual:.2e}")
    if residual > settings.extrapolation_tol:
        raise KZError(f"tangential extrapolation did not converge: residual {residual:.3e}")
    return Transport(limit, residual)


def kz_monodromy(
    form: KZForm,
    start: int,
    end: Optional[int] = None,
    weight: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> Transport:
    """Segment transport between two poles, or the loop around `start` when end is None."""
    settings = settings or Settings()
    weight = weight or settings.weight
    if end is None:
        out = loop_transport(form, start, weight, settings)
    else:
        out = segment_transport(form, start, end, weight, settings)
    logger.info(f"transport on {form.component} at weight {weight}: {len(out.series.terms)} terms")
    return out


def compose(transports: Sequence[Transport]) -> Transport:
    if not transports:
        raise InputError("nothing to compose")
    total = transports[0]
    for t in transports[1:]:
        total = total @ t
    return total


# Limit unipotent periods ---------------------------------------------------

@dataclass(frozen=True)
class Leg:
    """One component crossing: from the tangential point at `start` to the one at `end`."""

    component: str
    start: Branch
    end: Branch
    turns: int = 0  # half rotations around `start` before leaving
    end_turns: int = 0  # half rotations around `end` on arrival

    def reversed(self) -> "Leg":
        return Leg(self.component, self.end, self.start, -self.end_turns, -self.turns)


def reverse_path(legs: Sequence[Leg]) -> List[Leg]:
    return [leg.reversed() for leg in reversed(legs)]


def check_legs(assignment: ResidueAssignment, legs: Sequence[Leg]) -> None:
    graph = assignment.graph
    if not legs:
        raise KZError("empty path")
    odd = [v for v in graph.vertices if graph.degree(v) != 3]
    if odd:
        raise KZError(f"graph is not trivalent at {', '.join(odd)}")
    if not legs[0].start.is_tail:
        raise KZError(f"the path must start at a tail, not {legs[0].start}")
    for k, leg in enumerate(legs):
        graph.require_vertex(leg.component)
        for h in (leg.start, leg.end):
            if graph.terminal(h) != leg.component:
                raise KZError(f"leg {k}: branch {h} does not end on {leg.component}")
        if leg.start == leg.end:
            raise KZError(f"leg {k}: start and end coincide")
        if k and legs[k - 1].end.is_tail:
            raise KZError(f"leg {k - 1} ends on tail {legs[k - 1].end.id}; the path cannot continue")
        if k and leg.start != -legs[k - 1].end:
            raise KZError(f"leg {k} does not continue across the node {legs[k - 1].end}")


def _half_turns(x: NCSeries, turns: int, settings: Settings) -> NCSeries:
    if not turns:
        return NCSeries.one(x.weight)
    return x.scale(settings.kz_sign * turns * math.pi * 1j).exp()


def limit_unipotent_period(
    assignment: ResidueAssignment,
    legs: Sequence[Leg],
    settings: Optional[Settings] = None,
    weight: Optional[int] = None,
) -> Transport:
    """
    Ordered product over legs of exp(pi i turns X_start) . Phi(X_start, X_end) .
    exp(pi i end_turns X_end), where Phi is the 0 -> 1 transport of the
    three-point form and each component is moved so that start -> 0, end -> 1.
    """
    settings = settings or Settings()
    weight = weight or assignment.weight
    check_legs(assignment, legs)
    std = segment_transport(standard_form("X0", "X1", weight), 0, 1, weight, settings)
    # Phi carries kz_sign already; feed it the bare residues
    phi = std.series

    total = NCSeries.one(weight)
    for leg in legs:
        xs, xe = assignment[leg.start].truncate(weight), assignment[leg.end].truncate(weight)
        crossing = phi.substitute({"X0": xs, "X1": xe}, weight)
        total = total * _half_turns(xs, leg.turns, settings) * crossing * _half_turns(xe, leg.end_turns, settings)
    logger.info(f"limit period over {len(legs)} legs at weight {weight}")
    return Transport(total, std.residual)


def _rational(x: float, tol: float) -> Optional[Fraction]:
    q = Fraction(x).limit_denominator(RATIONAL_DENOMINATOR)
    return q if abs(float(q) - x) <= tol else None


def rationality_report(series: NCSeries, tol: float = 1e-6) -> List[Dict[str, Any]]:
    """
    Weight-1 and weight-2 coefficients split as c = a pi i + b pi^2 with a, b
    detected rational (denominator <= 24); weight-1 words have b = 0.
    """
    out = []
    for word, c in sorted(series.terms.items(), key=lambda item: (len(item[0]), item[0])):
        if not 1 <= len(word) <= 2:
            continue
        c = complex(c)
        a = _rational(c.imag / math.pi, tol)
        if len(word) == 1:
            b = None
            ok = a is not None and abs(c.real) <= tol
        else:
            b = _rational(c.real / math.pi ** 2, tol)
            ok = a is not None and b is not None
        out.append(
            {
                "word": list(word),
                "coefficient": c,
                "pi_i_part": None if a is None else str(a),
                "pi2_part": None if b is None else str(b),
                "rational": ok,
            }
        )
    return out
