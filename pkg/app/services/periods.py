# app/services/periods.py

import cmath
import logging
import math
from fractions import Fraction
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy import integrate

from app.models.errors import InputError, MoebiusError, RingError, SchottkyError
from app.services.differentials import Differential, first_kind, second_kind
from app.services.graph_core import Branch, StableGraph
from app.services.moebius import ProjectivePoint, cross_ratio
from app.services.params import EdgeParameters
from app.services.rings import ComplexRing, is_unit, is_zero
from app.services.schottky_engine import SchottkyGroup, build_group, word_label

logger = logging.getLogger(__name__)


# Multiplicative periods ---------------------------------------------------

def period_matrix(group: SchottkyGroup, length: Optional[int] = None) -> List[List[Any]]:
    """
    P_ij = beta_i^[i=j] times the product of [alpha_i, alpha_-i; d alpha_j, d alpha_-j]
    over double coset representatives d of <gamma_i> \\ Gamma / <gamma_j>.
    """
    g = group.genus
    ring = group.ring
    P = [[ring.one() for _ in range(g)] for _ in range(g)]
    for i in range(1, g + 1):
        a_plus, a_minus = group.alpha(i), group.alpha(-i)
        for j in range(1, g + 1):
            value = group.beta(i) if i == j else ring.one()
            for word, m in group.double_coset_reps(i, j, length):
                if i == j and not word:
                    continue
                try:
                    p = group.fixed_point_image(word, j, m)
                    q = group.fixed_point_image(word, -j, m)
                    value = value * cross_ratio(a_plus, a_minus, p, q)
                except MoebiusError as e:
                    raise SchottkyError(f"period P_{i}{j}: {e} at word {word_label(word)}") from e
            P[i - 1][j - 1] = value
    logger.info(f"period matrix computed for genus {g} up to word length {length or group.wordlen}")
    return P


def is_symmetric(P: List[List[Any]], ring) -> bool:
    g = len(P)
    for i in range(g):
        for j in range(i + 1, g):
            if isinstance(ring, ComplexRing):
                if not ring.close(P[i][j], P[j][i]):
                    return False
            elif P[i][j] != P[j][i]:
                return False
    return True


# Quadrature ---------------------------------------------------------------

def _require_complex(group: SchottkyGroup) -> None:
    if not isinstance(group.ring, ComplexRing):
        raise InputError("numerical integration needs the complex ring")


def _contour_integral(
    f: Callable[[complex], complex],
    z: Callable[[float], complex],
    dz: Callable[[float], complex],
    a: float,
    b: float,
    limit: int,
) -> complex:
    re, _ = integrate.quad(lambda t: (f(z(t)) * dz(t)).real, a, b, limit=limit)
    im, _ = integrate.quad(lambda t: (f(z(t)) * dz(t)).imag, a, b, limit=limit)
    return complex(re, im)


def _poles_of(diff: Differential) -> np.ndarray:
    if diff.kind == "second":
        x = diff.group.params.point(Branch(diff.tail, 0))
        return np.array([x.as_complex()]) if not x.is_infinite() else np.array([], dtype=complex)
    return diff._pole_arrays[0]


def _segment_distance(points: np.ndarray, start: complex, end: complex) -> float:
    if not points.size:
        return math.inf
    d = end - start
    t = np.clip(((points - start) * np.conj(d)).real / max(abs(d) ** 2, 1e-300), 0.0, 1.0)
    return float(np.min(np.abs(points - (start + t * d))))


def cycle_circle(group: SchottkyGroup, j: int) -> Tuple[complex, float]:
    """The isometric circle of gamma_j^-1, which encloses alpha_j."""
    for circle in group.isometric_circles():
        if circle.letter == -j:
            return circle.center, circle.radius
    center = group.alpha(j).as_complex()
    other = group.alpha(-j).as_complex()
    if not np.isfinite(center.real):
        raise SchottkyError(f"generator {j} fixes infinity on both sides; no a-cycle contour")
    radius = 1.0 if not np.isfinite(other.real) else min(1.0, abs(other - center) / 2)
    return center, radius


def integrate_on_circle(diff: Differential, center: complex, radius: float) -> complex:
    _require_complex(diff.group)
    settings = diff.group.settings
    poles = _poles_of(diff)
    if poles.size and np.min(np.abs(np.abs(poles - center) - radius)) < settings.pole_guard:
        raise SchottkyError("contour passes through a pole; change the contour radius")
    return _contour_integral(
        diff,
        lambda t: center + radius * cmath.exp(1j * t),
        lambda t: 1j * radius * cmath.exp(1j * t),
        0.0,
        2 * math.pi,
        settings.quad_limit,
    )


def a_cycle_integral(group: SchottkyGroup, i: int, j: int) -> complex:
    """Integral of omega_i around the circle enclosing alpha_j; about 2 pi i delta_ij."""
    center, radius = cycle_circle(group, j)
    return integrate_on_circle(first_kind(group, i), center, radius)


def default_base_point(group: SchottkyGroup) -> complex:
    """Centroid of the finite repulsive fixed points, lifted clear of every isometric circle."""
    _require_complex(group)
    points = [group.alpha(-i).as_complex() for i in range(1, group.genus + 1)]
    points = [p for p in points if np.isfinite(p.real)] or [1.0 + 0j]
    centroid = complex(np.mean(points))
    spread = max(abs(p - centroid) for p in points)
    circles = group.isometric_circles()
    radius = max((c.radius for c in circles), default=0.5)
    z0 = centroid + 1j * (spread / 2 + radius)
    while any(abs(z0 - c.center) <= 1.5 * c.radius for c in circles):
        z0 += 1j * radius
    return z0


def integrate_on_segment(diff: Differential, start: complex, end: complex) -> complex:
    _require_complex(diff.group)
    settings = diff.group.settings
    if _segment_distance(_poles_of(diff), start, end) < settings.pole_guard:
        raise SchottkyError("integration path meets a pole; move the base point z0")
    d = end - start
    return _contour_integral(diff, lambda t: start + t * d, lambda t: d, 0.0, 1.0, settings.quad_limit)


def b_path_end(group: SchottkyGroup, j: int, z0: complex) -> complex:
    m = group.gamma(j)
    return complex(m.apply_value(complex(z0)))


def b_period_numeric(group: SchottkyGroup, i: int, j: int, z0: Optional[complex] = None) -> complex:
    """Integral of omega_i from z0 to gamma_j(z0); defined modulo 2 pi i."""
    z0 = default_base_point(group) if z0 is None else complex(z0)
    return integrate_on_segment(first_kind(group, i), z0, b_path_end(group, j, z0))


def period_oracle_residuals(group: SchottkyGroup, P: List[List[Any]], z0: Optional[complex] = None) -> List[List[float]]:
    """|exp(int_{z0}^{gamma_j z0} omega_i) / P_ji - 1| for all i, j."""
    z0 = default_base_point(group) if z0 is None else complex(z0)
    g = group.genus
    out = [[0.0] * g for _ in range(g)]
    for i in range(1, g + 1):
        for j in range(1, g + 1):
            b = b_period_numeric(group, i, j, z0)
            out[i - 1][j - 1] = float(abs(cmath.exp(b) / complex(P[j - 1][i - 1]) - 1))
    return out


def _wrap(value: complex) -> complex:
    """Representative modulo 2 pi i with imaginary part in (-pi, pi]."""
    im = math.remainder(value.imag, 2 * math.pi)
    return complex(value.real, im)


# The eta basis ------------------------------------------------------------

def _antiderivative(x: ProjectivePoint, k: int, ring) -> Callable[[ProjectivePoint], Any]:
    """F_k with dF_k = dz / (z - x)^k, as a function of a projective point."""

    def F(p: ProjectivePoint) -> Any:
        if p.is_infinite():
            return ring.zero()
        den = p.u * x.w - x.u * p.w
        if not is_unit(den):
            raise SchottkyError("non-generic parameters: a fixed point meets the tail point")
        return -(p.w * x.w / den) ** (k - 1) / (k - 1)

    return F


def eta_system(group: SchottkyGroup, t0: str, convention: str = "fixed_point", z0: Optional[complex] = None) -> List[List[Any]]:
    """M_ik: the b-period of omega_{t0,k+1} along gamma_i, i, k = 1..g."""
    g = group.genus
    ring = group.ring
    forms = [second_kind(group, t0, k) for k in range(2, g + 2)]
    x = group.params.point(Branch(t0, 0))
    if x.is_infinite():
        raise SchottkyError("the eta basis needs a finite tail point")
    M = [[ring.zero() for _ in range(g)] for _ in range(g)]
    if convention == "fixed_point":
        for col, k in enumerate(range(2, g + 2)):
            F = _antiderivative(x, k, ring)
            for i in range(1, g + 1):
                total = ring.zero()
                for word, m in group.coset_reps(i):
                    total = total + F(group.fixed_point_image(word, i, m)) - F(group.fixed_point_image(word, -i, m))
                M[i - 1][col] = total
    elif convention == "b_path":
        _require_complex(group)
        z0 = default_base_point(group) if z0 is None else complex(z0)
        for col, form in enumerate(forms):
            for i in range(1, g + 1):
                M[i - 1][col] = integrate_on_segment(form, z0, b_path_end(group, i, z0))
    else:
        raise InputError(f"unknown eta convention {convention!r} (expected fixed_point or b_path)")
    return M


def _solve_exact(M: List[List[Any]], ring) -> Tuple[List[List[Any]], Any]:
    """Inverse and determinant by Gauss-Jordan elimination with unit pivots."""
    n = len(M)
    A = [list(row) + [ring.one() if r == c else ring.zero() for c in range(n)] for r, row in enumerate(M)]
    det = ring.one()
    for col in range(n):
        pivot = next((r for r in range(col, n) if is_unit(A[r][col])), None)
        if pivot is None:
            raise SchottkyError("non-generic parameters: the eta system is singular")
        if pivot != col:
            A[col], A[pivot] = A[pivot], A[col]
            det = -det
        p = A[col][col]
        det = det * p
        A[col] = [v / p for v in A[col]]
        for r in range(n):
            if r != col and not is_zero(A[r][col]):
                factor = A[r][col]
                A[r] = [a - factor * b for a, b in zip(A[r], A[col])]
    return [row[n:] for row in A], det


def eta_basis(
    group: SchottkyGroup,
    t0: str,
    convention: str = "fixed_point",
    z0: Optional[complex] = None,
) -> Tuple[List[List[Any]], Any, List[List[Any]]]:
    """
    Coefficients C with eta_j = sum_k C_kj omega_{t0,k+1}, normalised so that
    the b-period of eta_j along gamma_i is delta_ij. Returns (C, det M, M).
    """
    if not group.graph.tails:
        raise SchottkyError("the eta basis needs at least one tail")
    M = eta_system(group, t0, convention, z0)
    ring = group.ring
    if isinstance(ring, ComplexRing):
        A = np.array(M, dtype=complex)
        det = complex(np.linalg.det(A)) if A.size else 1 + 0j
        if A.size and np.linalg.cond(A) > 1 / group.settings.tol:
            raise SchottkyError("non-generic parameters: the eta system is singular")
        C = np.linalg.inv(A) if A.size else A
        return [[complex(v) for v in row] for row in C], det, M
    try:
        C, det = _solve_exact(M, ring)
    except RingError as e:
        raise SchottkyError(f"non-generic parameters: {e}") from e
    return C, det, M


def vandermonde_check(group: SchottkyGroup, t0: str) -> Tuple[Fraction, Fraction]:
    """
    Determinant of [1/((1-k)(a_i - x)^(k-1))] at the special fibre, computed
    directly and by the product formula. Both are exact rationals.
    """
    x = group.params.point(Branch(t0, 0)).constant()
    if x.is_infinite():
        raise SchottkyError("the Vandermonde check needs a finite tail point")
    xt = Fraction(x.affine())
    alphas = []
    for i in range(1, group.genus + 1):
        a = group.alpha(i).constant()
        if a.is_infinite():
            raise SchottkyError(f"alpha_{i} reduces to infinity; no Vandermonde form")
        alphas.append(Fraction(a.affine()))
    g = len(alphas)
    rows = [[Fraction(1) / ((1 - k) * (a - xt) ** (k - 1)) for k in range(2, g + 2)] for a in alphas]
    direct = _fraction_det(rows)
    formula = Fraction(1)
    for k in range(2, g + 2):
        formula /= 1 - k
    for a in alphas:
        formula /= a - xt
    for i in range(g):
        for j in range(i + 1, g):
            formula *= (alphas[i] - alphas[j]) / ((alphas[i] - xt) * (alphas[j] - xt))
    return direct, formula


def _fraction_det(rows: List[List[Fraction]]) -> Fraction:
    A = [list(r) for r in rows]
    n = len(A)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if A[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            A[col], A[pivot] = A[pivot], A[col]
            det = -det
        det *= A[col][col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return det


def verify_eta_normalisation(group: SchottkyGroup, t0: str, C: List[List[Any]], z0: Optional[complex] = None) -> float:
    """max |b-period of eta_j along gamma_i - delta_ij|, with the periods taken by quadrature."""
    numeric = eta_system(group, t0, "b_path", z0)
    g = group.genus
    worst = 0.0
    for i in range(g):
        for j in range(g):
            value = sum(complex(numeric[i][k]) * complex(C[k][j]) for k in range(g))
            worst = max(worst, abs(value - (1.0 if i == j else 0.0)))
    return worst


# Gauss-Manin check --------------------------------------------------------

def _periods_at(graph: StableGraph, params: EdgeParameters, base: str, wordlen: int, settings, t0: str, z0: complex) -> Dict[str, Any]:
    group = build_group(graph, params, base, wordlen, settings)
    g = group.genus
    C, _, _ = eta_basis(group, t0)
    etas = [[second_kind(group, t0, k) for k in range(2, g + 2)], C]

    def eta_integral(j: int, path: Callable[[Differential], complex]) -> complex:
        forms, coeffs = etas
        return sum(path(forms[k]) * complex(coeffs[k][j]) for k in range(g))

    eta_b = [[eta_integral(j, lambda f, i=i: integrate_on_segment(f, z0, b_path_end(group, i + 1, z0))) for j in range(g)] for i in range(g)]
    eta_a = []
    omega_a = []
    for i in range(g):
        center, radius = cycle_circle(group, i + 1)
        eta_a.append([eta_integral(j, lambda f: integrate_on_circle(f, center, radius)) for j in range(g)])
        omega_a.append([a_cycle_integral(group, j + 1, i + 1) for j in range(g)])
    omega_b = [[b_period_numeric(group, i + 1, k + 1, z0) for k in range(g)] for i in range(g)]
    P = period_matrix(group)
    return {"eta_b": eta_b, "eta_a": eta_a, "omega_a": omega_a, "omega_b": omega_b, "P": P}


def gauss_manin_check(
    graph: StableGraph,
    params: EdgeParameters,
    base: str,
    wordlen: int,
    settings,
    t0: str,
    direction: Mapping[str, Any],
    step: float = 1e-4,
    tolerance: float = 1e-5,
) -> Dict[str, Any]:
    """
    Central differences along a parameter direction: eta periods and omega
    a-periods stay constant, and d/ds of the b-period of omega_i along gamma_k
    equals sum_j (b-period of eta_j along gamma_k) d/ds log P_ij.
    """
    if not isinstance(params.ring, ComplexRing):
        raise InputError("the Gauss-Manin check needs the complex ring")
    centre = build_group(graph, params, base, wordlen, settings)
    z0 = default_base_point(centre)
    lo = _periods_at(graph, params.shifted(direction, -step), base, wordlen, settings, t0, z0)
    mid = _periods_at(graph, params, base, wordlen, settings, t0, z0)
    hi = _periods_at(graph, params.shifted(direction, step), base, wordlen, settings, t0, z0)
    g = centre.genus

    def spread(key: str) -> float:
        return max(
            (abs(_wrap(complex(hi[key][i][j]) - complex(lo[key][i][j]))) / (2 * step) for i in range(g) for j in range(g)),
            default=0.0,
        )

    connection = 0.0
    for i in range(g):
        for k in range(g):
            lhs = _wrap(complex(hi["omega_b"][i][k]) - complex(lo["omega_b"][i][k])) / (2 * step)
            rhs = sum(
                complex(mid["eta_b"][k][j]) * cmath.log(complex(hi["P"][i][j]) / complex(lo["P"][i][j])) / (2 * step)
                for j in range(g)
            )
            connection = max(connection, abs(lhs - rhs))
    report = {
        "step": step,
        "eta_b_residual": spread("eta_b"),
        "eta_a_residual": spread("eta_a"),
        "omega_a_residual": spread("omega_a"),
        "connection_residual": connection,
        "tolerance": tolerance,
    }
    report["passed"] = all(report[k] < tolerance for k in ("eta_b_residual", "eta_a_residual", "omega_a_residual", "connection_residual"))
    logger.info(f"Gauss-Manin check: {'passed' if report['passed'] else 'failed'} with connection residual {connection:.2e}")
    return report
