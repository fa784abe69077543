# app/services/moebius.py

import cmath
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence, Tuple

from app.models.errors import MoebiusError
from app.services.graph_core import Branch, EdgePath
from app.services.rings import (
    ComplexRing,
    RationalRing,
    Ring,
    SeriesRing,
    constant_term,
    is_unit,
    is_zero,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectivePoint:
    """Homogeneous point (u : w) of P^1; infinity is (1 : 0)."""

    u: Any
    w: Any

    @classmethod
    def finite(cls, value: Any, ring: Ring) -> "ProjectivePoint":
        return cls(ring.coerce(value), ring.one())

    @classmethod
    def infinity(cls, ring: Ring) -> "ProjectivePoint":
        return cls(ring.one(), ring.zero())

    def is_infinite(self) -> bool:
        return is_zero(self.w)

    def affine(self) -> Any:
        if not is_unit(self.w):
            raise MoebiusError("point has no affine coordinate (at or near infinity)")
        return self.u / self.w

    def normalized(self) -> "ProjectivePoint":
        if isinstance(self.w, complex) or isinstance(self.u, complex):
            if abs(self.w) <= 1e-15 * abs(self.u):
                return ProjectivePoint(type(self.u)(1), type(self.w)(0))
            return ProjectivePoint(self.u / self.w, type(self.w)(1))
        if is_unit(self.w):
            return ProjectivePoint(self.u / self.w, self.w / self.w)
        if is_unit(self.u):
            return ProjectivePoint(self.u / self.u, self.w / self.u)
        raise MoebiusError("indeterminate point: neither coordinate is a unit")

    def constant(self) -> "ProjectivePoint":
        """Reduction modulo the deformation ideal."""
        return ProjectivePoint(constant_term(self.u), constant_term(self.w)).normalized()

    def as_complex(self) -> complex:
        """Finite complex coordinate, or complex infinity as inf."""
        p = self.normalized()
        if is_zero(p.w):
            return complex(math.inf, 0.0)
        return complex(p.u)


def delta(p: ProjectivePoint, q: ProjectivePoint) -> Any:
    """Projective difference p - q (up to the factor p.w q.w)."""
    return p.u * q.w - q.u * p.w


def same_point(p: ProjectivePoint, q: ProjectivePoint, ring: Ring) -> bool:
    d = delta(p, q)
    if isinstance(ring, ComplexRing):
        scale = max(abs(p.u), abs(p.w)) * max(abs(q.u), abs(q.w))
        return abs(d) <= ring.tol * max(scale, 1e-300)
    return is_zero(d)


@dataclass(frozen=True)
class MoebiusMap:
    """
    Unnormalised 2x2 matrix (a b; c d) acting by linear fractional
    transformation. Equality of maps is projective, see projectively_equal.
    """

    a: Any
    b: Any
    c: Any
    d: Any

    @classmethod
    def identity(cls, ring: Ring) -> "MoebiusMap":
        return cls(ring.one(), ring.zero(), ring.zero(), ring.one())

    @property
    def det(self) -> Any:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> Any:
        return self.a + self.d

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "MoebiusMap":
        # adjugate; equal to the inverse up to the scalar det
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def power(self, k: int, ring: Ring) -> "MoebiusMap":
        base = self if k >= 0 else self.inverse()
        out = MoebiusMap.identity(ring)
        for _ in range(abs(k)):
            out = out @ base
        return out

    def apply(self, z: ProjectivePoint) -> ProjectivePoint:
        return ProjectivePoint(self.a * z.u + self.b * z.w, self.c * z.u + self.d * z.w)

    def apply_value(self, z: Any) -> Any:
        return (self.a * z + self.b) / (self.c * z + self.d)

    def constant(self) -> "MoebiusMap":
        return MoebiusMap(*(constant_term(x) for x in (self.a, self.b, self.c, self.d)))

    def entries(self) -> Tuple[Any, Any, Any, Any]:
        return (self.a, self.b, self.c, self.d)

    def projectively_equal(self, other: "MoebiusMap", ring: Ring) -> bool:
        mine, theirs = self.entries(), other.entries()
        for i in range(4):
            for j in range(i + 1, 4):
                minor = mine[i] * theirs[j] - mine[j] * theirs[i]
                if isinstance(ring, ComplexRing):
                    scale = max(abs(x) for x in mine) * max(abs(x) for x in theirs)
                    if abs(minor) > ring.tol * scale:
                        return False
                elif not is_zero(minor):
                    return False
        return True


def phi_of_edge(x_plus: ProjectivePoint, x_minus: ProjectivePoint, y: Any) -> MoebiusMap:
    """
    The atom with fixed points x_plus, x_minus and multiplier y:
    (x_plus x_minus; 1 1) diag(1, y) (x_plus x_minus; 1 1)^-1, unnormalised,
    so det = y (x_plus - x_minus)^2.
    """
    if not is_unit(delta(x_plus, x_minus)):
        raise MoebiusError("degenerate edge parameters")
    u, w = x_plus.u, x_plus.w
    u2, w2 = x_minus.u, x_minus.w
    one_minus_y = 1 - y
    return MoebiusMap(
        u * w2 - u2 * y * w,
        -(u * u2) * one_minus_y,
        w * w2 * one_minus_y,
        w2 * y * u - w * u2,
    )


def word_to_map(path: Sequence[Branch], atoms: Mapping[Branch, MoebiusMap], ring: Ring) -> MoebiusMap:
    """Anti-homomorphism: h(1)...h(l) maps to phi_h(l) ... phi_h(1)."""
    path = tuple(path.branches if isinstance(path, EdgePath) else path)
    for first, second in zip(path, path[1:]):
        if second == -first:
            raise MoebiusError("path not reduced")
    out = MoebiusMap.identity(ring)
    for h in path:
        try:
            out = atoms[h] @ out
        except KeyError:
            raise MoebiusError(f"no atom for branch {h}") from None
    return out


def eigenvalue_at(m: MoebiusMap, p: ProjectivePoint) -> Any:
    """Eigenvalue of the matrix on the eigenvector p."""
    if isinstance(p.w, complex):
        if abs(p.w) >= abs(p.u):
            return (m.c * p.u + m.d * p.w) / p.w
        return (m.a * p.u + m.b * p.w) / p.u
    if is_unit(p.w):
        return (m.c * p.u + m.d * p.w) / p.w
    return (m.a * p.u + m.b * p.w) / p.u


def _eigenvector(m: MoebiusMap, lam: Any) -> ProjectivePoint:
    first = ProjectivePoint(m.b, lam - m.a)
    second = ProjectivePoint(lam - m.d, m.c)
    if isinstance(lam, complex):
        n1 = abs(first.u) + abs(first.w)
        n2 = abs(second.u) + abs(second.w)
        return (first if n1 >= n2 else second).normalized()
    if is_zero(first.u) and is_zero(first.w):
        return second.normalized()
    return first.normalized()


def _complex_fixed_points(m: MoebiusMap, margin: float) -> Tuple[ProjectivePoint, ProjectivePoint, complex]:
    a, b, c, d = (complex(x) for x in m.entries())
    tr, det = a + d, a * d - b * c
    if det == 0:
        raise MoebiusError("not loxodromic: singular matrix")
    s = cmath.sqrt(tr * tr - 4 * det)
    big = (tr + s) / 2 if abs(tr + s) >= abs(tr - s) else (tr - s) / 2
    if big == 0:
        raise MoebiusError("not loxodromic")
    small = det / big
    beta = small / big
    if abs(beta) >= margin:
        raise MoebiusError(f"not loxodromic: |multiplier| = {abs(beta):.4f} exceeds margin {margin}")
    cm = MoebiusMap(a, b, c, d)
    return _eigenvector(cm, big), _eigenvector(cm, small), beta


def _rational_sqrt(x: Fraction) -> Optional[Fraction]:
    if x < 0:
        return None
    num, den = x.numerator, x.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn != num or rd * rd != den:
        return None
    return Fraction(rn, rd)


def _rational_fixed_points(m: MoebiusMap) -> Tuple[ProjectivePoint, ProjectivePoint, Fraction]:
    tr, det = m.trace, m.det
    if det == 0:
        raise MoebiusError("not loxodromic: singular matrix")
    disc = tr * tr - 4 * det
    if disc < 0:
        raise MoebiusError("not loxodromic: eigenvalues of equal modulus")
    s = _rational_sqrt(disc)
    if s is None:
        raise MoebiusError("fixed points are irrational over Q; use the series or complex ring")
    l1, l2 = (tr + s) / 2, (tr - s) / 2
    if abs(l1) == abs(l2):
        raise MoebiusError("not loxodromic: eigenvalues of equal modulus")
    big, small = (l1, l2) if abs(l1) > abs(l2) else (l2, l1)
    return _eigenvector(m, big), _eigenvector(m, small), small / big


def _iterate(m: MoebiusMap, start: ProjectivePoint, cutoff: int) -> ProjectivePoint:
    z = start.normalized()
    for _ in range(cutoff + 3):
        nxt = m.apply(z).normalized()
        if nxt == z:
            return z
        z = nxt
    raise MoebiusError("not loxodromic: iteration did not stabilise")


def fixed_points(
    m: MoebiusMap,
    ring: Ring,
    margin: float = 0.95,
    starts: Optional[Tuple[ProjectivePoint, ProjectivePoint]] = None,
) -> Tuple[ProjectivePoint, ProjectivePoint]:
    """
    (attractive, repulsive) fixed points. Over series the limits of the
    iterates of m and m^-1 are taken from the given start points.
    """
    if isinstance(ring, ComplexRing):
        attractive, repulsive, _ = _complex_fixed_points(m, margin)
        return attractive, repulsive
    if isinstance(ring, RationalRing):
        attractive, repulsive, _ = _rational_fixed_points(m)
        return attractive, repulsive
    if isinstance(ring, SeriesRing):
        if starts is None:
            raise MoebiusError("series fixed points need start points congruent to them")
        attractive = _iterate(m, starts[0], ring.cutoff)
        repulsive = _iterate(m.inverse(), starts[1], ring.cutoff)
        return attractive, repulsive
    raise MoebiusError(f"unsupported ring {ring.tag}")


def multiplier(
    m: MoebiusMap,
    ring: Ring,
    margin: float = 0.95,
    starts: Optional[Tuple[ProjectivePoint, ProjectivePoint]] = None,
    points: Optional[Tuple[ProjectivePoint, ProjectivePoint]] = None,
) -> Any:
    if isinstance(ring, ComplexRing) and points is None:
        return _complex_fixed_points(m, margin)[2]
    if isinstance(ring, RationalRing) and points is None:
        return _rational_fixed_points(m)[2]
    attractive, repulsive = points or fixed_points(m, ring, margin, starts)
    lam_a = eigenvalue_at(m, attractive)
    if not is_unit(lam_a):
        raise MoebiusError("not loxodromic: eigenvalue at the attractive point is not a unit")
    beta = eigenvalue_at(m, repulsive) / lam_a
    if isinstance(ring, SeriesRing) and ring.coerce(beta).order() < 1:
        raise MoebiusError("not loxodromic: multiplier is not in the deformation ideal")
    return beta


def cross_ratio(a: ProjectivePoint, b: ProjectivePoint, c: ProjectivePoint, d: ProjectivePoint) -> Any:
    """[a, b; c, d] = (a - c)(b - d) / ((a - d)(b - c))."""
    den = delta(a, d) * delta(b, c)
    if not is_unit(den):
        raise MoebiusError("degenerate cross-ratio")
    return delta(a, c) * delta(b, d) / den


def derivative_at(m: MoebiusMap, z: Any) -> Any:
    if isinstance(z, ProjectivePoint):
        if z.is_infinite():
            raise MoebiusError("derivative needs a finite point")
        z = z.affine()
    q = m.c * z + m.d
    if not is_unit(q):
        raise MoebiusError("pole of derivative")
    return m.det / (q * q)


def conjugate(m: MoebiusMap, g: MoebiusMap) -> MoebiusMap:
    return g @ m @ g.inverse()
