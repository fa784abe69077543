# app/services/rings.py

import logging
import math
from fractions import Fraction
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from app.models.errors import InputError, RingError

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]
Scalar = Union[int, Fraction]


def as_fraction(value: Any) -> Fraction:
    """Exact rational from an int, Fraction or "num/den" string."""
    if isinstance(value, bool):
        raise InputError(f"not a rational value: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise InputError(f"not a rational value: {value!r}") from e
    raise InputError(f"not a rational value: {value!r}")


class TruncatedSeries:
    """
    Multivariate power series over Q in the edge variables, truncated at
    total degree `cutoff`. Values are immutable.
    """

    __slots__ = ("vars", "cutoff", "terms")

    def __init__(
        self,
        vars: Sequence[str],
        cutoff: int,
        terms: Optional[Mapping[Exponent, Any]] = None,
    ):
        if cutoff < 0:
            raise RingError("series cutoff must be non-negative")
        self.vars = tuple(vars)
        self.cutoff = cutoff
        clean: Dict[Exponent, Fraction] = {}
        for exp, coeff in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != len(self.vars) or any(e < 0 for e in exp):
                raise RingError(f"bad exponent {exp} for variables {self.vars}")
            if sum(exp) > cutoff:
                continue
            c = as_fraction(coeff) if not isinstance(coeff, Fraction) else coeff
            if c:
                clean[exp] = clean.get(exp, Fraction(0)) + c
        self.terms = {e: c for e, c in clean.items() if c}

    @classmethod
    def _raw(cls, vars: Tuple[str, ...], cutoff: int, terms: Dict[Exponent, Fraction]) -> "TruncatedSeries":
        obj = cls.__new__(cls)
        obj.vars = vars
        obj.cutoff = cutoff
        obj.terms = terms
        return obj

    @classmethod
    def constant(cls, vars: Sequence[str], cutoff: int, value: Scalar) -> "TruncatedSeries":
        value = as_fraction(value)
        zero = (0,) * len(vars)
        return cls._raw(tuple(vars), cutoff, {zero: value} if value else {})

    @classmethod
    def variable(cls, vars: Sequence[str], cutoff: int, name: str) -> "TruncatedSeries":
        vars = tuple(vars)
        if name not in vars:
            raise RingError(f"unknown series variable {name!r}")
        exp = tuple(1 if v == name else 0 for v in vars)
        return cls._raw(vars, cutoff, {exp: Fraction(1)} if cutoff >= 1 else {})

    # --- arithmetic -----------------------------------------------------

    def _coerce(self, other: Any):
        if isinstance(other, TruncatedSeries):
            if other.vars != self.vars or other.cutoff != self.cutoff:
                raise RingError("series with different variables or cutoff cannot be mixed")
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return TruncatedSeries.constant(self.vars, self.cutoff, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return TruncatedSeries._raw(self.vars, self.cutoff, out)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries._raw(self.vars, self.cutoff, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            if not other:
                return TruncatedSeries._raw(self.vars, self.cutoff, {})
            return TruncatedSeries._raw(self.vars, self.cutoff, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        cutoff = self.cutoff
        right = [(e, sum(e), c) for e, c in other.terms.items()]
        out: Dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, d2, c2 in right:
                if d1 + d2 > cutoff:
                    continue
                key = tuple(a + b for a, b in zip(e1, e2))
                out[key] = out.get(key, 0) + c1 * c2
        return TruncatedSeries._raw(self.vars, cutoff, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            if not other:
                raise RingError("not a unit in A_Δ")
            return self * (Fraction(1) / Fraction(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        result = TruncatedSeries.constant(self.vars, self.cutoff, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, TruncatedSeries):
            return self.vars == other.vars and self.cutoff == other.cutoff and self.terms == other.terms
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.terms == TruncatedSeries.constant(self.vars, self.cutoff, other).terms
        return NotImplemented

    def __hash__(self):
        return hash((self.vars, self.cutoff, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), key=lambda item: (sum(item[0]), item[0])):
            mono = "*".join(
                v if k == 1 else f"{v}^{k}" for v, k in zip(self.vars, e) if k
            )
            parts.append(f"{c}" if not mono else (mono if c == 1 else f"{c}*{mono}"))
        return " + ".join(parts)

    # --- ring structure -------------------------------------------------

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def is_unit(self) -> bool:
        return self.constant_term() != 0

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def order(self) -> float:
        if not self.terms:
            return math.inf
        return min(sum(e) for e in self.terms)

    def inverse(self) -> "TruncatedSeries":
        c0 = self.constant_term()
        if not c0:
            raise RingError("not a unit in A_Δ")
        inv0 = 1 / c0
        # f = c0 (1 + h) with h in the ideal; 1/f = inv0 * sum (-h)^k
        minus_h = -(self * inv0 - 1)
        total = TruncatedSeries.constant(self.vars, self.cutoff, 1)
        power = total
        for _ in range(self.cutoff):
            power = power * minus_h
            if not power.terms:
                break
            total = total + power
        return total * inv0

    def truncate(self, cutoff: int) -> "TruncatedSeries":
        return TruncatedSeries(self.vars, cutoff, {e: c for e, c in self.terms.items() if sum(e) <= cutoff})

    def substitute_zero(self, names: Iterable[str]) -> "TruncatedSeries":
        """Set the named variables to zero."""
        idx = [self.vars.index(n) for n in names if n in self.vars]
        kept = {e: c for e, c in self.terms.items() if all(e[i] == 0 for i in idx)}
        return TruncatedSeries._raw(self.vars, self.cutoff, kept)

    def evaluate(self, values: Mapping[str, Any]):
        total: Any = 0
        for e, c in self.terms.items():
            term: Any = c
            for v, k in zip(self.vars, e):
                if k:
                    term = term * values[v] ** k
            total = total + term
        return total

    def to_json(self) -> Dict[str, Any]:
        return {
            "vars": list(self.vars),
            "cutoff": self.cutoff,
            "terms": [
                {"exp": list(e), "num": str(c.numerator), "den": str(c.denominator)}
                for e, c in sorted(self.terms.items(), key=lambda item: (sum(item[0]), item[0]))
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "TruncatedSeries":
        try:
            terms = {
                tuple(t["exp"]): Fraction(int(t["num"]), int(t["den"]))
                for t in data["terms"]
            }
            return cls(data["vars"], int(data["cutoff"]), terms)
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
            raise InputError(f"malformed series: {e}") from e


# --- ring descriptors -----------------------------------------------------

class Ring:
    tag = "abstract"
    exact = True

    def zero(self):
        return self.coerce(0)

    def one(self):
        return self.coerce(1)

    def coerce(self, value: Any):
        raise NotImplementedError

    def is_unit(self, value: Any) -> bool:
        return is_unit(value)

    def is_zero(self, value: Any) -> bool:
        return is_zero(value)

    def close(self, a: Any, b: Any) -> bool:
        return a == b

    def order(self, value: Any) -> float:
        return 0 if not is_zero(value) else math.inf


class RationalRing(Ring):
    tag = "rational"

    def coerce(self, value: Any) -> Fraction:
        return as_fraction(value)


class ComplexRing(Ring):
    tag = "complex"
    exact = False

    def __init__(self, tol: float = 1e-8):
        self.tol = tol

    def coerce(self, value: Any) -> complex:
        if isinstance(value, complex):
            return value
        if isinstance(value, (int, float, Fraction)) and not isinstance(value, bool):
            return complex(float(value))
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return complex(float(value[0]), float(value[1]))
        if isinstance(value, str):
            text = value.strip()
            try:
                return complex(float(Fraction(text)))
            except (ValueError, ZeroDivisionError):
                pass
            try:
                return complex(text.replace(" ", ""))
            except ValueError as e:
                raise InputError(f"not a complex value: {value!r}") from e
        raise InputError(f"not a complex value: {value!r}")

    def close(self, a: Any, b: Any) -> bool:
        return abs(a - b) <= self.tol * max(1.0, abs(a), abs(b))


class SeriesRing(Ring):
    tag = "series"

    def __init__(self, vars: Sequence[str], cutoff: int):
        self.vars = tuple(vars)
        self.cutoff = cutoff

    def coerce(self, value: Any) -> TruncatedSeries:
        if isinstance(value, TruncatedSeries):
            if value.vars != self.vars or value.cutoff != self.cutoff:
                raise RingError("series does not belong to this ring")
            return value
        return TruncatedSeries.constant(self.vars, self.cutoff, as_fraction(value))

    def variable(self, name: str) -> TruncatedSeries:
        return TruncatedSeries.variable(self.vars, self.cutoff, name)

    def order(self, value: Any) -> float:
        return self.coerce(value).order()


def is_unit(value: Any) -> bool:
    if isinstance(value, TruncatedSeries):
        return value.is_unit()
    return value != 0


def is_zero(value: Any) -> bool:
    if isinstance(value, TruncatedSeries):
        return not value.terms
    return value == 0


def constant_term(value: Any):
    if isinstance(value, TruncatedSeries):
        return value.constant_term()
    return value


def series_invert(f: TruncatedSeries) -> TruncatedSeries:
    return f.inverse()


def make_ring(tag: str, *, vars: Sequence[str] = (), cutoff: int = 6, tol: float = 1e-8) -> Ring:
    if tag == "rational":
        return RationalRing()
    if tag == "complex":
        return ComplexRing(tol)
    if tag == "series":
        return SeriesRing(vars, cutoff)
    raise InputError(f"unknown ring {tag!r} (expected rational, complex or series)")
