# app/services/ncseries.py

import logging
import math
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from app.models.errors import InputError

logger = logging.getLogger(__name__)

Word = Tuple[str, ...]


class NCSeries:
    """
    Noncommutative power series in free letters, truncated at word length
    `weight`. Coefficients are exact rationals or complex floats.
    """

    __slots__ = ("weight", "terms")

    def __init__(self, terms: Optional[Mapping[Word, Any]] = None, weight: int = 4):
        if weight < 0:
            raise ValueError("weight cutoff must be non-negative")
        self.weight = weight
        clean: Dict[Word, Any] = {}
        for word, coeff in (terms or {}).items():
            word = tuple(word)
            if len(word) > weight:
                continue
            clean[word] = clean.get(word, 0) + coeff
        self.terms = {w: c for w, c in clean.items() if c != 0}

    @classmethod
    def _raw(cls, terms: Dict[Word, Any], weight: int) -> "NCSeries":
        obj = cls.__new__(cls)
        obj.weight = weight
        obj.terms = terms
        return obj

    @classmethod
    def one(cls, weight: int) -> "NCSeries":
        return cls._raw({(): Fraction(1)}, weight)

    @classmethod
    def zero(cls, weight: int) -> "NCSeries":
        return cls._raw({}, weight)

    @classmethod
    def letter(cls, name: str, weight: int) -> "NCSeries":
        return cls._raw({(name,): Fraction(1)} if weight >= 1 else {}, weight)

    # --- arithmetic -----------------------------------------------------

    def _lift(self, other: Any) -> "NCSeries":
        if isinstance(other, NCSeries):
            return other
        if isinstance(other, (int, Fraction, float, complex)) and not isinstance(other, bool):
            return NCSeries._raw({(): other} if other != 0 else {}, self.weight)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        weight = min(self.weight, other.weight)
        out = {w: c for w, c in self.terms.items() if len(w) <= weight}
        for w, c in other.terms.items():
            if len(w) > weight:
                continue
            s = out.get(w, 0) + c
            if s != 0:
                out[w] = s
            else:
                out.pop(w, None)
        return NCSeries._raw(out, weight)

    __radd__ = __add__

    def __neg__(self):
        return NCSeries._raw({w: -c for w, c in self.terms.items()}, self.weight)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def scale(self, factor: Any) -> "NCSeries":
        if factor == 0:
            return NCSeries._raw({}, self.weight)
        return NCSeries._raw({w: c * factor for w, c in self.terms.items()}, self.weight)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, float, complex)) and not isinstance(other, bool):
            return self.scale(other)
        if not isinstance(other, NCSeries):
            return NotImplemented
        weight = min(self.weight, other.weight)
        out: Dict[Word, Any] = {}
        for u, a in self.terms.items():
            room = weight - len(u)
            if room < 0:
                continue
            for v, b in other.terms.items():
                if len(v) > room:
                    continue
                key = u + v
                out[key] = out.get(key, 0) + a * b
        return NCSeries._raw({w: c for w, c in out.items() if c != 0}, weight)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, float, complex)) and not isinstance(other, bool):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        result = NCSeries.one(self.weight)
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other):
        if isinstance(other, NCSeries):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for w, c in sorted(self.terms.items(), key=lambda item: (len(item[0]), item[0])):
            parts.append(f"({c})" + ("·" + "".join(w) if w else ""))
        return " + ".join(parts)

    # --- structure ------------------------------------------------------

    def coefficient(self, word: Sequence[str]):
        return self.terms.get(tuple(word), 0)

    def constant_term(self):
        return self.terms.get((), 0)

    def letters(self) -> List[str]:
        return sorted({letter for w in self.terms for letter in w})

    def truncate(self, weight: int) -> "NCSeries":
        return NCSeries._raw({w: c for w, c in self.terms.items() if len(w) <= weight}, min(weight, self.weight))

    def homogeneous(self, k: int) -> Dict[Word, Any]:
        return {w: c for w, c in self.terms.items() if len(w) == k}

    def exp(self) -> "NCSeries":
        if self.constant_term() != 0:
            raise ValueError("exp needs a series with zero constant term")
        total = NCSeries.one(self.weight)
        power = NCSeries.one(self.weight)
        for k in range(1, self.weight + 1):
            power = power * self
            if not power.terms:
                break
            total = total + power.scale(Fraction(1, math.factorial(k)))
        return total

    def log(self) -> "NCSeries":
        if self.constant_term() != 1:
            raise ValueError("log needs a series with constant term 1")
        h = self - 1
        total = NCSeries.zero(self.weight)
        power = NCSeries.one(self.weight)
        for k in range(1, self.weight + 1):
            power = power * h
            if not power.terms:
                break
            total = total + power.scale(Fraction((-1) ** (k + 1), k))
        return total

    def inverse(self) -> "NCSeries":
        c0 = self.constant_term()
        if c0 == 0:
            raise ValueError("series with zero constant term is not invertible")
        inv0 = 1 / c0
        minus_h = -(self.scale(inv0) - 1)
        total = NCSeries.one(self.weight)
        power = NCSeries.one(self.weight)
        for _ in range(self.weight):
            power = power * minus_h
            if not power.terms:
                break
            total = total + power
        return total.scale(inv0)

    def substitute(self, images: Mapping[str, "NCSeries"], weight: Optional[int] = None) -> "NCSeries":
        """Algebra map sending each letter to the given series."""
        weight = self.weight if weight is None else weight
        out = NCSeries.zero(weight)
        cache: Dict[Word, NCSeries] = {(): NCSeries.one(weight)}
        for word in sorted(self.terms, key=len):
            prod = cache.get(word)
            if prod is None:
                prefix = cache.get(word[:-1])
                if prefix is None:
                    prefix = NCSeries.one(weight)
                    for letter in word[:-1]:
                        prefix = prefix * _image(images, letter, weight)
                prod = prefix * _image(images, word[-1], weight)
                cache[word] = prod
            out = out + prod.scale(self.terms[word])
        return out

    def distance(self, other: "NCSeries") -> float:
        words = set(self.terms) | set(other.terms)
        return max((abs(complex(self.coefficient(w)) - complex(other.coefficient(w))) for w in words), default=0.0)

    def close(self, other: "NCSeries", tol: float) -> bool:
        return self.distance(other) <= tol

    def to_json(self) -> Dict[str, Any]:
        from app.services.serialization import encode_scalar

        return {
            "weight": self.weight,
            "terms": [
                {"word": list(w), "coeff": encode_scalar(c)}
                for w, c in sorted(self.terms.items(), key=lambda item: (len(item[0]), item[0]))
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "NCSeries":
        from app.services.serialization import decode_scalar

        try:
            return cls({tuple(t["word"]): decode_scalar(t["coeff"]) for t in data["terms"]}, int(data["weight"]))
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed noncommutative series: {e}") from e


def _image(images: Mapping[str, NCSeries], letter: str, weight: int) -> NCSeries:
    if letter in images:
        return images[letter].truncate(weight)
    return NCSeries.letter(letter, weight)


def bracket(a: NCSeries, b: NCSeries) -> NCSeries:
    return a * b - b * a


@lru_cache(maxsize=None)
def _shuffle(u: Word, v: Word) -> Tuple[Tuple[Word, int], ...]:
    if not u:
        return ((v, 1),)
    if not v:
        return ((u, 1),)
    out: Counter = Counter()
    for w, m in _shuffle(u[1:], v):
        out[(u[0],) + w] += m
    for w, m in _shuffle(u, v[1:]):
        out[(v[0],) + w] += m
    return tuple(sorted(out.items()))


def shuffle(u: Sequence[str], v: Sequence[str]) -> Dict[Word, int]:
    """Shuffle product of two words, as a multiset of words."""
    return dict(_shuffle(tuple(u), tuple(v)))


def bernoulli_expansion(weight: int) -> List[Fraction]:
    """Coefficients b_0..b_W of T/(e^T - 1), by inverting (e^T - 1)/T."""
    if weight < 0:
        raise ValueError("weight must be non-negative")
    b: List[Fraction] = []
    for n in range(weight + 1):
        if n == 0:
            b.append(Fraction(1))
            continue
        b.append(-sum(b[k] * Fraction(1, math.factorial(n - k + 1)) for k in range(n)))
    return b


def nc_ad_series(f: Mapping[Tuple[int, int], Any], T: str, A: str, weight: int) -> NCSeries:
    """
    Expand f(ad_T, ad_A)(A) into words. The monomial T^a A^b acts as
    ad_T^a ad_A^b, so ad_A is applied first.
    """
    t = NCSeries.letter(T, weight)
    a = NCSeries.letter(A, weight)
    out = NCSeries.zero(weight)
    for (p, q), coeff in sorted(f.items()):
        if coeff == 0 or p + q + 1 > weight:
            continue
        x = a
        for _ in range(q):
            x = bracket(a, x)
        for _ in range(p):
            x = bracket(t, x)
        out = out + x.scale(coeff)
    return out


def grouplike_defect(f: NCSeries, alphabet: Optional[Iterable[str]] = None) -> Tuple[float, Optional[Tuple[Word, Word]]]:
    """
    Largest violation of c(u)c(v) = sum over u ш v of c(w), over word pairs
    with |u| + |v| <= W. Zero exactly when f is grouplike up to W.
    """
    letters = sorted(set(alphabet or ()) | set(f.letters()))
    words_by_len: List[List[Word]] = [[()]]
    for k in range(1, f.weight):
        words_by_len.append([w + (x,) for w in words_by_len[-1] for x in letters])
    worst = 0.0
    worst_pair: Optional[Tuple[Word, Word]] = None
    for lu in range(1, f.weight):
        for lv in range(lu, f.weight - lu + 1):
            for u in words_by_len[lu]:
                cu = f.coefficient(u)
                for v in words_by_len[lv]:
                    if lu == lv and v < u:
                        continue
                    lhs = cu * f.coefficient(v)
                    rhs = sum(m * f.coefficient(w) for w, m in shuffle(u, v).items())
                    gap = abs(complex(lhs - rhs))
                    if gap > worst:
                        worst, worst_pair = gap, (u, v)
    return worst, worst_pair


def nc_grouplike_test(f: NCSeries, tol: float = 0.0, alphabet: Optional[Iterable[str]] = None) -> bool:
    c0 = f.constant_term()
    if abs(complex(c0) - 1) > tol:
        logger.info(f"not grouplike: constant term is {c0}, expected 1")
        return False
    defect, pair = grouplike_defect(f, alphabet)
    if defect > tol:
        logger.info(f"not grouplike: shuffle relation fails on {pair} by {defect:.3e}")
        return False
    return True
