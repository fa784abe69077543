# app/services/mzv.py

import logging
import math
from typing import List, Sequence, Tuple

import mpmath

from app.models.errors import InputError, KZError

logger = logging.getLogger(__name__)

# Letters of the iterated-integral word: 0 is dt/t, 1 is dt/(1 - t).
BinaryWord = Tuple[int, ...]


def _check_indices(indices: Sequence[int]) -> List[int]:
    s = [int(k) for k in indices]
    if not s:
        raise InputError("at least one index is required")
    if any(k < 1 for k in s):
        raise InputError(f"indices must be positive integers: {s}")
    if s[0] < 2:
        raise KZError(f"divergent: zeta{tuple(s)} needs a first index >= 2")
    return s


def word_of_indices(indices: Sequence[int]) -> BinaryWord:
    """zeta(s1, ..., sk) as the word 0^{s1-1} 1 ... 0^{sk-1} 1, read from 1 down to 0."""
    out: List[int] = []
    for s in indices:
        out += [0] * (s - 1) + [1]
    return tuple(out)


def _blocks(word: BinaryWord) -> List[int]:
    """Split a word ending in 1 into polylogarithm indices m1..mr."""
    out, zeros = [], 0
    for letter in word:
        if letter == 0:
            zeros += 1
        else:
            out.append(zeros + 1)
            zeros = 0
    if zeros:
        raise KZError("word must end with the letter 1")
    return out


def _polylog_half(indices: Sequence[int], terms: int) -> mpmath.mpf:
    """Li_{m1..mr}(1/2) = sum over n1 > ... > nr >= 1 of 2^-n1 / (n1^m1 ... nr^mr)."""
    if not indices:
        return mpmath.mpf(1)
    n = range(1, terms + 1)
    level = [mpmath.mpf(1) / mpmath.mpf(k) ** indices[-1] for k in n]
    for m in reversed(indices[:-1]):
        running, nxt = mpmath.mpf(0), []
        for k, c in zip(n, level):
            nxt.append(running / mpmath.mpf(k) ** m)
            running += c
        level = nxt
    half = mpmath.mpf(1) / 2
    return mpmath.fsum(c * half ** k for k, c in zip(n, level))


def mzv(indices: Sequence[int], dps: int = 30) -> mpmath.mpf:
    """
    Multiple zeta value by splitting its iterated integral at 1/2: the piece
    above 1/2 is reflected t -> 1 - t, so both factors are polylogarithms at
    1/2 and converge like 2^-n.
    """
    s = _check_indices(indices)
    word = word_of_indices(s)
    n = len(word)
    with mpmath.workdps(dps + 10):
        terms = int(math.ceil((dps + 10) * math.log2(10))) + n + 8
        total = mpmath.mpf(0)
        for j in range(n + 1):
            left = tuple(1 - e for e in reversed(word[:j]))
            right = word[j:]
            total += _polylog_half(_blocks(left), terms) * _polylog_half(_blocks(right), terms)
        value = +total
    logger.debug(f"zeta{tuple(s)} = {mpmath.nstr(value, 15)} at {dps} digits")
    return value


def mzv_direct(indices: Sequence[int], dps: int = 30) -> mpmath.mpf:
    """Independent depth <= 2 evaluation by accelerated summation."""
    s = _check_indices(indices)
    with mpmath.workdps(dps + 10):
        if len(s) == 1:
            value = mpmath.nsum(lambda k: 1 / k ** s[0], [1, mpmath.inf])
        elif len(s) == 2:
            a, b = s
            # inner sum over n > m is the Hurwitz zeta at m + 1
            value = mpmath.nsum(lambda m: mpmath.zeta(a, m + 1) / m ** b, [1, mpmath.inf])
        else:
            raise InputError("direct summation covers depth 1 and 2 only")
        return +value


def stuffle_residual(a: int, b: int, dps: int = 30) -> mpmath.mpf:
    """|zeta(a) zeta(b) - zeta(a, b) - zeta(b, a) - zeta(a + b)|."""
    lhs = mzv([a], dps) * mzv([b], dps)
    rhs = mzv([a, b], dps) + mzv([b, a], dps) + mzv([a + b], dps)
    return abs(lhs - rhs)


def parse_indices(text: str) -> List[int]:
    try:
        return [int(k) for k in text.split(",") if k.strip()]
    except ValueError as e:
        raise InputError(f"indices must be comma-separated integers: {text!r}") from e
