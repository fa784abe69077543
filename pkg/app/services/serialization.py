# app/services/serialization.py

import csv
import io
import json
import math
from fractions import Fraction
from typing import Any, Iterable, List, Sequence

import mpmath

from app.models.errors import InputError


def encode_scalar(c: Any) -> Any:
    """Rationals as "num/den" strings, complex numbers as [re, im]."""
    if isinstance(c, bool):
        return c
    if isinstance(c, (int, Fraction)):
        c = Fraction(c)
        return f"{c.numerator}/{c.denominator}"
    if isinstance(c, (float, complex)):
        c = complex(c)
        return [_clean(c.real), _clean(c.imag)]
    if isinstance(c, (mpmath.mpf, mpmath.mpc)):
        return mpmath.nstr(c, 20)
    raise TypeError(f"cannot encode {type(c).__name__}")


def _clean(x: float) -> float:
    # "-0.0" would make otherwise equal outputs differ byte-wise
    return 0.0 if x == 0 else x


def decode_scalar(v: Any) -> Any:
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError) as e:
            raise InputError(f"not a rational value: {v!r}") from e
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, int) and not isinstance(v, bool):
        return Fraction(v)
    raise InputError(f"cannot decode value {v!r}")


def encode_value(v: Any) -> Any:
    from app.services.moebius import ProjectivePoint
    from app.services.ncseries import NCSeries
    from app.services.rings import TruncatedSeries

    if isinstance(v, TruncatedSeries):
        if v.is_constant():
            return encode_scalar(v.constant_term())
        return v.to_json()
    if isinstance(v, NCSeries):
        return v.to_json()
    if isinstance(v, ProjectivePoint):
        p = v.normalized()
        if p.is_infinite():
            return "inf"
        return encode_value(p.u)
    if isinstance(v, complex) and (math.isinf(v.real) or math.isinf(v.imag)):
        return "inf"
    return encode_scalar(v)


def parse_point(value: Any, ring) -> Any:
    from app.services.moebius import ProjectivePoint

    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return ProjectivePoint.infinity(ring)
    return ProjectivePoint.finite(value, ring)


def dump_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dump_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([json.dumps(x, sort_keys=True) if not isinstance(x, (str, int, float)) else x for x in row])
    return buf.getvalue()


def matrix_rows(matrix: List[List[Any]]) -> List[List[Any]]:
    return [[i + 1, j + 1, entry] for i, row in enumerate(matrix) for j, entry in enumerate(row)]
