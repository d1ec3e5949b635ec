"""Exact value domain shared by guards, tokens, logs, and bindings.

Values are plain Python objects: ``bool``, ``int``, exact ``Fraction`` for
rationals, ``str`` for both character strings and object identifiers (the
surrounding type context disambiguates), :class:`FinElem` for elements of
declared finite enumerations, and tuples for object lists.  No floats anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

BOOL = "bool"
INT = "int"
RAT = "rat"
STRING = "string"

BUILTIN_VALUE_TYPES = (BOOL, INT, RAT, STRING)


@dataclass(frozen=True)
class FinElem:
    """Element of a declared finite-set type."""

    domain: str
    element: str


@dataclass(frozen=True)
class ListT:
    """List type over a base type name (object-id lists in nets)."""

    elem: str

    def __str__(self) -> str:
        return f"[{self.elem}]"


Value = Union[bool, int, Fraction, str, FinElem, tuple]
TypeName = Union[str, ListT]


class ValueError_(ValueError):
    """Malformed or type-incorrect value in a document."""


def is_numeric(v: Value) -> bool:
    return (isinstance(v, int) and not isinstance(v, bool)) or isinstance(v, Fraction)


def values_equal(a: Value, b: Value) -> bool:
    """Type-aware equality: int/rat compare numerically, bool is not 1."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if is_numeric(a) and is_numeric(b):
        return Fraction(a) == Fraction(b)
    if type(a) is not type(b):
        return False
    return a == b


def sort_key(v: Value):
    """Deterministic ordering key across heterogeneous values."""
    if isinstance(v, bool):
        return (0, v)
    if isinstance(v, int):
        return (1, Fraction(v), 0)
    if isinstance(v, Fraction):
        return (1, v, 1)
    if isinstance(v, str):
        return (2, v)
    if isinstance(v, FinElem):
        return (3, v.domain, v.element)
    if isinstance(v, tuple):
        return (4, tuple(sort_key(x) for x in v))
    raise ValueError_(f"not a value: {v!r}")


def value_to_json(v: Value):
    """Canonical JSON form; inverse of the untyped decoder for data values."""
    if isinstance(v, bool) or isinstance(v, str):
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction):
        return {"rat": [v.numerator, v.denominator]}
    if isinstance(v, FinElem):
        return {"fin": [v.domain, v.element]}
    if isinstance(v, tuple):
        return [value_to_json(x) for x in v]
    raise ValueError_(f"not a serializable value: {v!r}")


def value_from_json(doc, path: str = "value") -> Value:
    """Decode a self-describing data value (log attribute maps)."""
    if isinstance(doc, bool) or isinstance(doc, str):
        return doc
    if isinstance(doc, int):
        return doc
    if isinstance(doc, dict):
        if set(doc) == {"rat"}:
            num, den = _rat_parts(doc["rat"], path)
            return Fraction(num, den)
        if set(doc) == {"fin"}:
            fin = doc["fin"]
            if not (isinstance(fin, list) and len(fin) == 2 and all(isinstance(x, str) for x in fin)):
                raise ValueError_(f"{path}: 'fin' wants [domain, element]")
            return FinElem(fin[0], fin[1])
        raise ValueError_(f"{path}: unknown value object {sorted(doc)}")
    raise ValueError_(f"{path}: unsupported value {doc!r}")


def _rat_parts(raw, path: str):
    if not (
        isinstance(raw, list)
        and len(raw) == 2
        and all(isinstance(x, int) and not isinstance(x, bool) for x in raw)
    ):
        raise ValueError_(f"{path}: 'rat' wants [numerator, denominator]")
    if raw[1] == 0:
        raise ValueError_(f"{path}: zero denominator")
    return raw[0], raw[1]


def typed_value_from_json(doc, expected: str, registry, path: str = "value") -> Value:
    """Decode a value in a typed position (tokens, bindings, tables).

    ``expected`` is a base type name; ``registry`` answers type-category
    queries (see model.TypeRegistry).
    """
    if registry.is_object_type(expected):
        if isinstance(doc, str):
            return doc
        raise ValueError_(f"{path}: object id of type {expected} must be a string")
    if expected == BOOL:
        if isinstance(doc, bool):
            return doc
        raise ValueError_(f"{path}: expected bool")
    if expected == INT:
        if isinstance(doc, int) and not isinstance(doc, bool):
            return doc
        raise ValueError_(f"{path}: expected int")
    if expected == RAT:
        if isinstance(doc, int) and not isinstance(doc, bool):
            return Fraction(doc)
        if isinstance(doc, dict) and set(doc) == {"rat"}:
            num, den = _rat_parts(doc["rat"], path)
            return Fraction(num, den)
        raise ValueError_(f"{path}: expected rational")
    if expected == STRING:
        if isinstance(doc, str):
            return doc
        raise ValueError_(f"{path}: expected string")
    if registry.is_finset_type(expected):
        if isinstance(doc, str):
            elem = doc
        elif isinstance(doc, dict) and set(doc) == {"fin"}:
            v = value_from_json(doc, path)
            assert isinstance(v, FinElem)
            if v.domain != expected:
                raise ValueError_(f"{path}: finset domain {v.domain} != {expected}")
            elem = v.element
        else:
            raise ValueError_(f"{path}: expected element of {expected}")
        if elem not in registry.finset_domains[expected]:
            raise ValueError_(f"{path}: {elem!r} not in domain of {expected}")
        return FinElem(expected, elem)
    raise ValueError_(f"{path}: unknown type {expected}")


def typed_value_to_json(v: Value):
    """Positional (typed-context) JSON form: finset elements as bare strings."""
    if isinstance(v, FinElem):
        return v.element
    return value_to_json(v)


def type_of_value(v: Value, registry) -> str:
    """Base type name of a data value (object ids are not self-describing)."""
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, Fraction):
        return RAT
    if isinstance(v, str):
        return STRING
    if isinstance(v, FinElem):
        return v.domain
    raise ValueError_(f"no base type for {v!r}")
