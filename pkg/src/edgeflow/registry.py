"""Named built-in element functions and predicates.

Dataflow nodes refer to functions by id so that a graph spec is plain
text that every replica can rebuild identically. An id is either a bare
name (``"negate"``) or ``name:argument`` (``"scale:10"``, ``"gt:8.0"``).
Every function is total: inputs outside its natural domain pass through
unchanged (transforms) or yield ``False`` (predicates).
"""

from __future__ import annotations

import math
from typing import Any, Callable

from edgeflow.elements import check_element, element_key, is_number


class UnknownFunctionError(LookupError):
    pass


def parse_arg(text: str) -> Any:
    """Parse a literal argument: int, then float, else the raw string."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _numeric(arg: Any) -> float | int:
    if not is_number(arg):
        raise ValueError(f"expected a numeric argument, got {arg!r}")
    return arg


def _scale(k):
    k = _numeric(k)
    return lambda e: e * k if is_number(e) else e


def _offset(k):
    k = _numeric(k)
    return lambda e: e + k if is_number(e) else e


def _pair_with(tag):
    return lambda e: (tag, e)


def _string_tag(tag):
    return lambda e: f"{tag}:{e}" if type(e) is str else e


def _pick(index):
    return lambda e: e[index] if type(e) is tuple else e


TRANSFORMS: dict[str, Callable[..., Callable]] = {
    "identity": lambda: (lambda e: e),
    "negate": lambda: (lambda e: -e if is_number(e) else e),
    "scale": _scale,
    "offset": _offset,
    "pair_with": _pair_with,
    "tag": _string_tag,
    "first": lambda: _pick(0),
    "second": lambda: _pick(1),
}


def _compare(op):
    def factory(k):
        k = _numeric(k)
        return lambda e: is_number(e) and not math.isnan(e) and op(e, k)
    return factory


def _second_compare(op):
    inner = _compare(op)

    def factory(k):
        test = inner(k)
        return lambda e: type(e) is tuple and test(e[1])
    return factory


def _equals(literal):
    key = element_key(literal)
    return lambda e: element_key(e) == key


PREDICATES: dict[str, Callable[..., Callable]] = {
    "always": lambda: (lambda e: True),
    "never": lambda: (lambda e: False),
    "gt": _compare(lambda a, b: a > b),
    "ge": _compare(lambda a, b: a >= b),
    "lt": _compare(lambda a, b: a < b),
    "le": _compare(lambda a, b: a <= b),
    "eq": _equals,
    "is_str": lambda: (lambda e: type(e) is str),
    "is_number": lambda: is_number,
    "second_gt": _second_compare(lambda a, b: a > b),
    "second_lt": _second_compare(lambda a, b: a < b),
}


def _resolve(table: dict, fn_id: str, what: str) -> Callable:
    name, sep, raw = fn_id.partition(":")
    factory = table.get(name)
    if factory is None:
        raise UnknownFunctionError(f"unknown {what} {fn_id!r}")
    try:
        return factory(parse_arg(raw)) if sep else factory()
    except TypeError:
        raise UnknownFunctionError(f"{what} {fn_id!r} has the wrong number of arguments") from None


def transform(fn_id: str) -> Callable:
    fn = _resolve(TRANSFORMS, fn_id, "transform")

    def checked(e):
        return check_element(fn(e))
    return checked


def predicate(pred_id: str) -> Callable:
    fn = _resolve(PREDICATES, pred_id, "predicate")
    return lambda e: bool(fn(e))
