"""The element universe stored in sets and registers.

Elements are plain Python values: ``int``, ``float``, ``str`` or a
2-tuple of elements. Python's own equality conflates ``1`` with ``1.0``
and ``0.0`` with ``-0.0`` and never equates NaN with itself, so every
comparison that matters for convergence goes through :func:`element_key`
instead, which is exact (floats are compared by their bit pattern).
"""

from __future__ import annotations

import math
import struct
from typing import Any, Union

Element = Union[int, float, str, tuple]


def check_element(value: Any) -> Any:
    """Return ``value`` unchanged if it is a valid element, else raise TypeError."""
    kind = type(value)
    if kind is int or kind is float or kind is str:
        return value
    if kind is tuple and len(value) == 2:
        check_element(value[0])
        check_element(value[1])
        return value
    raise TypeError(f"not a valid element: {value!r}")


def _float_bits(value: float) -> int:
    return struct.unpack(">q", struct.pack(">d", value))[0]


def element_key(value: Any) -> tuple:
    """Exact, totally ordered key for an element."""
    kind = type(value)
    if kind is int:
        return (0, value)
    if kind is float:
        if math.isnan(value):
            return (1, 1, 0.0, _float_bits(value))
        return (1, 0, value, _float_bits(value))
    if kind is str:
        return (2, value)
    if kind is tuple and len(value) == 2:
        return (3, element_key(value[0]), element_key(value[1]))
    raise TypeError(f"not a valid element: {value!r}")


def element_to_data(value: Any) -> list:
    """Tagged, bit-stable encoding of an element."""
    kind = type(value)
    if kind is int:
        return ["i", value]
    if kind is float:
        return ["f", value.hex()]
    if kind is str:
        return ["s", value]
    if kind is tuple and len(value) == 2:
        return ["p", element_to_data(value[0]), element_to_data(value[1])]
    raise TypeError(f"not a valid element: {value!r}")


def element_from_data(data: list) -> Any:
    tag = data[0]
    if tag == "i":
        return int(data[1])
    if tag == "f":
        return float.fromhex(data[1])
    if tag == "s":
        return str(data[1])
    if tag == "p":
        return (element_from_data(data[1]), element_from_data(data[2]))
    raise ValueError(f"unknown element tag {tag!r}")


def element_to_json(value: Any) -> Any:
    """Human-oriented JSON form used in reports (pairs become lists)."""
    if type(value) is tuple:
        return [element_to_json(value[0]), element_to_json(value[1])]
    if type(value) is float and not math.isfinite(value):
        return repr(value)
    return value


def is_number(value: Any) -> bool:
    return type(value) is int or type(value) is float
