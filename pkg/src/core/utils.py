from __future__ import annotations

import ast
import math
import operator
from typing import Any, Callable

import numpy as np

_CONSTANTS = {"pi": math.pi, "e": math.e, "inf": math.inf}

_BINARY: dict[type, Callable[[Any, Any], Any]] = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _eval_node(node: ast.AST) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _CONSTANTS:
        return _CONSTANTS[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        value = _eval_node(node.operand)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        return float(_BINARY[type(node.op)](_eval_node(node.left), _eval_node(node.right)))
    raise ValueError(f"Unsupported expression element: {ast.dump(node)}")


def parse_number(value: str | float | int) -> float:
    """Parse a float, also accepting arithmetic on `pi`, `e` and `inf` (e.g. ``4*pi/3``)."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if not text:
        raise ValueError("Numeric value is required")
    try:
        return float(text)
    except ValueError:
        pass
    try:
        tree = ast.parse(text, mode="eval")
        return _eval_node(tree.body)
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"Invalid numeric value: {value}") from exc


def parse_value_list(spec: str) -> list[float]:
    """Explicit comma list (``0.1,0.2``) or an inclusive ``start:stop:count`` grid."""
    text = spec.strip()
    if not text:
        raise ValueError("Value list is empty")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"Grid must be start:stop:count, got {spec}")
        start, stop = parse_number(parts[0]), parse_number(parts[1])
        count = int(parts[2])
        if count < 1:
            raise ValueError(f"Grid count must be positive, got {count}")
        values = np.linspace(start, stop, count).tolist()
    else:
        values = [parse_number(item) for item in text.split(",") if item.strip()]
    if not values:
        raise ValueError("Value list is empty")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"Value list must be finite: {spec}")
    return values


def parse_key_value(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ValueError(f"Expected key=value, got {item!r}")
    key, value = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ValueError(f"Empty key in {item!r}")
    return key, value.strip()


def format_number(value: float, digits: int = 12) -> str:
    """Shortest round-trip representation of ``value`` rounded to ``digits`` significant digits."""
    if value is None:
        return ""
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(f"{x:.{digits}g}"))
