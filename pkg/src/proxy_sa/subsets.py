"""Helpers for 1-based index subsets such as ``(1, 3)``.

Subsets are plain tuples of strictly increasing integers. They are written
``1:3`` in reports and ``"1,3;2,3"`` on the command line.
"""

from __future__ import annotations

from itertools import combinations
from math import comb
from typing import Iterable, Sequence

from .errors import ValidationError

Subset = tuple


def normalize(u, d: int | None = None, *, allow_empty: bool = False) -> Subset:
    """Return ``u`` as a sorted tuple of ints, checking range and duplicates."""
    if isinstance(u, (int,)) and not isinstance(u, bool):
        u = (u,)
    try:
        items = [int(k) for k in u]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"not an index subset: {u!r}") from exc
    if len(set(items)) != len(items):
        raise ValidationError(f"index subset has duplicates: {u!r}")
    if not items and not allow_empty:
        raise ValidationError("index subset must be non-empty")
    out = tuple(sorted(items))
    if out and out[0] < 1:
        raise ValidationError(f"indices are 1-based, got {u!r}")
    if d is not None and out and out[-1] > d:
        raise ValidationError(f"index {out[-1]} exceeds the input dimension {d}")
    return out


def render(u: Sequence[int]) -> str:
    """``(1, 3)`` -> ``"1:3"``."""
    return ":".join(str(k) for k in u)


def parse(text: str) -> Subset:
    """``"1:3"`` or ``"1,3"`` -> ``(1, 3)``."""
    parts = text.replace(",", ":").split(":")
    return normalize([p.strip() for p in parts if p.strip()])


def parse_list(text: str) -> list:
    """``"1,3;2,3"`` -> ``[(1, 3), (2, 3)]``."""
    return [parse(chunk) for chunk in text.split(";") if chunk.strip()]


def nonempty_subsets(u: Iterable[int]) -> list:
    """All non-empty subsets of ``u``, by size then lexicographically."""
    u = tuple(u)
    return [c for k in range(1, len(u) + 1) for c in combinations(u, k)]


def up_to_order(d: int, order: int) -> list:
    """Subsets of ``{1..d}`` of size ``1..order``, singletons first."""
    return nonempty_subsets(range(1, d + 1))[: sum(comb(d, k) for k in range(1, order + 1))]


def sort_key(u: Sequence[int]):
    return (len(u), tuple(u))

