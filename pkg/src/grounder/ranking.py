"""Ranked-list carrier shared by every retrieval and ranking surface."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Generic, Iterator, TypeVar

T = TypeVar("T")


@dataclass(frozen=True)
class RankedList(Generic[T]):
    """Items with scores, descending; ties broken by ascending insertion position."""

    items: tuple[tuple[T, float], ...]

    def __post_init__(self) -> None:
        for _, score in self.items:
            if not math.isfinite(score):
                raise ValueError("ranked scores must be finite")
        for (_, a), (_, b) in zip(self.items, self.items[1:]):
            if b > a:
                raise ValueError("ranked list must be sorted by descending score")

    @classmethod
    def from_scored(cls, scored: list[tuple[T, float]], k: int) -> "RankedList[T]":
        """Top-k of (item, score) pairs; insertion position breaks ties."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        order = sorted(range(len(scored)), key=lambda i: (-scored[i][1], i))
        return cls(items=tuple(scored[i] for i in order[:k]))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[T, float]]:
        return iter(self.items)

    def ids(self) -> list[T]:
        return [item for item, _ in self.items]

    def rank_of(self, target: T) -> int | None:
        """1-based rank of ``target``, or None if absent."""
        for pos, (item, _) in enumerate(self.items, start=1):
            if item == target:
                return pos
        return None
