"""Set partitions of ``{0, ..., d-1}``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["Partition"]


@dataclass(frozen=True)
class Partition:
    """A partition of ``d`` variable indices into disjoint non-empty blocks.

    Blocks are stored in canonical form (each block sorted, blocks ordered by
    their smallest member), so equality is set-of-blocks equality.
    """

    d: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(i) for i in b)) for b in self.blocks), key=lambda b: b[0] if b else -1))
        seen: list[int] = []
        for b in blocks:
            if not b:
                raise InvalidArgumentError("partition blocks must be non-empty")
            seen.extend(b)
        if sorted(seen) != list(range(self.d)):
            raise InvalidArgumentError(f"blocks {blocks} do not partition range({self.d})")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "d", int(self.d))

    @classmethod
    def singletons(cls, d: int) -> "Partition":
        return cls(d, tuple((i,) for i in range(d)))

    @classmethod
    def one_block(cls, d: int) -> "Partition":
        return cls(d, (tuple(range(d)),))

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(len(labels), tuple(tuple(g) for g in groups.values()))

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def labels(self) -> np.ndarray:
        """Block number of every variable (blocks numbered in canonical order)."""
        out = np.empty(self.d, dtype=int)
        for k, b in enumerate(self.blocks):
            out[list(b)] = k
        return out

    def merge(self, a: Iterable[int], b: Iterable[int]) -> "Partition":
        a, b = tuple(sorted(a)), tuple(sorted(b))
        if a not in self.blocks or b not in self.blocks or a == b:
            raise InvalidArgumentError(f"{a} and {b} are not two distinct blocks of the partition")
        rest = tuple(x for x in self.blocks if x != a and x != b)
        return Partition(self.d, rest + (tuple(sorted(a + b)),))

    def co_membership(self) -> np.ndarray:
        """Binary ``d x d`` adjacency matrix (1 where two variables share a block)."""
        lab = self.labels()
        return (lab[:, None] == lab[None, :]).astype(float)

    def __str__(self) -> str:
        return " | ".join(",".join(str(i) for i in b) for b in self.blocks)
