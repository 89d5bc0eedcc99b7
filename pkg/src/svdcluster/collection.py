"""Named blocks and ordered collections of blocks sharing a row dimension."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .linalg import as_matrix, frobenius_sq


@dataclass(frozen=True, eq=False)
class Block:
    """One matrix ``A_i`` with its Frobenius energy cached."""

    block_id: str
    data: np.ndarray
    energy_sq: float = field(init=False)

    def __post_init__(self):
        if not isinstance(self.block_id, str) or not self.block_id:
            raise ValueError("block id must be a non-empty string")
        data = as_matrix(self.data, copy=True)
        if data.shape[1] < 1:
            raise ValueError(f"block {self.block_id!r} has no columns")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "energy_sq", frobenius_sq(data))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.energy_sq))

    def __eq__(self, other):
        if not isinstance(other, Block):
            return NotImplemented
        return (
            self.block_id == other.block_id
            and self.data.shape == other.data.shape
            and self.data.tobytes(order="F") == other.data.tobytes(order="F")
        )

    def __hash__(self):
        return hash((self.block_id, self.data.shape))

    def __repr__(self):
        return f"Block({self.block_id!r}, {self.rows}x{self.cols}, energy={self.energy_sq:.6g})"


class Collection(Sequence[Block]):
    """Ordered blocks with unique ids and a common row count ``m``."""

    def __init__(self, blocks: Iterable[Block], m: int | None = None):
        self._blocks = tuple(blocks)
        if m is None:
            if not self._blocks:
                raise ValueError("cannot infer row count of an empty collection")
            m = self._blocks[0].rows
        if m < 1:
            raise ValueError("row count must be positive")
        self.m = int(m)
        self._index: dict[str, int] = {}
        for i, b in enumerate(self._blocks):
            if b.rows != self.m:
                raise ValueError(f"block {b.block_id!r} has {b.rows} rows, expected {self.m}")
            if b.block_id in self._index:
                raise ValueError(f"duplicate block id {b.block_id!r}")
            self._index[b.block_id] = i

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray], ids: Sequence[str] | None = None) -> "Collection":
        if ids is None:
            ids = default_ids(len(arrays))
        return cls(Block(i, a) for i, a in zip(ids, arrays, strict=True))

    def __len__(self) -> int:
        return len(self._blocks)

    def __getitem__(self, i):
        return self._blocks[i]

    def __iter__(self) -> Iterator[Block]:
        return iter(self._blocks)

    def __contains__(self, block_id) -> bool:
        return block_id in self._index

    def __eq__(self, other):
        if not isinstance(other, Collection):
            return NotImplemented
        return self.m == other.m and self._blocks == other._blocks

    def __repr__(self):
        return f"Collection(m={self.m}, blocks={len(self)})"

    def get(self, block_id: str) -> Block:
        try:
            return self._blocks[self._index[block_id]]
        except KeyError:
            raise KeyError(f"unknown block id {block_id!r}") from None

    def position(self, block_id: str) -> int:
        return self._index[block_id]

    @property
    def ids(self) -> list[str]:
        return [b.block_id for b in self._blocks]

    @property
    def total_energy_sq(self) -> float:
        return float(sum(b.energy_sq for b in self._blocks))

    @property
    def total_params(self) -> int:
        return sum(self.m * b.cols for b in self._blocks)

    def subset(self, block_ids: Iterable[str]) -> "Collection":
        return Collection((self.get(i) for i in block_ids), m=self.m)

    def concat(self, block_ids: Iterable[str]) -> np.ndarray:
        """Horizontal concatenation ``[A_i1, A_i2, ...]`` in the given order."""
        parts = [self.get(i).data for i in block_ids]
        if not parts:
            return np.zeros((self.m, 0), order="F")
        return np.asfortranarray(np.hstack(parts))


def default_ids(n: int) -> list[str]:
    width = max(4, len(str(max(n - 1, 0))))
    return [f"b{i:0{width}d}" for i in range(n)]
