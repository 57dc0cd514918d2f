from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class BlockPartition:
    """``W`` contiguous coordinate blocks covering ``[0, d)``.

    Worker ``i`` owns ``blocks[i]``; the remainder of ``d / W`` goes to the
    earliest blocks, so sizes differ by at most one.
    """

    d: int
    W: int
    blocks: tuple

    @property
    def bounds(self):
        return np.array([b.start for b in self.blocks] + [self.d], dtype=np.int64)

    @property
    def sizes(self):
        return np.diff(self.bounds)

    def owner(self, i):
        return int(np.searchsorted(self.bounds, i, side="right") - 1)


def partition_blocks(d, W) -> BlockPartition:
    d, W = int(d), int(W)
    if W < 1:
        raise ConfigurationError("need at least one worker")
    if W > d:
        raise ConfigurationError(f"W={W} workers cannot share d={d} coordinates")
    base, extra = divmod(d, W)
    blocks, start = [], 0
    for i in range(W):
        stop = start + base + (1 if i < extra else 0)
        blocks.append(slice(start, stop))
        start = stop
    return BlockPartition(d=d, W=W, blocks=tuple(blocks))
