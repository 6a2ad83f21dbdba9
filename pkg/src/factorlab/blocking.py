"""Partition of the time axis into contiguous blocks with leave-out sets.

Blockwise estimators split the sample ``{0, ..., T-1}`` into consecutive
blocks of (at most) ``block_size`` observations.  For each block the
covariance is formed from the *leave-out* set: every time index that does
not belong to the block itself or to either adjacent block.  This module
builds those index sets once so that all consumers share one partition
object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlockingInfeasible, InvalidInput

__all__ = ["BlockPartition", "make_partition", "default_block_size", "block_of"]

#: Minimum number of blocks for a usable partition.  With fewer than four
#: blocks some leave-out set could be empty or degenerate.
MIN_BLOCKS = 4


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous partition of ``{0, ..., n_obs - 1}`` into blocks.

    Attributes
    ----------
    n_obs : int
        Number of time observations ``T``.
    block_size : int
        Nominal block length; the final block may be shorter.
    n_blocks : int
        Number of blocks, ``ceil(n_obs / block_size)``.
    blocks : tuple of ndarray
        ``blocks[l]`` holds the sorted time indices of block ``l``.
    leave_out : tuple of ndarray
        ``leave_out[l]`` holds the sorted time indices outside block ``l``
        and its adjacent blocks.
    """

    n_obs: int
    block_size: int
    n_blocks: int
    blocks: tuple[np.ndarray, ...]
    leave_out: tuple[np.ndarray, ...]


def make_partition(
    n_obs: int,
    block_size: int | None = None,
    n_blocks: int | None = None,
) -> BlockPartition:
    """Build the blockwise partition of ``{0, ..., n_obs - 1}``.

    Exactly one of ``block_size`` and ``n_blocks`` must be given.  When
    ``n_blocks`` is given the block size is derived as
    ``ceil(n_obs / n_blocks)``; the realised number of blocks is recomputed
    from that size and may be smaller than requested.

    Parameters
    ----------
    n_obs : int
        Number of time observations ``T``.
    block_size : int, optional
        Block length ``b``; must satisfy ``1 <= b <= n_obs``.
    n_blocks : int, optional
        Requested number of blocks, used only to derive ``block_size``.

    Returns
    -------
    BlockPartition

    Raises
    ------
    InvalidInput
        If neither or both of ``block_size`` / ``n_blocks`` are given, or
        the given value is out of range.
    BlockingInfeasible
        If the resulting number of blocks is below four.  Callers may fall
        back to full-sample estimation but must surface a warning.
    """
    if (block_size is None) == (n_blocks is None):
        raise InvalidInput("give exactly one of block_size or n_blocks")
    n_obs = int(n_obs)
    if n_obs < 1:
        raise InvalidInput(f"n_obs must be positive, got {n_obs}")
    if block_size is None:
        requested = int(n_blocks)  # type: ignore[arg-type]
        if requested < 1:
            raise InvalidInput(f"n_blocks must be positive, got {requested}")
        block_size = math.ceil(n_obs / requested)
    block_size = int(block_size)
    if not 1 <= block_size <= n_obs:
        raise InvalidInput(
            f"block_size must lie in [1, {n_obs}], got {block_size}"
        )
    count = math.ceil(n_obs / block_size)
    if count < MIN_BLOCKS:
        raise BlockingInfeasible(
            f"partition of {n_obs} observations into blocks of {block_size} "
            f"gives {count} blocks; at least {MIN_BLOCKS} are required"
        )

    blocks: list[np.ndarray] = []
    leave_out: list[np.ndarray] = []
    for ell in range(count):
        start = ell * block_size
        stop = min(start + block_size, n_obs)
        blk = np.arange(start, stop)
        blk.setflags(write=False)
        blocks.append(blk)
        # drop the block and both neighbours (absent ones clamp away)
        lo = max(0, (ell - 1) * block_size)
        hi = min(n_obs, (ell + 2) * block_size)
        kept = np.concatenate([np.arange(0, lo), np.arange(hi, n_obs)])
        if kept.size == 0:
            raise BlockingInfeasible(
                f"leave-out set of block {ell} is empty for n_obs={n_obs}, "
                f"block_size={block_size}"
            )
        kept.setflags(write=False)
        leave_out.append(kept)

    return BlockPartition(
        n_obs=n_obs,
        block_size=block_size,
        n_blocks=count,
        blocks=tuple(blocks),
        leave_out=tuple(leave_out),
    )


def default_block_size(n_obs: int, log_base: float | None = None) -> int:
    """Default block length ``floor(log(T) ** 2)``, clamped to ``[1, T]``.

    Parameters
    ----------
    n_obs : int
        Number of time observations ``T``; must be at least 2.
    log_base : float, optional
        Base of the logarithm.  Defaults to the natural logarithm.

    Returns
    -------
    int
    """
    n_obs = int(n_obs)
    if n_obs < 2:
        raise InvalidInput(f"n_obs must be at least 2, got {n_obs}")
    log_t = math.log(n_obs) if log_base is None else math.log(n_obs, log_base)
    size = math.floor(log_t**2)
    return max(1, min(size, n_obs))


def block_of(partition: BlockPartition, t: int) -> int:
    """Index of the block containing time index ``t``.

    Parameters
    ----------
    partition : BlockPartition
    t : int
        Time index in ``[0, partition.n_obs)``.

    Returns
    -------
    int
        Block index ``l`` with ``t in partition.blocks[l]``.
    """
    t = int(t)
    if not 0 <= t < partition.n_obs:
        raise InvalidInput(
            f"time index {t} outside [0, {partition.n_obs})"
        )
    return t // partition.block_size
