"""Deterministic random-stream derivation.

Every Monte Carlo routine derives its generators from a 64-bit master seed
plus a textual operation tag, so that results are reproducible bit-for-bit
for a fixed seed regardless of how the work is split across workers.
Replica fan-out happens in fixed-size blocks: block ``j`` of an operation
always consumes the stream derived from ``(seed, tag, j)``, and block
results are reduced in index order.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

#: Number of replicas served by one derived stream.  Fixed so that results
#: do not depend on the worker count.
BLOCK = 4096


def tag_bits(tag: str) -> int:
    """Stable 32-bit digest of an operation tag."""
    return zlib.crc32(tag.encode("utf-8"))


def substream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Generator for ``(seed, tag, *indices)``; independent across keys."""
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF, tag_bits(tag)) + tuple(
        int(i) & 0xFFFFFFFFFFFFFFFF for i in indices
    )
    return np.random.default_rng(np.random.SeedSequence(entropy))


def kernel_seeds(seed: int, tag: str, n: int, *indices: int) -> np.ndarray:
    """``n`` uint32 seeds for jitted kernels that carry their own RNG state."""
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF, tag_bits(tag), 0x6B65726E) + tuple(
        int(i) & 0xFFFFFFFFFFFFFFFF for i in indices
    )
    return np.random.SeedSequence(entropy).generate_state(n, dtype=np.uint32)


def replica_seeds(seed: int, tag: str, n: int) -> np.ndarray:
    """``n`` uint64 seeds for per-replica sample builds."""
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF, tag_bits(tag), 0x7265706C)
    state = np.random.SeedSequence(entropy).generate_state(2 * n, dtype=np.uint32)
    return (state[:n].astype(np.uint64) << np.uint64(32)) | state[n:].astype(np.uint64)


def blocks(n: int) -> list[tuple[int, int]]:
    """Split ``n`` replicas into ``(start, size)`` blocks of fixed size."""
    return [(s, min(BLOCK, n - s)) for s in range(0, n, BLOCK)]


def map_blocks(fn, n: int, seed: int, tag: str, workers: int = 1):
    """Run ``fn(rng, start, size)`` over every block and return results in
    block order.

    ``fn`` receives the block's derived generator plus the replica range it
    covers.  With ``workers > 1`` blocks run on a thread pool; the returned
    list is ordered by block index either way, so any reduction over it is
    independent of the worker count.
    """
    work = blocks(n)
    if workers <= 1 or len(work) <= 1:
        return [fn(substream(seed, tag, j), s, c) for j, (s, c) in enumerate(work)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [
            pool.submit(fn, substream(seed, tag, j), s, c)
            for j, (s, c) in enumerate(work)
        ]
        return [f.result() for f in futs]
