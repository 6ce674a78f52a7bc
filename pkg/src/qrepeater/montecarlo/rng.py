"""Reproducible random streams and worker-count-invariant block execution.

Trials are grouped into fixed-size blocks.  Each block draws from its own
PCG64 stream keyed on ``(master_seed, stream name, block index)``, so a
block's output never depends on which worker ran it or in what order.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable

import numpy as np

BLOCK_SIZE = 8192


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def block_generator(master_seed: int, stream: str, block_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=(stream_key(stream), block_index))
    return np.random.Generator(np.random.PCG64(seq))


def block_sizes(n_total: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(n_total, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _run_one(args: tuple) -> dict[str, np.ndarray]:
    kernel, master_seed, stream, index, n, kwargs = args
    return kernel(block_generator(master_seed, stream, index), n, index, **kwargs)


def run_blocks(
    kernel: Callable[..., dict[str, np.ndarray]],
    n_total: int,
    master_seed: int,
    stream: str,
    workers: int = 1,
    **kwargs: Any,
) -> dict[str, np.ndarray]:
    """Run ``kernel(rng, n, block_index, **kwargs)`` over all blocks; concatenate in block order.

    ``kernel`` must be a module-level function returning a dict of 1-d arrays
    whose first axis indexes trials (or any per-block rows).
    """
    if n_total < 1:
        raise ValueError("need at least one trial")
    jobs = [(kernel, master_seed, stream, i, n, kwargs) for i, n in enumerate(block_sizes(n_total))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_one, jobs))
    else:
        parts = [_run_one(job) for job in jobs]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
