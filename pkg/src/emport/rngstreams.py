"""Counter-based random streams.

Every consumer of randomness gets its own Philox substream keyed by
(seed, namespace tag, episode, path).  Draw schedules are therefore
reproducible bit-for-bit and independent of how paths are distributed
across workers.  Training and evaluation use disjoint namespace tags.
"""
from __future__ import annotations

import numpy as np

TAG_TRAIN = 1
TAG_EVAL = 2
TAG_GENERIC = 3

_MASK64 = (1 << 64) - 1


def substream(seed: int, tag: int, episode: int, path: int) -> np.random.Generator:
    """Generator for one (seed, tag, episode, path) cell."""
    if not (0 <= tag < 256):
        raise ValueError(f"tag out of range: {tag}")
    if episode < 0 or path < 0:
        raise ValueError("episode and path must be nonnegative")
    if path >= 1 << 24:
        raise ValueError(f"path index too large: {path}")
    word = (tag << 56) | ((episode & ((1 << 32) - 1)) << 24) | path
    key = np.array([seed & _MASK64, word & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def batch_normals(seed: int, tag: int, episode: int, n_paths: int,
                  n_steps: int, n_channels: int,
                  path_offset: int = 0) -> np.ndarray:
    """Standard normals of shape (n_paths, n_steps, n_channels), one
    substream per path; path i draws from substream path_offset + i."""
    out = np.empty((n_paths, n_steps, n_channels))
    for i in range(n_paths):
        out[i] = substream(seed, tag, episode,
                           path_offset + i).standard_normal((n_steps, n_channels))
    return out


def batch_uniforms(seed: int, tag: int, episode: int, n_paths: int,
                   n_steps: int, channel_offset: int = 0) -> np.ndarray:
    """Uniforms in the open interval (0, 1), shape (n_paths, n_steps).

    Drawn from a substream distinct from ``batch_normals`` by offsetting the
    path index block, so normals and uniforms never share a counter stream.
    """
    out = np.empty((n_paths, n_steps))
    for i in range(n_paths):
        g = substream(seed, tag, episode, (1 << 23) + channel_offset + i)
        u = g.random(n_steps)
        np.clip(u, 1e-16, 1.0 - 1e-16, out=u)
        out[i] = u
    return out
