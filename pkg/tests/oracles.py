"""Independent scalar-loop reference implementations used by the tests.

Everything here is deliberately written without the engine's vectorized
code paths: plain Python loops, math.* scalar functions, and explicit
sequential logic. The only shared contract is the documented random-stream
consumption (one uniform per grid cell, row-major), so the end-to-end
reference can replay the same draws as the engine.
"""

from __future__ import annotations

import math

import numpy as np


def motion_map_oracle(frames: np.ndarray) -> np.ndarray:
    """Triple-loop mean absolute temporal difference per pixel."""
    t, h, w, c = frames.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for ti in range(t - 1):
                for ci in range(c):
                    acc += abs(float(frames[ti + 1, y, x, ci]) - float(frames[ti, y, x, ci]))
            out[y, x] = acc / (3.0 * (t - 1))
    return out


def pool_oracle(values: np.ndarray, b0: int) -> np.ndarray:
    """Loop-based block pooling; ragged boundary blocks average their own pixels."""
    h, w = values.shape
    g_h = math.ceil(h / b0)
    g_w = math.ceil(w / b0)
    grid = np.zeros((g_h, g_w))
    for i in range(g_h):
        for j in range(g_w):
            acc = 0.0
            count = 0
            for y in range(i * b0, min((i + 1) * b0, h)):
                for x in range(j * b0, min((j + 1) * b0, w)):
                    acc += float(values[y, x])
                    count += 1
            grid[i, j] = acc / count
    return grid


def frame_indices_oracle(n: int, t_out: int) -> list[int]:
    return [math.floor((t + 0.5) * n / t_out) for t in range(t_out)]


def straight_line_tube_augment(
    frames_i: np.ndarray,
    frames_j: np.ndarray,
    r: float,
    b0: int,
    t_out: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sequential reimplementation of the full tube pipeline.

    Replays the engine's random draws: one uniform per patch cell in
    row-major order, exponential keys, k smallest with low-index tie-break.
    """
    idx_i = frame_indices_oracle(len(frames_i), t_out)
    idx_j = frame_indices_oracle(len(frames_j), t_out)
    a = frames_i[idx_i]
    b = frames_j[idx_j]
    t, h, w, _ = a.shape

    motion = motion_map_oracle(a)
    grid = pool_oracle(motion, b0)
    g_h, g_w = grid.shape

    lo = grid.min()
    hi = grid.max()
    if hi > lo:
        norm = (grid - lo) / (hi - lo)
    else:
        norm = np.zeros_like(grid)
    weights = 1.0 - norm
    if not (weights > 0).any():
        weights = np.ones_like(grid)

    n_patches = g_h * g_w
    if r == 0.0:
        k = 0
    else:
        k = min(max(math.floor(r * n_patches + 0.5), 1), n_patches)

    if k == 0:
        return a.copy()

    keys = []
    for i in range(g_h):
        for j in range(g_w):
            u = rng.random()
            wt = weights[i, j]
            keys.append(math.inf if wt <= 0 else -math.log1p(-u) / wt)
    order = sorted(range(n_patches), key=lambda flat: (keys[flat], flat))
    chosen = {(flat // g_w, flat % g_w) for flat in order[:k]}

    out = a.copy()
    for ti in range(t):
        for y in range(h):
            for x in range(w):
                if (y // b0, x // b0) in chosen:
                    out[ti, y, x, :] = b[ti, y, x, :]
    return out


def sequential_draw_marginals(weights: list[float], k: int) -> list[float]:
    """Marginal inclusion probabilities of k successive weighted draws.

    Recursive formulation (no itertools.permutations) so it is an
    implementation-independent cross-check of the package's enumeration.
    """
    n = len(weights)
    marginals = [0.0] * n

    def recurse(selected: tuple[int, ...], prob: float) -> None:
        if len(selected) == k:
            for i in selected:
                marginals[i] += prob
            return
        remaining = sum(weights[i] for i in range(n) if i not in selected and weights[i] > 0)
        for i in range(n):
            if i in selected or weights[i] <= 0:
                continue
            recurse(selected + (i,), prob * weights[i] / remaining)

    recurse((), 1.0)
    return marginals
