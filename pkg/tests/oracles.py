"""Slow, independent reference implementations used only by the tests."""

from collections import deque

import numpy as np


def bfs_components(mask: np.ndarray) -> np.ndarray:
    """Component ids by breadth-first search; -1 off the mask.

    Ids are canonicalised to the smallest flat index in each component.
    """
    shape = mask.shape
    d = len(shape)
    flat = mask.reshape(-1)
    out = np.full(flat.size, -1, dtype=np.int64)
    for s in range(flat.size):
        if not flat[s] or out[s] >= 0:
            continue
        out[s] = s
        q = deque([np.unravel_index(s, shape)])
        while q:
            x = q.popleft()
            for k in range(d):
                for step in (-1, 1):
                    y = list(x)
                    y[k] += step
                    if 0 <= y[k] < shape[k]:
                        j = np.ravel_multi_index(tuple(y), shape)
                        if flat[j] and out[j] < 0:
                            out[j] = s
                            q.append(tuple(y))
    return out.reshape(shape)


def bfs_reaches(mask: np.ndarray, src: np.ndarray, tgt: np.ndarray) -> bool:
    lab = bfs_components(mask)
    a = set(lab[src & mask].tolist())
    b = set(lab[tgt & mask].tolist())
    return bool(a & b)
