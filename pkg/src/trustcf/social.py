"""Undirected friendship graph and the social closeness measures on it.

Edges are symmetrized and deduplicated at construction; self-loops are
dropped.  Adjacency is stored CSR-style with neighbor lists sorted by
handle, so membership tests are binary searches and set overlaps are
linear merges.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from .errors import UnknownUser


class SocialGraph:
    __slots__ = ("num_users", "_ptr", "_adj")

    def __init__(self, num_users: int, edges: Iterable[tuple[int, int]] = ()):
        self.num_users = int(num_users)
        pairs: set[tuple[int, int]] = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                continue
            if not (0 <= a < num_users and 0 <= b < num_users):
                raise ValueError(f"edge ({a}, {b}) references unknown user")
            pairs.add((a, b) if a < b else (b, a))

        if pairs:
            arr = np.array(sorted(pairs), dtype=np.int64)
            src = np.concatenate([arr[:, 0], arr[:, 1]])
            dst = np.concatenate([arr[:, 1], arr[:, 0]])
            order = np.lexsort((dst, src))
            src, dst = src[order], dst[order]
        else:
            src = np.empty(0, dtype=np.int64)
            dst = np.empty(0, dtype=np.int64)

        counts = np.bincount(src, minlength=num_users)
        self._ptr = np.concatenate(([0], np.cumsum(counts)))
        self._ptr.setflags(write=False)
        self._adj = dst
        self._adj.setflags(write=False)

    def friends_of(self, u: int) -> np.ndarray:
        """Sorted neighbor handles of u (possibly empty)."""
        self._check(u)
        return self._adj[self._ptr[u]:self._ptr[u + 1]]

    def degree(self, u: int) -> int:
        self._check(u)
        return int(self._ptr[u + 1] - self._ptr[u])

    def degree_array(self) -> np.ndarray:
        return np.diff(self._ptr)

    def num_edges(self) -> int:
        """Number of undirected edges."""
        return int(self._adj.size // 2)

    def has_edge(self, u: int, v: int) -> bool:
        self._check(u)
        self._check(v)
        row = self.friends_of(u)
        at = np.searchsorted(row, v)
        return bool(at < row.size and row[at] == v)

    def edges(self) -> Iterator[tuple[int, int]]:
        """Each undirected edge once, as (smaller handle, larger handle)."""
        for u in range(self.num_users):
            for v in self.friends_of(u):
                if u < v:
                    yield u, int(v)

    def _check(self, u: int) -> None:
        if not 0 <= u < self.num_users:
            raise UnknownUser(f"user handle {u} out of range")


def rel_direct(g: SocialGraph, u: int, v: int) -> float:
    """1 when u and v are friends, else 0."""
    if u == v:
        raise ValueError("relatedness is defined for distinct users")
    return 1.0 if g.has_edge(u, v) else 0.0


def jaccard(g: SocialGraph, u: int, v: int) -> float:
    """Friend-set overlap |F_u ∩ F_v| / |F_u ∪ F_v|; 0 when both sets are empty."""
    if u == v:
        raise ValueError("relatedness is defined for distinct users")
    fu = g.friends_of(u)
    fv = g.friends_of(v)
    inter = np.intersect1d(fu, fv, assume_unique=True).size
    union = fu.size + fv.size - inter
    if union == 0:
        return 0.0
    return inter / union


def rel_social_intersection(g: SocialGraph, u: int, v: int) -> float:
    """Direct friendship short-circuits to 1; otherwise friend-set overlap."""
    if g.has_edge(u, v):
        return 1.0
    return jaccard(g, u, v)
