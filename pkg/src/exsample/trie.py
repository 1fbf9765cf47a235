"""Invalid-prefix trie with exact probability-mass bookkeeping.

Leaves are discovered invalid prefixes; every tracked node u carries the
probability p that continuing from u avoids all discovered invalid
prefixes.  Untracked sequences implicitly have p = 1 (no extension is
known invalid) or p = 0 (below a leaf).  Inserting a prefix sets its leaf
to 0 and propagates the decrease upward, scaled by the cached edge
probabilities, so the root value is always the total mass of sequences
avoiding the invalid set.

Single-writer, multi-reader: inserts must be serialized; reads may run
concurrently between inserts.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from .lm import LanguageModel, NextTokenDistribution
from .vocab import Sequence


class TrieCorruptionError(RuntimeError):
    """Bookkeeping invariant broke: cached edge probabilities disagree,
    a reweighted vector failed its sum check, or a p value left [0, 1]
    by more than rounding noise."""


class MassExhaustedError(RuntimeError):
    """The root value reached 0: every sequence extends an invalid prefix."""


_EDGE_TOL = 1e-12   # cached edge probabilities must match to this
_DRIFT = 1e-12      # p excursions beyond [0,1] by more than this are bugs
_SUM_TOL = 1e-8     # reweighted vectors must sum to 1 within this


def _clamped(p: float) -> float:
    if p < 0.0:
        if p >= -_DRIFT:
            return 0.0
        raise TrieCorruptionError(f"p value {p!r} below 0")
    if p > 1.0:
        if p <= 1.0 + _DRIFT:
            return 1.0
        raise TrieCorruptionError(f"p value {p!r} above 1")
    return p


class TrieNode:
    __slots__ = ("children", "edge_prob", "p", "is_invalid_leaf")

    def __init__(self, edge_prob: float) -> None:
        self.children: dict[int, TrieNode] = {}
        self.edge_prob = edge_prob  # P(ua|u) for the edge into this node
        self.p = 1.0
        self.is_invalid_leaf = False


class InvalidPrefixTrie:
    def __init__(self) -> None:
        self.root = TrieNode(1.0)
        self.n_nodes = 1

    @property
    def p_eps(self) -> float:
        """Mass of all terminated sequences avoiding the invalid set."""
        return self.root.p

    def insert_invalid(
        self,
        u: Sequence | Iterable[int],
        step_dists: Iterable[NextTokenDistribution],
    ) -> float:
        """Record u as invalid; returns the decrease of the root value.

        ``step_dists`` supplies the model conditional at each step along u
        (so the edge probability for token u_i is step_dists[i-1][u_i]).
        The caller is responsible for u actually being invalid; exactness
        of the whole sampler rests on that.  Inserting a prefix already
        covered by a leaf is a no-op returning 0; inserting a proper prefix
        of existing nodes prunes the subtree below it.
        """
        ids = u.ids if isinstance(u, Sequence) else tuple(u)
        dists = list(step_dists)
        if len(dists) != len(ids):
            raise ValueError("need one step distribution per token of the prefix")
        if not ids:
            raise ValueError("cannot insert the empty prefix as invalid")
        path = [self.root]
        node = self.root
        for token, dist in zip(ids, dists):
            if node.is_invalid_leaf:
                return 0.0
            edge = float(dist.probs[token])
            child = node.children.get(token)
            if child is None:
                child = TrieNode(edge)
                node.children[token] = child
                self.n_nodes += 1
            elif abs(child.edge_prob - edge) > _EDGE_TOL:
                raise TrieCorruptionError(
                    f"edge probability for token {token} changed from "
                    f"{child.edge_prob!r} to {edge!r}"
                )
            node = child
            path.append(node)
        if node.is_invalid_leaf:
            return 0.0
        if node.children:
            # a longer prefix was inserted earlier; u dominates it now
            self.n_nodes -= sum(1 for _ in self._walk(node)) - 1
            node.children = {}
        delta = node.p
        node.p = 0.0
        node.is_invalid_leaf = True
        for parent, child in zip(reversed(path[:-1]), reversed(path[1:])):
            delta *= child.edge_prob
            parent.p = _clamped(parent.p - delta)
        return delta

    def p_value(self, u: Sequence | Iterable[int]) -> float:
        """p for any sequence: stored when tracked, 0 below a leaf, else 1."""
        ids = u.ids if isinstance(u, Sequence) else tuple(u)
        node = self.root
        for token in ids:
            if node.is_invalid_leaf:
                return 0.0
            child = node.children.get(token)
            if child is None:
                return 1.0
            node = child
        return node.p

    def reweight_factors(
        self, u: Sequence | Iterable[int], dist: NextTokenDistribution
    ) -> np.ndarray:
        """The conditional over next tokens renormalized to avoid the
        invalid set: a -> P(ua|u) * p(ua) / p(u).

        The returned vector must sum to 1 within tolerance; that sum is the
        online consistency check of the bookkeeping.
        """
        ids = u.ids if isinstance(u, Sequence) else tuple(u)
        node = self.root
        for token in ids:
            if node.is_invalid_leaf:
                raise MassExhaustedError("cannot reweight below an invalid prefix")
            child = node.children.get(token)
            if child is None:
                return dist.probs  # untracked: reduces to the original conditional
            node = child
        return self._reweight_at(node, dist)

    def _reweight_at(self, node: TrieNode, dist: NextTokenDistribution) -> np.ndarray:
        if node.is_invalid_leaf or node.p <= 0.0:
            raise MassExhaustedError("prefix has no remaining valid mass")
        if not node.children:
            return dist.probs
        out = np.array(dist.probs)
        for token, child in node.children.items():
            if abs(child.edge_prob - dist.probs[token]) > _EDGE_TOL:
                raise TrieCorruptionError(
                    f"edge probability for token {token} changed from "
                    f"{child.edge_prob!r} to {dist.probs[token]!r}"
                )
            out[token] *= child.p
        out /= node.p
        total = float(out.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise TrieCorruptionError(
                f"reweighted conditional sums to {total!r}; bookkeeping corrupt"
            )
        return out

    # -- introspection ------------------------------------------------------

    def _walk(self, node: TrieNode, ids: tuple[int, ...] = ()) -> Iterator:
        yield ids, node
        for token in sorted(node.children):
            yield from self._walk(node.children[token], ids + (token,))

    def nodes(self) -> Iterator:
        """Depth-first (prefix ids, node) pairs, children in token order."""
        return self._walk(self.root)

    def leaves(self) -> list[tuple[int, ...]]:
        return [ids for ids, node in self.nodes() if node.is_invalid_leaf]

    def check_local_consistency(self, tol: float = 1e-9) -> None:
        """Debug mode: recompute every p bottom-up and compare against the
        incrementally maintained values."""

        def recompute(node: TrieNode) -> float:
            if node.is_invalid_leaf:
                return 0.0
            fresh = 1.0
            for child in node.children.values():
                fresh -= child.edge_prob * (1.0 - recompute(child))
            return fresh

        for ids, node in self.nodes():
            fresh = recompute(node)
            if abs(fresh - node.p) > tol:
                raise TrieCorruptionError(
                    f"node {ids}: stored p {node.p!r} vs recomputed {fresh!r}"
                )

    def dump(self) -> str:
        """Depth-first snapshot: one ``prefix<TAB>p<TAB>leaf`` line per node."""
        lines = []
        for ids, node in self.nodes():
            prefix = ",".join(str(t) for t in ids)
            lines.append(f"{prefix}\t{node.p!r}\t{int(node.is_invalid_leaf)}")
        return "\n".join(lines) + "\n"


def load_snapshot(text: str, lm: LanguageModel) -> InvalidPrefixTrie:
    """Rebuild a trie from a snapshot by re-inserting its leaves; p values
    are re-derived from the model, so round-trips are semantically exact
    but not required to be bit-exact."""
    trie = InvalidPrefixTrie()
    for line in text.splitlines():
        if not line.strip():
            continue
        prefix, _, leaf = line.split("\t")
        if leaf != "1":
            continue
        ids = tuple(int(t) for t in prefix.split(",")) if prefix else ()
        dists = [
            lm.next_distribution(Sequence(ids[:i], False)) for i in range(len(ids))
        ]
        trie.insert_invalid(ids, dists)
    return trie
