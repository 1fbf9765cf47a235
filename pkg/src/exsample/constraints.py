"""Incremental constraint checkers.

A checker answers two questions about a constraint set L: for a viable
prefix u, which tokens a keep u·a inside prefix(L) (the viability mask,
with the eos bit answering whether u terminated now is a member), and
whether a terminated sequence is a member.  Tokens are matched by their
surface bytes, consumed byte-by-byte, so checkers are independent of any
tokenizer.  Masks are memoized per prefix; checkers are immutable after
construction.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grammar import Grammar, parse_grammar, reduce_grammar, _nullable_set
from .vocab import Sequence, UnterminatedSequenceError, Vocabulary


class NonViablePrefixError(ValueError):
    """A mask was requested for a prefix that cannot reach the language."""


class ConstraintChecker(ABC):
    def __init__(self, vocab: Vocabulary) -> None:
        self.vocab = vocab
        self._mask_cache: dict[tuple[int, ...], np.ndarray] = {}
        self._complete_cache: dict[tuple[int, ...], bool] = {}

    def viability_mask(self, u: Sequence) -> np.ndarray:
        """Boolean vector over the vocabulary: bit a iff u·a is viable.

        Raises NonViablePrefixError when u itself is not viable; querying
        such a prefix indicates a sampler bug, not a rejected sample.
        """
        if u.terminated:
            raise ValueError("cannot extend a terminated sequence")
        mask = self._mask_cache.get(u.ids)
        if mask is None:
            mask = self._mask_uncached(u.ids)
            mask.flags.writeable = False
            self._mask_cache[u.ids] = mask
        return mask

    def is_complete(self, w: Sequence) -> bool:
        """Membership test for a terminated sequence."""
        if not w.terminated:
            raise UnterminatedSequenceError("membership needs a terminated sequence")
        body = w.ids[:-1]
        got = self._complete_cache.get(body)
        if got is None:
            got = self._is_complete_body(body)
            self._complete_cache[body] = got
        return got

    @abstractmethod
    def _mask_uncached(self, ids: tuple[int, ...]) -> np.ndarray: ...

    @abstractmethod
    def _is_complete_body(self, ids: tuple[int, ...]) -> bool:
        """Membership of the sequence whose non-eos tokens are ``ids``."""


class EarleyChecker(ConstraintChecker):
    """Recognizer-backed checker for a context-free constraint.

    The grammar is reduced at construction, which makes "chart column
    non-empty" a sound and complete viability test: every live item can
    then be completed to a member of L.  Charts are cached per prefix and
    extended one token at a time.
    """

    def __init__(self, grammar: Grammar, vocab: Vocabulary) -> None:
        super().__init__(vocab)
        grammar, _ = reduce_grammar(grammar)
        self._accept = "%accept"
        prods = [(self._accept, (grammar.start,))] + list(grammar.productions)
        self._prods = prods
        self._by_lhs: dict[str, list[int]] = {}
        for idx, (lhs, _) in enumerate(prods):
            self._by_lhs.setdefault(lhs, []).append(idx)
        self._nullable = _nullable_set(prods)
        # chart per prefix: tuple of frozensets of (prod, dot, origin); None = dead
        self._charts: dict[tuple[int, ...], tuple | None] = {}
        self._charts[()] = (self._closure([], {(0, 0, 0)}, 0),)

    def _closure(self, cols: list, seed: set, pos: int) -> frozenset:
        col = set(seed)
        agenda = list(seed)
        while agenda:
            item = agenda.pop()
            pi, dot, org = item
            lhs, rhs = self._prods[pi]
            if dot == len(rhs):
                if org == pos:
                    continue  # zero-span completion; covered by nullable advance
                for pj, dj, oj in cols[org]:
                    rhsj = self._prods[pj][1]
                    if dj < len(rhsj) and rhsj[dj] == lhs:
                        new = (pj, dj + 1, oj)
                        if new not in col:
                            col.add(new)
                            agenda.append(new)
            else:
                sym = rhs[dot]
                if isinstance(sym, str):
                    for pk in self._by_lhs.get(sym, ()):
                        new = (pk, 0, pos)
                        if new not in col:
                            col.add(new)
                            agenda.append(new)
                    if sym in self._nullable:
                        new = (pi, dot + 1, org)
                        if new not in col:
                            col.add(new)
                            agenda.append(new)
        return frozenset(col)

    def _advance(self, cols: list, byte: int) -> frozenset:
        pos = len(cols)
        seed = set()
        for pi, dot, org in cols[-1]:
            rhs = self._prods[pi][1]
            if dot < len(rhs) and not isinstance(rhs[dot], str) and byte in rhs[dot]:
                seed.add((pi, dot + 1, org))
        if not seed:
            return frozenset()
        return self._closure(cols, seed, pos)

    def _feed_token(self, cols: list, token: int) -> list | None:
        """Extend a column list by one token's surface bytes; None if dead."""
        for byte in self.vocab.surfaces[token]:
            col = self._advance(cols, byte)
            if not col:
                return None
            cols = cols + [col]
        return cols

    def _chart(self, ids: tuple[int, ...]):
        for k in range(len(ids), -1, -1):
            if ids[:k] in self._charts:
                break
        chart = self._charts[ids[:k]]
        while k < len(ids):
            if chart is None:
                self._charts[ids[: k + 1]] = None
            else:
                extended = self._feed_token(list(chart), ids[k])
                chart = None if extended is None else tuple(extended)
                self._charts[ids[: k + 1]] = chart
            k += 1
        return chart

    def _accepts(self, chart: tuple) -> bool:
        return (0, 1, 0) in chart[-1]

    def _mask_uncached(self, ids: tuple[int, ...]) -> np.ndarray:
        chart = self._chart(ids)
        if chart is None:
            raise NonViablePrefixError(f"prefix {ids} is not viable")
        mask = np.zeros(self.vocab.size, dtype=bool)
        cols = list(chart)
        for token in range(self.vocab.size):
            if token == self.vocab.eos:
                mask[token] = self._accepts(chart)
            else:
                mask[token] = self._feed_token(cols, token) is not None
        return mask

    def _is_complete_body(self, ids: tuple[int, ...]) -> bool:
        chart = self._chart(ids)
        return chart is not None and self._accepts(chart)


def earley_checker(grammar: Grammar, vocab: Vocabulary) -> EarleyChecker:
    return EarleyChecker(grammar, vocab)


# ---------------------------------------------------------------------------
# DFA backend

@dataclass(frozen=True, eq=False)
class DfaConstraint:
    """Byte-level DFA with a total transition table (dead state included)
    and the exact co-reachable set (states from which accepting states are
    reachable), computed by backward fixpoint."""

    n_states: int
    start: int
    accepting: frozenset[int]
    alphabet: frozenset[int]
    transitions: dict
    co_reachable: frozenset[int]


def make_dfa(
    n_states: int,
    start: int,
    accepting,
    alphabet,
    transitions: dict,
) -> DfaConstraint:
    """Build a DfaConstraint; missing (state, byte) pairs go to an added
    dead state so the table is total over the declared alphabet."""
    alphabet = frozenset(int(b) for b in alphabet)
    accepting = frozenset(int(s) for s in accepting)
    if not 0 <= start < n_states:
        raise ValueError("start state out of range")
    if any(not 0 <= s < n_states for s in accepting):
        raise ValueError("accepting state out of range")
    table = {}
    need_dead = False
    for (src, byte), dst in transitions.items():
        src, byte, dst = int(src), int(byte), int(dst)
        if byte not in alphabet:
            raise ValueError(f"transition byte {byte} outside the DFA alphabet")
        if not (0 <= src < n_states and 0 <= dst < n_states):
            raise ValueError("transition state out of range")
        table[(src, byte)] = dst
    dead = n_states
    for s in range(n_states):
        for b in alphabet:
            if (s, b) not in table:
                table[(s, b)] = dead
                need_dead = True
    total_states = n_states + 1 if need_dead else n_states
    if need_dead:
        for b in alphabet:
            table[(dead, b)] = dead
    # backward reachability from accepting states
    preds: dict[int, set[int]] = {s: set() for s in range(total_states)}
    for (src, _), dst in table.items():
        preds[dst].add(src)
    co = set(accepting)
    frontier = list(accepting)
    while frontier:
        s = frontier.pop()
        for p in preds[s]:
            if p not in co:
                co.add(p)
                frontier.append(p)
    return DfaConstraint(
        total_states, start, accepting, alphabet, table, frozenset(co)
    )


def load_dfa(source: str) -> DfaConstraint:
    """Parse a .dfa automaton table (see README format)."""
    alphabet: frozenset[int] | None = None
    start: int | None = None
    accepting: list[int] = []
    raw_edges: list[tuple[int, bytes, int]] = []
    max_state = -1
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.split("//", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        head = parts[0]
        if head == "alphabet":
            alphabet = frozenset(_quoted_bytes(parts[1], lineno))
        elif head == "start":
            start = int(parts[1])
        elif head == "accept":
            accepting = [int(x) for x in parts[1].split()]
        else:
            fields = line.split()
            if len(fields) != 3:
                raise ValueError(f"{lineno}: expected 'SRC \"bytes\" DST'")
            src = int(fields[0])
            dst = int(fields[2])
            raw_edges.append((src, _quoted_bytes(fields[1], lineno), dst))
            max_state = max(max_state, src, dst)
    if alphabet is None or start is None:
        raise ValueError("dfa file needs 'alphabet' and 'start' lines")
    n_states = max(max_state, start, max(accepting, default=0)) + 1
    transitions = {}
    for src, data, dst in raw_edges:
        for b in data:
            transitions[(src, b)] = dst
    return make_dfa(n_states, start, accepting, alphabet, transitions)


def _quoted_bytes(text: str, lineno: int) -> bytes:
    text = text.strip()
    if len(text) < 2 or text[0] != '"' or text[-1] != '"':
        raise ValueError(f"{lineno}: expected a double-quoted byte string")
    return text[1:-1].encode("utf-8")


class DfaChecker(ConstraintChecker):
    """Checker for a regular constraint: viability is co-reachability of the
    state after reading the prefix bytes, membership is acceptance."""

    def __init__(self, dfa: DfaConstraint, vocab: Vocabulary) -> None:
        super().__init__(vocab)
        for tid, surface in enumerate(vocab.surfaces):
            if tid == vocab.eos:
                continue
            for b in surface:
                if b not in dfa.alphabet:
                    raise ValueError(
                        f"token {tid} surface byte {bytes([b])!r} outside the DFA alphabet"
                    )
        self.dfa = dfa
        self._states: dict[tuple[int, ...], int] = {(): dfa.start}

    def _state(self, ids: tuple[int, ...]) -> int:
        got = self._states.get(ids)
        if got is None:
            state = self._state(ids[:-1])
            for b in self.vocab.surfaces[ids[-1]]:
                state = self.dfa.transitions[(state, b)]
            self._states[ids] = got = state
        return got

    def _mask_uncached(self, ids: tuple[int, ...]) -> np.ndarray:
        state = self._state(ids)
        if state not in self.dfa.co_reachable:
            raise NonViablePrefixError(f"prefix {ids} is not viable")
        mask = np.zeros(self.vocab.size, dtype=bool)
        for token in range(self.vocab.size):
            if token == self.vocab.eos:
                mask[token] = state in self.dfa.accepting
            else:
                s = state
                for b in self.vocab.surfaces[token]:
                    s = self.dfa.transitions[(s, b)]
                mask[token] = s in self.dfa.co_reachable
        return mask

    def _is_complete_body(self, ids: tuple[int, ...]) -> bool:
        return self._state(ids) in self.dfa.accepting


def dfa_checker(dfa: DfaConstraint, vocab: Vocabulary) -> DfaChecker:
    return DfaChecker(dfa, vocab)


def load_constraint(path: str | Path, vocab: Vocabulary) -> ConstraintChecker:
    """Build a checker from a constraint file, sniffing format by extension
    (.g grammar, .dfa automaton table)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".g":
        return EarleyChecker(parse_grammar(text), vocab)
    if path.suffix == ".dfa":
        return DfaChecker(load_dfa(text), vocab)
    raise ValueError(f"unknown constraint format {path.suffix!r} (want .g or .dfa)")
