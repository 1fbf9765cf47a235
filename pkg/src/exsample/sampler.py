"""Left-to-right constrained samplers.

The rejection family draws whole sequences from the model reweighted to
avoid the invalid-prefix trie, accepts members of the constraint, and
grows the trie according to an update strategy:

  rs    never updates; plain rejection sampling
  ars   adds the rejected sample's shortest invalid prefix
  rsft  adds every invalid first token, whatever was sampled
  cars  adds every invalid one-token continuation of every viable prefix
        visited, on accepted samples too

Any strategy is sound as long as it only ever inserts genuinely invalid
prefixes; acceptance probability then improves monotonically while the
accepted-sample distribution stays exactly the constrained one.  Greedy
constrained decoding (gcd) is the standard biased baseline: mask invalid
tokens each step and renormalize.

Randomness is a seeded counter-based generator (Philox) with one
inverse-CDF draw per emitted token; ties on a CDF boundary resolve to the
lower token id, so runs are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from .constraints import ConstraintChecker
from .lm import LanguageModel, NextTokenDistribution
from .metrics import RunMetrics
from .trie import InvalidPrefixTrie, MassExhaustedError, TrieCorruptionError
from .vocab import Sequence

METHODS = ("rs", "ars", "rsft", "cars", "gcd")


class UpdateStrategy(Enum):
    RS = "rs"
    ARS = "ars"
    RSFT = "rsft"
    CARS = "cars"


@dataclass(frozen=True)
class SamplerConfig:
    method: str
    seed: int
    max_len: int
    sample_cap: int = 2000

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; want one of {METHODS}")
        if self.sample_cap < 1:
            raise ValueError("sample_cap must be at least 1")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")

    @property
    def strategy(self) -> UpdateStrategy | None:
        return None if self.method == "gcd" else UpdateStrategy(self.method)


@dataclass(frozen=True)
class SampleTrace:
    """One complete generation: the tokens, the full conditional recorded at
    every step, and viability masks for as long as the prefix stayed viable."""

    tokens: Sequence
    accepted: bool
    step_dists: tuple[NextTokenDistribution, ...]
    step_masks: tuple[np.ndarray, ...]
    lm_calls: int


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def draw_index(probs: np.ndarray, cum: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: the smallest positive-mass index i with cum[i] >= u."""
    n = len(probs)
    i = int(cum.searchsorted(u, side="left"))
    if i >= n:  # u above the accumulated total (floating shortfall)
        i = n - 1
        while probs[i] <= 0.0:
            i -= 1
        return i
    while probs[i] <= 0.0:  # u == a boundary shared with zero-mass entries
        i += 1
    return i


def sample_one(
    lm: LanguageModel,
    checker: ConstraintChecker,
    trie: InvalidPrefixTrie,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> SampleTrace:
    """Draw one terminated sequence from the trie-reweighted model.

    Viability masks are recorded while the growing prefix remains viable;
    once it leaves the viable set, everything below is already covered by
    the trie, so mask queries stop.
    """
    if trie.root.p <= 0.0:
        raise MassExhaustedError("no valid mass left; constraint unreachable")
    eos = lm.vocab.eos
    ids: list[int] = []
    dists: list[NextTokenDistribution] = []
    masks: list[np.ndarray] = []
    node = trie.root
    viable = True
    while True:
        prefix = Sequence(tuple(ids), False)
        dist = lm.next_distribution(prefix)
        dists.append(dist)
        mask = None
        if viable:
            mask = checker.viability_mask(prefix)
            masks.append(mask)
        if node is not None and node.children:
            probs = trie._reweight_at(node, dist)
            cum = np.cumsum(probs)
        else:
            probs, cum = dist.probs, dist.cum
        token = draw_index(probs, cum, rng.random())
        ids.append(token)
        if viable and not mask[token]:
            viable = False
        if node is not None:
            node = node.children.get(token)
        if token == eos:
            break
    tokens = Sequence(tuple(ids), True)
    accepted = checker.is_complete(tokens)
    return SampleTrace(tokens, accepted, tuple(dists), tuple(masks), len(ids))


def invalid_set(
    trace: SampleTrace,
    checker: ConstraintChecker,
    strategy: UpdateStrategy,
) -> list[tuple[Sequence, tuple[NextTokenDistribution, ...]]]:
    """The invalid prefixes a strategy derives from one trace, each with the
    step distributions needed to insert it.

    Edge probabilities come from the trace's recorded conditionals; a
    prefix branching off the sampled path at step i reuses step i's
    distribution, so no extra model calls are ever needed.
    """
    eos = checker.vocab.eos
    ids = trace.tokens.ids
    masks = trace.step_masks
    dists = trace.step_dists
    out: list[tuple[Sequence, tuple[NextTokenDistribution, ...]]] = []

    if strategy is UpdateStrategy.RS:
        return out

    if strategy is UpdateStrategy.RSFT:
        for token in np.flatnonzero(~masks[0]):
            token = int(token)
            out.append((Sequence((token,), token == eos), (dists[0],)))
        return out

    if strategy is UpdateStrategy.ARS:
        if trace.accepted:
            return out
        k = len(masks)  # prefix ids[:k-1] was viable, ids[:k] is not
        u = Sequence(ids[:k], k == len(ids) and trace.tokens.terminated)
        out.append((u, dists[:k]))
        return out

    # cars: every invalid one-token continuation of every visited viable
    # prefix; this includes the trace's own shortest invalid prefix when
    # the trace was rejected, and applies unchanged to accepted samples.
    for i, mask in enumerate(masks):
        base = ids[:i]
        for token in np.flatnonzero(~mask):
            token = int(token)
            u = Sequence(base + (token,), token == eos)
            out.append((u, dists[: i + 1]))
    return out


def gcd_sample(
    lm: LanguageModel,
    checker: ConstraintChecker,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> SampleTrace:
    """Greedy constrained decoding: mask non-viable tokens, renormalize,
    sample.  Efficient but biased relative to the constrained distribution.

    If the horizon forces eos while the sequence is not a member (the
    constraint's shortest completion ran past the horizon), the attempt is
    returned unterminated and not accepted; the caller recounts it.
    """
    eos = lm.vocab.eos
    ids: list[int] = []
    dists: list[NextTokenDistribution] = []
    masks: list[np.ndarray] = []
    while True:
        prefix = Sequence(tuple(ids), False)
        dist = lm.next_distribution(prefix)
        mask = checker.viability_mask(prefix)
        dists.append(dist)
        masks.append(mask)
        allowed = dist.probs * mask
        total = allowed.sum()
        if total <= 0.0:
            if len(ids) == cfg.max_len:
                # horizon dead end: eos forced but not a member here
                return SampleTrace(
                    Sequence(tuple(ids), False),
                    False,
                    tuple(dists),
                    tuple(masks),
                    len(dists),
                )
            raise RuntimeError(
                "every token masked at a viable prefix; checker is inconsistent"
            )
        probs = allowed / total
        token = draw_index(probs, np.cumsum(probs), rng.random())
        ids.append(token)
        if token == eos:
            tokens = Sequence(tuple(ids), True)
            return SampleTrace(
                tokens, checker.is_complete(tokens), tuple(dists), tuple(masks), len(ids)
            )


def run(
    lm: LanguageModel,
    checker: ConstraintChecker,
    cfg: SamplerConfig,
    target_valid: int | None = None,
    trie_hook=None,
) -> tuple[Iterator[Sequence], RunMetrics]:
    """Stream accepted sequences until the generation cap (or, if given,
    until ``target_valid`` accepts).

    Returns the lazy stream plus its metrics object; counters and the
    root-mass trajectory fill in as the stream is consumed.  Reaching the
    cap with too few accepts is an outcome, not an error.  ``trie_hook``,
    when given, is called as hook(iteration, trie) after every update.
    """
    if cfg.max_len != lm.max_len:
        raise ValueError(
            f"config horizon {cfg.max_len} does not match the model's {lm.max_len}"
        )
    metrics = RunMetrics(method=cfg.method, seed=cfg.seed)
    rng = make_rng(cfg.seed)

    def rejection_stream() -> Iterator[Sequence]:
        trie = InvalidPrefixTrie()
        strategy = cfg.strategy
        while metrics.generations < cfg.sample_cap:
            if target_valid is not None and metrics.accepted >= target_valid:
                return
            trace = sample_one(lm, checker, trie, cfg, rng)
            metrics.generations += 1
            previous = trie.root.p
            for u, edge_dists in invalid_set(trace, checker, strategy):
                trie.insert_invalid(u, edge_dists)
            if trie.root.p > previous + 1e-12:
                raise TrieCorruptionError(
                    f"root mass rose from {previous!r} to {trie.root.p!r}"
                )
            metrics.p_eps_trajectory.append(trie.root.p)
            if trace.accepted:
                metrics.accepted += 1
                metrics.accepted_lm_calls.append(trace.lm_calls)
            metrics.cumulative_accepts.append(metrics.accepted)
            if trie_hook is not None:
                trie_hook(metrics.generations, trie)
            if trace.accepted:
                yield trace.tokens

    def gcd_stream() -> Iterator[Sequence]:
        while metrics.generations < cfg.sample_cap:
            if target_valid is not None and metrics.accepted >= target_valid:
                return
            trace = gcd_sample(lm, checker, cfg, rng)
            metrics.generations += 1
            metrics.p_eps_trajectory.append(1.0)
            if trace.accepted:
                metrics.accepted += 1
                metrics.accepted_lm_calls.append(trace.lm_calls)
            else:
                metrics.gcd_discards += 1
            metrics.cumulative_accepts.append(metrics.accepted)
            if trace.accepted:
                yield trace.tokens

    stream = gcd_stream() if cfg.method == "gcd" else rejection_stream()
    return stream, metrics
