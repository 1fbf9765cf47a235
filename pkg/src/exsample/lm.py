"""Autoregressive language models: a shared interface plus table, n-gram and
remote-endpoint implementations.

Probabilities are 64-bit floats in linear space; whole-sequence products are
accumulated in log space and exponentiated once.  Every implementation is
immutable after construction, deterministic per prefix, and collapses to an
eos point mass once a prefix reaches the truncation horizon, so total mass
over terminated sequences is 1.
"""

from __future__ import annotations

import json
import math
import warnings
from abc import ABC, abstractmethod
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np
import requests

from .vocab import Sequence, UnterminatedSequenceError, Vocabulary


class TerminatedPrefixError(ValueError):
    """next_distribution was asked to continue past an eos token."""


class TransportError(RuntimeError):
    """The remote logit endpoint failed or returned an unusable response."""


# Vector-sum drift handling in load_table_lm: below _SUM_WARN we renormalize
# silently, up to _SUM_HARD we renormalize with a warning, beyond that the
# document is rejected as malformed.
_SUM_WARN = 1e-6
_SUM_HARD = 1e-3


class NextTokenDistribution:
    """One conditional P(.|u) over the full vocabulary, renormalized on build."""

    __slots__ = ("probs", "_cum")

    def __init__(self, probs) -> None:
        arr = np.asarray(probs, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("probability vector must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probability vector has non-finite entries")
        if np.any(arr < 0):
            raise ValueError("negative probability")
        total = float(arr.sum())
        if total <= 0.0:
            raise ValueError("probability vector sums to zero")
        arr = arr / total
        arr.flags.writeable = False
        self.probs = arr
        self._cum = None

    @property
    def cum(self) -> np.ndarray:
        """Cumulative sums, cached for inverse-CDF draws."""
        if self._cum is None:
            c = np.cumsum(self.probs)
            c.flags.writeable = False
            self._cum = c
        return self._cum

    def __getitem__(self, token: int) -> float:
        return float(self.probs[token])

    def __len__(self) -> int:
        return len(self.probs)


class LanguageModel(ABC):
    """Next-token model over a vocabulary, truncated at horizon ``max_len``."""

    def __init__(self, vocab: Vocabulary, max_len: int) -> None:
        if max_len < 1:
            raise ValueError("horizon must be a positive integer")
        self.vocab = vocab
        self.max_len = max_len
        point = np.zeros(vocab.size)
        point[vocab.eos] = 1.0
        self._eos_mass = NextTokenDistribution(point)

    def next_distribution(self, prefix: Sequence) -> NextTokenDistribution:
        """P(.|prefix); the eos point mass once the horizon is reached."""
        if prefix.terminated:
            raise TerminatedPrefixError("cannot extend a terminated sequence")
        if len(prefix) > self.max_len:
            raise ValueError(
                f"prefix length {len(prefix)} exceeds horizon {self.max_len}"
            )
        if len(prefix) == self.max_len:
            return self._eos_mass
        return self._conditional(prefix.ids)

    @abstractmethod
    def _conditional(self, ids: tuple[int, ...]) -> NextTokenDistribution:
        """The stored conditional for a sub-horizon, unterminated prefix."""


def sequence_probability(w: Sequence, lm: LanguageModel) -> float:
    """P(w): the chain-rule product over w's tokens, accumulated in log space."""
    if not w.terminated:
        raise UnterminatedSequenceError("sequence probability needs a terminated sequence")
    if lm.vocab.eos in w.ids[:-1]:
        raise ValueError("eos appears before the end of the sequence")
    log_p = 0.0
    for i, token in enumerate(w.ids):
        step = lm.next_distribution(Sequence(w.ids[:i], False))[token]
        if step == 0.0:
            return 0.0
        log_p += math.log(step)
    return math.exp(log_p)


class TableLM(LanguageModel):
    """Lookup model: explicit conditionals for some contexts, one default
    vector everywhere else.  All distributions are built once and shared."""

    def __init__(
        self,
        vocab: Vocabulary,
        contexts: Mapping[tuple[int, ...], Iterable[float]],
        default: Iterable[float],
        max_len: int,
    ) -> None:
        super().__init__(vocab, max_len)
        self._default = self._vector(default)
        self._table = {tuple(ctx): self._vector(v) for ctx, v in contexts.items()}

    def _vector(self, values) -> NextTokenDistribution:
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.shape != (self.vocab.size,):
            raise ValueError(
                f"probability vector of length {arr.size} does not match "
                f"vocabulary size {self.vocab.size}"
            )
        return NextTokenDistribution(arr)

    def _conditional(self, ids: tuple[int, ...]) -> NextTokenDistribution:
        return self._table.get(ids, self._default)


def _checked_vector(raw, size: int, where: str) -> list[float]:
    if not isinstance(raw, list) or len(raw) != size:
        raise ValueError(f"{where}: expected a probability array of length {size}")
    vec = [float(x) for x in raw]
    if any(x < 0 for x in vec):
        raise ValueError(f"{where}: negative probability")
    drift = abs(sum(vec) - 1.0)
    if drift > _SUM_HARD:
        raise ValueError(f"{where}: probabilities sum to {sum(vec):.6g}, not 1")
    if drift > _SUM_WARN:
        warnings.warn(f"{where}: renormalizing vector off by {drift:.3g}", stacklevel=3)
    return vec


def _parse_context_key(key: str, vocab: Vocabulary) -> tuple[int, ...]:
    if key == "":
        return ()
    try:
        ids = tuple(int(part) for part in key.split(","))
    except ValueError:
        raise ValueError(f"malformed context key {key!r}") from None
    return vocab.seq(ids).ids


def table_lm_from_doc(doc: Mapping) -> TableLM:
    """Build a TableLM from a parsed table-LM document (see README format)."""
    for field in ("tokens", "eos", "horizon", "default"):
        if field not in doc:
            raise ValueError(f"table LM document is missing {field!r}")
    vocab = Vocabulary.from_tokens(doc["tokens"], int(doc["eos"]))
    horizon = int(doc["horizon"])
    default = _checked_vector(doc["default"], vocab.size, "default vector")
    contexts = {}
    for key, raw in doc.get("contexts", {}).items():
        ids = _parse_context_key(key, vocab)
        contexts[ids] = _checked_vector(raw, vocab.size, f"context {key!r}")
    return TableLM(vocab, contexts, default, horizon)


def load_table_lm(source: str | Path | IO[str]) -> TableLM:
    """Load a table LM from a JSON document (path or open file)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed table LM document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("table LM document must be a JSON object")
    return table_lm_from_doc(doc)


class NGramLM(LanguageModel):
    """Fixed-order n-gram model with add-one smoothing.

    Contexts are the last order-1 tokens, left-padded at the start of a
    sequence; smoothing gives every token non-zero mass everywhere.
    """

    _BOS = -1

    def __init__(
        self,
        vocab: Vocabulary,
        order: int,
        corpus: Iterable[Iterable[int]],
        max_len: int,
    ) -> None:
        super().__init__(vocab, max_len)
        if order < 1:
            raise ValueError("n-gram order must be >= 1")
        self.order = order
        counts: dict[tuple[int, ...], np.ndarray] = {}
        for entry in corpus:
            ids = tuple(int(t) for t in entry)
            if vocab.eos in ids[:-1]:
                raise ValueError("corpus sequence has eos before its end")
            if not ids or ids[-1] != vocab.eos:
                ids = ids + (vocab.eos,)
            for i, token in enumerate(ids):
                ctx = self._context(ids[:i])
                if ctx not in counts:
                    counts[ctx] = np.zeros(vocab.size)
                counts[ctx][token] += 1
        self._counts = counts
        self._dists: dict[tuple[int, ...], NextTokenDistribution] = {}
        self._unseen = NextTokenDistribution(np.ones(vocab.size))

    def _context(self, ids: tuple[int, ...]) -> tuple[int, ...]:
        need = self.order - 1
        padded = (self._BOS,) * max(0, need - len(ids)) + ids[len(ids) - need :] if need else ()
        return padded

    def _conditional(self, ids: tuple[int, ...]) -> NextTokenDistribution:
        ctx = self._context(ids)
        dist = self._dists.get(ctx)
        if dist is None:
            c = self._counts.get(ctx)
            if c is None:
                dist = self._unseen
            else:
                dist = NextTokenDistribution(c + 1.0)
            self._dists[ctx] = dist
        return dist


def load_ngram_lm(source: str | Path | IO[str]) -> NGramLM:
    """Load an n-gram LM from a JSON corpus document (see README format)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed n-gram LM document: {exc}") from exc
    for field in ("tokens", "eos", "order", "horizon", "corpus"):
        if field not in doc:
            raise ValueError(f"n-gram LM document is missing {field!r}")
    vocab = Vocabulary.from_tokens(doc["tokens"], int(doc["eos"]))
    corpus = [vocab.encode(line) for line in doc["corpus"]]
    return NGramLM(vocab, int(doc["order"]), corpus, int(doc["horizon"]))


class RemoteLM(LanguageModel):
    """Client for a next-token log-probability endpoint.

    Wire format: POST {"prefix": [ids]} -> 200 with {"logprobs": [float] *
    vocab size}.  Responses are exponentiated, renormalized and cached per
    prefix for the lifetime of the client, so a prefix is queried over the
    network at most once per run.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        endpoint: str,
        max_len: int,
        timeout: float = 10.0,
        session: requests.Session | None = None,
    ) -> None:
        super().__init__(vocab, max_len)
        self.endpoint = endpoint
        self._timeout = timeout
        self._session = session or requests.Session()
        self._cache: dict[tuple[int, ...], NextTokenDistribution] = {}

    def _conditional(self, ids: tuple[int, ...]) -> NextTokenDistribution:
        hit = self._cache.get(ids)
        if hit is not None:
            return hit
        try:
            resp = self._session.post(
                self.endpoint, json={"prefix": list(ids)}, timeout=self._timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"logit endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"logit endpoint returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise TransportError("logit endpoint returned non-JSON body") from exc
        logprobs = payload.get("logprobs") if isinstance(payload, dict) else None
        if not isinstance(logprobs, list) or len(logprobs) != self.vocab.size:
            got = len(logprobs) if isinstance(logprobs, list) else "no"
            raise ValueError(
                f"logprobs of length {got} do not match vocabulary size {self.vocab.size}"
            )
        arr = np.asarray(logprobs, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("logit endpoint returned non-finite log-probabilities")
        dist = NextTokenDistribution(np.exp(arr - arr.max()))
        return self._cache.setdefault(ids, dist)
