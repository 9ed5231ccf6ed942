"""Incremental per-label scorers for the three decoders.

Each scorer exposes score(prefix, next_token, cache) -> (alpha, new_cache) so
the search drivers stay algorithm-agnostic. The alpha for a regular token is
the cumulative prefix score of the extended hypothesis: the total probability
mass of all alignment paths whose output begins with that prefix. Extending
by eos instead returns the complete-sequence probability.

Caches are copy-on-extend values: a parent's cache may fan out to many child
extensions, so score() never mutates its input cache.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LOG_ZERO, TokenSeq, UsageError, log_add, log_sum_exp
from .models import AttentionModel, CtcGrid, TransducerModel


@dataclass(frozen=True)
class ScoreResult:
    """Cumulative prefix score for the extended hypothesis plus its cache."""

    alpha: float
    cache: object


class CtcPrefixCache:
    """Forward variables of one prefix against a CTC grid.

    Index 0 is the state before any frame is consumed; index t+1 is the state
    after frame t. non_blank[i] is the log mass of alignments collapsing to
    the prefix whose latest label is the prefix's last token; blank[i] is the
    same but latest label blank. For the empty prefix blank accumulates the
    all-blank path and non_blank stays -inf.
    """

    __slots__ = ("prefix", "non_blank", "blank")

    def __init__(self, prefix: TokenSeq, non_blank: list[float], blank: list[float]):
        self.prefix = prefix
        self.non_blank = non_blank
        self.blank = blank


class CtcPrefixScorer:
    """Prefix scoring over a CTC frame-posterior grid.

    One score() call runs the forward recursion over all frames for a single
    extension, summing every alignment consistent with the extended prefix.
    Extending by the same token as the prefix's last requires an intervening
    blank, so only the blank-ending mass feeds that transition.
    """

    def __init__(self, grid: CtcGrid, blank_id: int):
        self.grid = grid
        self.blank_id = blank_id
        self.calls = 0

    def init_cache(self) -> CtcPrefixCache:
        T = self.grid.frames
        blank = [0.0]
        for t in range(T):
            blank.append(blank[-1] + float(self.grid.log_probs[t, self.blank_id]))
        return CtcPrefixCache((), [LOG_ZERO] * (T + 1), blank)

    def score(self, prefix: TokenSeq, token: int | None, cache: CtcPrefixCache,
              eos: bool = False) -> ScoreResult:
        """Score the extension of prefix by token, or its completion if eos."""
        if cache.prefix != tuple(prefix):
            raise UsageError(
                f"cache built for prefix {cache.prefix} cannot score prefix {tuple(prefix)}"
            )
        self.calls += 1
        T = self.grid.frames
        if eos:
            return ScoreResult(log_add(cache.non_blank[T], cache.blank[T]), cache)

        last = prefix[-1] if prefix else None
        repeated = token == last
        logp = self.grid.log_probs
        gn_prev, gb_prev = cache.non_blank, cache.blank
        gn = [LOG_ZERO] * (T + 1)
        gb = [LOG_ZERO] * (T + 1)
        alpha = LOG_ZERO
        for i in range(1, T + 1):
            t = i - 1
            # Mass that may start the new token at frame t: parent mass after
            # frame t-1; a repeated token only continues from blank endings.
            entry = gb_prev[i - 1] if repeated else log_add(gb_prev[i - 1], gn_prev[i - 1])
            p_tok = float(logp[t, token])
            gn[i] = p_tok + log_add(gn[i - 1], entry)
            gb[i] = float(logp[t, self.blank_id]) + log_add(gb[i - 1], gn[i - 1])
            alpha = log_add(alpha, p_tok + entry)
        return ScoreResult(alpha, CtcPrefixCache(tuple(prefix) + (token,), gn, gb))


class RnntPrefixCache:
    """Last-token emission probabilities of one prefix on the RNN-T lattice.

    psi[t] is the log probability that the prefix's last token is emitted at
    frame t (for the empty prefix: probability one at the lattice origin).
    The per-frame conditionals and the derived reach probabilities gamma are
    memoized lazily; both are pure functions of the prefix, so the cache is
    immutable in effect.
    """

    __slots__ = ("prefix", "psi", "_rows", "_gamma")

    def __init__(self, prefix: TokenSeq, psi: list[float]):
        self.prefix = prefix
        self.psi = psi
        self._rows = None
        self._gamma = None

    def rows(self, model: TransducerModel, frames: int) -> list[np.ndarray]:
        if self._rows is None:
            self._rows = [model.posterior(t, self.prefix) for t in range(frames)]
        return self._rows

    def gamma(self, model: TransducerModel, frames: int, blank_id: int) -> list[float]:
        """gamma[t]: log mass of paths that yield the prefix and sit at frame t."""
        if self._gamma is None:
            rows = self.rows(model, frames)
            g = [self.psi[0]]
            for t in range(1, frames):
                g.append(log_add(self.psi[t], g[t - 1] + float(rows[t - 1][blank_id])))
            self._gamma = g
        return self._gamma


class RnntPrefixScorer:
    """Prefix scoring over a transducer model: all lattice paths that yield
    the hypothesis.

    Scoring a token extension alternates two steps per frame: fold blank
    transitions into the reach probability gamma, then emit the new token
    from gamma to obtain the extension's psi. The prefix score is the sum of
    psi over frames; completion (eos) is the final blank taken from gamma at
    the last frame.
    """

    def __init__(self, model: TransducerModel, frames: int, blank_id: int):
        if frames < 1:
            raise UsageError(f"transducer scoring needs frames >= 1, got {frames}")
        self.model = model
        self.frames = frames
        self.blank_id = blank_id
        self.calls = 0

    def init_cache(self) -> RnntPrefixCache:
        psi = [LOG_ZERO] * self.frames
        psi[0] = 0.0
        return RnntPrefixCache((), psi)

    def score(self, prefix: TokenSeq, token: int | None, cache: RnntPrefixCache,
              eos: bool = False) -> ScoreResult:
        """Score the extension of prefix by token, or its completion if eos."""
        if cache.prefix != tuple(prefix):
            raise UsageError(
                f"cache built for prefix {cache.prefix} cannot score prefix {tuple(prefix)}"
            )
        self.calls += 1
        gamma = cache.gamma(self.model, self.frames, self.blank_id)
        rows = cache.rows(self.model, self.frames)
        if eos:
            return ScoreResult(gamma[-1] + float(rows[-1][self.blank_id]), cache)
        psi = [gamma[t] + float(rows[t][token]) for t in range(self.frames)]
        return ScoreResult(log_sum_exp(psi), RnntPrefixCache(tuple(prefix) + (token,), psi))


def attention_score(model: AttentionModel, prefix: TokenSeq, token: int) -> float:
    """Single-step log P(token | prefix); token may be the eos id."""
    return float(model.posterior(tuple(prefix))[token])


class AttentionScorer:
    """Counts attention scoring steps; the search drivers accumulate the sum."""

    def __init__(self, model: AttentionModel):
        self.model = model
        self.calls = 0

    def step(self, prefix: TokenSeq, token: int) -> float:
        self.calls += 1
        return attention_score(self.model, prefix, token)
