"""Shared domain types, log-space arithmetic, and collapse mappings.

Everything downstream (models, scorers, search drivers) works in natural-log
probabilities. log(0) is represented by the platform -inf, never by a finite
sentinel, and all arithmetic here is -inf safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

LOG_ZERO = float("-inf")

CTC = "ctc"
RNNT = "rnnt"


class UsageError(ValueError):
    """Caller violated a documented precondition (bad argument, bad flag)."""


class LoadError(ValueError):
    """A model file failed schema or normalization validation."""


class GuardError(RuntimeError):
    """A brute-force enumeration would exceed its instance-size guard."""


def log_add(a: float, b: float) -> float:
    """Stable log(exp(a) + exp(b)) for two values."""
    if a == LOG_ZERO:
        return b
    if b == LOG_ZERO:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def log_sum_exp(values: Iterable[float]) -> float:
    """Stable log(sum(exp(v) for v in values)).

    Returns -inf iff every input is -inf. An empty input is a usage error,
    not -inf: the caller almost certainly dropped a term.
    """
    vals = list(values)
    if not vals:
        raise UsageError("log_sum_exp requires at least one value")
    m = max(vals)
    if m == LOG_ZERO:
        return LOG_ZERO
    return m + math.log(sum(math.exp(v - m) for v in vals))


@dataclass(frozen=True)
class Vocabulary:
    """Token inventory with reserved blank and eos identities.

    Regular tokens occupy dense ids 0..len(tokens)-1. The blank id is
    len(tokens) and the eos id is len(tokens)+1; both are reserved and never
    appear inside a TokenSeq. Labels must be unique, non-empty, comma-free
    (they are embedded in table keys), and distinct from the reserved labels.
    """

    tokens: tuple[str, ...]
    blank_label: str = "<blk>"
    eos_label: str = "<eos>"

    def __post_init__(self):
        if not self.tokens:
            raise UsageError("vocabulary needs at least one regular token")
        seen = set()
        for lab in self.tokens:
            if not lab or "," in lab:
                raise UsageError(f"bad token label {lab!r}")
            if lab in seen:
                raise UsageError(f"duplicate token label {lab!r}")
            seen.add(lab)
        for reserved in (self.blank_label, self.eos_label, START_LABEL):
            if reserved in seen:
                raise UsageError(f"token label {reserved!r} collides with a reserved label")
        if self.blank_label == self.eos_label:
            raise UsageError("blank and eos labels must differ")

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def blank_id(self) -> int:
        return len(self.tokens)

    @property
    def eos_id(self) -> int:
        return len(self.tokens) + 1

    def label(self, token_id: int) -> str:
        if token_id == self.blank_id:
            return self.blank_label
        if token_id == self.eos_id:
            return self.eos_label
        return self.tokens[token_id]

    def token_id(self, label: str) -> int:
        try:
            return self.tokens.index(label)
        except ValueError:
            raise UsageError(f"unknown token label {label!r}") from None

    def to_json_dict(self) -> dict:
        return {"tokens": list(self.tokens), "blank": self.blank_label, "eos": self.eos_label}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Vocabulary":
        try:
            tokens = tuple(obj["tokens"])
        except (KeyError, TypeError) as exc:
            raise LoadError(f"vocab: missing or malformed 'tokens': {exc}") from None
        return cls(
            tokens=tokens,
            blank_label=obj.get("blank", "<blk>"),
            eos_label=obj.get("eos", "<eos>"),
        )


# Label used in table-model keys for the empty-prefix context.
START_LABEL = "<s>"

# A token prefix: regular token ids only, never blank or eos.
TokenSeq = tuple[int, ...]


def validate_token_seq(seq: Sequence[int], vocab: Vocabulary) -> TokenSeq:
    """Check that seq holds only regular token ids and return it as a tuple."""
    out = tuple(int(t) for t in seq)
    for t in out:
        if not 0 <= t < vocab.size:
            raise UsageError(f"token id {t} outside the regular vocabulary")
    return out


@dataclass(frozen=True)
class Alignment:
    """A frame-level label sequence over the vocabulary plus blank.

    kind "ctc" paths have one label per input frame; kind "rnnt" paths
    interleave token emissions with exactly one blank per frame, so their
    length is frames + emitted tokens.
    """

    labels: tuple[int, ...]
    kind: str

    def __post_init__(self):
        if self.kind not in (CTC, RNNT):
            raise UsageError(f"alignment kind must be 'ctc' or 'rnnt', got {self.kind!r}")


def ctc_collapse(alignment: Alignment, blank_id: int) -> TokenSeq:
    """Map a CTC path to its output: merge repeated-label runs, drop blanks.

    Blanks break runs, so [a, a, blank, a] collapses to [a, a].
    """
    if alignment.kind != CTC:
        raise UsageError(f"ctc_collapse needs a ctc alignment, got kind {alignment.kind!r}")
    out = []
    prev = None
    for lab in alignment.labels:
        if lab != prev and lab != blank_id:
            out.append(lab)
        prev = lab
    return tuple(out)


def rnnt_collapse(alignment: Alignment, blank_id: int) -> TokenSeq:
    """Map a transducer path to its output: drop blanks, keep repeats."""
    if alignment.kind != RNNT:
        raise UsageError(f"rnnt_collapse needs an rnnt alignment, got kind {alignment.kind!r}")
    return tuple(lab for lab in alignment.labels if lab != blank_id)


@dataclass(frozen=True)
class DecoderWeights:
    """Per-decoder mixing weights plus an additive length penalty.

    All weights are nonnegative and at least one must be positive. beta is
    added once per emitted token at joint-scoring time.
    """

    mu_ctc: float
    mu_rnnt: float
    mu_att: float
    beta: float = 0.0

    def __post_init__(self):
        mus = (self.mu_ctc, self.mu_rnnt, self.mu_att)
        if any(m < 0 for m in mus):
            raise UsageError(f"decoder weights must be nonnegative, got {mus}")
        if not any(m > 0 for m in mus):
            raise UsageError("at least one decoder weight must be positive")


@dataclass(frozen=True)
class Hypothesis:
    """A token prefix with its per-decoder scores and combined score.

    Scores for inactive decoders (weight zero) are None. `caches` holds the
    per-scorer incremental state keyed by scorer name; each cache corresponds
    to exactly this prefix. `complete` marks hypotheses whose eos step has
    been taken (or whose time axis is exhausted).
    """

    prefix: TokenSeq
    joint: float
    score_ctc: float | None = None
    score_rnnt: float | None = None
    score_att: float | None = None
    caches: Mapping[str, object] = field(default_factory=dict)
    complete: bool = False


def combine_scores(
    score_ctc: float | None,
    score_rnnt: float | None,
    score_att: float | None,
    prefix_len: int,
    weights: DecoderWeights,
) -> float:
    """Weighted sum of decoder scores plus the length penalty.

    Zero-weight decoders contribute nothing and their score may be None;
    a nonzero weight with a missing score is a usage error.
    """
    total = weights.beta * prefix_len
    for mu, score, name in (
        (weights.mu_ctc, score_ctc, "ctc"),
        (weights.mu_rnnt, score_rnnt, "rnnt"),
        (weights.mu_att, score_att, "att"),
    ):
        if mu == 0.0:
            continue
        if score is None:
            raise UsageError(f"weight for {name} is nonzero but its score is missing")
        total += mu * score
    return total


def joint_score(hyp: Hypothesis, weights: DecoderWeights) -> float:
    """Recompute the combined score of a hypothesis from its parts."""
    return combine_scores(
        hyp.score_ctc, hyp.score_rnnt, hyp.score_att, len(hyp.prefix), weights
    )


def compute_stage2_weights(epochs: Sequence[float]) -> tuple[float, float, float, float]:
    """Second-stage training weights from first-stage convergence epochs.

    Each weight is the decoder's best-validation epoch divided by the total,
    so slower-converging losses get proportionally more weight and the four
    outputs sum to 1.
    """
    if len(epochs) != 4:
        raise UsageError(f"expected 4 epoch counts, got {len(epochs)}")
    vals = [float(e) for e in epochs]
    if any(e <= 0 for e in vals):
        raise UsageError(f"epoch counts must be positive, got {tuple(epochs)}")
    total = sum(vals)
    w = tuple(e / total for e in vals)
    return w  # type: ignore[return-value]
