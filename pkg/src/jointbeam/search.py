"""Joint beam-search drivers: attention-, CTC-, and RNN-T-driven.

All three share the same skeleton: the primary decoder expands hypotheses,
the other active decoders rescore every candidate prefix, the weighted joint
score prunes to the main beam. They differ in the expansion axis: the
attention-driven driver advances one output label at a time, the other two
advance one input frame at a time.

Pruning is deterministic: equal joint scores order by lexicographic token
sequence, and top-k candidate selection breaks ties toward lower token ids.
Decoders with weight zero are never scored, so zeroing a weight reproduces
the corresponding two- or one-decoder search bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    LOG_ZERO,
    DecoderWeights,
    Hypothesis,
    TokenSeq,
    UsageError,
    combine_scores,
    log_add,
)
from .models import ModelBundle
from .scorers import AttentionScorer, CtcPrefixScorer, RnntPrefixScorer

ATTENTION_DRIVEN = "attention_driven"
CTC_DRIVEN = "ctc_driven"
RNNT_DRIVEN = "rnnt_driven"
ALGORITHMS = (ATTENTION_DRIVEN, CTC_DRIVEN, RNNT_DRIVEN)

# Decoder weight presets as (mu_ctc, mu_rnnt, mu_att). The source experiments
# list the triples in one order and the algorithms in another; these names
# make the binding explicit instead of guessing.
WEIGHT_PRESETS = {
    "att-driven-default": DecoderWeights(0.3, 0.3, 0.4),
    "ctc-driven-default": DecoderWeights(0.1, 0.4, 0.5),
    "rnnt-driven-default": DecoderWeights(0.1, 0.4, 0.5),
}

DEFAULT_PRESET = {
    ATTENTION_DRIVEN: "att-driven-default",
    CTC_DRIVEN: "ctc-driven-default",
    RNNT_DRIVEN: "rnnt-driven-default",
}


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of one search run.

    k_pre bounds per-hypothesis expansion before joint scoring and must be at
    least k_beam, the post-scoring beam width (equality is allowed for
    ablations). max_output_len defaults to twice the frame count for the
    label-synchronous driver and to the frame count for the time-synchronous
    ones, clamped by any table model's context bound.
    """

    algorithm: str
    weights: DecoderWeights
    k_beam: int
    k_pre: int | None = None
    max_output_len: int | None = None
    n_best: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.k_beam < 1:
            raise UsageError(f"k_beam must be >= 1, got {self.k_beam}")
        if self.k_pre is not None and self.k_pre < self.k_beam:
            raise UsageError(f"k_pre ({self.k_pre}) must be >= k_beam ({self.k_beam})")
        if self.n_best < 1:
            raise UsageError(f"n_best must be >= 1, got {self.n_best}")
        if self.max_output_len is not None and self.max_output_len < 0:
            raise UsageError("max_output_len must be >= 0")

    @property
    def prebeam(self) -> int:
        return self.k_beam if self.k_pre is None else self.k_pre


@dataclass(frozen=True)
class NBestEntry:
    tokens: TokenSeq
    joint: float
    ctc: float | None = None
    rnnt: float | None = None
    att: float | None = None


@dataclass(frozen=True)
class NBestList:
    """Completed hypotheses sorted by joint score, best first.

    Ties order by lexicographic token sequence and no token sequence appears
    twice. Scores of inactive decoders are None (JSON null).
    """

    entries: tuple[NBestEntry, ...]

    def __post_init__(self):
        seen = set()
        prev = None
        for e in self.entries:
            if e.tokens in seen:
                raise ValueError(f"duplicate token sequence {e.tokens} in n-best list")
            seen.add(e.tokens)
            key = (-e.joint, e.tokens)
            if prev is not None and key < prev:
                raise ValueError("n-best list is not sorted")
            prev = key

    def to_json(self) -> str:
        rows = [
            {"tokens": list(e.tokens), "joint": e.joint, "ctc": e.ctc,
             "rnnt": e.rnnt, "att": e.att}
            for e in self.entries
        ]
        return json.dumps(rows, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NBestList":
        rows = json.loads(text)
        return cls(tuple(
            NBestEntry(tokens=tuple(r["tokens"]), joint=r["joint"], ctc=r.get("ctc"),
                       rnnt=r.get("rnnt"), att=r.get("att"))
            for r in rows
        ))


@dataclass
class SearchStats:
    """Scoring-call counters, one per decoder.

    Counts rescoring invocations only; reading the primary decoder's model to
    expand hypotheses is not a scoring call. A decoder with weight zero must
    end a search with a zero counter.
    """

    ctc_calls: int = 0
    rnnt_calls: int = 0
    att_calls: int = 0


def _topk_ids(row: np.ndarray, ids: list[int], k: int) -> list[int]:
    """Top-k of the given ids by row value, ties toward the earlier id."""
    if k >= len(ids):
        return list(ids)
    vals = np.asarray([row[i] for i in ids])
    order = np.argsort(-vals, kind="stable")
    return [ids[int(j)] for j in order[:k]]


def _resolve_max_output_len(bundle: ModelBundle, cfg: SearchConfig) -> int:
    caps = []
    if cfg.max_output_len is not None:
        caps.append(cfg.max_output_len)
    elif bundle.frames is not None:
        caps.append(2 * bundle.frames if cfg.algorithm == ATTENTION_DRIVEN else bundle.frames)
    w = cfg.weights
    if cfg.algorithm == ATTENTION_DRIVEN or w.mu_att > 0:
        if bundle.attention is not None and bundle.attention.s_max is not None:
            caps.append(bundle.attention.s_max)
    if cfg.algorithm == RNNT_DRIVEN or w.mu_rnnt > 0:
        if bundle.transducer is not None and bundle.transducer.s_max is not None:
            caps.append(bundle.transducer.s_max)
    if not caps:
        raise UsageError("cannot infer max_output_len for this bundle; set it explicitly")
    return min(caps)


def _require(bundle: ModelBundle, cfg: SearchConfig) -> None:
    w = cfg.weights
    if cfg.algorithm == ATTENTION_DRIVEN and bundle.attention is None:
        raise UsageError("attention-driven search needs an attention model")
    if cfg.algorithm == CTC_DRIVEN and bundle.ctc_grid is None:
        raise UsageError("ctc-driven search needs a ctc grid")
    if cfg.algorithm == RNNT_DRIVEN and (bundle.transducer is None or bundle.frames is None):
        raise UsageError("rnnt-driven search needs a transducer model with a frame count")
    if w.mu_ctc > 0 and bundle.ctc_grid is None:
        raise UsageError("nonzero ctc weight but the bundle has no ctc grid")
    if w.mu_rnnt > 0 and (bundle.transducer is None or bundle.frames is None):
        raise UsageError("nonzero rnnt weight but the bundle has no transducer/frames")
    if w.mu_att > 0 and bundle.attention is None:
        raise UsageError("nonzero attention weight but the bundle has no attention model")


class _SecondaryScores:
    """Per-prefix scores from the rescoring decoders, extended lazily.

    Every score is a pure function of the prefix, so each prefix is computed
    exactly once from its parent, no matter which expansion path reached it
    first. Entries are (ctc_alpha, ctc_cache, rnnt_alpha, rnnt_cache,
    att_alpha) with None for decoders this search does not rescore.
    """

    def __init__(self, ctc: CtcPrefixScorer | None, rnnt: RnntPrefixScorer | None,
                 att: AttentionScorer | None, eos_id: int):
        self.ctc = ctc
        self.rnnt = rnnt
        self.att = att
        self.eos_id = eos_id
        self._entries: dict[TokenSeq, tuple] = {
            (): (
                0.0 if ctc else None, ctc.init_cache() if ctc else None,
                0.0 if rnnt else None, rnnt.init_cache() if rnnt else None,
                0.0 if att else None,
            )
        }

    def entry(self, prefix: TokenSeq) -> tuple:
        known = self._entries.get(prefix)
        if known is not None:
            return known
        # Walk up to the deepest known ancestor, then extend back down.
        depth = len(prefix)
        while prefix[:depth] not in self._entries:
            depth -= 1
        ent = self._entries[prefix[:depth]]
        for i in range(depth, len(prefix)):
            parent, tok = prefix[:i], prefix[i]
            ca, cc, ra, rc, aa = ent
            if self.ctc:
                res = self.ctc.score(parent, tok, cc)
                ca, cc = res.alpha, res.cache
            if self.rnnt:
                res = self.rnnt.score(parent, tok, rc)
                ra, rc = res.alpha, res.cache
            if self.att:
                aa = aa + self.att.step(parent, tok)
            ent = (ca, cc, ra, rc, aa)
            self._entries[parent + (tok,)] = ent
        return ent

    def alphas(self, prefix: TokenSeq) -> tuple[float | None, float | None, float | None]:
        ca, _, ra, _, aa = self.entry(prefix)
        return ca, ra, aa

    def completions(self, prefix: TokenSeq) -> tuple[float | None, float | None, float | None]:
        """Complete-sequence scores: end-of-sequence step for each decoder."""
        ca, cc, ra, rc, aa = self.entry(prefix)
        ctc_c = self.ctc.score(prefix, None, cc, eos=True).alpha if self.ctc else None
        rnnt_c = self.rnnt.score(prefix, None, rc, eos=True).alpha if self.rnnt else None
        att_c = aa + self.att.step(prefix, self.eos_id) if self.att else None
        return ctc_c, rnnt_c, att_c


def _fill_stats(stats: SearchStats | None, ctc: CtcPrefixScorer | None,
                rnnt: RnntPrefixScorer | None, att_calls: int) -> None:
    if stats is None:
        return
    stats.ctc_calls = ctc.calls if ctc else 0
    stats.rnnt_calls = rnnt.calls if rnnt else 0
    stats.att_calls = att_calls


def _nbest(completed: list[NBestEntry], n_best: int) -> NBestList:
    completed.sort(key=lambda e: (-e.joint, e.tokens))
    return NBestList(tuple(completed[:n_best]))


def attention_driven_search(bundle: ModelBundle, cfg: SearchConfig,
                            stats: SearchStats | None = None) -> NBestList:
    """Label-synchronous joint search led by the attention decoder.

    Each live hypothesis proposes its top-k_pre next labels (eos included;
    only eos once the length cap is reached). Every extension is rescored by
    the active CTC/RNN-T prefix scorers and combined into the joint score.
    Extensions by eos are complete and leave the beam; the rest compete for
    the k_beam live slots of the next label step.
    """
    _require(bundle, cfg)
    w = cfg.weights
    vocab = bundle.vocab
    max_len = _resolve_max_output_len(bundle, cfg)

    ctc_sc = CtcPrefixScorer(bundle.ctc_grid, vocab.blank_id) if w.mu_ctc > 0 else None
    rnnt_sc = (RnntPrefixScorer(bundle.transducer, bundle.frames, vocab.blank_id)
               if w.mu_rnnt > 0 else None)
    secondary = _SecondaryScores(ctc_sc, rnnt_sc, None, vocab.eos_id)
    att_model = bundle.attention
    att_calls = 0

    def make_hyp(prefix: TokenSeq, att_alpha: float | None, complete: bool) -> Hypothesis:
        if complete:
            s_ctc, s_rnnt, _ = secondary.completions(prefix)
        else:
            s_ctc, s_rnnt, _ = secondary.alphas(prefix)
        s_att = att_alpha if w.mu_att > 0 else None
        joint = combine_scores(s_ctc, s_rnnt, s_att, len(prefix), w)
        return Hypothesis(prefix=prefix, joint=joint, score_ctc=s_ctc,
                          score_rnnt=s_rnnt, score_att=s_att, complete=complete)

    candidate_ids = list(range(vocab.size)) + [vocab.eos_id]
    # Live entries carry the raw attention score alongside the hypothesis:
    # the primary decoder ranks its own continuations even when mu_att is 0.
    live: list[tuple[TokenSeq, float]] = [((), 0.0)]
    completed: list[NBestEntry] = []

    while live:
        extensions: list[tuple[Hypothesis, float]] = []
        for prefix, att_alpha in live:
            row = att_model.posterior(prefix)
            if len(prefix) >= max_len:
                picks = [vocab.eos_id]
            else:
                picks = _topk_ids(row, candidate_ids, cfg.prebeam)
            for tok in picks:
                if w.mu_att > 0:
                    att_calls += 1
                child_alpha = att_alpha + float(row[tok])
                if tok == vocab.eos_id:
                    hyp = make_hyp(prefix, child_alpha, complete=True)
                    completed.append(NBestEntry(
                        tokens=prefix, joint=hyp.joint, ctc=hyp.score_ctc,
                        rnnt=hyp.score_rnnt, att=hyp.score_att,
                    ))
                else:
                    child = make_hyp(prefix + (tok,), child_alpha, complete=False)
                    extensions.append((child, child_alpha))

        extensions.sort(key=lambda e: (-e[0].joint, e[0].prefix))
        live = [(h.prefix, alpha) for h, alpha in extensions[:cfg.k_beam]]

    _fill_stats(stats, ctc_sc, rnnt_sc, att_calls)
    return _nbest(completed, cfg.n_best)


def ctc_driven_search(bundle: ModelBundle, cfg: SearchConfig,
                      stats: SearchStats | None = None) -> NBestList:
    """Time-synchronous joint search led by the CTC decoder.

    Each frame runs one collapse-aware prefix-expansion step: blank and
    repeated labels feed the same prefix, fresh labels spawn extensions, and
    duplicate prefixes merge by probability sum, so the live beam never holds
    the same prefix twice. Extended prefixes are rescored by the attention
    and RNN-T decoders (scores are prefix functions, so unchanged prefixes
    keep their cached values) and the joint score prunes to k_beam. After the
    final frame the survivors are completed with each decoder's
    end-of-sequence score.
    """
    _require(bundle, cfg)
    w = cfg.weights
    vocab = bundle.vocab
    grid = bundle.ctc_grid
    max_len = _resolve_max_output_len(bundle, cfg)

    rnnt_sc = (RnntPrefixScorer(bundle.transducer, bundle.frames, vocab.blank_id)
               if w.mu_rnnt > 0 else None)
    att_sc = AttentionScorer(bundle.attention) if w.mu_att > 0 else None
    secondary = _SecondaryScores(None, rnnt_sc, att_sc, vocab.eos_id)

    blank = vocab.blank_id
    token_ids = list(range(vocab.size))
    live: dict[TokenSeq, tuple[float, float]] = {(): (0.0, LOG_ZERO)}  # (p_blank, p_token)

    def joint_of(prefix: TokenSeq, pb: float, pnb: float) -> float:
        s_ctc = log_add(pb, pnb) if w.mu_ctc > 0 else None
        _, s_rnnt, s_att = secondary.alphas(prefix) if (rnnt_sc or att_sc) else (None, None, None)
        return combine_scores(s_ctc, s_rnnt, s_att, len(prefix), w)

    for t in range(grid.frames):
        row = grid.row(t)
        p_blank = float(row[blank])
        picks = _topk_ids(row, token_ids, cfg.prebeam)
        merged: dict[TokenSeq, list[float]] = {}

        def acc(prefix: TokenSeq, d_pb: float, d_pnb: float):
            slot = merged.get(prefix)
            if slot is None:
                merged[prefix] = [d_pb, d_pnb]
            else:
                slot[0] = log_add(slot[0], d_pb)
                slot[1] = log_add(slot[1], d_pnb)

        for prefix, (pb, pnb) in live.items():
            total = log_add(pb, pnb)
            acc(prefix, total + p_blank, LOG_ZERO)
            last = prefix[-1] if prefix else None
            for tok in picks:
                p_tok = float(row[tok])
                if tok == last:
                    # Same label again extends the run; only a blank gap
                    # starts a second copy of the token.
                    acc(prefix, LOG_ZERO, pnb + p_tok)
                    if len(prefix) < max_len:
                        acc(prefix + (tok,), LOG_ZERO, pb + p_tok)
                elif len(prefix) < max_len:
                    acc(prefix + (tok,), LOG_ZERO, total + p_tok)

        scored = [
            (joint_of(prefix, pb, pnb), prefix, pb, pnb)
            for prefix, (pb, pnb) in merged.items()
        ]
        scored.sort(key=lambda s: (-s[0], s[1]))
        live = {prefix: (pb, pnb) for _, prefix, pb, pnb in scored[:cfg.k_beam]}

    completed = []
    for prefix, (pb, pnb) in live.items():
        ctc_complete = log_add(pb, pnb)
        _, rnnt_c, att_c = secondary.completions(prefix) if (rnnt_sc or att_sc) else (None, None, None)
        s_ctc = ctc_complete if w.mu_ctc > 0 else None
        joint = combine_scores(s_ctc, rnnt_c, att_c, len(prefix), w)
        completed.append(NBestEntry(tokens=prefix, joint=joint, ctc=s_ctc,
                                    rnnt=rnnt_c, att=att_c))

    _fill_stats(stats, None, rnnt_sc, att_sc.calls if att_sc else 0)
    return _nbest(completed, cfg.n_best)


def rnnt_driven_search(bundle: ModelBundle, cfg: SearchConfig,
                       stats: SearchStats | None = None) -> NBestList:
    """Time-synchronous joint search led by the transducer decoder.

    At each frame a hypothesis may emit any number of tokens (staying on the
    frame, capped by the length bound) before taking the blank that advances
    to the next frame. Emission chains are processed in prefix-length layers
    so that probability mass merges at each lattice node exactly once; every
    layer keeps at most k_pre prefixes and each prefix proposes its top-k_pre
    tokens. Prefixes that took the blank are rescored by the CTC prefix
    scorer (on the blank-free token sequence) and the attention decoder, and
    pruned to k_beam by joint score. Taking the blank at the last frame
    completes a hypothesis, so after the final frame the accumulated masses
    are complete-sequence probabilities.
    """
    _require(bundle, cfg)
    w = cfg.weights
    vocab = bundle.vocab
    tdx = bundle.transducer
    frames = bundle.frames
    max_len = _resolve_max_output_len(bundle, cfg)

    ctc_sc = CtcPrefixScorer(bundle.ctc_grid, vocab.blank_id) if w.mu_ctc > 0 else None
    att_sc = AttentionScorer(bundle.attention) if w.mu_att > 0 else None
    secondary = _SecondaryScores(ctc_sc, None, att_sc, vocab.eos_id)

    blank = vocab.blank_id
    token_ids = list(range(vocab.size))
    live: dict[TokenSeq, float] = {(): 0.0}

    for t in range(frames):
        layers: dict[int, dict[TokenSeq, float]] = {}
        for prefix, mass in live.items():
            layers.setdefault(len(prefix), {})[prefix] = mass
        advanced: dict[TokenSeq, float] = {}

        for length in range(min(layers), max_len + 1):
            layer = layers.pop(length, None)
            if not layer:
                continue
            entries = sorted(layer.items(), key=lambda kv: (-kv[1], kv[0]))[:cfg.prebeam]
            for prefix, mass in entries:
                row = tdx.posterior(t, prefix)
                advanced[prefix] = mass + float(row[blank])
                if length < max_len:
                    nxt = layers.setdefault(length + 1, {})
                    for tok in _topk_ids(row, token_ids, cfg.prebeam):
                        child = prefix + (tok,)
                        gain = mass + float(row[tok])
                        prev = nxt.get(child)
                        nxt[child] = gain if prev is None else log_add(prev, gain)

        scored = []
        for prefix, mass in advanced.items():
            s_ctc, _, s_att = secondary.alphas(prefix) if (ctc_sc or att_sc) else (None, None, None)
            s_rnnt = mass if w.mu_rnnt > 0 else None
            joint = combine_scores(s_ctc, s_rnnt, s_att, len(prefix), w)
            scored.append((joint, prefix, mass))
        scored.sort(key=lambda s: (-s[0], s[1]))
        live = {prefix: mass for _, prefix, mass in scored[:cfg.k_beam]}

    completed = []
    for prefix, mass in live.items():
        ctc_c, _, att_c = secondary.completions(prefix) if (ctc_sc or att_sc) else (None, None, None)
        s_rnnt = mass if w.mu_rnnt > 0 else None
        joint = combine_scores(ctc_c, s_rnnt, att_c, len(prefix), w)
        completed.append(NBestEntry(tokens=prefix, joint=joint, ctc=ctc_c,
                                    rnnt=s_rnnt, att=att_c))

    _fill_stats(stats, ctc_sc, None, att_sc.calls if att_sc else 0)
    return _nbest(completed, cfg.n_best)


_DRIVERS = {
    ATTENTION_DRIVEN: attention_driven_search,
    CTC_DRIVEN: ctc_driven_search,
    RNNT_DRIVEN: rnnt_driven_search,
}


def run_search(bundle: ModelBundle, cfg: SearchConfig,
               stats: SearchStats | None = None) -> NBestList:
    """Run the driver selected by cfg.algorithm."""
    return _DRIVERS[cfg.algorithm](bundle, cfg, stats)
