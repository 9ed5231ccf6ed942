"""Brute-force references: exhaustive path enumeration and joint argmax.

These run in linear-domain arithmetic on purpose so they share no numerics
with the log-domain scorers. Instance-size guards are hard errors; a silently
truncated reference would be worse than none.
"""

from __future__ import annotations

import itertools
import math
from math import comb

import numpy as np

from .core import (
    CTC,
    Alignment,
    DecoderWeights,
    GuardError,
    TokenSeq,
    UsageError,
    combine_scores,
    ctc_collapse,
)
from .models import CtcGrid, ModelBundle, TransducerModel

CTC_GUARD = 10**7
RNNT_GUARD = 10**6
JOINT_GUARD = 10**5


def _ctc_guard(grid: CtcGrid, vocab_size: int) -> None:
    count = (vocab_size + 1) ** grid.frames
    if count > CTC_GUARD:
        raise GuardError(
            f"ctc enumeration would visit {count} alignments (guard {CTC_GUARD})"
        )


def ctc_output_distribution(grid: CtcGrid, vocab_size: int) -> dict[TokenSeq, float]:
    """Exact output distribution of a grid by enumerating every alignment.

    Returns {output: probability}; the values sum to 1 because each alignment
    collapses to exactly one output.
    """
    _ctc_guard(grid, vocab_size)
    blank_id = vocab_size
    linear = grid.linear
    out: dict[TokenSeq, float] = {}
    for labels in itertools.product(range(vocab_size + 1), repeat=grid.frames):
        p = 1.0
        for t, lab in enumerate(labels):
            p *= linear[t, lab]
        y = ctc_collapse(Alignment(labels, CTC), blank_id)
        out[y] = out.get(y, 0.0) + p
    return out


def brute_force_ctc(grid: CtcGrid, target: TokenSeq, vocab_size: int) -> float:
    """P(output == target) by summing every alignment that collapses to it."""
    _ctc_guard(grid, vocab_size)
    blank_id = vocab_size
    if len(target) > grid.frames:
        return 0.0
    target = tuple(target)
    linear = grid.linear
    total = 0.0
    for labels in itertools.product(range(vocab_size + 1), repeat=grid.frames):
        if ctc_collapse(Alignment(labels, CTC), blank_id) != target:
            continue
        p = 1.0
        for t, lab in enumerate(labels):
            p *= linear[t, lab]
        total += p
    return total


def brute_force_rnnt(model: TransducerModel, target: TokenSeq, frames: int,
                     blank_id: int, _memo: dict | None = None) -> float:
    """P(output == target) by enumerating every transducer lattice path.

    A path interleaves len(target) emissions with exactly one blank per
    frame and always ends with the blank at the last frame. Paths are
    indexed by the n-th token's emission frame, nondecreasing in n.
    """
    S = len(target)
    paths = comb(frames + S, S)
    if paths > RNNT_GUARD:
        raise GuardError(
            f"rnnt enumeration would visit about {paths} paths (guard {RNNT_GUARD})"
        )
    target = tuple(target)
    rows = _memo if _memo is not None else {}

    def row(t: int, prefix: TokenSeq) -> np.ndarray:
        key = (t, prefix)
        hit = rows.get(key)
        if hit is None:
            hit = np.exp(model.posterior(t, prefix))
            rows[key] = hit
        return hit

    total = 0.0
    for emit_at in itertools.combinations_with_replacement(range(frames), S):
        p = 1.0
        emitted = 0
        for t in range(frames):
            while emitted < S and emit_at[emitted] == t:
                p *= float(row(t, target[:emitted])[target[emitted]])
                emitted += 1
            p *= float(row(t, target[:emitted])[blank_id])
        total += p
    return total


def _attention_complete(bundle: ModelBundle, target: TokenSeq) -> float:
    """P(target) under the attention model: stepwise product plus the eos step."""
    att = bundle.attention
    p = 1.0
    for s, tok in enumerate(target):
        p *= float(math.exp(att.posterior(target[:s])[tok]))
    p *= float(math.exp(att.posterior(target)[bundle.vocab.eos_id]))
    return p


def _all_outputs(vocab_size: int, max_output_len: int):
    for length in range(max_output_len + 1):
        yield from itertools.product(range(vocab_size), repeat=length)


def enumerate_joint_scores(bundle: ModelBundle, weights: DecoderWeights,
                           max_output_len: int):
    """Complete joint score of every output up to max_output_len.

    Yields (tokens, joint, ctc, rnnt, att) with inactive decoder scores None.
    Log conversion happens only at the very end of each candidate, so the
    probability arithmetic stays in linear domain throughout.
    """
    vocab = bundle.vocab
    count = sum(vocab.size**s for s in range(max_output_len + 1))
    if count > JOINT_GUARD:
        raise GuardError(
            f"joint enumeration would visit {count} candidates (guard {JOINT_GUARD})"
        )
    if weights.mu_ctc > 0 and bundle.ctc_grid is None:
        raise UsageError("nonzero ctc weight but the bundle has no ctc grid")
    if weights.mu_rnnt > 0 and (bundle.transducer is None or bundle.frames is None):
        raise UsageError("nonzero rnnt weight but the bundle has no transducer/frames")
    if weights.mu_att > 0 and bundle.attention is None:
        raise UsageError("nonzero attention weight but the bundle has no attention model")

    ctc_dist = None
    if weights.mu_ctc > 0:
        ctc_dist = ctc_output_distribution(bundle.ctc_grid, vocab.size)
    rnnt_memo: dict = {}

    def safe_log(p: float) -> float:
        return math.log(p) if p > 0.0 else float("-inf")

    for tokens in _all_outputs(vocab.size, max_output_len):
        a_ctc = a_rnnt = a_att = None
        if weights.mu_ctc > 0:
            a_ctc = safe_log(ctc_dist.get(tokens, 0.0))
        if weights.mu_rnnt > 0:
            a_rnnt = safe_log(
                brute_force_rnnt(bundle.transducer, tokens, bundle.frames,
                                 vocab.blank_id, _memo=rnnt_memo)
            )
        if weights.mu_att > 0:
            a_att = safe_log(_attention_complete(bundle, tokens))
        joint = combine_scores(a_ctc, a_rnnt, a_att, len(tokens), weights)
        yield tokens, joint, a_ctc, a_rnnt, a_att


def brute_force_best_joint(bundle: ModelBundle, weights: DecoderWeights,
                           max_output_len: int) -> tuple[TokenSeq, float]:
    """Argmax of the complete joint score over all outputs up to max_output_len.

    Ties break toward the lexicographically smaller token sequence, matching
    the search drivers.
    """
    best_tokens: TokenSeq | None = None
    best_joint = float("-inf")
    for tokens, joint, *_ in enumerate_joint_scores(bundle, weights, max_output_len):
        if joint > best_joint or (joint == best_joint and
                                  (best_tokens is None or tokens < best_tokens)):
            best_tokens, best_joint = tokens, joint
    assert best_tokens is not None
    return best_tokens, best_joint


def _default_check_len(bundle: ModelBundle) -> int:
    caps = [4]
    for m in (bundle.transducer, bundle.attention):
        if m is not None and m.s_max is not None:
            caps.append(m.s_max)
    return min(caps)


def run_checks(bundle: ModelBundle, max_len: int | None = None) -> dict:
    """Run every scorer-versus-enumeration agreement check the bundle allows.

    Returns {"checks": [{"name", "max_abs_err", "pass"}...]}; checks whose
    decoder section is absent are reported with "skipped": true. Raises
    GuardError if any applicable enumeration would exceed its guard.
    """
    from .scorers import CtcPrefixScorer, RnntPrefixScorer
    from .search import (
        ATTENTION_DRIVEN,
        CTC_DRIVEN,
        RNNT_DRIVEN,
        SearchConfig,
        run_search,
    )

    vocab = bundle.vocab
    if max_len is None:
        max_len = _default_check_len(bundle)
    checks: list[dict] = []

    def record(name: str, err: float, tol: float = 1e-9) -> None:
        checks.append({"name": name, "max_abs_err": err, "pass": bool(err <= tol)})

    def skip(name: str) -> None:
        checks.append({"name": name, "max_abs_err": None, "pass": None, "skipped": True})

    outputs = list(_all_outputs(vocab.size, max_len))

    if bundle.ctc_grid is not None:
        dist = ctc_output_distribution(bundle.ctc_grid, vocab.size)
        scorer = CtcPrefixScorer(bundle.ctc_grid, vocab.blank_id)
        caches = {(): scorer.init_cache()}
        err = 0.0
        for y in outputs:
            if y not in caches:
                caches[y] = scorer.score(y[:-1], y[-1], caches[y[:-1]]).cache
            complete = scorer.score(y, None, caches[y], eos=True).alpha
            err = max(err, abs(math.exp(complete) - dist.get(y, 0.0)))
        record("ctc_scorer_vs_enumeration", err)
        record("ctc_normalization", abs(sum(dist.values()) - 1.0))
    else:
        skip("ctc_scorer_vs_enumeration")
        skip("ctc_normalization")

    if bundle.transducer is not None and bundle.frames is not None:
        scorer = RnntPrefixScorer(bundle.transducer, bundle.frames, vocab.blank_id)
        caches = {(): scorer.init_cache()}
        memo: dict = {}
        err = 0.0
        partial = [0.0] * (max_len + 1)
        for y in outputs:
            if y not in caches:
                caches[y] = scorer.score(y[:-1], y[-1], caches[y[:-1]]).cache
            complete = scorer.score(y, None, caches[y], eos=True).alpha
            ref = brute_force_rnnt(bundle.transducer, y, bundle.frames,
                                   vocab.blank_id, _memo=memo)
            err = max(err, abs(math.exp(complete) - ref))
            partial[len(y)] += ref
        record("rnnt_scorer_vs_enumeration", err)
        cum = list(itertools.accumulate(partial))
        record("rnnt_partial_sums_bounded", max(0.0, max(cum) - 1.0))
    else:
        skip("rnnt_scorer_vs_enumeration")
        skip("rnnt_partial_sums_bounded")

    if bundle.attention is not None:
        att = bundle.attention
        err = 0.0
        if att.s_max is not None:
            contexts = [()] + [
                (last,) * min(s, att.s_max)
                for s in range(1, att.s_max + 1) for last in range(vocab.size)
            ]
        else:
            contexts = outputs[: 5 * (max_len + 1)]
        for ctx in contexts:
            row = np.exp(att.posterior(tuple(ctx)))
            err = max(err, abs(float(np.sum(row)) - 1.0))
        record("attention_rows_normalized", err)
    else:
        skip("attention_rows_normalized")

    available = {
        "ctc": bundle.ctc_grid is not None,
        "rnnt": bundle.transducer is not None and bundle.frames is not None,
        "att": bundle.attention is not None,
    }
    n_active = sum(available.values())
    weights = DecoderWeights(
        (1.0 / n_active) if available["ctc"] else 0.0,
        (1.0 / n_active) if available["rnnt"] else 0.0,
        (1.0 / n_active) if available["att"] else 0.0,
    ) if n_active else None
    exhaustive = sum(vocab.size**s for s in range(max_len + 1))

    for name, algorithm, ok in (
        ("exhaustive_att_driven_matches_oracle", ATTENTION_DRIVEN, available["att"]),
        ("exhaustive_ctc_driven_matches_oracle", CTC_DRIVEN, available["ctc"]),
        ("exhaustive_rnnt_driven_matches_oracle", RNNT_DRIVEN, available["rnnt"]),
    ):
        if not ok or weights is None:
            skip(name)
            continue
        ref_tokens, ref_joint = brute_force_best_joint(bundle, weights, max_len)
        cfg = SearchConfig(algorithm=algorithm, weights=weights,
                           k_beam=exhaustive, k_pre=exhaustive,
                           max_output_len=max_len)
        top = run_search(bundle, cfg).entries[0]
        err = abs(top.joint - ref_joint)
        if top.tokens != ref_tokens:
            checks.append({"name": name, "max_abs_err": err, "pass": False})
        else:
            record(name, err)

    return {"checks": checks}
