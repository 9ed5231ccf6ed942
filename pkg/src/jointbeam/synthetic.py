"""Seeded construction of small synthetic model bundles.

Used for property testing and benchmarking without fixture files. Table
models draw Dirichlet-like rows from a numpy Generator; hash models only
need a seed. Everything is deterministic given the seed.
"""

from __future__ import annotations

import string

import numpy as np

from .core import UsageError, Vocabulary
from .models import (
    CtcGrid,
    HashAttention,
    HashTransducer,
    ModelBundle,
    TableAttention,
    TableTransducer,
)

DEFAULT_CONCENTRATION = 4.0


def letter_vocab(size: int) -> Vocabulary:
    """Vocabulary 'a', 'b', ... for sizes up to 26, then 'a1', 'b1', ..."""
    if size < 1:
        raise UsageError("vocabulary size must be >= 1")
    letters = string.ascii_lowercase
    labels = [letters[i % 26] + (str(i // 26) if i >= 26 else "") for i in range(size)]
    return Vocabulary(tuple(labels))


def _random_rows(rng: np.random.Generator, n: int, width: int,
                 floor: float = 0.0, floor_col: int | None = None) -> np.ndarray:
    rows = rng.dirichlet(np.ones(width), size=n)
    if floor > 0.0 and floor_col is not None:
        # Lift the floored column, renormalize the rest of the row.
        short = rows[:, floor_col] < floor
        if np.any(short):
            scale = (1.0 - floor) / (1.0 - rows[short, floor_col])
            rows[short] *= scale[:, None]
            rows[short, floor_col] = floor
    return rows


def random_ctc_grid(rng: np.random.Generator, frames: int, vocab: Vocabulary) -> CtcGrid:
    rows = _random_rows(rng, frames, vocab.size + 1)
    return CtcGrid.from_linear(rows, vocab)


def random_table_transducer(rng: np.random.Generator, vocab: Vocabulary,
                            frames: int, s_max: int) -> TableTransducer:
    rows = {}
    for t in range(frames):
        rows[(t, 0, None)] = _random_rows(rng, 1, vocab.size + 1)[0]
        for s in range(1, s_max + 1):
            for last in range(vocab.size):
                rows[(t, s, last)] = _random_rows(rng, 1, vocab.size + 1)[0]
    return TableTransducer(vocab, frames, s_max, rows)


def random_table_attention(rng: np.random.Generator, vocab: Vocabulary,
                           s_max: int, eos_floor: float = 0.01) -> TableAttention:
    """Random attention table; every row keeps at least eos_floor on eos."""
    width = vocab.size + 1
    rows = {(0, None): _random_rows(rng, 1, width, eos_floor, width - 1)[0]}
    for s in range(1, s_max + 1):
        for last in range(vocab.size):
            rows[(s, last)] = _random_rows(rng, 1, width, eos_floor, width - 1)[0]
    return TableAttention(vocab, s_max, rows)


def random_table_bundle(seed: int, frames: int, vocab_size: int,
                        s_max: int, eos_floor: float = 0.01) -> ModelBundle:
    """Fully table-backed bundle with all three model sections."""
    rng = np.random.default_rng(seed)
    vocab = letter_vocab(vocab_size)
    return ModelBundle(
        vocab=vocab,
        ctc_grid=random_ctc_grid(rng, frames, vocab),
        transducer=random_table_transducer(rng, vocab, frames, s_max),
        attention=random_table_attention(rng, vocab, s_max, eos_floor),
        frames=frames,
    )


def seeded_bundle(seed: int, frames: int, vocab_size: int,
                  concentration: float = DEFAULT_CONCENTRATION) -> ModelBundle:
    """Bundle with a random grid and hash transducer/attention models.

    Hash models condition on the full prefix, so this variant catches any
    accidental first-order-context assumption in the scorers.
    """
    if frames < 1:
        raise UsageError("frames must be >= 1")
    rng = np.random.default_rng(seed)
    vocab = letter_vocab(vocab_size)
    return ModelBundle(
        vocab=vocab,
        ctc_grid=random_ctc_grid(rng, frames, vocab),
        transducer=HashTransducer(vocab, seed, concentration, frames=frames),
        attention=HashAttention(vocab, seed + 1, concentration),
        frames=frames,
    )
