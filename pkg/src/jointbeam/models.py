"""Deterministic toy posterior providers standing in for neural decoders.

Every model here is a pure function from a query to a normalized conditional
distribution, so decodes are exactly reproducible. Two flavours exist:

* table models read linear probabilities from a JSON bundle and are validated
  row by row at load;
* hash models derive a distribution from a seed and the full query context
  via FNV-1a, giving unbounded-context conditionals without fixture files.

Array conventions: CTC and transducer distributions have width |V|+1 indexed
by token id with blank last (index == vocab.blank_id). Attention
distributions have width |V|+2 indexed by token id with a permanently
impossible blank slot and eos last (index == vocab.eos_id). Frame indices
are 0-based everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    LOG_ZERO,
    START_LABEL,
    LoadError,
    TokenSeq,
    UsageError,
    Vocabulary,
)

ROW_SUM_TOL = 1e-9

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h


def _hash_unit(tag: bytes, seed: int, context: tuple[int, ...], candidate: int) -> float:
    """Deterministic value in [0, 1) from (tag, seed, context, candidate).

    Everything is encoded little-endian as 8-byte words with an explicit
    context-length prefix, so distinct queries never share an encoding. The
    candidate id is absorbed first: appended last it would only perturb the
    final state linearly, and softmax would cancel that shift whenever two
    context hashes agree in their low bits.
    """
    parts = [tag, int(candidate).to_bytes(8, "little"),
             seed.to_bytes(8, "little", signed=False),
             len(context).to_bytes(8, "little")]
    for v in context:
        parts.append(int(v).to_bytes(8, "little"))
    return fnv1a_64(b"".join(parts)) / 2.0**64


def _softmax_log(logits: np.ndarray) -> np.ndarray:
    m = float(np.max(logits))
    shifted = logits - m
    return shifted - math.log(float(np.sum(np.exp(shifted))))


def _check_linear_row(row: np.ndarray, width: int, where: str) -> None:
    if row.shape != (width,):
        raise LoadError(f"{where}: expected {width} probabilities, got {row.shape[0]}")
    if np.any(row < 0.0):
        raise LoadError(f"{where}: negative probability")
    s = float(np.sum(row))
    if abs(s - 1.0) > ROW_SUM_TOL:
        raise LoadError(f"{where}: row sums to {s!r}, not 1")


def _log_rows(linear: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = np.log(linear)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class CtcGrid:
    """Frame-posterior table: row t is log P(label | frame t) over V + blank.

    Stands in for the encoder output consumed by a linear CTC head; the grid's
    time axis is the utterance's time axis.
    """

    linear: np.ndarray
    log_probs: np.ndarray

    @classmethod
    def from_linear(cls, rows, vocab: Vocabulary, validate: bool = True) -> "CtcGrid":
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise LoadError("ctc_grid: expected a non-empty 2-D array")
        if validate:
            for t in range(arr.shape[0]):
                _check_linear_row(arr[t], vocab.size + 1, f"ctc_grid row {t}")
        arr.flags.writeable = False
        return cls(linear=arr, log_probs=_log_rows(arr))

    @property
    def frames(self) -> int:
        return self.log_probs.shape[0]

    def row(self, t: int) -> np.ndarray:
        """Log distribution at frame t (0-based)."""
        if not 0 <= t < self.frames:
            raise UsageError(f"frame {t} outside [0, {self.frames})")
        return self.log_probs[t]


class TableTransducer:
    """Transducer conditionals keyed by (frame, prefix length, last token).

    A first-order context keeps fixtures small; the hash variant supplies
    full-prefix dependence. Rows cover every frame, every prefix length up
    to s_max, and every possible last token, which is validated at load.
    """

    kind = "table"

    def __init__(self, vocab: Vocabulary, frames: int, s_max: int,
                 linear_rows: dict[tuple[int, int, int | None], np.ndarray],
                 validate: bool = True):
        self.vocab = vocab
        self.frames = frames
        self.s_max = s_max
        self._linear = {}
        self._log = {}
        width = vocab.size + 1
        for key in self._expected_keys():
            if key not in linear_rows:
                t, s, last = key
                raise LoadError(f"transducer: missing row for t={t}, s={s}, last={last}")
        for key, row in linear_rows.items():
            arr = np.asarray(row, dtype=np.float64)
            if validate:
                t, s, last = key
                _check_linear_row(arr, width, f"transducer row t={t},s={s},last={last}")
            arr.flags.writeable = False
            self._linear[key] = arr
            self._log[key] = _log_rows(np.array(arr))

    def _expected_keys(self):
        for t in range(self.frames):
            yield (t, 0, None)
            for s in range(1, self.s_max + 1):
                for last in range(self.vocab.size):
                    yield (t, s, last)

    def posterior(self, t: int, prefix: TokenSeq) -> np.ndarray:
        """Log distribution over V + blank at frame t given the prefix."""
        if not 0 <= t < self.frames:
            raise UsageError(f"frame {t} outside [0, {self.frames})")
        if len(prefix) > self.s_max:
            raise UsageError(f"prefix length {len(prefix)} exceeds table s_max {self.s_max}")
        last = prefix[-1] if prefix else None
        return self._log[(t, len(prefix), last)]

    def to_json_dict(self) -> dict:
        rows = {}
        for (t, s, last), arr in self._linear.items():
            label = START_LABEL if last is None else self.vocab.label(last)
            rows[f"{t},{s},{label}"] = arr.tolist()
        return {"kind": "table", "frames": self.frames, "s_max": self.s_max, "rows": rows}


class HashTransducer:
    """Seeded transducer conditionals depending on the entire prefix.

    Logits are concentration-scaled unit hashes of (seed, frame, prefix,
    candidate), softmax-normalized. The same query always yields the same
    distribution.
    """

    kind = "hash"

    def __init__(self, vocab: Vocabulary, seed: int, concentration: float,
                 frames: int | None = None):
        if concentration <= 0:
            raise LoadError(f"transducer: concentration must be positive, got {concentration}")
        self.vocab = vocab
        self.seed = int(seed)
        self.concentration = float(concentration)
        self.frames = frames
        self.s_max = None
        self._cache: dict[tuple[int, TokenSeq], np.ndarray] = {}

    def posterior(self, t: int, prefix: TokenSeq) -> np.ndarray:
        if self.frames is not None and not 0 <= t < self.frames:
            raise UsageError(f"frame {t} outside [0, {self.frames})")
        if t < 0:
            raise UsageError(f"frame {t} is negative")
        key = (t, tuple(prefix))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        context = (t,) + key[1]
        n = self.vocab.size + 1
        logits = np.empty(n)
        for c in range(n):
            logits[c] = self.concentration * _hash_unit(b"T", self.seed, context, c)
        row = _softmax_log(logits)
        row.flags.writeable = False
        self._cache[key] = row
        return row

    def to_json_dict(self) -> dict:
        out = {"kind": "hash", "seed": self.seed, "concentration": self.concentration}
        if self.frames is not None:
            out["frames"] = self.frames
        return out


class TableAttention:
    """Autoregressive next-token conditionals keyed by (length, last token).

    Rows are over V + eos; eos must carry strictly positive probability in
    every context so label-synchronous search can terminate.
    """

    kind = "table"

    def __init__(self, vocab: Vocabulary, s_max: int,
                 linear_rows: dict[tuple[int, int | None], np.ndarray],
                 validate: bool = True):
        self.vocab = vocab
        self.s_max = s_max
        self._linear = {}
        self._log = {}
        width = vocab.size + 1
        for key in self._expected_keys():
            if key not in linear_rows:
                s, last = key
                raise LoadError(f"attention: missing row for s={s}, last={last}")
        for key, row in linear_rows.items():
            arr = np.asarray(row, dtype=np.float64)
            if validate:
                s, last = key
                _check_linear_row(arr, width, f"attention row s={s},last={last}")
                if arr[-1] <= 0.0:
                    raise LoadError(f"attention row s={s},last={last}: eos probability is 0")
            arr.flags.writeable = False
            self._linear[key] = arr
            padded = np.concatenate([arr[:-1], [0.0], arr[-1:]])
            self._log[key] = _log_rows(padded)

    def _expected_keys(self):
        yield (0, None)
        for s in range(1, self.s_max + 1):
            for last in range(self.vocab.size):
                yield (s, last)

    def posterior(self, prefix: TokenSeq) -> np.ndarray:
        """Log distribution over V + eos given the prefix (blank slot is -inf)."""
        if len(prefix) > self.s_max:
            raise UsageError(f"prefix length {len(prefix)} exceeds table s_max {self.s_max}")
        last = prefix[-1] if prefix else None
        return self._log[(len(prefix), last)]

    def eos_floor(self) -> float:
        """Smallest eos probability over all table rows."""
        return min(float(arr[-1]) for arr in self._linear.values())

    def to_json_dict(self) -> dict:
        rows = {}
        for (s, last), arr in self._linear.items():
            label = START_LABEL if last is None else self.vocab.label(last)
            rows[f"{s},{label}"] = arr.tolist()
        return {"kind": "table", "s_max": self.s_max, "rows": rows}


class HashAttention:
    """Seeded autoregressive conditionals over V + eos, full-prefix context."""

    kind = "hash"

    def __init__(self, vocab: Vocabulary, seed: int, concentration: float):
        if concentration <= 0:
            raise LoadError(f"attention: concentration must be positive, got {concentration}")
        self.vocab = vocab
        self.seed = int(seed)
        self.concentration = float(concentration)
        self.s_max = None
        self._cache: dict[TokenSeq, np.ndarray] = {}

    def posterior(self, prefix: TokenSeq) -> np.ndarray:
        key = tuple(prefix)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        n = self.vocab.size
        candidates = list(range(n)) + [self.vocab.eos_id]
        logits = np.empty(n + 1)
        for i, c in enumerate(candidates):
            logits[i] = self.concentration * _hash_unit(b"A", self.seed, key, c)
        packed = _softmax_log(logits)
        row = np.concatenate([packed[:-1], [LOG_ZERO], packed[-1:]])
        row.flags.writeable = False
        self._cache[key] = row
        return row

    def to_json_dict(self) -> dict:
        return {"kind": "hash", "seed": self.seed, "concentration": self.concentration}


TransducerModel = TableTransducer | HashTransducer
AttentionModel = TableAttention | HashAttention


@dataclass(frozen=True)
class ModelBundle:
    """One utterance's worth of models sharing a vocabulary and time axis."""

    vocab: Vocabulary
    ctc_grid: CtcGrid | None = None
    transducer: TransducerModel | None = None
    attention: AttentionModel | None = None
    frames: int | None = None

    def to_json_dict(self) -> dict:
        doc: dict = {"vocab": self.vocab.to_json_dict()}
        if self.ctc_grid is not None:
            doc["ctc_grid"] = self.ctc_grid.linear.tolist()
        if self.transducer is not None:
            doc["transducer"] = self.transducer.to_json_dict()
        if self.attention is not None:
            doc["attention"] = self.attention.to_json_dict()
        if self.frames is not None and self.ctc_grid is None and (
            self.transducer is None or self.transducer.frames is None
        ):
            doc["frames"] = self.frames
        return doc


def _parse_last(label: str, vocab: Vocabulary, where: str) -> int | None:
    if label == START_LABEL:
        return None
    try:
        return vocab.token_id(label)
    except UsageError:
        raise LoadError(f"{where}: unknown context label {label!r}") from None


def _parse_transducer(obj: dict, vocab: Vocabulary) -> TransducerModel:
    kind = obj.get("kind")
    if kind == "hash":
        if "seed" not in obj:
            raise LoadError("transducer: hash model needs a 'seed'")
        return HashTransducer(vocab, obj["seed"], obj.get("concentration", 4.0),
                              frames=obj.get("frames"))
    if kind == "table":
        for k in ("frames", "s_max", "rows"):
            if k not in obj:
                raise LoadError(f"transducer: table model needs '{k}'")
        rows = {}
        for key, vals in obj["rows"].items():
            parts = key.split(",")
            if len(parts) != 3:
                raise LoadError(f"transducer: bad row key {key!r}")
            t, s = int(parts[0]), int(parts[1])
            last = _parse_last(parts[2], vocab, f"transducer row {key!r}")
            rows[(t, s, last)] = np.asarray(vals, dtype=np.float64)
        return TableTransducer(vocab, obj["frames"], obj["s_max"], rows)
    raise LoadError(f"transducer: unknown kind {kind!r}")


def _parse_attention(obj: dict, vocab: Vocabulary) -> AttentionModel:
    kind = obj.get("kind")
    if kind == "hash":
        if "seed" not in obj:
            raise LoadError("attention: hash model needs a 'seed'")
        return HashAttention(vocab, obj["seed"], obj.get("concentration", 4.0))
    if kind == "table":
        for k in ("s_max", "rows"):
            if k not in obj:
                raise LoadError(f"attention: table model needs '{k}'")
        rows = {}
        for key, vals in obj["rows"].items():
            parts = key.split(",")
            if len(parts) != 2:
                raise LoadError(f"attention: bad row key {key!r}")
            s = int(parts[0])
            last = _parse_last(parts[1], vocab, f"attention row {key!r}")
            rows[(s, last)] = np.asarray(vals, dtype=np.float64)
        return TableAttention(vocab, obj["s_max"], rows)
    raise LoadError(f"attention: unknown kind {kind!r}")


def bundle_from_json_dict(doc: dict) -> ModelBundle:
    if "vocab" not in doc:
        raise LoadError("bundle: missing 'vocab' section")
    try:
        vocab = Vocabulary.from_json_dict(doc["vocab"])
    except UsageError as exc:
        raise LoadError(f"vocab: {exc}") from None

    grid = None
    if "ctc_grid" in doc:
        grid = CtcGrid.from_linear(doc["ctc_grid"], vocab)
    transducer = None
    if "transducer" in doc:
        transducer = _parse_transducer(doc["transducer"], vocab)
    attention = None
    if "attention" in doc:
        attention = _parse_attention(doc["attention"], vocab)

    frame_claims = {}
    if "frames" in doc:
        frame_claims["bundle"] = int(doc["frames"])
    if grid is not None:
        frame_claims["ctc_grid"] = grid.frames
    if transducer is not None and transducer.frames is not None:
        frame_claims["transducer"] = transducer.frames
    frames = None
    if frame_claims:
        values = set(frame_claims.values())
        if len(values) > 1:
            raise LoadError(f"bundle: inconsistent frame counts {frame_claims}")
        frames = values.pop()
        if frames < 1:
            raise LoadError(f"bundle: frame count must be >= 1, got {frames}")
    return ModelBundle(vocab=vocab, ctc_grid=grid, transducer=transducer,
                       attention=attention, frames=frames)


def dumps_bundle(bundle: ModelBundle) -> str:
    """Canonical JSON text for a bundle; stable byte-for-byte across saves."""
    return json.dumps(bundle.to_json_dict(), sort_keys=True, indent=2) + "\n"


def loads_bundle(text: str) -> ModelBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LoadError(f"bundle: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise LoadError("bundle: top level must be a JSON object")
    return bundle_from_json_dict(doc)


def load_models(path: str | Path) -> ModelBundle:
    """Load a model bundle from a JSON file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise LoadError(f"cannot read {p}: {exc}") from None
    return loads_bundle(text)


def save_models(bundle: ModelBundle, path: str | Path) -> None:
    Path(path).write_text(dumps_bundle(bundle))
