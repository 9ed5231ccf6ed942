"""Real-time-factor measurement and parameter sweeps.

RTF is processing time divided by speech duration; the synthetic utterances
declare their duration as frames times a fixed 40 ms frame shift, matching a
typical subsampled front end. Quality at desk scale is tracked as the mean
top-1 joint score (word error rates need trained models and are out of
scope); an edit-distance helper is provided for synthetic sanity checks.

Timing includes per-utterance scorer cache construction and excludes model
load, mirroring what a deployed decoder repeats per utterance. Measurements
are single-threaded and sweeps run grid points sequentially so RTF numbers
stay interpretable.
"""

from __future__ import annotations

import csv
import hashlib
import io
import time
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .core import DecoderWeights, UsageError
from .models import ModelBundle
from .search import (
    DEFAULT_PRESET,
    WEIGHT_PRESETS,
    NBestList,
    SearchConfig,
    run_search,
)

FRAME_SHIFT_S = 0.04

CSV_FIELDS = (
    "algorithm", "k_beam", "k_pre", "mu_ctc", "mu_rnnt", "mu_att", "beta",
    "mean_rtf", "mean_joint_score", "wall_time_s", "repeats",
)

# Weight axis holding attention at 0.5 while shifting mass from the CTC
# decoder to the transducer; the 0.0 point is the plain CTC/attention mix.
RNNT_WEIGHT_SWEEP = tuple(
    DecoderWeights(round(0.5 - mu, 10), mu, 0.5)
    for mu in (0.0, 0.1, 0.2, 0.3, 0.4)
)


@dataclass(frozen=True)
class Utterance:
    """A model bundle plus its declared speech duration."""

    bundle: ModelBundle
    speech_duration_s: float
    name: str = ""

    def __post_init__(self):
        if self.speech_duration_s <= 0:
            raise UsageError("speech_duration_s must be positive")


def utterance_from_bundle(bundle: ModelBundle, name: str = "",
                          frame_shift_s: float = FRAME_SHIFT_S) -> Utterance:
    if bundle.frames is None:
        raise UsageError("bundle has no frame count; cannot derive a duration")
    return Utterance(bundle, bundle.frames * frame_shift_s, name)


@dataclass(frozen=True)
class BenchRecord:
    """One (algorithm, beam, weights) measurement row."""

    algorithm: str
    k_beam: int
    k_pre: int
    mu_ctc: float
    mu_rnnt: float
    mu_att: float
    beta: float
    mean_rtf: float
    mean_joint_score: float
    wall_time_s: float
    repeats: int


def default_k_pre(k_beam: int) -> int:
    """Prebeam sized at 1.5x the main beam, the reference 20/30 ratio."""
    return max(k_beam, -(-3 * k_beam // 2))


def _decode_all(utterances: Sequence[Utterance], cfg: SearchConfig,
                timer: Callable[[], float]) -> tuple[float, list[NBestList]]:
    t_proc = 0.0
    outputs = []
    for utt in utterances:
        start = timer()
        result = run_search(utt.bundle, cfg)
        t_proc += timer() - start
        outputs.append(result)
    return t_proc, outputs


def _checksum(outputs: list[NBestList]) -> str:
    h = hashlib.sha256()
    for out in outputs:
        h.update(out.to_json().encode())
    return h.hexdigest()


def measure_rtf(utterances: Sequence[Utterance], cfg: SearchConfig,
                repeats: int = 3,
                timer: Callable[[], float] = time.perf_counter) -> BenchRecord:
    """Decode the utterance set `repeats` times and report the mean RTF.

    A warm-up pass runs first and is not timed. Decode outputs are discarded
    but checksummed: any checksum drift between repeats means the decoder is
    not deterministic and aborts the measurement.
    """
    if not utterances:
        raise UsageError("measure_rtf needs at least one utterance")
    if repeats < 1:
        raise UsageError("repeats must be >= 1")

    t_speech = sum(u.speech_duration_s for u in utterances)
    _, warm = _decode_all(utterances, cfg, timer)
    reference = _checksum(warm)

    rtfs = []
    wall = 0.0
    outputs = warm
    for _ in range(repeats):
        t_proc, outputs = _decode_all(utterances, cfg, timer)
        if _checksum(outputs) != reference:
            raise RuntimeError("decode outputs changed between benchmark repeats")
        rtfs.append(t_proc / t_speech)
        wall += t_proc

    joints = [out.entries[0].joint for out in outputs]
    w = cfg.weights
    return BenchRecord(
        algorithm=cfg.algorithm,
        k_beam=cfg.k_beam,
        k_pre=cfg.prebeam,
        mu_ctc=w.mu_ctc, mu_rnnt=w.mu_rnnt, mu_att=w.mu_att, beta=w.beta,
        mean_rtf=sum(rtfs) / len(rtfs),
        mean_joint_score=sum(joints) / len(joints),
        wall_time_s=wall,
        repeats=repeats,
    )


def resolve_weight_spec(spec: str, algorithm: str) -> list[DecoderWeights]:
    """Expand one weight-axis token into concrete weight vectors.

    Accepts 'default' (the algorithm's preset), a preset name, a
    'ctc:rnnt:att[:beta]' triple, or 'rnnt-sweep' for the fixed-attention
    transducer-weight axis.
    """
    if spec == "default":
        return [WEIGHT_PRESETS[DEFAULT_PRESET[algorithm]]]
    if spec in WEIGHT_PRESETS:
        return [WEIGHT_PRESETS[spec]]
    if spec == "rnnt-sweep":
        return list(RNNT_WEIGHT_SWEEP)
    parts = spec.split(":")
    if len(parts) in (3, 4):
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise UsageError(f"bad weight spec {spec!r}") from None
        beta = nums[3] if len(nums) == 4 else 0.0
        return [DecoderWeights(nums[0], nums[1], nums[2], beta)]
    raise UsageError(
        f"bad weight spec {spec!r}; expected 'default', a preset name, "
        f"'rnnt-sweep', or 'ctc:rnnt:att[:beta]'"
    )


def sweep(algorithms: Sequence[str], k_beams: Sequence[int],
          weight_specs: Sequence[str], utterances: Sequence[Utterance],
          repeats: int = 3, max_output_len: int | None = None,
          timer: Callable[[], float] = time.perf_counter) -> list[BenchRecord]:
    """One BenchRecord per grid point, in grid order.

    The grid is algorithms (outer) by beam sizes by weight specs; a spec may
    expand to several weight vectors, which stay in their expansion order. A
    decode failure aborts the whole sweep naming the failing grid point.
    """
    if not algorithms or not k_beams or not weight_specs:
        raise UsageError("sweep grid must be non-empty on every axis")
    records = []
    for alg in algorithms:
        for k_beam in k_beams:
            for spec in weight_specs:
                for weights in resolve_weight_spec(spec, alg):
                    cfg = SearchConfig(
                        algorithm=alg, weights=weights, k_beam=k_beam,
                        k_pre=default_k_pre(k_beam), max_output_len=max_output_len,
                    )
                    try:
                        records.append(measure_rtf(utterances, cfg, repeats, timer))
                    except Exception as exc:
                        raise RuntimeError(
                            f"sweep failed at algorithm={alg} k_beam={k_beam} "
                            f"weights={spec!r}: {exc}"
                        ) from exc
    _warn_non_monotonic(records)
    return records


def _warn_non_monotonic(records: list[BenchRecord]) -> None:
    """Best joint score should not degrade as the beam widens.

    That is an empirical expectation, not a theorem, so violations on
    user-supplied models only warn.
    """
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        key = (r.algorithm, r.mu_ctc, r.mu_rnnt, r.mu_att, r.beta)
        groups.setdefault(key, []).append(r)
    for key, rows in groups.items():
        rows = sorted(rows, key=lambda r: r.k_beam)
        for a, b in zip(rows, rows[1:]):
            if b.mean_joint_score < a.mean_joint_score - 1e-12:
                warnings.warn(
                    f"mean joint score dropped from {a.mean_joint_score} at "
                    f"k_beam={a.k_beam} to {b.mean_joint_score} at "
                    f"k_beam={b.k_beam} for {key}",
                    RuntimeWarning, stacklevel=3,
                )


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([getattr(r, f) for f in CSV_FIELDS])
    return buf.getvalue()


def records_from_csv(text: str) -> list[BenchRecord]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append(BenchRecord(
            algorithm=row["algorithm"],
            k_beam=int(row["k_beam"]),
            k_pre=int(row["k_pre"]),
            mu_ctc=float(row["mu_ctc"]),
            mu_rnnt=float(row["mu_rnnt"]),
            mu_att=float(row["mu_att"]),
            beta=float(row["beta"]),
            mean_rtf=float(row["mean_rtf"]),
            mean_joint_score=float(row["mean_joint_score"]),
            wall_time_s=float(row["wall_time_s"]),
            repeats=int(row["repeats"]),
        ))
    return out


def edit_distance(ref: Sequence[int], hyp: Sequence[int]) -> int:
    """Levenshtein distance between two token sequences."""
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i]
        for j, h in enumerate(hyp, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def _weights_tag(r: BenchRecord) -> str:
    return f"({r.mu_ctc:g},{r.mu_rnnt:g},{r.mu_att:g})"


def render_figures(records: Sequence[BenchRecord], outdir: str | Path) -> list[Path]:
    """Render sweep figures next to the CSV output.

    Produces RTF-versus-beam and joint-score-versus-beam line plots (one line
    per algorithm and weight vector) and, when the rows contain a
    transducer-weight axis, a score/RTF-versus-weight plot. Returns the
    written paths.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.algorithm, _weights_tag(r)), []).append(r)

    beam_groups = {k: sorted(v, key=lambda r: r.k_beam)
                   for k, v in groups.items() if len({r.k_beam for r in v}) > 1}
    for fname, attr, ylabel in (
        ("rtf_vs_beam.png", "mean_rtf", "mean RTF"),
        ("joint_vs_beam.png", "mean_joint_score", "mean joint score"),
    ):
        if not beam_groups:
            break
        fig, ax = plt.subplots(figsize=(6, 4))
        for (alg, tag), rows in sorted(beam_groups.items()):
            ax.plot([r.k_beam for r in rows], [getattr(r, attr) for r in rows],
                    marker="o", label=f"{alg} {tag}")
        ax.set_xlabel("main beam size")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = outdir / fname
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    sweep_groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        sweep_groups.setdefault((r.algorithm, r.k_beam), []).append(r)
    sweep_groups = {k: sorted(v, key=lambda r: r.mu_rnnt)
                    for k, v in sweep_groups.items()
                    if len({r.mu_rnnt for r in v}) > 1}
    if sweep_groups:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax2 = ax.twinx()
        for (alg, k_beam), rows in sorted(sweep_groups.items()):
            xs = [r.mu_rnnt for r in rows]
            ax.plot(xs, [r.mean_joint_score for r in rows], marker="o",
                    label=f"{alg} k={k_beam} joint")
            ax2.plot(xs, [r.mean_rtf for r in rows], marker="x", linestyle="--",
                     label=f"{alg} k={k_beam} rtf")
        ax.set_xlabel("transducer weight")
        ax.set_ylabel("mean joint score")
        ax2.set_ylabel("mean RTF")
        ax.legend(fontsize=8, loc="lower left")
        ax2.legend(fontsize=8, loc="upper right")
        fig.tight_layout()
        path = outdir / "weights_sweep.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
