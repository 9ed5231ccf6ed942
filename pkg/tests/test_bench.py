import itertools
import math
import warnings

import pytest

from jointbeam.bench import (
    CSV_FIELDS,
    RNNT_WEIGHT_SWEEP,
    Utterance,
    default_k_pre,
    edit_distance,
    measure_rtf,
    records_from_csv,
    records_to_csv,
    render_figures,
    resolve_weight_spec,
    sweep,
    utterance_from_bundle,
)
from jointbeam.core import DecoderWeights, UsageError
from jointbeam.search import ATTENTION_DRIVEN, CTC_DRIVEN, SearchConfig, WEIGHT_PRESETS


def scripted_timer(step: float):
    state = {"now": 0.0}

    def timer():
        state["now"] += step
        return state["now"]

    return timer


@pytest.fixture
def desk_utterance(desk_bundle):
    return utterance_from_bundle(desk_bundle, name="desk")


class TestMeasureRtf:
    def test_rtf_definition(self, desk_bundle):
        # Every timed interval spans one 0.5 s timer step, so each repeat
        # measures T_proc = 0.5 s against T_speech = 2.0 s.
        utt = Utterance(desk_bundle, speech_duration_s=2.0)
        cfg = SearchConfig(algorithm=CTC_DRIVEN, weights=DecoderWeights(1, 0, 0),
                           k_beam=2, k_pre=3)
        rec = measure_rtf([utt], cfg, repeats=3, timer=scripted_timer(0.5))
        assert rec.mean_rtf == pytest.approx(0.25, abs=1e-12)
        assert rec.repeats == 3
        assert rec.wall_time_s == pytest.approx(1.5, abs=1e-9)

    def test_output_checksums_stable(self, desk_utterance):
        cfg = SearchConfig(algorithm=CTC_DRIVEN, weights=DecoderWeights(0.5, 0, 0.5),
                           k_beam=2, k_pre=3)
        rec = measure_rtf([desk_utterance], cfg, repeats=2)
        assert rec.mean_rtf > 0.0

    def test_joint_score_recorded(self, desk_utterance, desk_bundle):
        from jointbeam.search import run_search
        cfg = SearchConfig(algorithm=CTC_DRIVEN, weights=DecoderWeights(1, 0, 0),
                           k_beam=2, k_pre=3)
        rec = measure_rtf([desk_utterance], cfg, repeats=1)
        direct = run_search(desk_bundle, cfg).entries[0].joint
        assert rec.mean_joint_score == direct

    def test_empty_utterances(self):
        cfg = SearchConfig(algorithm=CTC_DRIVEN, weights=DecoderWeights(1, 0, 0), k_beam=1)
        with pytest.raises(UsageError):
            measure_rtf([], cfg)

    def test_bad_repeats(self, desk_utterance):
        cfg = SearchConfig(algorithm=CTC_DRIVEN, weights=DecoderWeights(1, 0, 0), k_beam=1)
        with pytest.raises(UsageError):
            measure_rtf([desk_utterance], cfg, repeats=0)

    def test_duration_must_be_positive(self, desk_bundle):
        with pytest.raises(UsageError):
            Utterance(desk_bundle, speech_duration_s=0.0)

    def test_no_frame_axis_no_duration(self, att_bundle):
        with pytest.raises(UsageError):
            utterance_from_bundle(att_bundle)


class TestSweep:
    def test_grid_cardinality_and_order(self, desk_utterance):
        records = sweep(["ctc_driven", "rnnt_driven", "attention_driven"],
                        [1, 2, 4, 8], ["default"], [desk_utterance], repeats=1)
        assert len(records) == 12
        algs = [r.algorithm for r in records]
        assert algs == (["ctc_driven"] * 4 + ["rnnt_driven"] * 4
                        + ["attention_driven"] * 4)
        assert [r.k_beam for r in records[:4]] == [1, 2, 4, 8]

    def test_csv_header_and_roundtrip(self, desk_utterance):
        records = sweep([CTC_DRIVEN], [1, 2], ["default"], [desk_utterance], repeats=1)
        text = records_to_csv(records)
        assert text.splitlines()[0] == ",".join(CSV_FIELDS)
        assert records_from_csv(text) == records

    def test_k_pre_rule(self):
        assert default_k_pre(20) == 30
        assert default_k_pre(1) == 2
        assert default_k_pre(2) == 3

    def test_empty_axis(self, desk_utterance):
        with pytest.raises(UsageError):
            sweep([], [1], ["default"], [desk_utterance])

    def test_failure_names_grid_point(self, att_bundle):
        utt = Utterance(att_bundle, speech_duration_s=1.0)
        with pytest.raises(RuntimeError, match="k_beam=1"):
            sweep([CTC_DRIVEN], [1], ["default"], [utt], repeats=1)

    def test_joint_scores_monotone_in_beam_on_desk(self, desk_utterance):
        exhaustive = sum(2**s for s in range(5))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            records = sweep(["attention_driven", "ctc_driven", "rnnt_driven"],
                            [1, 2, 4, exhaustive], ["default"],
                            [desk_utterance], repeats=1, max_output_len=4)
        by_alg = {}
        for r in records:
            by_alg.setdefault(r.algorithm, []).append(r)
        for rows in by_alg.values():
            joints = [r.mean_joint_score for r in sorted(rows, key=lambda r: r.k_beam)]
            assert joints == sorted(joints)
            assert joints[-1] == max(joints)


class TestWeightSpecs:
    def test_default_resolves_per_algorithm(self):
        assert resolve_weight_spec("default", ATTENTION_DRIVEN) == \
            [WEIGHT_PRESETS["att-driven-default"]]
        assert resolve_weight_spec("default", CTC_DRIVEN) == \
            [WEIGHT_PRESETS["ctc-driven-default"]]

    def test_preset_names(self):
        assert resolve_weight_spec("rnnt-driven-default", CTC_DRIVEN) == \
            [DecoderWeights(0.1, 0.4, 0.5)]

    def test_triple_with_beta(self):
        got = resolve_weight_spec("0.2:0.3:0.5:-0.1", CTC_DRIVEN)
        assert got == [DecoderWeights(0.2, 0.3, 0.5, beta=-0.1)]

    def test_rnnt_sweep_axis(self):
        vectors = resolve_weight_spec("rnnt-sweep", CTC_DRIVEN)
        assert [w.mu_rnnt for w in vectors] == [0.0, 0.1, 0.2, 0.3, 0.4]
        assert all(w.mu_att == 0.5 for w in vectors)
        for w in vectors:
            assert w.mu_ctc + w.mu_rnnt == pytest.approx(0.5, abs=1e-12)
        assert vectors == list(RNNT_WEIGHT_SWEEP)

    def test_bad_specs(self):
        with pytest.raises(UsageError):
            resolve_weight_spec("fast", CTC_DRIVEN)
        with pytest.raises(UsageError):
            resolve_weight_spec("0.1:0.2", CTC_DRIVEN)
        with pytest.raises(UsageError):
            resolve_weight_spec("a:b:c", CTC_DRIVEN)


class TestEditDistance:
    @pytest.mark.parametrize("ref,hyp,want", [
        ((), (), 0),
        ((1, 2, 3), (1, 2, 3), 0),
        ((1, 2, 3), (1, 3), 1),
        ((1, 2), (1, 2, 3, 4), 2),
        ((1, 2, 3), (3, 2, 1), 2),
        ((), (5, 5), 2),
    ])
    def test_cases(self, ref, hyp, want):
        assert edit_distance(ref, hyp) == want

    def test_symmetry_and_triangle(self):
        import random
        rng = random.Random(0)
        seqs = [tuple(rng.randrange(3) for _ in range(rng.randrange(6)))
                for _ in range(12)]
        for a, b in itertools.combinations(seqs, 2):
            assert edit_distance(a, b) == edit_distance(b, a)
            assert edit_distance(a, b) <= len(a) + len(b)


class TestFigures:
    def test_renders_beam_and_weight_figures(self, desk_utterance, tmp_path):
        records = sweep([CTC_DRIVEN], [1, 2], ["default", "rnnt-sweep"],
                        [desk_utterance], repeats=1)
        written = render_figures(records, tmp_path)
        names = {p.name for p in written}
        assert "rtf_vs_beam.png" in names
        assert "joint_vs_beam.png" in names
        assert "weights_sweep.png" in names
        for p in written:
            assert p.stat().st_size > 0
