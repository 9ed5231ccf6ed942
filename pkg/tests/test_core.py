import math
import random

import pytest

from jointbeam.core import (
    CTC,
    LOG_ZERO,
    RNNT,
    Alignment,
    DecoderWeights,
    Hypothesis,
    UsageError,
    Vocabulary,
    compute_stage2_weights,
    ctc_collapse,
    joint_score,
    log_add,
    log_sum_exp,
    rnnt_collapse,
)

# token ids used with blank_id=2 in the collapse tests (vocab {a, b})
A, B, BLANK = 0, 1, 2


class TestLogSumExp:
    def test_halves_sum_to_one(self):
        assert abs(log_sum_exp([math.log(0.5), math.log(0.5)])) <= 1e-12

    def test_all_log_zero(self):
        assert log_sum_exp([LOG_ZERO, LOG_ZERO]) == LOG_ZERO

    def test_three_quarters(self):
        # sum in linear domain: 0.25 * 3 = 0.75
        got = log_sum_exp([math.log(0.25)] * 3)
        assert abs(got - math.log(0.75)) <= 1e-12

    def test_empty_is_usage_error(self):
        with pytest.raises(UsageError):
            log_sum_exp([])

    def test_no_overflow_for_large_inputs(self):
        got = log_sum_exp([1000.0, 1000.0])
        assert math.isfinite(got)
        assert abs(got - (1000.0 + math.log(2.0))) <= 1e-9

    def test_permutation_invariant(self):
        rng = random.Random(11)
        vals = [rng.uniform(-30, 0) for _ in range(10)] + [LOG_ZERO]
        shuffled = vals[:]
        rng.shuffle(shuffled)
        assert abs(log_sum_exp(vals) - log_sum_exp(shuffled)) <= 1e-12

    def test_log_zero_is_neutral(self):
        vals = [-1.5, -0.3, -7.0]
        assert abs(log_sum_exp(vals) - log_sum_exp(vals + [LOG_ZERO])) <= 1e-12

    def test_log_add_pairwise(self):
        assert log_add(LOG_ZERO, -1.0) == -1.0
        assert abs(log_add(math.log(0.25), math.log(0.5)) - math.log(0.75)) <= 1e-12


class TestCollapse:
    def test_ctc_merges_runs_and_drops_blanks(self):
        a = Alignment((A, A, BLANK, A, BLANK, B, B), CTC)
        assert ctc_collapse(a, BLANK) == (A, A, B)

    def test_ctc_all_blank(self):
        assert ctc_collapse(Alignment((BLANK,) * 3, CTC), BLANK) == ()

    def test_ctc_blank_separated_repeat(self):
        a = Alignment((BLANK, B, B, BLANK, B), CTC)
        assert ctc_collapse(a, BLANK) == (B, B)

    def test_ctc_rejects_rnnt_alignment(self):
        with pytest.raises(UsageError):
            ctc_collapse(Alignment((A, BLANK), RNNT), BLANK)

    def test_rnnt_keeps_repeats(self):
        assert rnnt_collapse(Alignment((A, BLANK, A, BLANK), RNNT), BLANK) == (A, A)

    def test_rnnt_all_blank(self):
        assert rnnt_collapse(Alignment((BLANK, BLANK), RNNT), BLANK) == ()

    def test_rnnt_order_preserved(self):
        a = Alignment((B, A, BLANK, B, BLANK, BLANK), RNNT)
        assert rnnt_collapse(a, BLANK) == (B, A, B)

    def test_rnnt_rejects_ctc_alignment(self):
        with pytest.raises(UsageError):
            rnnt_collapse(Alignment((A,), CTC), BLANK)

    def test_rnnt_length_identity(self):
        rng = random.Random(3)
        for _ in range(50):
            labels = tuple(rng.choice([A, B, BLANK]) for _ in range(rng.randint(0, 12)))
            out = rnnt_collapse(Alignment(labels, RNNT), BLANK)
            assert len(out) + labels.count(BLANK) == len(labels)

    def test_ctc_collapse_never_emits_blank(self):
        rng = random.Random(4)
        for _ in range(50):
            labels = tuple(rng.choice([A, B, BLANK]) for _ in range(rng.randint(1, 10)))
            assert BLANK not in ctc_collapse(Alignment(labels, CTC), BLANK)

    def test_ctc_blank_embedding_roundtrip(self):
        # Writing a sequence with separating blanks back onto the time axis
        # collapses to the same sequence.
        rng = random.Random(5)
        for _ in range(50):
            seq = tuple(rng.choice([A, B]) for _ in range(rng.randint(0, 5)))
            labels = [BLANK]
            for tok in seq:
                labels += [tok, BLANK]
            assert ctc_collapse(Alignment(tuple(labels), CTC), BLANK) == seq


class TestJointScore:
    def test_single_decoder_passthrough(self):
        h = Hypothesis(prefix=(A,) * 4, joint=0.0, score_ctc=-1.0)
        w = DecoderWeights(1.0, 0.0, 0.0)
        assert joint_score(h, w) == -1.0

    def test_convex_combination_of_equal_scores(self):
        h = Hypothesis(prefix=(), joint=0.0, score_ctc=-1.0, score_rnnt=-1.0,
                       score_att=-1.0)
        w = DecoderWeights(0.3, 0.3, 0.4)
        assert abs(joint_score(h, w) - (-1.0)) <= 1e-12

    def test_hand_expanded_mixing(self):
        h = Hypothesis(prefix=(A, B), joint=0.0, score_ctc=-2.0, score_rnnt=-4.0,
                       score_att=-6.0)
        w = DecoderWeights(0.1, 0.4, 0.5, beta=0.5)
        expected = -2.0 * 0.1 + -4.0 * 0.4 + -6.0 * 0.5 + 0.5 * 2
        assert abs(expected - (-3.8)) <= 1e-12
        assert abs(joint_score(h, w) - expected) <= 1e-12

    def test_missing_score_with_nonzero_weight(self):
        h = Hypothesis(prefix=(), joint=0.0, score_ctc=-1.0)
        with pytest.raises(UsageError):
            joint_score(h, DecoderWeights(0.5, 0.5, 0.0))

    def test_zero_weight_ignores_missing_score(self):
        h = Hypothesis(prefix=(), joint=0.0, score_att=-2.0)
        assert joint_score(h, DecoderWeights(0.0, 0.0, 1.0)) == -2.0

    def test_log_zero_score_propagates(self):
        h = Hypothesis(prefix=(A,), joint=0.0, score_ctc=LOG_ZERO, score_att=-1.0)
        w = DecoderWeights(0.5, 0.0, 0.5)
        assert joint_score(h, w) == LOG_ZERO

    def test_linear_in_each_score(self):
        w = DecoderWeights(0.2, 0.3, 0.5, beta=0.1)
        base = Hypothesis(prefix=(A, B, A), joint=0.0, score_ctc=-3.0,
                          score_rnnt=-2.0, score_att=-1.0)
        j0 = joint_score(base, w)
        for name, mu in (("score_ctc", 0.2), ("score_rnnt", 0.3), ("score_att", 0.5)):
            delta = 0.7
            bumped = Hypothesis(prefix=base.prefix, joint=0.0,
                                score_ctc=base.score_ctc + (delta if name == "score_ctc" else 0),
                                score_rnnt=base.score_rnnt + (delta if name == "score_rnnt" else 0),
                                score_att=base.score_att + (delta if name == "score_att" else 0))
            assert abs(joint_score(bumped, w) - (j0 + mu * delta)) <= 1e-12

    def test_weight_validation(self):
        with pytest.raises(UsageError):
            DecoderWeights(-0.1, 0.5, 0.5)
        with pytest.raises(UsageError):
            DecoderWeights(0.0, 0.0, 0.0)


class TestStage2Weights:
    def test_worked_example(self):
        assert compute_stage2_weights((10, 10, 10, 70)) == (0.1, 0.1, 0.1, 0.7)

    def test_symmetry(self):
        for e in (1, 7, 133):
            assert compute_stage2_weights((e, e, e, e)) == (0.25, 0.25, 0.25, 0.25)

    def test_proportional(self):
        assert compute_stage2_weights((5, 10, 15, 20)) == (0.1, 0.2, 0.3, 0.4)

    def test_sums_to_one(self):
        rng = random.Random(9)
        for _ in range(200):
            epochs = [rng.randint(1, 500) for _ in range(4)]
            w = compute_stage2_weights(epochs)
            assert abs(sum(w) - 1.0) <= 1e-12

    def test_scale_invariant(self):
        epochs = (3, 11, 29, 57)
        scaled = tuple(7 * e for e in epochs)
        assert compute_stage2_weights(epochs) == compute_stage2_weights(scaled)

    def test_rejects_nonpositive(self):
        with pytest.raises(UsageError):
            compute_stage2_weights((0, 1, 1, 1))
        with pytest.raises(UsageError):
            compute_stage2_weights((1, 1, -3, 1))

    def test_rejects_wrong_arity(self):
        with pytest.raises(UsageError):
            compute_stage2_weights((1, 2, 3))


class TestVocabulary:
    def test_reserved_ids_distinct_and_dense(self):
        v = Vocabulary(("a", "b", "c"))
        assert v.blank_id == 3 and v.eos_id == 4
        assert len({v.blank_id, v.eos_id, *range(v.size)}) == v.size + 2

    def test_serialization_roundtrip(self):
        v = Vocabulary(("x", "y"), blank_label="<pad>", eos_label="</s>")
        assert Vocabulary.from_json_dict(v.to_json_dict()) == v

    def test_label_lookup(self):
        v = Vocabulary(("a", "b"))
        assert v.label(0) == "a"
        assert v.label(v.blank_id) == "<blk>"
        assert v.label(v.eos_id) == "<eos>"
        assert v.token_id("b") == 1

    def test_rejects_duplicates_and_collisions(self):
        with pytest.raises(UsageError):
            Vocabulary(("a", "a"))
        with pytest.raises(UsageError):
            Vocabulary(("a", "<blk>"))
        with pytest.raises(UsageError):
            Vocabulary(())
        with pytest.raises(UsageError):
            Vocabulary(("a,b",))
