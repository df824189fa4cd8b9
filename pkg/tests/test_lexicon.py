import numpy as np
import pytest

from hanforge.core import LabelScheme, Task, decode_bmes
from hanforge.crf import Constraints, viterbi
from hanforge.errors import EmptyWord, NegativeWeight
from hanforge.lexicon import (BiasVector, Lexicon, bias_matrix, compute_bias,
                              max_match)

CWS = LabelScheme.cws()
CWS_CONSTRAINTS = Constraints.from_scheme(CWS)


def tokens_of(chars: str, labels: list[str]) -> tuple[str, ...]:
    return decode_bmes(chars, labels).tokens


class TestLexicon:
    def test_add_and_contains(self):
        lex = Lexicon()
        lex.add_word("长江大桥")
        assert "长江大桥" in lex
        assert len(lex) == 1
        assert lex.max_word_len == 4

    def test_add_duplicate_is_idempotent(self):
        lex = Lexicon(["南京"])
        lex.add_word("南京")
        assert len(lex) == 1

    def test_empty_word_rejected(self):
        with pytest.raises(EmptyWord):
            Lexicon().add_word("")

    def test_negative_weight_rejected(self):
        with pytest.raises(NegativeWeight):
            Lexicon().set_weight(-0.1)

    def test_default_weight(self):
        assert Lexicon().weight == 0.05

    def test_from_file(self, tmp_path):
        path = tmp_path / "dict.txt"
        path.write_text("南京市\n\n长江大桥\n", encoding="utf-8")
        lex = Lexicon.from_file(path, weight=0.2)
        assert "南京市" in lex and "长江大桥" in lex
        assert lex.weight == 0.2


class TestMaxMatch:
    def test_figure_example_bridge_reading(self):
        # "Nanjing Yangtze River Bridge" with the bridge in the lexicon
        lex = Lexicon(["南京市", "长江大桥"])
        assert max_match("南京市长江大桥", lex) == ["B", "M", "E", "B", "M", "M", "E"]

    def test_mayor_reading(self):
        # hand-traced forward longest-first with a conflicting dictionary
        lex = Lexicon(["南京", "市长", "江大桥"])
        assert max_match("南京市长江大桥", lex) == ["B", "E", "B", "E", "B", "M", "E"]

    def test_empty_lexicon_all_single(self):
        assert max_match("南京市", Lexicon()) == ["S", "S", "S"]

    def test_single_char_entries_are_inert(self):
        lex = Lexicon(["南"])
        assert max_match("南京", lex) == ["S", "S"]

    def test_added_word_matches_afterwards(self):
        lex = Lexicon(["南京市"])
        assert max_match("南京市长江大桥", lex) == ["B", "M", "E", "S", "S", "S", "S"]
        lex.add_word("长江大桥")
        assert max_match("南京市长江大桥", lex) == ["B", "M", "E", "B", "M", "M", "E"]

    def test_tokens_concatenate_to_input(self, rng):
        lex = Lexicon(["南京", "南京市", "长江", "大桥", "市长"])
        alphabet = list("南京市长江大桥东西")
        for _ in range(300):
            chars = "".join(rng.choice(alphabet, size=int(rng.integers(1, 12))))
            labels = max_match(chars, lex)
            toks = tokens_of(chars, labels)
            assert "".join(toks) == chars
            for tok in toks:
                if len(tok) > 1:
                    assert tok in lex


class TestComputeBias:
    def test_equation_arithmetic(self):
        em = np.array([[2.0, 1.0, 0.0, 1.0]])
        bias = compute_bias(em, ["B"], 0.05)
        assert bias.values[0] == pytest.approx((2.0 - 1.0) * 0.05)

    def test_zero_weight_gives_zero_bias(self, rng):
        em = rng.normal(size=(5, 4))
        bias = compute_bias(em, ["B", "M", "E", "B", "E"], 0.0)
        assert np.all(bias.values == 0.0)

    def test_constant_row_gives_zero(self):
        em = np.full((1, 4), 3.7)
        bias = compute_bias(em, ["B"], 0.05)
        assert bias.values[0] == 0.0

    def test_uncovered_positions_receive_nothing(self, rng):
        em = rng.normal(size=(3, 4))
        bias = compute_bias(em, ["S", "B", "E"], 0.5)
        assert bias.values[0] == 0.0
        assert bias.values[1] > 0.0 or em[1].max() == em[1].mean()
        assert list(bias.covered) == [False, True, True]

    def test_max_minus_mean_exact(self, rng):
        # machine-precision agreement with the direct formula
        for _ in range(200):
            em = rng.normal(size=(4, 6))
            w = float(rng.random())
            bias = compute_bias(em, ["B", "M", "M", "E"], w)
            expected = (em.max(axis=1) - em.mean(axis=1)) * w
            assert np.array_equal(bias.values, expected)

    def test_values_nonnegative(self, rng):
        for _ in range(100):
            em = rng.normal(size=(6, 5))
            skeleton = ["B", "E", "S", "B", "M", "E"]
            bias = compute_bias(em, skeleton, float(rng.random()))
            assert np.all(bias.values >= 0.0)


class TestBiasMatrix:
    def test_cws_targets_only_matching_label(self):
        bias = BiasVector(np.array([0.3]), ("B",))
        mat = bias_matrix(bias, CWS)
        expected = np.zeros((1, 4))
        expected[0, CWS.index["B"]] = 0.3
        assert np.array_equal(mat, expected)

    def test_cross_label_spread(self):
        scheme = LabelScheme.cross(Task.POS, ["NN", "VV"])
        bias = BiasVector(np.array([0.2]), ("B",))
        mat = bias_matrix(bias, scheme)
        for j, label in enumerate(scheme.labels):
            expected = 0.2 if scheme.positional(label) == "B" else 0.0
            assert mat[0, j] == expected


class TestBiasInDecoding:
    def _setup(self, rng, text, words):
        lex = Lexicon(words)
        em = rng.random(size=(len(text), 4))
        trans = rng.normal(size=(4, 4)) * 0.5
        start = rng.normal(size=4) * 0.5
        end = rng.normal(size=4) * 0.5
        skeleton = max_match(text, lex)
        return lex, em, trans, start, end, skeleton

    def test_zero_weight_leaves_decode_bit_identical(self, rng):
        text = "南京市长江大桥"
        lex, em, trans, start, end, skeleton = self._setup(
            rng, text, ["南京市", "长江大桥"])
        plain = viterbi(em, trans, start, end, CWS_CONSTRAINTS)
        mat = bias_matrix(compute_bias(em, skeleton, 0.0), CWS)
        biased = viterbi(em, trans, start, end, CWS_CONSTRAINTS, mat)
        assert plain == biased

    def test_skeleton_path_score_monotone_in_weight(self, rng):
        text = "南京市长江大桥"
        lex, em, trans, start, end, skeleton = self._setup(
            rng, text, ["南京市", "长江大桥"])
        skeleton_ids = [CWS.index[l] for l in skeleton]

        def skeleton_score(weight):
            mat = bias_matrix(compute_bias(em, skeleton, weight), CWS)
            biased = em + mat
            score = start[skeleton_ids[0]] + biased[0, skeleton_ids[0]]
            for t in range(1, len(text)):
                score += trans[skeleton_ids[t - 1], skeleton_ids[t]]
                score += biased[t, skeleton_ids[t]]
            return score + end[skeleton_ids[-1]]

        scores = [skeleton_score(w) for w in (0.0, 0.05, 0.5, 5.0, 100.0)]
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))

    def test_huge_weight_forces_full_coverage_skeleton(self, rng):
        # every position covered by a lexicon word, so the skeleton wins
        for _ in range(50):
            lex = Lexicon(["南京市", "长江大桥", "发展"])
            words = ["南京市", "长江大桥", "发展"]
            text = "".join(words[int(i)] for i in rng.integers(0, 3, size=4))
            em = rng.random(size=(len(text), 4))
            trans = rng.normal(size=(4, 4)) * 0.5
            skeleton = max_match(text, lex)
            mat = bias_matrix(compute_bias(em, skeleton, 1e6), CWS)
            labels, _ = viterbi(em, trans, np.zeros(4), np.zeros(4),
                                CWS_CONSTRAINTS, mat)
            assert [CWS.labels[i] for i in labels] == skeleton
