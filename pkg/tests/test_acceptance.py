"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they happen (they are also shown for failures in any mode).
"""

import time

import numpy as np
import pytest
import torch

from hanforge.core import LabelScheme, Segmentation, Task
from hanforge.crf import Constraints, log_partition, nll_loss, viterbi
from hanforge.encoder import EncoderConfig, TransformerEncoder
from hanforge.biaffine import BiaffineHead, decode_heads
from hanforge.lexicon import Lexicon, bias_matrix, compute_bias, max_match
from hanforge.minicorpus import generate_examples, write_corpus_suite
from hanforge.pipeline import (CorpusSpec, evaluate, load, predict,
                               prepare_training_data, save)
from hanforge.theseus import TheseusSchedule, compress, sample_replacements

import oracles
import trainutil

ACC_ENCODER = {"num_layers": 2, "hidden_dim": 64, "num_heads": 4,
               "ffn_dim": 128, "max_len": 64}


def report(criterion: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {criterion}: {status} - {detail}", flush=True)
    assert passed, f"criterion {criterion}: {detail}"


# --- shared trained models -----------------------------------------------------

@pytest.fixture(scope="module")
def corpus_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    train_paths = write_corpus_suite(root / "train", count=300, seed=1)
    heldout_paths = write_corpus_suite(root / "heldout", count=80, seed=2)
    return train_paths, heldout_paths


@pytest.fixture(scope="module")
def joint(corpus_dirs):
    train_paths, _ = corpus_dirs
    config = trainutil.suite_config(
        train_paths,
        names=("cws_coarse", "cws_fine", "pos", "ner", "dep"),
        epochs=24, batch_size=32, eval_split=0.0, seed=0,
        encoder=dict(ACC_ENCODER),
    )
    t0 = time.time()
    model = trainutil.train_quiet(config)
    return model, time.time() - t0


@pytest.fixture(scope="module")
def separates(corpus_dirs):
    """One independently trained model per task, same budget per corpus."""
    train_paths, _ = corpus_dirs
    models = {}
    for task, names in [("CWS", ("cws_coarse",)), ("POS", ("pos",)),
                        ("NER", ("ner",))]:
        config = trainutil.suite_config(
            train_paths, names=names, epochs=24, batch_size=32,
            eval_split=0.0, seed=0, encoder=dict(ACC_ENCODER),
        )
        models[task] = trainutil.train_quiet(config)
    # dependency parsing needs a POS pass; reuse the treebank's own columns
    dep_config = trainutil.suite_config(
        train_paths, names=(), epochs=24, batch_size=32, eval_split=0.0,
        seed=0, encoder=dict(ACC_ENCODER),
    )
    dep_config.corpora = [
        CorpusSpec(train_paths["dep"], "POS-main", Task.POS, format="conll"),
        CorpusSpec(train_paths["dep"], "DEP-main", Task.DEP),
    ]
    models["DEP"] = trainutil.train_quiet(dep_config)
    return models


# --- criterion 1: CRF oracle equivalence ----------------------------------------

def test_criterion_1_crf_oracle_equivalence():
    rng = np.random.default_rng(100)
    t0 = time.time()
    partition_worst = 0.0
    for _ in range(1000):
        t_len = int(rng.integers(1, 7))
        num_labels = int(rng.integers(1, 6))
        em = rng.normal(size=(t_len, num_labels))
        trans = rng.normal(size=(num_labels, num_labels))
        start, end = rng.normal(size=num_labels), rng.normal(size=num_labels)

        z = float(log_partition(torch.tensor(em), torch.tensor(trans),
                                torch.tensor(start), torch.tensor(end)))
        partition_worst = max(partition_worst,
                              abs(z - oracles.crf_log_partition(em, trans, start, end)))
        assert partition_worst < 1e-9

        while True:
            constraints = Constraints(
                start_ok=rng.random(num_labels) < 0.7,
                end_ok=rng.random(num_labels) < 0.7,
                transition_ok=rng.random((num_labels, num_labels)) < 0.7,
            )
            exp_labels, exp_score = oracles.crf_best_path(em, trans, start, end,
                                                          constraints)
            if exp_labels is not None:
                break
        labels, score = viterbi(em, trans, start, end, constraints)
        assert labels == exp_labels
        assert abs(score - exp_score) < 1e-9
    elapsed = time.time() - t0
    report(1, elapsed < 60.0,
           f"1000 instances, worst logZ gap {partition_worst:.2e}, "
           f"viterbi exact, {elapsed:.1f}s")


# --- criterion 2: gradient checks ------------------------------------------------

def test_criterion_2_gradient_checks():
    rng = np.random.default_rng(200)
    failures = []

    # CRF NLL wrt emissions, transitions and boundary scores
    em = torch.tensor(rng.normal(size=(5, 4)), requires_grad=True)
    trans = torch.tensor(rng.normal(size=(4, 4)), requires_grad=True)
    start = torch.tensor(rng.normal(size=4), requires_grad=True)
    end = torch.tensor(rng.normal(size=4), requires_grad=True)
    gold = rng.integers(4, size=5).tolist()
    failures += oracles.check_gradients(
        [("crf.em", em), ("crf.trans", trans), ("crf.start", start), ("crf.end", end)],
        lambda: nll_loss(em, trans, start, end, gold), rng, samples_per_param=6)

    # encoder backward on a 2-layer, d=8 encoder in 64-bit mode
    torch.manual_seed(200)
    encoder = TransformerEncoder(EncoderConfig(
        vocab_size=16, num_layers=2, hidden_dim=8, num_heads=2, ffn_dim=12,
        max_len=8)).double()
    ids = torch.tensor([[2, 5, 6, 7, 0], [2, 8, 9, 0, 0]])
    mask = torch.tensor([[True] * 4 + [False], [True] * 3 + [False] * 2])
    upstream = torch.tensor(rng.normal(size=(2, 5, 8))) * mask[:, :, None]
    failures += oracles.check_gradients(
        list(encoder.named_parameters()),
        lambda: (encoder(ids, mask) * upstream).sum(), rng, samples_per_param=3)

    # biaffine parse loss, including the POS embedding table
    torch.manual_seed(201)
    head = BiaffineHead(6, num_pos=3, num_rels=2, arc_dim=4, rel_dim=3).double()
    char_feats = torch.tensor(rng.normal(size=(5, 6)))
    seg = Segmentation.from_tokens(["ab", "c", "de"])
    failures += oracles.check_gradients(
        list(head.named_parameters()),
        lambda: head.loss(char_feats, seg, [0, 2, 1], [2, 0, 2], [1, 0, 1]),
        rng, samples_per_param=3)

    report(2, not failures,
           "CRF NLL, encoder backward, parse loss and POS embeddings vs "
           f"central differences (eps=1e-5, rel<1e-4): {len(failures)} failures"
           + ("\n" + "\n".join(failures) if failures else ""))


# --- criterion 3: Eq. 2 exactness ----------------------------------------------

def test_criterion_3_bias_equation():
    rng = np.random.default_rng(300)
    scheme = LabelScheme.cws()
    constraints = Constraints.from_scheme(scheme)

    exact = True
    for _ in range(500):
        em = rng.normal(size=(6, 4))
        weight = float(rng.random() * 2)
        bias = compute_bias(em, ["B", "M", "E", "B", "E", "S"], weight)
        expected = (em.max(axis=1) - em.mean(axis=1)) * weight
        expected[5] = 0.0  # uncovered position
        exact &= np.array_equal(bias.values, expected)

    identical_at_zero = True
    forced = True
    words = ["南京市", "长江大桥", "发展"]
    lexicon = Lexicon(words)
    for _ in range(100):
        text = "".join(words[int(i)] for i in rng.integers(0, 3, size=4))
        em = rng.random(size=(len(text), 4))
        trans = rng.normal(size=(4, 4)) * 0.5
        start, end = rng.normal(size=4) * 0.5, rng.normal(size=4) * 0.5
        skeleton = max_match(text, lexicon)

        plain = viterbi(em, trans, start, end, constraints)
        zeroed = viterbi(em, trans, start, end, constraints,
                         bias_matrix(compute_bias(em, skeleton, 0.0), scheme))
        identical_at_zero &= plain == zeroed

        labels, _ = viterbi(em, trans, start, end, constraints,
                            bias_matrix(compute_bias(em, skeleton, 1e6), scheme))
        forced &= [scheme.labels[i] for i in labels] == skeleton

    report(3, exact and identical_at_zero and forced,
           f"(max-mean)*w exact: {exact}; w=0 bit-identical: {identical_at_zero}; "
           f"w=1e6 forces legal skeletons: {forced}")


# --- criterion 4: tree decoding ---------------------------------------------------

def test_criterion_4_tree_decoding():
    rng = np.random.default_rng(400)
    exact = True
    for n in (1, 2, 3, 4):
        for _ in range(150):
            scores = rng.normal(size=(n + 1, n + 1))
            scores[0, :] = -np.inf
            np.fill_diagonal(scores, -np.inf)
            heads = decode_heads(scores)
            _, best = oracles.best_arborescence(scores)
            got = sum(scores[i + 1, heads[i]] for i in range(n))
            exact &= abs(got - best) < 1e-9 and oracles.is_single_root_tree(heads)

    valid = True
    for _ in range(10_000):
        n = int(rng.integers(1, 13))
        scores = rng.normal(size=(n + 1, n + 1))
        scores[0, :] = -np.inf
        np.fill_diagonal(scores, -np.inf)
        valid &= oracles.is_single_root_tree(decode_heads(scores))

    report(4, exact and valid,
           f"exhaustive optimum n<=4: {exact}; tree invariants over 10^4 "
           f"random cases n<=12: {valid}")


# --- criterion 5: theseus statistics ----------------------------------------------

def test_criterion_5_theseus(tmp_path):
    rng = np.random.default_rng(500)
    samples = np.stack([sample_replacements(4, 0.5, rng) for _ in range(10_000)])
    freq = samples.mean(axis=0)
    freq_ok = bool(np.all(np.abs(freq - 0.5) <= 0.02))

    schedule = TheseusSchedule(100, 50)
    schedule_ok = (schedule.probability(0) == 0.5 and
                   schedule.probability(100) == 0.0 and
                   schedule.probability(50) == 0.25)

    paths = write_corpus_suite(tmp_path / "theseus", count=60, seed=7)
    config = trainutil.suite_config(
        paths, names=("cws_coarse",), epochs=2, eval_split=0.0,
        encoder={"num_layers": 4, "hidden_dim": 32, "num_heads": 4,
                 "ffn_dim": 64, "max_len": 64},
    )
    large = trainutil.train_quiet(config)
    data = prepare_training_data(large, config.corpora, batch_size=16)
    before = b"".join(p.detach().numpy().tobytes()
                      for p in large.encoder.layers.parameters())
    compress(large, data, TheseusSchedule(40, 20), seed=0)
    after = b"".join(p.detach().numpy().tobytes()
                     for p in large.encoder.layers.parameters())
    frozen_ok = before == after

    report(5, freq_ok and schedule_ok and frozen_ok,
           f"slot frequencies {np.round(freq, 3).tolist()} within 0.5±0.02: "
           f"{freq_ok}; schedule endpoints exact: {schedule_ok}; large layers "
           f"bytewise unchanged: {frozen_ok}")


# --- criterion 6: corpus-tag criterion control -------------------------------------

def test_criterion_6_corpus_tag_control(corpus_dirs, joint):
    train_paths, _ = corpus_dirs
    model, train_seconds = joint
    f_coarse = evaluate(model, train_paths["cws_coarse"], "CWS-coarse")["f1"]
    f_fine = evaluate(model, train_paths["cws_fine"], "CWS-fine")["f1"]
    ok = f_coarse >= 0.99 and f_fine >= 0.99 and train_seconds < 600
    report(6, ok,
           f"same sentences, two granularities: coarse F={f_coarse:.4f}, "
           f"fine F={f_fine:.4f} (both >= 0.99); joint training took "
           f"{train_seconds:.0f}s (< 600s)")


# --- criterion 7: joint vs separate --------------------------------------------------

def test_criterion_7_joint_vs_separate(corpus_dirs, joint, separates):
    _, heldout = corpus_dirs
    model, _ = joint

    def scores_for(cws_model, pos_model, ner_model, dep_model):
        return {
            "CWS": evaluate(cws_model, heldout["cws_coarse"], "CWS-coarse")["f1"],
            "POS": evaluate(pos_model, heldout["pos"], "POS-main")["f1"],
            "NER": evaluate(ner_model, heldout["ner"], "NER-main")["f1"],
            "DEP": evaluate(dep_model, heldout["dep"], "DEP-main")["las"],
        }

    joint_scores = scores_for(model, model, model, model)
    sep_scores = scores_for(separates["CWS"], separates["POS"],
                            separates["NER"], separates["DEP"])
    joint_macro = sum(joint_scores.values()) / len(joint_scores)
    sep_macro = sum(sep_scores.values()) / len(sep_scores)
    ok = joint_macro >= sep_macro - 0.01
    report(7, ok,
           f"held-out macro-F joint={joint_macro:.4f} vs separate={sep_macro:.4f} "
           f"(joint per-task {joint_scores}; separate per-task {sep_scores})")


# --- criterion 8: serialization -------------------------------------------------------

def test_criterion_8_serialization_round_trip(joint, tmp_path):
    model, _ = joint
    probe = [ex.text for ex in generate_examples(100, seed=42)]
    path = tmp_path / "joint.fh"
    save(model, path)
    loaded = load(path)
    identical = True
    for task in (Task.CWS, Task.POS, Task.NER, Task.DEP):
        identical &= predict(model, probe, task).items == \
            predict(loaded, probe, task).items
    report(8, identical,
           "save->load predictions bit-identical on a 100-sentence probe "
           "across all four tasks")


# --- criterion 9: lexicon regression echo ---------------------------------------------

def test_criterion_9_lexicon_effect(corpus_dirs, joint):
    train_paths, heldout = corpus_dirs
    model, _ = joint
    from hanforge.data import read_cws
    lexicon = Lexicon(weight=0.05)
    for seg in read_cws(train_paths["cws_coarse"]):
        for token in seg.tokens:
            lexicon.add_word(token)
    base = evaluate(model, heldout["cws_coarse"], "CWS-coarse")["f1"]
    with_lex = evaluate(model, heldout["cws_coarse"], "CWS-coarse",
                        lexicon=lexicon)["f1"]
    delta = with_lex - base
    ok = delta >= -0.001  # must not lose more than 0.1 points
    report(9, ok,
           f"training-token lexicon on held-out CWS: F {base:.4f} -> "
           f"{with_lex:.4f} (delta {delta*100:+.3f} points)")
