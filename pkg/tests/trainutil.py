"""Shared helpers for tests that need trained models or corpus suites."""

import io

from hanforge.core import Task
from hanforge.minicorpus import write_corpus_suite
from hanforge.pipeline import CorpusSpec, TrainingConfig, train

TINY_ENCODER = {"num_layers": 2, "hidden_dim": 64, "num_heads": 4,
                "ffn_dim": 128, "max_len": 64}

SPEC_BUILDERS = {
    "cws_coarse": lambda p: CorpusSpec(p, "CWS-coarse", Task.CWS),
    "cws_fine": lambda p: CorpusSpec(p, "CWS-fine", Task.CWS),
    "pos": lambda p: CorpusSpec(p, "POS-main", Task.POS),
    "ner": lambda p: CorpusSpec(p, "NER-main", Task.NER),
    "dep": lambda p: CorpusSpec(p, "DEP-main", Task.DEP),
}


def make_suite(directory, count=120, seed=1):
    return write_corpus_suite(directory, count=count, seed=seed)


def suite_config(paths, names=("cws_coarse", "pos", "ner", "dep"), **overrides):
    defaults = dict(epochs=8, batch_size=16, eval_split=0.1, seed=0,
                    encoder=dict(TINY_ENCODER))
    defaults.update(overrides)
    corpora = [SPEC_BUILDERS[name](paths[name]) for name in names]
    return TrainingConfig(corpora=corpora, **defaults)


def train_quiet(config):
    return train(config, log=io.StringIO())
