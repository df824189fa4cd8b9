import numpy as np
import pytest
import torch

import trainutil


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_paths(tmp_path_factory):
    """Small five-corpus suite shared by the integration tests."""
    return trainutil.make_suite(tmp_path_factory.mktemp("tiny_corpus"),
                                count=100, seed=5)


@pytest.fixture(scope="session")
def tiny_model(tiny_paths):
    """A briefly trained joint model over all five corpora.

    Accuracy is not asserted against this model (that is the acceptance
    suite's job); integration tests use it for structure, determinism and
    round-trip properties.
    """
    config = trainutil.suite_config(
        tiny_paths,
        names=("cws_coarse", "cws_fine", "pos", "ner", "dep"),
        epochs=8, eval_split=0.0,
    )
    return trainutil.train_quiet(config)
