import numpy as np
import pytest

from qdistill.data import SyntheticTeacherProvider, attach_teacher, make_synthetic_corpus, prepare_corpus
from qdistill.loss import LossMode, LossSpec
from qdistill.model import FrozenEmbedding, ModelConfig
from qdistill.train import TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model():
    return ModelConfig(n_qubits=3, embed_dim=4, depth=1, n_classes=2)


@pytest.fixture
def small_config(small_model):
    return TrainConfig(model=small_model, loss=LossSpec(LossMode.COMBINED, 0.1), epochs=2, batch_size=4,
                       seed=11, repeats=2)


@pytest.fixture
def small_corpus(small_config):
    """40 separable examples, split, tokenized and carrying a synthetic teacher"""
    examples = make_synthetic_corpus(40, 2, seed=3)
    corpus = prepare_corpus(examples, seed=small_config.seed)
    provider = SyntheticTeacherProvider(2, accuracy=0.95, smoothing=0.1, seed=small_config.seed)
    return attach_teacher(corpus, provider, 2)


@pytest.fixture
def embedding(small_model):
    return FrozenEmbedding(small_model.embed_dim, seed=5)
