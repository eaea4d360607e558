import numpy as np
import pytest

from melgraph.corpus import CorpusConfig, gen_corpus
from melgraph.encoder import EncoderKind
from melgraph.model import Mode, ModelConfig
from melgraph.textgraph import Vocabulary, build_graph


def tiny_config(**overrides) -> ModelConfig:
    """Small dims so forward/backward tests run in milliseconds."""
    base = dict(
        encoder_kind=EncoderKind.GGNN_GRU,
        mode=Mode.GRAPH_TTS,
        d_model=8,
        d_gae=4,
        iter=1,
        n_mels=4,
        reduction=2,
        d_prenet=6,
        d_att=6,
        d_dec=8,
        dropout=0.0,
        learning_rate=1e-3,
        seed=0,
    )
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture
def probe_graph():
    vocab = Vocabulary.from_texts(["abc de"])
    return build_graph("abc de", vocab), vocab


@pytest.fixture(scope="session")
def small_corpus():
    config = CorpusConfig(n_utterances=4, n_mels=4, alphabet="abc",
                          min_words=1, max_words=2, min_len=1, max_len=2, seed=1)
    return gen_corpus(config)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
