"""Synthetic corpus: hashed templates, frame layout, (de)serialization."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melgraph.corpus import (
    FRAMES_PER_CHAR,
    CorpusConfig,
    SyntheticCorpus,
    char_template,
    gen_corpus,
    stable_hash,
    target_mel,
)
from melgraph.errors import MalformedDocument

# CRC-32 of the single-character UTF-8 strings, frozen so a regression in the
# hash would be caught rather than silently re-binned
CRC = {
    "a": 0xE8B7BE43,
    "b": 0x71BEEFF9,
    "c": 0x06B9DF6F,
    "d": 0x98DD4ACC,
    "e": 0xEFDA7A5A,
    "f": 0x76D32BE0,
}


def test_stable_hash_frozen_values():
    for char, value in CRC.items():
        assert stable_hash(char) == value


def test_char_template_bins_at_eight_mels():
    bins = {c: stable_hash(c) % 8 for c in "abcdef"}
    assert bins == {"a": 3, "b": 1, "c": 7, "d": 4, "e": 2, "f": 0}
    for c, b in bins.items():
        tpl = char_template(c, 8)
        assert tpl.shape == (FRAMES_PER_CHAR, 8)
        expected = np.zeros((2, 8))
        expected[:, b] = 1.0
        np.testing.assert_array_equal(tpl, expected)


def test_target_mel_two_frames_per_char():
    mel = target_mel("ab", 8)
    assert mel.n_frames == 4
    hot = np.argmax(mel.frames, axis=1)
    assert hot.tolist() == [3, 3, 1, 1]
    assert mel.frames.sum() == 4.0  # strictly one-hot rows
    assert mel.stop.tolist() == [0, 0, 0, 1]
    mel.validate_target()


def test_target_mel_silent_frame_between_words():
    mel = target_mel("a b", 8)
    assert mel.n_frames == 5
    np.testing.assert_array_equal(mel.frames[2], np.zeros(8))
    assert np.argmax(mel.frames[0]) == 3
    assert np.argmax(mel.frames[3]) == 1
    assert mel.stop.tolist() == [0, 0, 0, 0, 1]


def test_target_mel_rejects_blank_text():
    with pytest.raises(ValueError, match="no non-whitespace"):
        target_mel("   ", 8)


@settings(max_examples=60)
@given(
    st.lists(
        st.text(alphabet="abcdefgh", min_size=1, max_size=4),
        min_size=1,
        max_size=4,
    )
)
def test_target_mel_length_formula(words):
    text = " ".join(words)
    n_chars = sum(len(w) for w in words)
    mel = target_mel(text, 5)
    assert mel.n_frames == FRAMES_PER_CHAR * n_chars + (len(words) - 1)
    mel.validate_target()
    # word-boundary frames, and only those, are silent
    silent = np.all(mel.frames == 0.0, axis=1)
    assert int(silent.sum()) == len(words) - 1


# ------------------------------------------------------------------ config

def test_corpus_config_round_trip():
    config = CorpusConfig(n_utterances=5, n_mels=8, alphabet="xyz", seed=4)
    assert CorpusConfig.from_dict(config.to_dict()) == config
    with pytest.raises(ValueError, match="unknown corpus config"):
        CorpusConfig.from_dict({"n_utterances": 5, "tempo": 1})


@pytest.mark.parametrize(
    "overrides, message",
    [
        (dict(n_utterances=0), "n_utterances"),
        (dict(n_mels=0), "n_mels"),
        (dict(alphabet=""), "empty"),
        (dict(alphabet="a b"), "whitespace"),
        (dict(alphabet="aab"), "repeat"),
        (dict(min_words=3, max_words=2), "min_words"),
        (dict(min_len=0), "min_len"),
    ],
)
def test_corpus_config_validation(overrides, message):
    with pytest.raises(ValueError, match=message):
        CorpusConfig(**overrides).validate()


# ------------------------------------------------------------------ generation

def test_gen_corpus_deterministic_and_distinct():
    config = CorpusConfig(n_utterances=12, n_mels=6, alphabet="abc", seed=9)
    first = gen_corpus(config)
    second = gen_corpus(config)
    assert first.texts() == second.texts()
    assert len(set(first.texts())) == 12
    for utt in first.utterances:
        expected = target_mel(utt.text, 6)
        np.testing.assert_array_equal(utt.mel.frames, expected.frames)
    # explicit seed overrides the config seed
    other = gen_corpus(config, seed=10)
    assert other.texts() != first.texts()


def test_gen_corpus_exhausted_alphabet_raises():
    # only two distinct texts exist ("a" and "b"), so asking for 5 must fail
    config = CorpusConfig(n_utterances=5, n_mels=4, alphabet="ab",
                          min_words=1, max_words=1, min_len=1, max_len=1)
    with pytest.raises(ValueError, match="distinct texts"):
        gen_corpus(config)


# ------------------------------------------------------------------ files

def test_corpus_save_load_round_trip(tmp_path):
    corpus = gen_corpus(CorpusConfig(n_utterances=6, n_mels=5, alphabet="abc", seed=2))
    path = tmp_path / "corpus.json"
    corpus.save(path)
    loaded = SyntheticCorpus.load(path)
    assert loaded.config == corpus.config
    assert loaded.texts() == corpus.texts()
    for a, b in zip(loaded.utterances, corpus.utterances):
        np.testing.assert_array_equal(a.mel.frames, b.mel.frames)
        np.testing.assert_array_equal(a.mel.stop, b.mel.stop)
    # saving the loaded corpus reproduces the bytes exactly
    again = tmp_path / "again.json"
    loaded.save(again)
    assert again.read_bytes() == path.read_bytes()


def test_corpus_load_malformed_documents(tmp_path):
    path = tmp_path / "bad.json"

    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(MalformedDocument, match="not valid JSON"):
        SyntheticCorpus.load(path)

    path.write_text('{"config": {}}', encoding="utf-8")
    with pytest.raises(MalformedDocument, match="utterances"):
        SyntheticCorpus.load(path)

    path.write_text('{"config": {"n_mels": 0}, "utterances": []}', encoding="utf-8")
    with pytest.raises(MalformedDocument, match="bad corpus config"):
        SyntheticCorpus.load(path)

    path.write_text('{"config": {}, "utterances": [{"text": "a"}]}', encoding="utf-8")
    with pytest.raises(MalformedDocument, match="needs text, frames, stop"):
        SyntheticCorpus.load(path)

    path.write_text(
        '{"config": {}, "utterances": '
        '[{"text": "a", "frames": [[0.0]], "stop": [0.0, 1.0]}]}',
        encoding="utf-8",
    )
    with pytest.raises(MalformedDocument, match="bad utterance"):
        SyntheticCorpus.load(path)
