"""Deterministic synthetic speech corpus.

Every character owns a fixed one-hot spectral template derived from a stable
hash of its UTF-8 bytes, so a text maps to exactly one target spectrogram:
two template frames per character, one silent frame between words, stop flag
on the final frame.  Useful for overfit experiments where the mapping must be
learnable and the data free of recording noise.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import MalformedDocument
from .model import MelSpectrogram
from .textgraph import tokenize

FRAMES_PER_CHAR = 2


def stable_hash(text: str) -> int:
    """CRC-32 of the UTF-8 encoding; stable across runs and machines."""
    return zlib.crc32(text.encode("utf-8"))


def char_template(char: str, n_mels: int) -> np.ndarray:
    """Two identical frames with a single hot bin chosen by the char's hash."""
    frames = np.zeros((FRAMES_PER_CHAR, n_mels))
    frames[:, stable_hash(char) % n_mels] = 1.0
    return frames


def target_mel(text: str, n_mels: int) -> MelSpectrogram:
    """Deterministic target: char templates joined by one silent frame per
    word boundary, so T = 2*N + (W-1) for N chars in W words."""
    words = [text[a:b] for a, b in tokenize(text)]
    if not words:
        raise ValueError(f"no non-whitespace characters in {text!r}")
    chunks = []
    for k, word in enumerate(words):
        if k:
            chunks.append(np.zeros((1, n_mels)))
        for char in word:
            chunks.append(char_template(char, n_mels))
    frames = np.concatenate(chunks, axis=0)
    stop = np.zeros(frames.shape[0])
    stop[-1] = 1.0
    return MelSpectrogram(frames, stop)


@dataclass
class CorpusConfig:
    n_utterances: int = 20
    n_mels: int = 80
    alphabet: str = "abcdef"
    min_words: int = 1
    max_words: int = 2
    min_len: int = 1
    max_len: int = 3
    seed: int = 0

    def validate(self) -> None:
        if self.n_utterances < 1:
            raise ValueError("n_utterances must be positive")
        if self.n_mels < 1:
            raise ValueError("n_mels must be positive")
        if not self.alphabet:
            raise ValueError("alphabet must not be empty")
        if any(c.isspace() for c in self.alphabet):
            raise ValueError("alphabet must not contain whitespace")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet must not repeat symbols")
        if not 1 <= self.min_words <= self.max_words:
            raise ValueError("need 1 <= min_words <= max_words")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown corpus config fields: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config


@dataclass
class Utterance:
    text: str
    mel: MelSpectrogram


@dataclass
class SyntheticCorpus:
    config: CorpusConfig
    utterances: list[Utterance]

    def __len__(self) -> int:
        return len(self.utterances)

    def texts(self) -> list[str]:
        return [u.text for u in self.utterances]

    def save(self, path) -> None:
        doc = {
            "config": self.config.to_dict(),
            "utterances": [
                {
                    "text": u.text,
                    "frames": u.mel.frames.tolist(),
                    "stop": u.mel.stop.tolist(),
                }
                for u in self.utterances
            ],
        }
        Path(path).write_text(
            json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "SyntheticCorpus":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"corpus file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "config" not in doc or "utterances" not in doc:
            raise MalformedDocument("corpus document needs 'config' and 'utterances'")
        try:
            config = CorpusConfig.from_dict(doc["config"])
        except (TypeError, ValueError) as exc:
            raise MalformedDocument(f"bad corpus config: {exc}") from exc
        utterances = []
        for entry in doc["utterances"]:
            if not isinstance(entry, dict) or not {"text", "frames", "stop"} <= set(entry):
                raise MalformedDocument("each utterance needs text, frames, stop")
            try:
                mel = MelSpectrogram(np.array(entry["frames"], dtype=np.float64),
                                     np.array(entry["stop"], dtype=np.float64))
            except ValueError as exc:
                raise MalformedDocument(f"bad utterance {entry.get('text')!r}: {exc}") from exc
            utterances.append(Utterance(text=entry["text"], mel=mel))
        return cls(config=config, utterances=utterances)


def gen_corpus(config: CorpusConfig, seed: int | None = None) -> SyntheticCorpus:
    """Draw unique random texts from the alphabet and render their targets.

    The same config and seed always produce the same corpus.
    """
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    symbols = list(config.alphabet)
    texts: list[str] = []
    seen = set()
    attempts = 0
    limit = 200 * config.n_utterances
    while len(texts) < config.n_utterances:
        attempts += 1
        if attempts > limit:
            raise ValueError(
                "could not draw enough distinct texts; enlarge the alphabet "
                "or length ranges"
            )
        n_words = int(rng.integers(config.min_words, config.max_words + 1))
        words = []
        for _ in range(n_words):
            length = int(rng.integers(config.min_len, config.max_len + 1))
            words.append("".join(rng.choice(symbols, size=length)))
        text = " ".join(words)
        if text not in seen:
            seen.add(text)
            texts.append(text)
    utterances = [Utterance(text=t, mel=target_mel(t, config.n_mels)) for t in texts]
    return SyntheticCorpus(config=config, utterances=utterances)
