"""Pluggable speech adapters with deterministic mock implementations.

No real audio moves through the system.  The text-to-speech mock prices an
utterance at a nominal 170 words per minute scaled by the session voice's
speaking rate, and the speech-to-text mock corrupts text with seeded
per-word substitution and drop draws so recognition errors are replayable.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from random import Random

from .model import VoiceConfig

NOMINAL_WORDS_PER_MINUTE = 170.0

# Small homophone-flavored table; unknown words fall back to the filler list.
_CONFUSIONS = {
    "where": "wear",
    "is": "his",
    "the": "a",
    "to": "too",
    "my": "by",
    "watch": "wash",
    "next": "text",
    "cafe": "day",
    "square": "stair",
    "circle": "circus",
    "triangle": "rectangle",
}
_FILLERS = ("uh", "um", "the", "a", "there")


def word_count(text: str) -> int:
    return len(text.split())


def synthesis_duration_ms(text: str, speaking_rate: float) -> float:
    """Playback length of a synthesized utterance in milliseconds.

    Linear in the word count and inversely proportional to the speaking
    rate: doubling the rate exactly halves the duration.
    """
    if speaking_rate <= 0:
        raise ValueError("speaking_rate must be positive")
    return word_count(text) * 60000.0 / NOMINAL_WORDS_PER_MINUTE / speaking_rate


@dataclass(frozen=True)
class SynthesisResult:
    audio_ref: str
    duration_ms: float
    voice_id: str


@dataclass(frozen=True)
class TranscriptionResult:
    text: str
    confidence: float


class TtsAdapter(ABC):
    """Turns reply text into a playable audio handle."""

    @abstractmethod
    def synthesize(self, text: str, voice: VoiceConfig) -> SynthesisResult: ...


class SttAdapter(ABC):
    """Turns a captured push-to-talk utterance into a transcript."""

    @abstractmethod
    def transcribe(self, text: str) -> TranscriptionResult: ...


class MockTts(TtsAdapter):
    """Deterministic synthesis: stable audio handle, word-priced duration."""

    def synthesize(self, text: str, voice: VoiceConfig) -> SynthesisResult:
        if not text:
            raise ValueError("cannot synthesize empty text")
        digest = hashlib.sha1(
            f"{voice.voice_id}:{voice.speaking_rate}:{text}".encode()
        ).hexdigest()[:12]
        return SynthesisResult(
            audio_ref=f"tone:{voice.voice_id}:{digest}",
            duration_ms=synthesis_duration_ms(text, voice.speaking_rate),
            voice_id=voice.voice_id,
        )


@dataclass(frozen=True)
class ErrorModel:
    """Per-word recognition failure rates in [0, 1]."""

    substitution_rate: float = 0.0
    drop_rate: float = 0.0

    def __post_init__(self) -> None:
        for name in ("substitution_rate", "drop_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    def apply(self, text: str, rng: Random) -> str:
        if self.substitution_rate == 0.0 and self.drop_rate == 0.0:
            return text
        kept: list[str] = []
        for word in text.split():
            if rng.random() < self.drop_rate:
                continue
            if rng.random() < self.substitution_rate:
                kept.append(_CONFUSIONS.get(word.lower(), rng.choice(_FILLERS)))
            else:
                kept.append(word)
        return " ".join(kept)


class MockStt(SttAdapter):
    """Deterministic recognizer: the error draw is keyed on (seed, text).

    Re-submitting the same utterance therefore reproduces the same
    transcript, which keeps whole simulation runs replayable from one seed.
    """

    def __init__(self, error_model: ErrorModel | None = None, seed: int | str = 0) -> None:
        self.error_model = error_model or ErrorModel()
        self.seed = seed

    def transcribe(self, text: str) -> TranscriptionResult:
        rng = Random(f"{self.seed}:{text}")
        heard = self.error_model.apply(text, rng)
        changed = sum(
            1 for a, b in zip(text.split(), heard.split()) if a != b
        ) + abs(word_count(text) - word_count(heard))
        confidence = 1.0 if heard == text else max(0.3, 1.0 - 0.15 * changed)
        return TranscriptionResult(text=heard, confidence=confidence)
