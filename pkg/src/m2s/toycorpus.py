"""Synthetic desk-scale corpus: tone-rendered murmur/whisper/speech trios.

Each character owns a frequency slot; an utterance renders its text as a
sequence of 80 ms tones with silent word gaps. The three voices share the
slot grid but differ in a small register offset and gain, which mimics the
real situation: recordings of the same sentence that carry the same
content in different voices, with murmur and whisper captured
simultaneously (equal durations). All output is seeded and bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import AudioBuffer, Utterance, save_manifest, write_audio

SAMPLE_RATE = 16000
HOP = 320  # 20 ms at 16 kHz
CHAR_FRAMES = 4
GAP_FRAMES = 4
EDGE_FRAMES = 2

CHAR_INVENTORY = "abcdefghijklmnopqrstuvwxyz'"

# character slots are spaced uniformly on the mel scale so that an
# 80-band mel front end keeps every pair of slots apart by >= 2 bands
_MEL_LO = 2595.0 * np.log10(1.0 + 300.0 / 700.0)
_MEL_HI = 2595.0 * np.log10(1.0 + 4500.0 / 700.0)
_MEL_STEP = (_MEL_HI - _MEL_LO) / (len(CHAR_INVENTORY) - 1)


@dataclass(frozen=True)
class Voice:
    name: str
    mel_offset: float
    gain: float


NAM_VOICE = Voice("nam", -25.0, 0.15)
WHISPER_VOICE = Voice("whisper", 10.0, 0.30)
SPEECH_VOICE = Voice("speech", 0.0, 0.70)

# word list drawn from a 14-letter alphabet (a..n) so a small codebook
# can give every character tone its own cluster
WORDS = (
    "ban", "cad", "dean", "fig", "gala", "hand", "jam", "kin", "lad",
    "mace", "nag", "bead", "clan", "dame", "each", "flag", "glen",
    "hinge", "jade", "kale", "lamb", "mind", "neck", "acid",
)


def char_frequency(char: str, voice: Voice) -> float:
    idx = CHAR_INVENTORY.index(char)
    mel = _MEL_LO + _MEL_STEP * idx + voice.mel_offset
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def render_text(text: str, voice: Voice, seed: int = 0) -> AudioBuffer:
    """Tone rendering of a text in the given voice; silence for word gaps."""
    rng = np.random.default_rng(seed)
    freqs: list[float] = [0.0] * EDGE_FRAMES
    amps: list[float] = [0.0] * EDGE_FRAMES
    words = text.split()
    for w, word in enumerate(words):
        if w > 0:
            freqs += [0.0] * GAP_FRAMES
            amps += [0.0] * GAP_FRAMES
        for char in word:
            f = char_frequency(char, voice) * (1.0 + rng.uniform(-0.003, 0.003))
            a = voice.gain * (1.0 + rng.uniform(-0.1, 0.1))
            freqs += [f] * CHAR_FRAMES
            amps += [a] * CHAR_FRAMES
    freqs += [0.0] * EDGE_FRAMES
    amps += [0.0] * EDGE_FRAMES

    # hold the carrier frequency through silent frames so overlap-add
    # amplitude tails stay tonal instead of collapsing to DC
    freq_track = np.asarray(freqs)
    for i in range(1, freq_track.size):
        if freq_track[i] == 0.0:
            freq_track[i] = freq_track[i - 1]

    per_sample_freq = np.repeat(freq_track, HOP)
    phase = np.cumsum(2.0 * np.pi * per_sample_freq / SAMPLE_RATE)
    carrier = np.sin(phase)

    t = len(freqs)
    window = np.hanning(2 * HOP)
    env = np.zeros(t * HOP + HOP)
    weight = np.zeros(t * HOP + HOP)
    for i, a in enumerate(amps):
        seg = slice(i * HOP, i * HOP + 2 * HOP)
        env[seg] += a * window
        weight[seg] += window
    env = env[: t * HOP] / np.maximum(weight[: t * HOP], 1e-12)
    samples = (env * carrier).astype(np.float32)
    return AudioBuffer(samples=samples, sample_rate=SAMPLE_RATE)


def sample_texts(count: int, seed: int, words_per_text: tuple[int, int] = (2, 4)) -> list[str]:
    """Seeded texts that cycle through the whole word list before repeating,
    so even small corpora cover the full character inventory."""
    rng = np.random.default_rng(seed)
    deck: list[str] = []
    texts = []
    for _ in range(count):
        n = int(rng.integers(words_per_text[0], words_per_text[1] + 1))
        picks = []
        for _ in range(n):
            if not deck:
                deck = [WORDS[i] for i in rng.permutation(len(WORDS))]
            picks.append(deck.pop())
        texts.append(" ".join(picks))
    return texts


def build_toy_corpus(
    root: str | Path,
    n_utterances: int = 20,
    n_speech: int = 12,
    seed: int = 0,
) -> tuple[list[Utterance], list[Utterance]]:
    """Write a murmur corpus plus a read-speech corpus under ``root``.

    The murmur corpus gets ``nam/<id>.wav``, ``whisper/<id>.wav`` and
    ``text/<id>.txt`` (consumed by the prepare stage); the read-speech
    corpus gets ``speech/<id>.wav`` and ``speech_manifest.jsonl`` with the
    audio in the record's primary path. Returns (murmur, speech) utterance
    lists.
    """
    root = Path(root)
    texts = sample_texts(n_utterances, seed)
    speech_texts = sample_texts(n_speech, seed + 1)

    utterances: list[Utterance] = []
    for i, text in enumerate(texts):
        utt_id = f"utt{i:03d}"
        nam_path = root / "nam" / f"{utt_id}.wav"
        whisper_path = root / "whisper" / f"{utt_id}.wav"
        write_audio(render_text(text, NAM_VOICE, seed=seed * 100003 + i), nam_path)
        write_audio(render_text(text, WHISPER_VOICE, seed=seed * 100003 + i), whisper_path)
        text_path = root / "text" / f"{utt_id}.txt"
        text_path.parent.mkdir(parents=True, exist_ok=True)
        text_path.write_text(text + "\n", encoding="utf-8")
        utterances.append(
            Utterance(id=utt_id, nam_path=nam_path, whisper_path=whisper_path, text=text)
        )

    speech_utts: list[Utterance] = []
    for i, text in enumerate(speech_texts):
        utt_id = f"read{i:03d}"
        path = root / "speech" / f"{utt_id}.wav"
        write_audio(render_text(text, SPEECH_VOICE, seed=seed * 200003 + i), path)
        speech_utts.append(Utterance(id=utt_id, nam_path=path, whisper_path=None, text=text))
    save_manifest(speech_utts, root / "speech_manifest.jsonl")
    return utterances, speech_utts
