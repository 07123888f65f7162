"""Corpus management: manifests, deterministic splits, and WAV I/O.

A corpus is described by a UTF-8 JSON-lines manifest, one record per line
with keys ``id``, ``nam_path``, ``whisper_path`` (nullable) and ``text``.
Derived corpora (simulated ground truth, voice clones) add ``source_id``
and ``origin``. Audio is 16-bit PCM WAV, mono, canonically 16 kHz.
"""

from __future__ import annotations

import json
import math
import random
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

ORIGINS = ("natural", "simulated_gt", "clone")


@dataclass
class AudioBuffer:
    """Mono waveform with its sample rate. Samples live in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.size == 0:
            raise ValidationError("audio buffer is empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("audio buffer contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Utterance:
    """One corpus record: murmur audio, optional whisper audio, transcript."""

    id: str
    nam_path: Path
    whisper_path: Path | None
    text: str
    duration_s: float | None = None
    source_id: str | None = None
    origin: str = "natural"

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("utterance id must be nonempty")
        if not self.text:
            raise ValidationError(f"utterance {self.id!r} has empty text")
        if self.origin not in ORIGINS:
            raise ValidationError(f"utterance {self.id!r} has unknown origin {self.origin!r}")
        self.nam_path = Path(self.nam_path)
        if self.whisper_path is not None:
            self.whisper_path = Path(self.whisper_path)


@dataclass
class CorpusSplit:
    """Disjoint train/val/test partition of a manifest."""

    train: list[Utterance]
    val: list[Utterance]
    test: list[Utterance]
    seed: int

    def __post_init__(self) -> None:
        ids = [u.id for part in (self.train, self.val, self.test) for u in part]
        if len(ids) != len(set(ids)):
            raise ValidationError("split parts are not disjoint by id")


def load_manifest(path: str | Path) -> list[Utterance]:
    """Parse a JSON-lines manifest, preserving file order.

    Raises ValidationError naming the offending line for malformed records
    and for duplicate ids.
    """
    path = Path(path)
    utterances: list[Utterance] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed record: {exc}") from exc
            if not isinstance(record, dict):
                raise ValidationError(f"{path}:{lineno}: record is not an object")
            missing = {"id", "nam_path", "text"} - record.keys()
            if missing:
                raise ValidationError(
                    f"{path}:{lineno}: missing fields: {', '.join(sorted(missing))}"
                )
            try:
                utt = Utterance(
                    id=record["id"],
                    nam_path=record["nam_path"],
                    whisper_path=record.get("whisper_path"),
                    text=record["text"],
                    duration_s=record.get("duration_s"),
                    source_id=record.get("source_id"),
                    origin=record.get("origin", "natural"),
                )
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if utt.id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate id {utt.id!r}")
            seen.add(utt.id)
            utterances.append(utt)
    return utterances


def save_manifest(utterances: list[Utterance], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for utt in utterances:
            record: dict = {
                "id": utt.id,
                "nam_path": str(utt.nam_path),
                "whisper_path": None if utt.whisper_path is None else str(utt.whisper_path),
                "text": utt.text,
            }
            if utt.duration_s is not None:
                record["duration_s"] = round(utt.duration_s, 6)
            if utt.origin != "natural":
                record["origin"] = utt.origin
            if utt.source_id is not None:
                record["source_id"] = utt.source_id
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_corpus(
    utterances: list[Utterance],
    test_frac: float = 0.13,
    val_frac: float = 0.05,
    seed: int = 0,
) -> CorpusSplit:
    """Deterministic random partition into train/val/test.

    The test set takes round(test_frac * N) utterances; validation takes
    round(val_frac * remaining) from the post-test training pool. Rounding
    is half-up. Splits are returned in manifest order.
    """
    if not utterances:
        raise ValidationError("cannot split an empty corpus")
    if test_frac < 0 or val_frac < 0:
        raise ValidationError("split fractions must be nonnegative")
    if test_frac + val_frac * (1.0 - test_frac) >= 1.0:
        raise ValidationError("split fractions leave no training data")
    ids = [u.id for u in utterances]
    if len(ids) != len(set(ids)):
        raise ValidationError("duplicate utterance ids in split input")

    n = len(utterances)
    n_test = _round_half_up(test_frac * n)
    n_val = _round_half_up(val_frac * (n - n_test))

    order = list(range(n))
    random.Random(seed).shuffle(order)
    test_idx = set(order[:n_test])
    val_idx = set(order[n_test : n_test + n_val])

    train = [u for i, u in enumerate(utterances) if i not in test_idx and i not in val_idx]
    val = [u for i, u in enumerate(utterances) if i in val_idx]
    test = [u for i, u in enumerate(utterances) if i in test_idx]
    return CorpusSplit(train=train, val=val, test=test, seed=seed)


def read_audio(path: str | Path) -> AudioBuffer:
    """Read a PCM WAV file as a mono buffer; multichannel input is averaged."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            sample_width = fh.getsampwidth()
            sample_rate = fh.getframerate()
            n_frames = fh.getnframes()
            raw = fh.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise OSError(f"cannot read audio file {path}: {exc}") from exc
    if sample_width != 2:
        raise OSError(f"{path}: only 16-bit PCM is supported, got {8 * sample_width}-bit")
    if n_frames == 0:
        raise ValidationError(f"{path}: zero-length audio")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return AudioBuffer(samples=data, sample_rate=sample_rate)


def write_audio(buffer: AudioBuffer, path: str | Path) -> None:
    """Write a 16-bit PCM mono WAV; read_audio round-trips samples within
    one quantization step (2/32768)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scaled = np.clip(np.round(buffer.samples.astype(np.float64) * 32768.0), -32768, 32767)
    pcm = scaled.astype("<i2")
    try:
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(buffer.sample_rate)
            fh.writeframes(pcm.tobytes())
    except (wave.Error, OSError) as exc:
        raise OSError(f"cannot write audio file {path}: {exc}") from exc
