"""Unit-to-speech vocoding and the two speech-to-speech cloning pipelines.

``simulate_ground_truth`` renders clean-voice speech from whisper audio by
quantizing it and driving a vocoder trained on a reference voice;
``generate_clone_corpus`` runs the reverse direction, cloning a read-speech
corpus through a vocoder trained on the murmur voice to manufacture extra
murmur-voice training data. Both pipelines keep one unit per 20 ms frame,
so timing survives the round trip.

The bundled ``ToyVocoder`` is a deterministic per-unit oscillator bank:
each unit id carries a frequency and an amplitude, fitted to paired
(units, audio) data and rendered with a phase-continuous oscillator under
a Hann overlap-add amplitude envelope at the 20 ms hop. An adversarially
trained neural backend can be dropped in behind the same interface; its
reference configuration ships as the ``VocoderConfig`` defaults.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from . import dsp, tensorio
from .align import fastdtw, warp_to_target
from .corpus import AudioBuffer, Utterance, read_audio
from .encode import Codebook, EmbeddingSequence, EncoderBackend, UnitSequence, extract_embeddings, quantize
from .errors import MissingDependencyError, ValidationError

logger = logging.getLogger(__name__)


@dataclass
class VocoderConfig:
    """Vocoder hyperparameters; defaults are the reference configuration."""

    num_embeddings: int = 100
    embedding_dim: int = 128
    model_input_dim: int = 256
    learning_rate: float = 2e-4
    batch_size: int = 16
    speaker_ids: tuple[str, ...] = ("ref",)

    def __post_init__(self) -> None:
        self.speaker_ids = tuple(self.speaker_ids)
        if self.num_embeddings < 1:
            raise ValidationError("num_embeddings must be >= 1")
        if self.model_input_dim < self.embedding_dim:
            raise ValidationError("model_input_dim must be >= embedding_dim")
        if not self.speaker_ids:
            raise ValidationError("at least one speaker id is required")


@dataclass
class ParallelPair:
    """A murmur-side sequence paired with its speech-side target."""

    source: EmbeddingSequence | UnitSequence
    target: EmbeddingSequence
    aligned: bool = False

    def __post_init__(self) -> None:
        if self.aligned and len(self.source) != len(self.target):
            raise ValidationError(
                f"aligned pair has unequal lengths {len(self.source)} vs {len(self.target)}"
            )


@runtime_checkable
class VocoderBackend(Protocol):
    """Synthesizes audio from units or embeddings, per speaker."""

    name: str
    config: VocoderConfig
    is_trained: bool

    def fit(self, units: list[UnitSequence], audio: list[AudioBuffer], steps: int) -> list[float]:
        ...

    def synthesize(self, source: UnitSequence | EmbeddingSequence, speaker_id: str) -> AudioBuffer:
        ...


class ToyVocoder:
    """Deterministic oscillator-bank vocoder for desk-scale runs.

    Every unit id owns a (frequency, amplitude) pair. Fitting measures each
    unit's mean dominant frequency and mean sine amplitude in the paired
    audio, then relaxes the tables toward those measurements with a damped
    update, logging the squared mismatch per step. Additional speakers are
    deterministic pitch/gain variants of the fitted voice, so a single
    fitted table serves the whole configured speaker inventory.
    """

    #: relaxation factor per fit step; the adversarial backend uses
    #: config.learning_rate instead
    DAMPING = 0.5
    FREQ_SCALE = 1000.0  # puts Hz mismatch on a comparable footing with amplitude

    def __init__(
        self,
        config: VocoderConfig,
        sample_rate: int = 16000,
        frame_rate: float = 50.0,
        codebook: Codebook | None = None,
    ):
        self.name = "toy-oscillator"
        self.config = config
        self.sample_rate = sample_rate
        self.frame_rate = frame_rate
        self.hop = int(round(sample_rate / frame_rate))
        self.codebook = codebook
        k = config.num_embeddings
        self.freq = np.linspace(100.0, 6000.0, k)
        self.amp = np.full(k, 0.3)
        self.is_trained = False

    # -- speaker conditioning ------------------------------------------------
    def _speaker_index(self, speaker_id: str) -> int:
        try:
            return self.config.speaker_ids.index(speaker_id)
        except ValueError:
            raise ValidationError(
                f"unknown speaker {speaker_id!r}; available: {list(self.config.speaker_ids)}"
            ) from None

    def speaker_voice(self, speaker_id: str) -> tuple[float, float]:
        """(pitch_scale, gain) for a configured speaker; index 0 is the
        fitted voice, later speakers are shifted up two semitones each."""
        idx = self._speaker_index(speaker_id)
        return 2.0 ** (idx * 2.0 / 12.0), 0.9**idx

    def unit_frequency(self, unit: int, speaker_id: str | None = None) -> float:
        """The oscillator frequency a unit renders at, in Hz."""
        scale = 1.0 if speaker_id is None else self.speaker_voice(speaker_id)[0]
        return float(self.freq[unit] * scale)

    # -- training --------------------------------------------------------------
    def fit(
        self,
        units: list[UnitSequence],
        audio: list[AudioBuffer],
        steps: int = 50,
    ) -> list[float]:
        """Fit per-unit tables to paired data; returns the loss history
        (entry 0 is the pre-update loss, then one entry per step)."""
        if not units:
            raise ValidationError("vocoder training needs at least one pair")
        if len(units) != len(audio):
            raise ValidationError("units and audio lists differ in length")
        frame_units: list[np.ndarray] = []
        frame_amp: list[np.ndarray] = []
        frame_freq: list[np.ndarray] = []
        for useq, buf in zip(units, audio):
            if buf.sample_rate != self.sample_rate:
                raise ValidationError(f"expected {self.sample_rate} Hz audio")
            n_frames = buf.samples.size // self.hop
            if abs(len(useq) - n_frames) > 1:
                raise ValidationError(
                    f"units ({len(useq)}) and audio ({n_frames} frames) disagree by more than one frame"
                )
            if np.any(useq.units >= self.config.num_embeddings):
                raise ValidationError("unit id exceeds the vocoder embedding table")
            t = min(len(useq), n_frames)
            frames = dsp.frame_signal(buf.samples.astype(np.float64), self.hop, self.hop)[:t]
            frame_units.append(useq.units[:t])
            frame_amp.append(np.sqrt(2.0) * np.sqrt(np.mean(frames**2, axis=1)))
            frame_freq.append(dsp.dominant_frequency(frames, self.sample_rate, n_fft=2048))
        all_units = np.concatenate(frame_units)
        all_amp = np.concatenate(frame_amp)
        all_freq = np.concatenate(frame_freq)

        k = self.config.num_embeddings
        counts = np.bincount(all_units, minlength=k)
        seen = counts > 0
        target_amp = np.where(seen, np.bincount(all_units, weights=all_amp, minlength=k), self.amp * counts.clip(min=1))
        target_freq = np.where(seen, np.bincount(all_units, weights=all_freq, minlength=k), self.freq * counts.clip(min=1))
        target_amp = target_amp / counts.clip(min=1)
        target_freq = target_freq / counts.clip(min=1)

        def loss() -> float:
            da = self.amp[all_units] - all_amp
            df = (self.freq[all_units] - all_freq) / self.FREQ_SCALE
            return float(np.mean(da**2 + df**2))

        history = [loss()]
        for step in range(steps):
            self.amp[seen] += self.DAMPING * (target_amp[seen] - self.amp[seen])
            self.freq[seen] += self.DAMPING * (target_freq[seen] - self.freq[seen])
            history.append(loss())
            logger.debug("vocoder fit step %d: loss %.6g", step + 1, history[-1])
        self.amp = np.clip(self.amp, 0.0, 0.99)
        self.is_trained = True
        return history

    # -- synthesis -------------------------------------------------------------
    def _units_for(self, source: UnitSequence | EmbeddingSequence) -> UnitSequence:
        if isinstance(source, UnitSequence):
            if np.any(source.units >= self.config.num_embeddings):
                raise ValidationError("unit id exceeds the vocoder embedding table")
            return source
        if self.codebook is None:
            raise ValidationError(
                "embedding input requires a codebook attached to the vocoder"
            )
        return quantize(source, self.codebook)

    def synthesize(
        self, source: UnitSequence | EmbeddingSequence, speaker_id: str
    ) -> AudioBuffer:
        if not self.is_trained:
            raise MissingDependencyError("vocoder is untrained; fit it before synthesizing")
        pitch_scale, gain = self.speaker_voice(speaker_id)
        units = self._units_for(source).units
        t = units.size
        hop = self.hop
        n = t * hop

        # hold the carrier frequency through quiet frames so overlap-add
        # amplitude tails stay tonal instead of collapsing to an off-pitch hum
        frame_freq = self.freq[units].copy()
        quiet = self.amp[units] < 0.02
        for i in range(1, t):
            if quiet[i]:
                frame_freq[i] = frame_freq[i - 1]

        per_sample_freq = np.repeat(frame_freq * pitch_scale, hop)
        phase = np.cumsum(2.0 * np.pi * per_sample_freq / self.sample_rate)
        carrier = np.sin(phase)

        # zero-order-hold amplitude: steps exactly at frame boundaries, so a
        # rendered tone never bleeds into the following frame
        env = np.repeat(self.amp[units] * gain, hop)
        samples = np.clip(env * carrier, -1.0, 1.0).astype(np.float32)
        return AudioBuffer(samples=samples, sample_rate=self.sample_rate)

    # -- persistence -----------------------------------------------------------
    def save(self, path: str | Path) -> None:
        meta = {
            "kind": "toy-oscillator",
            "format_version": 1,
            "trained": self.is_trained,
            "sample_rate": self.sample_rate,
            "frame_rate": self.frame_rate,
            "config": {
                "num_embeddings": self.config.num_embeddings,
                "embedding_dim": self.config.embedding_dim,
                "model_input_dim": self.config.model_input_dim,
                "learning_rate": self.config.learning_rate,
                "batch_size": self.config.batch_size,
                "speaker_ids": list(self.config.speaker_ids),
            },
        }
        tensors = {"freq": self.freq, "amp": self.amp}
        if self.codebook is not None:
            tensors["codebook"] = self.codebook.centroids
        tensorio.write_bundle(path, meta, tensors)

    @classmethod
    def load(cls, path: str | Path) -> "ToyVocoder":
        meta, tensors = tensorio.read_bundle(path)
        if meta.get("kind") != "toy-oscillator":
            raise OSError(f"{path} is not a toy vocoder checkpoint")
        cfg = VocoderConfig(**{**meta["config"], "speaker_ids": tuple(meta["config"]["speaker_ids"])})
        backend = cls(
            cfg,
            sample_rate=meta["sample_rate"],
            frame_rate=meta["frame_rate"],
            codebook=Codebook(tensors["codebook"]) if "codebook" in tensors else None,
        )
        backend.freq = tensors["freq"][:, 0]
        backend.amp = tensors["amp"][:, 0]
        backend.is_trained = bool(meta["trained"])
        return backend


def train_vocoder(
    units: list[UnitSequence],
    audio: list[AudioBuffer],
    config: VocoderConfig,
    backend: VocoderBackend,
    steps: int = 50,
) -> VocoderBackend:
    """Fit the backend on paired (units, audio) data and return it."""
    if backend.config is not config and backend.config != config:
        raise ValidationError("backend was constructed with a different config")
    backend.fit(units, audio, steps=steps)
    return backend


def synthesize(
    source: UnitSequence | EmbeddingSequence,
    speaker_id: str,
    backend: VocoderBackend,
) -> AudioBuffer:
    """Render audio for the source in the given speaker's voice; the output
    spans len(source) / frame_rate seconds to within one hop."""
    return backend.synthesize(source, speaker_id)


def simulate_ground_truth(
    whisper_audio: AudioBuffer,
    codebook: Codebook,
    encoder: EncoderBackend,
    voice_vocoder: VocoderBackend,
    speaker_id: str | None = None,
) -> tuple[AudioBuffer, UnitSequence]:
    """Clean-voice rendition of a whisper recording.

    Quantizes the whisper's embeddings and drives a vocoder trained on the
    reference voice; returns the audio plus the unit sequence used, whose
    length equals the whisper's frame count.
    """
    embeddings = extract_embeddings(whisper_audio, encoder)
    units = quantize(embeddings, codebook)
    speaker = speaker_id if speaker_id is not None else voice_vocoder.config.speaker_ids[0]
    return synthesize(units, speaker, voice_vocoder), units


@dataclass
class CloneBatch:
    """Clone outputs plus per-utterance failures (id, reason)."""

    clones: list[tuple[AudioBuffer, Utterance]] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)


def generate_clone_corpus(
    speech_corpus: list[Utterance],
    codebook: Codebook,
    encoder: EncoderBackend,
    nam_vocoder: VocoderBackend,
    speaker_id: str | None = None,
) -> CloneBatch:
    """Clone each speech utterance into the murmur voice.

    Reads each utterance's primary audio (``nam_path``), quantizes it, and
    resynthesizes through the murmur-voice vocoder. Per-utterance failures
    are collected in the result rather than aborting the batch; each clone
    keeps a reference to its source utterance.
    """
    speaker = speaker_id if speaker_id is not None else nam_vocoder.config.speaker_ids[0]
    batch = CloneBatch()
    for utt in speech_corpus:
        try:
            audio = read_audio(utt.nam_path)
            embeddings = extract_embeddings(audio, encoder)
            units = quantize(embeddings, codebook)
            clone = synthesize(units, speaker, nam_vocoder)
            batch.clones.append((clone, utt))
        except (ValidationError, OSError, MissingDependencyError) as exc:
            logger.warning("clone failed for %s: %s", utt.id, exc)
            batch.failures.append((utt.id, str(exc)))
    return batch


def build_aligned_pairs(
    clone_embeddings: EmbeddingSequence,
    target_embeddings: EmbeddingSequence,
    radius: int = 1,
    distance: str = "euclidean",
) -> ParallelPair:
    """Time-align a clone onto its target timeline.

    Runs the multilevel aligner, warps the clone sequence onto the target
    timeline, and returns an aligned pair of equal lengths.
    """
    path = fastdtw(clone_embeddings, target_embeddings, radius=radius, distance=distance)
    warped = warp_to_target(clone_embeddings, path, len(target_embeddings))
    return ParallelPair(source=warped, target=target_embeddings, aligned=True)


def save_pair(path: str | Path, pair: ParallelPair, meta: dict | None = None) -> None:
    """Persist an aligned pair with provenance metadata."""
    if not pair.aligned:
        raise ValidationError("only aligned pairs are cached")
    if isinstance(pair.source, UnitSequence):
        raise ValidationError("pair caches hold embedding-based sources")
    bundle_meta = {"kind": "parallel-pair", "format_version": 1, "aligned": True}
    bundle_meta.update(meta or {})
    bundle_meta["frame_rate"] = pair.source.frame_rate
    tensorio.write_bundle(
        path,
        bundle_meta,
        {
            "source": pair.source.frames.astype(np.float32),
            "target": pair.target.frames.astype(np.float32),
        },
    )


def load_pair(path: str | Path) -> tuple[ParallelPair, dict]:
    meta, tensors = tensorio.read_bundle(path)
    if meta.get("kind") != "parallel-pair":
        raise OSError(f"{path} is not a parallel-pair cache")
    frame_rate = meta["frame_rate"]
    pair = ParallelPair(
        source=EmbeddingSequence(frames=tensors["source"], frame_rate=frame_rate),
        target=EmbeddingSequence(frames=tensors["target"], frame_rate=frame_rate),
        aligned=True,
    )
    return pair, meta
