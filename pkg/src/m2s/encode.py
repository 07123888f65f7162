"""Frame-level embedding extraction, codebook learning, and quantization.

Encoder backends turn audio into T x D frame matrices at a fixed frame
rate (canonically 768-dim at 50 Hz). A k-means codebook over pooled
embeddings yields discrete per-frame units, one unit per frame with no
run-length collapsing, so unit sequences stay time-aligned with their
source embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from . import dsp, tensorio
from .corpus import AudioBuffer
from .errors import MissingDependencyError, ValidationError


@dataclass
class EmbeddingSequence:
    """T x D matrix of frame embeddings at a fixed frame rate."""

    frames: np.ndarray
    frame_rate: float

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValidationError(f"embedding matrix must be T x D with T >= 1, got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise ValidationError("embedding matrix contains non-finite entries")
        if self.frame_rate <= 0:
            raise ValidationError("frame_rate must be positive")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class Codebook:
    """K x D centroid matrix from k-means over frame embeddings."""

    centroids: np.ndarray

    def __post_init__(self) -> None:
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise ValidationError("centroids must be a K x D matrix with K >= 1")
        if not np.all(np.isfinite(self.centroids)):
            raise ValidationError("centroids contain non-finite entries")

    @property
    def num_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass
class UnitSequence:
    """Per-frame cluster ids; same length as the source embedding sequence."""

    units: np.ndarray
    frame_rate: float

    def __post_init__(self) -> None:
        self.units = np.asarray(self.units, dtype=np.int64).reshape(-1)
        if self.units.size < 1:
            raise ValidationError("unit sequence is empty")
        if np.any(self.units < 0):
            raise ValidationError("unit ids must be nonnegative")
        if self.frame_rate <= 0:
            raise ValidationError("frame_rate must be positive")

    def __len__(self) -> int:
        return self.units.size


@runtime_checkable
class EncoderBackend(Protocol):
    """Deterministic audio-to-embedding backend."""

    name: str
    dim: int
    frame_rate: float

    def embed(self, audio: AudioBuffer) -> np.ndarray:
        """Return a T x dim float matrix for the given audio."""
        ...


class ToyEncoder:
    """Deterministic stand-in encoder: mean-normalized log-mel frames passed
    through a fixed seeded linear projection to 768 dimensions at 50 Hz.

    The per-frame mean normalization makes the embedding insensitive to a
    global gain, which is what lets quiet murmur recordings and ordinary
    speech of the same content quantize to the same units.
    """

    def __init__(self, dim: int = 768, seed: int = 0, num_bands: int = 80):
        self.name = f"toy-fbank-{num_bands}x{dim}-s{seed}"
        self.dim = dim
        self.frame_rate = 50.0
        self.num_bands = num_bands
        self.seed = seed
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((num_bands, dim)) / np.sqrt(num_bands)

    def embed(self, audio: AudioBuffer) -> np.ndarray:
        # hop-length analysis windows: T = ceil(len / hop), tail zero-padded
        hop = int(round(audio.sample_rate / self.frame_rate))
        if audio.samples.size < hop:
            raise ValidationError("audio is shorter than one encoder frame")
        n_frames = -(-audio.samples.size // hop)
        samples = np.zeros(n_frames * hop, dtype=np.float32)
        samples[: audio.samples.size] = audio.samples
        padded = AudioBuffer(samples=samples, sample_rate=audio.sample_rate)
        logmel = dsp.log_mel_spectrogram(padded, self.num_bands, hop, hop)
        logmel = logmel - logmel.mean(axis=1, keepdims=True)
        return (logmel @ self._projection).astype(np.float32)


class HubertEncoder:
    """Wrapper around a pretrained self-supervised speech encoder.

    Loads weights from a local path or hub name via ``transformers``; the
    hidden state of a selectable layer (default: final encoder layer) is
    returned. Weights are external to this package.
    """

    def __init__(self, model_path: str, layer: int | None = None):
        try:
            import torch
            from transformers import HubertModel
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise MissingDependencyError(
                "the pretrained encoder backend requires torch and transformers"
            ) from exc
        try:
            self._model = HubertModel.from_pretrained(model_path)
        except Exception as exc:  # pragma: no cover - weights are external
            raise MissingDependencyError(
                f"cannot load pretrained encoder from {model_path!r}: {exc}"
            ) from exc
        self._model.eval()
        self._torch = torch
        self.layer = layer
        self.name = f"hubert:{model_path}:layer={'last' if layer is None else layer}"
        self.dim = int(self._model.config.hidden_size)
        self.frame_rate = 50.0

    def embed(self, audio: AudioBuffer) -> np.ndarray:  # pragma: no cover - weights are external
        torch = self._torch
        if audio.sample_rate != 16000:
            raise ValidationError("pretrained encoder expects 16 kHz audio")
        with torch.no_grad():
            wav = torch.from_numpy(audio.samples[None, :].astype(np.float32))
            out = self._model(wav, output_hidden_states=self.layer is not None)
            if self.layer is None:
                hidden = out.last_hidden_state
            else:
                hidden = out.hidden_states[self.layer]
        return hidden[0].numpy()


def extract_embeddings(audio: AudioBuffer, backend: EncoderBackend) -> EmbeddingSequence:
    """Run the backend; output length is floor(duration * frame_rate) +- 1."""
    frames = backend.embed(audio)
    if frames.shape[0] < 1:
        raise ValidationError("audio is shorter than one encoder frame")
    if frames.shape[1] != backend.dim:
        raise ValidationError(
            f"backend {backend.name} produced dim {frames.shape[1]}, declared {backend.dim}"
        )
    return EmbeddingSequence(frames=frames, frame_rate=backend.frame_rate)


def _pool_frames(embeddings: list[EmbeddingSequence]) -> np.ndarray:
    if not embeddings:
        raise ValidationError("no embedding sequences given")
    dims = {e.dim for e in embeddings}
    if len(dims) != 1:
        raise ValidationError(f"embedding sequences disagree on dim: {sorted(dims)}")
    return np.concatenate([np.asarray(e.frames, dtype=np.float64) for e in embeddings], axis=0)


def kmeans_plus_plus_init(frames: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Seed centroids by D^2-weighted sampling; deterministic given seed."""
    rng = np.random.default_rng(seed)
    n = frames.shape[0]
    centroids = np.empty((k, frames.shape[1]), dtype=np.float64)
    first = rng.integers(n)
    centroids[0] = frames[first]
    closest = np.sum((frames - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining points coincide with chosen centroids; any pick works
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[i] = frames[idx]
        closest = np.minimum(closest, np.sum((frames - centroids[i]) ** 2, axis=1))
    return centroids


def _assign(frames: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # squared distances via the expansion trick; exact argmin re-checked cheaply
    d2 = (
        np.sum(frames**2, axis=1)[:, None]
        - 2.0 * frames @ centroids.T
        + np.sum(centroids**2, axis=1)[None, :]
    )
    labels = np.argmin(d2, axis=1)
    dists = d2[np.arange(frames.shape[0]), labels]
    return labels, np.maximum(dists, 0.0)


def fit_codebook(
    embeddings: list[EmbeddingSequence],
    k: int,
    seed: int = 0,
    max_iters: int = 100,
) -> Codebook:
    """Lloyd's algorithm with k-means++ seeding over pooled frames.

    Runs until assignments stop changing or ``max_iters`` is reached.
    A cluster that loses all points keeps its previous centroid. The
    within-cluster squared distance never increases across iterations.
    """
    frames = _pool_frames(embeddings)
    if frames.shape[0] < k:
        raise ValidationError(f"need at least k={k} frames, got {frames.shape[0]}")
    centroids = kmeans_plus_plus_init(frames, k, seed)
    labels = np.full(frames.shape[0], -1, dtype=np.int64)
    for _ in range(max_iters):
        new_labels, _ = _assign(frames, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = frames[labels == j]
            if members.shape[0] > 0:
                centroids[j] = members.mean(axis=0)
    return Codebook(centroids=centroids)


def codebook_distortion(frames: np.ndarray, codebook: Codebook) -> float:
    """Total within-cluster squared distance of frames under the codebook."""
    _, dists = _assign(np.asarray(frames, dtype=np.float64), codebook.centroids)
    return float(dists.sum())


def quantize(embeddings: EmbeddingSequence, codebook: Codebook) -> UnitSequence:
    """Nearest-centroid unit per frame; ties break to the lowest index.

    Output length always equals the embedding length.
    """
    if embeddings.dim != codebook.dim:
        raise ValidationError(
            f"embedding dim {embeddings.dim} != codebook dim {codebook.dim}"
        )
    frames = np.asarray(embeddings.frames, dtype=np.float64)
    diffs = frames[:, None, :] - codebook.centroids[None, :, :]
    d2 = np.sum(diffs * diffs, axis=2)
    units = np.argmin(d2, axis=1)  # argmin returns the first (lowest) index on ties
    return UnitSequence(units=units, frame_rate=embeddings.frame_rate)


def save_embeddings(path: str | Path, embeddings: EmbeddingSequence) -> None:
    tensorio.write_tensor(path, embeddings.frames.astype(np.float32), embeddings.frame_rate)


def load_embeddings(path: str | Path) -> EmbeddingSequence:
    frames, frame_rate = tensorio.read_tensor(path)
    return EmbeddingSequence(frames=frames, frame_rate=frame_rate)


def save_units(path: str | Path, units: UnitSequence) -> None:
    tensorio.write_tensor(path, units.units.astype(np.int64), units.frame_rate)


def load_units(path: str | Path) -> UnitSequence:
    arr, frame_rate = tensorio.read_tensor(path)
    return UnitSequence(units=arr[:, 0], frame_rate=frame_rate)
