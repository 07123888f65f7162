"""Shared signal-processing helpers: framing, mel filterbanks, cepstra."""

from __future__ import annotations

import numpy as np
import scipy.fft

from .corpus import AudioBuffer
from .errors import ValidationError

LOG_FLOOR = 1e-10


def frame_signal(samples: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    """Slice a signal into overlapping frames (no padding).

    Returns an (n_frames, frame_length) view-copy; raises if the signal is
    shorter than one frame.
    """
    samples = np.asarray(samples)
    if samples.size < frame_length:
        raise ValidationError(
            f"signal of {samples.size} samples is shorter than one frame ({frame_length})"
        )
    n_frames = 1 + (samples.size - frame_length) // hop
    idx = np.arange(frame_length)[None, :] + hop * np.arange(n_frames)[:, None]
    return samples[idx]


def hz_to_mel(hz: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    num_bands: int, n_fft: int, sample_rate: int, fmin: float = 20.0, fmax: float | None = None
) -> np.ndarray:
    """Triangular mel filterbank, shape (num_bands, n_fft // 2 + 1)."""
    if fmax is None:
        fmax = sample_rate / 2.0
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), num_bands + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.floor((n_fft + 1) * hz_points / sample_rate).astype(int)
    bins = np.clip(bins, 0, n_fft // 2)
    bank = np.zeros((num_bands, n_fft // 2 + 1), dtype=np.float64)
    for b in range(num_bands):
        left, center, right = bins[b], bins[b + 1], bins[b + 2]
        if center > left:
            bank[b, left:center] = (np.arange(left, center) - left) / (center - left)
        if right > center:
            bank[b, center:right] = (right - np.arange(center, right)) / (right - center)
        bank[b, center] = 1.0
    return bank


def power_spectrum(frames: np.ndarray, n_fft: int, window: np.ndarray | None = None) -> np.ndarray:
    if window is None:
        window = np.hanning(frames.shape[1])
    spectra = np.fft.rfft(frames * window[None, :], n=n_fft, axis=1)
    return np.abs(spectra) ** 2


def log_mel_spectrogram(
    audio: AudioBuffer,
    num_bands: int,
    frame_length: int,
    hop: int,
    n_fft: int | None = None,
) -> np.ndarray:
    """Log mel-band energies, shape (n_frames, num_bands)."""
    if n_fft is None:
        n_fft = 1
        while n_fft < frame_length:
            n_fft *= 2
    frames = frame_signal(audio.samples.astype(np.float64), frame_length, hop)
    power = power_spectrum(frames, n_fft)
    bank = mel_filterbank(num_bands, n_fft, audio.sample_rate)
    return np.log(np.maximum(power @ bank.T, LOG_FLOOR))


def mel_cepstra(
    audio: AudioBuffer,
    order: int = 25,
    num_bands: int = 40,
    frame_length_s: float = 0.025,
    hop_s: float = 0.010,
) -> np.ndarray:
    """Mel-cepstral coefficients with the energy coefficient dropped.

    ``order`` coefficients (c0..c{order-1}) are computed via a DCT-II of the
    log mel-band energies; c0 is excluded, so the result has order-1 columns.
    25 ms windows with a 10 ms hop.
    """
    frame_length = int(round(frame_length_s * audio.sample_rate))
    hop = int(round(hop_s * audio.sample_rate))
    logmel = log_mel_spectrogram(audio, num_bands, frame_length, hop)
    ceps = scipy.fft.dct(logmel, type=2, axis=1, norm="ortho")[:, :order]
    return ceps[:, 1:]


def dominant_frequency(frames: np.ndarray, sample_rate: int, n_fft: int = 1024) -> np.ndarray:
    """Per-frame frequency of the strongest rfft bin, in Hz."""
    window = np.hanning(frames.shape[1])
    mags = np.abs(np.fft.rfft(frames * window[None, :], n=n_fft, axis=1))
    peaks = np.argmax(mags, axis=1)
    return peaks * sample_rate / n_fft
