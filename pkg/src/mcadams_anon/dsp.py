"""Short-time framing and overlap-add reconstruction.

The analysis window is applied exactly once, at framing time.  With a
periodic Hann window at 50% overlap the shifted windows sum to one, so
``overlap_add(frame_signal(x))`` reproduces ``x`` everywhere except the first
hop, which only a single (rising) window covers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StructuralError

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_FRAME_MS = 20.0
DEFAULT_HOP_MS = 10.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: float samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected mono samples, got shape {samples.shape}")
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be a positive integer, got {self.sample_rate_hz}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class FrameStream:
    """Windowed frames of shape ``(n_frames, frame_len)`` and their geometry."""

    frames: np.ndarray
    frame_len: int
    hop: int
    window: np.ndarray = field(repr=False)

    def __len__(self):
        return self.frames.shape[0]

    def with_frames(self, frames: np.ndarray) -> "FrameStream":
        """Same geometry, different frame contents (e.g. after processing)."""
        return FrameStream(np.asarray(frames, dtype=np.float64), self.frame_len, self.hop, self.window)


def ms_to_samples(duration_ms: float, sample_rate_hz: int) -> int:
    """Convert a duration to a whole number of samples or raise ConfigError."""
    exact = duration_ms * sample_rate_hz / 1000.0
    count = int(round(exact))
    if count <= 0 or abs(exact - count) > 1e-9:
        raise ConfigError(
            f"{duration_ms} ms is not a whole positive number of samples at {sample_rate_hz} Hz"
        )
    return count


def periodic_hann(n: int) -> np.ndarray:
    # periodic (DFT-even) form: w[k] + w[k + n/2] == 1 exactly
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_geometry(sample_rate_hz: int, frame_ms: float, hop_ms: float) -> tuple[int, int]:
    frame_len = ms_to_samples(frame_ms, sample_rate_hz)
    hop = ms_to_samples(hop_ms, sample_rate_hz)
    if frame_len != 2 * hop:
        raise ConfigError(f"frame length ({frame_len}) must be twice the hop ({hop}) for 50% overlap")
    return frame_len, hop


def frame_count(n_samples: int, hop: int) -> int:
    return -(-n_samples // hop)


def frame_signal(
    audio: AudioBuffer,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
) -> FrameStream:
    """Cut ``audio`` into Hann-windowed frames at 50% overlap.

    Frame ``k`` starts at sample ``k * hop``; there are ``ceil(N / hop)``
    frames, the last ones zero-padded to the full frame length.

    Parameters
    ----------
    audio : AudioBuffer
        Input signal.
    frame_ms, hop_ms : float
        Frame and hop durations.  Both must map to whole sample counts and
        the frame must be exactly twice the hop.

    Returns
    -------
    FrameStream
        Windowed frames.  An empty input yields zero frames.
    """
    frame_len, hop = frame_geometry(audio.sample_rate_hz, frame_ms, hop_ms)
    window = periodic_hann(frame_len)
    x = audio.samples
    n_frames = frame_count(len(x), hop)
    padded = np.zeros((n_frames - 1) * hop + frame_len if n_frames else 0)
    padded[: len(x)] = x
    if n_frames:
        idx = np.arange(n_frames)[:, None] * hop + np.arange(frame_len)[None, :]
        frames = padded[idx] * window
    else:
        frames = np.zeros((0, frame_len))
    return FrameStream(frames, frame_len, hop, window)


def overlap_add(frames: FrameStream, output_len: int, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    """Sum frames at their hop offsets and truncate to ``output_len`` samples."""
    data = np.asarray(frames.frames, dtype=np.float64)
    if data.ndim != 2 or (data.shape[0] and data.shape[1] != frames.frame_len):
        raise StructuralError(f"frames of shape {data.shape} do not match frame length {frames.frame_len}")
    if len(frames.window) != frames.frame_len or frames.hop <= 0 or frames.hop > frames.frame_len:
        raise StructuralError("inconsistent frame geometry")
    n_frames = data.shape[0]
    total = max(output_len, (n_frames - 1) * frames.hop + frames.frame_len if n_frames else 0)
    out = np.zeros(total)
    for k in range(n_frames):
        start = k * frames.hop
        out[start : start + frames.frame_len] += data[k]
    return AudioBuffer(out[:output_len], sample_rate_hz)
