"""Synthetic speakers for desk-scale experiments.

A speaker is a fixed set of stable resonances (complex pole pairs); an
utterance is white Gaussian noise shaped by those resonances, with a small
per-utterance jitter of the pole angles and a syllable-like amplitude
envelope separated by short silences.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .dsp import AudioBuffer
from .lpc import PoleSet, coeffs_from_poles
from .warp import hz_to_angle

SAMPLE_RATE = 16000


@dataclass(frozen=True)
class SyntheticSpeaker:
    speaker_id: str
    formants_hz: np.ndarray
    radii: np.ndarray

    def poles(self, jitter: float = 0.0, rng: np.random.Generator | None = None) -> PoleSet:
        freqs = self.formants_hz
        if jitter:
            freqs = freqs * (1.0 + jitter * rng.standard_normal(len(freqs)))
        phi = np.clip(hz_to_angle(freqs, SAMPLE_RATE), 0.05, np.pi - 0.05)
        return PoleSet(np.concatenate([self.radii, self.radii]), np.concatenate([phi, -phi]))

    def coeffs(self, jitter: float = 0.0, rng=None) -> np.ndarray:
        return coeffs_from_poles(self.poles(jitter, rng))


def random_speaker(speaker_id: str, rng: np.random.Generator, n_formants: int = 5) -> SyntheticSpeaker:
    """Draw formants spread over 200-7000 Hz with radii in [0.88, 0.97]."""
    edges = np.linspace(200.0, 7000.0, n_formants + 1)
    formants = rng.uniform(edges[:-1], edges[1:])
    radii = rng.uniform(0.88, 0.97, n_formants)
    return SyntheticSpeaker(speaker_id, formants, radii)


def resonator_signal(coeffs, n_samples: int, rng: np.random.Generator, gain: float = 0.05) -> np.ndarray:
    """White noise through ``1/A(z)``."""
    excitation = gain * rng.standard_normal(n_samples)
    return lfilter([1.0], np.concatenate(([1.0], coeffs)), excitation)


def syllable_envelope(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Raised-cosine bursts of 150-300 ms separated by 30-80 ms gaps of silence."""
    env = np.zeros(n_samples)
    pos = int(rng.integers(400, 1200))
    while pos < n_samples:
        length = int(rng.integers(2400, 4800))
        end = min(pos + length, n_samples)
        t = np.arange(end - pos)
        env[pos:end] = np.sin(np.pi * t / length) ** 2
        pos = end + int(rng.integers(480, 1280))
    return env


def utterance(speaker: SyntheticSpeaker, rng: np.random.Generator, duration_s: float = 1.0, jitter: float = 0.03, peak: float = 0.5) -> AudioBuffer:
    n = int(round(duration_s * SAMPLE_RATE))
    x = resonator_signal(speaker.coeffs(jitter, rng), n, rng) * syllable_envelope(n, rng)
    top = np.max(np.abs(x))
    if top > 0:
        x *= peak / top
    return AudioBuffer(x, SAMPLE_RATE)


@dataclass
class SyntheticCorpus:
    speakers: list[SyntheticSpeaker]
    audio: dict[str, AudioBuffer]
    rows: list  # ManifestRow
    trials: list  # TrialRow


def make_corpus(
    n_speakers: int = 20,
    n_utterances: int = 6,
    n_enrolment: int = 2,
    seed: int = 0,
    duration_s: float = 1.0,
    jitter: float = 0.03,
    root: Path | str = "synthetic",
) -> SyntheticCorpus:
    """Build speakers, utterances, a manifest and an all-pairs trial list in memory.

    The first ``n_enrolment`` utterances of each speaker form the enrolment
    split and the rest the test split.  Trials pair every enrolment
    utterance with every test utterance.
    """
    from .audio_io import ManifestRow, TrialRow

    rng = np.random.default_rng(seed)
    root = Path(root)
    speakers = [random_speaker(f"spk{i:03d}", rng) for i in range(n_speakers)]
    audio, rows = {}, []
    for spk in speakers:
        for j in range(n_utterances):
            uid = f"{spk.speaker_id}_u{j}"
            split = "enrolment" if j < n_enrolment else "test"
            audio[uid] = utterance(spk, rng, duration_s, jitter)
            rows.append(ManifestRow(uid, root / spk.speaker_id / f"{uid}.wav", spk.speaker_id, split))
    enrol = [r for r in rows if r.split == "enrolment"]
    test = [r for r in rows if r.split == "test"]
    trials = [
        TrialRow(e.utterance_id, t.utterance_id, "target" if e.speaker_id == t.speaker_id else "non-target")
        for e in enrol
        for t in test
    ]
    return SyntheticCorpus(speakers, audio, rows, trials)


def write_corpus(corpus: SyntheticCorpus, directory: Path | str) -> tuple[Path, Path]:
    """Write WAVs, ``manifest.csv`` and ``trials.csv`` under ``directory``."""
    from .audio_io import write_csv, write_wav

    directory = Path(directory)
    manifest_rows = []
    for r in corpus.rows:
        rel = Path(r.speaker_id) / f"{r.utterance_id}.wav"
        (directory / rel).parent.mkdir(parents=True, exist_ok=True)
        write_wav(directory / rel, corpus.audio[r.utterance_id])
        manifest_rows.append([r.utterance_id, rel.as_posix(), r.speaker_id, r.split])
    manifest = directory / "manifest.csv"
    trials = directory / "trials.csv"
    write_csv(manifest, ["utterance_id", "path", "speaker_id", "split"], manifest_rows)
    write_csv(
        trials,
        ["enrolment_utterance_id", "test_utterance_id", "label"],
        [[t.enrolment_utterance_id, t.test_utterance_id, t.label] for t in corpus.trials],
    )
    return manifest, trials
