"""Desk-scale evaluation tools.

A trainingless proxy speaker verifier (mean LPC cepstrum, cosine scoring)
stands in for a real ASV system, log-spectral distortion stands in for an
intelligibility measure, and the envelope/pole helpers expose what the warp
does to a single frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import dsp, lpc
from .errors import AnonymisationError, NumericError
from .warp import angle_to_hz, warp_angle

CEPSTRAL_ORDER = 20
LSD_FLOOR_DB = -100.0


@dataclass(frozen=True)
class EnvelopeCurve:
    freqs_hz: np.ndarray
    mags_db: np.ndarray

    @property
    def points(self):
        return list(zip(self.freqs_hz.tolist(), self.mags_db.tolist()))

    def peak_hz(self) -> float:
        return float(self.freqs_hz[np.argmax(self.mags_db)])


@dataclass(frozen=True)
class ScoreSet:
    """Similarity scores with boolean target labels (True = same speaker)."""

    scores: np.ndarray
    is_target: np.ndarray
    pairs: tuple = ()

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        labels = np.asarray(self.is_target, dtype=bool).reshape(-1)
        if scores.shape != labels.shape:
            raise ValueError("scores and labels differ in length")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "is_target", labels)

    @property
    def targets(self) -> np.ndarray:
        return self.scores[self.is_target]

    @property
    def nontargets(self) -> np.ndarray:
        return self.scores[~self.is_target]

    @classmethod
    def from_lists(cls, targets, nontargets) -> "ScoreSet":
        targets = np.asarray(targets, dtype=np.float64)
        nontargets = np.asarray(nontargets, dtype=np.float64)
        return cls(
            np.concatenate([targets, nontargets]),
            np.concatenate([np.ones(len(targets), bool), np.zeros(len(nontargets), bool)]),
        )


def envelope_from_coeffs(coeffs, grid_size: int = 512, sample_rate_hz: int = 16000) -> EnvelopeCurve:
    """All-pole envelope ``-20 log10 |A(e^jw)|`` on ``grid_size`` points over [0, pi]."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if not np.all(np.isfinite(coeffs)):
        raise NumericError("non-finite coefficients")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    omega = np.linspace(0.0, np.pi, grid_size)
    k = np.arange(1, len(coeffs) + 1)
    a_resp = 1.0 + np.exp(-1j * np.outer(omega, k)) @ coeffs
    mag = np.abs(a_resp)
    if np.any(mag == 0.0):
        raise NumericError("A(z) vanishes on the frequency grid (pole on the unit circle)")
    return EnvelopeCurve(angle_to_hz(omega, sample_rate_hz), -20.0 * np.log10(mag))


def lpc_to_cepstrum(coeffs, n_ceps: int = CEPSTRAL_ORDER) -> np.ndarray:
    """Cepstrum of ``1/A(z)``: ``c_n = -a_n - (1/n) sum_{k<n} k c_k a_{n-k}``.

    A 2-D ``coeffs`` is converted row by row.
    """
    a_in = np.asarray(coeffs, dtype=np.float64)
    a = np.atleast_2d(a_in)
    p = a.shape[1]
    c = np.zeros((a.shape[0], n_ceps + 1))
    for n in range(1, n_ceps + 1):
        k = np.arange(max(1, n - p), n)
        acc = (k * c[:, k] * a[:, n - k - 1]).sum(axis=1)
        c[:, n] = (-a[:, n - 1] if n <= p else 0.0) - acc / n
    return c[0, 1:] if a_in.ndim == 1 else c[:, 1:]


def embed_utterance(
    audio: dsp.AudioBuffer,
    order: int = CEPSTRAL_ORDER,
    frame_ms: float = dsp.DEFAULT_FRAME_MS,
    hop_ms: float = dsp.DEFAULT_HOP_MS,
) -> np.ndarray:
    """Mean LPC cepstrum over the voiced (non-silent) frames of an utterance."""
    stream = dsp.frame_signal(audio, frame_ms, hop_ms)
    models = lpc.fit_lpc_frames(stream.frames, order) if len(stream) else []
    voiced = [m.coeffs for m in models if not m.passthrough]
    if not voiced:
        raise AnonymisationError("utterance has no voiced frames")
    return np.mean(lpc_to_cepstrum(np.array(voiced), order), axis=0)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    denom = np.linalg.norm(u) * np.linalg.norm(v)
    if denom == 0.0:
        raise NumericError("cosine similarity of a zero vector")
    return float(np.clip(np.dot(u, v) / denom, -1.0, 1.0))


def score_trials(trials, embeddings: Mapping[str, np.ndarray], test_embeddings: Mapping[str, np.ndarray] | None = None) -> ScoreSet:
    """Cosine-score each trial.

    Enrolment ids are looked up in ``embeddings``; test ids in
    ``test_embeddings`` when given (e.g. anonymised test side), else in
    ``embeddings`` too.
    """
    test_embeddings = embeddings if test_embeddings is None else test_embeddings
    scores, labels, pairs = [], [], []
    for t in trials:
        try:
            e = embeddings[t.enrolment_utterance_id]
            s = test_embeddings[t.test_utterance_id]
        except KeyError as exc:
            raise AnonymisationError(
                f"trial ({t.enrolment_utterance_id}, {t.test_utterance_id}): no embedding for {exc.args[0]!r}"
            ) from None
        scores.append(cosine_similarity(e, s))
        labels.append(t.is_target)
        pairs.append((t.enrolment_utterance_id, t.test_utterance_id))
    return ScoreSet(np.array(scores), np.array(labels, dtype=bool), tuple(pairs))


def compute_eer(scores: ScoreSet) -> float:
    """Equal error rate with linear interpolation between operating points.

    A trial is accepted when its score is at or above the threshold.  The
    thresholds swept are every distinct score plus +inf; the EER is where the
    piecewise-linear false-accept/false-reject curve crosses FA = FR.
    """
    tar = np.sort(scores.targets)
    non = np.sort(scores.nontargets)
    if len(tar) == 0 or len(non) == 0:
        raise ValueError("EER needs at least one target and one non-target score")
    thresholds = np.concatenate([np.unique(scores.scores), [np.inf]])
    frr = np.searchsorted(tar, thresholds, side="left") / len(tar)
    far = 1.0 - np.searchsorted(non, thresholds, side="left") / len(non)
    diff = far - frr
    # diff runs from 1 (lowest threshold) down to -1 (+inf)
    i = int(np.flatnonzero(diff <= 0.0)[0])
    if diff[i] == 0.0:
        return float(far[i])
    lam = diff[i - 1] / (diff[i - 1] - diff[i])
    return float(far[i - 1] + lam * (far[i] - far[i - 1]))


def _log_spectra(audio: dsp.AudioBuffer, frame_ms, hop_ms):
    stream = dsp.frame_signal(audio, frame_ms, hop_ms)
    spec = np.abs(np.fft.rfft(stream.frames, axis=1))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(spec)
    return np.maximum(db, LSD_FLOOR_DB), np.sum(stream.frames**2, axis=1)


def log_spectral_distortion(
    original: dsp.AudioBuffer,
    processed: dsp.AudioBuffer,
    frame_ms: float = dsp.DEFAULT_FRAME_MS,
    hop_ms: float = dsp.DEFAULT_HOP_MS,
) -> float:
    """Mean per-frame RMS difference of log-magnitude spectra, in dB.

    Frames where either signal is voiced contribute; the first and last
    frames are skipped because overlap-add leaves them only partly covered.
    """
    if len(original) != len(processed) or original.sample_rate_hz != processed.sample_rate_hz:
        raise ValueError("signals must have equal length and sample rate")
    a_db, a_energy = _log_spectra(original, frame_ms, hop_ms)
    b_db, b_energy = _log_spectra(processed, frame_ms, hop_ms)
    voiced = (a_energy >= lpc.SILENCE_R0) | (b_energy >= lpc.SILENCE_R0)
    voiced[:1] = False
    voiced[-1:] = False
    if not np.any(voiced):
        return 0.0
    per_frame = np.sqrt(np.mean((a_db[voiced] - b_db[voiced]) ** 2, axis=1))
    return float(np.mean(per_frame))


def frame_model(audio: dsp.AudioBuffer, frame_index: int, order: int, frame_ms=dsp.DEFAULT_FRAME_MS, hop_ms=dsp.DEFAULT_HOP_MS) -> lpc.LpcModel:
    stream = dsp.frame_signal(audio, frame_ms, hop_ms)
    if not 0 <= frame_index < len(stream):
        raise IndexError(f"frame {frame_index} out of range (utterance has {len(stream)} frames)")
    return lpc.fit_lpc(stream.frames[frame_index], order)


def pole_table(poles: lpc.PoleSet, alphas: Sequence[float], sample_rate_hz: int = 16000):
    """Rows ``(rho, phi, phi**alpha for each alpha, freq_hz)`` for the upper half-plane.

    Real poles keep their angle in every warped column.
    """
    keep = poles.phi >= 0.0
    rho, phi = poles.rho[keep], poles.phi[keep]
    order = np.lexsort((rho, phi))
    header = ["rho", "phi"] + [f"phi_alpha_{a:g}" for a in alphas] + ["freq_hz"]
    rows = []
    real = np.abs(rho * np.sin(phi)) <= lpc.REAL_POLE_TOL
    for i in order:
        warped = [phi[i] if real[i] else warp_angle(phi[i], a) for a in alphas]
        rows.append([float(rho[i]), float(phi[i]), *map(float, warped), float(angle_to_hz(phi[i], sample_rate_hz))])
    return header, rows


def dump_poles(audio: dsp.AudioBuffer, frame_index: int, config, alphas: Sequence[float] = (0.9, 0.7, 0.5)):
    """Pole table of one analysed frame, with warped angles for each alpha."""
    model = frame_model(audio, frame_index, config.lpc_order, config.frame_ms, config.hop_ms)
    return pole_table(lpc.poles_from_coeffs(model), alphas, audio.sample_rate_hz)
