"""Utterance- and corpus-level McAdams anonymisation.

Each speaker gets one coefficient per split, drawn uniformly from the
configured range by hashing ``(secret_seed, speaker_id, split)``.  The draw
is therefore reproducible, independent of processing order, and different
for the enrolment and test halves of a corpus.
"""

from __future__ import annotations

import dataclasses
import hashlib
import hmac
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import dsp, lpc
from .errors import AnonymisationError, ConfigError, InputError, NumericError
from .warp import validate_alpha, warp_poleset

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.8
DEFAULT_LPC_ORDER = 20
STANDARD_RANGES = ((0.8, 0.9), (0.7, 0.9), (0.6, 0.9), (0.5, 0.9))
REQUIRED_SAMPLE_RATE = 16000
REDACTED = "redacted"


@dataclass(frozen=True)
class AnonymisationConfig:
    """How to anonymise: fixed or uniform coefficient plus analysis settings.

    The default is the fixed ``alpha = 0.8``, order-20 secondary baseline.
    """

    mode: str = "fixed"
    alpha: float | None = DEFAULT_ALPHA
    alpha_min: float | None = None
    alpha_max: float | None = None
    lpc_order: int = DEFAULT_LPC_ORDER
    frame_ms: float = dsp.DEFAULT_FRAME_MS
    hop_ms: float = dsp.DEFAULT_HOP_MS
    secret_seed: bytes = field(default=b"", repr=False)
    split: str = ""

    def __post_init__(self):
        if isinstance(self.secret_seed, str):
            object.__setattr__(self, "secret_seed", self.secret_seed.encode("utf-8"))
        if self.mode == "fixed":
            if self.alpha is None:
                raise ConfigError("fixed mode requires alpha")
            object.__setattr__(self, "alpha", validate_alpha(self.alpha))
            object.__setattr__(self, "alpha_min", None)
            object.__setattr__(self, "alpha_max", None)
        elif self.mode == "uniform":
            if self.alpha_min is None or self.alpha_max is None:
                raise ConfigError("uniform mode requires alpha_min and alpha_max")
            lo = validate_alpha(self.alpha_min)
            hi = validate_alpha(self.alpha_max)
            if lo > hi:
                raise ConfigError(f"alpha_min ({lo}) exceeds alpha_max ({hi})")
            object.__setattr__(self, "alpha", None)
            object.__setattr__(self, "alpha_min", lo)
            object.__setattr__(self, "alpha_max", hi)
        else:
            raise ConfigError(f"unknown mode {self.mode!r}; expected 'fixed' or 'uniform'")
        if int(self.lpc_order) != self.lpc_order or self.lpc_order < 2:
            raise ConfigError(f"lpc_order must be an integer >= 2, got {self.lpc_order}")
        object.__setattr__(self, "lpc_order", int(self.lpc_order))
        # fail early on geometry that cannot be framed at the working rate
        dsp.frame_geometry(REQUIRED_SAMPLE_RATE, self.frame_ms, self.hop_ms)

    @classmethod
    def fixed(cls, alpha: float = DEFAULT_ALPHA, **kwargs) -> "AnonymisationConfig":
        return cls(mode="fixed", alpha=alpha, **kwargs)

    @classmethod
    def uniform(cls, alpha_min: float, alpha_max: float, **kwargs) -> "AnonymisationConfig":
        return cls(mode="uniform", alpha=None, alpha_min=alpha_min, alpha_max=alpha_max, **kwargs)

    def replace(self, **changes) -> "AnonymisationConfig":
        return dataclasses.replace(self, **changes)

    def describe(self) -> str:
        if self.mode == "fixed":
            return f"fixed({self.alpha:g})"
        return f"uniform({self.alpha_min:g},{self.alpha_max:g})"


@dataclass(frozen=True)
class SpeakerContext:
    speaker_id: str
    alpha: float
    mode: str
    seed_digest: str
    split: str


def seed_digest(secret_seed: bytes) -> str:
    """Short public fingerprint of a secret seed, safe to log."""
    return hashlib.sha256(b"seed-digest\x00" + secret_seed).hexdigest()[:12]


def keyed_uniform(secret_seed: bytes, speaker_id: str, split: str) -> float:
    """Deterministic u in [0, 1) from HMAC-SHA256 of the speaker and split."""
    msg = speaker_id.encode("utf-8") + b"\x00" + split.encode("utf-8")
    digest = hmac.new(secret_seed, msg, hashlib.sha256).digest()
    return (int.from_bytes(digest[:8], "big") >> 11) / float(1 << 53)


def sample_alpha(config: AnonymisationConfig, speaker_id: str, split: str | None = None) -> SpeakerContext:
    """Resolve the coefficient for one speaker.

    ``split`` defaults to ``config.split``.  Fixed mode returns the configured
    value for every speaker and split.
    """
    split = config.split if split is None else split
    if config.mode == "fixed":
        alpha = config.alpha
    else:
        lo, hi = config.alpha_min, config.alpha_max
        u = keyed_uniform(config.secret_seed, speaker_id, split)
        alpha = lo + u * (hi - lo)
        if hi > lo and alpha >= hi:
            alpha = float(np.nextafter(hi, lo))
    return SpeakerContext(speaker_id, float(alpha), config.mode, seed_digest(config.secret_seed), split)


def anonymise_frame(frame: np.ndarray, alpha: float, order: int, frame_index: int | None = None) -> np.ndarray:
    """Warp one windowed frame: LPC fit, pole warp, resynthesis from the residual."""
    model = lpc.fit_lpc(frame, order)
    if model.passthrough:
        return model.residual
    return _resynthesise(model, lpc.poles_from_coeffs(model), alpha, frame_index)


def _resynthesise(model: lpc.LpcModel, poles: lpc.PoleSet, alpha: float, frame_index) -> np.ndarray:
    new_coeffs = lpc.coeffs_from_poles(warp_poleset(poles, alpha))
    return lpc.synthesize(new_coeffs, model.residual, frame_index)


def anonymise_utterance(
    audio: dsp.AudioBuffer,
    ctx: SpeakerContext | float,
    config: AnonymisationConfig | None = None,
) -> dsp.AudioBuffer:
    """Anonymise a 16 kHz utterance with the speaker's coefficient.

    ``ctx`` may be a resolved :class:`SpeakerContext` or a bare coefficient.
    The output has the input's length; it is scaled down only if some sample
    would otherwise exceed full scale.
    """
    config = config or AnonymisationConfig()
    alpha = validate_alpha(ctx.alpha if isinstance(ctx, SpeakerContext) else ctx)
    if audio.sample_rate_hz != REQUIRED_SAMPLE_RATE:
        raise InputError(f"expected {REQUIRED_SAMPLE_RATE} Hz audio, got {audio.sample_rate_hz} Hz")
    stream = dsp.frame_signal(audio, config.frame_ms, config.hop_ms)
    # analysis is batched over frames; warping and synthesis stay per frame
    models = lpc.fit_lpc_frames(stream.frames, config.lpc_order) if len(stream) else []
    voiced = [k for k, m in enumerate(models) if not m.passthrough]
    coeff_rows = np.array([models[k].coeffs for k in voiced]).reshape(len(voiced), config.lpc_order)
    poles = dict(zip(voiced, lpc.poles_from_coeff_rows(coeff_rows)))
    out_frames = np.empty_like(stream.frames)
    for k, model in enumerate(models):
        out_frames[k] = model.residual if model.passthrough else _resynthesise(model, poles[k], alpha, k)
    out = dsp.overlap_add(stream.with_frames(out_frames), len(audio), audio.sample_rate_hz).samples
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite samples after overlap-add")
    peak = np.max(np.abs(out)) if len(out) else 0.0
    if peak > 1.0:
        out = out / peak
    return dsp.AudioBuffer(out, audio.sample_rate_hz)


@dataclass
class UtteranceResult:
    utterance_id: str
    speaker_id: str
    split: str
    alpha: float | None
    status: str
    output_path: str
    failure: str | None = None  # "io" or "processing"


@dataclass
class CorpusReport:
    """Outcome of a corpus run: one entry per utterance and per (speaker, split)."""

    utterances: list[UtteranceResult] = field(default_factory=list)
    speakers: dict[tuple[str, str], float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(u.status == "ok" for u in self.utterances)

    @property
    def failures(self) -> list[UtteranceResult]:
        return [u for u in self.utterances if u.status != "ok"]

    def rows(self, reveal_alpha: bool = False) -> list[dict[str, str]]:
        rows = []
        for u in self.utterances:
            if u.alpha is None:
                alpha = ""
            else:
                alpha = repr(u.alpha) if reveal_alpha else REDACTED
            rows.append(
                {
                    "utterance_id": u.utterance_id,
                    "speaker_id": u.speaker_id,
                    "split": u.split,
                    "alpha": alpha,
                    "status": u.status,
                    "output": u.output_path,
                }
            )
        return rows


def config_for_split(configs: AnonymisationConfig | Mapping[str, AnonymisationConfig] | Sequence[AnonymisationConfig], split: str) -> AnonymisationConfig:
    """Pick the config governing a split.

    A config whose ``split`` equals the row's split wins; otherwise a config
    with an empty ``split`` applies, hashed with the row's split label.
    """
    if isinstance(configs, AnonymisationConfig):
        candidates = [configs]
    elif isinstance(configs, Mapping):
        candidates = [c if c.split else c.replace(split=k) for k, c in configs.items()]
    else:
        candidates = list(configs)
    for c in candidates:
        if c.split == split:
            return c
    for c in candidates:
        if not c.split:
            return c.replace(split=split)
    raise ConfigError(f"no configuration covers split {split!r}")


def output_paths(rows, outdir: Path) -> dict[str, Path]:
    """Map utterance ids to output paths mirroring the input tree under ``outdir``."""
    if not rows:
        return {}
    resolved = {r.utterance_id: Path(os.path.abspath(r.path)) for r in rows}
    parents = [str(p.parent) for p in resolved.values()]
    root = Path(os.path.commonpath(parents))
    out = {uid: Path(outdir) / p.relative_to(root) for uid, p in resolved.items()}
    seen: dict[Path, str] = {}
    for uid, p in out.items():
        if p in seen:
            raise ConfigError(f"utterances {seen[p]!r} and {uid!r} map to the same output path {p}")
        seen[p] = uid
    return out


def anonymise_corpus(
    manifest: Iterable,
    configs,
    outdir: str | Path,
    jobs: int = 1,
) -> CorpusReport:
    """Anonymise every manifest row and write WAVs under ``outdir``.

    Unreadable or unprocessable utterances are recorded in the report and
    skipped; two rows mapping to the same output file abort the run before
    anything is written.
    """
    from .audio_io import read_wav, write_wav

    rows = list(manifest)
    outdir = Path(outdir)
    targets = output_paths(rows, outdir)
    report = CorpusReport()
    contexts: dict[tuple[str, str], SpeakerContext] = {}
    row_configs = {}
    for r in rows:
        cfg = config_for_split(configs, r.split)
        row_configs[r.utterance_id] = cfg
        key = (r.speaker_id, r.split)
        if key not in contexts:
            contexts[key] = sample_alpha(cfg, r.speaker_id, cfg.split or r.split)
            report.speakers[key] = contexts[key].alpha

    def work(r) -> UtteranceResult:
        ctx = contexts[(r.speaker_id, r.split)]
        target = targets[r.utterance_id]
        try:
            audio = read_wav(r.path)
            result = anonymise_utterance(audio, ctx, row_configs[r.utterance_id])
            target.parent.mkdir(parents=True, exist_ok=True)
            write_wav(target, result)
            status, failure = "ok", None
        except (OSError, InputError) as exc:
            log.warning("utterance %s unreadable: %s", r.utterance_id, exc)
            status, failure = f"error: {type(exc).__name__}: {exc}", "io"
        except (AnonymisationError, ValueError) as exc:
            log.warning("utterance %s failed: %s", r.utterance_id, exc)
            status, failure = f"error: {type(exc).__name__}: {exc}", "processing"
        return UtteranceResult(r.utterance_id, r.speaker_id, r.split, ctx.alpha, status, str(target), failure)

    if jobs <= 1:
        results = [work(r) for r in rows]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, rows))
    report.utterances = results
    return report
