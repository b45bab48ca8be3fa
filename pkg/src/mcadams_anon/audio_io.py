"""WAV, manifest, trial list and config file I/O.

File formats
------------
WAV
    RIFF/WAVE, PCM, 16-bit, mono.  Samples map to floats by ``w / 32768``;
    writing multiplies by 32768, rounds half away from zero and clamps to
    ``[-32768, 32767]``.
Manifest
    UTF-8 CSV with header ``utterance_id,path,speaker_id,split``.  Relative
    paths are resolved against the manifest's directory.
Trials
    UTF-8 CSV with header ``enrolment_utterance_id,test_utterance_id,label``
    where label is ``target`` or ``non-target``.
Config
    ``key = value`` lines; ``#`` starts a comment.  Keys: ``alpha``,
    ``alpha_min``, ``alpha_max``, ``lpc_order``, ``frame_ms``, ``hop_ms``,
    ``seed``, ``split``.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .anonymizer import DEFAULT_ALPHA, AnonymisationConfig
from .dsp import AudioBuffer
from .errors import ConfigError, DecodeError, ParseError, UnsupportedFormatError

MANIFEST_COLUMNS = ("utterance_id", "path", "speaker_id", "split")
TRIAL_COLUMNS = ("enrolment_utterance_id", "test_utterance_id", "label")
TRIAL_LABELS = ("target", "non-target")
CONFIG_KEYS = ("alpha", "alpha_min", "alpha_max", "lpc_order", "frame_ms", "hop_ms", "seed", "split")


@dataclass(frozen=True)
class ManifestRow:
    utterance_id: str
    path: Path
    speaker_id: str
    split: str


@dataclass(frozen=True)
class TrialRow:
    enrolment_utterance_id: str
    test_utterance_id: str
    label: str

    @property
    def is_target(self) -> bool:
        return self.label == "target"


def read_wav(path) -> AudioBuffer:
    """Decode a mono PCM16 WAV file into an :class:`AudioBuffer`."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            if channels != 1:
                raise UnsupportedFormatError(f"{path}: {channels} channels; only mono is supported")
            if width != 2:
                raise UnsupportedFormatError(f"{path}: {8 * width}-bit samples; only 16-bit PCM is supported")
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        # the stdlib reader only accepts PCM; anything else surfaces as "unknown format: N"
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormatError(f"{path}: non-PCM encoding ({msg})") from exc
        raise DecodeError(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise DecodeError(f"{path}: truncated header") from exc
    if len(raw) != 2 * n_frames:
        raise DecodeError(f"{path}: data chunk truncated ({len(raw)} of {2 * n_frames} bytes)")
    words = np.frombuffer(raw, dtype="<i2")
    return AudioBuffer(words.astype(np.float64) / 32768.0, rate)


def to_pcm16(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot encode non-finite samples")
    if np.any(np.abs(x) > 1.0):
        raise ValueError(f"samples exceed full scale (peak {np.max(np.abs(x)):.6g})")
    scaled = x * 32768.0
    words = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(words, -32768, 32767).astype("<i2")


def write_wav(path, audio: AudioBuffer) -> None:
    """Write ``audio`` as mono 16-bit PCM."""
    data = to_pcm16(audio.samples).tobytes()
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate_hz)
        wf.writeframes(data)


def _read_csv(path, columns):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            yield from _csv_records(path, reader, columns)
        except csv.Error as exc:
            raise ParseError(str(exc), path, reader.line_num) from None
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8 ({exc.reason})", path) from None


def _csv_records(path, reader, columns):
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file; expected a header row", path, 1) from None
    header = [h.strip() for h in header]
    if sorted(header) != sorted(columns):
        raise ParseError(f"header {header} must contain exactly the columns {list(columns)}", path, 1)
    for fields in reader:
        line = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", path, line)
        record = {h: f.strip() for h, f in zip(header, fields)}
        for h in columns:
            if not record[h]:
                raise ParseError(f"empty field {h!r}", path, line)
        yield line, record


def load_manifest(path) -> list[ManifestRow]:
    path = Path(path)
    rows, seen = [], {}
    for line, rec in _read_csv(path, MANIFEST_COLUMNS):
        uid = rec["utterance_id"]
        if uid in seen:
            raise ParseError(f"duplicate utterance_id {uid!r} (first seen on line {seen[uid]})", path, line)
        seen[uid] = line
        audio_path = Path(rec["path"])
        if not audio_path.is_absolute():
            audio_path = path.parent / audio_path
        rows.append(ManifestRow(uid, audio_path, rec["speaker_id"], rec["split"]))
    return rows


def load_trials(path, manifest=None) -> list[TrialRow]:
    """Parse a trial list; with ``manifest`` given, every id must resolve against it."""
    path = Path(path)
    known = None if manifest is None else {r.utterance_id for r in manifest}
    trials = []
    for line, rec in _read_csv(path, TRIAL_COLUMNS):
        if rec["label"] not in TRIAL_LABELS:
            raise ParseError(f"label must be one of {TRIAL_LABELS}, got {rec['label']!r}", path, line)
        if known is not None:
            for col in TRIAL_COLUMNS[:2]:
                if rec[col] not in known:
                    raise ParseError(f"{col} {rec[col]!r} not in manifest", path, line)
        trials.append(TrialRow(rec["enrolment_utterance_id"], rec["test_utterance_id"], rec["label"]))
    return trials


def parse_config(text: str, source="<config>") -> AnonymisationConfig:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw.strip()!r}", source, line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ParseError(f"unknown key {key!r}", source, line_no)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", source, line_no)
        if not value and key not in ("seed", "split"):
            raise ParseError(f"empty value for {key!r}", source, line_no)
        values[key] = value
        lines[key] = line_no

    def number(key, kind=float):
        try:
            return kind(values[key])
        except ValueError:
            raise ParseError(f"{key} must be a {kind.__name__}, got {values[key]!r}", source, lines[key]) from None

    kwargs = {}
    for key in ("frame_ms", "hop_ms"):
        if key in values:
            kwargs[key] = number(key)
    if "lpc_order" in values:
        kwargs["lpc_order"] = number("lpc_order", int)
    kwargs["secret_seed"] = values.get("seed", "").encode("utf-8")
    kwargs["split"] = values.get("split", "")
    has_range = "alpha_min" in values or "alpha_max" in values
    try:
        if "alpha" in values and has_range:
            raise ConfigError("give either alpha or alpha_min/alpha_max, not both")
        if has_range:
            if not ("alpha_min" in values and "alpha_max" in values):
                raise ConfigError("alpha_min and alpha_max must be given together")
            return AnonymisationConfig.uniform(number("alpha_min"), number("alpha_max"), **kwargs)
        alpha = number("alpha") if "alpha" in values else DEFAULT_ALPHA
        return AnonymisationConfig.fixed(alpha, **kwargs)
    except ParseError:
        raise
    except ConfigError as exc:
        raise ParseError(str(exc), source) from None


def load_config(path) -> AnonymisationConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path)


def write_csv(path, header, rows) -> None:
    """Write rows (sequences or dicts) as CSV with ``\\n`` line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[h] for h in header] if isinstance(row, dict) else row)
