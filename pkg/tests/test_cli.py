import csv
import subprocess
import sys

import numpy as np
import pytest

from mcadams_anon.audio_io import read_wav, write_wav
from mcadams_anon.cli import SEED_ENV, main
from mcadams_anon.dsp import AudioBuffer
from mcadams_anon.synthetic import make_corpus, random_speaker, utterance, write_corpus


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


@pytest.fixture
def wav(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "in.wav"
    write_wav(path, utterance(random_speaker("s", rng), rng, 0.5))
    return path


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    corpus = make_corpus(n_speakers=8, n_utterances=4, seed=3, duration_s=0.5)
    manifest, trials = write_corpus(corpus, root)
    return root, manifest, trials


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write_config(path, text):
    path.write_text(text)
    return path


def test_anonymise_fixed_alpha_is_reproducible(tmp_path, wav):
    out1, out2 = tmp_path / "a.wav", tmp_path / "b.wav"
    assert main(["anonymise", str(wav), str(out1), "--alpha", "0.8"]) == 0
    assert main(["anonymise", str(wav), str(out2), "--alpha", "0.8"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(read_wav(out1)) == len(read_wav(wav))
    assert read_wav(out1).sample_rate_hz == 16000


def test_anonymise_default_alpha(tmp_path, wav):
    main(["anonymise", str(wav), str(tmp_path / "a.wav"), "--alpha", "0.8"])
    main(["anonymise", str(wav), str(tmp_path / "b.wav")])
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()


def test_anonymise_uniform_is_deterministic(tmp_path, wav):
    args = ["--alpha-min", "0.5", "--alpha-max", "0.9", "--speaker", "spk1", "--split", "test", "--seed", "s3cret"]
    main(["anonymise", str(wav), str(tmp_path / "a.wav"), *args])
    main(["anonymise", str(wav), str(tmp_path / "b.wav"), *args])
    main(["anonymise", str(wav), str(tmp_path / "c.wav"), *args[:-1], "other"])
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()
    assert (tmp_path / "a.wav").read_bytes() != (tmp_path / "c.wav").read_bytes()


@pytest.mark.parametrize(
    "extra",
    [["--alpha", "1.2"], ["--alpha", "0"], ["--alpha-min", "0.5"], ["--alpha", "0.8", "--alpha-min", "0.5", "--alpha-max", "0.9"],
     ["--frame-ms", "25"], ["--bogus"]],
)
def test_anonymise_usage_errors(tmp_path, wav, extra):
    out = tmp_path / "o.wav"
    assert main(["anonymise", str(wav), str(out), *extra]) == 1
    assert not out.exists()


def test_anonymise_io_errors(tmp_path, wav):
    assert main(["anonymise", str(tmp_path / "missing.wav"), str(tmp_path / "o.wav")]) == 2
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF\x00\x00")
    assert main(["anonymise", str(bad), str(tmp_path / "o.wav")]) == 2
    write_wav(tmp_path / "8k.wav", AudioBuffer(np.zeros(800), 8000))
    assert main(["anonymise", str(tmp_path / "8k.wav"), str(tmp_path / "o.wav")]) == 2


def test_console_script(tmp_path, wav):
    out = tmp_path / "o.wav"
    proc = subprocess.run([sys.executable, "-m", "mcadams_anon.cli", "anonymise", str(wav), str(out), "--alpha", "1.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    proc = subprocess.run([sys.executable, "-m", "mcadams_anon.cli", "anonymise", str(wav), str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()


def test_batch(tmp_path, corpus_dir):
    _, manifest, _ = corpus_dir
    cfg = _write_config(tmp_path / "u.cfg", "alpha_min = 0.5\nalpha_max = 0.9\n")
    out = tmp_path / "out"
    assert main(["batch", str(manifest), str(out), "--config", str(cfg), "--seed", "k"]) == 0
    report = _csv(out / "report.csv")
    assert len(report) == 32
    assert {r["status"] for r in report} == {"ok"}
    assert {r["alpha"] for r in report} == {"redacted"}
    first = (out / "spk000" / "spk000_u0.wav").read_bytes()

    out2 = tmp_path / "out2"
    assert main(["batch", str(manifest), str(out2), "--config", str(cfg), "--seed", "k", "--jobs", "3", "--reveal-alpha"]) == 0
    assert (out2 / "spk000" / "spk000_u0.wav").read_bytes() == first
    revealed = _csv(out2 / "report.csv")
    per_speaker = {}
    for r in revealed:
        per_speaker.setdefault((r["speaker_id"], r["split"]), set()).add(r["alpha"])
        assert 0.5 <= float(r["alpha"]) < 0.9
    assert all(len(v) == 1 for v in per_speaker.values())


def test_batch_records_io_failure(tmp_path, corpus_dir):
    root, manifest, _ = corpus_dir
    lines = manifest.read_text().splitlines()
    lines.append(f"ghost,{root / 'nowhere.wav'},spk999,test")
    bad_manifest = root / "manifest_with_ghost.csv"
    bad_manifest.write_text("\n".join(lines) + "\n")
    assert main(["batch", str(bad_manifest), str(tmp_path / "out")]) == 2
    report = _csv(tmp_path / "out" / "report.csv")
    assert [r["status"] for r in report].count("ok") == 32


def test_batch_bad_config(tmp_path, corpus_dir):
    _, manifest, _ = corpus_dir
    cfg = _write_config(tmp_path / "bad.cfg", "alpha = 0.8\nalpha_min = 0.5\n")
    assert main(["batch", str(manifest), str(tmp_path / "out"), "--config", str(cfg)]) == 1
    assert main(["batch", str(tmp_path / "nope.csv"), str(tmp_path / "out")]) == 2


def test_analyze(tmp_path, wav):
    out = tmp_path / "an"
    assert main(["analyze", str(wav), str(out), "--grid", "128"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["envelope_alpha_0.5.csv", "envelope_alpha_0.7.csv", "envelope_alpha_0.9.csv",
                     "envelope_original.csv", "poles.csv"]
    for name in names[:-1]:
        rows = _csv(out / name)
        freqs = [float(r["freq_hz"]) for r in rows]
        assert len(freqs) == 128 and freqs[0] == 0 and freqs[-1] == 8000
        assert all(b > a for a, b in zip(freqs, freqs[1:]))
    poles = _csv(out / "poles.csv")
    assert list(poles[0]) == ["rho", "phi", "phi_alpha_0.9", "phi_alpha_0.7", "phi_alpha_0.5", "freq_hz"]
    before = (out / "poles.csv").read_bytes()
    main(["analyze", str(wav), str(out), "--grid", "128"])
    assert (out / "poles.csv").read_bytes() == before


def test_analyze_errors(tmp_path, wav):
    assert main(["analyze", str(wav), str(tmp_path / "x"), "--alphas", "0.9,abc"]) == 1
    assert main(["analyze", str(wav), str(tmp_path / "x"), "--frame", "9999"]) == 1
    write_wav(tmp_path / "z.wav", AudioBuffer(np.zeros(1600)))
    assert main(["analyze", str(tmp_path / "z.wav"), str(tmp_path / "x")]) == 2


def test_eval_identity_configs(tmp_path, corpus_dir):
    _, manifest, trials = corpus_dir
    cfg = _write_config(tmp_path / "id.cfg", "alpha = 1.0\n")
    for scenario in ("o-a", "a-a"):
        out = tmp_path / scenario
        assert main(["eval", str(manifest), str(trials), str(out), "--scenario", scenario, "--config", str(cfg)]) == 0
        summary = {r["metric"]: r["value"] for r in _csv(out / "summary.csv")}
        assert abs(float(summary["eer"]) - float(summary["eer_original"])) <= 0.005
        assert float(summary["mean_lsd_db"]) <= 1e-6


def test_eval_outputs(tmp_path, corpus_dir, capsys):
    _, manifest, trials = corpus_dir
    cfg = _write_config(tmp_path / "u.cfg", "alpha_min = 0.5\nalpha_max = 0.9\n")
    out = tmp_path / "oa"
    args = ["eval", str(manifest), str(trials), str(out), "--scenario", "o-a", "--config", str(cfg), "--seed", "k"]
    assert main(args) == 0
    assert "o-a EER" in capsys.readouterr().out
    scores = _csv(out / "scores.csv")
    assert list(scores[0]) == ["enrol_id", "test_id", "label", "score"]
    assert len(scores) == 8 * 2 * 8 * 2
    assert sum(r["label"] == "target" for r in scores) == 8 * 2 * 2
    summary = {r["metric"]: r["value"] for r in _csv(out / "summary.csv")}
    assert summary["scenario"] == "o-a" and summary["enrolment_config"] == "original"
    before = [(out / n).read_bytes() for n in ("scores.csv", "summary.csv")]
    assert main(args + ["--jobs", "2"]) == 0
    assert [(out / n).read_bytes() for n in ("scores.csv", "summary.csv")] == before


def test_eval_oa_beats_original(tmp_path):
    corpus = make_corpus(n_speakers=20, n_utterances=6, seed=0)
    manifest, trials = write_corpus(corpus, tmp_path / "c")
    cfg = _write_config(tmp_path / "u.cfg", "alpha_min = 0.5\nalpha_max = 0.9\n")
    out = tmp_path / "oa"
    assert main(["eval", str(manifest), str(trials), str(out), "--scenario", "o-a", "--config", str(cfg),
                 "--seed", "eval-key"]) == 0
    summary = {r["metric"]: r["value"] for r in _csv(out / "summary.csv")}
    assert float(summary["eer"]) > float(summary["eer_original"])


def test_eval_bad_trials(tmp_path, corpus_dir):
    _, manifest, _ = corpus_dir
    bad = tmp_path / "t.csv"
    bad.write_text("enrolment_utterance_id,test_utterance_id,label\nspk000_u0,ghost,target\n")
    assert main(["eval", str(manifest), str(bad), str(tmp_path / "o"), "--scenario", "o-a"]) == 1
    assert main(["eval", str(manifest), str(bad), str(tmp_path / "o")]) == 1


def test_sample_alpha(tmp_path, monkeypatch, capsys):
    cfg = _write_config(tmp_path / "u.cfg", "alpha_min = 0.5\nalpha_max = 0.9\nsplit = test\n")
    assert main(["sample-alpha", "spk1", "--config", str(cfg), "--seed", "a"]) == 1
    capsys.readouterr()
    assert main(["sample-alpha", "spk1", "spk2", "--config", str(cfg), "--seed", "a", "--reveal-alpha"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split("\t")[:2] for ln in lines] == [["spk1", "test"], ["spk2", "test"]]
    with_flag = lines[0]

    monkeypatch.setenv(SEED_ENV, "a")
    main(["sample-alpha", "spk1", "--config", str(cfg), "--seed", "zzz", "--reveal-alpha"])
    assert capsys.readouterr().out.splitlines()[0] == with_flag

    main(["sample-alpha", "spk1", "--config", str(cfg), "--split", "enrolment", "--reveal-alpha"])
    other = capsys.readouterr().out.splitlines()[0].split("\t")
    assert other[1] == "enrolment" and other[2] != with_flag.split("\t")[2]


def test_missing_config_file(tmp_path):
    assert main(["sample-alpha", "s", "--config", str(tmp_path / "none.cfg"), "--reveal-alpha"]) == 2
