"""Command-line front end.

Exit codes: 0 success, 1 usage/configuration error, 2 I/O error,
3 numeric or processing error.  The secret seed can be given with
``--seed`` or the ``MCADAMS_SEED`` environment variable; the environment
wins so that scripted runs can keep seeds out of shell history.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import anonymizer as anon
from . import audio_io, evaluation
from .errors import (
    AnonymisationError,
    ConfigError,
    InputError,
    NumericError,
    StructuralError,
)

SEED_ENV = "MCADAMS_SEED"

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PROCESSING = 0, 1, 2, 3

log = logging.getLogger("mcadams_anon")


class CommandFailed(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def resolve_seed(flag_value: str | None) -> bytes:
    value = os.environ.get(SEED_ENV)
    if value is None:
        value = flag_value or ""
    return value.encode("utf-8")


def build_config(alpha, alpha_min, alpha_max, order, frame_ms, hop_ms, seed, split) -> anon.AnonymisationConfig:
    if alpha is not None and (alpha_min is not None or alpha_max is not None):
        raise ConfigError("use either --alpha or --alpha-min/--alpha-max")
    common = dict(lpc_order=order, frame_ms=frame_ms, hop_ms=hop_ms, secret_seed=resolve_seed(seed), split=split)
    if alpha_min is not None or alpha_max is not None:
        if alpha_min is None or alpha_max is None:
            raise ConfigError("--alpha-min and --alpha-max must be given together")
        return anon.AnonymisationConfig.uniform(alpha_min, alpha_max, **common)
    return anon.AnonymisationConfig.fixed(anon.DEFAULT_ALPHA if alpha is None else alpha, **common)


def load_configs(paths, seed_flag) -> list[anon.AnonymisationConfig]:
    if not paths:
        return [anon.AnonymisationConfig(secret_seed=resolve_seed(seed_flag))]
    configs = []
    for p in paths:
        cfg = audio_io.load_config(p)
        env_seed = os.environ.get(SEED_ENV)
        if env_seed is not None:
            cfg = cfg.replace(secret_seed=env_seed.encode("utf-8"))
        elif seed_flag is not None:
            cfg = cfg.replace(secret_seed=seed_flag.encode("utf-8"))
        configs.append(cfg)
    splits = [c.split for c in configs]
    if len(set(splits)) != len(splits):
        raise ConfigError(f"several configs claim the same split: {splits}")
    return configs


def parse_alphas(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--alphas must be a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise ConfigError("--alphas is empty")
    from .warp import validate_alpha

    return [validate_alpha(v) for v in values]


seed_option = click.option("--seed", default=None, help=f"Secret seed (overridden by ${SEED_ENV}).")
jobs_option = click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Worker threads.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, help="Log progress to standard error.")
def cli(verbose):
    """McAdams-coefficient speech anonymisation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command("anonymise")
@click.argument("input_wav", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("output_wav", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--alpha", type=float, default=None, help="Fixed McAdams coefficient (default 0.8).")
@click.option("--alpha-min", type=float, default=None)
@click.option("--alpha-max", type=float, default=None)
@click.option("--speaker", default="", help="Speaker id hashed into the coefficient draw.")
@click.option("--split", default="", help="Split label hashed into the coefficient draw.")
@seed_option
@click.option("--order", type=int, default=anon.DEFAULT_LPC_ORDER, show_default=True)
@click.option("--frame-ms", type=float, default=20.0, show_default=True)
@click.option("--hop-ms", type=float, default=10.0, show_default=True)
def cmd_anonymise(input_wav, output_wav, alpha, alpha_min, alpha_max, speaker, split, seed, order, frame_ms, hop_ms):
    """Anonymise a single 16 kHz WAV file."""
    config = build_config(alpha, alpha_min, alpha_max, order, frame_ms, hop_ms, seed, split)
    ctx = anon.sample_alpha(config, speaker)
    audio = audio_io.read_wav(input_wav)
    result = anon.anonymise_utterance(audio, ctx, config)
    audio_io.write_wav(output_wav, result)
    log.info("wrote %s (%s, seed %s)", output_wav, config.describe(), ctx.seed_digest)


@cli.command("batch")
@click.argument("manifest", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("outdir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--config", "config_paths", multiple=True, type=click.Path(dir_okay=False, path_type=Path),
              help="Config file; repeat for per-split configs (matched on their 'split' key).")
@seed_option
@jobs_option
@click.option("--reveal-alpha", is_flag=True, help="Write per-speaker coefficients into the report.")
def cmd_batch(manifest, outdir, config_paths, seed, jobs, reveal_alpha):
    """Anonymise every utterance of a manifest into OUTDIR."""
    configs = load_configs(config_paths, seed)
    rows = audio_io.load_manifest(manifest)
    outdir.mkdir(parents=True, exist_ok=True)
    report = anon.anonymise_corpus(rows, configs, outdir, jobs=jobs)
    header = ["utterance_id", "speaker_id", "split", "alpha", "status", "output"]
    audio_io.write_csv(outdir / "report.csv", header, report.rows(reveal_alpha))
    failures = report.failures
    if failures:
        io_like = any(f.failure == "io" for f in failures)
        raise CommandFailed(f"{len(failures)} of {len(report.utterances)} utterances failed; see report.csv",
                            EXIT_IO if io_like else EXIT_PROCESSING)
    log.info("anonymised %d utterances", len(report.utterances))


@cli.command("analyze")
@click.argument("input_wav", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("outdir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--frame", "frame_index", type=int, default=None, help="Frame index (default: most energetic frame).")
@click.option("--alphas", default="0.9,0.7,0.5", show_default=True)
@click.option("--order", type=int, default=anon.DEFAULT_LPC_ORDER, show_default=True)
@click.option("--grid", type=click.IntRange(min=2), default=512, show_default=True)
def cmd_analyze(input_wav, outdir, frame_index, alphas, order, grid):
    """Write the pole table and spectral envelopes of one frame."""
    from . import dsp, lpc
    from .warp import warp_poleset

    alpha_list = parse_alphas(alphas)
    config = anon.AnonymisationConfig(lpc_order=order)
    audio = audio_io.read_wav(input_wav)
    if frame_index is None:
        stream = dsp.frame_signal(audio, config.frame_ms, config.hop_ms)
        if len(stream) == 0:
            raise InputError("empty input")
        frame_index = int(np.argmax(np.sum(stream.frames**2, axis=1)))
    try:
        model = evaluation.frame_model(audio, frame_index, order, config.frame_ms, config.hop_ms)
    except IndexError as exc:
        raise click.BadParameter(str(exc), param_hint="--frame") from None
    if model.passthrough:
        raise InputError(f"frame {frame_index} is silent")
    poles = lpc.poles_from_coeffs(model)
    outdir.mkdir(parents=True, exist_ok=True)
    header, rows = evaluation.pole_table(poles, alpha_list, audio.sample_rate_hz)
    audio_io.write_csv(outdir / "poles.csv", header, [[f"{v:.10g}" for v in r] for r in rows])
    curves = {"original": model.coeffs}
    for a in alpha_list:
        curves[f"alpha_{a:g}"] = lpc.coeffs_from_poles(warp_poleset(poles, a))
    for name, coeffs in curves.items():
        env = evaluation.envelope_from_coeffs(coeffs, grid, audio.sample_rate_hz)
        audio_io.write_csv(outdir / f"envelope_{name}.csv", ["freq_hz", "mag_db"],
                           ([f"{f:.6f}", f"{m:.6f}"] for f, m in zip(env.freqs_hz, env.mags_db)))
    log.info("frame %d: %d poles written to %s", frame_index, len(rows), outdir)


def _embed_all(rows, audio_of, jobs):
    from concurrent.futures import ThreadPoolExecutor

    def one(r):
        return r.utterance_id, evaluation.embed_utterance(audio_of(r))

    if jobs <= 1:
        return dict(map(one, rows))
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return dict(pool.map(one, rows))


@cli.command("eval")
@click.argument("manifest", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("trials", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("outdir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--scenario", type=click.Choice(["o-a", "a-a"]), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Config for the test side (default: fixed alpha 0.8).")
@click.option("--enrol-config", "enrol_config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Config for the enrolment side in a-a (default: the test config).")
@seed_option
@jobs_option
def cmd_eval(manifest, trials, outdir, scenario, config_path, enrol_config_path, seed, jobs):
    """Score a trial list under the o-a or a-a scenario with the proxy verifier."""
    rows = audio_io.load_manifest(manifest)
    trial_rows = audio_io.load_trials(trials, rows)
    test_cfg = load_configs([config_path] if config_path else [], seed)[0]
    enrol_cfg = load_configs([enrol_config_path], seed)[0] if enrol_config_path else test_cfg
    by_id = {r.utterance_id: r for r in rows}
    enrol_rows = [by_id[u] for u in dict.fromkeys(t.enrolment_utterance_id for t in trial_rows)]
    test_rows = [by_id[u] for u in dict.fromkeys(t.test_utterance_id for t in trial_rows)]

    cache = {}

    def original(r):
        if r.utterance_id not in cache:
            cache[r.utterance_id] = audio_io.read_wav(r.path)
        return cache[r.utterance_id]

    def anonymised(cfg):
        def fn(r):
            split = cfg.split or r.split
            return anon.anonymise_utterance(original(r), anon.sample_alpha(cfg, r.speaker_id, split), cfg)
        return fn

    for r in {**{r.utterance_id: r for r in enrol_rows}, **{r.utterance_id: r for r in test_rows}}.values():
        original(r)
    orig_enrol = _embed_all(enrol_rows, original, jobs)
    orig_test = _embed_all(test_rows, original, jobs)
    anon_test_audio = {}

    def anon_test(r):
        a = anonymised(test_cfg)(r)
        anon_test_audio[r.utterance_id] = a
        return a

    test_emb = _embed_all(test_rows, anon_test, jobs)
    enrol_emb = orig_enrol if scenario == "o-a" else _embed_all(enrol_rows, anonymised(enrol_cfg), jobs)

    scores = evaluation.score_trials(trial_rows, enrol_emb, test_emb)
    baseline = evaluation.score_trials(trial_rows, orig_enrol, orig_test)
    eer = evaluation.compute_eer(scores)
    eer_orig = evaluation.compute_eer(baseline)
    lsd = np.mean([evaluation.log_spectral_distortion(original(r), anon_test_audio[r.utterance_id]) for r in test_rows])

    outdir.mkdir(parents=True, exist_ok=True)
    audio_io.write_csv(
        outdir / "scores.csv",
        ["enrol_id", "test_id", "label", "score"],
        ([e, t, "target" if lab else "non-target", f"{s:.10f}"]
         for (e, t), lab, s in zip(scores.pairs, scores.is_target, scores.scores)),
    )
    summary = [
        ("scenario", scenario),
        ("test_config", test_cfg.describe()),
        ("enrolment_config", "original" if scenario == "o-a" else enrol_cfg.describe()),
        ("n_target", int(np.sum(scores.is_target))),
        ("n_nontarget", int(np.sum(~scores.is_target))),
        ("eer", f"{eer:.6f}"),
        ("eer_original", f"{eer_orig:.6f}"),
        ("mean_lsd_db", f"{lsd:.6f}"),
    ]
    audio_io.write_csv(outdir / "summary.csv", ["metric", "value"], summary)
    click.echo(f"{scenario} EER {100 * eer:.2f}% (original {100 * eer_orig:.2f}%), mean LSD {lsd:.2f} dB")


@cli.command("sample-alpha")
@click.argument("speakers", nargs=-1, required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--split", default=None, help="Override the config's split label.")
@seed_option
@click.option("--reveal-alpha", is_flag=True, help="Required: acknowledges that coefficients are secret.")
def cmd_sample_alpha(speakers, config_path, split, seed, reveal_alpha):
    """Print the coefficient each speaker would receive."""
    if not reveal_alpha:
        raise click.UsageError("per-speaker coefficients are secret; pass --reveal-alpha to print them")
    config = load_configs([config_path] if config_path else [], seed)[0]
    for spk in speakers:
        ctx = anon.sample_alpha(config, spk, split)
        click.echo(f"{spk}\t{ctx.split}\t{ctx.alpha!r}")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (click.UsageError, ConfigError)):
        return EXIT_USAGE
    if isinstance(exc, (OSError, InputError, click.FileError)):
        return EXIT_IO
    if isinstance(exc, (NumericError, StructuralError, AnonymisationError, ArithmeticError)):
        return EXIT_PROCESSING
    return EXIT_PROCESSING


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="mcadams-anon", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except CommandFailed as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.code
    except (AnonymisationError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
