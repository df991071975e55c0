"""Command-line entry point: extract, predict-climax, train, evaluate,
emit-plots, synth.

Exit codes: 0 ok, 2 input/parse error, 3 numeric failure. Every command
writes a run manifest next to its outputs.
"""

import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import pipeline, synth
from .errors import AdstoryError, NumericError, ValidationError
from .manifest import RunManifest
from .metrics import climax_report, emit_plot_csv, emit_report, render_text, sentiment_metrics
from .model import save_checkpoint
from .peaks import aggregate_per_second
from .trainer import TrainConfig, load_config, make_splits, train, write_log

EXIT_INPUT = 2
EXIT_NUMERIC = 3


@click.group()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file; CLI flags override its values.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--quiet", is_flag=True, default=False)
@click.pass_context
def main(ctx, seed, config_path, jobs, quiet):
    """Dramatic-structure analysis of video ads."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, config_path=config_path, jobs=jobs, quiet=quiet)


def _say(ctx, msg):
    if not ctx.obj.get("quiet"):
        click.echo(msg)


def _fail(e, code):
    click.echo(f"error: {e}", err=True)
    sys.exit(code)


def _extract_one(args):
    vid, video_path, audio_path = args
    return vid, pipeline.extract_from_files(video_path, audio_path)


@main.command()
@click.option("--video", type=click.Path(), default=None, help="Y4M file.")
@click.option("--audio", type=click.Path(), default=None, help="WAV file.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Directory of <id>.y4m/<id>.wav pairs (batch mode).")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def extract(ctx, video, audio, data_dir, out):
    """Compute the signals JSONL for one video pair or a whole directory."""
    jobs = []
    try:
        if data_dir is not None:
            for y4m in sorted(Path(data_dir).glob("*.y4m")):
                wav = y4m.with_suffix(".wav")
                if not wav.exists():
                    raise ValidationError(f"missing audio file {wav}")
                jobs.append((y4m.stem, str(y4m), str(wav)))
        else:
            if video is None or audio is None:
                raise ValidationError("need --video and --audio, or --data-dir")
            if not Path(audio).exists():
                raise ValidationError(f"missing audio file {audio}")
            if not Path(video).exists():
                raise ValidationError(f"missing video file {video}")
            jobs.append((Path(video).stem, video, audio))

        manifest = RunManifest("extract", seed=ctx.obj["seed"])
        for _, v, a in jobs:
            manifest.add_input(v)
            manifest.add_input(a)
        n_jobs = ctx.obj["jobs"]
        if n_jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                tracks = dict(pool.map(_extract_one, jobs))
        else:
            tracks = dict(map(_extract_one, jobs))
        pipeline.write_signals_jsonl(tracks, out)
        manifest.add_output(out)
        manifest.write(Path(out).with_suffix(".manifest.json"))
        _say(ctx, f"wrote signals for {len(tracks)} video(s) to {out}")
    except AdstoryError as e:
        _fail(e, EXIT_INPUT)


@main.command("predict-climax")
@click.option("--method", required=True,
              type=click.Choice(["audio", "flow", "shots", "baseline", "lstm"]))
@click.option("--k", default=1, show_default=True, type=int)
@click.option("--signals", "signals_path", type=click.Path(), default=None)
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--features", "data_dir", type=click.Path(), default=None,
              help="Corpus directory (needed for --method lstm).")
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def predict_climax(ctx, method, k, signals_path, annotations_path, data_dir,
                   checkpoint, out):
    """Write top-k climax predictions per video."""
    if method == "lstm" and checkpoint is None:
        click.echo("error: --method lstm requires --checkpoint", err=True)
        sys.exit(EXIT_INPUT)
    try:
        manifest = RunManifest("predict-climax",
                               config={"method": method, "k": k},
                               seed=ctx.obj["seed"])
        manifest.add_input(annotations_path)
        if method == "lstm":
            if data_dir is None:
                raise ValidationError("--method lstm requires --features DIR")
            tensors, _, _ = pipeline.build_dataset(data_dir)
            predictions = pipeline.predict_climax_with_model(checkpoint, tensors, k)
            manifest.add_input(checkpoint)
        else:
            from .ingest import read_annotations
            records = read_annotations(annotations_path)
            if signals_path is None:
                raise ValidationError("unsupervised methods require --signals")
            manifest.add_input(signals_path)
            fps = {r.video_id: r.fps for r in records}
            tracks = pipeline.read_signals_jsonl(signals_path, fps)
            predictions = pipeline.predict_unsupervised(method, tracks, records, k)
        pipeline.write_predictions_jsonl(predictions, k, out)
        manifest.add_output(out)
        manifest.write(Path(out).with_suffix(".manifest.json"))
        _say(ctx, f"wrote {len(predictions)} prediction(s) to {out}")
    except AdstoryError as e:
        _fail(e, EXIT_INPUT)


def _resolve_config(ctx, task, overrides):
    if ctx.obj.get("config_path"):
        cfg = load_config(ctx.obj["config_path"])
    else:
        cfg = TrainConfig()
    cfg.task = task
    cfg.seed = ctx.obj["seed"]
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


@main.command("train")
@click.option("--task", required=True, type=click.Choice(["climax", "sentiment"]))
@click.option("--fold", default=0, show_default=True, type=int)
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--steps", type=int, default=None)
@click.option("--eval-every", type=int, default=None)
@click.option("--climax-from", type=click.Choice(["none", "unsup", "model"]),
              default=None, help="Climax slot source for the sentiment task.")
@click.option("--climax-checkpoint", type=click.Path(), default=None)
@click.pass_context
def train_cmd(ctx, task, fold, data_dir, out_dir, steps, eval_every,
              climax_from, climax_checkpoint):
    """Train a model on one fold; writes checkpoint, CSV log, manifest."""
    try:
        cfg = _resolve_config(ctx, task, {"steps": steps, "eval_every": eval_every})
        if climax_from is None:
            climax_from = "none" if task == "climax" else (
                "model" if climax_checkpoint else "unsup")
        tensors, records, _ = pipeline.build_dataset(
            data_dir, climax_from if task == "sentiment" else "none",
            climax_checkpoint)
        split = make_splits(sorted(tensors), cfg.seed)[fold]

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest("train", config=dataclasses.asdict(cfg),
                               seed=cfg.seed)
        for name in ("annotations.jsonl", "features.jsonl", "signals.jsonl"):
            manifest.add_input(Path(data_dir) / name)

        model, opt_state, log = train(cfg, tensors, split, records)
        ckpt = out_dir / "checkpoint.bin"
        meta = {"fold": fold, "blocks": cfg.blocks,
                "selection_metric": max((r["val_metric"] for r in log), default=None),
                "climax_from": climax_from if task == "sentiment" else None}
        save_checkpoint(model, ckpt, opt_state=opt_state, meta=meta)
        write_log(log, out_dir / "log.csv")
        manifest.add_output(ckpt)
        manifest.add_output(out_dir / "log.csv")
        manifest.write(out_dir / "manifest.json")
        best = meta["selection_metric"]
        _say(ctx, f"trained {task} fold {fold}: best val metric "
                  f"{best if best is not None else 'n/a'}")
    except NumericError as e:
        _fail(e, EXIT_NUMERIC)
    except AdstoryError as e:
        _fail(e, EXIT_INPUT)


@main.command("evaluate")
@click.option("--task", required=True, type=click.Choice(["climax", "sentiment"]))
@click.option("--predictions", "predictions_path", type=click.Path(), default=None)
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--annotations", "annotations_path", required=True, type=click.Path())
@click.option("--data-dir", type=click.Path(), default=None)
@click.option("--fold", type=int, default=None,
              help="Restrict to this fold's test split.")
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.pass_context
def evaluate_cmd(ctx, task, predictions_path, checkpoint, annotations_path,
                 data_dir, fold, out_prefix):
    """Compute the metric grid; writes <out>.json and <out>.txt."""
    try:
        from .ingest import read_annotations
        records = read_annotations(annotations_path)
        if not records:
            raise ValidationError(f"no videos in {annotations_path}")
        manifest = RunManifest("evaluate", config={"task": task, "fold": fold},
                               seed=ctx.obj["seed"])
        manifest.add_input(annotations_path)
        if fold is not None:
            keep = set(make_splits([r.video_id for r in records],
                                   ctx.obj["seed"])[fold].ids("test"))
            records = [r for r in records if r.video_id in keep]

        if task == "climax":
            if predictions_path is None:
                raise ValidationError("climax evaluation requires --predictions")
            manifest.add_input(predictions_path)
            by_method = pipeline.read_predictions_jsonl(predictions_path)
            ids = {r.video_id for r in records}
            by_method = {m: {v: t for v, t in preds.items() if v in ids}
                         for m, preds in by_method.items()}
            report = climax_report(by_method, records)
        else:
            if checkpoint is None or data_dir is None:
                raise ValidationError("sentiment evaluation requires "
                                     "--checkpoint and --data-dir")
            manifest.add_input(checkpoint)
            from .model import load_checkpoint
            _, _, meta = load_checkpoint(checkpoint, expect_task="sentiment")
            tensors, _, _ = pipeline.build_dataset(
                data_dir, meta.get("climax_from") or "none",
                meta.get("climax_checkpoint"))
            tensors = {v: t for v, t in tensors.items()
                       if v in {r.video_id for r in records}}
            scores, ids = pipeline.predict_sentiment_with_model(checkpoint, tensors)
            report = sentiment_metrics(scores, ids, records)

        json_path = Path(str(out_prefix) + ".json")
        text_path = Path(str(out_prefix) + ".txt")
        emit_report(report, json_path, text_path)
        manifest.add_output(json_path)
        manifest.add_output(text_path)
        manifest.write(Path(str(out_prefix) + ".manifest.json"))
        _say(ctx, render_text(report))
    except NumericError as e:
        _fail(e, EXIT_NUMERIC)
    except AdstoryError as e:
        _fail(e, EXIT_INPUT)


@main.command("emit-plots")
@click.option("--signals", "signals_path", required=True, type=click.Path())
@click.option("--annotations", "annotations_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@click.pass_context
def emit_plots(ctx, signals_path, annotations_path, out_dir):
    """Per-second series CSVs (one per video) for plotting."""
    try:
        from .ingest import read_annotations
        records = read_annotations(annotations_path)
        fps = {r.video_id: r.fps for r in records}
        tracks = pipeline.read_signals_jsonl(signals_path, fps)
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest("emit-plots", seed=ctx.obj["seed"])
        manifest.add_input(signals_path)
        manifest.add_input(annotations_path)
        for vid, track in sorted(tracks.items()):
            series = aggregate_per_second(track)
            path = out_dir / f"{vid}.csv"
            emit_plot_csv(path, series["audio"], series["shots"], series["flow"])
            manifest.add_output(path)
        manifest.write(out_dir / "manifest.json")
        _say(ctx, f"wrote {len(tracks)} plot CSV(s) to {out_dir}")
    except AdstoryError as e:
        _fail(e, EXIT_INPUT)


@main.command("synth")
@click.option("--kind", required=True, type=click.Choice(["climax", "sentiment"]))
@click.option("--n", required=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_context
def synth_cmd(ctx, kind, n, out_dir):
    """Generate a synthetic corpus with known ground truth."""
    try:
        manifest = RunManifest("synth", config={"kind": kind, "n": n},
                               seed=ctx.obj["seed"])
        synth.generate(kind, n, ctx.obj["seed"], out_dir)
        for name in ("annotations.jsonl", "features.jsonl", "synth_manifest.json"):
            manifest.add_output(Path(out_dir) / name)
        manifest.write(Path(out_dir) / "manifest.json")
        _say(ctx, f"wrote {n} synthetic videos to {out_dir}")
    except AdstoryError as e:
        _fail(e, EXIT_INPUT)


if __name__ == "__main__":
    main()
