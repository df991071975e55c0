import sys
from pathlib import Path

import click

from .config import AdapterConfig
from .extract import DecodeError, extract_video, write_jsonl
from .registry import ModelLoadError
from .validate import validate_output


@click.group()
def main():
    """Per-frame feature extraction to Features JSONL."""


@main.command()
@click.option("--video", "videos", multiple=True, type=click.Path(exists=True))
@click.option("--data-dir", type=click.Path(), default=None,
              help="Directory of .y4m files (alternative to --video).")
@click.option("--out", required=True, type=click.Path())
@click.option("--sample-rate", default=1, show_default=True, type=int)
@click.option("--scene-model", default="builtin", show_default=True)
@click.option("--object-model", default="builtin", show_default=True)
@click.option("--face-model", default="builtin", show_default=True)
@click.option("--embed-model", default="builtin", show_default=True)
def extract(videos, data_dir, out, sample_rate, scene_model, object_model,
            face_model, embed_model):
    """Extract features for one or more videos into a single JSONL file."""
    paths = [Path(v) for v in videos]
    if data_dir:
        paths.extend(sorted(Path(data_dir).glob("*.y4m")))
    if not paths:
        click.echo("error: no input videos", err=True)
        sys.exit(2)
    config = AdapterConfig(sample_rate_hz=sample_rate, scene_model=scene_model,
                           object_model=object_model, face_model=face_model,
                           embed_model=embed_model)
    try:
        all_records = []
        for i, path in enumerate(sorted(paths)):
            records, gaps = extract_video(path, config)
            all_records.extend(records)
            msg = f"{path.stem}: {len(records)} frame(s)"
            if gaps:
                msg += f", gaps at {gaps}"
            click.echo(msg)
        write_jsonl(all_records, out)
    except (DecodeError, ModelLoadError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    click.echo(f"wrote {len(all_records)} record(s) to {out}")


@main.command()
@click.argument("path", type=click.Path(exists=True))
def validate(path):
    """Re-check an emitted JSONL file against the feature contract."""
    summary = validate_output(path)
    for vid, count in sorted(summary["frame_counts"].items()):
        click.echo(f"{vid}: {count} frame(s)")
    if summary["violations"]:
        for v in summary["violations"]:
            click.echo(v, err=True)
        sys.exit(2)
    click.echo("no violations")
