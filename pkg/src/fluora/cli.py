"""`fa` command line: synth, ingest, train, eval, classify, boundary, serve.

Machine-readable JSON goes to stdout; diagnostics go to stderr. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

import json
import sys

import click

from . import __version__
from . import boundary as boundary_mod
from . import evaluation, service, synthkit
from .classifier import CropSpec, TrainConfig, load_artifact, predict, train
from .dataset import (
    CAMERAS,
    DISTAL_DIRECTIONS,
    DISTAL_INCREASING,
    SPLIT_HOLDOUT,
    SPLIT_TRAIN,
    SPLITS,
    ingest_video,
    load_manifest,
)
from .errors import FluoraError, NoFluorescentRegion
from .imgio import load_image, save_image


def _emit(ctx, payload, table_lines=None):
    """JSON document under --json, human lines otherwise."""
    if ctx.obj.get("json") or table_lines is None:
        click.echo(json.dumps(payload, indent=2))
    else:
        for line in table_lines:
            click.echo(line)


@click.group()
@click.version_option(version=__version__, prog_name="fa")
@click.option("--json", "json_out", is_flag=True, default=False,
              help="Emit machine-readable JSON on stdout.")
@click.pass_context
def main(ctx, json_out):
    """Fluorescence angiography toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["json"] = json_out


def _domain_errors(fn):
    """Map domain exceptions to exit code 1 with a stderr diagnostic."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FluoraError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


@main.command()
@click.option("--patients", type=int, required=True, help="Total synthetic patients.")
@click.option("--frames", type=int, required=True, help="Frames per patient.")
@click.option("--positive-frac", type=float, default=0.2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--holdout-patients", type=int, default=0, show_default=True)
@click.option("--holdout-positive-frac", type=float, default=None)
@click.option("--width", type=int, default=1440, show_default=True)
@click.option("--height", type=int, default=1080, show_default=True)
@click.pass_context
@_domain_errors
def synth(ctx, patients, frames, positive_frac, seed, out, holdout_patients,
          holdout_positive_frac, width, height):
    """Generate a synthetic labeled dataset with a manifest."""
    manifest = synthkit.generate_dataset(
        patients, frames, positive_frac, seed, out,
        holdout_patients=holdout_patients,
        holdout_positive_fraction=holdout_positive_frac,
        width=width, height=height)
    summary = manifest.summary()
    payload = {"manifest": f"{out}/manifest.jsonl", "summary": summary}
    _emit(ctx, payload, table_lines=[
        f"wrote {len(manifest.records)} frames under {out}",
        *(f"  {split}: {s['patients']} patients, {s['frames']} frames, "
          f"{100.0 * s['positive_fraction']:.1f}% positive"
          for split, s in summary.items()),
    ])


@main.command()
@click.option("--video", type=click.Path(), required=True)
@click.option("--patient", required=True, help="Patient id for provenance.")
@click.option("--camera", type=click.Choice(CAMERAS), required=True)
@click.option("--stride", type=int, default=30, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
@_domain_errors
def ingest(ctx, video, patient, camera, stride, out):
    """Extract frames from a video as unlabeled records."""
    records = ingest_video(video, patient, camera, stride, out)
    payload = {"frames": len(records),
               "records": [r.to_json() for r in records]}
    _emit(ctx, payload,
          table_lines=[f"extracted {len(records)} frames to {out} "
                       f"(labels still unset)"])


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=4, show_default=True)
@click.option("--crop", type=int, default=224, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--val-fraction", type=float, default=0.2, show_default=True)
@click.option("--base-weights", default="auto", show_default=True,
              help="auto | imagenet | random | path to a state dict")
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
@_domain_errors
def train_cmd(ctx, manifest_path, epochs, crop, seed, batch_size, lr,
              val_fraction, base_weights, out):
    """Fine-tune the classifier on a manifest's train split."""
    manifest = load_manifest(manifest_path)
    config = TrainConfig(epochs=epochs, internal_val_fraction=val_fraction,
                         crop=CropSpec(crop_size=crop, seed=seed),
                         batch_size=batch_size, learning_rate=lr, seed=seed)

    def progress(stats):
        acc = "n/a" if stats.val_accuracy is None else f"{stats.val_accuracy:.3f}"
        click.echo(f"epoch {stats.epoch + 1}/{epochs} "
                   f"loss {stats.train_loss:.4f} val_acc {acc} "
                   f"({stats.seconds:.1f}s)", err=True)

    artifact, report = train(manifest, config, base_weights=base_weights,
                             out_dir=out, progress=progress)
    payload = {"model_dir": str(out), "version": artifact.version,
               "report": report.to_json()}
    _emit(ctx, payload, table_lines=[
        f"trained {artifact.version} in {report.total_seconds:.1f}s "
        f"({report.n_train} train / {report.n_val} val frames)",
        f"saved to {out}",
    ])


# click would otherwise name the command "train-cmd"
main.add_command(train_cmd, name="train")


@main.command()
@click.option("--model", "model_dir", type=click.Path(), required=True)
@click.option("--image", "image_path", type=click.Path(), required=True)
@click.pass_context
@_domain_errors
def classify(ctx, model_dir, image_path):
    """Classify one image; always emits a JSON result."""
    artifact = load_artifact(model_dir)
    result = predict(artifact, image_path)
    click.echo(json.dumps(result.to_json()))


@main.command(name="eval")
@click.option("--model", "model_dir", type=click.Path(), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(SPLITS), default=SPLIT_HOLDOUT,
              show_default=True)
@click.option("--by-camera", is_flag=True, default=False,
              help="Stratify into internal/external equipment rows.")
@click.pass_context
@_domain_errors
def eval_cmd(ctx, model_dir, manifest_path, split, by_camera):
    """Evaluate a model on a manifest split."""
    artifact = load_artifact(model_dir)
    manifest = load_manifest(manifest_path)
    records = manifest.split_records(split)
    if not records:
        click.echo(f"error: no records in split {split!r}", err=True)
        sys.exit(1)
    preds = [predict(artifact, r.path).label for r in records]
    truths = [r.label for r in records]
    strata = None
    if by_camera:
        train_cams = {r.camera_id for r in manifest.split_records(SPLIT_TRAIN)}
        strata = [evaluation.STRATUM_INTERNAL if r.camera_id in train_cams
                  else evaluation.STRATUM_EXTERNAL for r in records]
    counts = evaluation.confusion(preds, truths, strata)
    reports = [evaluation.metrics(c) for c in counts]
    payload = [r.to_json() for r in reports]
    _emit(ctx, payload,
          table_lines=evaluation.format_metrics_table(reports).splitlines())


@main.command(name="boundary")
@click.option("--model", "model_dir", type=click.Path(), required=True)
@click.option("--image", "image_path", type=click.Path(), required=True)
@click.option("--strip-width", type=int, default=100, show_default=True)
@click.option("--axis", type=click.Choice([boundary_mod.AXIS_HORIZONTAL,
                                           boundary_mod.AXIS_VERTICAL]),
              default=boundary_mod.AXIS_HORIZONTAL, show_default=True)
@click.option("--distal", type=click.Choice(DISTAL_DIRECTIONS),
              default=DISTAL_INCREASING, show_default=True)
@click.option("--threshold", type=float, default=None,
              help="Strip threshold; defaults to the model's.")
@click.option("--export-strips", type=click.Path(), default=None,
              help="Directory for the strip JPEGs.")
@click.option("--annotate", type=click.Path(), default=None,
              help="Write the green/grey/yellow overlay PNG here.")
@click.pass_context
@_domain_errors
def boundary_cmd(ctx, model_dir, image_path, strip_width, axis, distal,
                 threshold, export_strips, annotate):
    """Estimate the perfusion boundary of one frame; emits JSON."""
    artifact = load_artifact(model_dir)
    image = load_image(image_path)
    try:
        est = boundary_mod.analyze_image(
            artifact, image, strip_width=strip_width, axis=axis,
            distal_direction=distal, threshold=threshold,
            export_dir=export_strips)
    except NoFluorescentRegion as exc:
        payload = {"boundary_x": None, "reason": "no_fluorescent_region",
                   "distal_direction": distal,
                   "strips": [s.to_json() for s in exc.strips]}
        click.echo(json.dumps(payload))
        return
    if annotate:
        save_image(boundary_mod.render_boundary_overlay(image, est, axis=axis),
                   annotate)
    click.echo(json.dumps(est.to_json()))


@main.command()
@click.option("--model-dir", type=click.Path(), default=None,
              help=f"Defaults to ${service.MODEL_DIR_ENV}.")
@click.option("--bind", default="127.0.0.1:8000", show_default=True,
              help="host:port to listen on.")
@click.option("--max-upload", type=int, default=service.DEFAULT_MAX_UPLOAD,
              show_default=True, help="Upload limit in bytes.")
@_domain_errors
def serve(model_dir, bind, max_upload):
    """Serve the HTTP API."""
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise click.UsageError("--bind must be host:port")
    service.run(service.ServiceConfig(model_dir=model_dir, host=host,
                                      port=int(port),
                                      max_upload_bytes=max_upload))


if __name__ == "__main__":
    main()
