"""Command line interface: train, export-scores, export-cams."""

from __future__ import annotations

import sys

import click

from trainkit import TrainkitError
from trainkit.export import export_cams, export_scores
from trainkit.schedules import PRESETS, AugmentSpec, preset
from trainkit.train import train


@click.group()
def cli() -> None:
    """Staged EfficientNet-B0 trainer and artifact exporter."""


@cli.command("train")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--schedule", "schedule_name", required=True,
              type=click.Choice(sorted(PRESETS)), help="Named stage schedule.")
@click.option("--seed", default=0, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--device", default="cpu", show_default=True)
@click.option("--pretrained/--no-pretrained", default=False, show_default=True,
              help="Start from ImageNet weights (needs a local weights cache).")
@click.option("--jpeg-quality", nargs=2, type=int, default=(50, 100),
              show_default=True, help="Inclusive JPEG quality range for augmentation.")
def train_cmd(manifest, out_dir, schedule_name, seed, batch_size, device,
              pretrained, jpeg_quality):
    """Run the three-stage fine-tune on a patch manifest."""
    schedule = preset(schedule_name)
    augment = AugmentSpec(jpeg_quality=(jpeg_quality[0], jpeg_quality[1]))
    result = train(manifest, out_dir, schedule, augment=augment, seed=seed,
                   batch_size=batch_size, device=device, pretrained=pretrained)
    for stage in result.log["stages"]:
        click.echo(
            f"stage {stage['stage']} {stage['trainable_scope']}: "
            f"{stage['epochs']} epoch(s) at lr {stage['learning_rate']:g}, "
            f"{stage['trainable_params']} trainable params")
    click.echo(f"checkpoint {result.checkpoint}")
    click.echo(f"log {result.log_path}")


@cli.command("export-scores")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--batch-size", default=32, show_default=True)
@click.option("--device", default="cpu", show_default=True)
def export_scores_cmd(checkpoint, manifest, out_path, batch_size, device):
    """Score every manifest row into a JSONL score file."""
    count = export_scores(checkpoint, manifest, out_path,
                          batch_size=batch_size, device=device)
    click.echo(f"scored {count} patches -> {out_path}")


@cli.command("export-cams")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--patch", "patch_size", default=224, show_default=True)
@click.option("--stride", default=224, show_default=True)
@click.option("--edge-anchored", is_flag=True, default=False)
@click.option("--device", default="cpu", show_default=True)
def export_cams_cmd(checkpoint, image, out_dir, patch_size, stride,
                    edge_anchored, device):
    """Write per-window .camt tensor files for one image."""
    written = export_cams(checkpoint, image, out_dir, patch_size=patch_size,
                          stride=stride, edge_anchored=edge_anchored, device=device)
    click.echo(f"wrote {len(written)} window(s) -> {out_dir}")


def main(argv: list[str] | None = None) -> int:
    """Entry point with conventional exit codes (0 ok, 1 error, 2 usage)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except (TrainkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
