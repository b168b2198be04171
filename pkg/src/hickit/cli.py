"""Command-line entry points.

One binary, one subcommand per pipeline stage. Exit codes: 0 on success, 1
on runtime failure (bad file contents, dead scorer, occupied port), 2 on
usage errors. Every artifact written carries a provenance header with the
tool version and the effective configuration.
"""

from __future__ import annotations

import csv
import json
import socket
import sys
from pathlib import Path

import click

from . import __version__, output_header
from .errors import ToolkitError


def _floats(_ctx, _param, value):
    if value is None:
        return None
    try:
        return tuple(float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def _write_csv(path: Path, header: dict, columns: list[str], rows: list[dict]) -> None:
    """CSV with one leading comment line of provenance."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in columns})


@click.group()
@click.version_option(version=__version__, prog_name="hickit")
def cli():
    """Dataset building and evaluation for honeycomb defect detection."""


@cli.command("patchgen")
@click.option("--coco", "coco_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="COCO ground-truth JSON.")
@click.option("--images", "images_dir", type=click.Path(file_okay=False),
              help="Directory with the source images; omit with --labels-only.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--patch", "patch_size", default=224, show_default=True, type=int)
@click.option("--stride", default=224, show_default=True, type=int)
@click.option("--area-thresh", "area_threshold", default=0.01, show_default=True, type=float,
              help="Fraction of window pixels defect masks must cover for a positive label.")
@click.option("--edge-anchored", is_flag=True,
              help="Add a final window column/row flush with the image border.")
@click.option("--origin", default="data", show_default=True,
              help="Dataset tag used in patch ids and the dataset name.")
@click.option("--category", default="honeycomb", show_default=True,
              help="Category whose masks define the label; 'all' uses every annotation.")
@click.option("--splits", default="0.6,0.2,0.2", show_default=True, callback=_floats,
              help="train,val,test fractions; val and test sizes are rounded, train absorbs the rest.")
@click.option("--seed", default=0, show_default=True, type=int, help="Split shuffle seed.")
@click.option("--labels-only", is_flag=True, help="Write the manifest without cutting patch files.")
@click.option("--sweep", callback=_floats, default=None,
              help="Comma-separated extra area thresholds to tabulate (no files written).")
@click.option("--sweep-target", default=None,
              help="split:true:false counts to rank sweep rows against, e.g. test:1080:6498.")
def patchgen_cmd(coco_path, images_dir, out_dir, patch_size, stride, area_threshold,
                 edge_anchored, origin, category, splits, seed, labels_only, sweep, sweep_target):
    """Cut labeled square patches from annotated inspection images."""
    from . import patchgen
    from .cocostore import SplitSpec, load_dataset, split_dataset
    from .plots import render_split_counts

    if len(splits) != 3:
        raise click.BadParameter("--splits needs exactly three fractions")
    if not labels_only and images_dir is None:
        raise click.UsageError("--images is required unless --labels-only is set")

    ds = load_dataset(coco_path)
    datasets = split_dataset(ds, SplitSpec(val=splits[1], test=splits[2], seed=seed))
    cfg = patchgen.PatchConfig(
        patch_size=patch_size,
        stride=stride,
        area_threshold=area_threshold,
        edge_anchored=edge_anchored,
        origin=origin,
    )
    cat = None if category == "all" else category
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if labels_only:
        records = patchgen.enumerate_patches(datasets, cfg, cat)
        manifest = out / "manifest.jsonl"
        patchgen.write_manifest(manifest, records, cfg, seed=seed)
    else:
        manifest = patchgen.generate(datasets, images_dir, out, cfg, cat, seed=seed)
        records = patchgen.read_manifest(manifest)[1]

    counts = patchgen.split_counts(records)
    name = patchgen.dataset_name(origin, stride, patch_size)
    header = output_header("patchgen", {"dataset_name": name, **cfg.__dict__}, seed=seed)
    _write_csv(
        out / "stats.csv",
        header,
        ["split", "true", "false"],
        [{"split": s, **counts[s]} for s in ("train", "val", "test", "total")],
    )
    render_split_counts(counts, out / "stats.svg", title=name)

    click.echo(f"dataset {name}: {len(records)} patches")
    for s in ("train", "val", "test"):
        click.echo(f"  {s:<6} true={counts[s]['true']:<8} false={counts[s]['false']}")

    if sweep:
        rows = patchgen.theta_sweep(records, patch_size, list(sweep))
        target = None
        if sweep_target:
            try:
                split_name, n_true, n_false = sweep_target.split(":")
                target = {split_name: {"true": int(n_true), "false": int(n_false)}}
            except ValueError:
                raise click.BadParameter("--sweep-target must look like test:1080:6498")
        report = patchgen.sweep_report(rows, target)
        (out / "theta_sweep.json").write_text(
            json.dumps({"_meta": header, "rows": rows}, indent=1), encoding="utf-8"
        )
        click.echo(report)


@cli.command("det-eval")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--results", "results_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--iou-kind", type=click.Choice(["bbox", "mask"]), default="bbox",
              show_default=True)
@click.option("--iou", "table_iou", default=0.5, show_default=True, type=float,
              help="IoU threshold for the confidence-threshold table.")
@click.option("--conf", default="0.3,0.5,0.7", show_default=True, callback=_floats,
              help="Confidence cutoffs for the threshold table.")
@click.option("--category", default=None, help="Evaluate one category by name.")
def det_eval_cmd(gt_path, results_path, out_dir, iou_kind, table_iou, conf, category):
    """Score COCO detection results: AP/AR, PR curves, threshold table."""
    from . import detmetrics
    from .cocostore import load_dataset, load_results
    from .plots import render_pr_curves

    ds = load_dataset(gt_path)
    dets = load_results(results_path, ds)
    report = detmetrics.evaluate(ds, dets, iou_kind=iou_kind, category=category,
                                 taus=conf, table_iou=table_iou)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = output_header(
        "det-eval",
        {"gt": str(gt_path), "results": str(results_path), "iou_kind": iou_kind,
         "table_iou": table_iou, "conf": list(conf), "category": category},
    )
    payload = {"_meta": header, **report.to_dict()}
    (out / "report.json").write_text(json.dumps(payload, indent=1), encoding="utf-8")
    _write_csv(
        out / "thresholds.csv",
        header,
        ["tau", "precision", "recall", "f1", "support", "support_detected_images"],
        [row.__dict__ for row in report.thresholds],
    )
    render_pr_curves(report.curves, out / "pr_curves.svg",
                     title=f"{Path(results_path).stem} ({iou_kind})")

    click.echo(f"ap50={report.ap50:.4f} ap_range={report.ap_range:.4f} "
               f"ar_range={report.ar_range:.4f} (n_gt={report.gt_count})")
    click.echo("tau     precision  recall   f1       support")
    for row in report.thresholds:
        click.echo(f"{row.tau:<7.2f} {row.precision:<10.4f} {row.recall:<8.4f} "
                   f"{row.f1:<8.4f} {row.support}")
    for flag in report.flags:
        click.echo(f"note: {flag}")


@cli.command("cls-eval")
@click.option("--scores", "score_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Score JSONL file(s); one report row each.")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--tau", default=0.5, show_default=True, type=float)
@click.option("--split", "split_name", default=None,
              help="Restrict labels to one manifest split (train/val/test).")
@click.option("--pr-area", is_flag=True, help="Also report the PR-area AP estimate.")
def cls_eval_cmd(score_paths, manifest_path, out_dir, tau, split_name, pr_area):
    """Evaluate patch classifier scores against manifest labels."""
    from . import clsmetrics
    from .patchgen import read_manifest

    _, records = read_manifest(manifest_path)
    if split_name is not None:
        records = [r for r in records if r.split == split_name]
    labels = {r.patch_id: r.label for r in records}

    rows = []
    for path in score_paths:
        samples = clsmetrics.join_scores(clsmetrics.load_scores(path), labels)
        report = clsmetrics.cls_report(samples, tau=tau)
        if pr_area:
            report["ap_pr_area"] = clsmetrics.ap_pr_area(samples)
        report["scores"] = str(path)
        rows.append(report)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = output_header(
        "cls-eval",
        {"manifest": str(manifest_path), "tau": tau, "split": split_name, "pr_area": pr_area},
    )
    (out / "report.json").write_text(
        json.dumps({"_meta": header, "rows": rows}, indent=1), encoding="utf-8"
    )
    columns = ["scores", "precision", "recall", "f1", "accuracy", "ap", "ar", "support",
               "n_samples"]
    if pr_area:
        columns.append("ap_pr_area")
    _write_csv(out / "report.csv", header, columns, rows)

    for row in rows:
        click.echo(f"{row['scores']}: p={row['precision']:.4f} r={row['recall']:.4f} "
                   f"f1={row['f1']:.4f} ap={row['ap']:.4f} ar={row['ar']:.4f} "
                   f"(n={row['n_samples']}, pos={row['support']})")


@cli.command("tile")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scores", "scores_path", type=click.Path(exists=True, dir_okay=False),
              help="Recorded score JSONL to replay.")
@click.option("--scorer-cmd", "scorer_cmd", default=None,
              help="Command line of a scorer subprocess (one JSON request/response per line).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--patch", "patch_size", default=224, show_default=True, type=int)
@click.option("--stride", default=224, show_default=True, type=int)
@click.option("--edge-anchored", is_flag=True)
@click.option("--tau", default=0.5, show_default=True, type=float,
              help="Windows scoring strictly above this get marked.")
@click.option("--record", "record_path", type=click.Path(dir_okay=False),
              help="Also save the window scores as replayable JSONL.")
def tile_cmd(image_path, scores_path, scorer_cmd, out_path, patch_size, stride,
             edge_anchored, tau, record_path):
    """Score an image window by window and render the overlay."""
    import shlex

    from .patchgen import PatchConfig
    from .tileinfer import FileScorer, SubprocessScorer, record_scores, render_overlay, score_image

    if (scores_path is None) == (scorer_cmd is None):
        raise click.UsageError("provide exactly one of --scores or --scorer-cmd")
    cfg = PatchConfig(patch_size=patch_size, stride=stride, edge_anchored=edge_anchored)

    if scores_path is not None:
        grid = score_image(image_path, FileScorer(scores_path), cfg)
    else:
        with SubprocessScorer(shlex.split(scorer_cmd)) as scorer:
            grid = score_image(image_path, scorer, cfg)

    if record_path:
        record_scores(grid, record_path)
    overlay = render_overlay(image_path, grid, tau=tau)
    overlay.save(out_path)
    marked = sum(1 for ws in grid.scores if ws.score > tau)
    click.echo(f"{len(grid.scores)} windows scored, {marked} above {tau} -> {out_path}")


@cli.command("cam")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--camt", "camt_paths", required=True, multiple=True, type=click.Path(exists=True),
              help="A .camt file or a directory of them; repeatable.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cam_cmd(image_path, camt_paths, out_path):
    """Composite per-window class-activation tensors into one heatmap image."""
    from .tileinfer import composite_cams, read_camt

    files: list[Path] = []
    for raw in camt_paths:
        p = Path(raw)
        files.extend(sorted(p.glob("*.camt")) if p.is_dir() else [p])
    if not files:
        raise click.UsageError("no .camt files found")
    cams = [read_camt(f) for f in files]
    composite_cams(image_path, cams).save(out_path)
    click.echo(f"composited {len(cams)} windows -> {out_path}")


@cli.group("review")
def review_group():
    """Expert review sessions over model overlays."""


@review_group.command("create")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Session spec JSON: run labels plus per-image asset paths.")
@click.option("--store", "store_dir", required=True, type=click.Path(file_okay=False))
@click.option("--assets", "asset_root", type=click.Path(file_okay=False, exists=True),
              help="Verify referenced assets exist under this root.")
def review_create_cmd(spec_path, store_dir, asset_root):
    """Register a review session (idempotent for identical specs)."""
    from .errors import DatasetError
    from .reviewsvc import ReviewStore

    spec = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    store = ReviewStore(store_dir)
    session = store.create_session(spec)
    if asset_root:
        missing = store.check_assets(session["session_id"], asset_root)
        if missing:
            raise DatasetError("missing assets:\n  " + "\n  ".join(missing))
    click.echo(session["session_id"])


@review_group.command("serve")
@click.option("--store", "store_dir", required=True, type=click.Path(file_okay=False))
@click.option("--assets", "asset_root", required=True,
              type=click.Path(file_okay=False, exists=True))
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False, exists=True),
              help="Static UI bundle to serve at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def review_serve_cmd(store_dir, asset_root, ui_dir, host, port):
    """Serve the review API (and optionally the UI) over HTTP."""
    import uvicorn

    from .reviewsvc import ReviewStore, build_app

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise ToolkitError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    store = ReviewStore(store_dir)
    app = build_app(store, asset_root, ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@review_group.command("tally")
@click.option("--store", "store_dir", required=True, type=click.Path(file_okay=False, exists=True))
@click.option("--session", "session_id", required=True)
@click.option("--json", "as_json", is_flag=True, help="Emit the raw tally JSON.")
def review_tally_cmd(store_dir, session_id, as_json):
    """Replay the assessment log and print a session's tally."""
    from .reviewsvc import COMPARISONS, RATINGS, RUN_IDS, ReviewStore

    store = ReviewStore(store_dir)
    tally = store.tally(session_id)
    if as_json:
        click.echo(json.dumps({"_meta": output_header("review-tally", {"session": session_id}),
                               **tally}, indent=1))
        return
    session = store.get_session(session_id)
    labels = {"run_a": session["run_a"], "run_b": session["run_b"]}
    for run in RUN_IDS:
        cells = "  ".join(f"{r}={tally['ratings'][run][r]}" for r in RATINGS)
        click.echo(f"{labels[run]} ({run}): {cells}  "
                   f"images={tally['images_assessed'][run]} "
                   f"fp={tally['false_positives'][run]}")
    cmp_cells = "  ".join(f"{c}={tally['comparisons'][c]}" for c in COMPARISONS)
    click.echo(f"comparison: {cmp_cells}")


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
