"""Command-line front end and report rendering.

Subcommands: ``validate``, ``stats``, ``split``, ``eval``, ``sweep``,
``augment``. Exit codes: 0 on success, 1 on data or validation failures,
2 on usage errors. Every output is deterministic, so re-running a command
with identical inputs, flags, and seed reproduces files byte for byte.

Tables show percentages with two decimals; CSV and JSON outputs carry the
raw ratios so nothing is lost to formatting. Charts are self-contained SVG
documents assembled from the same series as the CSV files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Mapping, Sequence

from .augmentation import AugmentConfig, Sample, augment, read_image, write_image
from .dataset import (
    DatasetBundle,
    DatasetError,
    ImageRecord,
    class_histogram,
    parse_detections,
    parse_manifest,
    parse_via,
    serialize_manifest,
    serialize_via,
    split,
    validate,
)
from .evaluation import (
    EvaluationReport,
    MatchConfig,
    PRCurve,
    SweepPoint,
    evaluate,
    threshold_sweep,
)
from .rng import sample_rng

__all__ = ["RenderedReport", "emit_curves", "format_report", "main", "run"]

_KIND_LABELS = {"box": "Box", "mask": "Mask"}
_CELL_NAMES = ("ap", "ap50", "ap75", "ap_m", "ap_l")
_TABLE_HEADER = "Type | AP | AP50 | AP75 | AP_m | AP_l"
_UNDEFINED = "—"


@dataclass(frozen=True)
class RenderedReport:
    """Three views of one report: human table, CSV, JSON-ready document."""

    table: str
    csv: str
    document: dict


def _percent(value: float | None) -> str:
    return _UNDEFINED if value is None else f"{value * 100:.2f}"


def _raw(value: float | None) -> str:
    return "" if value is None else repr(value)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return None  # unbounded range edge
    return obj


def format_report(report: EvaluationReport) -> RenderedReport:
    """Render a report as table text, CSV text, and a machine document.

    The table groups rows by scope (each class, then "mean") with one line
    per evaluation kind; undefined cells show a dash. The CSV and document
    keep raw ratios and None.
    """
    scopes: list[str] = []
    for row in report.rows:
        if row.scope not in scopes:
            scopes.append(row.scope)

    blocks = [_TABLE_HEADER]
    for scope in scopes:
        lines = [scope]
        for row in report.rows:
            if row.scope != scope:
                continue
            cells = [_KIND_LABELS[row.kind]]
            cells += [_percent(getattr(row.cells, name)) for name in _CELL_NAMES]
            lines.append(" | ".join(cells))
        blocks.append("\n".join(lines))
    table = "\n\n".join(blocks) + "\n"

    csv_lines = ["kind,scope," + ",".join(_CELL_NAMES)]
    for row in report.rows:
        raw = [_raw(getattr(row.cells, name)) for name in _CELL_NAMES]
        csv_lines.append(",".join([row.kind, row.scope] + raw))
    csv_text = "\n".join(csv_lines) + "\n"

    document = {
        "rows": [
            {
                "kind": row.kind,
                "scope": row.scope,
                **{name: getattr(row.cells, name) for name in _CELL_NAMES},
            }
            for row in report.rows
        ],
        "metadata": _json_safe(report.metadata),
    }
    return RenderedReport(table, csv_text, document)


def _svg_line_chart(
    series: Sequence[tuple[str, str, Sequence[tuple[float, float]]]],
    x_label: str,
    y_label: str,
    x_max: float,
    y_max: float,
) -> str:
    """Tiny deterministic line chart; series are (name, color, points)."""
    width, height = 640, 440
    x0, y0, x1, y1 = 70.0, 20.0, 620.0, 380.0

    def px(x: float) -> str:
        return f"{x0 + (x / x_max) * (x1 - x0):.2f}"

    def py(y: float) -> str:
        return f"{y1 - (y / y_max) * (y1 - y0):.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif" font-size="12">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for i in range(5):
        fx = x_max * i / 4
        fy = y_max * i / 4
        parts.append(
            f'<text x="{px(fx)}" y="{y1 + 18:.2f}" text-anchor="middle">{fx:g}</text>'
        )
        parts.append(
            f'<text x="{x0 - 8:.2f}" y="{py(fy)}" text-anchor="end" dominant-baseline="middle">{fy:g}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.2f}" y="{height - 8}" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2:.2f})">{y_label}</text>'
    )
    for offset, (name, color, points) in enumerate(series):
        if len(points) == 1:
            parts.append(
                f'<circle cx="{px(points[0][0])}" cy="{py(points[0][1])}" r="3" fill="{color}"/>'
            )
        elif points:
            coords = " ".join(f"{px(x)},{py(y)}" for x, y in points)
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
            )
        ly = y0 + 14 + 16 * offset
        parts.append(
            f'<line x1="{x1 - 120:.2f}" y1="{ly:.2f}" x2="{x1 - 100:.2f}" y2="{ly:.2f}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(f'<text x="{x1 - 94:.2f}" y="{ly + 4:.2f}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_curves(
    curves: Mapping[str, PRCurve] | None,
    sweep: Sequence[SweepPoint] | None,
    out_dir,
    svg: bool = False,
) -> list[Path]:
    """Write precision-recall and sweep series as CSV (and SVG on request).

    One ``pr_<class>.csv`` per entry with header ``recall,precision``
    (header-only when the curve has no points) and one ``sweep.csv`` with
    header ``tau,fp,fn,tp`` carrying the series verbatim. Returns the paths
    written, in order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for name in sorted(curves or {}):
        curve = curves[name]
        lines = ["recall,precision"] + [f"{r!r},{p!r}" for r, p in curve.points]
        path = out_dir / f"pr_{name}.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
        if svg:
            chart = _svg_line_chart(
                [(name, "#1f77b4", [(r, p) for r, p in curve.points])],
                "recall",
                "precision",
                1.0,
                1.0,
            )
            spath = out_dir / f"pr_{name}.svg"
            spath.write_text(chart, encoding="utf-8")
            written.append(spath)

    if sweep is not None:
        lines = ["tau,fp,fn,tp"] + [f"{p.tau!r},{p.fp},{p.fn},{p.tp}" for p in sweep]
        path = out_dir / "sweep.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
        if svg:
            top = max((max(p.fp, p.fn, p.tp) for p in sweep), default=0)
            chart = _svg_line_chart(
                [
                    ("fp", "#d62728", [(p.tau, p.fp) for p in sweep]),
                    ("fn", "#1f77b4", [(p.tau, p.fn) for p in sweep]),
                    ("tp", "#2ca02c", [(p.tau, p.tp) for p in sweep]),
                ],
                "tau",
                "count",
                1.0,
                float(max(top, 1)),
            )
            spath = out_dir / "sweep.svg"
            spath.write_text(chart, encoding="utf-8")
            written.append(spath)
    return written


def _parse_sizes(text: str) -> tuple[int, int, int]:
    try:
        sizes = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}")
    if len(sizes) != 3 or any(n < 0 for n in sizes):
        raise argparse.ArgumentTypeError(
            f"sizes must be three non-negative integers (train,val,test), got {text!r}"
        )
    return sizes


def _parse_thresholds(text: str) -> tuple[float, ...]:
    try:
        thrs = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"thresholds must be comma-separated numbers, got {text!r}")
    return thrs


def _parse_grid(text: str) -> tuple[float, ...]:
    """start:step:stop, inclusive of both ends; parsed in decimal."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must look like start:step:stop, got {text!r}")
    try:
        start, step, stop = (Decimal(p) for p in parts)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"grid bounds must be numbers, got {text!r}")
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"grid needs step > 0 and stop >= start, got {text!r}")
    values = []
    k = 0
    while True:
        v = start + k * step
        if v > stop:
            break
        values.append(float(v))
        k += 1
    return tuple(values)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segeval",
        description="Evaluate and manage polygon-annotated defect datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an annotation file for structural problems")
    p.add_argument("via", type=Path, help="VIA JSON annotation file")
    p.add_argument("--manifest", type=Path, default=None, help="CSV of file_name,width,height")

    p = sub.add_parser("stats", help="per-class annotation counts")
    p.add_argument("via", type=Path)

    p = sub.add_parser("split", help="deterministic train/val/test partition")
    p.add_argument("via", type=Path)
    p.add_argument("--sizes", type=_parse_sizes, required=True, help="e.g. 1315,331,157")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--manifest", type=Path, default=None)

    p = sub.add_parser("eval", help="AP report for predictions against ground truth")
    p.add_argument("--gt", type=Path, required=True, help="VIA JSON ground truth")
    p.add_argument("--pred", type=Path, required=True, help="prediction JSON list")
    p.add_argument(
        "--kind",
        choices=["box", "mask", "both"],
        default=None,
        help="default: both when every prediction has a polygon, box otherwise",
    )
    p.add_argument("--score-thr", type=float, default=0.70,
                   help="confidence cutoff echoed into the report metadata")
    p.add_argument("--iou-thrs", type=_parse_thresholds, default=(0.50, 0.75),
                   help="two report thresholds drawn from the dense IoU grid")
    p.add_argument("--out", type=Path, default=None, help="write the JSON document here")
    p.add_argument("--csv", action="store_true", help="print the CSV rendering")
    p.add_argument("--table", action="store_true", help="print the table rendering (default)")
    p.add_argument("--include-non-defect-classes", action="store_true",
                   help="let non-defect classes into the mean rows")
    p.add_argument("--manifest", type=Path, default=None)

    p = sub.add_parser("sweep", help="FP/FN/TP counts over a score-threshold grid")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--grid", type=_parse_grid, default=_parse_grid("0:0.05:1"),
                   help="start:step:stop, both ends inclusive")
    p.add_argument("--iou-thr", type=float, default=0.5)
    p.add_argument("--kind", choices=["box", "mask"], default="box")
    p.add_argument("--manifest", type=Path, default=None)

    p = sub.add_parser("augment", help="augment images and annotations with a fixed seed")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--images", type=Path, required=True, help="directory holding the source images")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)

    return parser


def _load_bundle(via_path: Path, manifest_path: Path | None) -> DatasetBundle:
    dims = None
    if manifest_path is not None:
        dims = parse_manifest(manifest_path.read_text(encoding="utf-8"))
    return parse_via(via_path.read_text(encoding="utf-8"), dimensions=dims)


def _cmd_validate(args) -> int:
    bundle = _load_bundle(args.via, args.manifest)
    issues = validate(bundle)
    for issue in issues:
        print(f"{issue.severity}: {issue.location}: {issue.message}")
    errors = sum(1 for issue in issues if issue.severity == "error")
    if errors:
        print(f"{errors} error(s), {len(issues) - errors} warning(s)")
        return 1
    print(f"ok: {len(bundle.images)} images, {len(bundle.annotations)} annotations")
    return 0


def _cmd_stats(args) -> int:
    bundle = _load_bundle(args.via, None)
    counts = class_histogram(bundle)
    for cls in bundle.registry:
        print(f"{cls.name}: {counts.per_class[cls.name]}")
    print(f"total: {counts.total}")
    return 0


def _cmd_split(args) -> int:
    bundle = _load_bundle(args.via, args.manifest)
    parts = split(bundle, args.sizes, args.seed)
    names = ["train", "val", "test"]
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(names, parts):
        (args.out_dir / f"{name}.json").write_text(
            json.dumps(serialize_via(part), indent=2) + "\n", encoding="utf-8"
        )
        (args.out_dir / f"{name}.csv").write_text(serialize_manifest(part), encoding="utf-8")
        print(f"{name}: {len(part.images)} images, {len(part.annotations)} annotations")
    return 0


def _cmd_eval(args) -> int:
    bundle = _load_bundle(args.gt, args.manifest)
    dets = parse_detections(args.pred.read_text(encoding="utf-8"), registry=bundle.registry)
    kinds = None
    if args.kind == "both":
        kinds = ("box", "mask")
    elif args.kind is not None:
        kinds = (args.kind,)
    cfg = MatchConfig(iou_thresholds=args.iou_thrs, score_threshold=args.score_thr)
    report = evaluate(
        bundle,
        dets,
        cfg,
        kinds=kinds,
        include_non_defect_in_means=args.include_non_defect_classes,
    )
    rendered = format_report(report)
    if args.table or not args.csv:
        print(rendered.table, end="")
    if args.csv:
        print(rendered.csv, end="")
    if args.out is not None:
        args.out.write_text(
            json.dumps(rendered.document, indent=2, allow_nan=False) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_sweep(args) -> int:
    bundle = _load_bundle(args.gt, args.manifest)
    dets = parse_detections(args.pred.read_text(encoding="utf-8"), registry=bundle.registry)
    series = threshold_sweep(bundle, dets, args.iou_thr, args.kind, args.grid)
    print("tau,fp,fn,tp")
    for point in series:
        print(f"{point.tau!r},{point.fp},{point.fn},{point.tp}")
    return 0


def _cmd_augment(args) -> int:
    bundle = _load_bundle(args.gt, None)
    by_image = bundle.annotations_by_image()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    cfg = AugmentConfig()
    out_images = []
    out_truths = []
    for index, record in enumerate(bundle.images):
        source = args.images / record.file_name
        image = read_image(source)
        # the pixel file is authoritative for the frame; the bundle may be
        # carrying default dimensions when no manifest was given
        sample = Sample(image, tuple(by_image[record.file_name]))
        result = augment(sample, cfg, sample_rng(args.seed, index))
        write_image(args.out_dir / record.file_name, result.image)
        out_images.append(
            ImageRecord(record.file_name, result.image.width, result.image.height)
        )
        out_truths.extend(result.truths)
    augmented = DatasetBundle(bundle.registry, tuple(out_images), tuple(out_truths))
    (args.out_dir / "annotations.json").write_text(
        json.dumps(serialize_via(augmented), indent=2) + "\n", encoding="utf-8"
    )
    (args.out_dir / "images.csv").write_text(serialize_manifest(augmented), encoding="utf-8")
    print(f"augmented {len(out_images)} image(s) into {args.out_dir}")
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "stats": _cmd_stats,
    "split": _cmd_split,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "augment": _cmd_augment,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse and execute one invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
