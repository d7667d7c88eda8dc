"""Detection-to-ground-truth matching and the AP metric family.

Matching is greedy: detections are ranked by descending score (ties keep
input order) and each claims the unclaimed same-class ground truth with the
highest IoU, provided that IoU reaches the threshold.  Every ground truth is
claimed at most once.  Average precision is 101-point interpolated and the
headline AP column averages a dense IoU grid {0.50, 0.55, ..., 0.95}; size
strata (medium, large) use ignore semantics so out-of-range instances vanish
from both numerator and denominator instead of counting as mistakes.

Scores enter AP only through their ordering, so any strictly increasing
rescaling of all scores leaves every AP value unchanged.  No score threshold
is applied during AP computation; thresholds belong to ``fp_fn_counts`` and
``threshold_sweep``.
"""

from __future__ import annotations

import math
import os
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

from segeval.dataset import DatasetBundle, Detection, GroundTruthAnnotation
from segeval.geometry import box_iou, mask_iou, polygon_bbox, rasterize

__all__ = [
    "KINDS",
    "DEFAULT_IOU_GRID",
    "RECALL_GRID",
    "default_area_ranges",
    "MatchConfig",
    "DetectionVerdict",
    "GroundTruthVerdict",
    "MatchOutcome",
    "PRCurve",
    "ReportCells",
    "ReportRow",
    "EvaluationReport",
    "FpFnCounts",
    "SweepPoint",
    "ImageAccuracy",
    "match_image",
    "accumulate_pr",
    "average_precision",
    "size_stratified_filter",
    "evaluate",
    "fp_fn_counts",
    "threshold_sweep",
    "image_level_accuracy",
]

KINDS = ("box", "mask")

# Both grids are built from integer ratios so every value is the exact
# double closest to the decimal, reproducible on any platform.
DEFAULT_IOU_GRID = tuple((50 + 5 * i) / 100 for i in range(10))
RECALL_GRID = tuple(i / 100 for i in range(101))


def default_area_ranges() -> dict[str, tuple[float, float]]:
    """Named area strata in px^2: half-open [min, max) intervals."""
    return {
        "all": (0.0, math.inf),
        "medium": (32.0**2, 96.0**2),
        "large": (96.0**2, math.inf),
    }


@dataclass(frozen=True)
class MatchConfig:
    iou_thresholds: tuple[float, ...] = (0.50, 0.75)
    iou_kind: str = "box"
    score_threshold: float = 0.70
    area_ranges: Mapping[str, tuple[float, float]] = field(default_factory=default_area_ranges)

    def __post_init__(self) -> None:
        object.__setattr__(self, "iou_thresholds", tuple(self.iou_thresholds))
        if not self.iou_thresholds:
            raise ValueError("iou_thresholds must not be empty")
        if any(not (0.0 < t <= 1.0) for t in self.iou_thresholds):
            raise ValueError(f"iou thresholds must lie in (0, 1], got {self.iou_thresholds}")
        if list(self.iou_thresholds) != sorted(self.iou_thresholds):
            raise ValueError("iou_thresholds must be sorted ascending")
        if self.iou_kind not in KINDS:
            raise ValueError(f"iou_kind must be one of {KINDS}, got {self.iou_kind!r}")
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ValueError(f"score_threshold must lie in [0, 1], got {self.score_threshold}")
        for label, (lo, hi) in self.area_ranges.items():
            if not (0.0 <= lo < hi):
                raise ValueError(f"area range {label!r} must satisfy 0 <= min < max")
        med = self.area_ranges.get("medium")
        large = self.area_ranges.get("large")
        if med and large and max(med[0], large[0]) < min(med[1], large[1]):
            raise ValueError("medium and large area ranges must not overlap")


@dataclass(frozen=True)
class DetectionVerdict:
    image: str
    input_index: int
    class_id: int
    score: float
    verdict: str  # "tp" | "fp" | "ignored"
    matched_stable_id: int | None = None


@dataclass(frozen=True)
class GroundTruthVerdict:
    image: str
    stable_id: int
    class_id: int
    state: str  # "matched" | "missed" | "ignored"


@dataclass(frozen=True)
class MatchOutcome:
    """Per-image verdicts; ``detections`` is in the ranking order used."""

    image: str
    iou_threshold: float
    kind: str
    detections: tuple[DetectionVerdict, ...]
    ground_truths: tuple[GroundTruthVerdict, ...]


@dataclass(frozen=True)
class PRCurve:
    """Cumulative (recall, precision) points from a descending-score traversal."""

    points: tuple[tuple[float, float], ...]
    n_gt: int
    n_det: int

    @property
    def defined(self) -> bool:
        return self.n_gt > 0


class FpFnCounts(NamedTuple):
    fp: int
    fn: int
    tp: int


class SweepPoint(NamedTuple):
    tau: float
    fp: int
    fn: int
    tp: int


class ImageAccuracy(NamedTuple):
    correct: int
    total: int
    ratio: Fraction


@dataclass(frozen=True)
class ReportCells:
    ap: float | None
    ap50: float | None
    ap75: float | None
    ap_m: float | None
    ap_l: float | None


@dataclass(frozen=True)
class ReportRow:
    kind: str  # "box" | "mask"
    scope: str  # class name or "mean"
    cells: ReportCells


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[ReportRow, ...]
    metadata: dict

    def row(self, kind: str, scope: str) -> ReportRow:
        for r in self.rows:
            if r.kind == kind and r.scope == scope:
                return r
        raise KeyError(f"no report row for kind={kind!r} scope={scope!r}")


def _footprint_area(polygon, box, kind: str, width: int, height: int, who: str) -> float:
    if kind == "box":
        if box is None:
            box = polygon_bbox(polygon)
        return box.area
    if polygon is None:
        raise ValueError(f"mask evaluation requires a polygon footprint: {who}")
    return float(rasterize(polygon, width, height).pixel_count)


class _ImageFeatures:
    """Per-image, per-kind footprints, areas, and the same-class IoU table."""

    __slots__ = ("image", "gts", "dets", "gt_areas", "det_areas", "ious")

    def __init__(
        self,
        image: str,
        gts: Sequence[GroundTruthAnnotation],
        dets: Sequence[Detection],
        kind: str,
        width: int,
        height: int,
    ):
        self.image = image
        self.gts = tuple(gts)
        self.dets = tuple(dets)
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        if kind == "box":
            gt_fps = [polygon_bbox(g.polygon) for g in gts]
            det_fps = [d.box if d.box is not None else polygon_bbox(d.polygon) for d in dets]
            pair_iou = box_iou
        else:
            gt_fps = [rasterize(g.polygon, width, height) for g in gts]
            det_fps = []
            for i, d in enumerate(dets):
                if d.polygon is None:
                    raise ValueError(
                        f"mask evaluation requires a polygon footprint: "
                        f"detection {i} on image {image!r}"
                    )
                det_fps.append(rasterize(d.polygon, width, height))
            pair_iou = mask_iou
        if kind == "box":
            self.gt_areas = tuple(fp.area for fp in gt_fps)
            self.det_areas = tuple(fp.area for fp in det_fps)
        else:
            self.gt_areas = tuple(float(fp.pixel_count) for fp in gt_fps)
            self.det_areas = tuple(float(fp.pixel_count) for fp in det_fps)
        ious: dict[tuple[int, int], float] = {}
        for i, d in enumerate(dets):
            for j, g in enumerate(gts):
                if d.class_id == g.class_id:
                    ious[(i, j)] = pair_iou(det_fps[i], gt_fps[j])
        self.ious = ious


def _ranking(dets: Sequence[Detection]) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def _match_features(
    feats: _ImageFeatures,
    iou_thr: float,
    gt_ignore: Sequence[bool],
    det_ignore: Sequence[bool],
) -> MatchOutcome:
    gts, dets = feats.gts, feats.dets
    # ground truths are scanned with the non-ignored section first; within a
    # section, input order; ties on IoU keep the earliest scanned
    gt_scan = sorted(range(len(gts)), key=lambda j: (bool(gt_ignore[j]), j))
    claimed = [False] * len(gts)
    det_verdicts: list[DetectionVerdict] = []
    for i in _ranking(dets):
        det = dets[i]
        best_j = -1
        best_iou = 0.0
        for j in gt_scan:
            if claimed[j] or gts[j].class_id != det.class_id:
                continue
            if best_j >= 0 and gt_ignore[j] and not gt_ignore[best_j]:
                break  # a real match in hand beats any ignored candidate
            iou = feats.ious.get((i, j), 0.0)
            if iou < iou_thr or (best_j >= 0 and iou <= best_iou):
                continue
            best_j, best_iou = j, iou
        if best_j < 0:
            verdict = "ignored" if det_ignore[i] else "fp"
            det_verdicts.append(
                DetectionVerdict(feats.image, i, det.class_id, det.score, verdict)
            )
            continue
        claimed[best_j] = True
        if gt_ignore[best_j]:
            det_verdicts.append(
                DetectionVerdict(feats.image, i, det.class_id, det.score, "ignored")
            )
        else:
            det_verdicts.append(
                DetectionVerdict(
                    feats.image, i, det.class_id, det.score, "tp", gts[best_j].stable_id
                )
            )
    gt_verdicts = tuple(
        GroundTruthVerdict(
            feats.image,
            g.stable_id,
            g.class_id,
            "ignored" if gt_ignore[j] else ("matched" if claimed[j] else "missed"),
        )
        for j, g in enumerate(gts)
    )
    return MatchOutcome(feats.image, iou_thr, "", tuple(det_verdicts), gt_verdicts)


def match_image(
    gts: Sequence[GroundTruthAnnotation],
    dets: Sequence[Detection],
    iou_thr: float,
    kind: str,
    width: int | None = None,
    height: int | None = None,
    gt_ignore: Sequence[bool] | None = None,
    det_ignore: Sequence[bool] | None = None,
) -> MatchOutcome:
    """Greedily match one image's detections against its ground truths.

    ``width``/``height`` define the rasterization frame and are required for
    the mask kind.  The optional ignore marks come from
    ``size_stratified_filter``: ignored ground truths are matchable but
    produce ignored detections instead of TPs, and a detection marked
    ignored turns into "ignored" rather than "fp" when it ends up unmatched.
    """
    if not (0.0 < iou_thr <= 1.0):
        raise ValueError(f"iou threshold must lie in (0, 1], got {iou_thr}")
    images = {g.image_ref for g in gts} | {d.image_ref for d in dets}
    if len(images) > 1:
        raise ValueError(f"match_image expects a single image, got {sorted(images)}")
    image = next(iter(images)) if images else ""
    if kind == "mask" and (width is None or height is None):
        raise ValueError("mask matching needs the image frame (width, height)")
    feats = _ImageFeatures(image, gts, dets, kind, width or 0, height or 0)
    gt_ignore = list(gt_ignore) if gt_ignore is not None else [False] * len(gts)
    det_ignore = list(det_ignore) if det_ignore is not None else [False] * len(dets)
    if len(gt_ignore) != len(gts) or len(det_ignore) != len(dets):
        raise ValueError("ignore mark lists must parallel the inputs")
    outcome = _match_features(feats, iou_thr, gt_ignore, det_ignore)
    return MatchOutcome(image, iou_thr, kind, outcome.detections, outcome.ground_truths)


def _marks_from_areas(
    gt_areas: Sequence[float], det_areas: Sequence[float], area_range: tuple[float, float]
) -> tuple[tuple[bool, ...], tuple[bool, ...]]:
    lo, hi = area_range
    return (
        tuple(not (lo <= a < hi) for a in gt_areas),
        tuple(not (lo <= a < hi) for a in det_areas),
    )


def size_stratified_filter(
    gts: Sequence[GroundTruthAnnotation],
    dets: Sequence[Detection],
    area_range: tuple[float, float],
    kind: str,
    width: int | None = None,
    height: int | None = None,
) -> tuple[tuple[bool, ...], tuple[bool, ...]]:
    """Ignore marks for a half-open [min, max) area stratum.

    Areas are box areas for the box kind and rasterized pixel counts for the
    mask kind (frame required).  The ground-truth marks remove instances
    from n_gt; the detection marks soften unmatched detections from FP to
    ignored.  Marks for in-range instances are False.
    """
    if kind == "mask" and (width is None or height is None):
        raise ValueError("mask areas need the image frame (width, height)")
    w, h = width or 0, height or 0
    gt_areas = [
        _footprint_area(g.polygon, None, kind, w, h, f"ground truth {g.stable_id}") for g in gts
    ]
    det_areas = [
        _footprint_area(d.polygon, d.box, kind, w, h, f"detection {i}")
        for i, d in enumerate(dets)
    ]
    return _marks_from_areas(gt_areas, det_areas, area_range)


def accumulate_pr(outcomes: Iterable[MatchOutcome], class_id: int) -> PRCurve:
    """Merge per-image outcomes into one class's PR curve.

    The traversal is a deterministic global sort: score descending, then
    image name, then input order; ignored detections are skipped and ignored
    ground truths are absent from n_gt.  All outcomes must come from a
    single (iou threshold, kind) pass.
    """
    outcomes = list(outcomes)
    keys = {(o.iou_threshold, o.kind) for o in outcomes}
    if len(keys) > 1:
        raise ValueError(f"outcomes mix thresholds or kinds: {sorted(keys)}")
    dets = [
        dv
        for o in outcomes
        for dv in o.detections
        if dv.class_id == class_id and dv.verdict != "ignored"
    ]
    dets.sort(key=lambda dv: (-dv.score, dv.image, dv.input_index))
    n_gt = sum(
        1
        for o in outcomes
        for gv in o.ground_truths
        if gv.class_id == class_id and gv.state != "ignored"
    )
    points: list[tuple[float, float]] = []
    tp = 0
    for rank, dv in enumerate(dets, start=1):
        if dv.verdict == "tp":
            tp += 1
        recall = tp / n_gt if n_gt > 0 else 0.0
        points.append((recall, tp / rank))
    return PRCurve(tuple(points), n_gt, len(dets))


def average_precision(curve: PRCurve) -> float | None:
    """101-point interpolated AP; None when the curve is undefined (no GT).

    p_interp(r) is the maximum precision over curve points whose recall is
    at least r; the result is the mean of p_interp over the 101 recall
    levels {0.00, 0.01, ..., 1.00}.
    """
    if not curve.defined:
        return None
    if not curve.points:
        return 0.0
    recalls = [r for r, _ in curve.points]
    envelope = [0.0] * len(curve.points)
    best = 0.0
    for k in range(len(curve.points) - 1, -1, -1):
        best = max(best, curve.points[k][1])
        envelope[k] = best
    total = 0.0
    for r in RECALL_GRID:
        idx = bisect_left(recalls, r)
        if idx < len(envelope):
            total += envelope[idx]
    return total / 101


def _worker_count(workers: int | None) -> int:
    if workers is None:
        raw = os.environ.get("SEGEVAL_THREADS", "")
        if raw:
            try:
                workers = int(raw)
            except ValueError:
                raise ValueError(
                    f"SEGEVAL_THREADS must be a positive integer, got {raw!r}"
                ) from None
        else:
            workers = 1
    if workers < 1:
        raise ValueError(f"worker count must be positive, got {workers}")
    return workers


def _grouped(
    bundle: DatasetBundle, dets: Sequence[Detection]
) -> tuple[dict[str, tuple[GroundTruthAnnotation, ...]], dict[str, list[Detection]]]:
    image_map = bundle.image_map()
    for d in dets:
        if d.image_ref not in image_map:
            raise ValueError(f"detection references unknown image {d.image_ref!r}")
    gts_by_image = bundle.annotations_by_image()
    dets_by_image: dict[str, list[Detection]] = {name: [] for name in image_map}
    for d in dets:
        dets_by_image[d.image_ref].append(d)
    return gts_by_image, dets_by_image


def _build_features(
    bundle: DatasetBundle,
    dets: Sequence[Detection],
    kinds: Sequence[str],
    workers: int | None,
) -> dict[tuple[str, str], _ImageFeatures]:
    gts_by_image, dets_by_image = _grouped(bundle, dets)
    image_map = bundle.image_map()
    names = sorted(image_map)
    jobs = [(kind, name) for kind in kinds for name in names]

    def build(job: tuple[str, str]) -> tuple[tuple[str, str], _ImageFeatures]:
        kind, name = job
        rec = image_map[name]
        feats = _ImageFeatures(
            name, gts_by_image[name], tuple(dets_by_image[name]), kind, rec.width, rec.height
        )
        return (kind, name), feats

    n_workers = _worker_count(workers)
    if n_workers == 1 or len(jobs) < 2:
        built = map(build, jobs)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            built = list(pool.map(build, jobs))
    return dict(built)


def _auto_kinds(dets: Sequence[Detection]) -> tuple[str, ...]:
    if all(d.polygon is not None for d in dets):
        return ("box", "mask")
    return ("box",)


def evaluate(
    bundle: DatasetBundle,
    dets: Sequence[Detection],
    cfg: MatchConfig | None = None,
    kinds: Sequence[str] | None = None,
    include_non_defect_in_means: bool = False,
    workers: int | None = None,
) -> EvaluationReport:
    """Compute the full AP report over the dense IoU grid.

    Per kind and class: AP (grid mean), the two configured report
    thresholds (0.50 and 0.75 by default, filling the ap50/ap75 cells), and
    the medium/large strata AP_m/AP_l (grid means under ignore semantics).
    Cells without
    ground truth in the stratum are None and excluded from the per-kind mean
    rows, which by default also exclude non-defect classes
    (``include_non_defect_in_means`` widens them).  ``kinds`` defaults to
    box plus mask when every detection carries a polygon.  Worker count
    (also via SEGEVAL_THREADS) only parallelizes footprint preparation;
    results are identical at any setting.
    """
    cfg = cfg or MatchConfig()
    # the two headline columns are picked out of the dense grid, so the
    # configured report thresholds must be grid members
    if len(cfg.iou_thresholds) != 2:
        raise ValueError(
            f"report needs exactly two IoU thresholds, got {len(cfg.iou_thresholds)}"
        )
    lo_thr, hi_thr = cfg.iou_thresholds
    for thr in (lo_thr, hi_thr):
        if thr not in DEFAULT_IOU_GRID:
            raise ValueError(f"report threshold {thr} is not on the IoU grid {DEFAULT_IOU_GRID}")
    if kinds is None:
        kinds = _auto_kinds(dets)
    else:
        kinds = tuple(kinds)
        for k in kinds:
            if k not in KINDS:
                raise ValueError(f"kind must be one of {KINDS}, got {k!r}")
    features = _build_features(bundle, dets, kinds, workers)
    image_map = bundle.image_map()
    names = sorted(image_map)
    ranges = dict(cfg.area_ranges)
    for required in ("all", "medium", "large"):
        if required not in ranges:
            ranges[required] = default_area_ranges()[required]

    rows: list[ReportRow] = []
    for kind in kinds:
        # ap_table[label][class_id] = list of AP values over the IoU grid
        ap_table: dict[str, dict[int, list[float | None]]] = {}
        for label, area_range in ranges.items():
            per_class: dict[int, list[float | None]] = {c.class_id: [] for c in bundle.registry}
            marks = {
                name: _marks_from_areas(
                    features[(kind, name)].gt_areas,
                    features[(kind, name)].det_areas,
                    area_range,
                )
                for name in names
            }
            for thr in DEFAULT_IOU_GRID:
                outcomes = []
                for name in names:
                    feats = features[(kind, name)]
                    gt_ig, det_ig = marks[name]
                    o = _match_features(feats, thr, gt_ig, det_ig)
                    outcomes.append(MatchOutcome(o.image, thr, kind, o.detections, o.ground_truths))
                for c in bundle.registry:
                    curve = accumulate_pr(outcomes, c.class_id)
                    per_class[c.class_id].append(average_precision(curve))
            ap_table[label] = per_class

        def grid_mean(values: list[float | None]) -> float | None:
            if any(v is None for v in values):
                return None
            return sum(values) / len(values)

        def at_thr(values: list[float | None], thr: float) -> float | None:
            return values[DEFAULT_IOU_GRID.index(thr)]

        cells_by_class: dict[int, ReportCells] = {}
        for c in bundle.registry:
            all_vals = ap_table["all"][c.class_id]
            cells_by_class[c.class_id] = ReportCells(
                ap=grid_mean(all_vals),
                ap50=at_thr(all_vals, lo_thr),
                ap75=at_thr(all_vals, hi_thr),
                ap_m=grid_mean(ap_table["medium"][c.class_id]),
                ap_l=grid_mean(ap_table["large"][c.class_id]),
            )
            rows.append(ReportRow(kind, bundle.registry.name_of(c.class_id), cells_by_class[c.class_id]))

        mean_classes = [
            c.class_id
            for c in bundle.registry
            if include_non_defect_in_means or c.is_defect
        ]

        def column_mean(getter) -> float | None:
            defined = [getter(cells_by_class[cid]) for cid in mean_classes]
            defined = [v for v in defined if v is not None]
            if not defined:
                return None
            return sum(defined) / len(defined)

        rows.append(
            ReportRow(
                kind,
                "mean",
                ReportCells(
                    ap=column_mean(lambda c: c.ap),
                    ap50=column_mean(lambda c: c.ap50),
                    ap75=column_mean(lambda c: c.ap75),
                    ap_m=column_mean(lambda c: c.ap_m),
                    ap_l=column_mean(lambda c: c.ap_l),
                ),
            )
        )

    metadata = {
        "images": len(bundle.images),
        "annotations": len(bundle.annotations),
        "detections": len(dets),
        "kinds": list(kinds),
        "iou_grid": list(DEFAULT_IOU_GRID),
        "area_ranges": {k: [v[0], v[1]] for k, v in ranges.items()},
        "area_unit": "px^2 at native annotation resolution",
        "score_tie_break": "input-file order",
        "merge_order": "score descending, then image name, then input order",
        "include_non_defect_in_means": include_non_defect_in_means,
        "config": {
            "iou_thresholds": list(cfg.iou_thresholds),
            "iou_kind": cfg.iou_kind,
            "score_threshold": cfg.score_threshold,
        },
    }
    return EvaluationReport(tuple(rows), metadata)


def fp_fn_counts(
    bundle: DatasetBundle,
    dets: Sequence[Detection],
    score_thr: float,
    iou_thr: float,
    kind: str,
) -> FpFnCounts:
    """Hard-threshold counts: discard detections below ``score_thr``, match
    the rest at ``iou_thr``, and count unmatched detections (FP), unmatched
    ground truths (FN), and matches (TP) over all classes."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    kept = [d for d in dets if d.score >= score_thr]
    gts_by_image, dets_by_image = _grouped(bundle, kept)
    image_map = bundle.image_map()
    fp = fn = tp = 0
    for name in sorted(image_map):
        rec = image_map[name]
        outcome = match_image(
            gts_by_image[name],
            tuple(dets_by_image[name]),
            iou_thr,
            kind,
            rec.width,
            rec.height,
        )
        fp += sum(1 for dv in outcome.detections if dv.verdict == "fp")
        tp += sum(1 for dv in outcome.detections if dv.verdict == "tp")
        fn += sum(1 for gv in outcome.ground_truths if gv.state == "missed")
    return FpFnCounts(fp, fn, tp)


def threshold_sweep(
    bundle: DatasetBundle,
    dets: Sequence[Detection],
    iou_thr: float,
    kind: str,
    grid: Sequence[float],
) -> tuple[SweepPoint, ...]:
    """``fp_fn_counts`` at every score threshold of an ascending grid."""
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid must not be empty")
    if any(not (0.0 <= t <= 1.0) for t in grid):
        raise ValueError(f"sweep grid values must lie in [0, 1], got {grid}")
    if grid != sorted(grid):
        raise ValueError("sweep grid must be sorted ascending")
    return tuple(
        SweepPoint(tau, *fp_fn_counts(bundle, dets, tau, iou_thr, kind)) for tau in grid
    )


def image_level_accuracy(
    bundle: DatasetBundle, dets: Sequence[Detection], tau: float
) -> ImageAccuracy:
    """Defective-or-not agreement per image, as an exact rational.

    An image is predicted defective iff some detection on it has score >= tau
    in a defect class; it is truly defective iff it has an annotation in a
    defect class.  Detections for unknown images contribute nothing.
    """
    defect_ids = {c.class_id for c in bundle.registry if c.is_defect}
    truly = {
        rec.file_name: False for rec in bundle.images
    }
    for ann in bundle.annotations:
        if ann.class_id in defect_ids and ann.image_ref in truly:
            truly[ann.image_ref] = True
    predicted = {rec.file_name: False for rec in bundle.images}
    for d in dets:
        if d.class_id in defect_ids and d.score >= tau and d.image_ref in predicted:
            predicted[d.image_ref] = True
    correct = sum(1 for name in truly if truly[name] == predicted[name])
    total = len(bundle.images)
    ratio = Fraction(correct, total) if total else Fraction(0)
    return ImageAccuracy(correct, total, ratio)
