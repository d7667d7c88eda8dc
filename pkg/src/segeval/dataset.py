"""Dataset ingestion, validation, summarizing, and splitting.

Ground truth arrives as VIA polygon annotation documents (the subset schema
is described in ``parse_via``), predictions as a JSON list of detection
records.  Image dimensions are not part of the VIA schema, so they come from
a sidecar manifest when available and otherwise fall back to the default
frame of 2040x1086.

All parsed containers are immutable and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterator, Mapping, NamedTuple

from segeval.geometry import BoundingBox, Polygon, polygon_area, polygon_bbox
from segeval.rng import make_rng

__all__ = [
    "DatasetError",
    "ClassDef",
    "ClassRegistry",
    "DEFAULT_REGISTRY",
    "DEFAULT_WIDTH",
    "DEFAULT_HEIGHT",
    "ImageRecord",
    "GroundTruthAnnotation",
    "Detection",
    "DatasetBundle",
    "Issue",
    "ClassCounts",
    "parse_manifest",
    "serialize_manifest",
    "parse_via",
    "serialize_via",
    "parse_detections",
    "class_histogram",
    "split",
    "validate",
]

DEFAULT_WIDTH = 2040
DEFAULT_HEIGHT = 1086


class DatasetError(ValueError):
    """Malformed input document; the message carries the offending location."""


@dataclass(frozen=True)
class ClassDef:
    class_id: int
    name: str
    is_defect: bool


@dataclass(frozen=True)
class ClassRegistry:
    """Ordered class table; ids are dense from 0 and names are unique."""

    classes: tuple[ClassDef, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        names = [c.name for c in self.classes]
        if any(not n for n in names):
            raise ValueError("class names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        ids = [c.class_id for c in self.classes]
        if ids != list(range(len(ids))):
            raise ValueError(f"class ids must be dense from 0, got {ids}")

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self) -> Iterator[ClassDef]:
        return iter(self.classes)

    def id_of(self, name: str) -> int:
        for c in self.classes:
            if c.name == name:
                return c.class_id
        raise DatasetError(f"unknown class label {name!r}")

    def name_of(self, class_id: int) -> str:
        if 0 <= class_id < len(self.classes):
            return self.classes[class_id].name
        raise DatasetError(f"unknown class id {class_id}")

    def is_defect(self, class_id: int) -> bool:
        return self.classes[class_id].is_defect

    def resolve(self, label: Any) -> int:
        """Accept either a class name or an integer id."""
        if isinstance(label, bool):
            raise DatasetError(f"class label must be a string or integer, got {label!r}")
        if isinstance(label, int):
            self.name_of(label)
            return label
        if isinstance(label, str):
            return self.id_of(label)
        raise DatasetError(f"class label must be a string or integer, got {label!r}")


DEFAULT_REGISTRY = ClassRegistry(
    (
        ClassDef(0, "placking_high", True),
        ClassDef(1, "placking_medium", True),
        ClassDef(2, "placking_low", True),
        ClassDef(3, "compression", True),
        ClassDef(4, "core_out", True),
        ClassDef(5, "chafing", True),
        ClassDef(6, "normal", False),
    )
)


@dataclass(frozen=True)
class ImageRecord:
    file_name: str
    width: int
    height: int

    def __post_init__(self) -> None:
        if not self.file_name:
            raise ValueError("file_name must be non-empty")
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"{self.file_name}: dimensions must be at least 1x1, got {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class GroundTruthAnnotation:
    image_ref: str
    class_id: int
    polygon: Polygon
    stable_id: int


@dataclass(frozen=True)
class Detection:
    """Model prediction; carries a polygon, a box, or both (never neither).

    When a polygon is present the box is its tight bounding box, so the two
    footprints always describe the same instance.
    """

    image_ref: str
    class_id: int
    score: float
    polygon: Polygon | None = None
    box: BoundingBox | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be within [0, 1], got {self.score}")
        if self.polygon is None and self.box is None:
            raise ValueError("detection needs a polygon or a box footprint")
        if self.polygon is not None:
            object.__setattr__(self, "box", polygon_bbox(self.polygon))


@dataclass(frozen=True)
class DatasetBundle:
    """Immutable image + annotation collection sharing one class registry.

    Construction enforces unique file names and stable ids; referential
    soundness (annotations pointing at existing images, classes in the
    registry) is the business of ``validate``, which reports rather than
    raises so that broken inputs can be inspected.
    """

    registry: ClassRegistry
    images: tuple[ImageRecord, ...]
    annotations: tuple[GroundTruthAnnotation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        seen = set()
        for rec in self.images:
            if rec.file_name in seen:
                raise ValueError(f"duplicate image file_name {rec.file_name!r}")
            seen.add(rec.file_name)
        ids = [a.stable_id for a in self.annotations]
        if len(set(ids)) != len(ids):
            raise ValueError("annotation stable_ids must be unique")

    def image_map(self) -> dict[str, ImageRecord]:
        return {rec.file_name: rec for rec in self.images}

    def annotations_by_image(self) -> dict[str, tuple[GroundTruthAnnotation, ...]]:
        grouped: dict[str, list[GroundTruthAnnotation]] = {r.file_name: [] for r in self.images}
        for ann in self.annotations:
            grouped.setdefault(ann.image_ref, []).append(ann)
        return {name: tuple(anns) for name, anns in grouped.items()}


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" or "warning"
    location: str
    message: str

    def __post_init__(self) -> None:
        if self.severity not in ("error", "warning"):
            raise ValueError(f"severity must be 'error' or 'warning', got {self.severity!r}")


class ClassCounts(NamedTuple):
    per_class: dict[str, int]
    total: int


def parse_manifest(text: str) -> dict[str, tuple[int, int]]:
    """Parse a dimension manifest: one `file_name,width,height` record per line.

    File names may contain commas; the two rightmost fields are the
    dimensions.  Blank lines are permitted.
    """
    dims: dict[str, tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.rsplit(",", 2)
        if len(parts) != 3:
            raise DatasetError(f"manifest line {lineno}: expected file_name,width,height")
        name = parts[0].strip()
        try:
            width, height = int(parts[1]), int(parts[2])
        except ValueError:
            raise DatasetError(f"manifest line {lineno}: dimensions must be integers") from None
        if not name:
            raise DatasetError(f"manifest line {lineno}: empty file_name")
        if width < 1 or height < 1:
            raise DatasetError(f"manifest line {lineno}: dimensions must be positive")
        dims[name] = (width, height)
    return dims


def serialize_manifest(b: DatasetBundle) -> str:
    lines = [f"{rec.file_name},{rec.width},{rec.height}" for rec in b.images]
    return "\n".join(lines) + ("\n" if lines else "")


def _require(mapping: Any, key: str, where: str) -> Any:
    if not isinstance(mapping, dict):
        raise DatasetError(f"{where}: expected an object")
    if key not in mapping:
        raise DatasetError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _parse_points(shape: dict, where: str) -> Polygon:
    xs = _require(shape, "all_points_x", where)
    ys = _require(shape, "all_points_y", where)
    if not isinstance(xs, list) or not isinstance(ys, list):
        raise DatasetError(f"{where}: all_points_x/all_points_y must be arrays")
    if len(xs) != len(ys):
        raise DatasetError(
            f"{where}: all_points_x and all_points_y differ in length ({len(xs)} vs {len(ys)})"
        )
    if len(xs) < 3:
        raise DatasetError(f"{where}: polygon needs at least 3 points, got {len(xs)}")
    for v in [*xs, *ys]:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise DatasetError(f"{where}: coordinates must be finite numbers")
    try:
        return Polygon.from_xy(xs, ys)
    except ValueError as exc:
        raise DatasetError(f"{where}: {exc}") from None


def parse_via(
    doc: str | Mapping[str, Any],
    registry: ClassRegistry = DEFAULT_REGISTRY,
    attribute_key: str = "label",
    dimensions: Mapping[str, tuple[int, int]] | None = None,
) -> DatasetBundle:
    """Parse a VIA polygon annotation document into a bundle.

    The accepted subset is the VIA export layout: a top-level object mapping
    file keys to ``{"filename": str, "size": int, "regions": [...]}`` where
    each region holds polygon ``shape_attributes`` (``all_points_x``,
    ``all_points_y``) and a ``region_attributes`` object whose
    ``attribute_key`` entry names the class.  Project files that wrap this
    mapping under ``_via_img_metadata`` are unwrapped transparently.

    Dimensions come from the ``dimensions`` mapping (see ``parse_manifest``)
    and default to 2040x1086 when absent.  Regions with a shape other than
    "polygon", fewer than 3 points, or an unknown class label are errors.
    """
    if isinstance(doc, str):
        try:
            data = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"annotation document is not valid JSON: {exc}") from None
    else:
        data = dict(doc)
    if not isinstance(data, dict):
        raise DatasetError("annotation document must be a JSON object")
    if "_via_img_metadata" in data and isinstance(data["_via_img_metadata"], dict):
        data = data["_via_img_metadata"]

    dims = dict(dimensions) if dimensions else {}
    images: list[ImageRecord] = []
    annotations: list[GroundTruthAnnotation] = []
    stable_id = 0
    for key, entry in data.items():
        where = f"image entry {key!r}"
        file_name = _require(entry, "filename", where)
        if not isinstance(file_name, str) or not file_name:
            raise DatasetError(f"{where}: filename must be a non-empty string")
        width, height = dims.get(file_name, (DEFAULT_WIDTH, DEFAULT_HEIGHT))
        try:
            images.append(ImageRecord(file_name, width, height))
        except ValueError as exc:
            raise DatasetError(f"{where}: {exc}") from None
        regions = _require(entry, "regions", where)
        if not isinstance(regions, list):
            raise DatasetError(f"{where}: regions must be an array")
        for idx, region in enumerate(regions):
            where_r = f"{file_name} region {idx}"
            shape = _require(region, "shape_attributes", where_r)
            shape_name = _require(shape, "name", where_r)
            if shape_name != "polygon":
                raise DatasetError(f"{where_r}: unsupported shape {shape_name!r}")
            polygon = _parse_points(shape, where_r)
            attrs = _require(region, "region_attributes", where_r)
            label = _require(attrs, attribute_key, where_r)
            if not isinstance(label, str):
                raise DatasetError(f"{where_r}: class attribute {attribute_key!r} must be a string")
            try:
                class_id = registry.id_of(label)
            except DatasetError as exc:
                raise DatasetError(f"{where_r}: {exc}") from None
            annotations.append(GroundTruthAnnotation(file_name, class_id, polygon, stable_id))
            stable_id += 1
    try:
        return DatasetBundle(registry, tuple(images), tuple(annotations))
    except ValueError as exc:
        raise DatasetError(str(exc)) from None


def serialize_via(b: DatasetBundle, attribute_key: str = "label") -> dict[str, Any]:
    """Emit the VIA mapping for a bundle; the inverse of ``parse_via``.

    Byte sizes are unknown here, so the conventional placeholder -1 is
    written.  Round trip: parsing the result with the manifest from
    ``serialize_manifest`` reproduces the bundle exactly.
    """
    by_image = b.annotations_by_image()
    doc: dict[str, Any] = {}
    for rec in b.images:
        regions = [
            {
                "shape_attributes": {
                    "name": "polygon",
                    "all_points_x": [v.x for v in ann.polygon.vertices],
                    "all_points_y": [v.y for v in ann.polygon.vertices],
                },
                "region_attributes": {attribute_key: b.registry.name_of(ann.class_id)},
            }
            for ann in by_image.get(rec.file_name, ())
        ]
        doc[f"{rec.file_name}-1"] = {
            "filename": rec.file_name,
            "size": -1,
            "regions": regions,
        }
    return doc


def parse_detections(
    doc: str | list,
    registry: ClassRegistry = DEFAULT_REGISTRY,
) -> tuple[Detection, ...]:
    """Parse a prediction document: a JSON list of detection records.

    Each record carries "image", "category" (class name or id), "score" in
    [0, 1], and at least one footprint: "segmentation" with all_points_x/y
    arrays, or "bbox" as [x_min, y_min, width, height].  A segmentation
    always yields the derived tight box, so a bbox given alongside one is
    redundant and ignored.
    """
    if isinstance(doc, str):
        try:
            data = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"prediction document is not valid JSON: {exc}") from None
    else:
        data = doc
    if not isinstance(data, list):
        raise DatasetError("prediction document must be a JSON array")

    detections: list[Detection] = []
    for idx, record in enumerate(data):
        where = f"prediction record {idx}"
        image = _require(record, "image", where)
        if not isinstance(image, str) or not image:
            raise DatasetError(f"{where}: image must be a non-empty string")
        class_id = _resolve_category(record, registry, where)
        score = _require(record, "score", where)
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise DatasetError(f"{where}: score must be a number")
        if not (0.0 <= float(score) <= 1.0):
            raise DatasetError(f"{where}: score {score} outside [0, 1]")
        polygon = None
        box = None
        if "segmentation" in record and record["segmentation"] is not None:
            polygon = _parse_points(record["segmentation"], where)
        if polygon is None:
            if "bbox" not in record or record["bbox"] is None:
                raise DatasetError(f"{where}: needs a segmentation or a bbox")
            box = _parse_bbox(record["bbox"], where)
        try:
            detections.append(Detection(image, class_id, float(score), polygon, box))
        except ValueError as exc:
            raise DatasetError(f"{where}: {exc}") from None
    return tuple(detections)


def _resolve_category(record: Any, registry: ClassRegistry, where: str) -> int:
    label = _require(record, "category", where)
    try:
        return registry.resolve(label)
    except DatasetError as exc:
        raise DatasetError(f"{where}: {exc}") from None


def _parse_bbox(raw: Any, where: str) -> BoundingBox:
    if not isinstance(raw, list) or len(raw) != 4:
        raise DatasetError(f"{where}: bbox must be [x_min, y_min, width, height]")
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise DatasetError(f"{where}: bbox values must be finite numbers")
    x, y, w, h = (float(v) for v in raw)
    if w <= 0 or h <= 0:
        raise DatasetError(f"{where}: bbox width and height must be positive")
    return BoundingBox(x, y, x + w, y + h)


def class_histogram(b: DatasetBundle) -> ClassCounts:
    """Annotation counts keyed by class name, plus the grand total."""
    counts = {c.name: 0 for c in b.registry}
    for ann in b.annotations:
        counts[b.registry.name_of(ann.class_id)] += 1
    return ClassCounts(counts, len(b.annotations))


def split(
    b: DatasetBundle, sizes: tuple[int, int, int], seed: int
) -> tuple[DatasetBundle, DatasetBundle, DatasetBundle]:
    """Shuffle images with the seeded generator and cut into three bundles.

    ``sizes`` must sum to the image count.  Annotations follow their images;
    splitting is always by whole image so one frame never leaks across
    subsets.  Equal seeds give identical partitions.
    """
    n_train, n_val, n_test = sizes
    if any(s < 0 for s in sizes):
        raise ValueError(f"sizes must be non-negative, got {sizes}")
    if n_train + n_val + n_test != len(b.images):
        raise ValueError(
            f"sizes must sum to the image count: expected {len(b.images)}, "
            f"got {n_train} + {n_val} + {n_test} = {n_train + n_val + n_test}"
        )
    order = make_rng(seed).permutation(len(b.images))
    shuffled = [b.images[i] for i in order]
    cuts = (shuffled[:n_train], shuffled[n_train : n_train + n_val], shuffled[n_train + n_val :])

    def bundle_for(images: list[ImageRecord]) -> DatasetBundle:
        names = {rec.file_name for rec in images}
        anns = tuple(a for a in b.annotations if a.image_ref in names)
        return DatasetBundle(b.registry, tuple(images), anns)

    return bundle_for(cuts[0]), bundle_for(cuts[1]), bundle_for(cuts[2])


def _orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> int:
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (v > 0) - (v < 0)


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper crossing test: the open interiors of the segments intersect."""
    o1 = _orient(p1.x, p1.y, p2.x, p2.y, p3.x, p3.y)
    o2 = _orient(p1.x, p1.y, p2.x, p2.y, p4.x, p4.y)
    o3 = _orient(p3.x, p3.y, p4.x, p4.y, p1.x, p1.y)
    o4 = _orient(p3.x, p3.y, p4.x, p4.y, p2.x, p2.y)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _self_intersects(p: Polygon) -> bool:
    verts = p.vertices
    n = len(verts)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent edges share a vertex
            if _segments_cross(verts[i], verts[(i + 1) % n], verts[j], verts[(j + 1) % n]):
                return True
    return False


def validate(b: DatasetBundle) -> tuple[Issue, ...]:
    """Check referential and geometric soundness; an empty result means clean.

    Errors: annotation referencing a missing image, class id outside the
    registry, polygons with fewer than 3 vertices, and vertices further than
    1 px outside the image frame.  Warnings: self-intersecting and zero-area
    polygons.
    """
    issues: list[Issue] = []
    frames = {rec.file_name: (rec.width, rec.height) for rec in b.images}
    known_ids = {c.class_id for c in b.registry}
    for ann in b.annotations:
        loc = f"{ann.image_ref}:annotation {ann.stable_id}"
        if ann.image_ref not in frames:
            issues.append(Issue("error", loc, f"references missing image {ann.image_ref!r}"))
            continue
        if ann.class_id not in known_ids:
            issues.append(Issue("error", loc, f"class id {ann.class_id} not in registry"))
        verts = ann.polygon.vertices
        if len(verts) < 3:
            issues.append(Issue("error", loc, f"polygon has {len(verts)} vertices, needs 3"))
            continue
        width, height = frames[ann.image_ref]
        for v in verts:
            if v.x < -1.0 or v.x > width + 1.0 or v.y < -1.0 or v.y > height + 1.0:
                issues.append(
                    Issue(
                        "error",
                        loc,
                        f"vertex ({v.x}, {v.y}) lies more than 1 px outside "
                        f"the {width}x{height} frame",
                    )
                )
                break
        # checked before the area test: a bow-tie's signed lobes cancel to 0
        if _self_intersects(ann.polygon):
            issues.append(Issue("warning", loc, "polygon is self-intersecting"))
        elif polygon_area(ann.polygon) == 0.0:
            issues.append(Issue("warning", loc, "polygon has zero area"))
    return tuple(issues)
