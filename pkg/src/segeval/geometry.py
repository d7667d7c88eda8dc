"""Plane geometry for polygon annotations: boxes, raster masks, affine maps, IoU.

Coordinate convention
---------------------
Coordinates are continuous, the origin is the top-left image corner, x grows
rightward and y grows downward.  Pixel (row i, col j) occupies the unit square
[j, j+1) x [i, i+1) and has its center at (j + 0.5, i + 0.5).  Box area is the
continuous product (x_max - x_min) * (y_max - y_min), with no +1 pixel
correction.

Rasterization fill rule
-----------------------
A pixel is foreground iff its center lies inside the polygon under the
even-odd rule, with boundary ties broken half-open (top-left convention).
Concretely, an edge (x1, y1) -> (x2, y2) crosses the scanline at height y iff
exactly one endpoint lies strictly above it, ``(y1 > y) != (y2 > y)``, at

    x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)

and a center (cx, y) counts that crossing iff ``cx < x_cross``.  The center is
inside iff it counts an odd number of crossings.  Top and left boundary pixels
are therefore filled while bottom and right ones are not, and every raster
operation in this package agrees with this single predicate bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

__all__ = [
    "Point2",
    "Polygon",
    "BoundingBox",
    "RasterMask",
    "AffineMap",
    "polygon_bbox",
    "polygon_area",
    "box_iou",
    "rasterize",
    "mask_iou",
    "apply_affine",
    "clip_polygon_to_frame",
]


@dataclass(frozen=True)
class Point2:
    """Continuous pixel coordinate, x rightward, y downward from the top-left."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Polygon:
    """Implicitly closed vertex ring; the last vertex connects back to the first.

    Requires at least 3 vertices and no two consecutive identical vertices
    (the closing pair included).  Zero-area rings are accepted here; dataset
    validation flags them as degenerate.
    """

    vertices: tuple[Point2, ...]

    def __post_init__(self) -> None:
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {len(verts)}")
        for a, b in _edges(verts):
            if a.x == b.x and a.y == b.y:
                raise ValueError(f"polygon has consecutive duplicate vertex ({a.x}, {a.y})")

    @classmethod
    def from_xy(cls, xs: Sequence[float], ys: Sequence[float]) -> "Polygon":
        """Build from parallel coordinate lists (the annotation-file layout)."""
        if len(xs) != len(ys):
            raise ValueError(f"coordinate lists differ in length: {len(xs)} vs {len(ys)}")
        return cls(tuple(Point2(float(x), float(y)) for x, y in zip(xs, ys)))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with strictly positive width and height."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not math.isfinite(v):
                raise ValueError("box coordinates must be finite")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(
                f"degenerate box: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class RasterMask:
    """Binary mask as sorted, merged foreground runs over row-major pixel indices."""

    width: int
    height: int
    runs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"mask frame must be at least 1x1, got {self.width}x{self.height}")
        merged = _merge_runs(self.runs)
        limit = self.width * self.height
        for start, length in merged:
            if start < 0 or length < 1 or start + length > limit:
                raise ValueError(f"run ({start}, {length}) outside frame of {limit} pixels")
        object.__setattr__(self, "runs", merged)

    @property
    def pixel_count(self) -> int:
        return sum(length for _, length in self.runs)

    def to_array(self):
        """Decode to a (height, width) boolean array."""
        import numpy as np

        flat = np.zeros(self.width * self.height, dtype=bool)
        for start, length in self.runs:
            flat[start : start + length] = True
        return flat.reshape(self.height, self.width)


def _merge_runs(runs: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    ordered = sorted((int(s), int(n)) for s, n in runs)
    merged: list[tuple[int, int]] = []
    for start, length in ordered:
        if merged and start <= merged[-1][0] + merged[-1][1]:
            prev_start, prev_len = merged[-1]
            merged[-1] = (prev_start, max(prev_start + prev_len, start + length) - prev_start)
        else:
            merged.append((start, length))
    return tuple(merged)


@dataclass(frozen=True)
class AffineMap:
    """Map (x, y) -> (a*x + b*y + tx, c*x + d*y + ty)."""

    a: float
    b: float
    tx: float
    c: float
    d: float
    ty: float

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return (self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty)

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "AffineMap":
        det = self.determinant
        if det == 0.0:
            raise ValueError("affine map is singular, cannot invert")
        ia, ib = self.d / det, -self.b / det
        ic, id_ = -self.c / det, self.a / det
        return AffineMap(ia, ib, -(ia * self.tx + ib * self.ty), ic, id_, -(ic * self.tx + id_ * self.ty))

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineMap":
        return cls(1.0, 0.0, float(dx), 0.0, 1.0, float(dy))

    @classmethod
    def scaling(cls, sx: float, sy: float) -> "AffineMap":
        return cls(float(sx), 0.0, 0.0, 0.0, float(sy), 0.0)

    @classmethod
    def rotation_deg(cls, theta: float, cx: float = 0.0, cy: float = 0.0) -> "AffineMap":
        """Rotation by ``theta`` degrees about (cx, cy); positive turns x toward y."""
        rad = math.radians(theta)
        cos, sin = math.cos(rad), math.sin(rad)
        tx = cx - cos * cx + sin * cy
        ty = cy - sin * cx - cos * cy
        return cls(cos, -sin, tx, sin, cos, ty)


def _edges(verts: Sequence[Point2]) -> Iterator[tuple[Point2, Point2]]:
    n = len(verts)
    for i in range(n):
        yield verts[i], verts[(i + 1) % n]


def polygon_bbox(p: Polygon) -> BoundingBox:
    """Tight axis-aligned box over the vertices; raises on zero width or height."""
    xs = [v.x for v in p.vertices]
    ys = [v.y for v in p.vertices]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    if x_max == x_min or y_max == y_min:
        raise ValueError("degenerate polygon: bounding box has zero width or height")
    return BoundingBox(x_min, y_min, x_max, y_max)


def polygon_area(p: Polygon) -> float:
    """Absolute shoelace area, in px^2."""
    acc = 0.0
    for a, b in _edges(p.vertices):
        acc += a.x * b.y - b.x * a.y
    return abs(acc) / 2.0


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 for disjoint or edge-touching boxes."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def _first_center_at_or_after(bound: float) -> int:
    """Smallest integer k with k + 0.5 >= bound, settled by exact comparison."""
    k = math.ceil(bound - 0.5)
    while k + 0.5 < bound:
        k += 1
    while k - 0.5 >= bound:
        k -= 1
    return k


def rasterize(p: Polygon, width: int, height: int) -> RasterMask:
    """Scanline-rasterize a polygon into a width x height frame.

    Follows the module's even-odd, half-open fill rule: within each row the
    sorted edge crossings c1 <= c2 <= ... enclose foreground centers on the
    half-open intervals [c1, c2), [c3, c4), ...  A polygon entirely outside
    the frame yields an empty mask.
    """
    if width < 1 or height < 1:
        raise ValueError(f"frame must be at least 1x1, got {width}x{height}")
    ys = [v.y for v in p.vertices]
    row_lo = max(0, _first_center_at_or_after(min(ys)))
    row_hi = min(height, _first_center_at_or_after(max(ys)))
    segments = [
        (a.x, a.y, b.x, b.y) for a, b in _edges(p.vertices) if a.y != b.y
    ]
    runs: list[tuple[int, int]] = []
    for i in range(row_lo, row_hi):
        y = i + 0.5
        crossings = [
            x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            for x1, y1, x2, y2 in segments
            if (y1 > y) != (y2 > y)
        ]
        if not crossings:
            continue
        crossings.sort()
        base = i * width
        for k in range(0, len(crossings) - 1, 2):
            j_lo = max(0, _first_center_at_or_after(crossings[k]))
            j_hi = min(width, _first_center_at_or_after(crossings[k + 1]))
            if j_hi > j_lo:
                runs.append((base + j_lo, j_hi - j_lo))
    return RasterMask(width, height, tuple(runs))


def mask_iou(a: RasterMask, b: RasterMask) -> float:
    """Intersection over union on run-length structure; both-empty returns 0.0."""
    if a.width != b.width or a.height != b.height:
        raise ValueError(
            f"mask frames differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = 0
    ia = ib = 0
    while ia < len(a.runs) and ib < len(b.runs):
        sa, la = a.runs[ia]
        sb, lb = b.runs[ib]
        lo = max(sa, sb)
        hi = min(sa + la, sb + lb)
        if hi > lo:
            inter += hi - lo
        if sa + la <= sb + lb:
            ia += 1
        else:
            ib += 1
    union = a.pixel_count + b.pixel_count - inter
    if union == 0:
        return 0.0
    return inter / union


def apply_affine(p: Polygon, m: AffineMap) -> Polygon:
    """Map each vertex through ``m``, preserving vertex order."""
    return Polygon(tuple(Point2(*m.apply(v.x, v.y)) for v in p.vertices))


def _clip_half_plane(pts, inside, intersect):
    out = []
    if not pts:
        return out
    s = pts[-1]
    s_in = inside(s)
    for e in pts:
        e_in = inside(e)
        if e_in:
            if not s_in:
                out.append(intersect(s, e))
            out.append(e)
        elif s_in:
            out.append(intersect(s, e))
        s, s_in = e, e_in
    return out


def _prune_ring(pts: list[Point2]) -> list[Point2]:
    """Drop consecutive duplicates and redundant collinear vertices on axis-aligned runs."""
    changed = True
    while changed:
        changed = False
        deduped: list[Point2] = []
        for v in pts:
            if deduped and v.x == deduped[-1].x and v.y == deduped[-1].y:
                changed = True
                continue
            deduped.append(v)
        while len(deduped) > 1 and deduped[0].x == deduped[-1].x and deduped[0].y == deduped[-1].y:
            deduped.pop()
            changed = True
        pts = deduped
        if len(pts) < 3:
            return pts
        for k in range(len(pts)):
            a = pts[k - 1]
            v = pts[k]
            b = pts[(k + 1) % len(pts)]
            vertical = a.x == v.x == b.x and (a.y <= v.y <= b.y or b.y <= v.y <= a.y)
            horizontal = a.y == v.y == b.y and (a.x <= v.x <= b.x or b.x <= v.x <= a.x)
            if vertical or horizontal:
                del pts[k]
                changed = True
                break
    return pts


def clip_polygon_to_frame(p: Polygon, width: int, height: int) -> Polygon | None:
    """Sutherland-Hodgman clip against [0, width] x [0, height].

    Vertices created on a frame boundary carry the boundary coordinate exactly
    (0.0, width or height), so clipped polygons never escape the frame by a
    rounding ulp.  Returns None when nothing remains.
    """
    if width < 1 or height < 1:
        raise ValueError(f"frame must be at least 1x1, got {width}x{height}")
    w, h = float(width), float(height)

    def at_x(bound):
        def cut(s: Point2, e: Point2) -> Point2:
            t = (bound - s.x) / (e.x - s.x)
            return Point2(bound, s.y + t * (e.y - s.y))

        return cut

    def at_y(bound):
        def cut(s: Point2, e: Point2) -> Point2:
            t = (bound - s.y) / (e.y - s.y)
            return Point2(s.x + t * (e.x - s.x), bound)

        return cut

    passes = (
        (lambda v: v.x >= 0.0, at_x(0.0)),
        (lambda v: v.x <= w, at_x(w)),
        (lambda v: v.y >= 0.0, at_y(0.0)),
        (lambda v: v.y <= h, at_y(h)),
    )
    pts = list(p.vertices)
    for inside, intersect in passes:
        pts = _clip_half_plane(pts, inside, intersect)
        if not pts:
            return None
    pts = _prune_ring(pts)
    if len(pts) < 3:
        return None
    return Polygon(tuple(pts))
