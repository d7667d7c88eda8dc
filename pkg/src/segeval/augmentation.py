"""Seeded augmentation of image samples with polygon-consistent transforms.

Pixels travel as :class:`RasterImage` (row-major 8-bit samples, grayscale or
RGB) and ground truth rides along as polygon annotations, so every geometric
transform is applied once to both representations with the same parameters.

Conventions shared with the geometry module:

- pixel centers sit at (j + 0.5, i + 0.5); rotation turns about the frame
  center (width/2, height/2)
- resampling is bilinear everywhere; resize clamps to the nearest edge
  sample, rotation fills from black outside the source frame
- quantizing back to 8 bits rounds half up: floor(x + 0.5)

Transform order inside :func:`augment` is fixed (resize, horizontal flip,
vertical flip, rotation, brightness/contrast) and all six random draws are
consumed unconditionally, so the stream position never depends on which
branches fired and equal seeds give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import GroundTruthAnnotation
from .geometry import (
    AffineMap,
    Point2,
    Polygon,
    apply_affine,
    clip_polygon_to_frame,
    polygon_area,
)

__all__ = [
    "AugmentConfig",
    "Augmenter",
    "RasterImage",
    "Sample",
    "augment",
    "brightness_contrast",
    "flip",
    "read_image",
    "resize_shortest_edge",
    "rotate",
    "write_image",
]

# vertex slack tolerated on input, matching the dataset validator; transforms
# themselves always emit polygons clipped to the exact frame
_OVERHANG = 1.0


@dataclass(frozen=True)
class RasterImage:
    """Row-major 8-bit raster, one or three channels, interleaved."""

    width: int
    height: int
    channels: int
    samples: bytes

    def __post_init__(self) -> None:
        for label, value in (("width", self.width), ("height", self.height)):
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{label} must be a positive integer, got {value!r}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels!r}")
        if not isinstance(self.samples, bytes):
            object.__setattr__(self, "samples", bytes(self.samples))
        expected = self.width * self.height * self.channels
        if len(self.samples) != expected:
            raise ValueError(
                f"sample buffer holds {len(self.samples)} bytes, "
                f"expected {expected} for {self.width}x{self.height}x{self.channels}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        """Build from a (H, W) or (H, W, 1|3) integer array with values in [0, 255]."""
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected a (H, W) or (H, W, 1|3) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("sample values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        h, w, ch = arr.shape
        return cls(int(w), int(h), int(ch), np.ascontiguousarray(arr).tobytes())

    def to_array(self) -> np.ndarray:
        """(H, W) uint8 for grayscale, (H, W, 3) for RGB."""
        arr = np.frombuffer(self.samples, dtype=np.uint8)
        if self.channels == 1:
            return arr.reshape(self.height, self.width).copy()
        return arr.reshape(self.height, self.width, self.channels).copy()


@dataclass(frozen=True)
class Sample:
    """One image with the ground truth drawn on it."""

    image: RasterImage
    truths: tuple[GroundTruthAnnotation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "truths", tuple(self.truths))
        refs = {t.image_ref for t in self.truths}
        if len(refs) > 1:
            raise ValueError(f"truths reference multiple images: {sorted(refs)}")
        for t in self.truths:
            for v in t.polygon.vertices:
                if not (-_OVERHANG <= v.x <= self.image.width + _OVERHANG):
                    raise ValueError(
                        f"truth {t.stable_id}: vertex x={v.x} outside frame of width {self.image.width}"
                    )
                if not (-_OVERHANG <= v.y <= self.image.height + _OVERHANG):
                    raise ValueError(
                        f"truth {t.stable_id}: vertex y={v.y} outside frame of height {self.image.height}"
                    )


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs for the augmentation pipeline.

    Horizontal flipping stays off by default: the ropes are photographed
    side-on, so mirroring left-right adds nothing to this data. It remains
    configurable for other capture setups.
    """

    resize_target: int = 800
    hflip_p: float = 0.0
    vflip_p: float = 0.5
    rotation_limit: float = 15.0
    photometric_p: float = 0.5
    photometric_limit: float = 0.2

    def __post_init__(self) -> None:
        if not isinstance(self.resize_target, int) or isinstance(self.resize_target, bool) or self.resize_target < 1:
            raise ValueError(f"resize_target must be a positive integer, got {self.resize_target!r}")
        for label in ("hflip_p", "vflip_p", "photometric_p"):
            p = getattr(self, label)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{label} must lie in [0, 1], got {p}")
        if self.rotation_limit < 0:
            raise ValueError(f"rotation_limit must be >= 0, got {self.rotation_limit}")
        if not 0.0 <= self.photometric_limit <= 1.0:
            raise ValueError(f"photometric_limit must lie in [0, 1], got {self.photometric_limit}")


def _volume(img: RasterImage) -> np.ndarray:
    """(H, W, C) float64 view of the samples, channels kept explicit."""
    arr = np.frombuffer(img.samples, dtype=np.uint8).reshape(img.height, img.width, img.channels)
    return arr.astype(np.float64)


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)


def _from_volume(vol: np.ndarray) -> RasterImage:
    h, w, ch = vol.shape
    return RasterImage(int(w), int(h), int(ch), np.ascontiguousarray(vol).tobytes())


def _axis_positions(n_out: int, n_in: int) -> np.ndarray:
    # center of output cell k maps to (k + 0.5) * in/out - 0.5 in source
    # array coordinates; clamped so edge cells replicate the border sample
    scale = n_in / n_out
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    return np.clip(coords, 0.0, float(n_in - 1))


def _resample_axis(vol: np.ndarray, coords: np.ndarray, axis: int) -> np.ndarray:
    n_in = vol.shape[axis]
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = coords - lo
    shape = [1, 1, 1]
    shape[axis] = len(coords)
    frac = frac.reshape(shape)
    return np.take(vol, lo, axis=axis) * (1.0 - frac) + np.take(vol, hi, axis=axis) * frac


def resize_shortest_edge(s: Sample, target: int) -> Sample:
    """Uniformly scale so the shorter side equals ``target``.

    Output dimensions round half up; polygons are scaled by the exact
    per-axis ratio of rounded output over input, then clipped to the new
    frame. A target equal to the current shortest edge is a bit-exact no-op.
    """
    if not isinstance(target, int) or isinstance(target, bool) or target < 1:
        raise ValueError(f"resize target must be a positive integer, got {target!r}")
    img = s.image
    f = target / min(img.width, img.height)
    out_w = math.floor(img.width * f + 0.5)
    out_h = math.floor(img.height * f + 0.5)

    vol = _volume(img)
    vol = _resample_axis(vol, _axis_positions(out_h, img.height), axis=0)
    vol = _resample_axis(vol, _axis_positions(out_w, img.width), axis=1)
    resized = _from_volume(_quantize(vol))

    sx = out_w / img.width
    sy = out_h / img.height
    kept = []
    for t in s.truths:
        try:
            scaled = Polygon(tuple(Point2(v.x * sx, v.y * sy) for v in t.polygon.vertices))
        except ValueError:
            continue  # vertices collapsed under extreme downscale
        clipped = clip_polygon_to_frame(scaled, out_w, out_h)
        if clipped is None:
            continue
        kept.append(replace(t, polygon=clipped))
    return Sample(resized, tuple(kept))


def flip(s: Sample, axis: str) -> Sample:
    """Mirror the sample; ``axis`` is ``"horizontal"`` or ``"vertical"``.

    Vertices map to (W - x, y) or (x, H - y). Applying the same flip twice
    returns the sample bit-exactly whenever coordinates and frame share a
    dyadic grid, which integer annotation vertices always do.
    """
    img = s.image
    raw = np.frombuffer(img.samples, dtype=np.uint8).reshape(img.height, img.width, img.channels)
    if axis == "horizontal":
        raw = raw[:, ::-1, :]

        def move(v: Point2) -> Point2:
            return Point2(img.width - v.x, v.y)

    elif axis == "vertical":
        raw = raw[::-1, :, :]

        def move(v: Point2) -> Point2:
            return Point2(v.x, img.height - v.y)

    else:
        raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    flipped = RasterImage(img.width, img.height, img.channels,
                          np.ascontiguousarray(raw).tobytes())
    truths = tuple(
        replace(t, polygon=Polygon(tuple(move(v) for v in t.polygon.vertices)))
        for t in s.truths
    )
    return Sample(flipped, truths)


def rotate(s: Sample, theta: float) -> Sample:
    """Rotate about the frame center; canvas size is unchanged.

    Pixels are pulled through the inverse map with bilinear taps, black
    outside the source. Polygons take the forward map, are clipped to the
    frame, and are dropped when the clipped area falls below 1 px^2.
    theta = 0 reproduces the sample bit-exactly because every destination
    center then samples an exact integer source center.
    """
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta!r}")
    img = s.image
    w, h = img.width, img.height
    cx, cy = w / 2.0, h / 2.0
    rad = math.radians(theta)
    cos, sin = math.cos(rad), math.sin(rad)

    xs = np.arange(w, dtype=np.float64) + 0.5
    ys = np.arange(h, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    # inverse rotation carries each destination center back into the source
    src_x = cx + cos * (gx - cx) + sin * (gy - cy)
    src_y = cy - sin * (gx - cx) + cos * (gy - cy)
    u = src_x - 0.5
    v = src_y - 0.5
    j0 = np.floor(u).astype(np.int64)
    i0 = np.floor(v).astype(np.int64)
    fu = u - j0
    fv = v - i0

    vol = _volume(img)
    padded = np.zeros((h + 2, w + 2, img.channels), dtype=np.float64)
    padded[1:-1, 1:-1, :] = vol
    # clamping shifted indices into the padded frame lands every
    # out-of-source tap on the zero ring, i.e. black fill
    j0p = np.clip(j0 + 1, 0, w + 1)
    j1p = np.clip(j0 + 2, 0, w + 1)
    i0p = np.clip(i0 + 1, 0, h + 1)
    i1p = np.clip(i0 + 2, 0, h + 1)
    fu = fu[:, :, np.newaxis]
    fv = fv[:, :, np.newaxis]
    out = (
        padded[i0p, j0p] * (1.0 - fv) * (1.0 - fu)
        + padded[i0p, j1p] * (1.0 - fv) * fu
        + padded[i1p, j0p] * fv * (1.0 - fu)
        + padded[i1p, j1p] * fv * fu
    )
    rotated = _from_volume(_quantize(out))

    fwd = AffineMap.rotation_deg(theta, cx, cy)
    kept = []
    for t in s.truths:
        moved = apply_affine(t.polygon, fwd)
        clipped = clip_polygon_to_frame(moved, w, h)
        if clipped is None or polygon_area(clipped) < 1.0:
            continue
        kept.append(replace(t, polygon=clipped))
    return Sample(rotated, tuple(kept))


def brightness_contrast(img: RasterImage, alpha: float, beta: float) -> RasterImage:
    """Per-sample affine adjustment v -> clamp(round(v*(1+alpha) + beta*255)).

    Purely photometric; callers keep their annotations untouched.
    """
    vol = _volume(img)
    return _from_volume(_quantize(vol * (1.0 + alpha) + beta * 255.0))


def augment(s: Sample, cfg: AugmentConfig, rng: np.random.Generator) -> Sample:
    """Run the full pipeline with parameters drawn from ``rng``.

    Order: resize to the shortest-edge target, horizontal flip (Bernoulli
    hflip_p), vertical flip (Bernoulli vflip_p), rotation by a uniform angle
    in [-rotation_limit, +rotation_limit], then brightness/contrast
    (Bernoulli photometric_p with alpha and beta uniform within the limit).
    """
    # all six draws happen up front, whether or not their branch fires
    u_hflip = float(rng.uniform())
    u_vflip = float(rng.uniform())
    theta = float(rng.uniform(-cfg.rotation_limit, cfg.rotation_limit))
    u_photo = float(rng.uniform())
    alpha = float(rng.uniform(-cfg.photometric_limit, cfg.photometric_limit))
    beta = float(rng.uniform(-cfg.photometric_limit, cfg.photometric_limit))

    out = resize_shortest_edge(s, cfg.resize_target)
    if u_hflip < cfg.hflip_p:
        out = flip(out, "horizontal")
    if u_vflip < cfg.vflip_p:
        out = flip(out, "vertical")
    out = rotate(out, theta)
    if u_photo < cfg.photometric_p:
        out = Sample(brightness_contrast(out.image, alpha, beta), out.truths)
    return out


class Augmenter:
    """Transformer-style front end over :func:`augment`.

    ``fit`` is a no-op (the pipeline learns nothing); ``transform`` maps a
    sequence of samples, deriving one stream per position from
    (seed, index) so results do not depend on traversal or thread order.
    """

    def __init__(self, config: AugmentConfig | None = None, seed: int = 0):
        self.config = config if config is not None else AugmentConfig()
        self.seed = seed

    def fit(self, samples=None):
        return self

    def transform(self, samples) -> list[Sample]:
        from .rng import sample_rng

        return [augment(s, self.config, sample_rng(self.seed, i)) for i, s in enumerate(samples)]

    def fit_transform(self, samples) -> list[Sample]:
        return self.fit(samples).transform(samples)

    def get_params(self) -> dict:
        return {"config": self.config, "seed": self.seed}

    def set_params(self, **params) -> "Augmenter":
        for key, value in params.items():
            if key not in ("config", "seed"):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self


def _read_pnm(data: bytes, path: Path) -> RasterImage:
    if data[:2] == b"P5":
        channels = 1
    elif data[:2] == b"P6":
        channels = 3
    else:
        raise ValueError(f"{path}: not a binary PGM/PPM file")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated header")
        c = data[pos]
        if c in b" \t\r\n":
            pos += 1
        elif c == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
        elif c in b"0123456789":
            start = pos
            while pos < len(data) and data[pos] in b"0123456789":
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise ValueError(f"{path}: unexpected byte {data[pos:pos + 1]!r} in header")
    if pos >= len(data) or data[pos] not in b" \t\r\n":
        raise ValueError(f"{path}: missing whitespace after maxval")
    pos += 1  # exactly one separator byte, then the raster
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    raster = data[pos:pos + width * height * channels]
    if len(raster) != width * height * channels:
        raise ValueError(f"{path}: raster truncated")
    return RasterImage(width, height, channels, raster)


def read_image(path) -> RasterImage:
    """Load PNG, PGM, or PPM (sniffed by magic bytes) as 8-bit gray or RGB."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P5", b"P6"):
        return _read_pnm(data, path)
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im)
        elif im.mode == "RGB":
            arr = np.asarray(im)
        else:
            # palette, alpha, and high-depth inputs are normalized to RGB
            arr = np.asarray(im.convert("RGB"))
    return RasterImage.from_array(arr)


def write_image(path, img: RasterImage) -> None:
    """Write by extension: .png, or .pgm (grayscale) / .ppm (RGB)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        Image.fromarray(img.to_array()).save(path, format="PNG")
    elif suffix == ".pgm":
        if img.channels != 1:
            raise ValueError(f"{path}: PGM holds grayscale only; use .ppm for RGB")
        path.write_bytes(b"P5\n%d %d\n255\n" % (img.width, img.height) + img.samples)
    elif suffix == ".ppm":
        if img.channels != 3:
            raise ValueError(f"{path}: PPM holds RGB only; use .pgm for grayscale")
        path.write_bytes(b"P6\n%d %d\n255\n" % (img.width, img.height) + img.samples)
    else:
        raise ValueError(f"{path}: unsupported image format {suffix!r}")
