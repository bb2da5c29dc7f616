"""Developing visual acuity and foveation.

Acuity is modeled as a linear-ramp contrast sensitivity gain applied in
the 2-D Fourier domain; foveation as an invertible exponential radial
warp that magnifies the image center and compresses the periphery.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major raster in [0,1] with field-of-view metadata."""

    width: int
    height: int
    channels: int
    data: np.ndarray  # shape (height, width, channels), float64
    fov_deg: float

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise InvalidInputError("image must be at least 2x2")
        if self.channels not in (1, 3):
            raise InvalidInputError("channels must be 1 or 3")
        if not (0.0 < self.fov_deg < 180.0):
            raise InvalidInputError("fov_deg must be in (0, 180)")
        if self.data.shape != (self.height, self.width, self.channels):
            raise InvalidInputError("data shape does not match width/height/channels")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("image data must be finite")

    @classmethod
    def from_array(cls, arr: np.ndarray, fov_deg: float = 60.0) -> "ImageBuffer":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, ch = arr.shape
        return cls(width=w, height=h, channels=ch, data=arr, fov_deg=float(fov_deg))


@dataclass(frozen=True)
class AcuityTable:
    """Visual acuity (cycles per degree) at increasing ages in months."""

    ages: tuple[float, ...]
    acuities: tuple[float, ...]

    def __post_init__(self):
        if len(self.ages) == 0:
            raise InvalidInputError("acuity table is empty")
        if len(self.ages) != len(self.acuities):
            raise InvalidInputError("ages and acuities length mismatch")
        a = np.asarray(self.ages, dtype=float)
        v = np.asarray(self.acuities, dtype=float)
        if np.any(np.diff(a) <= 0):
            raise InvalidInputError("acuity table ages must be strictly increasing")
        if np.any(v <= 0) or np.any(np.diff(v) < 0):
            raise InvalidInputError("acuities must be positive and nondecreasing")


@dataclass(frozen=True)
class FoveationParams:
    """Radial warp strength (0 = identity) and optional output raster size."""

    warp_strength: float = 3.0
    out_width: int | None = None
    out_height: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.warp_strength) or self.warp_strength < 0:
            raise InvalidInputError("warp_strength must be finite and >= 0")


def load_acuity_csv(path) -> AcuityTable:
    """Read an acuity table CSV with header `age_months,acuity_cpd`."""
    ages, acs = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:2] != ["age_months", "acuity_cpd"]:
            raise InvalidInputError(f"{path}: expected header age_months,acuity_cpd")
        for row in reader:
            ages.append(float(row["age_months"]))
            acs.append(float(row["acuity_cpd"]))
    return AcuityTable(tuple(ages), tuple(acs))


def acuity_for_age(table: AcuityTable, age: float) -> float:
    """Piecewise-linear interpolation, clamped at both ends."""
    return float(np.interp(age, table.ages, table.acuities))


def csf_gain(f, acuity: float):
    """Linear-ramp contrast sensitivity: 1 - f/acuity below cutoff, 0 above."""
    if acuity <= 0:
        raise InvalidInputError("acuity must be positive")
    f = np.asarray(f, dtype=float)
    gain = np.where(f < acuity, 1.0 - f / acuity, 0.0)
    return float(gain) if gain.ndim == 0 else gain


def _csf_gain_grid(width: int, height: int, fov_deg: float, acuity: float) -> np.ndarray:
    # signed integer frequency indices (cycles per image) over each axis
    kx = np.fft.fftfreq(width) * width
    ky = np.fft.fftfreq(height) * height
    fov_y = fov_deg * height / width
    fx = kx / fov_deg
    fy = ky / fov_y
    f = np.sqrt(fx[None, :] ** 2 + fy[:, None] ** 2)
    return csf_gain(f, acuity)


def apply_csf_filter(img: ImageBuffer, acuity: float, clamp: bool = True) -> ImageBuffer:
    """Low-pass filter each channel in the frequency domain.

    Each FFT coefficient is scaled by the sensitivity gain at its radial
    frequency in cycles per degree; the vertical field of view follows the
    aspect ratio. The result is real up to roundoff; with clamp=True it is
    clipped back to [0,1] (Gibbs overshoot otherwise leaves range).
    """
    gain = _csf_gain_grid(img.width, img.height, img.fov_deg, acuity)
    out = np.empty_like(img.data)
    for ch in range(img.channels):
        spec = np.fft.fft2(img.data[:, :, ch])
        out[:, :, ch] = np.fft.ifft2(spec * gain).real
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return ImageBuffer(img.width, img.height, img.channels, out, img.fov_deg)


def radial_warp(r, max_radius: float, warp_strength: float):
    """Source radius sampled for an output radius r.

    g(r) = R*(exp(a*r/R) - 1)/(exp(a) - 1) with fixed points g(0)=0 and
    g(R)=R; strictly increasing, convex for a>0, identity in the a->0 limit.
    """
    r = np.asarray(r, dtype=float)
    a = warp_strength
    if a == 0.0:
        g = r.copy()
    else:
        g = max_radius * np.expm1(a * r / max_radius) / math.expm1(a)
    return float(g) if g.ndim == 0 else g


def _bilinear(plane: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = x - x0
    wy = y - y0
    top = plane[y0, x0] * (1 - wx) + plane[y0, x1] * wx
    bot = plane[y1, x0] * (1 - wx) + plane[y1, x1] * wx
    return top * (1 - wy) + bot * wy


def foveate(img: ImageBuffer, params: FoveationParams) -> ImageBuffer:
    """Magnify the center by resampling along warped radii about the image
    center; angles are preserved and radii are normalized so that the
    center and the outer corner radius are fixed points."""
    ow = params.out_width or img.width
    oh = params.out_height or img.height
    ocx, ocy = (ow - 1) / 2.0, (oh - 1) / 2.0
    scx, scy = (img.width - 1) / 2.0, (img.height - 1) / 2.0
    r_out_max = math.hypot(ocx, ocy)
    r_src_max = math.hypot(scx, scy)

    yy, xx = np.meshgrid(np.arange(oh, dtype=float), np.arange(ow, dtype=float),
                         indexing="ij")
    dx = xx - ocx
    dy = yy - ocy
    r = np.hypot(dx, dy)
    u = radial_warp(r / r_out_max, 1.0, params.warp_strength)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0, u * r_src_max / np.where(r > 0, r, 1.0), 0.0)
    sx = scx + dx * scale
    sy = scy + dy * scale

    out = np.empty((oh, ow, img.channels))
    for ch in range(img.channels):
        out[:, :, ch] = _bilinear(img.data[:, :, ch], sx, sy)
    return ImageBuffer(ow, oh, img.channels, out, img.fov_deg)


# ---------------------------------------------------------------------------
# portable raster I/O (binary PPM / PGM)


def read_pnm(path) -> ImageBuffer:
    """Read a binary P6 (color) or P5 (gray) image, scaled to [0,1]."""
    with open(path, "rb") as fh:
        data = fh.read()

    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        if data[i : i + 1].isspace():
            i += 1
        elif data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] not in (b"P5", b"P6"):
        raise InvalidInputError(f"{path}: not a binary PGM/PPM file")
    magic = tokens[0]
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval <= 0 or maxval > 255:
        raise InvalidInputError(f"{path}: unsupported maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    i += 1  # single whitespace after maxval
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height * channels, offset=i)
    arr = raw.reshape(height, width, channels).astype(float) / maxval
    return ImageBuffer(width, height, channels, arr, fov_deg=60.0)


def write_pnm(path, img: ImageBuffer) -> None:
    """Write P6 for 3 channels, P5 for 1, 8-bit."""
    magic = b"P6" if img.channels == 3 else b"P5"
    raw = np.round(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (img.width, img.height))
        fh.write(raw.tobytes())
