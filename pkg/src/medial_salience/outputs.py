"""Experiment artifacts: salience splits, composed channels, colormaps, stats."""

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ._validation import check_scalar, check_unit_interval
from .exceptions import ChannelError, ParameterError
from .ingest import BinaryContourImage
from .salience import MEASURES

CHANNEL_TOKENS = ("contours",) + MEASURES + ("zero",)
HIST_BINS = 32


# ---------------------------------------------------------------- splits

@dataclass(frozen=True, eq=False)
class SplitResult:
    top: BinaryContourImage
    bottom: BinaryContourImage
    measure: str = ""
    fraction: float = 0.5


def split_by_salience(contour_values, img, fraction=0.5, measure=""):
    """Top ``fraction`` of contour pixels by value, the rest at the bottom.

    Ties are broken in raster order, earlier pixels ranking higher.
    """
    check_scalar(fraction, "fraction", low=0.0, high=1.0)
    mask = img.mask
    values = np.asarray(contour_values, dtype=np.float64)
    if values.shape != mask.shape:
        raise ParameterError("salience map and image differ in shape")
    flat = np.flatnonzero(mask)
    top = np.zeros(mask.shape, dtype=bool)
    if flat.size:
        v = np.nan_to_num(values.ravel()[flat], nan=0.0)
        order = flat[np.lexsort((flat, -v))]
        k = int(np.floor(fraction * flat.size + 0.5))
        top.ravel()[order[:k]] = True
    return SplitResult(BinaryContourImage(top), BinaryContourImage(mask & ~top),
                       measure, float(fraction))


# ---------------------------------------------------------------- channels

@dataclass(frozen=True)
class ChannelSpec:
    channels: tuple

    def __post_init__(self):
        ch = self.channels
        if isinstance(ch, str):
            ch = [c.strip() for c in ch.replace("-", ",").split(",")]
        ch = tuple(ch)
        if len(ch) != 3:
            raise ChannelError(f"a channel spec has exactly 3 entries, got {len(ch)}")
        for c in ch:
            if c not in CHANNEL_TOKENS:
                raise ChannelError(f"unknown channel token {c!r}")
        object.__setattr__(self, "channels", ch)

    @property
    def measures(self):
        return tuple(m for m in MEASURES if m in self.channels)

    def name(self):
        return "-".join(self.channels)


def quantize(values, bit_depth=8):
    """Round-half-up quantization of ``[0, 1]`` values."""
    top = 255 if bit_depth == 8 else 65535
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    v = np.clip(np.nan_to_num(values, nan=0.0), 0.0, 1.0)
    return np.floor(v * top + 0.5).astype(dtype)


def compose_channels(spec, img, salience_maps, invert_polarity=False, bit_depth=8):
    """Stack three channels: the contour mask, measure maps or zeros.

    Contours are bright on black; ``invert_polarity`` flips every channel.
    """
    if not isinstance(spec, ChannelSpec):
        spec = ChannelSpec(spec)
    if bit_depth not in (8, 16):
        raise ParameterError("bit_depth must be 8 or 16")
    mask = img.mask
    planes = []
    for c in spec.channels:
        if c == "contours":
            v = mask.astype(np.float64)
        elif c == "zero":
            v = np.zeros(mask.shape)
        else:
            if c not in salience_maps:
                raise ChannelError(f"measure {c!r} was not computed")
            v = np.where(mask, np.nan_to_num(salience_maps[c], nan=0.0), 0.0)
        planes.append(quantize(v, bit_depth))
    out = np.stack(planes, axis=2)
    if invert_polarity:
        out = np.iinfo(out.dtype).max - out
    return out


# ---------------------------------------------------------------- colormaps

def _hot(v):
    return np.stack([np.clip(3 * v, 0, 1), np.clip(3 * v - 1, 0, 1), np.clip(3 * v - 2, 0, 1)],
                    axis=-1)


def colormap_lut(name):
    """256-entry RGB table of a colormap."""
    v = np.arange(256) / 255.0
    if name == "hot":
        rgb = _hot(v)
    elif name == "gray":
        rgb = np.stack([v, v, v], axis=-1)
    else:
        raise ParameterError(f"unknown colormap {name!r}")
    return quantize(rgb)


def render_colormap(contour_values, img, cmap="hot", legend=False):
    """Contour pixels colored by value, white background.

    With ``legend`` a 12-pixel gradient bar from 0 (left) to 1 (right) is
    appended below the image.
    """
    mask = img.mask
    vals = check_unit_interval(np.where(mask, contour_values, np.nan), "contour values")
    lut = colormap_lut(cmap)
    idx = quantize(vals)
    out = np.full(mask.shape + (3,), 255, dtype=np.uint8)
    out[mask] = lut[idx[mask]]
    if legend:
        w = mask.shape[1]
        bar = lut[quantize(np.linspace(0.0, 1.0, w))]
        gap = np.full((2, w, 3), 255, dtype=np.uint8)
        out = np.concatenate([out, gap, np.repeat(bar[None], 12, axis=0)], axis=0)
    return out


def salience_png_array(contour_values, img):
    """8-bit map: ``round(255 * value)`` on contour pixels, 0 elsewhere."""
    return np.where(img.mask, quantize(contour_values), 0).astype(np.uint8)


# ---------------------------------------------------------------- files

def _png_chunk(tag, data):
    body = tag + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def _write_png16(arr, path):
    # Pillow cannot write 16-bit RGB; the format is simple enough to emit here
    h, w = arr.shape[:2]
    planes = 1 if arr.ndim == 2 else arr.shape[2]
    color = {1: 0, 3: 2}[planes]
    raw = arr.astype(">u2").reshape(h, -1).tobytes()
    stride = w * planes * 2
    rows = b"".join(b"\x00" + raw[i * stride:(i + 1) * stride] for i in range(h))
    data = (b"\x89PNG\r\n\x1a\n"
            + _png_chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 16, color, 0, 0, 0))
            + _png_chunk(b"IDAT", zlib.compress(rows, 6))
            + _png_chunk(b"IEND", b""))
    with open(path, "wb") as fh:
        fh.write(data)


def save_png(arr, path):
    """Write a 2-D or RGB array as PNG; uint16 arrays keep 16 bits."""
    arr = np.asarray(arr)
    if arr.dtype == np.uint16:
        _write_png16(arr, path)
    else:
        Image.fromarray(arr.astype(np.uint8)).save(path, format="PNG")


# ---------------------------------------------------------------- stats

def _hist(values):
    h, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=HIST_BINS, range=(0.0, 1.0))
    return h.astype(int).tolist()


def export_stats(graph, salience_map, img=None, regions=None, timings=None, skeleton=None):
    """JSON-ready report of one processed image."""
    measures = salience_map.measures
    report = {"measures": list(measures), "histograms": {}, "means": {}, "branches": []}
    mask = img.mask if img is not None else None
    for m in measures:
        cv = salience_map.contour_values.get(m)
        vals = cv[mask] if (cv is not None and mask is not None) else np.zeros(0)
        report["histograms"][m] = _hist(vals)
        report["means"][m] = float(vals.mean()) if vals.size else 0.0
    for i, bs in enumerate(salience_map.branches):
        row = {"branch": i, "points": len(bs.branch)}
        for m in measures:
            v = bs.values[m]
            row[m] = {"mean": float(v.mean()), "min": float(v.min()), "max": float(v.max())} \
                if v.size else {"mean": 0.0, "min": 0.0, "max": 0.0}
        report["branches"].append(row)
    cov = salience_map.coverage or {}
    report["coverage"] = float(cov.get("coverage", 1.0))
    report["cast_fraction"] = float(cov.get("cast_fraction", 1.0))
    report["contour_pixels"] = int(mask.sum()) if mask is not None else 0
    report["skeleton_points"] = len(skeleton) if skeleton is not None else 0
    report["branch_count"] = len(graph.branches) if graph is not None else 0
    report["region_count"] = int(regions.region_count) if regions is not None else 0
    report["timings"] = {k: float(v) for k, v in (timings or {}).items()}
    return report


def aggregate_stats(records):
    """Batch report: records sorted by name plus per-measure means of means.

    ``records`` maps an image name to its :func:`export_stats` report.
    """
    names = sorted(records)
    measures = sorted({m for r in records.values() for m in r.get("measures", [])})
    agg = {"images": len(names), "means": {}}
    for m in measures:
        per = [records[n]["means"][m] for n in names if m in records[n].get("means", {})]
        agg["means"][m] = float(np.mean(per)) if per else 0.0
    agg["contour_pixels"] = int(sum(records[n].get("contour_pixels", 0) for n in names))
    return {"records": [{"name": n, **records[n]} for n in names], "aggregate": agg}


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
