"""File formats: PNG masks, PFM float maps, JSON boxes/heads, feature stacks.

PFM: ``Pf`` magic, ``width height`` dims, negative scale for little-endian,
rows stored bottom-to-top (the portable-float-map convention). A stack
variant adds the channel count as a third integer on the dims line and
stores one page per channel.

All writers go through a temp-file + rename so partially written outputs
never appear under the target name.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np
from PIL import Image

from .core import BinaryMask, BoundingBox, ImagePlane, ProbabilityMap
from .errors import InputError

__all__ = [
    "read_mask_png",
    "write_mask_png",
    "read_image",
    "read_pfm",
    "read_probability_map",
    "write_pfm",
    "read_feature_stack",
    "write_feature_stack",
    "read_boxes_json",
    "write_boxes_json",
    "read_head_json",
    "write_head_json",
    "atomic_write_bytes",
    "atomic_write_text",
]


def atomic_write_bytes(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------- PNG masks


def read_mask_png(path: str) -> BinaryMask:
    """Read an 8-bit mask PNG; any nonzero pixel reads as foreground."""
    img = Image.open(path)
    arr = np.asarray(img.convert("L"))
    return BinaryMask((arr != 0).astype(np.uint8))


def write_mask_png(mask: BinaryMask, path: str) -> None:
    arr = (mask.data * 255).astype(np.uint8)
    img = Image.fromarray(arr, mode="L")
    import io as _io

    buf = _io.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_image(path) -> ImagePlane:
    """Read a grayscale intensity image: PNG (scaled to [0,1]) or PFM."""
    path = os.fspath(path)
    if path.lower().endswith(".pfm"):
        return ImagePlane(read_pfm(path))
    img = Image.open(path)
    if img.mode in ("I", "I;16", "I;16B"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    else:
        arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    return ImagePlane(arr)


# ---------------------------------------------------------------- PFM


def _read_pfm_token(fh) -> bytes:
    tok = b""
    while True:
        c = fh.read(1)
        if not c:
            raise InputError("truncated PFM header")
        if c in b" \t\r\n":
            if tok:
                return tok
            continue
        tok += c


def _read_pfm_header(fh) -> tuple[int, int, int, str]:
    magic = _read_pfm_token(fh)
    if magic != b"Pf":
        raise InputError(f"not a grayscale PFM (magic {magic!r})")
    # dims line: "W H" or "W H C" for the stack variant
    line = b""
    while True:
        c = fh.read(1)
        if not c:
            raise InputError("truncated PFM header")
        if c == b"\n":
            break
        line += c
    parts = line.split()
    if len(parts) == 2:
        w, h, ch = int(parts[0]), int(parts[1]), 1
    elif len(parts) == 3:
        w, h, ch = int(parts[0]), int(parts[1]), int(parts[2])
    else:
        raise InputError(f"bad PFM dims line {line!r}")
    scale = float(_read_pfm_token(fh))
    if w < 1 or h < 1 or ch < 1:
        raise InputError(f"bad PFM dimensions {w}x{h}x{ch}")
    endian = "<" if scale < 0 else ">"
    return w, h, ch, endian


def _read_pfm_pages(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h, ch, endian = _read_pfm_header(fh)
        count = w * h * ch
        raw = fh.read(4 * count)
        if len(raw) != 4 * count:
            raise InputError(f"truncated PFM payload in {path}")
        data = np.frombuffer(raw, dtype=endian + "f4").astype(np.float64)
    pages = data.reshape(ch, h, w)
    return pages[:, ::-1, :]  # bottom-up rows -> top-down


def read_pfm(path: str) -> np.ndarray:
    """Read a single-channel PFM into a (h, w) float array."""
    pages = _read_pfm_pages(path)
    if pages.shape[0] != 1:
        raise InputError(f"{path} is a {pages.shape[0]}-channel stack, expected 1 channel")
    return pages[0]


def read_probability_map(path: str) -> ProbabilityMap:
    return ProbabilityMap(read_pfm(path))


def _pfm_bytes(pages: np.ndarray) -> bytes:
    ch, h, w = pages.shape
    dims = f"{w} {h}\n" if ch == 1 else f"{w} {h} {ch}\n"
    header = ("Pf\n" + dims + "-1.0\n").encode("ascii")
    payload = pages[:, ::-1, :].astype("<f4").tobytes()
    return header + payload


def write_pfm(data: np.ndarray | ProbabilityMap | ImagePlane, path: str) -> None:
    if isinstance(data, (ProbabilityMap, ImagePlane)):
        data = data.data
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"write_pfm expects a 2-D array, got shape {arr.shape}")
    atomic_write_bytes(path, _pfm_bytes(arr[None, :, :]))


def read_feature_stack(path: str) -> np.ndarray:
    """Read an (h, w, c) feature stack.

    ``path`` is either a directory of per-channel ``*.pfm`` files (channel
    order = sorted filenames) or a single stacked PFM with the channel count
    on the dims line.
    """
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.lower().endswith(".pfm"))
        if not names:
            raise InputError(f"no .pfm channel files in {path}")
        channels = [read_pfm(os.path.join(path, n)) for n in names]
        shapes = {c.shape for c in channels}
        if len(shapes) != 1:
            raise InputError(f"channel files in {path} disagree on dimensions: {sorted(shapes)}")
        return np.stack(channels, axis=-1)
    pages = _read_pfm_pages(path)
    return np.moveaxis(pages, 0, -1)


def write_feature_stack(features: np.ndarray, path) -> None:
    """Write an (h, w, c) stack: to per-channel files if path is a directory,
    else to a single stacked PFM."""
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 3:
        raise InputError(f"feature stack must be (h, w, c), got shape {arr.shape}")
    path = os.fspath(path)
    if os.path.isdir(path) or not path.lower().endswith(".pfm"):
        os.makedirs(path, exist_ok=True)
        for c in range(arr.shape[2]):
            write_pfm(arr[:, :, c], os.path.join(path, f"c{c:04d}.pfm"))
        return
    atomic_write_bytes(path, _pfm_bytes(np.moveaxis(arr, -1, 0)))


# ---------------------------------------------------------------- JSON


def read_boxes_json(path: str) -> list[BoundingBox]:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, list):
        raise InputError(f"{path}: expected a JSON array of boxes")
    boxes = []
    for i, item in enumerate(raw):
        try:
            boxes.append(BoundingBox(x=int(item["x"]), y=int(item["y"]), w=int(item["w"]), h=int(item["h"])))
        except (KeyError, TypeError) as exc:
            raise InputError(f"{path}: box #{i} is missing x/y/w/h fields") from exc
    return boxes


def write_boxes_json(boxes: list[BoundingBox], path: str) -> None:
    atomic_write_text(path, json.dumps([b.as_dict() for b in boxes], indent=2) + "\n")


def read_head_json(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read dense-head weights: {"weights": C x K nested lists, "bias": K list}."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    try:
        weights = np.asarray(raw["weights"], dtype=np.float64)
        bias = np.asarray(raw["bias"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected weights (CxK) and bias (K) fields") from exc
    if weights.ndim != 2 or bias.ndim != 1 or weights.shape[1] != bias.shape[0]:
        raise InputError(
            f"{path}: weights shape {weights.shape} inconsistent with bias shape {bias.shape}"
        )
    return weights, bias


def write_head_json(weights: np.ndarray, bias: np.ndarray, path: str) -> None:
    atomic_write_text(
        path, json.dumps({"weights": np.asarray(weights).tolist(), "bias": np.asarray(bias).tolist()}) + "\n"
    )
