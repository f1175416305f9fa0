"""Image files <-> unit-interval ``[1,c,h,w]`` float32 arrays."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

SUPPORTED = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"}


class ImageFormatError(ValueError):
    pass


def load_image(path, channels: int | None = None) -> np.ndarray:
    """Read an 8/16-bit image, scale to [0, 1] and return ``[1,c,h,w]`` float32.

    ``channels=1`` converts colour input to BT.601 luma; ``channels=3``
    replicates a gray image into three channels.
    """
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED:
        raise ImageFormatError(f"unsupported image format: {path.suffix}")
    with Image.open(path) as im:
        im.load()
        mode = im.mode
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif mode in ("L", "RGB"):
            arr = np.asarray(im, dtype=np.float64) / 255.0
        elif mode in ("RGBA", "P", "LA", "CMYK", "YCbCr", "1"):
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        elif mode == "F":
            arr = np.asarray(im, dtype=np.float64)
        else:
            raise ImageFormatError(f"unsupported pixel mode {mode} in {path}")
    arr = np.clip(arr, 0.0, 1.0)
    arr = arr[None] if arr.ndim == 2 else np.moveaxis(arr, -1, 0)
    if channels == 1 and arr.shape[0] == 3:
        arr = (0.299 * arr[0] + 0.587 * arr[1] + 0.114 * arr[2])[None]
    elif channels == 3 and arr.shape[0] == 1:
        arr = np.repeat(arr, 3, axis=0)
    elif channels is not None and arr.shape[0] != channels:
        raise ImageFormatError(f"{path}: cannot convert {arr.shape[0]} channels to {channels}")
    return arr[None].astype(np.float32)


def quantize(x: np.ndarray, bits: int = 8) -> np.ndarray:
    """Round half up to the integer grid of the given bit depth."""
    top = (1 << bits) - 1
    q = np.floor(np.clip(np.asarray(x, dtype=np.float64), 0, 1) * top + 0.5)
    return q.astype(np.uint8 if bits == 8 else np.uint16)


def save_image(path, img: np.ndarray, bits: int = 8):
    """Write ``[1,c,h,w]``/``[c,h,w]``/``[h,w]`` data in [0,1] as PNG (or JPEG, 8-bit only)."""
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED:
        raise ImageFormatError(f"unsupported image format: {path.suffix}")
    if bits not in (8, 16):
        raise ImageFormatError("bits must be 8 or 16")
    a = np.asarray(img)
    if a.ndim == 4:
        a = a[0]
    if a.ndim == 3:
        a = a[0] if a.shape[0] == 1 else np.moveaxis(a, 0, -1)
    q = quantize(a, bits)
    if bits == 16 and (q.ndim != 2 or path.suffix.lower() != ".png"):
        raise ImageFormatError("16-bit output is supported for gray PNG only")
    Image.fromarray(q).save(path)
