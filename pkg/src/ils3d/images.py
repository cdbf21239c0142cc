"""Lossless image and key-file I/O."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .cipher import check_image, parse_key_hex

LOSSLESS = {"png": "PNG", "ppm": "PPM"}
_EXT_FORMAT = {".png": "png", ".ppm": "ppm", ".pnm": "ppm"}


class ImageFormatError(ValueError):
    pass


def output_format(path, fmt: str | None = None) -> str:
    """Resolve the write format; anything but PNG/PPM is refused."""
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in LOSSLESS:
            raise ImageFormatError(f"unsupported output format {fmt!r} (use png or ppm)")
        return fmt
    ext = Path(path).suffix.lower()
    if ext not in _EXT_FORMAT:
        raise ImageFormatError(f"refusing to write {ext or 'extension-less'} output; use .png or .ppm")
    return _EXT_FORMAT[ext]


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "F"):
            raise ImageFormatError(f"{path}: {im.mode} images are not 8-bit")
        if im.mode != "RGB":
            im = im.convert("RGB")
        return np.array(im, dtype=np.uint8)


def write_image(path, img, fmt: str | None = None) -> None:
    fmt = output_format(path, fmt)
    a = check_image(img)
    Image.fromarray(a).save(path, format=LOSSLESS[fmt])


def read_key_file(path) -> bytes:
    return parse_key_hex(Path(path).read_text())


def write_key_file(path, digest: bytes) -> None:
    Path(path).write_text(digest.hex().upper() + "\n")
    try:
        os.chmod(path, 0o600)
    except OSError:
        pass
