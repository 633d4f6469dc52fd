"""8-bit RGB image files (PNG, binary PPM)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, image: np.ndarray) -> None:
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() in (".ppm", ".pnm") else "PNG"
    Image.fromarray(np.asarray(image, dtype=np.uint8), "RGB").save(path, format=fmt)
