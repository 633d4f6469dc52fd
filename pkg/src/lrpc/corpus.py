"""A small natural-image test corpus at the Kodak resolution (768x512).

The photographs ship with scikit-image and scikit-learn, so no download is
needed. Each is centre-cropped to 3:2 and resampled to 768x512.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 768, 512

SKIMAGE_NAMES = ("astronaut", "chelsea", "coffee", "rocket", "hubble_deep_field",
                 "immunohistochemistry", "retina")


def _crop_3_2(image: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    if w * 2 >= h * 3:
        cw = h * 3 // 2
        x0 = (w - cw) // 2
        return image[:, x0:x0 + cw]
    ch = w * 2 // 3
    y0 = (h - ch) // 2
    return image[y0:y0 + ch]


def _resize(image: np.ndarray) -> np.ndarray:
    from skimage.transform import resize

    out = resize(_crop_3_2(image), (HEIGHT, WIDTH), order=3, anti_aliasing=True,
                 preserve_range=True)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def load_corpus() -> dict[str, np.ndarray]:
    """``name -> (512, 768, 3)`` uint8 images, in a fixed order."""
    import skimage.data
    from sklearn.datasets import load_sample_images

    images = {}
    for name in SKIMAGE_NAMES:
        images[name] = _resize(getattr(skimage.data, name)()[..., :3])
    samples = load_sample_images()
    for filename, image in zip(samples.filenames, samples.images):
        images[Path(filename).stem] = _resize(image)
    return images


def write_corpus(directory) -> list[Path]:
    from .imageio import write_image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, image in load_corpus().items():
        path = directory / f"{name}.png"
        write_image(path, image)
        paths.append(path)
    return paths
