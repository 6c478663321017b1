"""Regenerate the photo fixtures used by the integration and acceptance tests.

Sources are the sample photographs bundled with scikit-image and scikit-learn.
Each is cropped to a square region, resized to 512x512 and stored as RGB JPEG.
"""

import os
import sys

import skimage
import sklearn
from PIL import Image

SIZE = 512
SKI = os.path.join(os.path.dirname(skimage.__file__), "data")
SKL = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "images")

# (output name, source path, crop box as fractions (x0, y0, side) or None for centered)
SOURCES = [
    ("astronaut", f"{SKI}/astronaut.png", None),
    ("brick", f"{SKI}/brick.png", None),
    ("camera", f"{SKI}/camera.png", None),
    ("cell", f"{SKI}/cell.png", None),
    ("chelsea", f"{SKI}/chelsea.png", None),
    ("china", f"{SKL}/china.jpg", None),
    ("china_left", f"{SKL}/china.jpg", (0.0, 0.0, 1.0)),
    ("coffee", f"{SKI}/coffee.png", None),
    ("coins", f"{SKI}/coins.png", None),
    ("flower", f"{SKL}/flower.jpg", None),
    ("grass", f"{SKI}/grass.png", None),
    ("gravel", f"{SKI}/gravel.png", None),
    ("hubble", f"{SKI}/hubble_deep_field.jpg", None),
    ("ihc", f"{SKI}/ihc.png", None),
    ("moon", f"{SKI}/moon.png", None),
    ("motorcycle_left", f"{SKI}/motorcycle_left.png", None),
    ("motorcycle_right", f"{SKI}/motorcycle_right.png", (0.0, 0.0, 1.0)),
    ("retina", f"{SKI}/retina.jpg", None),
    ("retina_detail", f"{SKI}/retina.jpg", (0.25, 0.25, 0.5)),
    ("rocket", f"{SKI}/rocket.jpg", None),
]


def square_crop(img, box):
    w, h = img.size
    side = min(w, h)
    if box is None:
        x0, y0 = (w - side) // 2, (h - side) // 2
    else:
        fx, fy, fs = box
        side = int(side * fs)
        x0, y0 = int(fx * w), int(fy * h)
    return img.crop((x0, y0, x0 + side, y0 + side))


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for name, path, box in SOURCES:
        img = Image.open(path).convert("RGB")
        img = square_crop(img, box).resize((SIZE, SIZE), Image.LANCZOS)
        img.save(os.path.join(out_dir, f"{name}.jpg"), quality=95)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures/photos")
