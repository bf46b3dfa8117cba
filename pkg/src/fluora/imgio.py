"""Image loading and saving helpers.

All in-memory images in this package are numpy uint8 arrays in RGB order,
shaped (H, W, 3).
"""

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError


def load_image(src):
    """Decode a PNG/JPEG from a path, bytes, or file object into RGB uint8.

    Raises DecodeError when the input cannot be decoded.
    """
    try:
        if isinstance(src, (bytes, bytearray)):
            src = io.BytesIO(src)
        with Image.open(src) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc


def save_image(image, path):
    """Write an RGB uint8 array as PNG or JPEG (by extension)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(path)
    return path


def encode_png(image):
    """RGB uint8 array -> PNG bytes."""
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
