"""Binary PGM (P5) images and little-endian PFM float maps."""

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import numpy.typing as npt

from src.core.errors import ImageFormatError
from src.models.image_models import GrayImage, NormalMap, ScalarMap, from_bytes

PathLike = Union[str, Path]


def _header_tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping # comments.

    Returns the tokens and the offset just past the single whitespace byte that
    terminates the last token.
    """
    tokens: List[bytes] = []
    position = 0
    while len(tokens) < count:
        while position < len(data) and data[position : position + 1].isspace():
            position += 1
        if position < len(data) and data[position : position + 1] == b"#":
            while position < len(data) and data[position : position + 1] not in (b"\n", b"\r"):
                position += 1
            continue
        start = position
        while position < len(data) and not data[position : position + 1].isspace():
            position += 1
        if start == position:
            raise ImageFormatError("truncated header")
        tokens.append(data[start:position])
    if position >= len(data):
        raise ImageFormatError("header is not followed by pixel data")
    return tokens, position + 1


def read_image(path: PathLike) -> GrayImage:
    """Read an 8-bit binary PGM."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    tokens, offset = _header_tokens(data, 4)
    magic, width_token, height_token, maxval_token = tokens
    if magic != b"P5":
        raise ImageFormatError(f"{path}: unsupported format {magic!r}, expected binary PGM (P5)")
    try:
        width, height, maxval = int(width_token), int(height_token), int(maxval_token)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed header values") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: only 8-bit PGM (maxval 255) is supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: invalid size {width}x{height}")
    payload = data[offset : offset + width * height]
    if len(payload) != width * height:
        raise ImageFormatError(f"{path}: truncated pixel data ({len(payload)} of {width * height} bytes)")
    return from_bytes(payload, width, height)


def write_image(image: GrayImage, path: PathLike) -> None:
    """Write an image as an 8-bit binary PGM, quantising to 1/255 steps."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    target.write_bytes(header + image.to_bytes())


def write_scalar_map(scalar_map: ScalarMap, path: PathLike) -> None:
    """Debug dump of a scalar map with a linear [0,1] -> [0,255] mapping."""
    write_image(scalar_map.as_image(), path)


def write_pfm(values: npt.NDArray[np.float64], path: PathLike) -> None:
    """Write an (h, w) or (h, w, 3) float array as little-endian PFM (bottom row first)."""
    array = np.asarray(values, dtype=np.float64)
    magic = "PF" if array.ndim == 3 else "Pf"
    height, width = array.shape[:2]
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    header = f"{magic}\n{width} {height}\n-1.0\n".encode("ascii")
    target.write_bytes(header + np.flipud(array).astype("<f4").tobytes())


def write_normal_map(normal_map: NormalMap, path: PathLike) -> None:
    write_pfm(normal_map.normals, path)
