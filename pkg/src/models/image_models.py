"""Image and geometry value types shared across the toolkit."""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from src.core.errors import ContractError, DegenerateNormalError, DimensionError

FloatArray = npt.NDArray[np.float64]

MAX_SIDE = 2**16
UNIT_TOLERANCE = 1e-6
# Vectors whose norm is already this close to 1 are left untouched, which
# keeps normalize_normals idempotent bit for bit.
_RENORMALIZE_SLACK = 1e-14


def _frozen_array(values: npt.ArrayLike, ndim: int, name: str) -> FloatArray:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.ndim != ndim:
        raise DimensionError(f"{name} must have {ndim} dimensions, got shape {array.shape}")
    if array.shape[0] == 0 or array.shape[1] == 0:
        raise DimensionError(f"{name} must not be empty, got shape {array.shape}")
    if array.shape[0] > MAX_SIDE or array.shape[1] > MAX_SIDE:
        raise DimensionError(f"{name} side exceeds {MAX_SIDE}: {array.shape}")
    array.setflags(write=False)
    return array


class PresentationLabel(Enum):
    BONA_FIDE = "bonafide"
    ATTACK = "attack"

    @property
    def sign(self) -> int:
        """Classifier target: +1 for bona fide, -1 for attacks."""
        return 1 if self is PresentationLabel.BONA_FIDE else -1


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel image with linear intensities in [0, 1], shape (height, width)."""

    pixels: FloatArray

    def __post_init__(self) -> None:
        pixels = _frozen_array(self.pixels, 2, "GrayImage")
        if not np.all(np.isfinite(pixels)):
            raise ContractError("GrayImage intensities must be finite")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ContractError(
                f"GrayImage intensities must lie in [0,1], got [{pixels.min()}, {pixels.max()}]"
            )
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def to_bytes(self) -> bytes:
        """Quantize to 8 bits, row-major."""
        return np.rint(self.pixels * 255.0).astype(np.uint8).tobytes()


@dataclass(frozen=True, eq=False)
class NormalMap:
    """Per-pixel unit surface normals in the camera-facing hemisphere, shape (h, w, 3)."""

    normals: FloatArray

    def __post_init__(self) -> None:
        normals = _frozen_array(self.normals, 3, "NormalMap")
        if normals.shape[2] != 3:
            raise DimensionError(f"NormalMap needs 3 components per pixel, got {normals.shape}")
        if not np.all(np.isfinite(normals)):
            raise ContractError("NormalMap components must be finite")
        lengths = np.linalg.norm(normals, axis=2)
        if np.any(np.abs(lengths - 1.0) > UNIT_TOLERANCE):
            raise ContractError("NormalMap vectors must have unit length")
        if np.any(normals[..., 2] < 0.0):
            raise ContractError("NormalMap z components must be non-negative")
        object.__setattr__(self, "normals", normals)

    @property
    def width(self) -> int:
        return int(self.normals.shape[1])

    @property
    def height(self) -> int:
        return int(self.normals.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def flat(cls, height: int, width: int) -> "NormalMap":
        normals = np.zeros((height, width, 3))
        normals[..., 2] = 1.0
        return cls(normals)

    def channels(self) -> Tuple[GrayImage, GrayImage, GrayImage]:
        """Map each component v to the gray value (v + 1) / 2."""
        mapped = np.clip((self.normals + 1.0) / 2.0, 0.0, 1.0)
        return (
            GrayImage(mapped[..., 0]),
            GrayImage(mapped[..., 1]),
            GrayImage(mapped[..., 2]),
        )

    def angular_deviation(self, other: "NormalMap") -> FloatArray:
        """Per-pixel angle in degrees between this map and another."""
        if self.shape != other.shape:
            raise DimensionError(f"cannot compare normal maps {self.shape} and {other.shape}")
        cosines = np.clip(np.sum(self.normals * other.normals, axis=2), -1.0, 1.0)
        return np.degrees(np.arccos(cosines))


@dataclass(frozen=True, eq=False)
class ScalarMap:
    """Non-negative per-pixel map (albedo, shading or diffuse), shape (h, w)."""

    values: FloatArray

    def __post_init__(self) -> None:
        values = _frozen_array(self.values, 2, "ScalarMap")
        if not np.all(np.isfinite(values)):
            raise ContractError("ScalarMap values must be finite")
        if values.min() < 0.0:
            raise ContractError(f"ScalarMap values must be non-negative, got {values.min()}")
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def as_image(self) -> GrayImage:
        """View a [0,1]-bounded map (such as the diffuse map) as an image."""
        return GrayImage(np.clip(self.values, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class LightingCoeffs:
    """Nine second-order spherical-harmonic lighting coefficients.

    Order: (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2).
    """

    l: FloatArray

    def __post_init__(self) -> None:
        coeffs = np.array(self.l, dtype=np.float64, copy=True)
        if coeffs.shape != (9,):
            raise DimensionError(f"LightingCoeffs needs exactly 9 entries, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ContractError("LightingCoeffs entries must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "l", coeffs)

    def scaled(self, factor: float) -> "LightingCoeffs":
        return LightingCoeffs(self.l * factor)


@dataclass(frozen=True, eq=False)
class CaptureTriplet:
    """The three captures of one presentation at illumination intensities 1, 2, 3."""

    i1: GrayImage
    i2: GrayImage
    i3: GrayImage

    def __post_init__(self) -> None:
        if not (self.i1.shape == self.i2.shape == self.i3.shape):
            raise DimensionError(
                f"triplet members differ in size: {self.i1.shape}, {self.i2.shape}, {self.i3.shape}"
            )

    @property
    def images(self) -> Tuple[GrayImage, GrayImage, GrayImage]:
        return (self.i1, self.i2, self.i3)


def from_bytes(
    raw: Union[bytes, bytearray, Sequence[int], npt.NDArray[np.uint8]], width: int, height: int
) -> GrayImage:
    """Build an image from an 8-bit row-major buffer; each pixel is raw / 255."""
    buffer = np.frombuffer(bytes(raw), dtype=np.uint8) if isinstance(raw, (bytes, bytearray)) else np.asarray(raw)
    if buffer.ndim != 1 or buffer.size != width * height:
        raise DimensionError(
            f"buffer of {buffer.size} values does not match {width}x{height} = {width * height}"
        )
    pixels = buffer.astype(np.float64).reshape(height, width) / 255.0
    return GrayImage(pixels)


def normalize_normals(raw: npt.ArrayLike) -> NormalMap:
    """Scale raw (h, w, 3) vectors to unit length, reflecting negative z into the upper hemisphere."""
    vectors = np.array(raw, dtype=np.float64, copy=True)
    if vectors.ndim != 3 or vectors.shape[2] != 3:
        raise DimensionError(f"expected an (h, w, 3) array of vectors, got shape {vectors.shape}")
    lengths = np.linalg.norm(vectors, axis=2)
    if np.any(lengths == 0.0) or not np.all(np.isfinite(lengths)):
        bad = np.argwhere((lengths == 0.0) | ~np.isfinite(lengths))[0]
        raise DegenerateNormalError(f"zero-length or non-finite normal at pixel {tuple(int(i) for i in bad)}")
    vectors[..., 2] = np.abs(vectors[..., 2])
    needs_scaling = np.abs(lengths - 1.0) > _RENORMALIZE_SLACK
    vectors[needs_scaling] = vectors[needs_scaling] / lengths[needs_scaling][:, None]
    return NormalMap(vectors)
