"""Texture descriptors: uniform LBP, LPQ and BSIF histograms.

All three descriptors code each interior pixel from its neighbourhood and
histogram the codes. LPQ and BSIF responses are taken relative to the window
centre, sum_q f(q) * (I(p + q) - I(p)), which equals plain correlation for
zero-sum filters and gives exactly zero on flat regions.
"""

import logging
import warnings
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from skimage.feature import local_binary_pattern

from src.core.errors import ContractError, ConvergenceWarning, SizeError, TrainingError
from src.models.feature_models import (
    LBP_BINS,
    LPQ_BINS,
    DescriptorKind,
    FeatureVector,
    FilterBank,
    SourceKind,
)
from src.models.image_models import GrayImage, NormalMap, ScalarMap

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# Neighbour i sits at angle 2*pi*i/8, counter-clockwise from the right, and sets bit i.
LBP_POINTS = 8
LBP_RADIUS = 1.0

LPQ_WINDOW = 7
LPQ_CORRELATION = 0.9

BSIF_MIN_PATCHES = 5000
BSIF_MAX_ITERATIONS = 200
BSIF_TOLERANCE = 1e-5


def _transitions(code: int) -> int:
    return sum(((code >> i) & 1) != ((code >> ((i + 1) % 8)) & 1) for i in range(8))


UNIFORM_PATTERNS: Tuple[int, ...] = tuple(code for code in range(256) if _transitions(code) <= 2)
_LBP_LOOKUP = np.full(256, len(UNIFORM_PATTERNS), dtype=np.int64)
_LBP_LOOKUP[list(UNIFORM_PATTERNS)] = np.arange(len(UNIFORM_PATTERNS))


def _normalized(counts: IntArray) -> FloatArray:
    total = int(counts.sum())
    if total == 0:
        raise SizeError("image has no valid descriptor positions")
    return counts.astype(np.float64) / total


def lbp_codes(image: GrayImage) -> IntArray:
    """Raw 8-bit LBP code of every interior pixel, shape (h - 2, w - 2).

    A neighbour at or above the centre sets its bit; diagonal neighbours are
    bilinearly interpolated.
    """
    if image.width < 3 or image.height < 3:
        raise SizeError(f"LBP needs at least 3x3 pixels, got {image.shape}")
    with warnings.catch_warnings():
        # Float input is intended here.
        warnings.filterwarnings("ignore", message=".*floating-point images", category=UserWarning)
        pixels = np.array(image.pixels, dtype=np.float64)
        codes = local_binary_pattern(pixels, LBP_POINTS, LBP_RADIUS, method="default")
    return codes[1:-1, 1:-1].astype(np.int64)


def lbp_histogram(image: GrayImage) -> FeatureVector:
    """59-bin uniform-2 LBP histogram (58 uniform patterns in code order, then the rest)."""
    counts = np.bincount(_LBP_LOOKUP[lbp_codes(image)].ravel(), minlength=LBP_BINS)
    return FeatureVector(_normalized(counts), DescriptorKind.LBP, SourceKind.RAW)


def lpq_filters(window: int = LPQ_WINDOW) -> FloatArray:
    """Real and imaginary STFT kernels at the four lowest non-DC frequencies, shape (8, w, w).

    Rows are the real parts for u = (a,0), (0,a), (a,a), (a,-a), then the
    imaginary parts in the same order, with a = 1/window and u given as
    (column frequency, row frequency).
    """
    a = 1.0 / window
    radius = (window - 1) // 2
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    q_row, q_col = np.meshgrid(offsets, offsets, indexing="ij")
    frequencies = ((a, 0.0), (0.0, a), (a, a), (a, -a))
    kernels = [np.exp(-2j * np.pi * (u_col * q_col + u_row * q_row)) for u_col, u_row in frequencies]
    return np.stack([k.real for k in kernels] + [k.imag for k in kernels])


def lpq_whitening(window: int = LPQ_WINDOW, correlation: float = LPQ_CORRELATION) -> FloatArray:
    """Decorrelating transform for the 8 LPQ coefficients under a rho**distance pixel model."""
    radius = (window - 1) // 2
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    q_row, q_col = np.meshgrid(offsets, offsets, indexing="ij")
    positions = np.stack([q_row.ravel(), q_col.ravel()], axis=1)
    distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
    pixel_covariance = correlation**distances
    kernels = lpq_filters(window).reshape(8, -1)
    coefficient_covariance = kernels @ pixel_covariance @ kernels.T
    _, _, v_transposed = np.linalg.svd(coefficient_covariance)
    return v_transposed


def _centred_responses(pixels: FloatArray, filters: FloatArray) -> FloatArray:
    """Valid-region responses of each filter, referenced to the window centre."""
    count, side, _ = filters.shape
    radius = side // 2
    rows = pixels.shape[0] - side + 1
    cols = pixels.shape[1] - side + 1
    centre = pixels[radius : radius + rows, radius : radius + cols]
    responses = np.zeros((count, rows, cols))
    for q_row in range(side):
        for q_col in range(side):
            difference = pixels[q_row : q_row + rows, q_col : q_col + cols] - centre
            responses += filters[:, q_row, q_col][:, None, None] * difference
    return responses


def _sign_codes(responses: FloatArray) -> IntArray:
    codes = np.zeros(responses.shape[1:], dtype=np.int64)
    for bit in range(responses.shape[0]):
        codes |= (responses[bit] > 0.0).astype(np.int64) << bit
    return codes


def lpq_codes(image: GrayImage) -> IntArray:
    """8-bit LPQ code of every pixel whose 7x7 window fits inside the image."""
    if image.width < LPQ_WINDOW or image.height < LPQ_WINDOW:
        raise SizeError(f"LPQ needs at least {LPQ_WINDOW}x{LPQ_WINDOW} pixels, got {image.shape}")
    responses = _centred_responses(image.pixels, lpq_filters())
    whitened = np.tensordot(lpq_whitening(), responses, axes=(1, 0))
    return _sign_codes(whitened)


def lpq_histogram(image: GrayImage) -> FeatureVector:
    counts = np.bincount(lpq_codes(image).ravel(), minlength=LPQ_BINS)
    return FeatureVector(_normalized(counts), DescriptorKind.LPQ, SourceKind.RAW)


def bsif_codes(image: GrayImage, bank: FilterBank) -> IntArray:
    """k-bit BSIF code of every pixel whose filter window fits inside the image."""
    if image.width <= bank.s or image.height <= bank.s:
        raise SizeError(f"BSIF with {bank.s}x{bank.s} filters needs a larger image than {image.shape}")
    return _sign_codes(_centred_responses(image.pixels, bank.filters))


def bsif_histogram(image: GrayImage, bank: FilterBank) -> FeatureVector:
    counts = np.bincount(bsif_codes(image, bank).ravel(), minlength=bank.bins)
    return FeatureVector(_normalized(counts), DescriptorKind.BSIF, SourceKind.RAW)


def _symmetric_decorrelation(weights: FloatArray) -> FloatArray:
    eigenvalues, eigenvectors = np.linalg.eigh(weights @ weights.T)
    inverse_root = eigenvectors @ np.diag(1.0 / np.sqrt(eigenvalues)) @ eigenvectors.T
    return inverse_root @ weights


def learn_bsif_filters(patches: npt.ArrayLike, k: int = 8, seed: int = 0) -> FilterBank:
    """Learn k zero-mean s x s filters by PCA whitening followed by symmetric FastICA.

    Uses the cubic nonlinearity. If ICA does not reach the tolerance within the
    iteration budget, the iterate with the smallest update is returned and the
    bank's ``converged`` flag is False.
    """
    samples = np.asarray(patches, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[1] != samples.shape[2]:
        raise ContractError(f"patches must have shape (n, s, s), got {samples.shape}")
    count, side, _ = samples.shape
    if count < BSIF_MIN_PATCHES:
        raise TrainingError(f"BSIF learning needs at least {BSIF_MIN_PATCHES} patches, got {count}")
    if not 1 <= k <= side * side - 1:
        raise ContractError(f"filter count {k} must lie in [1, {side * side - 1}]")

    data = samples.reshape(count, side * side)
    data = data - data.mean(axis=1, keepdims=True)
    covariance = data.T @ data / count
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    leading = np.argsort(eigenvalues)[::-1][:k]
    if eigenvalues[leading[-1]] <= 1e-12:
        raise TrainingError(f"patches span fewer than {k} dimensions")
    whitening = (eigenvectors[:, leading] / np.sqrt(eigenvalues[leading])).T
    whitened = data @ whitening.T

    rng = np.random.default_rng(seed)
    rotation = _symmetric_decorrelation(rng.standard_normal((k, k)))
    best_rotation, best_change = rotation, np.inf
    converged = False
    iteration = 0
    for iteration in range(1, BSIF_MAX_ITERATIONS + 1):
        projections = whitened @ rotation.T
        updated = (projections**3).T @ whitened / count - 3.0 * rotation
        updated = _symmetric_decorrelation(updated)
        change = float(np.max(np.abs(np.abs(np.diag(updated @ rotation.T)) - 1.0)))
        rotation = updated
        if change < best_change:
            best_rotation, best_change = updated, change
        if change < BSIF_TOLERANCE:
            converged = True
            break
    logger.debug("ICA stopped after %d iterations (change %.2e, converged=%s)", iteration, best_change, converged)
    if not converged:
        warnings.warn(
            f"BSIF ICA did not converge in {iteration} iterations (best change {best_change:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )

    filters = (best_rotation @ whitening).reshape(k, side, side)
    filters = filters - filters.mean(axis=(1, 2), keepdims=True)
    return FilterBank(filters, converged=converged, iterations=iteration)


def sample_patches(
    images: Sequence[GrayImage], side: int, count: int, seed: int = 0
) -> FloatArray:
    """Draw ``count`` s x s patches uniformly over positions of the given images."""
    if not images:
        raise TrainingError("no images to sample patches from")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(images), size=count)
    patches = np.empty((count, side, side))
    for index, image_index in enumerate(picks):
        pixels = images[int(image_index)].pixels
        if pixels.shape[0] < side or pixels.shape[1] < side:
            raise SizeError(f"image {pixels.shape} is smaller than the {side}x{side} patch")
        row = int(rng.integers(0, pixels.shape[0] - side + 1))
        col = int(rng.integers(0, pixels.shape[1] - side + 1))
        patches[index] = pixels[row : row + side, col : col + side]
    return patches


def _histogram(image: GrayImage, kind: DescriptorKind, bank: Optional[FilterBank]) -> FeatureVector:
    if kind is DescriptorKind.LBP:
        return lbp_histogram(image)
    if kind is DescriptorKind.LPQ:
        return lpq_histogram(image)
    if bank is None:
        raise ContractError("BSIF extraction needs a filter bank")
    return bsif_histogram(image, bank)


def extract(
    source: Union[GrayImage, NormalMap, ScalarMap],
    kind: DescriptorKind,
    bank: Optional[FilterBank] = None,
) -> FeatureVector:
    """Describe a raw image, a diffuse map or a normal map.

    Normal maps are split into three gray channels (v + 1) / 2, each channel
    is described separately and the concatenated histogram is renormalised.
    """
    if isinstance(source, NormalMap):
        parts: List[FloatArray] = [_histogram(channel, kind, bank).bins for channel in source.channels()]
        stacked = np.concatenate(parts)
        return FeatureVector(stacked / stacked.sum(), kind, SourceKind.NORMAL_MAP)
    if isinstance(source, ScalarMap):
        return FeatureVector(_histogram(source.as_image(), kind, bank).bins, kind, SourceKind.DIFFUSE_MAP)
    return FeatureVector(_histogram(source, kind, bank).bins, kind, SourceKind.RAW)
