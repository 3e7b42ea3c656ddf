"""Lambertian spherical-harmonic rendering and single-image shape/material decomposition.

Shading at a pixel with unit normal n is the dot product of nine lighting
coefficients with the real second-order SH basis evaluated at n; the diffuse
map is albedo times shading. ``decompose`` inverts this model for one image by
alternating a least-squares lighting fit, a closed-form albedo update and a
projected gradient step on the normals, with a first-order smoothness prior on
the normals. Axes: x runs along image columns, y along image rows.

The albedo absorbs whatever the shading does not explain, so the data term
pins the normals only weakly; the shape comes mostly from the height-field
initialisation, which the iterations then regularise.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
import numpy.typing as npt
from scipy import ndimage, optimize

from src.config.settings import SolverConfig
from src.core.errors import ContractError, DimensionError
from src.models.decomposition_models import DecompositionResult
from src.models.image_models import (
    CaptureTriplet,
    GrayImage,
    LightingCoeffs,
    NormalMap,
    ScalarMap,
    UNIT_TOLERANCE,
)

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

SH_C0 = 0.282095
SH_C1 = 0.488603
SH_C2 = 1.092548
SH_C3 = 0.315392
SH_C4 = 0.546274

MIN_SIDE = 16
# Candidate ratios between blurred intensity and surface height in pixels.
HEIGHT_SCALES = np.geomspace(1.0, 4096.0, 25)
SCALE_FIT_SIDE = 64


def _basis(normals: FloatArray) -> FloatArray:
    x, y, z = normals[..., 0], normals[..., 1], normals[..., 2]
    return np.stack(
        [
            np.full_like(x, SH_C0),
            SH_C1 * y,
            SH_C1 * z,
            SH_C1 * x,
            SH_C2 * x * y,
            SH_C2 * y * z,
            SH_C3 * (3.0 * z * z - 1.0),
            SH_C2 * x * z,
            SH_C4 * (x * x - y * y),
        ],
        axis=-1,
    )


def _shading(normals: FloatArray, l: FloatArray) -> FloatArray:
    """Unclamped SH shading for every normal in an (..., 3) array."""
    x, y, z = normals[..., 0], normals[..., 1], normals[..., 2]
    return (
        SH_C0 * l[0]
        + SH_C1 * (l[1] * y + l[2] * z + l[3] * x)
        + SH_C2 * (l[4] * x * y + l[5] * y * z + l[7] * x * z)
        + SH_C3 * l[6] * (3.0 * z * z - 1.0)
        + SH_C4 * l[8] * (x * x - y * y)
    )


def _shading_gradient(normals: FloatArray, l: FloatArray) -> FloatArray:
    """Derivative of the unclamped shading with respect to each normal component."""
    x, y, z = normals[..., 0], normals[..., 1], normals[..., 2]
    d_x = SH_C1 * l[3] + SH_C2 * (l[4] * y + l[7] * z) + 2.0 * SH_C4 * l[8] * x
    d_y = SH_C1 * l[1] + SH_C2 * (l[4] * x + l[5] * z) - 2.0 * SH_C4 * l[8] * y
    d_z = SH_C1 * l[2] + SH_C2 * (l[5] * y + l[7] * x) + 6.0 * SH_C3 * l[6] * z
    return np.stack([d_x, d_y, d_z], axis=-1)


def sh_basis(normal: npt.ArrayLike) -> FloatArray:
    """Evaluate the nine real SH basis functions at a unit normal."""
    n = np.asarray(normal, dtype=np.float64)
    if n.shape != (3,):
        raise DimensionError(f"normal must be a 3-vector, got shape {n.shape}")
    if abs(float(np.linalg.norm(n)) - 1.0) > UNIT_TOLERANCE:
        raise ContractError(f"normal {n.tolist()} is not unit length")
    return _basis(n)


def render_shading(normal_map: NormalMap, lighting: LightingCoeffs) -> ScalarMap:
    return ScalarMap(np.maximum(_shading(normal_map.normals, lighting.l), 0.0))


def compose_diffuse(albedo: ScalarMap, shading: ScalarMap) -> ScalarMap:
    if albedo.shape != shading.shape:
        raise DimensionError(f"albedo {albedo.shape} and shading {shading.shape} differ in size")
    return ScalarMap(np.clip(albedo.values * shading.values, 0.0, 1.0))


def _smoothness(normals: FloatArray) -> float:
    d_cols = np.diff(normals, axis=1)
    d_rows = np.diff(normals, axis=0)
    return float(np.sum(d_cols * d_cols) + np.sum(d_rows * d_rows))


def decomposition_objective(
    image: FloatArray,
    normals: FloatArray,
    albedo: FloatArray,
    lighting: FloatArray,
    smoothness_weight: float,
) -> float:
    """Squared reconstruction error plus the weighted normal smoothness penalty."""
    residual = albedo * _shading(normals, lighting) - image
    return float(np.sum(residual * residual)) + smoothness_weight * _smoothness(normals)


def normal_gradient(
    image: FloatArray,
    normals: FloatArray,
    albedo: FloatArray,
    lighting: FloatArray,
    smoothness_weight: float,
) -> FloatArray:
    """Gradient of ``decomposition_objective`` with respect to the raw normal components."""
    residual = albedo * _shading(normals, lighting) - image
    gradient = (2.0 * residual * albedo)[..., None] * _shading_gradient(normals, lighting)

    d_cols = 2.0 * smoothness_weight * np.diff(normals, axis=1)
    gradient[:, 1:] += d_cols
    gradient[:, :-1] -= d_cols
    d_rows = 2.0 * smoothness_weight * np.diff(normals, axis=0)
    gradient[1:, :] += d_rows
    gradient[:-1, :] -= d_rows
    return gradient


def _project(normals: FloatArray) -> FloatArray:
    """Clamp into the camera-facing hemisphere and renormalise."""
    projected = normals.copy()
    projected[..., 2] = np.maximum(projected[..., 2], 0.0)
    lengths = np.linalg.norm(projected, axis=2)
    degenerate = lengths == 0.0
    projected[degenerate] = (0.0, 0.0, 1.0)
    lengths[degenerate] = 1.0
    return projected / lengths[..., None]


def _height_normals(dh_drow: FloatArray, dh_dcol: FloatArray, scale: float) -> FloatArray:
    normals = np.stack([-scale * dh_dcol, -scale * dh_drow, np.ones_like(dh_drow)], axis=-1)
    return normals / np.linalg.norm(normals, axis=-1)[..., None]


def _fit_lighting(design: FloatArray, target: FloatArray) -> Tuple[FloatArray, float]:
    """Least-squares lighting from the 9x9 normal equations, with its squared residual."""
    gram = design.T @ design
    lighting, *_ = np.linalg.lstsq(gram, design.T @ target, rcond=None)
    residual = design @ lighting - target
    return lighting, float(residual @ residual)


def initial_estimate(image: FloatArray, sigma: float) -> Tuple[FloatArray, FloatArray]:
    """Starting normals and lighting from the blurred image read as a height field.

    Under a frontal light brighter means closer to the camera, so the normals
    are n ~ (-s dh/dx, -s dh/dy, 1) for the blurred image h. The height scale s
    is the one whose normals, lit by their best SH lighting under a constant
    albedo, reproduce h most closely: a log-spaced grid search refined by a
    bounded scalar minimisation on a subsampled image.
    """
    blurred = ndimage.gaussian_filter(image, sigma=sigma, mode="nearest")
    dh_drow, dh_dcol = np.gradient(blurred)
    stride = max(1, min(image.shape) // SCALE_FIT_SIDE)
    sub_drow, sub_dcol = dh_drow[::stride, ::stride], dh_dcol[::stride, ::stride]
    target = blurred[::stride, ::stride].ravel()

    def misfit(log_scale: float) -> float:
        normals = _height_normals(sub_drow, sub_dcol, float(np.exp(log_scale)))
        return _fit_lighting(_basis(normals).reshape(-1, 9), target)[1]

    grid = np.log(HEIGHT_SCALES)
    errors = [misfit(float(value)) for value in grid]
    best = int(np.argmin(errors))
    log_scale, error = float(grid[best]), errors[best]
    bounds = (float(grid[max(best - 1, 0)]), float(grid[min(best + 1, len(grid) - 1)]))
    refined = optimize.minimize_scalar(misfit, bounds=bounds, method="bounded", options={"xatol": 1e-4})
    if refined.success and float(refined.fun) < error:
        log_scale, error = float(refined.x), float(refined.fun)
    logger.debug("height scale %.3f, misfit %.6e", np.exp(log_scale), error)

    normals = _height_normals(dh_drow, dh_dcol, float(np.exp(log_scale)))
    lighting, _ = _fit_lighting(_basis(normals).reshape(-1, 9), image.ravel())
    return normals, lighting


class _AlternatingSolver:
    """Holds the iterate of one decomposition run."""

    def __init__(self, image: FloatArray, config: SolverConfig):
        self.image = image
        self.config = config
        self.normals, self.lighting = initial_estimate(image, config.init_blur_sigma)
        # albedo = image admits an exact fit with constant shading.
        self.albedo = np.ones_like(image)
        self.step = config.normal_step
        self.energy = self._objective(self.normals, self.albedo, self.lighting)

    def _objective(self, normals: FloatArray, albedo: FloatArray, lighting: FloatArray) -> float:
        return decomposition_objective(
            self.image, normals, albedo, lighting, self.config.smoothness_weight
        )

    def update_lighting(self) -> None:
        design = (self.albedo[..., None] * _basis(self.normals)).reshape(-1, 9)
        candidate, _ = _fit_lighting(design, self.image.ravel())
        energy = self._objective(self.normals, self.albedo, candidate)
        if energy <= self.energy:
            self.lighting, self.energy = candidate, energy

    def update_albedo(self) -> None:
        shading = _shading(self.normals, self.lighting)
        proposal = np.clip(
            self.image / np.maximum(shading, self.config.shading_floor), 0.0, self.config.albedo_max
        )
        # Pixels decouple in the albedo, so keep whichever value fits better per pixel.
        old_error = (self.albedo * shading - self.image) ** 2
        new_error = (proposal * shading - self.image) ** 2
        albedo = np.where(new_error <= old_error, proposal, self.albedo)
        energy = self._objective(self.normals, albedo, self.lighting)
        if energy <= self.energy:
            self.albedo, self.energy = albedo, energy

    def update_normals(self) -> None:
        gradient = normal_gradient(
            self.image, self.normals, self.albedo, self.lighting, self.config.smoothness_weight
        )
        step = self.step
        for _ in range(self.config.max_step_halvings + 1):
            candidate = _project(self.normals - step * gradient)
            energy = self._objective(candidate, self.albedo, self.lighting)
            if energy <= self.energy:
                self.normals, self.energy = candidate, energy
                self.step = min(2.0 * step, self.config.normal_step)
                return
            step /= 2.0
        self.step = step

    def result(self, trace: List[float]) -> DecompositionResult:
        normal_map = NormalMap(self.normals)
        lighting = LightingCoeffs(self.lighting)
        albedo = ScalarMap(self.albedo)
        shading = render_shading(normal_map, lighting)
        diffuse = compose_diffuse(albedo, shading)
        residual = diffuse.values - self.image
        return DecompositionResult(
            normal_map=normal_map,
            albedo=albedo,
            shading=shading,
            diffuse=diffuse,
            lighting=lighting,
            residual_rmse=float(np.sqrt(np.mean(residual * residual))),
            objective_trace=tuple(trace),
        )


def decompose(image: GrayImage, config: Optional[SolverConfig] = None) -> DecompositionResult:
    """Split one capture into normal, albedo, shading and diffuse maps plus SH lighting.

    The solver has no random component, so repeated calls are bitwise identical;
    ``config.seed`` is kept with the configuration for provenance only. An
    iteration that lowers the objective by less than ``convergence_tol`` times
    the image energy (the objective of an all-zero reconstruction) ends the run.
    """
    config = config or SolverConfig()
    if image.width < MIN_SIDE or image.height < MIN_SIDE:
        raise ContractError(f"decomposition needs at least {MIN_SIDE}x{MIN_SIDE} pixels, got {image.shape}")

    solver = _AlternatingSolver(image.pixels, config)
    scale = float(np.sum(image.pixels * image.pixels))
    trace = [solver.energy]
    for iteration in range(config.max_outer_iterations):
        previous = solver.energy
        solver.update_lighting()
        solver.update_albedo()
        solver.update_normals()
        trace.append(solver.energy)
        logger.debug("iteration %d objective %.6e step %.3e", iteration + 1, solver.energy, solver.step)
        if previous - solver.energy <= config.convergence_tol * scale:
            break
    return solver.result(trace)


def decompose_triplet(
    triplet: CaptureTriplet, config: Optional[SolverConfig] = None
) -> Tuple[DecompositionResult, DecompositionResult, DecompositionResult]:
    """Decompose the three illumination captures independently, in order."""
    first, second, third = (decompose(image, config) for image in triplet.images)
    return first, second, third
